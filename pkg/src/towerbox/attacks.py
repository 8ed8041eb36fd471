"""First-order CPA and distance-of-means DPA on the first-round S-box output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .aes import SBOX
from .leakage import HW, TraceSet

GUESSES = np.arange(256, dtype=np.uint8)


def hw_predictions(pt_bytes) -> np.ndarray:
    """(256, n) HW(S(pt ^ g)) for every guess g."""
    pt = np.asarray(pt_bytes, dtype=np.uint8)
    return HW[SBOX[pt[None, :] ^ GUESSES[:, None]]].astype(np.float64)


def parse_selection(selection) -> tuple:
    """'hw4' or 'monobit:<b>' (or an already parsed tuple) -> ('hw4',) / ('monobit', b)."""
    if isinstance(selection, tuple):
        return selection
    if selection == "hw4":
        return ("hw4",)
    if isinstance(selection, str) and selection.startswith("monobit:"):
        b = int(selection.split(":", 1)[1])
        if not 0 <= b < 8:
            raise ValueError("monobit index must be in 0..7")
        return ("monobit", b)
    raise ValueError(f"unknown selection {selection!r}; use hw4 or monobit:<b>")


def selection_bits(pt_bytes, selection="hw4") -> np.ndarray:
    """(256, n) selection function D for every guess: 1 puts a trace in the first set."""
    sel = parse_selection(selection)
    pt = np.asarray(pt_bytes, dtype=np.uint8)
    v = SBOX[pt[None, :] ^ GUESSES[:, None]]
    if sel[0] == "hw4":
        return (HW[v] > 4).astype(np.uint8)
    return ((v >> sel[1]) & 1).astype(np.uint8)


def pearson(t, p) -> tuple:
    """Sample Pearson correlation. Returns (r, degenerate); r = 0 when either input is constant."""
    t = np.asarray(t, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if t.shape != p.shape or t.size < 2:
        raise ValueError("need two equal-length inputs with at least 2 values")
    tc = t - t.mean()
    pc = p - p.mean()
    vt = np.dot(tc, tc)
    vp = np.dot(pc, pc)
    if vt <= 0 or vp <= 0:
        return 0.0, True
    r = float(np.dot(tc, pc) / np.sqrt(vt * vp))
    return min(1.0, max(-1.0, r)), False


@dataclass
class AttackResult:
    method: str
    curves: np.ndarray      # (256, S) correlation or mean difference
    flags: np.ndarray       # (256,) degenerate / empty-partition guesses
    peaks: np.ndarray       # (256,) max |statistic| over samples
    peak_index: np.ndarray  # (256,) sample index of that maximum
    ranking: np.ndarray     # guesses, best first
    n_traces: int

    @property
    def best_guess(self) -> int:
        return int(self.ranking[0])

    @property
    def peak_location(self) -> int:
        return int(self.peak_index[self.best_guess])

    def rank_of(self, guess: int) -> int:
        """1-based rank of a guess."""
        return int(np.nonzero(self.ranking == guess)[0][0]) + 1


def rank_guesses(peaks) -> np.ndarray:
    """Descending by peak, ties to the lower guess."""
    return np.lexsort((np.arange(len(peaks)), -np.asarray(peaks)))


def _result(method, curves, flags, n):
    mag = np.abs(curves)
    peak_index = mag.argmax(axis=1)
    peaks = mag[np.arange(mag.shape[0]), peak_index]
    return AttackResult(method, curves, flags, peaks, peak_index, rank_guesses(peaks), n)


def _columns(ts: TraceSet, byte_index: int, samples=None):
    traces = np.asarray(ts.samples, dtype=np.float64)
    if samples is not None:
        traces = traces[:, list(samples)]
    return ts.plaintexts[:, byte_index], traces


def cpa_attack(ts: TraceSet, byte_index: int | None = None, samples=None) -> AttackResult:
    """samples optionally restricts the attack to a subset of sample columns."""
    byte_index = ts.config.target_byte if byte_index is None else byte_index
    pt, traces = _columns(ts, byte_index, samples)
    n = len(pt)
    corr, degen = _kernels.corr_checkpoints(hw_predictions(pt), traces, [n])
    return _result("cpa", corr[0], degen[0].all(axis=1), n)


def dom_attack(ts: TraceSet, byte_index: int | None = None, selection="hw4",
               samples=None) -> AttackResult:
    byte_index = ts.config.target_byte if byte_index is None else byte_index
    pt, traces = _columns(ts, byte_index, samples)
    n = len(pt)
    diff, empty = _kernels.dom_checkpoints(selection_bits(pt, selection), traces, [n])
    return _result("dom", diff[0], empty[0], n)


@dataclass
class Disclosure:
    prefix_sizes: np.ndarray
    ranks: np.ndarray          # 1-based rank of the true byte at each prefix
    disclosed_at: int | None   # None: never stably first

    @property
    def disclosed(self) -> bool:
        return self.disclosed_at is not None


def checkpoints_for(n: int, step: int) -> np.ndarray:
    if step < 1:
        raise ValueError("step must be positive")
    return np.arange(step, n + 1, step, dtype=np.int64)


def prefix_ranks(ts: TraceSet, true_key_byte: int, method="cpa", selection="hw4",
                 step: int = 50, byte_index: int | None = None) -> tuple:
    byte_index = ts.config.target_byte if byte_index is None else byte_index
    pt, traces = _columns(ts, byte_index)
    cps = checkpoints_for(len(pt), step)
    if method == "cpa":
        stats, _ = _kernels.corr_checkpoints(hw_predictions(pt), traces, cps)
    elif method == "dom":
        stats, _ = _kernels.dom_checkpoints(selection_bits(pt, selection), traces, cps)
    else:
        raise ValueError(f"unknown attack method {method!r}")
    peaks = np.abs(stats).max(axis=2)
    ranks = np.array([int(np.nonzero(rank_guesses(pk) == true_key_byte)[0][0]) + 1
                      for pk in peaks])
    return cps, ranks


def measurements_to_disclosure(ts: TraceSet, true_key_byte: int, method="cpa",
                               selection="hw4", step: int = 50,
                               byte_index: int | None = None) -> Disclosure:
    """Smallest scanned prefix from which the true byte ranks first at every larger prefix."""
    cps, ranks = prefix_ranks(ts, true_key_byte, method, selection, step, byte_index)
    at = None
    for size, rank in zip(cps[::-1], ranks[::-1]):
        if rank != 1:
            break
        at = int(size)
    return Disclosure(cps, ranks, at)
