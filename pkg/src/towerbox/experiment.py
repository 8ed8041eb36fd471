"""Paired protected/unprotected experiment, noise calibration and CSV reports.

Noise calibration
-----------------
The simulator's noise level has no physical anchor, so it is fixed by a
search. For each sigma on a 0.25-step grid, ``CALIBRATION_RUNS`` unprotected
sets of 2000 traces are generated from the calibration seed family (key
``DEFAULT_KEY``). Each run yields the CPA measurements-to-disclosure (step 50)
and whether CPA on the first 1000 traces ranks the true byte first. A sigma is
feasible when the median disclosure lies in [500, 2000] and the 1000-trace
success rate is at least 90%. The chosen sigma is the middle of the feasible
grid points (upper one on ties), which keeps it away from both edges.

``calibrate_sigma()`` reproduces the result frozen in ``SIGMA_STAR``:
feasible band 8.75..9.5, chosen 9.25. Acceptance runs use a different seed
family (``ACCEPTANCE_BASE_SEED``).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import attacks, iso
from .leakage import LeakConfig, generate_set, write_traces

DEFAULT_KEY = bytes.fromhex("3c1f8a52e06b9d47c2a5f0137e8b64d9")
SIGMA_STAR = 9.25

CALIBRATION_BASE_SEED = 0xCA1B0001
CALIBRATION_RUNS = 200
CALIBRATION_GRID = tuple(float(s) for s in np.arange(4.0, 14.01, 0.25))
CALIBRATION_N = 2000
CALIBRATION_STEP = 50
DISCLOSURE_WINDOW = (500, 2000)
MIN_SUCCESS = 0.90
ACCEPTANCE_BASE_SEED = 0x5EED0001


def run_seed(base: int, i: int) -> int:
    """i-th seed of a family; both 16-bit halves stay nonzero for small i."""
    return (base + i * 0x00010001) & 0xFFFFFFFF


@dataclass
class CalibrationPoint:
    sigma: float
    median_disclosure: float
    success_rate: float


def disclosure_stats(sigma: float, key: bytes = DEFAULT_KEY, base_seed=CALIBRATION_BASE_SEED,
                     runs: int = CALIBRATION_RUNS, n_max: int = CALIBRATION_N,
                     step: int = CALIBRATION_STEP,
                     success_n: int = 1000) -> CalibrationPoint:
    cfg = LeakConfig("unprotected", noise_sigma=sigma)
    mtds = []
    wins = 0
    for i in range(runs):
        ts = generate_set(n_max, key, cfg, run_seed(base_seed, i))
        d = attacks.measurements_to_disclosure(ts, key[0], step=step)
        mtds.append(d.disclosed_at if d.disclosed else np.inf)
        wins += attacks.cpa_attack(ts.head(success_n)).rank_of(key[0]) == 1
    return CalibrationPoint(float(sigma), float(np.median(mtds)), wins / runs)


def feasible(p: CalibrationPoint, min_success: float = MIN_SUCCESS) -> bool:
    lo, hi = DISCLOSURE_WINDOW
    return lo <= p.median_disclosure <= hi and p.success_rate >= min_success


def calibrate_sigma(grid=CALIBRATION_GRID, min_success: float = MIN_SUCCESS, **kwargs):
    """Returns (chosen sigma or None, list of CalibrationPoint)."""
    points = [disclosure_stats(s, **kwargs) for s in grid]
    ok = sorted(p.sigma for p in points if feasible(p, min_success))
    return (ok[len(ok) // 2] if ok else None), points


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

REPORT_HEADER = ("guess", "peak_statistic", "peak_sample_index", "rank")


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def report_rows(result: attacks.AttackResult) -> list:
    ranks = np.empty(256, dtype=np.int64)
    ranks[result.ranking] = np.arange(1, 257)
    return [(g, _fmt(result.peaks[g]), int(result.peak_index[g]), int(ranks[g]))
            for g in range(256)]


def emit_report(result: attacks.AttackResult, path, top: int = 5, extra_guesses=()) -> tuple:
    """Write the per-guess ranking CSV and a per-sample curve dump for the top guesses.

    The curve file sits next to the report as <stem>_curves.csv, one row per
    guess: guess, rank, then one column per sample.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        w.writerows(report_rows(result))
    curves_path = path.with_name(path.stem + "_curves.csv")
    guesses = [int(g) for g in result.ranking[:top]]
    guesses += [g for g in extra_guesses if g not in guesses]
    with open(curves_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["guess", "rank"] + [f"s{i}" for i in range(result.curves.shape[1])])
        for g in guesses:
            w.writerow([g, result.rank_of(g)] + [_fmt(v) for v in result.curves[g]])
    return path, curves_path


def write_disclosure(d: attacks.Disclosure, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["prefix_size", "rank_of_true_key"])
        w.writerows(zip(d.prefix_sizes.tolist(), d.ranks.tolist()))


def read_report(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != REPORT_HEADER:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    return [(int(g), float(p), int(i), int(r)) for g, p, i, r in rows[1:]]


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    key: bytes = DEFAULT_KEY
    seed: int = ACCEPTANCE_BASE_SEED
    n_unprotected: int = 1000
    n_protected: int = 6000
    noise_sigma: float = SIGMA_STAR
    decoys: bool = True
    catalog_path: str | None = None
    out_dir: str = "experiment_out"
    target_byte: int = 0
    step: int = 50
    selection: str = "hw4"

    def validate(self):
        if len(self.key) != 16:
            raise ValueError("key must be 16 bytes")
        if not 0 <= self.seed < 2**32 or (self.seed >> 16) == 0 or (self.seed & 0xFFFF) == 0:
            raise ValueError("seed must be 32-bit with both 16-bit halves nonzero")
        if self.n_unprotected < 1 or self.n_protected < 1:
            raise ValueError("trace counts must be at least 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 <= self.target_byte < 16:
            raise ValueError("target_byte must be in 0..15")
        if self.step < 1:
            raise ValueError("step must be positive")
        attacks.parse_selection(self.selection)
        if self.catalog_path is not None and not Path(self.catalog_path).is_file():
            raise FileNotFoundError(f"catalog not found: {self.catalog_path}")


def _arm_summary(ts, key_byte, step, selection, interior=None):
    out = {"n_traces": len(ts)}
    for method in ("cpa", "dom"):
        if method == "cpa":
            res = attacks.cpa_attack(ts)
        else:
            res = attacks.dom_attack(ts, selection=selection)
        d = attacks.measurements_to_disclosure(ts, key_byte, method, selection, step)
        out[method] = {
            "result": res,
            "disclosure": d,
            "true_rank": res.rank_of(key_byte),
            "best_guess": res.best_guess,
            "true_peak": float(res.peaks[key_byte]),
            "best_peak": float(res.peaks[res.best_guess]),
            "peak_sample": res.peak_location,
            "disclosed_at": d.disclosed_at,
        }
    if interior is not None:
        out["cpa_interior_rank"] = attacks.cpa_attack(ts, samples=interior).rank_of(key_byte)
    return out


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Generate both arms on the same plaintext stream, attack each, write all outputs."""
    cfg.validate()
    catalog = iso.load_catalog(cfg.catalog_path) if cfg.catalog_path else iso.default_catalog(32)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kb = cfg.key[cfg.target_byte]

    arms = {}
    for mode, n in (("unprotected", cfg.n_unprotected), ("protected", cfg.n_protected)):
        lc = LeakConfig(mode, cfg.decoys, cfg.noise_sigma, cfg.target_byte)
        ts = generate_set(n, cfg.key, lc, cfg.seed, catalog)
        write_traces(ts, out / f"{mode}.bin")
        interior = None
        if mode == "protected":
            interior = [i for i, p in enumerate(lc.points) if p not in ("key_add", "sbox_out")]
        arm = _arm_summary(ts, kb, cfg.step, cfg.selection, interior)
        for method in ("cpa", "dom"):
            m = arm[method]
            emit_report(m["result"], out / f"{mode}_{method}.csv", extra_guesses=(kb,))
            write_disclosure(m["disclosure"], out / f"{mode}_{method}_mtd.csv")
        arms[mode] = arm

    summary = {
        "key_byte": kb,
        "noise_sigma": cfg.noise_sigma,
        "decoys": cfg.decoys,
        "catalog_size": len(catalog),
        "arms": {
            mode: {
                "n_traces": arm["n_traces"],
                **({"cpa_interior_rank": arm["cpa_interior_rank"]}
                   if "cpa_interior_rank" in arm else {}),
                **{method: {k: v for k, v in arm[method].items()
                            if k not in ("result", "disclosure")}
                   for method in ("cpa", "dom")},
            }
            for mode, arm in arms.items()
        },
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    (out / "summary.csv").write_text(summary_csv(summary))
    return summary


def summary_csv(summary: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode", "method", "n_traces", "true_rank", "best_guess", "true_peak",
                "best_peak", "peak_sample", "disclosed_at"])
    for mode, arm in summary["arms"].items():
        for method in ("cpa", "dom"):
            m = arm[method]
            w.writerow([mode, method, arm["n_traces"], m["true_rank"], m["best_guess"],
                        _fmt(m["true_peak"]), _fmt(m["best_peak"]), m["peak_sample"],
                        "" if m["disclosed_at"] is None else m["disclosed_at"]])
    return buf.getvalue()
