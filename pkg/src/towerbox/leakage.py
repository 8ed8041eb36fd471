"""Hamming-weight power model of the first-round S-box of one key byte.

Each trace has one sample per leak point:

  unprotected: key_add, sbox_out
  protected:   key_add, mapped, sum_hl, sq_lambda, cross, det, det_inv,
               inv_b, pre_affine, sbox_out

sample = sum of HW(value) over the values present at the point, plus
Gaussian noise. With decoys on, the sbox_out point also carries the two
decoy delta^-1 products of the tower inverse.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aes import SBOX, encrypt_blocks, packed_for, sbox_composite_stages, sbox_lut
from .gf import matvec_gf2
from .lfsr import RandomizationContext

UNPROTECTED_POINTS = ("key_add", "sbox_out")
PROTECTED_POINTS = ("key_add", "mapped", "sum_hl", "sq_lambda", "cross", "det", "det_inv",
                    "inv_b", "pre_affine", "sbox_out")
MODES = ("unprotected", "protected")

HW = np.array([bin(v).count("1") for v in range(256)], dtype=np.uint8)


@dataclass(frozen=True)
class LeakConfig:
    mode: str = "unprotected"
    decoys: bool = True
    noise_sigma: float = 0.0
    target_byte: int = 0
    algorithmic_noise: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 <= self.target_byte < 16:
            raise ValueError("target_byte must be in 0..15")

    @property
    def points(self) -> tuple:
        return PROTECTED_POINTS if self.mode == "protected" else UNPROTECTED_POINTS

    @property
    def samples_per_trace(self) -> int:
        return len(self.points)

    @property
    def sbox_sample(self) -> int:
        return self.points.index("sbox_out")


@dataclass
class Trace:
    plaintext: bytes
    ciphertext: bytes
    samples: np.ndarray
    set_id: int | None = None


@dataclass
class TraceSet:
    config: LeakConfig
    plaintexts: np.ndarray   # (n, 16) uint8
    ciphertexts: np.ndarray  # (n, 16) uint8
    samples: np.ndarray      # (n, S) float32
    seed: int | None = None
    key_fingerprint: bytes = b"\0" * 16
    set_ids: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return self.samples.shape[0]

    def __getitem__(self, i) -> Trace:
        sid = None if self.set_ids is None else int(self.set_ids[i])
        return Trace(bytes(self.plaintexts[i]), bytes(self.ciphertexts[i]), self.samples[i], sid)

    def head(self, n: int) -> "TraceSet":
        return TraceSet(self.config, self.plaintexts[:n], self.ciphertexts[:n], self.samples[:n],
                        self.seed, self.key_fingerprint,
                        None if self.set_ids is None else self.set_ids[:n])


def key_fingerprint(key: bytes) -> bytes:
    """First 16 bytes of SHA-256(key)."""
    return hashlib.sha256(bytes(key)).digest()[:16]


def leak_points(pt_byte: int, key_byte: int, backend="lut", decoys=None) -> list:
    """Values present at each leak point, one tuple per point.

    backend is "lut" for the unprotected device or a ParameterSet for the
    protected one; decoys is an optional pair of decoy ParameterSets.
    """
    x = pt_byte ^ key_byte
    if isinstance(backend, str):
        return [(x,), (sbox_lut(x),)]
    st = sbox_composite_stages(x, backend)
    i = st.inversion
    out = (st.out,)
    if decoys:
        out += tuple(matvec_gf2(d.delta_inv, i.out) for d in decoys)
    return [(x,), (st.mapped,), (i.sum_hl,), (i.sq_lambda,), (i.cross,), (i.det,),
            (i.det_inv,), (i.out,), (st.pre_affine,), out]


def _hw_sum(values) -> int:
    return sum(bin(v).count("1") for v in values)


def sample_trace(pt: bytes, key: bytes, cfg: LeakConfig, ctx: RandomizationContext | None,
                 noise_rng: np.random.Generator) -> Trace:
    """One trace; a protected config draws its set (and decoys) from ctx."""
    pt = bytes(pt)
    key = bytes(key)
    b = cfg.target_byte
    set_id = None
    if cfg.mode == "protected":
        set_id = ctx.select_index()
        ps = ctx.catalog[set_id]
        dec = None
        if cfg.decoys:
            dec = [ctx.catalog[j] for j in ctx.select_decoys(set_id)]
        points = leak_points(pt[b], key[b], ps, dec)
        ct = bytes(encrypt_blocks(pt, key, ps))
    else:
        points = leak_points(pt[b], key[b])
        ct = bytes(encrypt_blocks(pt, key))
    samples = np.array([_hw_sum(v) for v in points], dtype=np.float64)
    if cfg.algorithmic_noise:
        samples += sum(int(HW[SBOX[pt[j] ^ key[j]]]) for j in range(16) if j != b)
    if cfg.noise_sigma > 0:
        samples += noise_rng.normal(0.0, cfg.noise_sigma, samples.shape)
    return Trace(pt, ct, samples.astype(np.float32), set_id)


def _streams(seed: int):
    pt_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(pt_ss), np.random.default_rng(noise_ss)


def make_context(seed: int, catalog) -> RandomizationContext:
    return RandomizationContext.from_seed(seed, catalog)


def generate_set(n: int, key: bytes, cfg: LeakConfig, seed: int, catalog=None) -> TraceSet:
    """n traces with uniform random plaintexts.

    The plaintext stream depends only on seed, so protected and unprotected
    sets with the same seed see the same plaintexts. A protected set also
    seeds its RandomizationContext from the same 32-bit seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    key = bytes(key)
    if len(key) != 16:
        raise ValueError("key must be 16 bytes")
    pt_rng, noise_rng = _streams(seed)
    # raw bytes keep every prefix identical across set sizes
    pts = np.frombuffer(pt_rng.bytes(16 * n), dtype=np.uint8).reshape(n, 16).copy()
    kb = key[cfg.target_byte]
    x = pts[:, cfg.target_byte] ^ np.uint8(kb)
    set_ids = None

    if cfg.mode == "protected":
        if catalog is None:
            raise ValueError("protected mode needs a catalog")
        ctx = make_context(seed, catalog)
        packed = ctx.packed
        set_ids = ctx.schedule(n)
        cts = encrypt_blocks(pts, key, packed, set_ids)
        inter = packed.tower_points(x, set_ids)
        sbox_out = SBOX[x]
        leak = np.empty((n, len(PROTECTED_POINTS)), dtype=np.float64)
        leak[:, 0] = HW[x]
        leak[:, 1:9] = HW[inter]
        leak[:, 9] = HW[sbox_out]
        if cfg.decoys:
            dec = ctx.decoy_schedule(set_ids)
            inv_b = inter[:, 6]
            for c in range(2):
                leak[:, 9] += HW[packed.delta_inv_apply(inv_b, dec[:, c])]
    else:
        cts = encrypt_blocks(pts, key)
        leak = np.stack([HW[x], HW[SBOX[x]]], axis=1).astype(np.float64)

    if cfg.algorithmic_noise:
        others = [j for j in range(16) if j != cfg.target_byte]
        kk = np.frombuffer(key, dtype=np.uint8)
        leak += HW[SBOX[pts[:, others] ^ kk[others]]].sum(axis=1, dtype=np.float64)[:, None]
    if cfg.noise_sigma > 0:
        leak += noise_rng.normal(0.0, cfg.noise_sigma, leak.shape)
    return TraceSet(cfg, pts, cts, leak.astype(np.float32), seed, key_fingerprint(key), set_ids)


# ---------------------------------------------------------------------------
# trace file
# ---------------------------------------------------------------------------

MAGIC = b"SCTRACE1"
VERSION = 1
_HEADER = struct.Struct("<8sIIIBBdB16s")


def _record_dtype(samples: int):
    return np.dtype([("pt", "u1", (16,)), ("ct", "u1", (16,)), ("samples", "<f4", (samples,))])


def write_traces(ts: TraceSet, path) -> None:
    cfg = ts.config
    n, s = ts.samples.shape
    header = _HEADER.pack(MAGIC, VERSION, n, s, MODES.index(cfg.mode), int(cfg.decoys),
                          float(cfg.noise_sigma), cfg.target_byte, bytes(ts.key_fingerprint))
    rec = np.empty(n, dtype=_record_dtype(s))
    rec["pt"] = ts.plaintexts
    rec["ct"] = ts.ciphertexts
    rec["samples"] = ts.samples
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rec.tobytes())


class TraceFileError(ValueError):
    pass


def read_traces(path) -> TraceSet:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TraceFileError(f"{path}: truncated header")
    magic, version, n, s, mode, decoys, sigma, target, fp = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise TraceFileError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise TraceFileError(f"{path}: unsupported version {version}")
    if mode >= len(MODES):
        raise TraceFileError(f"{path}: bad mode byte {mode}")
    dt = _record_dtype(s)
    body = data[_HEADER.size:]
    if len(body) != n * dt.itemsize:
        raise TraceFileError(f"{path}: expected {n} records of {dt.itemsize} bytes, "
                             f"found {len(body)} bytes")
    rec = np.frombuffer(body, dtype=dt)
    cfg = LeakConfig(MODES[mode], bool(decoys), sigma, target)
    if cfg.samples_per_trace != s:
        raise TraceFileError(f"{path}: {s} samples per trace does not match mode {cfg.mode}")
    return TraceSet(cfg, rec["pt"].copy(), rec["ct"].copy(), rec["samples"].copy(),
                    None, bytes(fp))
