"""AES-128 with a table S-box or the three-stage composite-field S-box.

Blocks are handled in batches as (n, 16) uint8 arrays in FIPS-197 input
order, so byte i of a block sits at state row i % 4, column i // 4.

A backend is one of:
  "lut"                  the standard table S-box
  ParameterSet           the composite S-box under one fixed set
  RandomizationContext   one set per block drawn from the context's LFSR
"""

from __future__ import annotations

from functools import cached_property, lru_cache
from typing import NamedTuple

import numpy as np

from . import _kernels
from .gf import InversionStages, composite_inv_stages, gf8_inv, gf8_mul, matvec_gf2
from .iso import ParameterSet


def _rotl8(b: int, k: int) -> int:
    return ((b << k) | (b >> (8 - k))) & 0xFF


def affine(b: int) -> int:
    return b ^ _rotl8(b, 1) ^ _rotl8(b, 2) ^ _rotl8(b, 3) ^ _rotl8(b, 4) ^ 0x63


def inv_affine(b: int) -> int:
    return _rotl8(b, 1) ^ _rotl8(b, 3) ^ _rotl8(b, 6) ^ 0x05


SBOX = np.array([affine(gf8_inv(x)) for x in range(256)], dtype=np.uint8)
INV_SBOX = np.argsort(SBOX).astype(np.uint8)


def sbox_lut(x: int) -> int:
    return int(SBOX[x])


def inv_sbox_lut(y: int) -> int:
    return int(INV_SBOX[y])


class SboxStages(NamedTuple):
    mapped: int                 # delta(x), tower basis
    inversion: InversionStages  # GF(2^4)-level wires of the tower inverse
    pre_affine: int             # delta^-1 of the tower inverse, back in field A
    out: int


def sbox_composite_stages(x: int, ps: ParameterSet) -> SboxStages:
    mapped = matvec_gf2(ps.delta, x)
    inv = composite_inv_stages(mapped, ps.params)
    pre = matvec_gf2(ps.delta_inv, inv.out)
    return SboxStages(mapped, inv, pre, affine(pre))


def sbox_composite(x: int, ps: ParameterSet) -> int:
    return sbox_composite_stages(x, ps).out


def inv_sbox_composite(y: int, ps: ParameterSet) -> int:
    m = matvec_gf2(ps.delta, inv_affine(y))
    return matvec_gf2(ps.delta_inv, composite_inv_stages(m, ps.params).out)


# ---------------------------------------------------------------------------
# packed catalogs for the batch kernels
# ---------------------------------------------------------------------------

class PackedSets:
    """Array form of a list of ParameterSets, indexed by position."""

    def __init__(self, sets):
        self.sets = list(sets)
        self.phi = np.array([ps.phi for ps in self.sets], dtype=np.uint8)
        self.lam = np.array([ps.lam for ps in self.sets], dtype=np.uint8)
        self.delta = np.array([ps.delta for ps in self.sets], dtype=np.uint8).reshape(-1, 8)
        self.dinv = np.array([ps.delta_inv for ps in self.sets], dtype=np.uint8).reshape(-1, 8)

    def __len__(self):
        return len(self.sets)

    @cached_property
    def sbox_tables(self):
        return np.stack([composite_sbox_table(ps) for ps in self.sets])

    @cached_property
    def inv_sbox_tables(self):
        return np.stack([composite_inv_sbox_table(ps) for ps in self.sets])

    @cached_property
    def point_tables(self):
        return np.stack([tower_point_table(ps) for ps in self.sets])

    @cached_property
    def dinv_tables(self):
        return np.array([[matvec_gf2(ps.delta_inv, q) for q in range(256)] for ps in self.sets],
                        dtype=np.uint8)

    def sub_bytes(self, state, set_idx, inverse=False):
        set_idx = np.asarray(set_idx, dtype=np.int64)
        if _kernels.USE_NUMBA:
            return _kernels.sbox_layer_nb(state, set_idx, self.phi, self.lam,
                                          self.delta, self.dinv, inverse)
        tables = self.inv_sbox_tables if inverse else self.sbox_tables
        return _kernels.sbox_layer_np(state, set_idx, tables)

    def tower_points(self, x, set_idx):
        """(n, 8) intermediates: mapped, sum_hl, sq_lambda, cross, det, det_inv, inv_b, pre_affine."""
        x = np.ascontiguousarray(x, dtype=np.uint8)
        set_idx = np.asarray(set_idx, dtype=np.int64)
        if _kernels.USE_NUMBA:
            return _kernels.tower_points_nb(x, set_idx, self.phi, self.lam, self.delta, self.dinv)
        return _kernels.tower_points_np(x, set_idx, self.point_tables)

    def delta_inv_apply(self, v, set_idx):
        v = np.ascontiguousarray(v, dtype=np.uint8)
        set_idx = np.asarray(set_idx, dtype=np.int64)
        if _kernels.USE_NUMBA:
            return _kernels.matvec_nb(v, set_idx, self.dinv)
        return _kernels.matvec_np(v, set_idx, self.dinv_tables)


@lru_cache(maxsize=None)
def composite_sbox_table(ps: ParameterSet):
    t = np.array([sbox_composite(x, ps) for x in range(256)], dtype=np.uint8)
    t.setflags(write=False)
    return t


@lru_cache(maxsize=None)
def composite_inv_sbox_table(ps: ParameterSet):
    t = np.array([inv_sbox_composite(y, ps) for y in range(256)], dtype=np.uint8)
    t.setflags(write=False)
    return t


@lru_cache(maxsize=None)
def tower_point_table(ps: ParameterSet):
    rows = []
    for x in range(256):
        st = sbox_composite_stages(x, ps)
        i = st.inversion
        rows.append((st.mapped, i.sum_hl, i.sq_lambda, i.cross, i.det, i.det_inv, i.out,
                     st.pre_affine))
    t = np.array(rows, dtype=np.uint8).T.copy()
    t.setflags(write=False)
    return t


# ---------------------------------------------------------------------------
# round functions on (..., 16) arrays
# ---------------------------------------------------------------------------

_ROW = np.arange(16) % 4
_COL = np.arange(16) // 4
SHIFT_ROWS = _ROW + 4 * ((_COL + _ROW) % 4)
INV_SHIFT_ROWS = _ROW + 4 * ((_COL - _ROW) % 4)

_MUL = {c: np.array([gf8_mul(c, x) for x in range(256)], dtype=np.uint8)
        for c in (2, 3, 9, 11, 13, 14)}


def shift_rows(state):
    """Rotate row r left by r."""
    return np.asarray(state, dtype=np.uint8)[..., SHIFT_ROWS]


def inv_shift_rows(state):
    return np.asarray(state, dtype=np.uint8)[..., INV_SHIFT_ROWS]


def _mix(state, coeffs):
    s = np.asarray(state, dtype=np.uint8)
    cols = s.reshape(s.shape[:-1] + (4, 4))
    a = [cols[..., r] for r in range(4)]

    def mul(c, v):
        return v if c == 1 else _MUL[c][v]

    out = np.empty_like(cols)
    for r in range(4):
        acc = np.zeros_like(a[0])
        for k in range(4):
            acc ^= mul(coeffs[(k - r) % 4], a[k])
        out[..., r] = acc
    return out.reshape(s.shape)


def mix_columns(state):
    """Multiply each column by c(x) = 03 x^3 + 01 x^2 + 01 x + 02 mod x^4 + 1."""
    return _mix(state, (2, 3, 1, 1))


def inv_mix_columns(state):
    return _mix(state, (14, 11, 13, 9))


_RCON = [1]
for _ in range(9):
    _RCON.append(gf8_mul(_RCON[-1], 2))
RCON = np.array(_RCON, dtype=np.uint8)


def _as_blocks(data, what):
    a = np.asarray(bytearray(data) if isinstance(data, (bytes, bytearray)) else data)
    if a.dtype != np.uint8:
        if a.size and (a.min() < 0 or a.max() > 255):
            raise ValueError(f"{what} values must be bytes")
        a = a.astype(np.uint8)
    if a.ndim == 0 or a.shape[-1] != 16:
        raise ValueError(f"{what} must be 16 bytes (got shape {a.shape})")
    return a


def key_expand(key):
    """AES-128 key schedule: (16,) -> (11, 16) or (n, 16) -> (n, 11, 16)."""
    k = _as_blocks(key, "key")
    single = k.ndim == 1
    k = k.reshape(-1, 16)
    words = [k[:, 4 * i:4 * i + 4] for i in range(4)]
    for i in range(4, 44):
        t = words[i - 1]
        if i % 4 == 0:
            t = SBOX[np.roll(t, -1, axis=1)]
            t = t.copy()
            t[:, 0] ^= RCON[i // 4 - 1]
        words.append(words[i - 4] ^ t)
    rk = np.concatenate(words, axis=1).reshape(-1, 11, 16)
    return rk[0] if single else rk


def _sub_bytes(state, backend, set_idx, inverse):
    if backend is None:
        return (INV_SBOX if inverse else SBOX)[state]
    return backend.sub_bytes(state, set_idx, inverse)


def _encrypt(state, rk, packed, set_idx):
    state = state ^ rk[:, 0]
    for r in range(1, 11):
        state = _sub_bytes(state, packed, set_idx, False)
        state = shift_rows(state)
        if r != 10:
            state = mix_columns(state)
        state = state ^ rk[:, r]
    return state


def _decrypt(state, rk, packed, set_idx):
    state = state ^ rk[:, 10]
    for r in range(9, -1, -1):
        state = inv_shift_rows(state)
        state = _sub_bytes(state, packed, set_idx, True)
        state = state ^ rk[:, r]
        if r != 0:
            state = inv_mix_columns(state)
    return state


def _prepare(blocks, key):
    b = _as_blocks(blocks, "block")
    single = b.ndim == 1
    b = b.reshape(-1, 16)
    rk = key_expand(key)
    if rk.ndim == 2:
        rk = np.broadcast_to(rk, (b.shape[0], 11, 16))
    elif rk.shape[0] != b.shape[0]:
        raise ValueError("need one key or one key per block")
    return b, rk, single


def _resolve(backend, n):
    """(PackedSets or None, per-block set index) for a backend selector."""
    from .lfsr import RandomizationContext

    if isinstance(backend, str):
        if backend != "lut":
            raise ValueError(f"unknown backend {backend!r}")
        return None, None
    if isinstance(backend, ParameterSet):
        return packed_for((backend,)), np.zeros(n, dtype=np.int64)
    if isinstance(backend, RandomizationContext):
        return backend.packed, backend.schedule(n)
    raise TypeError(f"unsupported backend {type(backend).__name__}")


@lru_cache(maxsize=64)
def packed_for(sets: tuple) -> PackedSets:
    return PackedSets(sets)


def encrypt_blocks(blocks, key, backend="lut", set_idx=None):
    """Encrypt (n, 16) blocks in ECB order. A RandomizationContext advances one draw per block.

    set_idx overrides the per-block set choice of a PackedSets backend.
    """
    b, rk, single = _prepare(blocks, key)
    if isinstance(backend, PackedSets):
        packed, idx = backend, np.asarray(set_idx, dtype=np.int64)
    else:
        packed, idx = _resolve(backend, b.shape[0])
    out = _encrypt(b, rk, packed, idx)
    return out[0] if single else out


def decrypt_blocks(blocks, key, backend="lut", set_idx=None):
    b, rk, single = _prepare(blocks, key)
    if isinstance(backend, PackedSets):
        packed, idx = backend, np.asarray(set_idx, dtype=np.int64)
    else:
        packed, idx = _resolve(backend, b.shape[0])
    out = _decrypt(b, rk, packed, idx)
    return out[0] if single else out


def encrypt_block(pt: bytes, key: bytes, backend="lut") -> bytes:
    if len(pt) != 16 or len(key) != 16:
        raise ValueError("plaintext and key must be 16 bytes")
    return bytes(encrypt_blocks(pt, key, backend))


def decrypt_block(ct: bytes, key: bytes, backend="lut") -> bytes:
    if len(ct) != 16 or len(key) != 16:
        raise ValueError("ciphertext and key must be 16 bytes")
    return bytes(decrypt_blocks(ct, key, backend))
