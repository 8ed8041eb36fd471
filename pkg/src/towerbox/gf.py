"""Bit-level arithmetic in the AES field and in the GF(((2^2)^2)^2) tower.

Elements are plain ints. A tower byte keeps its high GF(2^4) half in bits
7..4 and its low half in bits 3..0; a GF(2^4) nibble is split the same way
into two GF(2^2) crumbs. Bit 7 is always the most significant coefficient.

Tower polynomials:
  GF(2^2)        : x^2 + x + 1
  GF((2^2)^2)    : y^2 + y + phi,    phi in GF(2^2)
  GF(((2^2)^2)^2): z^2 + z + lambda, lambda in GF((2^2)^2)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

AES_MODULUS = 0x11B  # x^8 + x^4 + x^3 + x + 1


# ---------------------------------------------------------------------------
# Field A: GF(2^8) mod m(x)
# ---------------------------------------------------------------------------

def gf8_mul(a: int, b: int) -> int:
    """Shift-and-add product of two bytes modulo m(x)."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= AES_MODULUS
    return r


def gf8_pow(a: int, e: int) -> int:
    r = 1
    while e:
        if e & 1:
            r = gf8_mul(r, a)
        a = gf8_mul(a, a)
        e >>= 1
    return r


def gf8_inv(a: int) -> int:
    """Multiplicative inverse in field A, with inv(0) = 0."""
    # a^254 = a^-1 for a != 0 and maps 0 to 0
    return gf8_pow(a, 254)


# ---------------------------------------------------------------------------
# GF(2^2) mod x^2 + x + 1
# ---------------------------------------------------------------------------

def gf2_mul(a: int, b: int) -> int:
    a1, a0 = (a >> 1) & 1, a & 1
    b1, b0 = (b >> 1) & 1, b & 1
    hi = (a1 & b1) ^ (a1 & b0) ^ (a0 & b1)
    lo = (a0 & b0) ^ (a1 & b1)
    return (hi << 1) | lo


def gf2_sq(a: int) -> int:
    a1, a0 = (a >> 1) & 1, a & 1
    return (a1 << 1) | (a1 ^ a0)


def gf2_inv(a: int) -> int:
    # a^3 = 1 for a != 0, so a^-1 = a^2
    return gf2_sq(a)


def gf2_mul_phi(q: int, phi: int) -> int:
    """Multiply a GF(2^2) element by the constant phi with a fixed XOR network.

    Only the two constants that make y^2 + y + phi irreducible have a network.
    """
    q1, q0 = (q >> 1) & 1, q & 1
    if phi == 2:
        k1, k0 = q1 ^ q0, q1
    elif phi == 3:
        k1, k0 = q0, q0 ^ q1
    else:
        raise ValueError(f"no multiplier network for phi={phi}; expected 2 or 3")
    return (k1 << 1) | k0


# ---------------------------------------------------------------------------
# Tower parameters
# ---------------------------------------------------------------------------

def _mul4(a: int, b: int, phi: int) -> int:
    ah, al = a >> 2, a & 3
    bh, bl = b >> 2, b & 3
    hh = gf2_mul(ah, bh)
    hi = hh ^ gf2_mul(ah, bl) ^ gf2_mul(al, bh)
    lo = gf2_mul(al, bl) ^ gf2_mul(hh, phi)
    return (hi << 2) | lo


def phi_is_irreducible(phi: int) -> bool:
    """True if y^2 + y + phi has no root in GF(2^2)."""
    return all(gf2_mul(r, r) ^ r ^ phi for r in range(4))


def lambda_is_irreducible(lam: int, phi: int) -> bool:
    """True if z^2 + z + lam has no root in GF((2^2)^2) built from phi."""
    return all(_mul4(r, r, phi) ^ r ^ lam for r in range(16))


@dataclass(frozen=True, order=True)
class TowerParams:
    phi: int
    lam: int

    def __post_init__(self):
        if not 0 <= self.phi < 4 or not phi_is_irreducible(self.phi):
            raise ValueError(f"y^2 + y + {self.phi} is not irreducible over GF(2^2)")
        if not 0 <= self.lam < 16 or not lambda_is_irreducible(self.lam, self.phi):
            raise ValueError(
                f"z^2 + z + {self.lam} is not irreducible over GF(2^4) (phi={self.phi})")


# ---------------------------------------------------------------------------
# GF((2^2)^2)
# ---------------------------------------------------------------------------

def gf4_mul(a: int, b: int, p: TowerParams) -> int:
    return _mul4(a, b, p.phi)


def gf4_sq(a: int, p: TowerParams) -> int:
    ah, al = a >> 2, a & 3
    hh = gf2_sq(ah)
    return (hh << 2) | (gf2_mul_phi(hh, p.phi) ^ gf2_sq(al))


def _inv4(q: int, phi: int) -> int:
    qh, ql = q >> 2, q & 3
    d = gf2_mul(gf2_sq(qh), phi) ^ gf2_mul(qh, ql) ^ gf2_sq(ql)
    di = gf2_inv(d)
    return (gf2_mul(qh, di) << 2) | gf2_mul(qh ^ ql, di)


def gf4_inv(q: int, p: TowerParams) -> int:
    """Inverse in GF((2^2)^2) by one more level of the same decomposition."""
    return _inv4(q, p.phi)


def mul_lambda12_phi2(q: int) -> int:
    """x lambda network for lambda = {1100}, phi = {10}."""
    q3, q2, q1, q0 = (q >> 3) & 1, (q >> 2) & 1, (q >> 1) & 1, q & 1
    k3 = q2 ^ q0
    k2 = q3 ^ q2 ^ q1 ^ q0
    k1 = q3
    k0 = q2
    return (k3 << 3) | (k2 << 2) | (k1 << 1) | k0


def mul_lambda15(q: int, phi: int) -> int:
    """x lambda network for lambda = {1111}.

    With lambda_H = lambda_L = {11}: k_H = {11} q_L and
    k_L = {11} phi q_H + {11} q_L, where {11}{10} = {01} and {11}{11} = {10}.
    """
    q3, q2, q1, q0 = (q >> 3) & 1, (q >> 2) & 1, (q >> 1) & 1, q & 1
    k3 = q0
    k2 = q1 ^ q0
    if phi == 2:
        k1 = q3 ^ q0
        k0 = q2 ^ q1 ^ q0
    elif phi == 3:
        k1 = q3 ^ q2 ^ q0
        k0 = q3 ^ q1 ^ q0
    else:
        raise ValueError(f"phi must be 2 or 3, got {phi}")
    return (k3 << 3) | (k2 << 2) | (k1 << 1) | k0


def gf4_mul_lambda(q: int, p: TowerParams) -> int:
    """Multiply by p.lam, using a fixed network where one has been derived."""
    if p.lam == 12 and p.phi == 2:
        return mul_lambda12_phi2(q)
    if p.lam == 15:
        return mul_lambda15(q, p.phi)
    return _mul4(q, p.lam, p.phi)


# ---------------------------------------------------------------------------
# GF(((2^2)^2)^2)
# ---------------------------------------------------------------------------

def tower_mul(a: int, b: int, p: TowerParams) -> int:
    ah, al = a >> 4, a & 15
    bh, bl = b >> 4, b & 15
    hh = _mul4(ah, bh, p.phi)
    hi = hh ^ _mul4(ah, bl, p.phi) ^ _mul4(al, bh, p.phi)
    lo = _mul4(al, bl, p.phi) ^ _mul4(hh, p.lam, p.phi)
    return (hi << 4) | lo


class InversionStages(NamedTuple):
    """Wire values of the GF(2^8) inversion datapath for one input byte."""

    sum_hl: int      # a_h + a_l
    sq_lambda: int   # lambda * a_h^2
    cross: int       # (a_h + a_l) * a_l
    det: int         # lambda a_h^2 + a_h a_l + a_l^2
    det_inv: int     # det^-1 in GF(2^4)
    out: int         # (a_h det^-1, (a_h + a_l) det^-1)


def composite_inv_stages(x: int, p: TowerParams) -> InversionStages:
    ah, al = x >> 4, x & 15
    s = ah ^ al
    sql = gf4_mul_lambda(gf4_sq(ah, p), p)
    cross = _mul4(s, al, p.phi)
    det = sql ^ cross
    di = _inv4(det, p.phi)
    out = (_mul4(ah, di, p.phi) << 4) | _mul4(s, di, p.phi)
    return InversionStages(s, sql, cross, det, di, out)


def composite_inv(x: int, p: TowerParams) -> int:
    """Tower-field inverse; inv(0) = 0 falls out of det = 0."""
    return composite_inv_stages(x, p).out


# ---------------------------------------------------------------------------
# 8x8 matrices over GF(2)
# ---------------------------------------------------------------------------
# A matrix is a tuple of 8 row masks. Row r produces output bit 7 - r and
# bit 7 - c of a row mask multiplies input bit 7 - c, so a row mask lines up
# with the input byte directly.

Matrix = tuple

IDENTITY = tuple(1 << (7 - r) for r in range(8))


def parity(v: int) -> int:
    return bin(v).count("1") & 1


def matvec_gf2(m: Sequence[int], q: int) -> int:
    out = 0
    for r in range(8):
        out |= parity(m[r] & q) << (7 - r)
    return out


def matrix_from_columns(cols: Sequence[int]) -> Matrix:
    """Build a matrix from 8 column bytes, column 0 first, MSB = top row."""
    rows = []
    for r in range(8):
        mask = 0
        for c in range(8):
            mask |= ((cols[c] >> (7 - r)) & 1) << (7 - c)
        rows.append(mask)
    return tuple(rows)


def matrix_columns(m: Sequence[int]) -> tuple:
    return transpose(m)


def transpose(m: Sequence[int]) -> Matrix:
    # transposition is symmetric in the row/column encoding
    return matrix_from_columns(m)


def matmul_gf2(a: Sequence[int], b: Sequence[int]) -> Matrix:
    cols_b = matrix_columns(b)
    result_cols = [matvec_gf2(a, c) for c in cols_b]
    return matrix_from_columns(result_cols)


def matrix_inverse_gf2(m: Sequence[int]) -> Matrix | None:
    """Gauss-Jordan inversion; None if singular."""
    a = list(m)
    inv = list(IDENTITY)
    for col in range(8):
        bit = 1 << (7 - col)
        pivot = next((r for r in range(col, 8) if a[r] & bit), None)
        if pivot is None:
            return None
        a[col], a[pivot] = a[pivot], a[col]
        inv[col], inv[pivot] = inv[pivot], inv[col]
        for r in range(8):
            if r != col and a[r] & bit:
                a[r] ^= a[col]
                inv[r] ^= inv[col]
    return tuple(inv)


_GF8_TABLE = None


def gf8_mul_table():
    """256x256 product table of field A (int64), built with array shift-and-add."""
    global _GF8_TABLE
    if _GF8_TABLE is None:
        a = np.broadcast_to(np.arange(256, dtype=np.int64)[:, None], (256, 256)).copy()
        b = np.broadcast_to(np.arange(256, dtype=np.int64)[None, :], (256, 256)).copy()
        r = np.zeros_like(a)
        for _ in range(8):
            r ^= np.where(b & 1, a, 0)
            b >>= 1
            a <<= 1
            a ^= np.where(a & 0x100, AES_MODULUS, 0)
        r.setflags(write=False)
        _GF8_TABLE = r
    return _GF8_TABLE
