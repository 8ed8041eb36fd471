"""Enumeration and validation of {phi, lambda, delta, delta^-1} parameter sets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .gf import (
    IDENTITY,
    TowerParams,
    gf8_mul_table,
    lambda_is_irreducible,
    matmul_gf2,
    matrix_columns,
    matrix_from_columns,
    matrix_inverse_gf2,
    matvec_gf2,
    phi_is_irreducible,
    tower_mul,
    transpose,
)

# Printed example: phi = {10}, lambda = {1100}; row 0 first, MSB = leftmost column.
CANONICAL_PARAMS = TowerParams(phi=2, lam=12)
CANONICAL_DELTA = (
    0b10100000,
    0b11011110,
    0b10101100,
    0b10101110,
    0b11000110,
    0b10011110,
    0b01010010,
    0b01000011,
)
CANONICAL_DELTA_INV = (
    0b11100010,
    0b01000100,
    0b01100010,
    0b01110110,
    0b00111110,
    0b10011110,
    0b00110000,
    0b01110101,
)

# (phi, lambda, delta list, delta^-1 list), values exactly as printed.
PUBLISHED_SETS = (
    (2, 15, (160, 126, 114, 162, 182, 84, 16, 217), (46, 28, 174, 2, 122, 26, 144, 75)),
    (3, 12, (160, 222, 172, 174, 202, 238, 44, 227), (102, 212, 230, 162, 10, 234, 176, 233)),
    (3, 10, (160, 126, 172, 2, 20, 132, 130, 99), (190, 132, 62, 106, 98, 2, 112, 141)),
)


def popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True)
class ParameterSet:
    id: int
    params: TowerParams
    delta: tuple
    delta_inv: tuple
    gate_cost: int = field(default=-1, compare=False)
    root: int = field(default=-1, compare=False)  # tower value of the image of x

    @property
    def phi(self) -> int:
        return self.params.phi

    @property
    def lam(self) -> int:
        return self.params.lam


def phi_candidates() -> set:
    return {phi for phi in range(4) if phi_is_irreducible(phi)}


def lambda_candidates(phi: int) -> set:
    return {lam for lam in range(16) if lambda_is_irreducible(lam, phi)}


def _tower_pow(b: int, e: int, p: TowerParams) -> int:
    r = 1
    for _ in range(e):
        r = tower_mul(r, b, p)
    return r


def aes_poly_roots(p: TowerParams) -> list:
    """All beta in the tower field with beta^8 + beta^4 + beta^3 + beta + 1 = 0."""
    roots = []
    for b in range(256):
        acc = _tower_pow(b, 8, p) ^ _tower_pow(b, 4, p) ^ _tower_pow(b, 3, p) ^ b ^ 1
        if acc == 0:
            roots.append(b)
    return roots


def gate_cost(ps: ParameterSet) -> int:
    """XOR-gate count of the two matrix layers, one XOR per extra row input."""
    return sum(max(popcount(row) - 1, 0) for row in (*ps.delta, *ps.delta_inv))


def find_isomorphisms(p: TowerParams, first_id: int = 0) -> list:
    sets = []
    for k, beta in enumerate(aes_poly_roots(p)):
        # column for input bit j holds beta^j; column index 7 - j
        cols = [_tower_pow(beta, 7 - c, p) for c in range(8)]
        delta = matrix_from_columns(cols)
        delta_inv = matrix_inverse_gf2(delta)
        ps = ParameterSet(first_id + k, p, delta, delta_inv, root=beta)
        sets.append(replace(ps, gate_cost=gate_cost(ps)))
    return sets


def enumerate_all() -> list:
    """Every isomorphism for every valid (phi, lambda), ids in (phi, lambda, root) order."""
    out = []
    for phi in sorted(phi_candidates()):
        for lam in sorted(lambda_candidates(phi)):
            out.extend(find_isomorphisms(TowerParams(phi, lam), first_id=len(out)))
    return out


def _tables(ps: ParameterSet):
    fwd = [matvec_gf2(ps.delta, q) for q in range(256)]
    back = [matvec_gf2(ps.delta_inv, q) for q in range(256)]
    return fwd, back


def verify_isomorphism(ps: ParameterSet) -> bool:
    """Exhaustive check that delta is a field isomorphism and delta_inv undoes it."""
    if ps.delta_inv is None or matrix_inverse_gf2(ps.delta) is None:
        return False
    if matmul_gf2(ps.delta, ps.delta_inv) != IDENTITY:
        return False
    fwd, _ = _tables(ps)
    if fwd[1] != 1 or len(set(fwd)) != 256:
        return False
    # the bitwise tower formulas are elementwise, so they run on whole grids
    fwd = np.asarray(fwd, dtype=np.int64)
    a = np.arange(256, dtype=np.int64)
    lhs = fwd[gf8_mul_table()]
    rhs = tower_mul(fwd[a][:, None], fwd[a][None, :], ps.params)
    return bool(np.array_equal(lhs, rhs))


def select_low_cost(all_sets: list, n: int) -> list:
    """The n cheapest sets, renumbered 0..n-1 in (cost, phi, lambda, root index) order."""
    if n > len(all_sets):
        raise ValueError(f"requested {n} sets but only {len(all_sets)} available")
    if n < 1:
        raise ValueError("n must be at least 1")
    # enumeration ids already encode (phi, lambda, root index) order
    ranked = sorted(all_sets, key=lambda ps: (ps.gate_cost, ps.phi, ps.lam, ps.id))
    return [replace(ps, id=i) for i, ps in enumerate(ranked[:n])]


def linear_map_count() -> int:
    return math.prod(2**8 - 2**i for i in range(8))


# ---------------------------------------------------------------------------
# Printed example sets
# ---------------------------------------------------------------------------

@dataclass
class PublishedSetVerdict:
    phi: int
    lam: int
    delta: tuple
    delta_inv: tuple
    as_columns: bool
    as_rows: bool
    inverse_pair_columns: bool
    inverse_pair_rows: bool
    note: str = ""

    @property
    def orientation(self) -> str:
        if self.as_columns:
            return "columns"
        if self.as_rows:
            return "rows"
        return "none"


def _check_orientation(phi: int, lam: int, delta_vals, dinv_vals, columns: bool):
    try:
        p = TowerParams(phi, lam)
    except ValueError:
        return False, False
    if columns:
        d, di = matrix_from_columns(delta_vals), matrix_from_columns(dinv_vals)
    else:
        d, di = tuple(delta_vals), tuple(dinv_vals)
    pair_ok = matmul_gf2(d, di) == IDENTITY
    inv = matrix_inverse_gf2(d)
    if inv is None:
        return False, pair_ok
    return verify_isomorphism(ParameterSet(-1, p, d, di)) and pair_ok, pair_ok


def check_published_sets(sets=PUBLISHED_SETS) -> list:
    """Validate each printed set as columns, then as rows; negative results are reported."""
    verdicts = []
    for phi, lam, dvals, divals in sets:
        cols_ok, cols_pair = _check_orientation(phi, lam, dvals, divals, columns=True)
        rows_ok, rows_pair = False, False
        if not cols_ok:
            rows_ok, rows_pair = _check_orientation(phi, lam, dvals, divals, columns=False)
        note = ""
        if not (cols_ok or rows_ok):
            note = _diagnose(phi, lam, dvals, divals)
        verdicts.append(PublishedSetVerdict(phi, lam, tuple(dvals), tuple(divals),
                                        cols_ok, rows_ok, cols_pair, rows_pair, note))
    return verdicts


def _diagnose(phi, lam, dvals, divals) -> str:
    """Say whether delta alone is a valid isomorphism under either reading."""
    try:
        p = TowerParams(phi, lam)
    except ValueError as exc:
        return str(exc)
    parts = []
    for label, d in (("columns", matrix_from_columns(dvals)), ("rows", tuple(dvals))):
        inv = matrix_inverse_gf2(d)
        if inv is None:
            parts.append(f"delta as {label}: singular")
            continue
        ok = verify_isomorphism(ParameterSet(-1, p, d, inv))
        parts.append(f"delta as {label}: {'isomorphism' if ok else 'not an isomorphism'}")
    inv_rows = matrix_inverse_gf2(tuple(dvals))
    if inv_rows is not None:
        off = sum(popcount(a ^ b) for a, b in zip(inv_rows, divals))
        parts.append(f"printed delta_inv is {off} bit(s) from the inverse of delta (rows)")
    best = nearest_delta(tuple(dvals))
    parts.append(f"nearest enumerated delta (rows): phi={best[1].phi} lambda={best[1].lam} "
                 f"at {best[0]} bit(s)")
    return "; ".join(parts)


def nearest_delta(rows: tuple):
    """(bit distance, set) of the enumerated delta closest to the given row masks."""
    cands = default_catalog(128)
    return min(
        ((sum(popcount(a ^ b) for a, b in zip(rows, ps.delta)), ps) for ps in cands),
        key=lambda t: (t[0], t[1].id),
    )


# ---------------------------------------------------------------------------
# Catalog file
# ---------------------------------------------------------------------------

def _hex_cols(m) -> list:
    return [f"{c:02x}" for c in matrix_columns(m)]


def catalog_records(sets: list) -> list:
    return [
        {
            "id": ps.id,
            "phi": ps.phi,
            "lambda": ps.lam,
            "delta": _hex_cols(ps.delta),
            "delta_inv": _hex_cols(ps.delta_inv),
            "gate_cost": ps.gate_cost,
        }
        for ps in sorted(sets, key=lambda s: s.id)
    ]


def save_catalog(sets: list, path) -> None:
    text = json.dumps(catalog_records(sets), indent=1) + "\n"
    Path(path).write_text(text)


def load_catalog(path, verify: bool = True) -> list:
    """Read a catalog file. With verify, every record must be a field isomorphism."""
    records = json.loads(Path(path).read_text())
    sets = []
    for rec in records:
        try:
            ps = ParameterSet(
                id=int(rec["id"]),
                params=TowerParams(int(rec["phi"]), int(rec["lambda"])),
                delta=matrix_from_columns([int(h, 16) for h in rec["delta"]]),
                delta_inv=matrix_from_columns([int(h, 16) for h in rec["delta_inv"]]),
                gate_cost=int(rec["gate_cost"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}: malformed record {rec!r}") from exc
        if verify and not verify_isomorphism(ps):
            raise ValueError(f"{path}: set {ps.id} is not a valid isomorphism")
        sets.append(ps)
    sets.sort(key=lambda s: s.id)
    if [s.id for s in sets] != list(range(len(sets))):
        raise ValueError(f"{path}: catalog ids must be 0..{len(sets) - 1}")
    return sets


_DEFAULT = None


def default_catalog(n: int = 32) -> list:
    """The n lowest-cost sets, computed once per process."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = enumerate_all()
    return select_low_cost(_DEFAULT, n)


def canonical_set() -> ParameterSet:
    ps = ParameterSet(0, CANONICAL_PARAMS, CANONICAL_DELTA, CANONICAL_DELTA_INV)
    return replace(ps, gate_cost=gate_cost(ps))


__all__ = [
    "ParameterSet", "PublishedSetVerdict", "phi_candidates", "lambda_candidates",
    "find_isomorphisms", "enumerate_all", "verify_isomorphism", "gate_cost",
    "select_low_cost", "check_published_sets", "linear_map_count", "save_catalog",
    "load_catalog", "default_catalog", "canonical_set", "transpose",
]
