"""Hot loops, each with a numba path and a pure-numpy path.

The numba path is used when numba imports and TOWERBOX_DISABLE_NUMBA is unset
or "0". Both paths are importable directly (``*_nb`` / ``*_np``) so they can
be checked against each other; results must be identical.

Tower kernels take the packed parameter arrays of a catalog:
phi (N,), lam (N,), delta (N, 8), dinv (N, 8), all uint8, matrices as row
masks (row 0 -> output bit 7). The numpy paths take precomputed 256-entry
tables instead and only gather.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("TOWERBOX_DISABLE_NUMBA", "0") in ("", "0")

# columns of the protected intermediate array, see leakage.PROTECTED_POINTS
N_TOWER_POINTS = 8  # mapped, sum_hl, sq_lambda, cross, det, det_inv, inv_b, pre_affine


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy paths
# ---------------------------------------------------------------------------

def sbox_layer_np(state, set_idx, sbox_tables):
    """Per-block substitution: state (n, 16) uint8, set_idx (n,), tables (N, 256)."""
    return sbox_tables[set_idx[:, None], state]


def tower_points_np(x, set_idx, point_tables):
    """Intermediates (n, 8) for bytes x under per-trace sets; tables (N, 8, 256)."""
    return point_tables[set_idx[:, None], np.arange(N_TOWER_POINTS)[None, :], x[:, None]]


def matvec_np(v, set_idx, matrix_tables):
    return matrix_tables[set_idx, v]


def _segments(checkpoints):
    start = 0
    for k, stop in enumerate(checkpoints):
        yield k, start, int(stop)
        start = int(stop)


def corr_checkpoints_np(pred, traces, checkpoints):
    """Pearson correlation of every prediction row against every trace column,
    evaluated on each prefix length in checkpoints.

    pred (G, n), traces (n, S) float64 -> corr (K, G, S), degenerate (K, G, S).
    """
    g, _ = pred.shape
    s = traces.shape[1]
    k = len(checkpoints)
    sp = np.zeros(g)
    spp = np.zeros(g)
    st = np.zeros(s)
    stt = np.zeros(s)
    spt = np.zeros((g, s))
    corr = np.zeros((k, g, s))
    degen = np.zeros((k, g, s), dtype=bool)
    for i, a, b in _segments(checkpoints):
        p = pred[:, a:b]
        t = traces[a:b]
        sp += p.sum(axis=1)
        spp += (p * p).sum(axis=1)
        st += t.sum(axis=0)
        stt += (t * t).sum(axis=0)
        spt += p @ t
        n = float(b)
        vp = n * spp - sp * sp
        vt = n * stt - st * st
        den = np.sqrt(np.maximum(vp, 0.0)[:, None] * np.maximum(vt, 0.0)[None, :])
        bad = ~(den > 0)
        num = n * spt - sp[:, None] * st[None, :]
        corr[i] = np.where(bad, 0.0, num / np.where(bad, 1.0, den))
        degen[i] = bad
    return corr, degen


def dom_checkpoints_np(sel, traces, checkpoints):
    """Difference of means (D = 1 minus D = 0) on each prefix.

    sel (G, n) uint8, traces (n, S) -> diff (K, G, S), empty (K, G).
    """
    g, _ = sel.shape
    s = traces.shape[1]
    k = len(checkpoints)
    c1 = np.zeros(g)
    s1 = np.zeros((g, s))
    tot = np.zeros(s)
    diff = np.zeros((k, g, s))
    empty = np.zeros((k, g), dtype=bool)
    for i, a, b in _segments(checkpoints):
        d = sel[:, a:b].astype(np.float64)
        t = traces[a:b]
        c1 += d.sum(axis=1)
        s1 += d @ t
        tot += t.sum(axis=0)
        c0 = float(b) - c1
        bad = (c1 == 0) | (c0 == 0)
        m1 = s1 / np.where(c1 == 0, 1.0, c1)[:, None]
        m0 = (tot[None, :] - s1) / np.where(c0 == 0, 1.0, c0)[:, None]
        diff[i] = np.where(bad[:, None], 0.0, m1 - m0)
        empty[i] = bad
    return diff, empty


# ---------------------------------------------------------------------------
# numba paths
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _m2(a, b):
        a1 = (a >> 1) & 1
        a0 = a & 1
        b1 = (b >> 1) & 1
        b0 = b & 1
        hi = (a1 & b1) ^ (a1 & b0) ^ (a0 & b1)
        lo = (a0 & b0) ^ (a1 & b1)
        return (hi << 1) | lo

    @njit(cache=True, inline="always")
    def _sq2(a):
        a1 = (a >> 1) & 1
        return (a1 << 1) | (a1 ^ (a & 1))

    @njit(cache=True)
    def _m4(a, b, phi):
        ah = a >> 2
        al = a & 3
        bh = b >> 2
        bl = b & 3
        hh = _m2(ah, bh)
        hi = hh ^ _m2(ah, bl) ^ _m2(al, bh)
        lo = _m2(al, bl) ^ _m2(hh, phi)
        return (hi << 2) | lo

    @njit(cache=True)
    def _sq4(a, phi):
        hh = _sq2(a >> 2)
        return (hh << 2) | (_m2(hh, phi) ^ _sq2(a & 3))

    @njit(cache=True)
    def _inv4(q, phi):
        qh = q >> 2
        ql = q & 3
        d = _m2(_sq2(qh), phi) ^ _m2(qh, ql) ^ _sq2(ql)
        di = _sq2(d)
        return (_m2(qh, di) << 2) | _m2(qh ^ ql, di)

    @njit(cache=True)
    def _matvec(rows, q):
        out = 0
        for r in range(8):
            v = rows[r] & q
            v ^= v >> 4
            v ^= v >> 2
            v ^= v >> 1
            out |= (v & 1) << (7 - r)
        return out

    @njit(cache=True)
    def _rotl(b, k):
        return ((b << k) | (b >> (8 - k))) & 0xFF

    @njit(cache=True)
    def _affine(b):
        return b ^ _rotl(b, 1) ^ _rotl(b, 2) ^ _rotl(b, 3) ^ _rotl(b, 4) ^ 0x63

    @njit(cache=True)
    def _inv_affine(b):
        return _rotl(b, 1) ^ _rotl(b, 3) ^ _rotl(b, 6) ^ 0x05

    @njit(cache=True)
    def _tower_inv(x, phi, lam):
        ah = x >> 4
        al = x & 15
        s = ah ^ al
        det = _m4(_sq4(ah, phi), lam, phi) ^ _m4(s, al, phi)
        di = _inv4(det, phi)
        return (_m4(ah, di, phi) << 4) | _m4(s, di, phi)

    @njit(cache=True)
    def _sbox_tables(phi, lam, delta, dinv, inverse):
        n_sets = phi.shape[0]
        tab = np.empty((n_sets, 256), dtype=np.uint8)
        for j in range(n_sets):
            f = np.int64(phi[j])
            la = np.int64(lam[j])
            for v in range(256):
                x = np.int64(v)
                if inverse:
                    x = _inv_affine(x)
                y = _matvec(dinv[j], _tower_inv(_matvec(delta[j], x), f, la))
                if not inverse:
                    y = _affine(y)
                tab[j, v] = y
        return tab

    @njit(cache=True)
    def sbox_layer_nb(state, set_idx, phi, lam, delta, dinv, inverse):
        # 256 evaluations per set, then a gather
        tab = _sbox_tables(phi, lam, delta, dinv, inverse)
        out = np.empty_like(state)
        for i in range(state.shape[0]):
            row = tab[set_idx[i]]
            for c in range(state.shape[1]):
                out[i, c] = row[state[i, c]]
        return out

    @njit(cache=True)
    def _point_tables(phi, lam, delta, dinv):
        n_sets = phi.shape[0]
        tab = np.empty((n_sets, 256, 8), dtype=np.uint8)
        for j in range(n_sets):
            f = np.int64(phi[j])
            la = np.int64(lam[j])
            for v in range(256):
                m = _matvec(delta[j], np.int64(v))
                ah = m >> 4
                al = m & 15
                s = ah ^ al
                sql = _m4(_sq4(ah, f), la, f)
                cross = _m4(s, al, f)
                det = sql ^ cross
                di = _inv4(det, f)
                inv_b = (_m4(ah, di, f) << 4) | _m4(s, di, f)
                tab[j, v, 0] = m
                tab[j, v, 1] = s
                tab[j, v, 2] = sql
                tab[j, v, 3] = cross
                tab[j, v, 4] = det
                tab[j, v, 5] = di
                tab[j, v, 6] = inv_b
                tab[j, v, 7] = _matvec(dinv[j], inv_b)
        return tab

    @njit(cache=True)
    def tower_points_nb(x, set_idx, phi, lam, delta, dinv):
        tab = _point_tables(phi, lam, delta, dinv)
        n = x.shape[0]
        out = np.empty((n, 8), dtype=np.uint8)
        for i in range(n):
            out[i] = tab[set_idx[i], x[i]]
        return out

    @njit(cache=True)
    def matvec_nb(v, set_idx, mats):
        n_sets = mats.shape[0]
        tab = np.empty((n_sets, 256), dtype=np.uint8)
        for j in range(n_sets):
            for q in range(256):
                tab[j, q] = _matvec(mats[j], np.int64(q))
        out = np.empty(v.shape[0], dtype=np.uint8)
        for i in range(v.shape[0]):
            out[i] = tab[set_idx[i], v[i]]
        return out

    @njit(cache=True)
    def corr_checkpoints_nb(pred, traces, checkpoints):
        g = pred.shape[0]
        s = traces.shape[1]
        k = checkpoints.shape[0]
        corr = np.zeros((k, g, s))
        degen = np.zeros((k, g, s), dtype=np.bool_)
        st = np.zeros(s)
        stt = np.zeros(s)
        sp = np.zeros(g)
        spp = np.zeros(g)
        spt = np.zeros((s, g))
        seg = np.empty(g)
        a = 0
        for ci in range(k):
            b = checkpoints[ci]
            for i in range(a, b):
                # guess-major inner loops vectorize
                for gi in range(g):
                    seg[gi] = pred[gi, i]
                for gi in range(g):
                    p = seg[gi]
                    sp[gi] += p
                    spp[gi] += p * p
                for c in range(s):
                    v = traces[i, c]
                    st[c] += v
                    stt[c] += v * v
                    row = spt[c]
                    for gi in range(g):
                        row[gi] += seg[gi] * v
            a = b
            n = float(b)
            for gi in range(g):
                vp = n * spp[gi] - sp[gi] * sp[gi]
                for c in range(s):
                    vt = n * stt[c] - st[c] * st[c]
                    den = np.sqrt(max(vp, 0.0) * max(vt, 0.0))
                    if den > 0:
                        corr[ci, gi, c] = (n * spt[c, gi] - sp[gi] * st[c]) / den
                    else:
                        degen[ci, gi, c] = True
        return corr, degen

    @njit(cache=True)
    def dom_checkpoints_nb(sel, traces, checkpoints):
        g = sel.shape[0]
        s = traces.shape[1]
        k = checkpoints.shape[0]
        diff = np.zeros((k, g, s))
        empty = np.zeros((k, g), dtype=np.bool_)
        tot = np.zeros(s)
        c1 = np.zeros(g)
        s1 = np.zeros((s, g))
        seg = np.empty(g)
        a = 0
        for ci in range(k):
            b = checkpoints[ci]
            for i in range(a, b):
                for gi in range(g):
                    seg[gi] = sel[gi, i]
                for gi in range(g):
                    c1[gi] += seg[gi]
                for c in range(s):
                    v = traces[i, c]
                    tot[c] += v
                    row = s1[c]
                    for gi in range(g):
                        row[gi] += seg[gi] * v
            a = b
            for gi in range(g):
                n1 = c1[gi]
                n0 = float(b) - n1
                if n1 == 0.0 or n0 == 0.0:
                    empty[ci, gi] = True
                    continue
                for c in range(s):
                    diff[ci, gi, c] = s1[c, gi] / n1 - (tot[c] - s1[c, gi]) / n0
        return diff, empty

else:  # pragma: no cover
    sbox_layer_nb = tower_points_nb = matvec_nb = None
    corr_checkpoints_nb = dom_checkpoints_nb = None


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def corr_checkpoints(pred, traces, checkpoints):
    pred = np.ascontiguousarray(pred, dtype=np.float64)
    traces = np.ascontiguousarray(traces, dtype=np.float64)
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    if USE_NUMBA:
        return corr_checkpoints_nb(pred, traces, checkpoints)
    return corr_checkpoints_np(pred, traces, checkpoints)


def dom_checkpoints(sel, traces, checkpoints):
    sel = np.ascontiguousarray(sel, dtype=np.uint8)
    traces = np.ascontiguousarray(traces, dtype=np.float64)
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    if USE_NUMBA:
        return dom_checkpoints_nb(sel, traces, checkpoints)
    return dom_checkpoints_np(sel, traces, checkpoints)
