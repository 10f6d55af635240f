"""Hot loops over bitmask adjacency rows.

Each graph row is an int64 whose bit ``j`` marks edge ``i -> j`` (0-based),
so the kernels handle n <= MAX_BITS nodes. Every function is compiled with
numba when it is importable and ``RNR_NUMBA`` is not ``0``; otherwise the
identical source runs as plain Python/numpy. ``KERNEL_BACKEND`` records
which path is active. The uncompiled function of a jitted kernel is always
reachable as ``kernel.py_func``.
"""
import os

import numpy as np

MAX_BITS = 62

_want_numba = os.environ.get("RNR_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

try:
    if not _want_numba:
        raise ImportError
    from numba import njit as _numba_njit

    def jit(fn):
        return _numba_njit(cache=True, nogil=True)(fn)

    KERNEL_BACKEND = "numba"
except ImportError:

    def jit(fn):
        fn.py_func = fn
        return fn

    KERNEL_BACKEND = "python"


def rows_from_matrix(adj) -> np.ndarray:
    adj = np.asarray(adj, dtype=bool)
    n = adj.shape[0]
    if n > MAX_BITS:
        raise ValueError(f"bitmask kernels support at most {MAX_BITS} nodes, got {n}")
    weights = np.int64(1) << np.arange(n, dtype=np.int64)
    return (adj.astype(np.int64) * weights).sum(axis=1).astype(np.int64)


def matrix_from_rows(rows, n: int) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    bits = (rows[:, None] >> np.arange(n, dtype=np.int64)[None, :]) & 1
    return bits.astype(bool)


@jit
def popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@jit
def rows_popcount(rows):
    c = 0
    for i in range(rows.shape[0]):
        c += popcount(rows[i])
    return c


@jit
def undersample_rows(rows, u, out_dir, out_bid):
    """Write the rate-``u`` directed rows and symmetric bidirected rows."""
    n = rows.shape[0]
    p = rows.copy()
    q = np.zeros(n, dtype=np.int64)
    for i in range(n):
        out_bid[i] = 0
    for _ in range(1, u):
        # p holds A^l; nodes sharing an ancestor at equal depth l become bidirected
        for k in range(n):
            s = p[k]
            if s == 0:
                continue
            for i in range(n):
                if (s >> i) & 1:
                    out_bid[i] |= s
        for i in range(n):
            s = p[i]
            acc = 0
            for k in range(n):
                if (s >> k) & 1:
                    acc |= rows[k]
            q[i] = acc
        for i in range(n):
            p[i] = q[i]
    for i in range(n):
        out_dir[i] = p[i]
        out_bid[i] &= ~(np.int64(1) << i)


@jit
def images_match(all_rows, rates, hd, hb):
    """Per graph (one row block each), does undersampling at its rate give (hd, hb)?"""
    k, n = all_rows.shape
    out = np.zeros(k, dtype=np.bool_)
    dird = np.zeros(n, dtype=np.int64)
    bid = np.zeros(n, dtype=np.int64)
    for m in range(k):
        undersample_rows(all_rows[m], rates[m], dird, bid)
        ok = True
        for i in range(n):
            if dird[i] != hd[i] or bid[i] != hb[i]:
                ok = False
                break
        out[m] = ok
    return out


@jit
def member_confusion(all_rows, rates, truth_rows, ref1_d, ref1_b, ref2_d, ref2_b):
    """Edge counts per member for error reports, one row each:

    0-3: true-positive directed, estimated directed, true-positive bidirected,
    estimated bidirected of the member's undersampled image against
    reference 1; 4-5: true-positive directed and bidirected against
    reference 2; 6-7: true-positive and estimated directed of the member
    itself against ``truth_rows``.
    """
    k, n = all_rows.shape
    out = np.zeros((k, 8), dtype=np.int64)
    dird = np.zeros(n, dtype=np.int64)
    bid = np.zeros(n, dtype=np.int64)
    for m in range(k):
        undersample_rows(all_rows[m], rates[m], dird, bid)
        for i in range(n):
            upper = bid[i] & ~((np.int64(2) << i) - 1)  # pairs (i, j) with j > i
            out[m, 0] += popcount(dird[i] & ref1_d[i])
            out[m, 1] += popcount(dird[i])
            out[m, 2] += popcount(upper & ref1_b[i])
            out[m, 3] += popcount(upper)
            out[m, 4] += popcount(dird[i] & ref2_d[i])
            out[m, 5] += popcount(upper & ref2_b[i])
            out[m, 6] += popcount(all_rows[m, i] & truth_rows[i])
            out[m, 7] += popcount(all_rows[m, i])
    return out


@jit
def low_penalty(low, u, hd, hb, wad, wab, bufd, bufb):
    """Absence penalties forced by edges already in (non-hypothesis edges in U(low))."""
    n = low.shape[0]
    undersample_rows(low, u, bufd, bufb)
    pen_d = 0
    pen_b = 0
    for i in range(n):
        extra = bufd[i] & ~hd[i]
        if extra:
            for j in range(n):
                if (extra >> j) & 1:
                    pen_d += wad[i, j]
        extra = bufb[i] & ~hb[i]
        if extra:
            for j in range(i + 1, n):
                if (extra >> j) & 1:
                    pen_b += wab[i, j]
    return pen_d, pen_b


@jit
def high_penalty(high, u, hd, hb, wpd, wpb, bufd, bufb):
    """Presence penalties no completion can avoid (hypothesis edges missing from U(high))."""
    n = high.shape[0]
    undersample_rows(high, u, bufd, bufb)
    pen_d = 0
    pen_b = 0
    for i in range(n):
        miss = hd[i] & ~bufd[i]
        if miss:
            for j in range(n):
                if (miss >> j) & 1:
                    pen_d += wpd[i, j]
        miss = hb[i] & ~bufb[i]
        if miss:
            for j in range(i + 1, n):
                if (miss >> j) & 1:
                    pen_b += wpb[i, j]
    return pen_d, pen_b


@jit
def density_gap(lo_count, hi_count, dmin, dmax):
    """Smallest distance from the band reachable with edge count in [lo_count, hi_count]."""
    if lo_count > dmax:
        return lo_count - dmax
    if hi_count < dmin:
        return dmin - hi_count
    return 0


@jit
def scalar_key(dens, bid, dird, lex, base):
    if lex:
        return (dens * base + bid) * base + dird
    return dens + bid + dird


@jit
def _store(sol_rows, sol_cost, count, rows, dens, bid, dird):
    if count >= sol_rows.shape[0]:
        grown_rows = np.zeros((sol_rows.shape[0] * 2, sol_rows.shape[1]), dtype=np.int64)
        grown_cost = np.zeros((sol_cost.shape[0] * 2, 3), dtype=np.int64)
        grown_rows[:count] = sol_rows[:count]
        grown_cost[:count] = sol_cost[:count]
        sol_rows = grown_rows
        sol_cost = grown_cost
    sol_rows[count] = rows
    sol_cost[count, 0] = dens
    sol_cost[count, 1] = bid
    sol_cost[count, 2] = dird
    return sol_rows, sol_cost


@jit
def _within(dens, bid, dird, strict, lex, base, key_limit, total_limit):
    if strict and dens > 0:
        return False
    if scalar_key(dens, bid, dird, lex, base) > key_limit:
        return False
    return dens + bid + dird <= total_limit


@jit
def _node_state(cur_in, cur_und, hi, u, hd, hb, wpd, wad, wpb, wab, dmin, dmax, bufd, bufb):
    """Bounds of a search node; also refreshes ``hi`` = in | undecided."""
    n = cur_in.shape[0]
    for i in range(n):
        hi[i] = cur_in[i] | cur_und[i]
    lo_d, lo_b = low_penalty(cur_in, u, hd, hb, wad, wab, bufd, bufb)
    lo_size = rows_popcount(bufd) + rows_popcount(bufb)
    hi_d, hi_b = high_penalty(hi, u, hd, hb, wpd, wpb, bufd, bufb)
    hi_size = rows_popcount(bufd) + rows_popcount(bufb)
    n_in = rows_popcount(cur_in)
    n_und = rows_popcount(cur_und)
    dens = density_gap(n_in, n_in + n_und, dmin, dmax)
    return lo_d, lo_b, hi_d, hi_b, lo_size, hi_size, n_in, n_und, dens


@jit
def branch_and_bound(
    u, hd, hb, wpd, wad, wpb, wab, allowed, order,
    dmin, dmax, strict, lex, base, key_limit, total_limit, collect, max_solutions,
):
    """Depth-first search over edge variables at a fixed rate ``u``.

    A node is an (in, undecided) pair of row masks; its admissible bound is
    low_penalty(in) + high_penalty(in | undecided) + density gap. Before
    branching, every undecided edge is probed both ways and fixed when one
    value alone already exceeds the limits; the search then branches on the
    edge whose weaker probe bound is highest, then whose probes change the
    undersampled graphs most (ties: first in ``order``).

    ``key_limit`` is a 1-element array read on every bound check. With
    ``collect`` false the search minimises: each leaf lowers the limit to
    its key minus one, so other callers sharing the array benefit. With
    ``collect`` true the limit is fixed and every leaf within it is stored,
    stopping after ``max_solutions`` (0 = no limit).

    Returns ``(best_key, n_found, rows, costs, nodes)``; ``best_key`` is -1
    when no leaf qualified. ``order`` lists flat edge indices i*n+j.
    """
    n = hd.shape[0]
    nvars = order.shape[0]
    bufd = np.zeros(n, dtype=np.int64)
    bufb = np.zeros(n, dtype=np.int64)
    trial = np.zeros(n, dtype=np.int64)
    hi = np.zeros(n, dtype=np.int64)
    cap_stack = 2 * nvars + 4
    st_in = np.zeros((cap_stack, n), dtype=np.int64)
    st_und = np.zeros((cap_stack, n), dtype=np.int64)
    sol_rows = np.zeros((16, n), dtype=np.int64)
    sol_cost = np.zeros((16, 3), dtype=np.int64)
    count = 0
    best = -1
    nodes = 0
    top = 0
    for i in range(n):
        st_in[0, i] = 0
        st_und[0, i] = allowed[i]
    top = 1
    cur_in = np.zeros(n, dtype=np.int64)
    cur_und = np.zeros(n, dtype=np.int64)
    while top > 0:
        top -= 1
        for i in range(n):
            cur_in[i] = st_in[top, i]
            cur_und[i] = st_und[top, i]
        nodes += 1
        feasible = True
        br_a = -1
        br_bit = np.int64(0)
        lo_d, lo_b, hi_d, hi_b, lo_size, hi_size, n_in, n_und, dens = _node_state(
            cur_in, cur_und, hi, u, hd, hb, wpd, wad, wpb, wab, dmin, dmax, bufd, bufb
        )
        lim = key_limit[0]
        if not _within(dens, lo_b + hi_b, lo_d + hi_d, strict, lex, base, lim, total_limit):
            continue
        # Probe undecided edges cyclically, fixing an edge when one of its values
        # fails; stop once every edge was probed since the last fix. The edge
        # whose weaker side bound is highest is kept for branching.
        br_lo = -1
        br_hi = -1
        br_impact = -1
        since = 0
        v = 0
        while n_und > 0 and since < nvars:
            e = order[v]
            v += 1
            if v == nvars:
                v = 0
            since += 1
            a = e // n
            b = e - a * n
            bit = np.int64(1) << b
            if not (cur_und[a] & bit):
                continue
            for i in range(n):
                trial[i] = cur_in[i]
            trial[a] |= bit
            td, tb = low_penalty(trial, u, hd, hb, wad, wab, bufd, bufb)
            impact = rows_popcount(bufd) + rows_popcount(bufb) - lo_size
            dens_in = density_gap(n_in + 1, n_in + n_und, dmin, dmax)
            k_in = scalar_key(dens_in, tb + hi_b, td + hi_d, lex, base)
            bad_in = not _within(dens_in, tb + hi_b, td + hi_d, strict, lex, base, lim, total_limit)
            for i in range(n):
                trial[i] = hi[i]
            trial[a] &= ~bit
            td, tb = high_penalty(trial, u, hd, hb, wpd, wpb, bufd, bufb)
            impact += hi_size - rows_popcount(bufd) - rows_popcount(bufb)
            dens_out = density_gap(n_in, n_in + n_und - 1, dmin, dmax)
            k_out = scalar_key(dens_out, lo_b + tb, lo_d + td, lex, base)
            bad_out = not _within(dens_out, lo_b + tb, lo_d + td, strict, lex, base, lim, total_limit)
            if bad_in and bad_out:
                feasible = False
                break
            if bad_in or bad_out:
                cur_und[a] &= ~bit
                if bad_out:
                    cur_in[a] |= bit
                lo_d, lo_b, hi_d, hi_b, lo_size, hi_size, n_in, n_und, dens = _node_state(
                    cur_in, cur_und, hi, u, hd, hb, wpd, wad, wpb, wab, dmin, dmax, bufd, bufb
                )
                lim = key_limit[0]
                if not _within(dens, lo_b + hi_b, lo_d + hi_d, strict, lex, base, lim, total_limit):
                    feasible = False
                    break
                since = 0
                br_lo = -1
                br_hi = -1
                br_impact = -1
                continue
            k_lo = min(k_in, k_out)
            k_hi = max(k_in, k_out)
            if k_lo > br_lo or (k_lo == br_lo and (
                k_hi > br_hi or (k_hi == br_hi and impact > br_impact)
            )):
                br_lo = k_lo
                br_hi = k_hi
                br_impact = impact
                br_a = a
                br_bit = bit
        if not feasible:
            continue
        if n_und == 0:
            # leaf: bounds are exact
            n_in = rows_popcount(cur_in)
            dens = density_gap(n_in, n_in, dmin, dmax)
            bid = lo_b + hi_b
            dird = lo_d + hi_d
            key = scalar_key(dens, bid, dird, lex, base)
            if collect:
                sol_rows, sol_cost = _store(sol_rows, sol_cost, count, cur_in, dens, bid, dird)
                count += 1
                if best < 0 or key < best:
                    best = key
                if max_solutions > 0 and count >= max_solutions:
                    break
            else:
                if best < 0 or key < best:
                    best = key
                    sol_rows, sol_cost = _store(sol_rows, sol_cost, 0, cur_in, dens, bid, dird)
                    count = 1
                if key - 1 < key_limit[0]:
                    key_limit[0] = key - 1
            continue
        # branch on the strongest probed edge; "out" is explored first
        a = br_a
        bit = br_bit
        for i in range(n):
            st_in[top, i] = cur_in[i]
            st_und[top, i] = cur_und[i]
        st_in[top, a] |= bit
        st_und[top, a] &= ~bit
        top += 1
        for i in range(n):
            st_in[top, i] = cur_in[i]
            st_und[top, i] = cur_und[i]
        st_und[top, a] &= ~bit
        top += 1
    return best, count, sol_rows[:count].copy(), sol_cost[:count].copy(), nodes


@jit
def var_recursion(coef, noise, out):
    """x_t = coef @ x_{t-1} + noise_t with x_{-1} = 0; columns are time steps."""
    n = coef.shape[0]
    steps = noise.shape[1]
    prev = np.zeros(n)
    for t in range(steps):
        for i in range(n):
            acc = noise[i, t]
            for k in range(n):
                acc += coef[i, k] * prev[k]
            out[i, t] = acc
        for i in range(n):
            prev[i] = out[i, t]
