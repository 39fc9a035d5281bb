"""Numba kernels for graph construction and message-passing decoding.

All kernels are compiled nogil so frame-level workers can run them on real
threads. No fastmath: message arithmetic must be bit-reproducible across
runs and against the pure-Python reference decoder used in tests.

Edge layout convention (shared by all decode kernels): edges are numbered
globally in check-major order, matrix 0's checks first. ``chk_ptr``/
``chk_var`` give the CSR view from the check side; ``var_ptr``/``var_edge``
list, for every variable, its incident edge ids in ascending order. This is
exactly the layout of the vertically stacked parity-check matrix, which is
what makes joint decoding and stacked single-matrix decoding bit-identical.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

__all__ = [
    "peg_build",
    "graph_girth",
    "syndrome_pass",
    "c2v_pass",
    "v2c_pass",
    "posterior_pass",
    "hard_pass",
    "mismatch_count",
    "decode_loop",
]


@njit(cache=True, nogil=True, inline="always")
def _splitmix64(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = x
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True, inline="always")
def _xorshift64star(state):
    x = state
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    return (x * np.uint64(0x2545F4914F6CDD1D)) & np.uint64(0xFFFFFFFFFFFFFFFF)


# ---------------------------------------------------------------------------
# progressive edge growth
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def peg_build(n, m, col_deg, cn_adj, cn_deg, vn_adj, vn_deg, seed):
    """Place edges variable by variable, deepest-check first.

    For each new edge of variable v, a BFS over the current graph splits the
    check set into unreached checks (preferred) or, when everything is
    reachable, the checks discovered at the deepest BFS level. Among those
    candidates the lowest-current-degree check wins; exact ties are broken
    by a seeded reservoir draw.

    Returns 0 on success, -1 if ``cn_adj`` capacity was exhausted (caller
    regrows the buffer and retries).
    """
    cn_cap = cn_adj.shape[1]
    chk_stamp = np.zeros(m, dtype=np.int32)
    var_stamp = np.zeros(n, dtype=np.int32)
    frontier = np.empty(n, dtype=np.int32)
    next_frontier = np.empty(n, dtype=np.int32)
    level_checks = np.empty(m, dtype=np.int32)
    token = np.int32(0)
    state = _splitmix64(np.uint64(seed))
    if state == np.uint64(0):
        state = np.uint64(0x9E3779B97F4A7C15)

    for v in range(n):
        for _ in range(col_deg[v]):
            token += 1
            var_stamp[v] = token
            frontier[0] = v
            n_front = 1
            reached = 0
            n_level = 0
            while True:
                # expand variable frontier into newly discovered checks
                n_level = 0
                for fi in range(n_front):
                    w = frontier[fi]
                    for k in range(vn_deg[w]):
                        c = vn_adj[w, k]
                        if chk_stamp[c] != token:
                            chk_stamp[c] = token
                            level_checks[n_level] = c
                            n_level += 1
                if n_level == 0:
                    break  # saturation: the rest of the checks are unreachable
                reached += n_level
                if reached == m:
                    break  # all reachable; this level is the deepest
                # expand checks into newly discovered variables
                n_next = 0
                for ci in range(n_level):
                    c = level_checks[ci]
                    for k in range(cn_deg[c]):
                        w = cn_adj[c, k]
                        if var_stamp[w] != token:
                            var_stamp[w] = token
                            next_frontier[n_next] = w
                            n_next += 1
                if n_next == 0:
                    break
                for i in range(n_next):
                    frontier[i] = next_frontier[i]
                n_front = n_next

            # candidate scan: unreached checks if any, else deepest level
            best = np.int32(-1)
            best_deg = np.int64(1 << 60)
            ties = np.int64(0)
            if reached < m:
                for c in range(m):
                    if chk_stamp[c] == token:
                        continue
                    d = np.int64(cn_deg[c])
                    if d < best_deg:
                        best = np.int32(c)
                        best_deg = d
                        ties = 1
                    elif d == best_deg:
                        ties += 1
                        state = _xorshift64star(state)
                        if state % np.uint64(ties) == np.uint64(0):
                            best = np.int32(c)
            else:
                for ci in range(n_level):
                    c = level_checks[ci]
                    d = np.int64(cn_deg[c])
                    if d < best_deg:
                        best = np.int32(c)
                        best_deg = d
                        ties = 1
                    elif d == best_deg:
                        ties += 1
                        state = _xorshift64star(state)
                        if state % np.uint64(ties) == np.uint64(0):
                            best = np.int32(c)

            if best < 0:
                return -2  # no candidate: infeasible request
            if cn_deg[best] >= cn_cap:
                return -1
            cn_adj[best, cn_deg[best]] = np.int32(v)
            cn_deg[best] += 1
            vn_adj[v, vn_deg[v]] = best
            vn_deg[v] += 1
    return 0


# ---------------------------------------------------------------------------
# girth
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def graph_girth(node_ptr, node_adj, n_roots, n_nodes):
    """Shortest cycle length of an undirected graph via rooted BFS.

    Roots 0..n_roots-1 must cover every cycle (variable nodes do, in a
    Tanner graph). Returns 0 when the graph is acyclic.
    """
    stamp = np.zeros(n_nodes, dtype=np.int64)
    dist = np.empty(n_nodes, dtype=np.int32)
    parent = np.empty(n_nodes, dtype=np.int32)
    queue = np.empty(n_nodes, dtype=np.int32)
    best = np.int64(1 << 40)
    token = np.int64(0)

    for root in range(n_roots):
        token += 1
        stamp[root] = token
        dist[root] = 0
        parent[root] = -1
        queue[0] = root
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            if np.int64(2 * (dist[u] + 1)) >= best:
                continue
            for k in range(node_ptr[u], node_ptr[u + 1]):
                w = node_adj[k]
                if w == parent[u]:
                    continue
                if stamp[w] == token:
                    cyc = np.int64(dist[u] + dist[w] + 1)
                    if cyc < best:
                        best = cyc
                else:
                    stamp[w] = token
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    queue[tail] = w
                    tail += 1
        if best == 4:
            break
    if best >= np.int64(1 << 40):
        return 0
    return int(best)


# ---------------------------------------------------------------------------
# decode passes
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def syndrome_pass(bits, chk_ptr, chk_var, out_syn, lo_chk, hi_chk, syn_off):
    """Parity of ``bits`` under checks [lo_chk, hi_chk)."""
    for j in range(lo_chk, hi_chk):
        p = np.uint8(0)
        for a in range(chk_ptr[j], chk_ptr[j + 1]):
            p ^= bits[chk_var[a]]
        out_syn[j - syn_off] = p


@njit(cache=True, nogil=True)
def c2v_pass(v2c, c2v, chk_ptr, syn, lo_chk, hi_chk, syn_off, clamp, scratch):
    """Check-to-variable update with syndrome sign, tanh product rule.

    The extrinsic product is taken over the other edges in ascending order
    (no divide-by-total shortcut) so results match the reference decoder
    multiply for multiply.
    """
    for j in range(lo_chk, hi_chk):
        lo = chk_ptr[j]
        hi = chk_ptr[j + 1]
        for a in range(lo, hi):
            scratch[a - lo] = math.tanh(0.5 * v2c[a])
        flip = syn[j - syn_off] != 0
        for a in range(lo, hi):
            prod = 1.0
            for b in range(lo, hi):
                if b != a:
                    prod *= scratch[b - lo]
            if prod >= 1.0:
                t = clamp
            elif prod <= -1.0:
                t = -clamp
            else:
                t = 2.0 * math.atanh(prod)
            if flip:
                t = -t
            if t > clamp:
                t = clamp
            elif t < -clamp:
                t = -clamp
            c2v[a] = t


@njit(cache=True, nogil=True)
def v2c_pass(v2c, c2v, var_ptr, var_edge, priors, lo_edge, hi_edge, joint, damping, clamp):
    """Variable-to-check update for the edges in [lo_edge, hi_edge).

    In joint mode the extrinsic sum runs over every matrix's incoming c2v
    messages; in isolated mode only over the owning matrix's.
    """
    n = priors.shape[0]
    for i in range(n):
        lo = var_ptr[i]
        hi = var_ptr[i + 1]
        total = priors[i]
        for t in range(lo, hi):
            e = var_edge[t]
            if joint or (lo_edge <= e < hi_edge):
                total += c2v[e]
        for t in range(lo, hi):
            e = var_edge[t]
            if lo_edge <= e < hi_edge:
                val = total - c2v[e]
                if damping != 0.0:
                    val = (1.0 - damping) * val + damping * v2c[e]
                if val > clamp:
                    val = clamp
                elif val < -clamp:
                    val = -clamp
                v2c[e] = val


@njit(cache=True, nogil=True)
def posterior_pass(c2v, var_ptr, var_edge, priors, posterior):
    """Joint soft decision: prior plus every matrix's c2v sum."""
    n = priors.shape[0]
    for i in range(n):
        total = priors[i]
        for t in range(var_ptr[i], var_ptr[i + 1]):
            total += c2v[var_edge[t]]
        posterior[i] = total


@njit(cache=True, nogil=True)
def hard_pass(posterior, bits):
    for i in range(posterior.shape[0]):
        bits[i] = np.uint8(1) if posterior[i] < 0.0 else np.uint8(0)


@njit(cache=True, nogil=True)
def mismatch_count(bits, chk_ptr, chk_var, syn):
    """Number of checks whose parity of ``bits`` disagrees with ``syn``."""
    bad = 0
    for j in range(syn.shape[0]):
        p = np.uint8(0)
        for a in range(chk_ptr[j], chk_ptr[j + 1]):
            p ^= bits[chk_var[a]]
        if p != syn[j]:
            bad += 1
    return bad


@njit(cache=True, nogil=True)
def decode_loop(
    chk_ptr,
    chk_var,
    var_ptr,
    var_edge,
    edge_off,
    m,
    syn,
    priors,
    v2c,
    c2v,
    posterior,
    hard,
    scratch,
    max_iterations,
    clamp,
    damping,
    joint,
    history,
    record,
):
    """Full flooding decode: all matrices' checks, then all variables.

    Returns (converged, iterations_used, residual_mismatches). The hard
    decision before the first sweep (the noisy key itself) counts as
    iteration 0; ``history`` row t holds the decision after sweep t.
    """
    u = edge_off.shape[0] - 1
    n = priors.shape[0]
    for l in range(u):
        for e in range(edge_off[l], edge_off[l + 1]):
            v2c[e] = priors[chk_var[e]]
    for e in range(c2v.shape[0]):
        c2v[e] = 0.0
    for i in range(n):
        hard[i] = np.uint8(1) if priors[i] < 0.0 else np.uint8(0)
    if record:
        for i in range(n):
            history[0, i] = hard[i]
    bad = mismatch_count(hard, chk_ptr, chk_var, syn)
    if bad == 0:
        return 1, 0, 0
    for it in range(1, max_iterations + 1):
        for l in range(u):
            c2v_pass(v2c, c2v, chk_ptr, syn, l * m, (l + 1) * m, 0, clamp, scratch)
        for l in range(u):
            v2c_pass(v2c, c2v, var_ptr, var_edge, priors, edge_off[l], edge_off[l + 1], joint, damping, clamp)
        posterior_pass(c2v, var_ptr, var_edge, priors, posterior)
        hard_pass(posterior, hard)
        if record:
            for i in range(n):
                history[it, i] = hard[i]
        bad = mismatch_count(hard, chk_ptr, chk_var, syn)
        if bad == 0:
            return 1, it, 0
    return 0, max_iterations, bad
