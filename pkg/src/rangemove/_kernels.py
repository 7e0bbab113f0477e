"""Compiled inner loops: BK max-flow and layered-graph arc generation.

Set ``NUMBA_DISABLE_JIT=1`` to run them as plain Python when debugging.
"""

import numpy as np
from numba import njit

NONE = -1
TERMINAL = -2
ORPHAN = -3
BIG_DIST = 1 << 60


@njit(cache=True)
def bk_maxflow(n, start, sister, head, rcap, tr_cap, tol):
    """Boykov-Kolmogorov augmenting-path max-flow on a CSR residual graph.

    Arcs out of node ``v`` are ``start[v]:start[v+1]``; ``sister[a]`` is the
    reverse of arc ``a``.  ``rcap`` and ``tr_cap`` are updated in place.  ``tr_cap[v] > 0`` is residual capacity s->v,
    ``tr_cap[v] < 0`` is residual capacity v->t.  Returns the pushed flow and
    a segment array (0 source side, 1 sink side).
    """
    parent = np.full(n, NONE, dtype=np.int64)
    is_sink = np.zeros(n, dtype=np.bool_)
    ts = np.zeros(n, dtype=np.int64)
    dist = np.zeros(n, dtype=np.int64)

    qcap = n + 1
    queue = np.empty(qcap, dtype=np.int64)
    inq = np.zeros(n, dtype=np.bool_)
    qh = 0
    qt = 0
    orph = np.empty(qcap, dtype=np.int64)
    oh = 0
    ot = 0

    for v in range(n):
        if tr_cap[v] > tol:
            parent[v] = TERMINAL
            dist[v] = 1
            queue[qt] = v
            qt = (qt + 1) % qcap
            inq[v] = True
        elif tr_cap[v] < -tol:
            parent[v] = TERMINAL
            is_sink[v] = True
            dist[v] = 1
            queue[qt] = v
            qt = (qt + 1) % qcap
            inq[v] = True

    flow = 0.0
    time = 0
    current = -1

    while True:
        i = current
        if i >= 0:
            inq[i] = False
            if parent[i] == NONE:
                i = -1
        if i < 0:
            while qh != qt:
                cand = queue[qh]
                qh = (qh + 1) % qcap
                inq[cand] = False
                if parent[cand] != NONE:
                    i = cand
                    break
            if i < 0:
                break

        # growth
        mid = -1
        if not is_sink[i]:
            for k in range(start[i], start[i + 1]):
                a = k
                if rcap[a] > tol:
                    j = head[a]
                    if parent[j] == NONE:
                        is_sink[j] = False
                        parent[j] = sister[a]
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1
                        if not inq[j]:
                            inq[j] = True
                            queue[qt] = j
                            qt = (qt + 1) % qcap
                    elif is_sink[j]:
                        mid = a
                        break
                    elif ts[j] <= ts[i] and dist[j] > dist[i]:
                        parent[j] = sister[a]
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1
        else:
            for k in range(start[i], start[i + 1]):
                a = k
                if rcap[sister[a]] > tol:
                    j = head[a]
                    if parent[j] == NONE:
                        is_sink[j] = True
                        parent[j] = sister[a]
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1
                        if not inq[j]:
                            inq[j] = True
                            queue[qt] = j
                            qt = (qt + 1) % qcap
                    elif not is_sink[j]:
                        mid = sister[a]
                        break
                    elif ts[j] <= ts[i] and dist[j] > dist[i]:
                        parent[j] = sister[a]
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1

        time += 1
        if mid < 0:
            current = -1
            continue

        current = i
        inq[i] = True

        # bottleneck
        b = rcap[mid]
        v = head[sister[mid]]
        while True:
            e = parent[v]
            if e == TERMINAL:
                break
            if rcap[sister[e]] < b:
                b = rcap[sister[e]]
            v = head[e]
        if tr_cap[v] < b:
            b = tr_cap[v]
        v = head[mid]
        while True:
            e = parent[v]
            if e == TERMINAL:
                break
            if rcap[e] < b:
                b = rcap[e]
            v = head[e]
        if -tr_cap[v] < b:
            b = -tr_cap[v]

        # push
        rcap[sister[mid]] += b
        rcap[mid] -= b
        v = head[sister[mid]]
        while True:
            e = parent[v]
            if e == TERMINAL:
                break
            rcap[e] += b
            rcap[sister[e]] -= b
            nxt = head[e]
            if rcap[sister[e]] <= tol:
                parent[v] = ORPHAN
                orph[ot] = v
                ot = (ot + 1) % qcap
            v = nxt
        tr_cap[v] -= b
        if tr_cap[v] <= tol:
            parent[v] = ORPHAN
            orph[ot] = v
            ot = (ot + 1) % qcap
        v = head[mid]
        while True:
            e = parent[v]
            if e == TERMINAL:
                break
            rcap[sister[e]] += b
            rcap[e] -= b
            nxt = head[e]
            if rcap[e] <= tol:
                parent[v] = ORPHAN
                orph[ot] = v
                ot = (ot + 1) % qcap
            v = nxt
        tr_cap[v] += b
        if tr_cap[v] >= -tol:
            parent[v] = ORPHAN
            orph[ot] = v
            ot = (ot + 1) % qcap
        flow += b

        # adoption
        time += 1
        while oh != ot:
            v = orph[oh]
            oh = (oh + 1) % qcap
            side = is_sink[v]
            best = -1
            dmin = BIG_DIST
            for k in range(start[v], start[v + 1]):
                a0 = k
                if side:
                    ok = rcap[a0] > tol
                else:
                    ok = rcap[sister[a0]] > tol
                if not ok:
                    continue
                j = head[a0]
                if is_sink[j] != side or parent[j] == NONE:
                    continue
                d = 0
                u = j
                while True:
                    if ts[u] == time:
                        d += dist[u]
                        break
                    e = parent[u]
                    d += 1
                    if e == TERMINAL:
                        ts[u] = time
                        dist[u] = 1
                        break
                    if e == ORPHAN:
                        d = BIG_DIST
                        break
                    u = head[e]
                if d < BIG_DIST:
                    if d < dmin:
                        best = a0
                        dmin = d
                    u = j
                    while ts[u] != time:
                        ts[u] = time
                        dist[u] = d
                        d -= 1
                        u = head[parent[u]]
            if best >= 0:
                parent[v] = best
                ts[v] = time
                dist[v] = dmin + 1
            else:
                parent[v] = NONE
                for k in range(start[v], start[v + 1]):
                    a0 = k
                    j = head[a0]
                    if is_sink[j] != side:
                        continue
                    pj = parent[j]
                    if pj == NONE:
                        continue
                    if side:
                        grow = rcap[a0] > tol
                    else:
                        grow = rcap[sister[a0]] > tol
                    if grow and not inq[j]:
                        inq[j] = True
                        queue[qt] = j
                        qt = (qt + 1) % qcap
                    if pj != TERMINAL and pj != ORPHAN and head[pj] == v:
                        parent[j] = ORPHAN
                        orph[ot] = j
                        ot = (ot + 1) % qcap

    seg = np.zeros(n, dtype=np.int8)
    for v in range(n):
        if parent[v] != NONE and is_sink[v]:
            seg[v] = 1
    return flow, seg


@njit(cache=True)
def layered_arcs(lo, k, offsets, unary, ea, eb, ew, table, d2, off, inf_cap):
    """Arcs of the layered (Ishikawa) network for a convex-prior subproblem.

    Binary variable ``offsets[i] + m - 1`` (m = 1..k[i]-1) is on the source
    side iff node i takes a label >= lo[i] + m.  Returns
    (tails, heads, caps, coef, constant, arc_edge) where ``coef`` is the
    linear cost of each variable being on the source side.
    """
    nv = offsets[-1]
    n_act = len(lo)
    coef = np.zeros(nv)
    const = 0.0

    # unary chains
    for i in range(n_act):
        base = lo[i]
        const += unary[i, base]
        for m in range(1, k[i]):
            coef[offsets[i] + m - 1] += unary[i, base + m] - unary[i, base + m - 1]

    # count arcs
    n_col = 0
    for i in range(n_act):
        if k[i] > 2:
            n_col += k[i] - 2
    n_pair = 0
    for e in range(len(ea)):
        i = ea[e]
        j = eb[e]
        if ew[e] <= 0.0:
            continue
        shift = lo[i] - lo[j]
        for m in range(1, k[i]):
            for nn in range(1, k[j]):
                if d2[shift + m - nn + off - 1] > 0.0:
                    n_pair += 1

    total = n_col + n_pair
    tails = np.empty(total, dtype=np.int64)
    heads = np.empty(total, dtype=np.int64)
    caps = np.empty(total)
    arc_edge = np.empty(total, dtype=np.int64)
    p = 0
    for i in range(n_act):
        for m in range(1, k[i] - 1):
            tails[p] = offsets[i] + m
            heads[p] = offsets[i] + m - 1
            caps[p] = inf_cap
            arc_edge[p] = -1
            p += 1

    for e in range(len(ea)):
        i = ea[e]
        j = eb[e]
        w = ew[e]
        if w <= 0.0:
            continue
        shift = lo[i] - lo[j]
        kj = k[j] - 1
        # F(a, b) = w * f(shift + a - b)
        const += w * table[shift + off]
        for m in range(1, k[i]):
            coef[offsets[i] + m - 1] += w * (table[shift + m - kj + off] - table[shift + m - 1 - kj + off])
        for nn in range(1, k[j]):
            coef[offsets[j] + nn - 1] += w * (table[shift - nn + off] - table[shift - nn + 1 + off])
        for m in range(1, k[i]):
            for nn in range(1, k[j]):
                c = d2[shift + m - nn + off - 1]
                if c > 0.0:
                    tails[p] = offsets[i] + m - 1
                    heads[p] = offsets[j] + nn - 1
                    caps[p] = w * c
                    arc_edge[p] = e
                    p += 1
    return tails, heads, caps, coef, const, arc_edge
