"""Max-flow / min-cut on pixel grids (Boykov-Kolmogorov search trees).

The seam labeling needs one exact s-t min-cut per alignment iteration on a
4-connected grid of up to a few hundred thousand pixels. General-purpose
solvers handle this in tens of seconds; the two-trees algorithm below runs
observed-linear on such grids and is compiled with numba.

Graph encoding: undirected pixel-pair edges become twin arc pairs (arc ``e``
and ``e ^ 1``), terminal capacities fold into one signed per-node value
(positive: source-connected, negative: sink-connected). Capacities are
integers; termination and exactness follow from integral augmentation.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_NONE = np.int64(-1)
_TERMINAL = np.int64(-2)
_ORPHAN = np.int64(-3)

_FREE = 0
_SOURCE_TREE = 1
_SINK_TREE = 2


@njit(cache=True)
def _bk_maxflow(head, arc_ids, to, rescap, tr_cap):  # pragma: no cover - jitted
    n = tr_cap.shape[0]
    tree = np.zeros(n, dtype=np.int8)
    parent = np.full(n, _NONE)
    dist = np.zeros(n, dtype=np.int64)
    ts = np.zeros(n, dtype=np.int64)

    # Intrusive FIFO queues: next_active[p] == -1 means "not queued",
    # -2 marks the queue tail.
    next_active = np.full(n, -1, dtype=np.int64)
    active_first = np.int64(-1)
    active_last = np.int64(-1)
    next_orphan = np.full(n, -1, dtype=np.int64)
    orphan_first = np.int64(-1)
    orphan_last = np.int64(-1)

    flow = np.int64(0)
    time = np.int64(0)

    for p in range(n):
        if tr_cap[p] != 0:
            tree[p] = _SOURCE_TREE if tr_cap[p] > 0 else _SINK_TREE
            parent[p] = _TERMINAL
            dist[p] = 1
            if next_active[p] == -1:
                if active_last == -1:
                    active_first = p
                else:
                    next_active[active_last] = p
                active_last = p
                next_active[p] = -2

    while True:
        # -------- growth --------
        found = np.int64(-1)
        while active_first != -1:
            p = active_first
            nxt = next_active[p]
            next_active[p] = -1
            active_first = -1 if nxt == -2 else nxt
            if active_first == -1:
                active_last = -1
            if tree[p] == _FREE:
                continue
            tp = tree[p]
            for pos in range(head[p], head[p + 1]):
                e = arc_ids[pos]
                res = rescap[e] if tp == _SOURCE_TREE else rescap[e ^ 1]
                if res <= 0:
                    continue
                q = to[e]
                if tree[q] == _FREE:
                    tree[q] = tp
                    parent[q] = e ^ 1
                    dist[q] = dist[p] + 1
                    ts[q] = ts[p]
                    if next_active[q] == -1:
                        if active_last == -1:
                            active_first = q
                        else:
                            next_active[active_last] = q
                        active_last = q
                        next_active[q] = -2
                elif tree[q] != tp:
                    found = e if tp == _SOURCE_TREE else (e ^ 1)
                    # p keeps unscanned arcs; revisit it next round.
                    if next_active[p] == -1:
                        if active_last == -1:
                            active_first = p
                        else:
                            next_active[active_last] = p
                        active_last = p
                        next_active[p] = -2
                    break
            if found >= 0:
                break
        if found < 0:
            break

        time += 1

        # -------- augment along the S->T arc `found` --------
        bottleneck = rescap[found]
        p = to[found ^ 1]  # tail of the arc (source side)
        while parent[p] != _TERMINAL:
            e = parent[p]
            if rescap[e ^ 1] < bottleneck:
                bottleneck = rescap[e ^ 1]
            p = to[e]
        if tr_cap[p] < bottleneck:
            bottleneck = tr_cap[p]
        p = to[found]  # head of the arc (sink side)
        while parent[p] != _TERMINAL:
            e = parent[p]
            if rescap[e] < bottleneck:
                bottleneck = rescap[e]
            p = to[e]
        if -tr_cap[p] < bottleneck:
            bottleneck = -tr_cap[p]

        rescap[found] -= bottleneck
        rescap[found ^ 1] += bottleneck

        p = to[found ^ 1]
        while parent[p] != _TERMINAL:
            e = parent[p]
            rescap[e] += bottleneck
            rescap[e ^ 1] -= bottleneck
            if rescap[e ^ 1] == 0:
                parent[p] = _ORPHAN
                if next_orphan[p] == -1:
                    if orphan_last == -1:
                        orphan_first = p
                    else:
                        next_orphan[orphan_last] = p
                    orphan_last = p
                    next_orphan[p] = -2
            p = to[e]
        tr_cap[p] -= bottleneck
        if tr_cap[p] == 0:
            parent[p] = _ORPHAN
            if next_orphan[p] == -1:
                if orphan_last == -1:
                    orphan_first = p
                else:
                    next_orphan[orphan_last] = p
                orphan_last = p
                next_orphan[p] = -2

        p = to[found]
        while parent[p] != _TERMINAL:
            e = parent[p]
            rescap[e ^ 1] += bottleneck
            rescap[e] -= bottleneck
            if rescap[e] == 0:
                parent[p] = _ORPHAN
                if next_orphan[p] == -1:
                    if orphan_last == -1:
                        orphan_first = p
                    else:
                        next_orphan[orphan_last] = p
                    orphan_last = p
                    next_orphan[p] = -2
            p = to[e]
        tr_cap[p] += bottleneck
        if tr_cap[p] == 0:
            parent[p] = _ORPHAN
            if next_orphan[p] == -1:
                if orphan_last == -1:
                    orphan_first = p
                else:
                    next_orphan[orphan_last] = p
                orphan_last = p
                next_orphan[p] = -2

        flow += bottleneck

        # -------- adoption --------
        while orphan_first != -1:
            p = orphan_first
            nxt = next_orphan[p]
            next_orphan[p] = -1
            orphan_first = -1 if nxt == -2 else nxt
            if orphan_first == -1:
                orphan_last = -1

            tp = tree[p]
            best_arc = np.int64(-1)
            best_d = np.int64(1) << 60
            for pos in range(head[p], head[p + 1]):
                e = arc_ids[pos]
                q = to[e]
                if tree[q] != tp:
                    continue
                res = rescap[e ^ 1] if tp == _SOURCE_TREE else rescap[e]
                if res <= 0:
                    continue
                # Certify that q's chain reaches a terminal.
                d = np.int64(0)
                j = q
                ok = False
                while True:
                    if ts[j] == time:
                        d += dist[j]
                        ok = True
                        break
                    pa = parent[j]
                    d += 1
                    if pa == _TERMINAL:
                        ts[j] = time
                        dist[j] = 1
                        ok = True
                        break
                    if pa == _ORPHAN or pa == _NONE:
                        break
                    j = to[pa]
                if ok:
                    if d < best_d:
                        best_arc = e
                        best_d = d
                    # Mark the certified path for later walks.
                    j = q
                    dd = d
                    while ts[j] != time:
                        ts[j] = time
                        dist[j] = dd
                        dd -= 1
                        j = to[parent[j]]
            if best_arc >= 0:
                parent[p] = best_arc
                ts[p] = time
                dist[p] = best_d + 1
            else:
                # p leaves the tree; its children become orphans and its
                # same-tree neighbors may need to grow over it again.
                for pos in range(head[p], head[p + 1]):
                    e = arc_ids[pos]
                    q = to[e]
                    if tree[q] != tp:
                        continue
                    res = rescap[e ^ 1] if tp == _SOURCE_TREE else rescap[e]
                    if res > 0:
                        if next_active[q] == -1:
                            if active_last == -1:
                                active_first = q
                            else:
                                next_active[active_last] = q
                            active_last = q
                            next_active[q] = -2
                    pq = parent[q]
                    if pq >= 0 and to[pq] == p:
                        parent[q] = _ORPHAN
                        if next_orphan[q] == -1:
                            if orphan_last == -1:
                                orphan_first = q
                            else:
                                next_orphan[orphan_last] = q
                            orphan_last = q
                            next_orphan[q] = -2
                tree[p] = _FREE
                parent[p] = _NONE

    return flow, tree


def min_cut(
    n_nodes: int,
    edge_u: np.ndarray,
    edge_v: np.ndarray,
    edge_cap: np.ndarray,
    terminal_cap: np.ndarray,
) -> tuple[int, np.ndarray]:
    """Exact s-t min cut over undirected integer-capacity edges.

    ``terminal_cap[p] > 0`` ties node p to the source with that capacity,
    ``< 0`` to the sink. Returns ``(flow_value, source_side)`` where
    ``source_side[p]`` is True for nodes on the source side of a minimum
    cut (the source tree at termination). Deterministic for fixed input
    order.
    """
    m = len(edge_u)
    tr_cap = np.ascontiguousarray(terminal_cap, dtype=np.int64).copy()
    if m == 0:
        flow = np.int64(0)
        return int(flow), tr_cap > 0

    to = np.empty(2 * m, dtype=np.int64)
    tail = np.empty(2 * m, dtype=np.int64)
    rescap = np.empty(2 * m, dtype=np.int64)
    to[0::2] = edge_v
    to[1::2] = edge_u
    tail[0::2] = edge_u
    tail[1::2] = edge_v
    rescap[0::2] = edge_cap
    rescap[1::2] = edge_cap

    order = np.argsort(tail, kind="stable")
    arc_ids = order.astype(np.int64)
    head = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(head, tail + 1, 1)
    head = np.cumsum(head)

    flow, tree = _bk_maxflow(head, arc_ids, to, rescap, tr_cap)
    return int(flow), tree == _SOURCE_TREE
