"""Pure-Python implementations of the hot sequence/graph kernels.

These are the reference implementations; ``trajcheck.kernels`` swaps in the
compiled twins from ``_speedups`` when they are available. Both operate on
sequences of small integers (callers intern their tokens first).
"""

from __future__ import annotations

from typing import Sequence


def levenshtein(a: Sequence[int], b: Sequence[int]) -> int:
    """Minimum number of insert/delete/substitute steps turning ``a`` into ``b``."""
    n, m = len(a), len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    prev = list(range(m + 1))
    cur = [0] * (m + 1)
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (ai != b[j - 1])
            dele = prev[j] + 1
            ins = cur[j - 1] + 1
            best = sub if sub < dele else dele
            cur[j] = best if best < ins else ins
        prev, cur = cur, prev
    return prev[m]


def common_prefix_len(a: Sequence[int], b: Sequence[int]) -> int:
    """Length of the longest common prefix of two sequences."""
    n = min(len(a), len(b))
    i = 0
    while i < n and a[i] == b[i]:
        i += 1
    return i


def ged_path(a: Sequence[int], b: Sequence[int]) -> int:
    """Exact edit distance between two directed path graphs.

    The graphs have node labels ``a`` and ``b`` in path order and a directed
    edge between each pair of consecutive nodes. Unit costs: node
    insert/delete, node relabel (when labels differ), edge insert/delete.
    Minimised over all injective node mappings by branch-and-bound.
    """
    n, m = len(a), len(b)
    if n == 0:
        return m + max(m - 1, 0)
    if m == 0:
        return n + max(n - 1, 0)

    table: dict = {}
    aa = [table.setdefault(x, len(table)) for x in a]
    bb = [table.setdefault(x, len(table)) for x in b]
    n_labels = len(table)

    # suffix_a[i][l] = occurrences of label l in aa[i:], for the node bound
    suffix_a = [[0] * n_labels for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row = suffix_a[i + 1][:]
        row[aa[i]] += 1
        suffix_a[i] = row

    avail_b = [0] * n_labels
    for x in bb:
        avail_b[x] += 1

    edges_a = n - 1
    edges_b = m - 1

    # Initial upper bound: the order-preserving identity mapping.
    k = min(n, m)
    mism = sum(1 for t in range(k) if aa[t] != bb[t])
    best = mism + 2 * (n - k) + 2 * (m - k)

    used = [False] * m

    def rec(i: int, assigned: int, preserved: int, prev_j: int, cost: int) -> None:
        nonlocal best
        if i == n:
            total = cost + (m - assigned) + (edges_b - preserved)
            if total < best:
                best = total
            return

        # Admissible lower bound: unmatched-label node cost plus the
        # unavoidable difference in unresolved edge counts.
        remaining = n - i
        avail = m - assigned
        matchable = 0
        srow = suffix_a[i]
        for lbl in range(n_labels):
            c = srow[lbl]
            if c:
                d = avail_b[lbl]
                matchable += c if c <= d else d
        node_lb = (remaining if remaining >= avail else avail) - matchable
        rem_ea = edges_a - (i - 1 if i >= 1 else 0)
        rem_eb = edges_b - preserved
        edge_lb = rem_ea - rem_eb
        if edge_lb < 0:
            edge_lb = -edge_lb
        if cost + node_lb + edge_lb >= best:
            return

        ai = aa[i]
        # Try the cheap path continuation first, then label matches, then the rest.
        candidates = []
        cont = -1
        if prev_j >= 0 and prev_j + 1 < m and not used[prev_j + 1]:
            cont = prev_j + 1
            candidates.append(cont)
        for j in range(m):
            if not used[j] and j != cont and bb[j] == ai:
                candidates.append(j)
        for j in range(m):
            if not used[j] and j != cont and bb[j] != ai:
                candidates.append(j)

        for j in candidates:
            step = cost + (ai != bb[j])
            p = preserved
            if i >= 1:
                if prev_j >= 0 and j == prev_j + 1:
                    p += 1
                else:
                    step += 1
            used[j] = True
            avail_b[bb[j]] -= 1
            rec(i + 1, assigned + 1, p, j, step)
            used[j] = False
            avail_b[bb[j]] += 1

        # Delete node i (its incoming path edge, if any, dies with it).
        step = cost + 1 + (1 if i >= 1 else 0)
        rec(i + 1, assigned, preserved, -1, step)

    rec(0, 0, 0, -1, 0)
    return best
