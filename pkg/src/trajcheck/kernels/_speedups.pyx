# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``pure.py``.

Same contracts, same results; build with ``python setup.py build_ext --inplace``.
"""

from libc.stdlib cimport malloc, free


def levenshtein(a, b):
    """Minimum number of insert/delete/substitute steps turning ``a`` into ``b``."""
    cdef int n = len(a)
    cdef int m = len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    cdef int *ca = <int *> malloc(n * sizeof(int))
    cdef int *cb = <int *> malloc(m * sizeof(int))
    cdef int *prev = <int *> malloc((m + 1) * sizeof(int))
    cdef int *cur = <int *> malloc((m + 1) * sizeof(int))
    if ca == NULL or cb == NULL or prev == NULL or cur == NULL:
        free(ca); free(cb); free(prev); free(cur)
        raise MemoryError()
    cdef int i, j, ai, sub, dele, ins, best
    cdef int *tmp
    try:
        for i in range(n):
            ca[i] = a[i]
        for j in range(m):
            cb[j] = b[j]
        for j in range(m + 1):
            prev[j] = j
        for i in range(1, n + 1):
            cur[0] = i
            ai = ca[i - 1]
            for j in range(1, m + 1):
                sub = prev[j - 1] + (ai != cb[j - 1])
                dele = prev[j] + 1
                ins = cur[j - 1] + 1
                best = sub if sub < dele else dele
                if ins < best:
                    best = ins
                cur[j] = best
            tmp = prev
            prev = cur
            cur = tmp
        return prev[m]
    finally:
        free(ca); free(cb); free(prev); free(cur)


def common_prefix_len(a, b):
    """Length of the longest common prefix of two sequences."""
    cdef int n = len(a)
    cdef int m = len(b)
    cdef int lim = n if n < m else m
    cdef int i = 0
    while i < lim and a[i] == b[i]:
        i += 1
    return i


cdef struct GedState:
    int n
    int m
    int n_labels
    int edges_a
    int edges_b
    int best
    int *aa
    int *bb
    int *suffix_a   # (n + 1) * n_labels
    int *avail_b
    unsigned char *used


cdef void _ged_rec(GedState *st, int i, int assigned, int preserved,
                   int prev_j, int cost) noexcept:
    cdef int total, remaining, avail, matchable, node_lb, rem_ea, rem_eb, edge_lb
    cdef int lbl, c, d, ai, j, step, p, cont
    if i == st.n:
        total = cost + (st.m - assigned) + (st.edges_b - preserved)
        if total < st.best:
            st.best = total
        return

    remaining = st.n - i
    avail = st.m - assigned
    matchable = 0
    for lbl in range(st.n_labels):
        c = st.suffix_a[i * st.n_labels + lbl]
        if c:
            d = st.avail_b[lbl]
            matchable += c if c <= d else d
    node_lb = (remaining if remaining >= avail else avail) - matchable
    rem_ea = st.edges_a - (i - 1 if i >= 1 else 0)
    rem_eb = st.edges_b - preserved
    edge_lb = rem_ea - rem_eb
    if edge_lb < 0:
        edge_lb = -edge_lb
    if cost + node_lb + edge_lb >= st.best:
        return

    ai = st.aa[i]
    cont = -1
    if prev_j >= 0 and prev_j + 1 < st.m and not st.used[prev_j + 1]:
        cont = prev_j + 1
        _ged_try(st, i, assigned, preserved, prev_j, cost, ai, cont)
    for j in range(st.m):
        if not st.used[j] and j != cont and st.bb[j] == ai:
            _ged_try(st, i, assigned, preserved, prev_j, cost, ai, j)
    for j in range(st.m):
        if not st.used[j] and j != cont and st.bb[j] != ai:
            _ged_try(st, i, assigned, preserved, prev_j, cost, ai, j)

    # delete node i (its incoming path edge, if any, dies with it)
    step = cost + 1 + (1 if i >= 1 else 0)
    _ged_rec(st, i + 1, assigned, preserved, -1, step)


cdef inline void _ged_try(GedState *st, int i, int assigned, int preserved,
                          int prev_j, int cost, int ai, int j) noexcept:
    cdef int step = cost + (ai != st.bb[j])
    cdef int p = preserved
    if i >= 1:
        if prev_j >= 0 and j == prev_j + 1:
            p += 1
        else:
            step += 1
    st.used[j] = 1
    st.avail_b[st.bb[j]] -= 1
    _ged_rec(st, i + 1, assigned + 1, p, j, step)
    st.used[j] = 0
    st.avail_b[st.bb[j]] += 1


def ged_path(a, b):
    """Exact edit distance between two directed path graphs.

    Mirrors ``pure.ged_path``: unit node insert/delete/relabel and edge
    insert/delete costs, minimised over injective node mappings.
    """
    cdef int n = len(a)
    cdef int m = len(b)
    if n == 0:
        return m + max(m - 1, 0)
    if m == 0:
        return n + max(n - 1, 0)

    table = {}
    py_a = [table.setdefault(x, len(table)) for x in a]
    py_b = [table.setdefault(x, len(table)) for x in b]
    cdef int n_labels = len(table)

    cdef GedState st
    st.n = n
    st.m = m
    st.n_labels = n_labels
    st.edges_a = n - 1
    st.edges_b = m - 1
    st.aa = <int *> malloc(n * sizeof(int))
    st.bb = <int *> malloc(m * sizeof(int))
    st.suffix_a = <int *> malloc((n + 1) * n_labels * sizeof(int))
    st.avail_b = <int *> malloc(n_labels * sizeof(int))
    st.used = <unsigned char *> malloc(m * sizeof(unsigned char))
    if (st.aa == NULL or st.bb == NULL or st.suffix_a == NULL
            or st.avail_b == NULL or st.used == NULL):
        free(st.aa); free(st.bb); free(st.suffix_a); free(st.avail_b); free(st.used)
        raise MemoryError()

    cdef int i, j, k, mism
    try:
        for i in range(n):
            st.aa[i] = py_a[i]
        for j in range(m):
            st.bb[j] = py_b[j]
            st.used[j] = 0
        for j in range(n_labels):
            st.suffix_a[n * n_labels + j] = 0
            st.avail_b[j] = 0
        for i in range(n - 1, -1, -1):
            for j in range(n_labels):
                st.suffix_a[i * n_labels + j] = st.suffix_a[(i + 1) * n_labels + j]
            st.suffix_a[i * n_labels + st.aa[i]] += 1
        for j in range(m):
            st.avail_b[st.bb[j]] += 1

        k = n if n < m else m
        mism = 0
        for i in range(k):
            if st.aa[i] != st.bb[i]:
                mism += 1
        st.best = mism + 2 * (n - k) + 2 * (m - k)

        _ged_rec(&st, 0, 0, 0, -1, 0)
        return st.best
    finally:
        free(st.aa); free(st.bb); free(st.suffix_a); free(st.avail_b); free(st.used)
