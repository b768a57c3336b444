"""Euler tours as circular edge lists with weighted corners.

Each directed edge is a node in a circular doubly-linked list (tour order)
and simultaneously a node of a balanced search tree over the same order,
augmented with subtree true-edge counts and corner-weight sums.  The tree
is a treap: node identity is stable across rebalancing, so edges double as
handles.  Corners are addressed as "the corner after directed edge e"; an
edge's ``weight`` field stores that corner's weight.

Edges are true (real) or false (zero-width bookkeeping edges joining the
two clones of a split vertex); false edges count 0 toward distances.
"""

from __future__ import annotations

import random

from .errors import (
    CycleError,
    ExhaustedError,
    ForestError,
    InvalidHandleError,
    NotConnectedError,
    WeightRangeError,
)

_MAX_WEIGHT = (1 << 63) - 1


def _check_weight(w: int):
    if w < 0 or w > _MAX_WEIGHT:
        raise WeightRangeError(f"corner weight {w} outside machine-word range")


class MacroEdge:
    """One directed edge of a tour; also a treap node."""

    __slots__ = (
        "edge_id",
        "true_flag",
        "weight",
        "succ",
        "pred",
        "reverse",
        "left",
        "right",
        "parent",
        "prio",
        "size",
        "agg_true",
        "agg_weight",
        "tour",
        "deleted",
        "tail_cluster",
        "tail_rank",
    )

    def __init__(self, edge_id, true_flag: int, weight: int, prio: float):
        _check_weight(weight)
        self.edge_id = edge_id
        self.true_flag = 1 if true_flag else 0
        self.weight = weight
        self.succ = self.pred = self.reverse = None
        self.left = self.right = self.parent = None
        self.prio = prio
        self.size = 1
        self.agg_true = self.true_flag
        self.agg_weight = weight
        self.tour = None
        self.deleted = False
        self.tail_cluster = None
        self.tail_rank = None

    @property
    def is_true(self) -> bool:
        return bool(self.true_flag)

    @property
    def true_succ(self) -> "MacroEdge":
        """Nearest strict successor that is a true edge."""
        m = self.succ
        while not m.true_flag:
            m = m.succ
        return m

    @property
    def true_pred(self) -> "MacroEdge":
        m = self.pred
        while not m.true_flag:
            m = m.pred
        return m

    def __repr__(self):
        k = "T" if self.true_flag else "F"
        return f"<MacroEdge {self.edge_id} {k} w={self.weight}>"


class MacroTour:
    """One tour: either a circular list of edges or an empty tour holding
    the sole corner of an isolated node."""

    __slots__ = ("root", "solo_weight", "alive", "tree_rec")

    def __init__(self, root=None, solo_weight: int = 0):
        self.root = root
        self.solo_weight = solo_weight
        self.alive = True
        self.tree_rec = None
        if root is not None:
            root.tour = self

    @property
    def is_empty(self) -> bool:
        return self.root is None

    @property
    def edge_count(self) -> int:
        return self.root.size if self.root else 0

    @property
    def total_true(self) -> int:
        return self.root.agg_true if self.root else 0

    @property
    def total_weight(self) -> int:
        return self.root.agg_weight if self.root else self.solo_weight

    def edges(self):
        """Tour-order edge list (linearized at the tree anchor)."""
        out = []

        def walk(t):
            if t:
                walk(t.left)
                out.append(t)
                walk(t.right)

        walk(self.root)
        return out


# -- treap plumbing ----------------------------------------------------------


def _refresh(x: MacroEdge):
    s = 1
    t = x.true_flag
    w = x.weight
    l, r = x.left, x.right
    if l is not None:
        s += l.size
        t += l.agg_true
        w += l.agg_weight
    if r is not None:
        s += r.size
        t += r.agg_true
        w += r.agg_weight
    x.size = s
    x.agg_true = t
    x.agg_weight = w


def _refresh_up(x: MacroEdge):
    while x is not None:
        _refresh(x)
        x = x.parent


def _root_of(x: MacroEdge) -> MacroEdge:
    while x.parent is not None:
        x = x.parent
    return x


def _split_count(t, k):
    """First k nodes to the left tree, rest to the right."""
    if t is None:
        return None, None
    t.parent = None
    ls = t.left.size if t.left else 0
    if k <= ls:
        l, r = _split_count(t.left, k)
        t.left = r
        if r is not None:
            r.parent = t
        _refresh(t)
        return l, t
    l, r = _split_count(t.right, k - ls - 1)
    t.right = l
    if l is not None:
        l.parent = t
    _refresh(t)
    return t, r


def _join(l, r):
    if l is None:
        return r
    if r is None:
        return l
    if l.prio >= r.prio:
        l.right = _join(l.right, r)
        l.right.parent = l
        _refresh(l)
        l.parent = None
        return l
    r.left = _join(l, r.left)
    r.left.parent = r
    _refresh(r)
    r.parent = None
    return r


def _index_of(x: MacroEdge) -> int:
    i = x.left.size if x.left else 0
    n = x
    while n.parent is not None:
        p = n.parent
        if n is p.right:
            i += (p.left.size if p.left else 0) + 1
        n = p
    return i


def _prefix_incl(x: MacroEdge):
    """(true count, weight sum) over tour positions 0..index(x)."""
    t = x.true_flag
    w = x.weight
    if x.left is not None:
        t += x.left.agg_true
        w += x.left.agg_weight
    n = x
    while n.parent is not None:
        p = n.parent
        if n is p.right:
            t += p.true_flag
            w += p.weight
            if p.left is not None:
                t += p.left.agg_true
                w += p.left.agg_weight
        n = p
    return t, w


def _node_at(t: MacroEdge, k: int) -> MacroEdge:
    while True:
        ls = t.left.size if t.left else 0
        if k < ls:
            t = t.left
        elif k == ls:
            return t
        else:
            k -= ls + 1
            t = t.right


_METRIC_TRUE = 0
_METRIC_WEIGHT = 1
_METRIC_COMBINED = 2


def _agg(t, metric):
    if metric == _METRIC_TRUE:
        return t.agg_true
    if metric == _METRIC_WEIGHT:
        return t.agg_weight
    return t.agg_true + t.agg_weight


def _val(t, metric):
    if metric == _METRIC_TRUE:
        return t.true_flag
    if metric == _METRIC_WEIGHT:
        return t.weight
    return t.true_flag + t.weight


def _select_metric(t: MacroEdge, target: int, metric: int) -> MacroEdge:
    """Leftmost node whose inclusive prefix sum reaches target (>= 1)."""
    while True:
        ls = _agg(t.left, metric) if t.left else 0
        if ls >= target:
            t = t.left
        elif ls + _val(t, metric) >= target:
            return t
        else:
            target -= ls + _val(t, metric)
            t = t.right


def _build_treap(nodes, rng):
    """Cartesian-tree build of an in-order node sequence, O(n)."""
    stack = []
    for node in nodes:
        node.prio = rng.random()
        node.left = node.right = node.parent = None
        spilled = None
        while stack and stack[-1].prio < node.prio:
            spilled = stack.pop()
        node.left = spilled
        if spilled is not None:
            spilled.parent = node
        if stack:
            stack[-1].right = node
            node.parent = stack[-1]
        stack.append(node)

    def fill(t):
        if t is None:
            return
        fill(t.left)
        fill(t.right)
        _refresh(t)

    root = stack[0] if stack else None
    fill(root)
    return root


class MacroForest:
    """Factory and operation surface for a forest of macro tours."""

    def __init__(self, seed: int = 0):
        self._rng = random.Random(seed)
        self._next_id = 0
        self.tours = set()

    # -- construction ---------------------------------------------------------

    def _new_id(self):
        i = self._next_id
        self._next_id += 1
        return i

    def new_edge(self, true_flag=True, weight=0, edge_id=None) -> MacroEdge:
        if edge_id is None:
            edge_id = self._new_id()
        return MacroEdge(edge_id, true_flag, weight, self._rng.random())

    def empty_tour(self, solo_weight: int = 0) -> MacroTour:
        _check_weight(solo_weight)
        tour = MacroTour(None, solo_weight)
        self.tours.add(tour)
        return tour

    def build_tour(self, crossings, reverse_of) -> tuple[MacroTour, dict]:
        """Build one tour from ``crossings`` = [(tag, true_flag, weight), ...]
        in tour order; ``reverse_of`` pairs each tag with its partner's tag.
        Returns the tour and a tag -> edge mapping."""
        nodes = []
        by_tag = {}
        for tag, true_flag, weight in crossings:
            node = self.new_edge(true_flag, weight)
            by_tag[tag] = node
            nodes.append((tag, node))
        n = len(nodes)
        for i, (tag, node) in enumerate(nodes):
            node.succ = nodes[(i + 1) % n][1]
            node.pred = nodes[(i - 1) % n][1]
            node.reverse = by_tag[reverse_of[tag]]
        for tag, node in nodes:
            if node.reverse.reverse is not node:
                raise ForestError("reverse pairing is not an involution")
        root = _build_treap([node for _, node in nodes], self._rng)
        tour = MacroTour(root)
        self.tours.add(tour)
        return tour, by_tag

    def _finalize(self, tour: MacroTour, root):
        tour.root = root
        if root is not None:
            root.tour = tour
        return tour

    def _retire(self, tour: MacroTour):
        tour.alive = False
        self.tours.discard(tour)

    # -- handle checks ----------------------------------------------------------

    @staticmethod
    def _check(e: MacroEdge):
        if e is None or e.deleted:
            raise InvalidHandleError("stale macro-edge handle")

    def tour_of(self, e: MacroEdge) -> MacroTour:
        self._check(e)
        tour = _root_of(e).tour
        if tour is None or not tour.alive:
            raise InvalidHandleError("edge belongs to no live tour")
        return tour

    # -- queries -----------------------------------------------------------------

    def tour_neighbors(self, e: MacroEdge):
        """(predecessor, successor) in the Euler tour."""
        self._check(e)
        return (e.pred, e.succ)

    def rotation_neighbors(self, e: MacroEdge):
        """(predecessor, successor) in the rotation at tail(e)."""
        self._check(e)
        return (e.pred.reverse, e.reverse.succ)

    def edge_at_distance(self, e: MacroEdge, t: int) -> MacroEdge:
        """Edge exactly t true-edge steps after e (cyclic; t >= 0)."""
        self._check(e)
        if t < 0:
            raise ValueError("distance must be non-negative")
        tour = self.tour_of(e)
        total = tour.total_true
        if total == 0:
            return e
        t %= total
        pt, _ = _prefix_incl(e)
        if t == 0:
            if e.true_flag:
                return e
            # last true edge at or before e, cyclically
            target = pt if pt else total
            return _select_metric(tour.root, target, _METRIC_TRUE)
        target = pt + t
        if target > total:
            target -= total
        return _select_metric(tour.root, target, _METRIC_TRUE)

    def _range_after(self, e, j, root, pref_t, pref_w):
        """(true, weight) sums over the open-left segment (e .. succ^j(e)]."""
        if j == 0:
            return 0, 0
        n = root.size
        i = _index_of(e)
        if i + j < n:
            t, w = _prefix_incl(_node_at(root, i + j))
            return t - pref_t, w - pref_w
        t, w = _prefix_incl(_node_at(root, i + j - n))
        return root.agg_true - pref_t + t, root.agg_weight - pref_w + w

    def _hop_cost(self, e, k, metric, root, pref_t, pref_w):
        """Cost of k forward hops from e.

        Weight mode:    corners crossed, i.e. weights over [e .. succ^(k-1)].
        Combined mode:  the same plus one per true edge crossed, i.e. trues
                        over (e .. succ^k].
        """
        if k == 0:
            return 0
        if metric == _METRIC_WEIGHT:
            _, w = self._range_after(e, k - 1, root, pref_t, pref_w)
            return e.weight + w
        t, _ = self._range_after(e, k, root, pref_t, pref_w)
        _, w = self._range_after(e, k - 1, root, pref_t, pref_w)
        return e.weight + w + t

    def _hop_search(self, e, t, metric, mode):
        self._check(e)
        if t < 0:
            raise ValueError("target must be non-negative")
        tour = self.tour_of(e)
        root = tour.root
        n = root.size
        pref_t, pref_w = _prefix_incl(e)

        def cost(k):
            return self._hop_cost(e, k, metric, root, pref_t, pref_w)

        if mode == "at_least":
            if t == 0:
                return e
            if cost(n) < t:
                raise ExhaustedError(f"target {t} exceeds the tour total {cost(n)}")
            lo, hi = 1, n  # smallest k with cost(k) >= t
            while lo < hi:
                mid = (lo + hi) // 2
                if cost(mid) >= t:
                    hi = mid
                else:
                    lo = mid + 1
            k = lo
        elif mode == "at_most":
            if cost(n - 1) <= t:
                k = n - 1
            else:
                lo, hi = 0, n - 1  # largest k with cost(k) <= t
                while lo < hi:
                    mid = (lo + hi + 1) // 2
                    if cost(mid) <= t:
                        lo = mid
                    else:
                        hi = mid - 1
                k = lo
        else:
            raise ValueError(f"unknown mode {mode!r}")
        i = _index_of(e)
        return _node_at(root, (i + k) % n)

    def edge_at_weight(self, e, t, mode="at_most"):
        """Farthest (at_most) or first (at_least) edge by cumulative corner
        weight walked from e; the search stays within one full cycle."""
        return self._hop_search(e, t, _METRIC_WEIGHT, mode)

    def edge_at_combined(self, e, t, mode="at_most"):
        """Same walk costed by corner weight plus one per true edge crossed
        (false edges cost only their corners)."""
        return self._hop_search(e, t, _METRIC_COMBINED, mode)

    def advance_by_combined(self, m, u: int):
        """First node x strictly after m (cyclically) whose combined sum over
        (m..x] reaches u, and the residual u minus the sum over (m..pred(x)].

        Requires 1 <= u <= the tour's combined total.
        """
        self._check(m)
        root = _root_of(m)
        total = root.agg_true + root.agg_weight
        if not 1 <= u <= total:
            raise ValueError(f"advance target {u} outside 1..{total}")
        pt, pw = _prefix_incl(m)
        target = pt + pw + u
        if target > total:
            target -= total
        x = _select_metric(root, target, _METRIC_COMBINED)
        xt, xw = _prefix_incl(x)
        delta = target - (xt + xw - x.true_flag - x.weight)
        return x, delta

    def extract_segment(self, a: MacroEdge, b: MacroEdge):
        """Detach the cyclic segment [a..b] from its tour.

        The host tour object keeps the remainder (possibly becoming empty)
        with its list seam re-closed; the returned segment root keeps its
        internal links, with a.pred and b.succ left dangling for the caller
        to splice.
        """
        self._check(a)
        self._check(b)
        tour = self.tour_of(a)
        root = tour.root
        n = root.size
        ia, ib = _index_of(a), _index_of(b)
        if ia <= ib:
            l, rest = _split_count(root, ia)
            seg, tail = _split_count(rest, ib - ia + 1)
            remainder = _join(l, tail)
        else:
            l, r = _split_count(root, ia)
            rot = _join(r, l)  # a first
            seg, remainder = _split_count(rot, (ib + n - ia) + 1)
        ap, bs = a.pred, b.succ
        if remainder is not None:
            ap.succ = bs
            bs.pred = ap
        a.pred = None
        b.succ = None
        tour.root = remainder
        if remainder is not None:
            remainder.tour = tour
        return seg

    def distance_and_weight(self, e, e2):
        """(true-step count over [e..e2] inclusive, corner weight strictly
        between e and e2) along the forward tour direction."""
        self._check(e)
        self._check(e2)
        ra, rb = _root_of(e), _root_of(e2)
        if ra is not rb:
            raise NotConnectedError("edges lie in different tours")
        if e is e2:
            return (e.true_flag, 0)
        ta, wa = _prefix_incl(e)
        tb, wb = _prefix_incl(e2)
        if _index_of(e) < _index_of(e2):
            trues = tb - ta + e.true_flag
            weights = wb - wa + e.weight - e2.weight
        else:
            trues = ra.agg_true - ta + e.true_flag + tb
            weights = ra.agg_weight - wa + e.weight + wb - e2.weight
        return (trues, weights)

    def side_summary(self, e):
        """((vertices, corner weight), (vertices, corner weight)) for the two
        subtrees separated by the undirected edge behind e; the side toured
        between e and reverse(e) comes first."""
        self._check(e)
        erev = e.reverse
        tour = self.tour_of(e)
        t_incl, w_strict = self.distance_and_weight(e, erev)
        strict = t_incl - e.true_flag - erev.true_flag
        far = (strict // 2 + 1, w_strict)
        total_strict = tour.total_true - e.true_flag - erev.true_flag
        near_w = tour.total_weight - w_strict - erev.weight
        near = ((total_strict - strict) // 2 + 1, near_w)
        return (far, near)

    # -- updates ---------------------------------------------------------------

    def set_corner_weight(self, corner, w: int):
        _check_weight(w)
        kind, ref = corner
        if kind == "solo":
            if not ref.alive or not ref.is_empty:
                raise InvalidHandleError("stale solo corner")
            ref.solo_weight = w
        elif kind == "after":
            self._check(ref)
            ref.weight = w
            _refresh_up(ref)
        else:
            raise InvalidHandleError(f"bad corner {corner!r}")

    def corner_weight(self, corner) -> int:
        kind, ref = corner
        if kind == "solo":
            return ref.solo_weight
        self._check(ref)
        return ref.weight

    def delete_edge(self, e: MacroEdge, w1: int, w2: int):
        """Remove e and reverse(e), splitting the tour in two.

        Returns (tour_a, tour_b): tour_a holds the arc strictly between e
        and reverse(e) (the side entered by crossing e) with its fused
        corner set to w1; tour_b holds the rest with fused corner w2.
        """
        self._check(e)
        _check_weight(w1)
        _check_weight(w2)
        erev = e.reverse
        old = self.tour_of(e)
        pa, pb = _index_of(e), _index_of(erev)
        a, b = (e, erev) if pa < pb else (erev, e)
        pa, pb = min(pa, pb), max(pa, pb)
        root = old.root
        l, rest = _split_count(root, pa)
        _, rest2 = _split_count(rest, 1)  # drop a
        mid, rest3 = _split_count(rest2, pb - pa - 1)
        _, tail = _split_count(rest3, 1)  # drop b
        outer = _join(tail, l)

        a_succ, b_pred = a.succ, b.pred
        b_succ, a_pred = b.succ, a.pred
        # close the two circles
        if mid is not None:
            b_pred.succ = a_succ
            a_succ.pred = b_pred
        if outer is not None:
            a_pred.succ = b_succ
            b_succ.pred = a_pred

        for x in (e, erev):
            x.deleted = True
            x.succ = x.pred = None
            x.left = x.right = x.parent = None
            x.tour = None

        mid_tour = MacroTour(mid) if mid is not None else MacroTour(None)
        outer_tour = MacroTour(outer) if outer is not None else MacroTour(None)
        self.tours.add(mid_tour)
        self.tours.add(outer_tour)
        self._retire(old)

        # fused corners: arc between e and erev, then the remainder
        if a is e:
            arc_tour, rest_tour = mid_tour, outer_tour
            arc_seam, rest_seam = b_pred, a_pred
        else:
            arc_tour, rest_tour = outer_tour, mid_tour
            arc_seam, rest_seam = a_pred, b_pred
        if arc_tour.is_empty:
            arc_tour.solo_weight = w1
        else:
            self.set_corner_weight(("after", arc_seam), w1)
        if rest_tour.is_empty:
            rest_tour.solo_weight = w2
        else:
            self.set_corner_weight(("after", rest_seam), w2)
        return arc_tour, rest_tour

    def _corner_site(self, corner):
        kind, ref = corner
        if kind == "solo":
            if not ref.alive or not ref.is_empty:
                raise InvalidHandleError("stale solo corner")
            return None, ref
        if kind == "after":
            self._check(ref)
            return ref, self.tour_of(ref)
        raise InvalidHandleError(f"bad corner {corner!r}")

    def insert_edge(self, c1, c2, w1=0, w2=0, w3=0, w4=0, true_flag=True, edges=None):
        """Insert an edge pair bisecting corner c1 in one tour and corner c2
        in another, merging them.

        The four weights land, in tour order, on: the corner before the new
        edge on c1's side (w1), after the new edge (w2), before its reverse
        on c2's side (w3), and after the reverse (w4).  A solo corner's side
        has no carrier for w1/w3; pass 0 there and fold the old solo weight
        into w2/w4 as needed.  Callers may supply a detached, reverse-paired
        ``edges=(m, mrev)``.  Returns (edge, reverse edge, merged tour).
        """
        for w in (w1, w2, w3, w4):
            _check_weight(w)
        a, tour1 = self._corner_site(c1)
        c, tour2 = self._corner_site(c2)
        if tour1 is tour2:
            raise CycleError("corners already share a tour")
        if a is None and w1 != 0:
            raise ValueError("solo corner cannot carry w1; fold it into w4")
        if c is None and w3 != 0:
            raise ValueError("solo corner cannot carry w3; fold it into w2")

        if edges is None:
            m = self.new_edge(true_flag, w2)
            mrev = self.new_edge(true_flag, w4)
            m.reverse = mrev
            mrev.reverse = m
        else:
            m, mrev = edges
            if m.reverse is not mrev or mrev.reverse is not m:
                raise ForestError("supplied edges are not a reverse pair")
            m.weight = w2
            mrev.weight = w4
            _refresh(m)
            _refresh(mrev)

        # linearize tour1 ending at a, tour2 starting at succ(c)
        if a is not None:
            r1 = tour1.root
            i = _index_of(a)
            l, r = _split_count(r1, i + 1)
            seq1 = _join(r, l)
            b = a.succ
        else:
            seq1 = None
            b = None
        if c is not None:
            r2 = tour2.root
            j = _index_of(c)
            l2, r2b = _split_count(r2, j + 1)
            seq2 = _join(r2b, l2)
            d = c.succ
        else:
            seq2 = None
            d = None

        root = _join(_join(_join(seq1, m), seq2), mrev)

        # circular list splice: a -> m -> d ... c -> mrev -> b
        m_succ = d if d is not None else mrev
        mrev_pred = c if c is not None else m
        m_pred = a if a is not None else mrev
        mrev_succ = b if b is not None else m
        m.succ = m_succ
        m.pred = m_pred
        mrev.succ = mrev_succ
        mrev.pred = mrev_pred
        if a is not None:
            a.succ = m
            b.pred = mrev
        if c is not None:
            c.succ = mrev
            d.pred = m

        if a is not None:
            a.weight = w1
            _refresh_up(a)
        if c is not None:
            c.weight = w3
            _refresh_up(c)

        merged = MacroTour(root)
        self.tours.add(merged)
        self._retire(tour1)
        self._retire(tour2)
        return m, mrev, merged

    def _remove_single(self, x: MacroEdge) -> MacroTour:
        """Drop one edge from its tour, fusing its corner into its
        predecessor's; returns the surviving (possibly empty) tour."""
        old = self.tour_of(x)
        if x.succ is x:
            tour = MacroTour(None, x.weight)
        else:
            p = x.pred
            w = p.weight + x.weight
            _check_weight(w)
            p.succ = x.succ
            x.succ.pred = p
            i = _index_of(x)
            l, rest = _split_count(old.root, i)
            _, tail = _split_count(rest, 1)
            root = _join(l, tail)
            p.weight = w
            _refresh_up(p)
            tour = MacroTour(root)
        x.deleted = True
        x.succ = x.pred = None
        x.left = x.right = x.parent = None
        x.tour = None
        self.tours.add(tour)
        self._retire(old)
        return tour

    def contract_edge(self, e: MacroEdge) -> MacroTour:
        """Remove e and reverse(e), fusing the flanking corner pairs."""
        self._check(e)
        erev = e.reverse
        self._remove_single(e)
        return self._remove_single(erev)

    def split_vertex(self, c1, c2, true_flag=False):
        """Insert an edge pair between two corners of one tour (a vertex
        split): the new edge follows c1's carrier, its reverse follows c2's.
        New corners get weight 0; existing corners keep theirs."""
        k1, a = c1
        k2, c = c2
        if k1 != "after" or k2 != "after":
            raise InvalidHandleError("vertex splits need two edge corners")
        self._check(a)
        self._check(c)
        if a is c:
            raise InvalidHandleError("the two corners must be distinct")
        tour = self.tour_of(a)
        if self.tour_of(c) is not tour:
            raise InvalidHandleError("corners lie at distinct vertices")
        m = self.new_edge(true_flag, 0)
        mrev = self.new_edge(true_flag, 0)
        m.reverse = mrev
        mrev.reverse = m
        root = self._insert_after_node(tour.root, a, m)
        root = self._insert_after_node(root, c, mrev)
        # list splice
        m.succ = a.succ
        a.succ.pred = m
        a.succ = m
        m.pred = a
        mrev.succ = c.succ
        c.succ.pred = mrev
        c.succ = mrev
        mrev.pred = c
        return m, mrev, self._finalize(tour, root)

    @staticmethod
    def _insert_after_node(root, x, node):
        i = _index_of(x)
        l, r = _split_count(root, i + 1)
        return _join(_join(l, node), r)

    # -- diagnostics -------------------------------------------------------------

    def audit(self, tour: MacroTour):
        """Structural invariants: list/tree agreement, aggregate soundness,
        heap order, reverse involution."""
        if tour.is_empty:
            assert tour.root is None
            return
        edges = tour.edges()
        assert len(edges) % 2 == 0
        for i, x in enumerate(edges):
            assert x.succ is edges[(i + 1) % len(edges)], "list/tree order mismatch"
            assert x.pred is edges[(i - 1) % len(edges)]
            assert x.reverse.reverse is x
            assert not x.deleted
            if x.parent is not None:
                assert x.parent.prio >= x.prio, "treap heap order broken"
                assert x.parent.left is x or x.parent.right is x
        def check(t):
            if t is None:
                return 0, 0, 0
            s1, t1, w1 = check(t.left)
            s2, t2, w2 = check(t.right)
            s = s1 + s2 + 1
            tt = t1 + t2 + t.true_flag
            ww = w1 + w2 + t.weight
            assert (t.size, t.agg_true, t.agg_weight) == (s, tt, ww), "bad aggregate"
            return s, tt, ww
        check(tour.root)
        assert _root_of(edges[0]) is tour.root
        assert tour.root.tour is tour
