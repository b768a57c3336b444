"""Weighted-corner tour structure versus the explicit oracle."""

import random

import pytest

from cett.errors import (
    CycleError,
    ExhaustedError,
    InvalidHandleError,
    NotConnectedError,
    WeightRangeError,
)
from cett.macro_tree import MacroForest
from cett.oracle import EmbeddedForest, reverse_edge

# corner weights read off the worked macro-tour distance example
SEG_WEIGHTS = [2, 1, 3, 2, 2, 1, 2, 2, 4, 3, 1, 2, 0, 2, 2, 3, 1, 2, 1, 2, 2, 5, 1, 2, 3]


def random_embedded_tree(rng, n):
    rot = [[] for _ in range(n)]
    for v in range(1, n):
        u = rng.randrange(v)
        rot[u].insert(rng.randrange(len(rot[u]) + 1), v)
        rot[v].append(u)
    return EmbeddedForest(rot)


def tour_from_oracle(mf, f, start, weights=None):
    """Mirror an oracle tree's tour into a macro tour; tags are the oracle's
    directed edges."""
    edges = f.euler_tour(start)
    weights = weights or {}
    crossings = [(e, 1, weights.get(e, 0)) for e in edges]
    reverse_of = {e: reverse_edge(e) for e in edges}
    return mf.build_tour(crossings, reverse_of)


def fresh(seed=0):
    return MacroForest(seed=seed)


class TestNeighbors:
    def test_single_edge_tour(self):
        mf = fresh()
        f = EmbeddedForest([[1], [0]])
        tour, by = tour_from_oracle(mf, f, (0, 1))
        e = by[(0, 1)]
        assert mf.tour_neighbors(e) == (e.reverse, e.reverse)

    @pytest.mark.parametrize("seed", range(4))
    def test_against_oracle(self, seed):
        rng = random.Random(seed)
        f = random_embedded_tree(rng, 30)
        mf = fresh(seed)
        tour, by = tour_from_oracle(mf, f, (0, f.rotation(0)[0]))
        mf.audit(tour)
        for e in f.directed_edges():
            node = by[e]
            pred, succ = mf.tour_neighbors(node)
            assert succ is by[f.tour_successor(e)]
            assert pred is by[f.tour_predecessor(e)]
            rpred, rsucc = mf.rotation_neighbors(node)
            assert rsucc is by[f.rotation_successor(e)]
            assert rpred is by[f.rotation_predecessor(e)]

    def test_rotation_cycle_length_is_degree(self):
        rng = random.Random(9)
        f = random_embedded_tree(rng, 25)
        mf = fresh()
        tour, by = tour_from_oracle(mf, f, (0, f.rotation(0)[0]))
        for u in range(25):
            e = (u, f.rotation(u)[0])
            node = by[e]
            count = 1
            cur = mf.rotation_neighbors(node)[1]
            while cur is not node:
                cur = mf.rotation_neighbors(cur)[1]
                count += 1
            assert count == f.degree(u)


class TestDistanceJump:
    @pytest.mark.parametrize("seed", range(4))
    def test_edge_at_distance_matches_indexing(self, seed):
        rng = random.Random(seed)
        f = random_embedded_tree(rng, 20)
        mf = fresh(seed)
        tour, by = tour_from_oracle(mf, f, (0, f.rotation(0)[0]))
        edges = f.euler_tour((0, f.rotation(0)[0]))
        L = len(edges)
        pos = {e: i for i, e in enumerate(edges)}
        for _ in range(100):
            e = rng.choice(edges)
            t = rng.randrange(0, 3 * L)
            want = edges[(pos[e] + t) % L]
            assert mf.edge_at_distance(by[e], t) is by[want]

    def test_trivials(self):
        mf = fresh()
        f = EmbeddedForest([[1], [0, 2], [1]])
        tour, by = tour_from_oracle(mf, f, (0, 1))
        e = by[(0, 1)]
        assert mf.edge_at_distance(e, 0) is e
        assert mf.edge_at_distance(e, 4) is e  # 2*(3-1) = full cycle


def brute_costs(order, metric):
    """cost(k) for k = 0..n of hop-walking a tour order starting at order[0]."""
    n = len(order)
    costs = [0]
    for k in range(1, n + 1):
        w = sum(x.weight for x in order[:k])
        if metric == "weight":
            costs.append(w)
        else:
            t = sum(order[i % n].true_flag for i in range(1, k + 1))
            costs.append(w + t)
    return costs


class TestWeightSearch:
    def build_weighted(self, seed, n=16):
        rng = random.Random(seed)
        f = random_embedded_tree(rng, n)
        start = (0, f.rotation(0)[0])
        edges = f.euler_tour(start)
        weights = {e: rng.randrange(0, 5) for e in edges}
        mf = fresh(seed)
        tour, by = tour_from_oracle(mf, f, start, weights)
        return mf, tour, by, edges

    @pytest.mark.parametrize("seed", range(5))
    def test_against_bruteforce(self, seed):
        mf, tour, by, edges = self.build_weighted(seed)
        rng = random.Random(seed + 100)
        n = len(edges)
        for _ in range(60):
            e = rng.choice(edges)
            i = edges.index(e)
            order = [by[edges[(i + k) % n]] for k in range(n)]
            for metric in ("weight", "combined"):
                costs = brute_costs(order, metric)
                total = costs[n]
                t = rng.randrange(0, total + 2)
                fn = mf.edge_at_weight if metric == "weight" else mf.edge_at_combined
                # at_most: farthest k in [0, n-1] with cost <= t
                want_k = max(k for k in range(n) if costs[k] <= t)
                assert fn(by[e], t, "at_most") is order[want_k % n]
                if t <= total:
                    want_k = min(k for k in range(n + 1) if costs[k] >= t)
                    assert fn(by[e], t, "at_least") is order[want_k % n]
                else:
                    with pytest.raises(ExhaustedError):
                        fn(by[e], t, "at_least")

    def test_zero_weight_tour_wraps(self):
        mf = fresh()
        f = EmbeddedForest([[1], [0, 2], [1]])
        tour, by = tour_from_oracle(mf, f, (0, 1))
        e = by[(0, 1)]
        assert mf.edge_at_weight(e, 7, "at_most") is e.pred

    def test_at_most_zero_stays_put_when_first_corner_is_heavy(self):
        mf = fresh()
        f = EmbeddedForest([[1], [0]])
        tour, by = tour_from_oracle(mf, f, (0, 1), {(0, 1): 2, (1, 0): 1})
        e = by[(0, 1)]
        assert mf.edge_at_weight(e, 0, "at_most") is e
        assert mf.edge_at_weight(e, 0, "at_least") is e

    def test_all_zero_weights_combined_reduces_to_distance(self):
        mf = fresh()
        rng = random.Random(3)
        f = random_embedded_tree(rng, 10)
        tour, by = tour_from_oracle(mf, f, (0, f.rotation(0)[0]))
        e = by[(0, f.rotation(0)[0])]
        for t in range(1, 18):
            assert mf.edge_at_combined(e, t, "at_least") is mf.edge_at_distance(e, t)


class TestDistanceAndWeight:
    def test_adjacent(self):
        mf = fresh()
        f = EmbeddedForest([[1], [0]])
        tour, by = tour_from_oracle(mf, f, (0, 1), {(0, 1): 3})
        e = by[(0, 1)]
        assert mf.distance_and_weight(e, e.succ) == (2, 3)

    def test_worked_macro_example(self):
        # a path tour of 26 crossings; the 25 corners strictly between the
        # first and last crossing carry SEG_WEIGHTS and sum to 51
        mf = fresh()
        f = EmbeddedForest.from_edges(14, [(i, i + 1) for i in range(13)])
        edges = f.euler_tour((0, 1))
        assert len(edges) == 26
        weights = {edges[i]: SEG_WEIGHTS[i] for i in range(25)}
        weights[edges[25]] = 7
        tour, by = tour_from_oracle(mf, f, (0, 1), weights)
        m1, m2 = by[edges[0]], by[edges[25]]
        assert sum(SEG_WEIGHTS) == 51
        assert mf.distance_and_weight(m1, m2) == (26, 51)

    @pytest.mark.parametrize("seed", range(4))
    def test_against_bruteforce(self, seed):
        rng = random.Random(seed)
        f = random_embedded_tree(rng, 15)
        start = (0, f.rotation(0)[0])
        edges = f.euler_tour(start)
        weights = {e: rng.randrange(0, 6) for e in edges}
        mf = fresh(seed)
        tour, by = tour_from_oracle(mf, f, start, weights)
        n = len(edges)
        for _ in range(80):
            i, j = rng.randrange(n), rng.randrange(n)
            a, b = edges[i], edges[j]
            if i == j:
                assert mf.distance_and_weight(by[a], by[b]) == (1, 0)
                continue
            seg = [edges[(i + k) % n] for k in range(((j - i) % n) + 1)]
            trues = len(seg)
            wsum = sum(weights[e] for e in seg[:-1])
            assert mf.distance_and_weight(by[a], by[b]) == (trues, wsum)

    def test_not_connected(self):
        mf = fresh()
        f1 = EmbeddedForest([[1], [0]])
        f2 = EmbeddedForest([[1], [0]])
        _, by1 = tour_from_oracle(mf, f1, (0, 1))
        _, by2 = tour_from_oracle(mf, f2, (0, 1))
        with pytest.raises(NotConnectedError):
            mf.distance_and_weight(by1[(0, 1)], by2[(0, 1)])


class TestSideSummary:
    def test_six_between_means_four_vertices(self):
        # red edge (0,1): six crossings strictly between it and its reverse
        mf = fresh()
        f = EmbeddedForest.from_edges(5, [(0, 1), (1, 2), (1, 3), (3, 4)])
        tour, by = tour_from_oracle(mf, f, (0, 1))
        (far, near) = mf.side_summary(by[(0, 1)])
        assert far[0] == 4
        assert near[0] == 1

    def test_leaf_edge(self):
        mf = fresh()
        f = EmbeddedForest.from_edges(4, [(0, 1), (1, 2), (2, 3)])
        tour, by = tour_from_oracle(mf, f, (2, 3))
        far, near = mf.side_summary(by[(2, 3)])
        assert far == (1, 0)
        assert near[0] == 3

    @pytest.mark.parametrize("seed", range(3))
    def test_against_oracle(self, seed):
        rng = random.Random(seed)
        f = random_embedded_tree(rng, 18)
        mf = fresh(seed)
        tour, by = tour_from_oracle(mf, f, (0, f.rotation(0)[0]))
        for e in f.directed_edges():
            far, near = mf.side_summary(by[e])
            head_side, tail_side = f.side_sizes(e)
            assert far[0] == head_side
            assert near[0] == tail_side


class TestUpdates:
    def test_set_corner_weight_roundtrip(self):
        mf = fresh()
        f = EmbeddedForest([[1], [0]])
        tour, by = tour_from_oracle(mf, f, (0, 1))
        e = by[(0, 1)]
        mf.set_corner_weight(("after", e), 9)
        assert mf.corner_weight(("after", e)) == 9
        assert tour.total_weight == 9
        mf.audit(tour)

    def test_weight_overflow_checked(self):
        mf = fresh()
        f = EmbeddedForest([[1], [0]])
        tour, by = tour_from_oracle(mf, f, (0, 1))
        with pytest.raises(WeightRangeError):
            mf.set_corner_weight(("after", by[(0, 1)]), 1 << 64)

    def test_delete_assigns_new_corner_weights(self):
        # deleting the middle edge fuses corners to the passed 5 and 4
        mf = fresh()
        f = EmbeddedForest.from_edges(4, [(0, 1), (1, 2), (2, 3)])
        tour, by = tour_from_oracle(
            mf, f, (0, 1), {e: 1 for e in f.directed_edges()}
        )
        green = by[(1, 2)]
        arc, rest = mf.delete_edge(green, 5, 4)
        mf.audit(arc)
        mf.audit(rest)
        arc_edges = arc.edges()
        rest_edges = rest.edges()
        assert {x.edge_id for x in arc_edges} == {by[(2, 3)].edge_id, by[(3, 2)].edge_id}
        assert {x.edge_id for x in rest_edges} == {by[(0, 1)].edge_id, by[(1, 0)].edge_id}
        # fused corners carry exactly the requested weights
        assert by[(3, 2)].weight == 5
        assert by[(0, 1)].weight == 4

    def test_delete_only_edge_gives_two_empty_tours(self):
        mf = fresh()
        f = EmbeddedForest([[1], [0]])
        tour, by = tour_from_oracle(mf, f, (0, 1))
        a, b = mf.delete_edge(by[(0, 1)], 0, 0)
        assert a.is_empty and b.is_empty

    def test_join_two_isolated(self):
        mf = fresh()
        t1 = mf.empty_tour()
        t2 = mf.empty_tour()
        m, mrev, merged = mf.insert_edge(("solo", t1), ("solo", t2), 0, 0, 0, 0)
        assert merged.edge_count == 2
        assert m.succ is mrev and mrev.succ is m
        mf.audit(merged)

    @pytest.mark.parametrize("seed", range(5))
    def test_delete_insert_roundtrip(self, seed):
        rng = random.Random(seed)
        f = random_embedded_tree(rng, 12)
        start = (0, f.rotation(0)[0])
        edges = f.euler_tour(start)
        weights = {e: rng.randrange(0, 9) for e in edges}
        mf = fresh(seed)
        tour, by = tour_from_oracle(mf, f, start, weights)
        order_before = [(x.edge_id, x.weight) for x in tour.edges()]
        candidates = [
            x for x in by.values() if x.pred is not x.reverse and x.reverse.pred is not x
        ]
        e = candidates[rng.randrange(len(candidates))]
        erev = e.reverse
        a, c = e.pred, erev.pred
        wa, we, wc, wrev = a.weight, e.weight, c.weight, erev.weight
        arc, rest = mf.delete_edge(e, 1, 2)
        m, mrev, merged = mf.insert_edge(("after", a), ("after", c), wa, we, wc, wrev)
        mf.audit(merged)
        ids = {x.edge_id for x in merged.edges()}
        # same cyclic order and weights, modulo the replaced edge pair
        rebuilt = []
        cur = a
        for _ in range(merged.edge_count):
            eid = cur.edge_id
            if eid == m.edge_id:
                eid = e.edge_id
            if eid == mrev.edge_id:
                eid = erev.edge_id
            rebuilt.append((eid, cur.weight))
            cur = cur.succ
        n = len(order_before)
        i = order_before.index(rebuilt[0])
        assert rebuilt == order_before[i:] + order_before[:i]

    def test_leaf_edge_roundtrip_via_solo_corner(self):
        # cutting off a leaf leaves an empty tour; restore through its solo corner
        mf = fresh()
        f = EmbeddedForest.from_edges(3, [(0, 1), (1, 2)])
        weights = {(0, 1): 1, (1, 2): 2, (2, 1): 3, (1, 0): 4}
        tour, by = tour_from_oracle(mf, f, (0, 1), weights)
        e = by[(1, 2)]
        a = e.pred  # (0, 1)
        arc, rest = mf.delete_edge(e, 0, 9)
        assert arc.is_empty
        assert rest.edge_count == 2
        m, mrev, merged = mf.insert_edge(("after", a), ("solo", arc), 1, 2, 0, 3)
        mf.audit(merged)
        walked = []
        cur = by[(0, 1)]
        for _ in range(4):
            walked.append(cur.weight)
            cur = cur.succ
        assert walked == [1, 2, 3, 4]

    def test_insert_same_tour_rejected(self):
        mf = fresh()
        f = EmbeddedForest.from_edges(3, [(0, 1), (1, 2)])
        tour, by = tour_from_oracle(mf, f, (0, 1))
        with pytest.raises(CycleError):
            mf.insert_edge(("after", by[(0, 1)]), ("after", by[(1, 2)]))

    def test_contract_leaf_edge_fuses_weights(self):
        mf = fresh()
        f = EmbeddedForest.from_edges(3, [(0, 1), (1, 2)])
        weights = {(0, 1): 1, (1, 2): 2, (2, 1): 3, (1, 0): 4}
        tour, by = tour_from_oracle(mf, f, (0, 1), weights)
        e = by[(1, 2)]
        before = tour.total_weight
        out = mf.contract_edge(e)
        mf.audit(out)
        assert out.edge_count == 2
        assert out.total_weight == before
        # both removed corners pile onto the corner before the removal site
        assert by[(0, 1)].weight == 1 + 2 + 3

    def test_contract_last_edge_leaves_solo_corner(self):
        mf = fresh()
        f = EmbeddedForest([[1], [0]])
        tour, by = tour_from_oracle(mf, f, (0, 1), {(0, 1): 2, (1, 0): 3})
        out = mf.contract_edge(by[(0, 1)])
        assert out.is_empty
        assert out.solo_weight == 5

    def test_split_then_contract_identity(self):
        rng = random.Random(4)
        f = random_embedded_tree(rng, 10)
        start = (0, f.rotation(0)[0])
        mf = fresh(4)
        weights = {e: rng.randrange(0, 4) for e in f.euler_tour(start)}
        tour, by = tour_from_oracle(mf, f, start, weights)
        snapshot = [(x.edge_id, x.weight) for x in tour.edges()]
        edges = f.euler_tour(start)
        a, c = by[edges[2]], by[edges[6]]
        m, mrev, t2 = mf.split_vertex(("after", a), ("after", c), true_flag=False)
        mf.audit(t2)
        t3 = mf.contract_edge(m)
        mf.audit(t3)
        assert [(x.edge_id, x.weight) for x in t3.edges()] == snapshot

    def test_false_split_preserves_distance_metric(self):
        rng = random.Random(8)
        f = random_embedded_tree(rng, 12)
        start = (0, f.rotation(0)[0])
        mf = fresh(8)
        weights = {e: rng.randrange(0, 4) for e in f.euler_tour(start)}
        tour, by = tour_from_oracle(mf, f, start, weights)
        edges = f.euler_tour(start)
        x, y = by[edges[1]], by[edges[5]]
        before = mf.distance_and_weight(x, y)
        mf.split_vertex(("after", by[edges[8]]), ("after", by[edges[3]]), true_flag=False)
        assert mf.distance_and_weight(x, y) == before

    def test_stale_handles_detected(self):
        mf = fresh()
        f = EmbeddedForest.from_edges(3, [(0, 1), (1, 2)])
        tour, by = tour_from_oracle(mf, f, (0, 1))
        e = by[(1, 2)]
        mf.delete_edge(e, 0, 0)
        with pytest.raises(InvalidHandleError):
            mf.tour_neighbors(e)
        with pytest.raises(InvalidHandleError):
            mf.edge_at_distance(e, 1)


class TestProjection:
    def test_false_edges_vanish_from_true_walk(self):
        # splitting twice, the true_succ chain must walk the original tour
        rng = random.Random(13)
        f = random_embedded_tree(rng, 14)
        start = (0, f.rotation(0)[0])
        mf = fresh(13)
        tour, by = tour_from_oracle(mf, f, start)
        original = [x.edge_id for x in tour.edges()]
        edges = f.euler_tour(start)
        mf.split_vertex(("after", by[edges[0]]), ("after", by[edges[4]]), True and False)
        t2 = mf.tour_of(by[edges[0]])
        mf.split_vertex(("after", by[edges[7]]), ("after", by[edges[2]]), False)
        start_node = by[edges[0]]
        walked = [start_node.edge_id]
        cur = start_node.true_succ
        while cur is not start_node:
            walked.append(cur.edge_id)
            cur = cur.true_succ
        i = original.index(walked[0])
        assert walked == original[i:] + original[:i]


class TestAggregateSoundness:
    def test_random_surgery_soup(self):
        rng = random.Random(99)
        mf = fresh(99)
        f = random_embedded_tree(rng, 16)
        start = (0, f.rotation(0)[0])
        weights = {e: rng.randrange(0, 5) for e in f.euler_tour(start)}
        tour, by = tour_from_oracle(mf, f, start, weights)
        live = list(by.values())
        for step in range(300):
            op = rng.randrange(3)
            targets = [x for x in live if not x.deleted]
            if not targets:
                break
            x = rng.choice(targets)
            if op == 0:
                mf.set_corner_weight(("after", x), rng.randrange(0, 9))
            elif op == 1:
                a, c = rng.sample(targets, 2) if len(targets) >= 2 else (None, None)
                if a is not None and _same_tour(mf, a, c):
                    m, mrev, t = mf.split_vertex(("after", a), ("after", c), False)
                    live += [m, mrev]
            else:
                if not x.deleted and x.reverse is not x:
                    t = mf.contract_edge(x) if mf.tour_of(x).edge_count > 2 else None
            for t in list(mf.tours):
                if t.alive and not t.is_empty:
                    mf.audit(t)


def _same_tour(mf, a, b):
    try:
        return mf.tour_of(a) is mf.tour_of(b)
    except InvalidHandleError:
        return False
