"""Embedded-forest reference model: tours, corners, and mutations."""

import random

import pytest

from cett.errors import CycleError, ForestError, InvalidHandleError, NotConnectedError
from cett.oracle import EmbeddedForest, reverse_edge


def random_embedded_tree(rng, n):
    rot = [[] for _ in range(n)]
    for v in range(1, n):
        u = rng.randrange(v)
        rot[u].insert(rng.randrange(len(rot[u]) + 1), v)
        rot[v].append(u)
    return EmbeddedForest(rot)


class TestTourSuccessor:
    def test_leaf_reflection(self):
        f = EmbeddedForest([[1], [0]])
        assert f.tour_successor((0, 1)) == (1, 0)

    def test_rotation_step(self):
        # star with center 2, rotation (x=0, y=1, z=3)
        f = EmbeddedForest([[2], [2], [0, 1, 3], [2]])
        assert f.tour_successor((0, 2)) == (2, 1)
        assert f.tour_successor((1, 2)) == (2, 3)
        assert f.tour_successor((3, 2)) == (2, 0)

    def test_unknown_edge(self):
        f = EmbeddedForest([[1], [0], []])
        with pytest.raises(InvalidHandleError):
            f.tour_successor((0, 2))

    def test_full_walk_covers_every_edge_once(self):
        rng = random.Random(7)
        f = random_embedded_tree(rng, 50)
        tour = f.euler_tour((0, f.rotation(0)[0]))
        assert len(tour) == 98
        assert len(set(tour)) == 98
        assert set(tour) == set(f.directed_edges())

    def test_pred_inverts_succ(self):
        rng = random.Random(3)
        f = random_embedded_tree(rng, 40)
        for e in f.directed_edges():
            assert f.tour_predecessor(f.tour_successor(e)) == e
            assert f.tour_successor(f.tour_predecessor(e)) == e


class TestEulerTour:
    def test_single_edge(self):
        f = EmbeddedForest([[1], [0]])
        assert f.euler_tour((0, 1)) == [(0, 1), (1, 0)]

    def test_star_k13(self):
        f = EmbeddedForest([[1, 2, 3], [0], [0], [0]])
        assert len(f.euler_tour((0, 1))) == 6

    @pytest.mark.parametrize("n", [2, 5, 17, 64])
    def test_length_formula(self, n):
        f = random_embedded_tree(random.Random(n), n)
        assert len(f.euler_tour((0, f.rotation(0)[0]))) == 2 * (n - 1)

    def test_reversal_arcs_have_even_length(self):
        rng = random.Random(11)
        f = random_embedded_tree(rng, 30)
        tour = f.euler_tour((0, f.rotation(0)[0]))
        pos = {e: i for i, e in enumerate(tour)}
        for e in tour:
            i, j = pos[e], pos[reverse_edge(e)]
            assert (j - i - 1) % 2 == 0


class TestTourDistance:
    def test_successor_distance_zero(self):
        f = EmbeddedForest([[1], [0]])
        e = (0, 1)
        assert f.tour_distance(e, f.tour_successor(e)) == 0

    def test_self_distance_zero(self):
        f = EmbeddedForest([[1], [0]])
        assert f.tour_distance((0, 1), (0, 1)) == 0

    def test_matches_positional_subtraction(self):
        rng = random.Random(5)
        f = random_embedded_tree(rng, 25)
        tour = f.euler_tour((0, f.rotation(0)[0]))
        L = len(tour)
        pos = {e: i for i, e in enumerate(tour)}
        for _ in range(200):
            a, b = rng.choice(tour), rng.choice(tour)
            want = (pos[b] - pos[a] - 1) % L if a != b else 0
            assert f.tour_distance(a, b) == want

    def test_not_connected(self):
        f = EmbeddedForest([[1], [0], [3], [2]])
        with pytest.raises(NotConnectedError):
            f.tour_distance((0, 1), (2, 3))

    def test_jump(self):
        rng = random.Random(6)
        f = random_embedded_tree(rng, 20)
        tour = f.euler_tour((0, f.rotation(0)[0]))
        L = len(tour)
        for t in [0, 1, 5, L - 1, L, L + 3, 3 * L + 2]:
            assert f.tour_jump(tour[0], t) == tour[t % L]


class TestSideSizes:
    def test_leaf_edge(self):
        f = random_embedded_tree(random.Random(2), 12)
        leaf = next(v for v in range(12) if f.degree(v) == 1)
        u = f.rotation(leaf)[0]
        assert f.side_sizes((u, leaf)) == (1, 11)
        assert f.side_sizes((leaf, u)) == (11, 1)


class TestMutations:
    def test_cut_then_link_restores_tour(self):
        rng = random.Random(9)
        f = random_embedded_tree(rng, 15)
        before = f.euler_tour((0, f.rotation(0)[0]))
        # cut an edge, then re-link at the same corners
        u, v = before[3]
        prev_u = f.rotation(u)[(f.rotation(u).index(v) - 1) % f.degree(u)]
        prev_v = f.rotation(v)[(f.rotation(v).index(u) - 1) % f.degree(v)]
        f.cut((u, v))
        c1 = ("after", prev_u, u) if f.degree(u) else ("at", u)
        c2 = ("after", prev_v, v) if f.degree(v) else ("at", v)
        assert not f.same_tree(u, v)
        f.link(c1, c2)
        assert f.euler_tour(before[0]) == before

    def test_link_same_tree_rejected(self):
        f = EmbeddedForest([[1], [0]])
        with pytest.raises(CycleError):
            f.link(("after", 0, 1), ("after", 1, 0))

    def test_add_remove_vertex(self):
        f = EmbeddedForest([[1], [0]])
        v = f.add_vertex()
        assert f.vertex_count == 3
        assert f.degree(v) == 0
        f.remove_vertex(v)
        assert f.vertex_count == 2
        with pytest.raises(InvalidHandleError):
            f.tour_successor((v, 0))

    def test_link_isolated(self):
        f = EmbeddedForest([[], []])
        e = f.link(("at", 0), ("at", 1))
        assert e == (0, 1)
        assert f.euler_tour((0, 1)) == [(0, 1), (1, 0)]


class TestCornerWeights:
    def fixture_cluster(self):
        """Seven-vertex cluster with four outward stubs; its cyclic weights
        are (3, 2, 2, 5)."""
        # cluster vertices 0..6: 0-1, 1-2, 2-3, 2-4, 1-5, 0-6 (6 = last child of 0)
        # stubs: at 2 -> 7, at 4 -> 8, at 1 -> 9, at 1 -> 10
        rot = [
            [1, 6],          # 0 (root): children 1 then 6
            [0, 2, 9, 5, 10],  # 1
            [1, 7, 3, 4],    # 2
            [2],             # 3
            [2, 8],          # 4
            [1],             # 5
            [0],             # 6
            [2], [4], [1], [1],
        ]
        f = EmbeddedForest(rot)
        part = {v: "C" for v in range(7)}
        part.update({7: "Z1", 8: "Z2", 9: "Z3", 10: "Z4"})
        return f, part

    def test_paper_weights(self):
        f, part = self.fixture_cluster()
        w = f.corner_weights_around(part, "C")
        assert len(w) == 4
        assert sum(w) == 12
        # cyclic sequence (3, 2, 2, 5) up to rotation
        dbl = w + w
        assert any(dbl[i : i + 4] == [3, 2, 2, 5] for i in range(4))

    def test_single_port_run(self):
        # k internal steps for a cluster with one stub: 2*(n_C-1)
        rot = [[1], [0, 2, 3], [1], [1]]
        f = EmbeddedForest(rot)
        part = {0: "C", 1: "C", 2: "C", 3: "Z"}
        assert f.corner_weights_around(part, "C") == [4]

    def test_unassigned_vertex_rejected(self):
        f = EmbeddedForest([[1], [0, 2], [1]])
        with pytest.raises(ForestError):
            f.corner_weights_around({0: "C", 1: "C"}, "C")

    def test_random_partition_recount(self):
        rng = random.Random(21)
        f = random_embedded_tree(rng, 40)
        part = {v: rng.randrange(4) for v in range(40)}
        tour = f.euler_tour((0, f.rotation(0)[0]))
        for c in range(4):
            got = f.corner_weights_around(part, c)
            # recount with an independent walk from the same leaving edge
            runs = []
            counting = False
            run = 0
            start = None
            for v in sorted(x for x in range(40) if part[x] == c):
                for w in f.rotation(v):
                    if part[w] != c:
                        start = (v, w)
                        break
                if start:
                    break
            if start is None:
                continue
            i = tour.index(start)
            order = tour[i + 1 :] + tour[: i + 1]
            for e in order:
                tin, hin = part[e[0]] == c, part[e[1]] == c
                if tin and hin:
                    run += 1 if counting else 0
                elif hin:
                    counting, run = True, 0
                elif tin:
                    if counting:
                        runs.append(run)
                    counting = False
            assert got == runs


class TestTextFormat:
    def test_roundtrip(self):
        f = random_embedded_tree(random.Random(4), 9)
        text = f.to_text()
        g = EmbeddedForest.from_text(text)
        assert g.to_text() == text

    def test_isolated_blank_rotation(self):
        g = EmbeddedForest.from_text("forest 2\n0:\n1:\n")
        assert g.vertex_count == 2
        assert g.degree(0) == 0

    def test_parse_errors_carry_line(self):
        from cett.errors import TraceSyntaxError

        with pytest.raises(TraceSyntaxError):
            EmbeddedForest.from_text("forest x\n")
        with pytest.raises(TraceSyntaxError):
            EmbeddedForest.from_text("forest 1\n5: 0\n")
