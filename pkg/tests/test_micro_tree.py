"""Cluster encoding: bits, steps, ports, and local navigation."""

import random

import pytest

from cett.errors import ClusterSizeError
from cett.micro_tree import build_cluster, decode_cluster, rebuild_cluster
from cett.oracle import EmbeddedForest

PORTS_FIXTURE = "0010001001001000"


def paper_fragment():
    """Seven vertices, four outward stubs, rooted where the walk yields the
    fixture bitvector.  Stub tags s1..s4 sit at their rotation positions."""
    return {
        0: [("v", 1), ("v", 6)],
        1: [("v", 0), ("v", 2), ("p", "s3"), ("v", 5), ("p", "s4")],
        2: [("v", 1), ("p", "s1"), ("v", 3), ("v", 4)],
        3: [("v", 2)],
        4: [("v", 2), ("p", "s2")],
        5: [("v", 1)],
        6: [("v", 0)],
    }


def random_fragment(rng, n, n_ports):
    """Random tree fragment with stubs spliced into random rotation slots."""
    rot = {0: []}
    for v in range(1, n):
        u = rng.randrange(v)
        rot[u].insert(rng.randrange(len(rot[u]) + 1), ("v", v))
        rot[v] = [("v", u)]
    for k in range(n_ports):
        v = rng.randrange(n)
        rot[v].insert(rng.randrange(len(rot[v]) + 1), ("p", f"t{k}"))
    return rot


class TestBuild:
    def test_paper_bitvector(self):
        res = build_cluster(paper_fragment(), root=0, start_index=0)
        c = res.cluster
        assert c.ports.to01() == PORTS_FIXTURE
        assert c.bp.check_balanced()
        assert c.n == 7
        assert c.zeros == 12
        assert res.port_keys == ["s1", "s2", "s3", "s4"]

    def test_paper_cyclic_weights(self):
        res = build_cluster(paper_fragment(), root=0, start_index=0)
        assert res.cluster.cyclic_runs() == [3, 2, 2, 5]

    def test_single_edge_no_ports(self):
        res = build_cluster({0: [("v", 1)], 1: [("v", 0)]}, root=0)
        c = res.cluster
        assert c.ports is None
        assert c.zeros == 2
        assert c.bp.to_parens() == "(())"

    def test_disconnected_rejected(self):
        frag = {0: [("v", 1)], 1: [("v", 0)], 2: []}
        with pytest.raises(ClusterSizeError):
            build_cluster(frag, root=0)

    def test_oversize_rejected(self):
        frag = {0: [("v", 1)], 1: [("v", 0), ("v", 2)], 2: [("v", 1)]}
        with pytest.raises(ClusterSizeError):
            rebuild_cluster(frag, root=0, max_size=2)

    @pytest.mark.parametrize("seed", range(6))
    def test_run_lengths_match_oracle_weights(self, seed):
        rng = random.Random(seed)
        n = rng.randrange(2, 30)
        frag = random_fragment(rng, n, rng.randrange(1, 6))
        res = build_cluster(frag, root=0)
        # expand stubs into leaf vertices and ask the oracle for the weights
        rot = []
        extra = []
        for v in range(n):
            row = []
            for kind, x in frag[v]:
                if kind == "v":
                    row.append(x)
                else:
                    w = n + len(extra)
                    extra.append((w, v))
                    row.append(w)
            rot.append(row)
        for w, v in extra:
            rot.append([v])
        f = EmbeddedForest(rot)
        part = {v: "C" for v in range(n)}
        part.update({w: f"Z{w}" for w, _ in extra})
        want = f.corner_weights_around(part, "C")
        got = res.cluster.cyclic_runs()
        if got and want:
            dbl = got + got
            assert any(
                dbl[i : i + len(want)] == want for i in range(len(got))
            ), (got, want)
            assert sum(got) == sum(want) == 2 * (n - 1)


class TestDecode:
    @pytest.mark.parametrize("seed", range(6))
    def test_rebuild_idempotent(self, seed):
        rng = random.Random(seed + 50)
        frag = random_fragment(rng, rng.randrange(2, 25), rng.randrange(0, 5))
        res = build_cluster(frag, root=0)
        decoded, edge_of_step = decode_cluster(res.cluster)
        # port ranks become the canonical keys on re-encode
        res2 = build_cluster(decoded, root=0, start_index=0)
        assert res2.cluster.bp.to_parens() == res.cluster.bp.to_parens()
        if res.cluster.ports is not None:
            assert res2.cluster.ports.to01() == res.cluster.ports.to01()
            assert res2.port_keys == list(range(1, len(res.port_keys) + 1))

    def test_edge_of_step_matches_builder(self):
        res = build_cluster(paper_fragment(), root=0)
        decoded, edge_of_step = decode_cluster(res.cluster)
        # builder order: preorder ids follow the walk, so edges agree
        relabel = {lbl: i for i, lbl in enumerate(res.order)}
        for r in range(1, res.cluster.zeros + 1):
            u, v = res.edge_of_step[r]
            assert edge_of_step[r] == (relabel[u], relabel[v])


class TestNavigation:
    def fixture(self):
        res = build_cluster(paper_fragment(), root=0)
        return res, res.cluster

    def test_steps_map_to_bp_positions(self):
        res, c = self.fixture()
        for r in range(1, c.zeros + 1):
            rev = c.reverse_step(r)
            assert c.reverse_step(rev) == r
            assert res.edge_of_step[rev] == tuple(reversed(res.edge_of_step[r]))

    def test_local_step_walks_cyclically(self):
        res, c = self.fixture()
        # violet edge: two forward steps before leaving through port 2
        violet = 3
        assert c.local_step(violet, "fwd") == ("step", 4)
        assert c.local_step(4, "fwd") == ("step", 5)
        assert c.local_step(5, "fwd") == ("port", 2)

    def test_steps_to_port_paper_values(self):
        res, c = self.fixture()
        # from the violet edge two intra steps reach the second port
        assert c.steps_to_port(3, "fwd") == (2, 2)
        # entering back before the last step: port 4, two steps earlier
        assert c.steps_to_port(12, "back") == (4, 2)

    def test_portless_cluster_wraps(self):
        res = build_cluster({0: [("v", 1)], 1: [("v", 0)]}, root=0)
        c = res.cluster
        assert c.steps_to_port(1, "fwd") is None
        assert c.local_step(2, "fwd") == ("step", 1)
        assert c.local_step(1, "back") == ("step", 2)

    def test_steps_between(self):
        res, c = self.fixture()
        assert c.steps_between(3, 5) == 1
        assert c.steps_between(3, 6) is None  # port 2 interrupts
        assert c.steps_between(10, 12) == 1
        # the wrap seam sits inside the trailing 0-run: no port between
        assert c.steps_between(12, 1) == 0
        assert c.steps_between(10, 1) == 2
        assert c.steps_between(1, 3) is None  # port 1 interrupts

    def test_enumerate_incident_matches_rotation(self):
        res, c = self.fixture()
        # vertex 1 has rotation (0, 2, s3, 5, s4); start from its edge to 2
        r = res.step_of_edge[(1, 2)]
        rot = c.enumerate_incident(r)
        kinds = [k for k, _ in rot]
        assert kinds == ["step", "port", "step", "port", "step"]
        out_edges = [res.edge_of_step[x] for k, x in rot if k == "step"]
        assert out_edges == [(1, 2), (1, 5), (1, 0)]
        ports = [x for k, x in rot if k == "port"]
        assert ports == [3, 4]

    def test_rotation_length_equals_degree(self):
        rng = random.Random(12)
        frag = random_fragment(rng, 18, 6)
        res = build_cluster(frag, root=0)
        c = res.cluster
        for (u, v), r in res.step_of_edge.items():
            assert len(c.enumerate_incident(r)) == len(frag[u])

    def test_run_after_port(self):
        res, c = self.fixture()
        assert [c.run_after_port(k) for k in (1, 2, 3, 4)] == [3, 2, 2, 5]
