"""Compact dynamic forest: clusters, macro tours, and the small-tree store.

The public surface works on value handles:

    ('i', cid, rank, epoch)            intra-cluster tour step
    ('m', edge_id)                     inter-cluster edge
    ('s', block, offset, rank, epoch)  step inside a small stored tree
    ('iso', block, offset, epoch)      isolated vertex

Corners are ('after', edge_handle) or ('at', iso_handle); trees are
('t', tid) for clustered trees and ('ts', block, offset, epoch) for small
ones.  Handles go stale when their cluster or block is rewritten; every
update deposits an old-handle -> new-handle map retrievable once through
``drain_remap`` (registered fingers are patched automatically).

No vertex identifiers are stored anywhere inside the structure.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

from .clustering import ForestParams, decompose
from .errors import (
    CycleError,
    DegreeLimitError,
    FingerBudgetError,
    ForestError,
    InternalEdgeError,
    InvalidHandleError,
    NotConnectedError,
    NotIsolatedError,
)
from .macro_tree import MacroForest, MacroTour
from .micro_tree import Cluster, build_cluster, decode_cluster
from .succinct import BalancedParens, Bitvector

_WORD = 64
_NEW_EDGE_TAG = ("~new~", 0)

# ---------------------------------------------------------------------------
# small-tree store
# ---------------------------------------------------------------------------


class _Block:
    __slots__ = ("bits", "used", "epoch")

    def __init__(self, epoch):
        self.bits = 0
        self.used = 0
        self.epoch = epoch


class SmallStore:
    """Blocked parenthesis string holding every tree below the size floor.

    Trees are addressed positionally (block, offset); editing a block
    rewrites it wholesale and bumps its epoch.
    """

    def __init__(self, cap: int):
        self.cap = max(64, cap)
        self.blocks: list[_Block] = []
        self._epoch = 0

    def _next_epoch(self):
        self._epoch += 1
        return self._epoch

    def add(self, bits: int, nbits: int):
        """Append a tree; returns (block index, offset)."""
        for bi in range(len(self.blocks) - 1, max(len(self.blocks) - 3, -1), -1):
            b = self.blocks[bi]
            if b.used + nbits <= self.cap:
                off = b.used
                b.bits |= bits << off
                b.used += nbits
                return bi, off
        b = _Block(self._next_epoch())
        b.bits = bits
        b.used = nbits
        self.blocks.append(b)
        return len(self.blocks) - 1, 0

    def tree_extent(self, bi: int, off: int) -> int:
        """Bit length of the balanced segment starting at ``off``."""
        b = self.blocks[bi]
        if off >= b.used:
            raise InvalidHandleError("small-tree offset out of range")
        depth = 0
        pos = off
        while pos < b.used:
            depth += 1 if (b.bits >> pos) & 1 else -1
            pos += 1
            if depth == 0:
                return pos - off
        raise InvalidHandleError("unbalanced small-tree segment")

    def tree_bits(self, bi: int, off: int):
        n = self.tree_extent(bi, off)
        return (self.blocks[bi].bits >> off) & ((1 << n) - 1), n

    def trees_in_block(self, bi: int):
        out = []
        off = 0
        while off < self.blocks[bi].used:
            n = self.tree_extent(bi, off)
            out.append((off, n))
            off += n
        return out

    def remove(self, bi: int, off: int):
        """Drop one tree, compacting the block; returns the moves
        [(old_off, new_off, nbits), ...] of the surviving trees and the new
        epoch."""
        b = self.blocks[bi]
        n = self.tree_extent(bi, off)
        moves = []
        new_bits = b.bits & ((1 << off) - 1)
        write = off
        pos = off + n
        while pos < b.used:
            k = self.tree_extent(bi, pos)
            seg = (b.bits >> pos) & ((1 << k) - 1)
            new_bits |= seg << write
            moves.append((pos, write, k))
            write += k
            pos += k
        b.bits = new_bits
        b.used = write
        b.epoch = self._next_epoch()
        return moves, b.epoch

    def epoch_of(self, bi: int) -> int:
        return self.blocks[bi].epoch

    def payload_bits(self) -> int:
        return sum(b.used for b in self.blocks)

    def aux_bits(self) -> int:
        live = [b for b in self.blocks if b.used]
        return sum(self.cap - b.used for b in live) + 128 * len(self.blocks)

    def all_trees(self):
        for bi in range(len(self.blocks)):
            for off, n in self.trees_in_block(bi):
                yield bi, off, n


# ---------------------------------------------------------------------------
# registry records and reports
# ---------------------------------------------------------------------------


class _Tree:
    __slots__ = ("tid", "kind", "ref")

    def __init__(self, tid, kind, ref):
        self.tid = tid
        self.kind = kind  # 'macro' | 'single'
        self.ref = ref


@dataclass
class SpaceReport:
    """Exact bit accounting; everything beyond the parenthesis payload is
    auxiliary."""

    vertices: int
    clones: int
    bp_payload_bits: int
    ports_bits: int
    rank_directory_bits: int
    port_map_bits: int
    macro_bits: int
    small_slack_bits: int
    cluster_meta_bits: int
    tree_registry_bits: int
    finger_bits: int
    fixed_overhead_bits: int

    @property
    def aux_bits(self) -> int:
        return (
            self.ports_bits
            + self.rank_directory_bits
            + self.port_map_bits
            + self.macro_bits
            + self.small_slack_bits
            + self.cluster_meta_bits
            + self.tree_registry_bits
            + self.finger_bits
            + self.fixed_overhead_bits
        )

    @property
    def total_bits(self) -> int:
        return self.bp_payload_bits + self.aux_bits

    @property
    def aux_per_vertex(self) -> float:
        return self.aux_bits / max(1, self.vertices)


FINGER_BUDGET_FACTOR = 4


class CompactForest:
    """Succinct embedded forest with tour queries and link/cut updates."""

    def __init__(self, params: ForestParams, seed: int = 0):
        self.params = params
        self.n_live = 0
        self.n_anchor = max(1, params.n)
        self.macro = MacroForest(seed=seed)
        self.clusters: dict[int, Cluster] = {}
        self.trees: dict[int, _Tree] = {}
        self.small = SmallStore(params.lower)
        self.fingers: dict[int, tuple] = {}
        self.counters = {
            "updates": 0,
            "rebuild_vertices": 0,
            "global_rebuilds": 0,
        }
        self._remap: dict = {}
        self._macro_reg: dict = {}
        self._next_cid = 0
        self._next_tid = 0
        self._next_fid = 0
        self._epoch = 0

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    @classmethod
    def build(cls, ef, *, epsilon=1.0, mode="bounded", d=None, params=None, seed=0):
        """Build from an explicit embedded forest.

        Returns (forest, index): ``index`` maps every directed edge of the
        input, and every isolated vertex, to its initial handle.
        """
        verts = ef.vertices()
        n = len(verts)
        if params is None:
            if mode == "bounded" and d is None:
                d = max((ef.degree(v) for v in verts), default=2)
            params = ForestParams.derive(max(n, 2), epsilon, mode, d)
        forest = cls(params, seed=seed)
        forest.n_live = n
        forest.n_anchor = max(1, n)
        index = {}
        seen = set()
        for v in verts:
            if v in seen:
                continue
            comp = ef.component_of(v)
            seen |= comp
            rot = {x: [("v", w) for w in ef.rotation(x)] for x in comp}
            handles, _tree = forest._build_component(rot)
            index.update(handles)
        return forest, index

    def _new_cid(self):
        self._next_cid += 1
        self._epoch += 1
        return self._next_cid, self._epoch

    def _new_tid(self):
        self._next_tid += 1
        return self._next_tid

    def _register_single(self, cluster: Cluster) -> _Tree:
        rec = _Tree(self._new_tid(), "single", cluster)
        cluster.tree = rec
        self.trees[rec.tid] = rec
        return rec

    def _register_macro(self, tour: MacroTour) -> _Tree:
        rec = _Tree(self._new_tid(), "macro", tour)
        tour.tree_rec = rec
        self.trees[rec.tid] = rec
        return rec

    def _drop_tree(self, rec: _Tree):
        self.trees.pop(rec.tid, None)

    # -- the unified component builder ---------------------------------

    def _build_component(self, rot, pieces=None, real=None):
        """Install one connected component.

        ``rot`` maps label -> entries ('v', label) | ('p', MacroEdge), the
        latter being boundary ports whose far sides survive as pre-extracted
        tour segments in ``pieces`` (node -> (root, first, last)).  Returns
        (handle map keyed by directed label pair / 'iso' label, tree handle).
        """
        pieces = pieces or {}
        labels = sorted(rot)
        size = len(labels)
        boundary = [
            (v, e[1]) for v in labels for e in rot[v] if e[0] == "p"
        ]
        if not boundary and size < self.params.small_limit:
            return self._install_small(rot)

        # phantomize port slots so they ride through the decomposition
        next_ph = max(labels) + 1
        prot = {}
        slot_node = {}
        for v in labels:
            row = []
            for kind, x in rot[v]:
                if kind == "v":
                    row.append(x)
                else:
                    ph = next_ph
                    next_ph += 1
                    slot_node[ph] = x
                    prot[ph] = [v]
                    row.append(ph)
            prot[v] = row
        real_set = set(labels)
        part = decompose(prot, self.params, real=real_set)
        cluster_of = part.cluster_of
        expanded = part.rotations
        kind_of = {}
        for u, v, true in part.inter_edges:
            kind_of[(u, v)] = kind_of[(v, u)] = true

        # one Euler walk of the expanded component fixes every tour position
        order = self._euler_walk(expanded, slot_node)
        node_map = {}
        elements = []
        for u, v in order:
            if v in slot_node:
                elements.append(("piece", slot_node[v]))
                continue
            if u in slot_node:
                continue
            if cluster_of[u] == cluster_of[v]:
                continue
            node = node_map.get((u, v))
            if node is None:
                true = kind_of.get((u, v), True)
                node = self.macro.new_edge(true, 0)
                rev = self.macro.new_edge(true, 0)
                node.reverse = rev
                rev.reverse = node
                self._register_node(node)
                self._register_node(rev)
                node_map[(u, v)] = node
                node_map[(v, u)] = rev
            elements.append(("node", node_map[(u, v)]))

        # micro-trees per cluster
        orig = lambda x: part.clone_of.get(x, x)
        handles = {}
        new_clusters = []
        builders = []
        for ci, members in enumerate(part.clusters):
            frag = {}
            for x in members:
                if x in slot_node:
                    continue
                row = []
                for w in expanded[x]:
                    if w in slot_node:
                        row.append(("p", slot_node[w]))
                    elif cluster_of[w] == ci:
                        row.append(("v", w))
                    else:
                        row.append(("p", node_map[(x, w)]))
                frag[x] = row
            if not frag:
                continue
            root, start = self._canonical_root(frag)
            res = build_cluster(frag, root, start)
            cluster = res.cluster
            cid, ep = self._new_cid()
            cluster.cid = cid
            cluster.epoch = ep
            cluster.port_keys = list(res.port_keys)
            for k, node in enumerate(cluster.port_keys, start=1):
                node.tail_cluster = cluster
                node.tail_rank = k
            self.clusters[cid] = cluster
            new_clusters.append(cluster)
            builders.append(res)
            self.counters["rebuild_vertices"] += cluster.n
            for (a, b), rank in res.step_of_edge.items():
                oa, ob = orig(a), orig(b)
                if oa != ob:
                    handles[(oa, ob)] = ("i", cid, rank, ep)

        for (u, v), node in node_map.items():
            ou, ov = orig(u), orig(v)
            if node.true_flag and ou != ov:
                handles[(ou, ov)] = ("m", node.edge_id)

        # assemble the tour
        if elements:
            roots = []
            firsts = []
            lasts = []
            for kind, payload in elements:
                if kind == "node":
                    roots.append(payload)
                    firsts.append(payload)
                    lasts.append(payload)
                else:
                    seg_root, first, last = pieces[payload]
                    roots.append(seg_root)
                    firsts.append(first)
                    lasts.append(last)
            from .macro_tree import _join

            root = None
            for r in roots:
                root = _join(root, r)
            for i in range(len(elements)):
                lasts[i].succ = firsts[(i + 1) % len(elements)]
                firsts[(i + 1) % len(elements)].pred = lasts[i]
            tour = MacroTour(root)
            self.macro.tours.add(tour)
            rec = self._register_macro(tour)
            for cluster in new_clusters:
                self._refresh_arrival_corners(cluster)
            tree_handle = ("t", rec.tid)
        else:
            cluster = new_clusters[0]
            rec = self._register_single(cluster)
            tree_handle = ("t", rec.tid)
        return handles, tree_handle

    @staticmethod
    def _euler_walk(rot, slot_node):
        """Directed edges of the expanded component in cyclic tour order."""
        v0 = min(x for x in rot if x not in slot_node)
        if not rot[v0]:
            return []
        pos = {v: {w: i for i, w in enumerate(r)} for v, r in rot.items()}
        start = (v0, rot[v0][0])
        out = [start]
        cur = start
        while True:
            u, v = cur
            r = rot[v]
            cur = (v, r[(pos[v][u] + 1) % len(r)])
            if cur == start:
                return out
            out.append(cur)

    @staticmethod
    def _canonical_root(frag):
        """Root at the carrier of the lowest-id port, starting just past it;
        portless fragments root at their smallest label."""
        best = None
        for v, row in frag.items():
            for i, (kind, x) in enumerate(row):
                if kind != "p":
                    continue
                key = min(x.edge_id, x.reverse.edge_id)
                if best is None or key < best[0]:
                    best = (key, v, i)
        if best is None:
            return min(frag), 0
        _, v, i = best
        return v, (i + 1) % len(frag[v])

    def _refresh_arrival_corners(self, cluster: Cluster):
        """Reset the corner weight of every edge arriving at this cluster
        from its ports bitvector runs."""
        for k, out in enumerate(cluster.port_keys, start=1):
            self.macro.set_corner_weight(
                ("after", out.reverse), cluster.run_after_port(k)
            )

    def _install_small(self, rot):
        """Store a tiny component (< small_limit vertices, no ports)."""
        labels = sorted(rot)
        handles = {}
        if len(labels) == 1 and not rot[labels[0]]:
            bits = Bitvector.from_string("10").bits  # "()"
            bi, off = self.small.add(bits, 2)
            ep = self.small.epoch_of(bi)
            handles[("iso", labels[0])] = ("iso", bi, off, ep)
            return handles, ("ts", bi, off, ep)
        frag = {v: list(rot[v]) for v in labels}
        res = build_cluster(frag, min(labels), 0)
        bits = res.cluster.bp.bv.bits
        nbits = res.cluster.bp.bv.length
        bi, off = self.small.add(bits, nbits)
        ep = self.small.epoch_of(bi)
        for (a, b), rank in res.step_of_edge.items():
            handles[(a, b)] = ("s", bi, off, rank, ep)
        self.counters["rebuild_vertices"] += len(labels)
        return handles, ("ts", bi, off, ep)

    # ------------------------------------------------------------------
    # handle resolution
    # ------------------------------------------------------------------

    def _cluster_of_handle(self, h):
        cid, rank, ep = h[1], h[2], h[3]
        c = self.clusters.get(cid)
        if c is None or c.epoch != ep:
            raise InvalidHandleError(f"stale cluster handle {h!r}")
        if not 1 <= rank <= c.zeros:
            raise InvalidHandleError(f"step rank out of range in {h!r}")
        return c

    def _macro_of_handle(self, h):
        node = self._macro_reg.get(h[1])
        if node is None or node.deleted:
            raise InvalidHandleError(f"stale macro handle {h!r}")
        return node

    def _register_node(self, node):
        self._macro_reg[node.edge_id] = node

    def _retire_node(self, node):
        node.deleted = True
        node.succ = node.pred = None
        node.left = node.right = node.parent = None
        self._macro_reg.pop(node.edge_id, None)

    def _small_view(self, bi, off, ep):
        if bi >= len(self.small.blocks) or self.small.blocks[bi].epoch != ep:
            raise InvalidHandleError("stale small-store handle")
        bits, nbits = self.small.tree_bits(bi, off)
        return BalancedParens(Bitvector(bits, nbits))

    def resolve_kind(self, h):
        return h[0]

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    def reverse(self, h):
        """Handle of the same undirected edge crossed the other way."""
        k = h[0]
        if k == "i":
            c = self._cluster_of_handle(h)
            return ("i", h[1], c.reverse_step(h[2]), h[3])
        if k == "m":
            node = self._macro_of_handle(h)
            return ("m", node.reverse.edge_id)
        if k == "s":
            bp = self._small_view(h[1], h[2], h[4])
            return ("s", h[1], h[2], bp.match(h[3]), h[4])
        raise InvalidHandleError(f"not an edge handle: {h!r}")

    def _intra(self, c: Cluster, rank: int):
        return ("i", c.cid, rank, c.epoch)

    def _succ_of_crossing(self, node):
        """Visible event after crossing ``node`` (skips false edges)."""
        while True:
            dst = node.reverse.tail_cluster
            k = node.reverse.tail_rank
            kind, x = dst.after_port(k, "fwd")
            if kind == "step":
                return self._intra(dst, x)
            node = dst.port_keys[x - 1]
            if node.true_flag:
                return ("m", node.edge_id)

    def _pred_of_crossing(self, node):
        """Visible event before crossing ``node``."""
        while True:
            src = node.tail_cluster
            k = node.tail_rank
            kind, x = src.after_port(k, "back")
            if kind == "step":
                return self._intra(src, x)
            node = src.port_keys[x - 1].reverse
            if node.true_flag:
                return ("m", node.edge_id)

    def tour_pred_succ(self, h):
        """(predecessor, successor) of h in its Euler tour."""
        k = h[0]
        if k == "i":
            c = self._cluster_of_handle(h)
            r = h[2]
            kind, x = c.local_step(r, "fwd")
            if kind == "step":
                succ = self._intra(c, x)
            else:
                out = c.port_keys[x - 1]
                succ = ("m", out.edge_id) if out.true_flag else self._succ_of_crossing(out)
            kind, x = c.local_step(r, "back")
            if kind == "step":
                pred = self._intra(c, x)
            else:
                inn = c.port_keys[x - 1].reverse
                pred = ("m", inn.edge_id) if inn.true_flag else self._pred_of_crossing(inn)
            return pred, succ
        if k == "m":
            node = self._macro_of_handle(h)
            return self._pred_of_crossing(node), self._succ_of_crossing(node)
        if k == "s":
            bp = self._small_view(h[1], h[2], h[4])
            z = bp.length - 2
            r = h[3]
            return (
                ("s", h[1], h[2], (r - 2) % z + 1, h[4]),
                ("s", h[1], h[2], r % z + 1, h[4]),
            )
        raise InvalidHandleError(f"not an edge handle: {h!r}")

    def rotation_pred_succ(self, h):
        """(predecessor, successor) among edges leaving tail(h), ccw."""
        succ = self.tour_pred_succ(self.reverse(h))[1]
        pred = self.reverse(self.tour_pred_succ(h)[0])
        return pred, succ

    def _tree_rec_of(self, h):
        k = h[0]
        if k == "i":
            c = self._cluster_of_handle(h)
            if c.tree is not None:
                return c.tree
            tour = self.macro.tour_of(c.port_keys[0])
            return tour.tree_rec
        if k == "m":
            node = self._macro_of_handle(h)
            return self.macro.tour_of(node).tree_rec
        if k in ("s", "iso"):
            return None  # small trees carry no registry record
        raise InvalidHandleError(f"bad handle {h!r}")

    def tree_of(self, h):
        """Tree handle containing h."""
        if h[0] == "s":
            self._small_view(h[1], h[2], h[4])
            return ("ts", h[1], h[2], h[4])
        if h[0] == "iso":
            if h[1] >= len(self.small.blocks) or self.small.blocks[h[1]].epoch != h[3]:
                raise InvalidHandleError("stale isolated-vertex handle")
            return ("ts", h[1], h[2], h[3])
        rec = self._tree_rec_of(h)
        return ("t", rec.tid)

    def same_tree(self, h1, h2) -> bool:
        return self.tree_of(h1) == self.tree_of(h2)

    def iso_handle(self, tree_handle):
        """Isolated-vertex handle for a one-vertex small tree."""
        if tree_handle[0] != "ts":
            raise NotIsolatedError("tree is not in the small store")
        _, bi, off, ep = tree_handle
        if bi >= len(self.small.blocks) or self.small.blocks[bi].epoch != ep:
            raise InvalidHandleError("stale tree handle")
        _, nbits = self.small.tree_bits(bi, off)
        if nbits != 2:
            raise NotIsolatedError("tree has more than one vertex")
        return ("iso", bi, off, ep)

    def tree_size(self, tree_handle) -> int:
        """Number of (real) vertices in a tree."""
        if tree_handle[0] == "ts":
            _, bi, off, ep = tree_handle
            if bi >= len(self.small.blocks) or self.small.blocks[bi].epoch != ep:
                raise InvalidHandleError("stale tree handle")
            _, nbits = self.small.tree_bits(bi, off)
            return nbits // 2
        rec = self.trees.get(tree_handle[1])
        if rec is None:
            raise InvalidHandleError("stale tree handle")
        if rec.kind == "single":
            return rec.ref.n
        tour = rec.ref
        return (tour.total_true + tour.total_weight) // 2 + 1

    def _tour_steps_of(self, h) -> int:
        """2 (n_T - 1) for the tree containing h."""
        if h[0] == "s":
            bp = self._small_view(h[1], h[2], h[4])
            return bp.length - 2
        rec = self._tree_rec_of(h)
        if rec.kind == "single":
            return rec.ref.zeros
        return rec.ref.total_true + rec.ref.total_weight

    def tour_distance(self, h1, h2) -> int:
        """Crossings strictly between h1 and h2 along the tour."""
        if h1 == h2:
            return 0
        k1, k2 = h1[0], h2[0]
        if k1 == "s" or k2 == "s":
            if k1 != k2 or h1[1] != h2[1] or h1[2] != h2[2] or h1[4] != h2[4]:
                if k1 == "s":
                    self._small_view(h1[1], h1[2], h1[4])
                if k2 == "s":
                    self._small_view(h2[1], h2[2], h2[4])
                raise NotConnectedError("edges lie in different trees")
            bp = self._small_view(h1[1], h1[2], h1[4])
            z = bp.length - 2
            return (h2[3] - h1[3] - 1) % z
        # same-cluster fast path with no intervening port
        if k1 == "i" and k2 == "i" and h1[1] == h2[1]:
            c = self._cluster_of_handle(h1)
            self._cluster_of_handle(h2)
            direct = c.steps_between(h1[2], h2[2])
            if direct is not None:
                return direct
        pre, m1, sub1 = self._exit_edge(h1)
        post, m2, sub2 = self._entry_edge(h2)
        if self.macro.tour_of(m1) is not self.macro.tour_of(m2):
            raise NotConnectedError("edges lie in different trees")
        t_incl, w_strict = self.macro.distance_and_weight(m1, m2)
        return pre + post + t_incl + w_strict - sub1 - sub2

    def _exit_edge(self, h):
        """(steps after h before leaving, first crossing, own-crossing
        correction) for the composed distance."""
        if h[0] == "m":
            node = self._macro_of_handle(h)
            return 0, node, node.true_flag
        c = self._cluster_of_handle(h)
        sp = c.steps_to_port(h[2], "fwd")
        if sp is None:
            raise NotConnectedError("single-cluster tree does not reach there")
        k, pre = sp
        return pre, c.port_keys[k - 1], 0

    def _entry_edge(self, h):
        if h[0] == "m":
            node = self._macro_of_handle(h)
            return 0, node, node.true_flag
        c = self._cluster_of_handle(h)
        sp = c.steps_to_port(h[2], "back")
        if sp is None:
            raise NotConnectedError("single-cluster tree does not reach there")
        k, post = sp
        return post, c.port_keys[k - 1].reverse, 0

    def edge_at_distance(self, h, t: int):
        """Handle exactly t tour steps after h (offset semantics; wraps)."""
        if t < 0:
            raise ValueError("distance must be non-negative")
        L = self._tour_steps_of(h)
        if L == 0:
            raise InvalidHandleError("isolated vertices have no tour")
        t %= L
        if t == 0:
            return h
        if h[0] == "s":
            z = L
            return ("s", h[1], h[2], (h[3] - 1 + t) % z + 1, h[4])
        if h[0] == "i":
            c = self._cluster_of_handle(h)
            if c.ports is None:
                return self._intra(c, c.step_ahead(h[2], t))
            k, s = c.steps_to_port(h[2], "fwd")
            if t <= s:
                return self._intra(c, c.step_ahead(h[2], t))
            out = c.port_keys[k - 1]
            rem = t - s - out.true_flag
            if rem == 0:
                return ("m", out.edge_id)
            return self._macro_jump(out, rem)
        node = self._macro_of_handle(h)
        return self._macro_jump(node, t)

    def _macro_jump(self, m, rem: int):
        """Target ``rem`` visible steps after crossing m."""
        w0 = m.weight
        if rem <= w0:
            dst = m.reverse.tail_cluster
            k = m.reverse.tail_rank
            return self._intra(dst, self._step_after_port(dst, k, rem))
        rem -= w0
        x, delta = self.macro.advance_by_combined(m, rem)
        if x.true_flag and delta == 1:
            return ("m", x.edge_id)
        dst = x.reverse.tail_cluster
        k = x.reverse.tail_rank
        return self._intra(dst, self._step_after_port(dst, k, delta - x.true_flag))

    @staticmethod
    def _step_after_port(cluster: Cluster, k: int, j: int) -> int:
        """Rank of the j-th step after port k's moment, cyclically."""
        pos = cluster.port_pos(k)
        before = cluster.ports.rank0(pos + 1)
        return (before + j - 1) % cluster.zeros + 1

    def side_sizes(self, h):
        """Vertex counts of the two sides of the undirected edge behind h:
        (head side, tail side)."""
        d = self.tour_distance(h, self.reverse(h))
        head_side = d // 2 + 1
        if h[0] == "s":
            total = self._small_view(h[1], h[2], h[4]).node_count
        else:
            total = self.tree_size(self.tree_of(h))
        return head_side, total - head_side

    # ------------------------------------------------------------------
    # composition helpers (exposed for the distance fixtures)
    # ------------------------------------------------------------------

    @staticmethod
    def compose_tour_distance(pre: int, post: int, macro_count: int, macro_weight: int) -> int:
        """Boundary composition: intra steps before the first crossing, the
        inclusive crossing count, foreign intra steps, intra steps after the
        last crossing."""
        return pre + post + macro_count + macro_weight

    @staticmethod
    def side_vertex_count(directed_edges_between: int) -> int:
        """Vertices on one side of an edge, from the directed-edge count
        strictly between it and its reverse."""
        return directed_edges_between // 2 + 1

    # ------------------------------------------------------------------
    # port-vector surgery (bp untouched, handles stay valid)
    # ------------------------------------------------------------------

    def _cluster_insert_port(self, C: Cluster, pos: int, node) -> int:
        if C.ports is None:
            bits, length = 0, C.zeros
        else:
            bits, length = C.ports.bits, C.cyclic_length
        low = bits & ((1 << pos) - 1)
        high = bits >> pos
        C.ports = Bitvector(low | (1 << pos) | (high << (pos + 1)), length + 1)
        k = C.ports.rank1(pos + 1)
        C.port_keys.insert(k - 1, node)
        node.tail_cluster = C
        node.tail_rank = k
        for i in range(k, len(C.port_keys)):
            C.port_keys[i].tail_rank = i + 1
        return k

    def _cluster_remove_port(self, C: Cluster, k: int):
        pos = C.port_pos(k)
        bits = C.ports.bits
        length = C.cyclic_length
        new_bits = (bits & ((1 << pos) - 1)) | ((bits >> (pos + 1)) << pos)
        C.port_keys.pop(k - 1)
        if not C.port_keys:
            C.ports = None
        else:
            C.ports = Bitvector(new_bits, length - 1)
            for i in range(k - 1, len(C.port_keys)):
                C.port_keys[i].tail_rank = i + 1

    def _rec_of_cluster(self, C: Cluster) -> _Tree:
        if C.tree is not None:
            return C.tree
        return self.macro.tour_of(C.port_keys[0]).tree_rec

    # ------------------------------------------------------------------
    # cut
    # ------------------------------------------------------------------

    def cut(self, h):
        """Delete the (true) edge behind h; returns the two resulting tree
        handles as (head side, tail side)."""
        self.counters["updates"] += 1
        k = h[0]
        if k == "m":
            node = self._macro_of_handle(h)
            if not node.true_flag:
                raise InternalEdgeError("bookkeeping edges cannot be cut")
            return self._cut_inter(node)
        if k == "i":
            c = self._cluster_of_handle(h)
            return self._region_update([("cluster", c)], ("cut", h))
        if k == "s":
            return self._cut_small(h)
        raise InvalidHandleError(f"not an edge handle: {h!r}")

    def _cut_inter(self, node):
        Cu, ku = node.tail_cluster, node.tail_rank
        Cv, kv = node.reverse.tail_cluster, node.reverse.tail_rank
        old_rec = self.macro.tour_of(node).tree_rec
        rid = node.edge_id
        rrid = node.reverse.edge_id
        arc_tour, rest_tour = self.macro.delete_edge(node, 0, 0)
        self._macro_reg.pop(rid, None)
        self._macro_reg.pop(rrid, None)
        self._cluster_remove_port(Cu, ku)
        self._cluster_remove_port(Cv, kv)
        self._drop_tree(old_rec)
        out = []
        for tour, anchor in ((arc_tour, Cv), (rest_tour, Cu)):
            if tour.is_empty:
                self.macro.tours.discard(tour)
                rec = self._register_single(anchor)
            else:
                rec = self._register_macro(tour)
                anchor.tree = None
            out.append(("t", rec.tid))
        self._refresh_arrival_corners(Cu)
        self._refresh_arrival_corners(Cv)
        self.counters["rebuild_vertices"] += 1 + len(Cu.port_keys) + len(Cv.port_keys)
        return out[0], out[1]

    def _cut_small(self, h):
        _, bi, off, rank, ep = h
        bp = self._small_view(bi, off, ep)
        dummy = Cluster(bp, None, bp.node_count, [])
        rot, edge_of_step = decode_cluster(dummy)
        tag = {}
        for r in range(1, dummy.zeros + 1):
            tag[edge_of_step[r]] = ("s", bi, off, r, ep)
        u, v = edge_of_step[rank]
        rot[u].remove(("v", v))
        rot[v].remove(("v", u))
        remap = {}
        tracked = self._small_remove_tracked(bi, off, remap)
        handles_all = {}
        sides = []
        for lbl in (v, u):
            comp = self._entry_component(rot, lbl)
            sub = {x: rot[x] for x in comp}
            handles, th = self._install_small(sub)
            handles_all.update(handles)
            sides.append(th)
        for pair, old in tag.items():
            old = remap.pop(old, old)
            new = handles_all.get(pair)
            if new is not None:
                remap[old] = new
        self._apply_remap(remap)
        self.counters["rebuild_vertices"] += dummy.n
        return sides[0], sides[1]

    @staticmethod
    def _entry_component(rot, start):
        seen = {start}
        q = [start]
        while q:
            x = q.pop()
            for kind, w in rot[x]:
                if kind == "v" and w not in seen:
                    seen.add(w)
                    q.append(w)
        return seen

    def _small_remove_tracked(self, bi, off, remap):
        """Remove a small tree, recording handle moves of its block mates
        into ``remap`` (chaining through earlier rewrites)."""
        mates = [
            (o, n) for o, n in self.small.trees_in_block(bi) if o != off
        ]
        old_ep = self.small.epoch_of(bi)
        moves, new_ep = self.small.remove(bi, off)
        moved = {o: n for o, n, _ in moves}
        entries = {}
        for o, nbits in mates:
            n = moved.get(o, o)
            z = nbits - 2
            if z == 0:
                entries[("iso", bi, o, old_ep)] = ("iso", bi, n, new_ep)
            else:
                for r in range(1, z + 1):
                    entries[("s", bi, o, r, old_ep)] = ("s", bi, n, r, new_ep)
        for k, v in list(remap.items()):
            if v in entries:
                remap[k] = entries[v]
        for k, v in entries.items():
            if k not in remap:
                remap[k] = v

    # ------------------------------------------------------------------
    # link
    # ------------------------------------------------------------------

    def _corner_vertex_degree(self, corner) -> int:
        kind = corner[0]
        if kind == "at":
            return 0
        h = corner[1]
        if h[0] == "i":
            c = self._cluster_of_handle(h)
            return len(c.enumerate_incident(c.reverse_step(h[2])))
        if h[0] == "m":
            node = self._macro_of_handle(h)
            dst = node.reverse.tail_cluster
            kind2, x = dst.after_port(node.reverse.tail_rank, "fwd")
            if kind2 == "step":
                return len(dst.enumerate_incident(x))
            # all-port vertex: count its rotation by walking ports
            count = 0
            k = node.reverse.tail_rank
            while True:
                count += 1
                kind3, x3 = dst.after_port(k, "fwd")
                if kind3 == "step" or x3 == node.reverse.tail_rank:
                    break
                k = x3
            return count
        if h[0] == "s":
            bp = self._small_view(h[1], h[2], h[4])
            dummy = Cluster(bp, None, bp.node_count, [])
            rot, edge_of_step = decode_cluster(dummy)
            return len(rot[edge_of_step[h[3]][1]])
        raise InvalidHandleError(f"bad corner {corner!r}")

    def _corner_tree(self, corner):
        if corner[0] == "at":
            return self.tree_of(corner[1])
        return self.tree_of(corner[1])

    def link(self, c1, c2):
        """Insert an edge bisecting the two corners; returns
        (merged tree handle, handle of the new edge directed c1 -> c2)."""
        self.counters["updates"] += 1
        t1 = self._corner_tree(c1)
        t2 = self._corner_tree(c2)
        if t1 == t2:
            raise CycleError("corners already share a tree")
        if self.params.mode == "bounded" and self.params.d is not None:
            for c in (c1, c2):
                if self._corner_vertex_degree(c) + 1 > self.params.d:
                    raise DegreeLimitError(
                        f"link would push a vertex past degree {self.params.d}"
                    )
        site1 = self._link_site(c1)
        site2 = self._link_site(c2)
        if site1[0] == "cluster" and site2[0] == "cluster":
            C1, C2 = site1[1], site2[1]
            ok1 = C1.tree is None or C1.n >= self.params.lower
            ok2 = C2.tree is None or C2.n >= self.params.lower
            if ok1 and ok2:
                return self._link_cheap(site1, site2)
        seeds = []
        for site in (site1, site2):
            if site[0] == "cluster":
                seeds.append(("cluster", site[1]))
            else:
                seeds.append((site[0], site[1], site[2]))
        return self._region_update(seeds, ("link", c1, c2))

    def _link_site(self, corner):
        if corner[0] == "at":
            h = corner[1]
            self.tree_of(h)
            return ("iso", h[1], h[2])
        h = corner[1]
        if h[0] == "i":
            c = self._cluster_of_handle(h)
            return ("cluster", c, c.step_pos(h[2]) + 1)
        if h[0] == "m":
            node = self._macro_of_handle(h)
            c = node.reverse.tail_cluster
            return ("cluster", c, c.port_pos(node.reverse.tail_rank) + 1)
        if h[0] == "s":
            self._small_view(h[1], h[2], h[4])
            return ("small", h[1], h[2])
        raise InvalidHandleError(f"bad corner {corner!r}")

    def _link_cheap(self, site1, site2):
        _, C1, pos1 = site1
        _, C2, pos2 = site2
        rec1 = self._rec_of_cluster(C1)
        rec2 = self._rec_of_cluster(C2)
        m = self.macro.new_edge(True, 0)
        mrev = self.macro.new_edge(True, 0)
        m.reverse = mrev
        mrev.reverse = m
        self._register_node(m)
        self._register_node(mrev)
        k1 = self._cluster_insert_port(C1, pos1, m)
        k2 = self._cluster_insert_port(C2, pos2, mrev)
        corner1 = self._macro_corner_before_port(C1, k1, rec1)
        corner2 = self._macro_corner_before_port(C2, k2, rec2)
        _, _, merged = self.macro.insert_edge(
            corner1, corner2, 0, 0, 0, 0, edges=(m, mrev)
        )
        self._drop_tree(rec1)
        self._drop_tree(rec2)
        C1.tree = None
        C2.tree = None
        rec = self._register_macro(merged)
        self._refresh_arrival_corners(C1)
        self._refresh_arrival_corners(C2)
        self.counters["rebuild_vertices"] += 1 + len(C1.port_keys) + len(C2.port_keys)
        return ("t", rec.tid), ("m", m.edge_id)

    def _macro_corner_before_port(self, C: Cluster, k: int, rec: _Tree):
        """Macro corner whose crossing precedes port k's moment; a solo
        corner on a fresh empty tour for single-cluster trees."""
        if rec.kind == "single":
            return ("solo", self.macro.empty_tour())
        pk = len(C.port_keys)
        kprev = k - 1 if k > 1 else pk
        return ("after", C.port_keys[kprev - 1].reverse)

    # ------------------------------------------------------------------
    # region rebuild: decode, edit, repair, reinstall
    # ------------------------------------------------------------------

    def _region_update(self, seeds, edit):
        rot = {}
        tag = {}
        iso_label = {}
        slot_of = {}
        next_label = [0]
        region = set()
        old_recs = set()
        pending_small = []

        def add_cluster(C):
            if C in region:
                return
            region.add(C)
            old_recs.add(self._rec_of_cluster(C))
            dec_rot, edge_of_step = decode_cluster(C)
            base = next_label[0]
            next_label[0] += C.n
            for lbl, entries in dec_rot.items():
                row = []
                for kind, x in entries:
                    if kind == "v":
                        row.append(("v", x + base))
                    else:
                        node = C.port_keys[x - 1]
                        row.append(("p", node))
                rot[lbl + base] = row
            for r in range(1, C.zeros + 1):
                a, b = edge_of_step[r]
                tag[(a + base, b + base)] = ("i", C.cid, r, C.epoch)
            return base

        def add_small(bi, off, ep):
            bp = self._small_view(bi, off, ep)
            dummy = Cluster(bp, None, bp.node_count, [])
            dec_rot, edge_of_step = decode_cluster(dummy)
            base = next_label[0]
            next_label[0] += dummy.n
            for lbl, entries in dec_rot.items():
                rot[lbl + base] = [("v", x + base) for _, x in entries]
            for r in range(1, dummy.zeros + 1):
                a, b = edge_of_step[r]
                tag[(a + base, b + base)] = ("s", bi, off, r, ep)
            pending_small.append((bi, off))
            return base

        def add_iso(bi, off, ep):
            base = next_label[0]
            next_label[0] += 1
            rot[base] = []
            iso_label[base] = ("iso", bi, off, ep)
            pending_small.append((bi, off))
            return base

        for seed in seeds:
            if seed[0] == "cluster":
                add_cluster(seed[1])
            elif seed[0] == "small":
                add_small(seed[1], seed[2], self.small.epoch_of(seed[1]))
            else:
                add_iso(seed[1], seed[2], self.small.epoch_of(seed[1]))

        inv_tag = {old: pair for pair, old in tag.items()}
        cut_labels = None
        if edit[0] == "cut":
            h = edit[1]
            pair = inv_tag[h]
            u, v = pair
            rot[u].remove(("v", v))
            rot[v].remove(("v", u))
            cut_labels = (v, u)  # head side first
        elif edit[0] == "link":
            x = self._corner_insert(rot, inv_tag, iso_label, edit[1])
            y = self._corner_insert(rot, inv_tag, iso_label, edit[2], after=x)
            # second insertion happens after the first so both slots exist
            tag[(x, y)] = _NEW_EDGE_TAG
            new_pair = (x, y)

        # stabilization: convert internal ports, contract internal clones,
        # absorb neighbors of undersized components
        while True:
            self._convert_internal(rot, tag, region)
            comps = self._region_components(rot)
            grown = False
            for comp in comps:
                if len(comp) >= self.params.lower:
                    continue
                ports = [
                    (v, x)
                    for v in comp
                    for kind, x in rot[v]
                    if kind == "p"
                ]
                if not ports:
                    continue
                far = min(
                    ports,
                    key=lambda p: (
                        p[1].reverse.tail_cluster.n,
                        min(p[1].edge_id, p[1].reverse.edge_id),
                    ),
                )[1].reverse.tail_cluster
                add_cluster(far)
                grown = True
                break
            if not grown:
                break

        # detach the far-side tour segments of every surviving boundary port
        pieces = {}
        boundary = [
            x for v in rot for kind, x in rot[v] if kind == "p"
        ]
        for node in boundary:
            first, last = node, node.reverse
            seg_root = self.macro.extract_segment(first, last)
            pieces[node] = (seg_root, first, last)

        # retire the old representation
        for rec in old_recs:
            if rec.kind == "macro":
                tour = rec.ref
                for leftover in tour.edges():
                    self._retire_node(leftover)
                self.macro.tours.discard(tour)
                tour.alive = False
            self._drop_tree(rec)
        for C in region:
            self.clusters.pop(C.cid, None)
        remap = {}
        for bi, off in sorted(pending_small, key=lambda t: (t[0], -t[1])):
            self._small_remove_tracked(bi, off, remap)

        # rebuild each component
        comps = self._region_components(rot)
        results = []
        handles_all = {}
        for comp in comps:
            sub = {v: rot[v] for v in comp}
            handles, th = self._build_component(sub, pieces)
            handles_all.update(handles)
            results.append((comp, th))

        # tag entries override any block-compaction moves recorded for the
        # same (now superseded) handles
        for pair, old in tag.items():
            if old == _NEW_EDGE_TAG:
                continue
            new = handles_all.get(pair)
            if new is not None:
                remap[old] = new
            else:
                remap.pop(old, None)
        for lbl, old in iso_label.items():
            new = handles_all.get(("iso", lbl))
            if new is not None:
                remap[old] = new
            else:
                remap.pop(old, None)
        self._apply_remap(remap)

        if edit[0] == "cut":
            out = []
            for lbl in cut_labels:
                for comp, th in results:
                    if lbl in comp:
                        out.append(th)
                        break
            return out[0], out[1]
        if edit[0] == "link":
            new_handle = handles_all.get(new_pair)
            return results[0][1], new_handle
        return results

    def _corner_insert(self, rot, inv_tag, iso_label, corner, after=None):
        """Splice a placeholder neighbor slot for a pending link; returns the
        vertex label.  The actual partner label is patched by the caller."""
        if corner[0] == "at":
            h = corner[1]
            for lbl, old in iso_label.items():
                if old == h:
                    if after is not None:
                        rot[lbl].append(("v", after))
                        rot[after] = [
                            e if e != ("v", None) else ("v", lbl) for e in rot[after]
                        ]
                    else:
                        rot[lbl].append(("v", None))
                    return lbl
            raise InvalidHandleError(f"unknown isolated corner {corner!r}")
        h = corner[1]
        if h[0] == "m":
            node = self._macro_of_handle(h)
            inn = node
            # the corner after an arriving edge sits just past its port slot
            for lbl, row in rot.items():
                for i, (kind, x) in enumerate(row):
                    if kind == "p" and x is inn.reverse:
                        if after is not None:
                            row.insert(i + 1, ("v", after))
                            rot[after] = [
                                e if e != ("v", None) else ("v", lbl)
                                for e in rot[after]
                            ]
                        else:
                            row.insert(i + 1, ("v", None))
                        return lbl
            raise InvalidHandleError("corner's cluster is outside the region")
        pair = inv_tag.get(h)
        if pair is None:
            raise InvalidHandleError(f"stale corner handle {corner!r}")
        u, v = pair
        i = rot[v].index(("v", u))
        if after is not None:
            rot[v].insert(i + 1, ("v", after))
            rot[after] = [e if e != ("v", None) else ("v", v) for e in rot[after]]
        else:
            rot[v].insert(i + 1, ("v", None))
        return v

    def _convert_internal(self, rot, tag, region):
        """Turn region-internal true ports into tree edges and contract
        region-internal false ports (clone fusions)."""
        while True:
            found = None
            for v, row in rot.items():
                for i, (kind, x) in enumerate(row):
                    if kind == "p" and x.reverse.tail_cluster in region:
                        found = (v, i, x)
                        break
                if found:
                    break
            if found is None:
                return
            v, i, node = found
            rev = node.reverse
            w = j = None
            for v2, row2 in rot.items():
                for i2, (kind2, x2) in enumerate(row2):
                    if kind2 == "p" and x2 is rev:
                        w, j = v2, i2
                        break
                if w is not None:
                    break
            if w is None:
                raise ForestError("internal port without its mirror slot")
            if node.true_flag:
                rot[v][i] = ("v", w)
                rot[w][j] = ("v", v)
                tag[(v, w)] = ("m", node.edge_id)
                tag[(w, v)] = ("m", rev.edge_id)
            else:
                # clone fusion: splice w's rotation into v's slot
                spliced = [
                    rot[w][(j + 1 + t) % len(rot[w])] for t in range(len(rot[w]) - 1)
                ]
                rot[v][i : i + 1] = spliced
                for kind2, x2 in spliced:
                    if kind2 == "v":
                        row2 = rot[x2]
                        for i2, e2 in enumerate(row2):
                            if e2 == ("v", w):
                                row2[i2] = ("v", v)
                del rot[w]
                for pair in [p for p in tag if w in p]:
                    a, b = pair
                    old = tag.pop(pair)
                    tag[(v if a == w else a, v if b == w else b)] = old

    @staticmethod
    def _region_components(rot):
        seen = set()
        comps = []
        for v in sorted(rot):
            if v in seen:
                continue
            comp = {v}
            q = [v]
            while q:
                x = q.pop()
                for kind, w in rot[x]:
                    if kind == "v" and w is not None and w not in seen | comp:
                        comp.add(w)
                        q.append(w)
            seen |= comp
            comps.append(comp)
        return comps

    # ------------------------------------------------------------------
    # vertex churn and the global rebuild
    # ------------------------------------------------------------------

    def add_vertex(self):
        """New isolated vertex; returns its handle."""
        self.counters["updates"] += 1
        bits = Bitvector.from_string("10").bits
        bi, off = self.small.add(bits, 2)
        h = ("iso", bi, off, self.small.epoch_of(bi))
        self.n_live += 1
        moved = self._maybe_global_rebuild()
        if moved:
            h = moved.get(h, h)
        return h

    def remove_vertex(self, h):
        """Delete an isolated vertex."""
        if h[0] != "iso":
            raise NotIsolatedError("vertex removal needs an isolated vertex")
        if h[1] >= len(self.small.blocks) or self.small.blocks[h[1]].epoch != h[3]:
            raise InvalidHandleError("stale isolated-vertex handle")
        _, nbits = self.small.tree_bits(h[1], h[2])
        if nbits != 2:
            raise NotIsolatedError("vertex still has edges")
        self.counters["updates"] += 1
        remap = {}
        self._small_remove_tracked(h[1], h[2], remap)
        self._apply_remap(remap)
        self.n_live -= 1
        self._maybe_global_rebuild()

    def _maybe_global_rebuild(self):
        if self.n_live > 2 * self.n_anchor or 2 * self.n_live < self.n_anchor:
            return self._global_rebuild()
        return None

    def _global_rebuild(self):
        """Re-derive thresholds from the current size and re-cluster
        everything; every outstanding handle dies (fingers are remapped)."""
        self.counters["global_rebuilds"] += 1
        rot = {}
        tag = {}
        iso_label = {}
        next_label = 0
        region = set(self.clusters.values())
        for C in region:
            dec_rot, edge_of_step = decode_cluster(C)
            base = next_label
            next_label += C.n
            for lbl, entries in dec_rot.items():
                row = []
                for kind, x in entries:
                    row.append(
                        ("v", x + base) if kind == "v" else ("p", C.port_keys[x - 1])
                    )
                rot[lbl + base] = row
            for r in range(1, C.zeros + 1):
                a, b = edge_of_step[r]
                tag[(a + base, b + base)] = ("i", C.cid, r, C.epoch)
        for bi, off, nbits in list(self.small.all_trees()):
            ep = self.small.epoch_of(bi)
            if nbits == 2:
                rot[next_label] = []
                iso_label[next_label] = ("iso", bi, off, ep)
                next_label += 1
                continue
            bits, _ = self.small.tree_bits(bi, off)
            bp = BalancedParens(Bitvector(bits, nbits))
            dummy = Cluster(bp, None, nbits // 2, [])
            dec_rot, edge_of_step = decode_cluster(dummy)
            base = next_label
            next_label += dummy.n
            for lbl, entries in dec_rot.items():
                rot[lbl + base] = [("v", x + base) for _, x in entries]
            for r in range(1, dummy.zeros + 1):
                a, b = edge_of_step[r]
                tag[(a + base, b + base)] = ("s", bi, off, r, ep)

        self._convert_internal(rot, tag, region)

        # fresh world
        self.params = self.params.with_n(max(self.n_live, 2))
        self.n_anchor = max(1, self.n_live)
        for rec in list(self.trees.values()):
            self._drop_tree(rec)
        for tour in list(self.macro.tours):
            tour.alive = False
        self.macro.tours.clear()
        for node in list(self._macro_reg.values()):
            self._retire_node(node)
        self.clusters.clear()
        self.small = SmallStore(self.params.lower)

        remap = {}
        handles_all = {}
        for comp in self._region_components(rot):
            sub = {v: rot[v] for v in comp}
            handles, _ = self._build_component(sub)
            handles_all.update(handles)
        for pair, old in tag.items():
            new = handles_all.get(pair)
            if new is not None:
                remap[old] = new
        for lbl, old in iso_label.items():
            new = handles_all.get(("iso", lbl))
            if new is not None:
                remap[old] = new
        self._apply_remap(remap)
        return remap

    # ------------------------------------------------------------------
    # fingers and remaps
    # ------------------------------------------------------------------

    def finger_budget(self) -> int:
        return max(1, (FINGER_BUDGET_FACTOR * max(self.n_live, 1)) // self.params.lower)

    def register_finger(self, h) -> int:
        if len(self.fingers) >= self.finger_budget():
            raise FingerBudgetError(
                f"finger budget {self.finger_budget()} exhausted"
            )
        if h[0] in ("i", "m", "s"):
            self.reverse(h)  # validates
        elif h[0] == "iso":
            self.tree_of(h)
        else:
            raise InvalidHandleError(f"bad handle {h!r}")
        self._next_fid += 1
        self.fingers[self._next_fid] = h
        return self._next_fid

    def finger(self, fid: int):
        if fid not in self.fingers:
            raise InvalidHandleError(f"unknown finger {fid}")
        return self.fingers[fid]

    def drop_finger(self, fid: int):
        self.fingers.pop(fid, None)

    def _apply_remap(self, remap: dict):
        if not remap:
            return
        for k, v in list(self._remap.items()):
            if v in remap:
                self._remap[k] = remap[v]
        for k, v in remap.items():
            if k not in self._remap:
                self._remap[k] = v
        for fid, h in list(self.fingers.items()):
            if h in remap:
                self.fingers[fid] = remap[h]

    def drain_remap(self) -> dict:
        """Old-handle -> new-handle map accumulated since the last drain."""
        out = self._remap
        self._remap = {}
        return out

    # ------------------------------------------------------------------
    # accounting, audit, persistence
    # ------------------------------------------------------------------

    def space_report(self) -> SpaceReport:
        bp_payload = 0
        ports = 0
        rankdir = 0
        portmap = 0
        stored_vertices = 0
        for C in self.clusters.values():
            bp_payload += C.bp.bv.length
            stored_vertices += C.n
            rankdir += C.bp.bv.aux_bits()
            if C.ports is not None:
                ports += C.ports.length
                rankdir += C.ports.aux_bits()
            portmap += 2 * _WORD * len(C.port_keys)
        small_payload = self.small.payload_bits()
        bp_payload += small_payload
        stored_vertices += small_payload // 2
        macro_bits = 12 * _WORD * len(self._macro_reg)
        return SpaceReport(
            vertices=self.n_live,
            clones=stored_vertices - self.n_live,
            bp_payload_bits=bp_payload,
            ports_bits=ports,
            rank_directory_bits=rankdir,
            port_map_bits=portmap,
            macro_bits=macro_bits,
            small_slack_bits=self.small.aux_bits(),
            cluster_meta_bits=6 * _WORD * len(self.clusters),
            tree_registry_bits=3 * _WORD * len(self.trees),
            finger_bits=2 * _WORD * len(self.fingers),
            fixed_overhead_bits=1024,
        )

    def cluster_sizes(self):
        """(size, is_single_cluster_tree) per live cluster."""
        return [(C.n, C.tree is not None) for C in self.clusters.values()]

    def validate(self):
        """Full structural audit; raises on any broken invariant."""
        for C in self.clusters.values():
            if not C.bp.check_balanced():
                raise ForestError(f"cluster {C.cid}: unbalanced parentheses")
            if C.bp.bv.length != 2 * C.n:
                raise ForestError(f"cluster {C.cid}: bp length mismatch")
            if C.ports is not None:
                if C.ports.rank0(C.ports.length) != C.zeros:
                    raise ForestError(f"cluster {C.cid}: wrong zero count")
                if C.ports.rank1(C.ports.length) != len(C.port_keys):
                    raise ForestError(f"cluster {C.cid}: wrong port count")
            for k, node in enumerate(C.port_keys, start=1):
                if node.tail_cluster is not C or node.tail_rank != k:
                    raise ForestError(f"cluster {C.cid}: port {k} miswired")
                if node.deleted:
                    raise ForestError(f"cluster {C.cid}: dead port edge")
                if node.reverse.weight != C.run_after_port(k):
                    raise ForestError(
                        f"cluster {C.cid}: corner weight *{node.reverse.weight}"
                        f" != run {C.run_after_port(k)}"
                    )
            if C.n > self.params.B:
                raise ForestError(f"cluster {C.cid}: size {C.n} above B")
            if C.tree is None and C.ports is None:
                raise ForestError(f"cluster {C.cid}: portless but not a tree")
        floor = (
            self.params.lower
            if self.params.mode == "bounded"
            else self.params.B // 3
        )
        for C in self.clusters.values():
            if C.tree is None and C.n < floor:
                raise ForestError(
                    f"cluster {C.cid}: size {C.n} below floor {floor}"
                )
        for tour in self.macro.tours:
            if tour.alive and not tour.is_empty:
                self.macro.audit(tour)
                if tour.tree_rec is None or tour.tree_rec.tid not in self.trees:
                    raise ForestError("tour without a registry record")
        for rec in self.trees.values():
            if rec.kind == "single":
                if rec.ref.tree is not rec:
                    raise ForestError("single-cluster record backlink broken")
            else:
                if rec.ref.tree_rec is not rec:
                    raise ForestError("tour record backlink broken")
        for bi in range(len(self.small.blocks)):
            for off, nbits in self.small.trees_in_block(bi):
                bits, _ = self.small.tree_bits(bi, off)
                if not BalancedParens(Bitvector(bits, nbits)).check_balanced():
                    raise ForestError("small store holds an unbalanced segment")

    # ------------------------------------------------------------------
    # sampling and iteration (verification and benchmark plumbing)
    # ------------------------------------------------------------------

    def iter_tree_handles(self):
        out = [("t", tid) for tid in sorted(self.trees)]
        for bi in range(len(self.small.blocks)):
            ep = self.small.epoch_of(bi)
            for off, nbits in self.small.trees_in_block(bi):
                out.append(("ts", bi, off, ep))
        return out

    def sample_edge(self, rng):
        """Uniform-ish random edge handle, or None on an edgeless forest."""
        pools = []
        for C in self.clusters.values():
            if C.zeros:
                pools.append((C.zeros, ("c", C)))
        for bi in range(len(self.small.blocks)):
            for off, nbits in self.small.trees_in_block(bi):
                if nbits > 2:
                    pools.append((nbits - 2, ("s", bi, off)))
        for node in self._macro_reg.values():
            if node.true_flag:
                pools.append((1, ("m", node)))
        total = sum(w for w, _ in pools)
        if not total:
            return None
        pick = rng.randrange(total)
        for w, ref in pools:
            if pick < w:
                if ref[0] == "c":
                    C = ref[1]
                    return self._intra(C, pick + 1)
                if ref[0] == "m":
                    return ("m", ref[1].edge_id)
                _, bi, off = ref
                return ("s", bi, off, pick + 1, self.small.epoch_of(bi))
            pick -= w
        raise AssertionError("unreachable")

    def sample_vertex_corner(self, rng):
        """Random corner usable as a link endpoint."""
        isos = []
        for bi in range(len(self.small.blocks)):
            ep = self.small.epoch_of(bi)
            for off, nbits in self.small.trees_in_block(bi):
                if nbits == 2:
                    isos.append(("iso", bi, off, ep))
        edge = self.sample_edge(rng)
        if edge is not None and (not isos or rng.random() < 0.8):
            return ("after", edge)
        if isos:
            return ("at", isos[rng.randrange(len(isos))])
        return ("after", edge) if edge is not None else None

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------

    MAGIC = b"CETF"
    VERSION = 1

    def to_bytes(self) -> bytes:
        out = bytearray()
        out += self.MAGIC
        out += struct.pack("<I", self.VERSION)
        p = self.params
        out += struct.pack(
            "<QQdBQQQQ",
            self.n_live,
            self.n_anchor,
            p.epsilon,
            0 if p.mode == "bounded" else 1,
            p.d or 0,
            p.lower,
            p.B,
            p.small_limit,
        )
        cids = sorted(self.clusters)
        cid_map = {cid: i for i, cid in enumerate(cids)}
        eids = sorted(self._macro_reg)
        eid_map = {eid: i for i, eid in enumerate(eids)}
        out += struct.pack("<Q", len(cids))
        for cid in cids:
            C = self.clusters[cid]
            out += struct.pack("<Q", C.n)
            bp_bytes = C.bp.bv.bits.to_bytes((C.bp.bv.length + 7) // 8 or 1, "little")
            out += struct.pack("<Q", C.bp.bv.length) + bp_bytes
            if C.ports is None:
                out += struct.pack("<Q", 0)
            else:
                pb = C.ports.bits.to_bytes((C.ports.length + 7) // 8 or 1, "little")
                out += struct.pack("<Q", C.ports.length) + pb
            out += struct.pack("<Q", len(C.port_keys))
            for node in C.port_keys:
                out += struct.pack("<Q", eid_map[node.edge_id])
        tours = sorted(
            (t for t in self.macro.tours if t.alive and not t.is_empty),
            key=lambda t: min(eid_map[x.edge_id] for x in t.edges()),
        )
        out += struct.pack("<Q", len(tours))
        for tour in tours:
            edges = tour.edges()
            out += struct.pack("<Q", len(edges))
            for x in edges:
                out += struct.pack(
                    "<QQBQ",
                    eid_map[x.edge_id],
                    eid_map[x.reverse.edge_id],
                    x.true_flag,
                    x.weight,
                )
        singles = sorted(
            (rec for rec in self.trees.values() if rec.kind == "single"),
            key=lambda r: cid_map[r.ref.cid],
        )
        out += struct.pack("<Q", len(singles))
        for rec in singles:
            out += struct.pack("<Q", cid_map[rec.ref.cid])
        out += struct.pack("<QQ", self.small.cap, len(self.small.blocks))
        for b in self.small.blocks:
            bb = b.bits.to_bytes((b.used + 7) // 8 or 1, "little")
            out += struct.pack("<Q", b.used) + bb
        fingers = sorted(self.fingers.items())
        out += struct.pack("<Q", len(fingers))
        for fid, h in fingers:
            enc = self._encode_handle(h, cid_map, eid_map)
            out += struct.pack("<Q", fid) + enc
        return bytes(out)

    @staticmethod
    def _encode_handle(h, cid_map, eid_map):
        kind = h[0]
        if kind == "i":
            return struct.pack("<BQQ", 0, cid_map[h[1]], h[2])
        if kind == "m":
            return struct.pack("<BQQ", 1, eid_map[h[1]], 0)
        if kind == "s":
            return struct.pack("<BQQQ", 2, h[1], h[2], h[3])
        if kind == "iso":
            return struct.pack("<BQQ", 3, h[1], h[2])
        raise ForestError(f"cannot serialize handle {h!r}")

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "CompactForest":
        view = memoryview(data)
        if bytes(view[:4]) != cls.MAGIC:
            raise ForestError("bad magic")
        (version,) = struct.unpack_from("<I", view, 4)
        if version != cls.VERSION:
            raise ForestError(f"unsupported version {version}")
        pos = 8
        n_live, n_anchor, eps, mode_b, d, lower, B, small_limit = struct.unpack_from(
            "<QQdBQQQQ", view, pos
        )
        pos += struct.calcsize("<QQdBQQQQ")
        params = ForestParams.explicit(
            n_live,
            lower,
            B,
            mode="bounded" if mode_b == 0 else "unbounded",
            d=d or None,
            small_limit=small_limit,
            epsilon=eps,
        )
        forest = cls(params)
        forest.n_live = n_live
        forest.n_anchor = n_anchor

        def read_q():
            nonlocal pos
            (x,) = struct.unpack_from("<Q", view, pos)
            pos += 8
            return x

        ncl = read_q()
        port_refs = []
        for cid in range(ncl):
            n = read_q()
            bl = read_q()
            nb = (bl + 7) // 8 or 1
            bp_bits = int.from_bytes(bytes(view[pos : pos + nb]), "little")
            pos += nb
            pl = read_q()
            ports = None
            if pl:
                nb = (pl + 7) // 8 or 1
                pbits = int.from_bytes(bytes(view[pos : pos + nb]), "little")
                pos += nb
                ports = Bitvector(pbits, pl)
            pk = read_q()
            refs = [read_q() for _ in range(pk)]
            C = Cluster(BalancedParens(Bitvector(bp_bits, bl)), ports, n, [])
            C.cid = cid
            C.epoch = cid
            forest.clusters[cid] = C
            port_refs.append(refs)
        forest._next_cid = ncl
        forest._epoch = ncl

        ntours = read_q()
        nodes = {}
        tours_edges = []
        for _ in range(ntours):
            ne = read_q()
            seq = []
            for _ in range(ne):
                eid, rid, true_flag, weight = struct.unpack_from("<QQBQ", view, pos)
                pos += struct.calcsize("<QQBQ")
                node = forest.macro.new_edge(bool(true_flag), weight, edge_id=eid)
                nodes[eid] = node
                forest._register_node(node)
                seq.append((node, rid))
            tours_edges.append(seq)
        forest.macro._next_id = (max(nodes) + 1) if nodes else 0
        from .macro_tree import _build_treap

        for seq in tours_edges:
            chain = [node for node, _ in seq]
            for i, (node, rid) in enumerate(seq):
                node.reverse = nodes[rid]
                node.succ = chain[(i + 1) % len(chain)]
                node.pred = chain[(i - 1) % len(chain)]
            root = _build_treap(chain, forest.macro._rng)
            tour = MacroTour(root)
            forest.macro.tours.add(tour)
            forest._register_macro(tour)
        for cid, refs in enumerate(port_refs):
            C = forest.clusters[cid]
            C.port_keys = [nodes[r] for r in refs]
            for k, node in enumerate(C.port_keys, start=1):
                node.tail_cluster = C
                node.tail_rank = k

        nsingle = read_q()
        for _ in range(nsingle):
            cid = read_q()
            forest._register_single(forest.clusters[cid])

        cap = read_q()
        nblocks = read_q()
        forest.small = SmallStore(cap)
        for bi in range(nblocks):
            used = read_q()
            nb = (used + 7) // 8 or 1
            bits = int.from_bytes(bytes(view[pos : pos + nb]), "little")
            pos += nb
            blk = _Block(bi + 1)
            blk.bits = bits
            blk.used = used
            forest.small.blocks.append(blk)
        forest.small._epoch = nblocks

        nf = read_q()
        for _ in range(nf):
            fid = read_q()
            (kind,) = struct.unpack_from("<B", view, pos)
            pos += 1
            if kind == 0:
                a, b = struct.unpack_from("<QQ", view, pos)
                pos += 16
                h = ("i", a, b, forest.clusters[a].epoch)
            elif kind == 1:
                a, _b = struct.unpack_from("<QQ", view, pos)
                pos += 16
                h = ("m", a)
            elif kind == 2:
                a, b, c = struct.unpack_from("<QQQ", view, pos)
                pos += 24
                h = ("s", a, b, c, forest.small.epoch_of(a))
            else:
                a, b = struct.unpack_from("<QQ", view, pos)
                pos += 16
                h = ("iso", a, b, forest.small.epoch_of(a))
            forest.fingers[fid] = h
            forest._next_fid = max(forest._next_fid, fid)
        return forest

    @classmethod
    def load(cls, path) -> "CompactForest":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
