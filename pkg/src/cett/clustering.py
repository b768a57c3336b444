"""Cluster decomposition: split each tree into bounded-size vertex groups.

Bounded mode keeps every cluster between lower = ceil(lg^(1+eps) n) and
B = d * lower + 1 vertices via centroid recursion.  Unbounded mode sets
B = 3 * lower and additionally splits high-degree vertices into clone
pairs joined by zero-width false edges, keeping clusters in [B/3, B].

The decomposition works on rotation dictionaries (label -> ccw neighbor
list) and preserves the embedding: every split happens at explicit corners
of a rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegreeLimitError, ForestError


@dataclass(frozen=True)
class ForestParams:
    """Size thresholds governing clustering and the small-tree store."""

    n: int
    epsilon: float
    mode: str  # "bounded" | "unbounded"
    d: int | None
    lower: int
    B: int
    small_limit: int

    @classmethod
    def derive(cls, n: int, epsilon: float = 1.0, mode: str = "bounded", d=None):
        if mode not in ("bounded", "unbounded"):
            raise ValueError(f"unknown mode {mode!r}")
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        lg = math.log2(max(n, 2))
        lower = max(2, math.ceil(lg ** (1.0 + epsilon)))
        if mode == "bounded":
            if d is None:
                raise ValueError("bounded mode needs a degree bound")
            d = max(2, int(d))
            B = d * lower + 1
        else:
            d = None
            B = 3 * lower
        small_limit = max(2, math.ceil(lg))
        return cls(n, epsilon, mode, d, lower, B, small_limit)

    @classmethod
    def explicit(cls, n, lower, B, mode="bounded", d=None, small_limit=2, epsilon=1.0):
        """Direct thresholds, for fixtures that replay hand-drawn partitions."""
        return cls(n, epsilon, mode, d, lower, B, small_limit)

    def with_n(self, n: int) -> "ForestParams":
        return ForestParams.derive(n, self.epsilon, self.mode, self.d)


class PartitionResult:
    """Output of a decomposition over one tree."""

    __slots__ = ("clusters", "cluster_of", "inter_edges", "rotations", "clone_of")

    def __init__(self, clusters, cluster_of, inter_edges, rotations, clone_of):
        self.clusters = clusters          # list of vertex-label lists
        self.cluster_of = cluster_of      # label -> cluster index
        self.inter_edges = inter_edges    # (u, v, is_true) in creation order
        self.rotations = rotations        # expanded tree: label -> ccw labels
        self.clone_of = clone_of          # clone label -> original label

    @property
    def false_edge_count(self) -> int:
        return sum(1 for _, _, true in self.inter_edges if not true)


def _component(adj, start):
    seen = {start}
    out = [start]
    q = [start]
    while q:
        x = q.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                out.append(y)
                q.append(y)
    return out


def _subtree_sizes(adj, root, real=None):
    """Weighted subtree sizes rooted at root; vertices outside ``real``
    (when given) count zero.  Returns (sizes, parent, dfs_order)."""
    sizes = {}
    parent = {root: None}
    order = []
    stack = [(root, False)]
    while stack:
        v, done = stack.pop()
        if done:
            own = 1 if real is None or v in real else 0
            sizes[v] = own + sum(sizes[w] for w in adj[v] if w != parent[v])
            continue
        order.append(v)
        stack.append((v, True))
        for w in reversed(adj[v]):
            if w != parent[v]:
                parent[w] = v
                stack.append((w, False))
    return sizes, parent, order


def find_centroid(adj, component=None, real=None):
    """('edge', (u, v)) or ('vertex', v): removal leaves pieces of (real)
    size at most half.  Edge centroids win; ties break at the lowest DFS
    index."""
    if component is None:
        component = _component(adj, min(adj))
    root = min(component)
    sizes, parent, order = _subtree_sizes(adj, root, real)
    n = sizes[root]
    half = n / 2
    for v in order:
        if parent[v] is not None and sizes[v] > 0 and sizes[v] * 2 == n:
            return ("edge", (parent[v], v))
    for v in order:
        if real is not None and v not in real:
            continue
        top = n - sizes[v]
        if top <= half and all(
            sizes[w] <= half for w in adj[v] if w != parent[v]
        ):
            return ("vertex", v)
    raise ForestError("component without a centroid; corrupt adjacency")


def _cut(adj, u, v):
    adj[u].remove(v)
    adj[v].remove(u)


class _Decomposer:
    def __init__(self, rotations, params: ForestParams, real=None):
        self.params = params
        # working adjacency loses an edge per split; rotations stay whole
        self.work = {v: list(r) for v, r in rotations.items()}
        self.rotations = {v: list(r) for v, r in rotations.items()}
        self.real = real
        self.clusters = []
        self.inter_edges = []
        self.clone_of = {}
        self.next_label = max(rotations) + 1 if rotations else 0

    def run(self, mode):
        if mode == "bounded" and self.params.d is not None:
            d = self.params.d
            for v, r in self.work.items():
                if len(r) > d:
                    raise DegreeLimitError(
                        f"vertex {v} has degree {len(r)} > bound {d}"
                    )
        frames = [min(self.work)] if self.work else []
        while frames:
            rep = frames.pop()
            comp = _component(self.work, rep)
            n_s = (
                len(comp)
                if self.real is None
                else sum(1 for x in comp if x in self.real)
            )
            if n_s <= self.params.B:
                self.clusters.append(comp)
                continue
            kind, site = find_centroid(self.work, comp, self.real)
            if kind == "edge":
                u, v = site
                _cut(self.work, u, v)
                self.inter_edges.append((u, v, True))
                frames += [u, v]
                continue
            v = site
            if mode == "bounded":
                w = self._largest_component_root(v)
                _cut(self.work, v, w)
                self.inter_edges.append((v, w, True))
                frames += [v, w]
            else:
                frames += self._unbounded_vertex_case(v, n_s)
        cluster_of = {}
        for i, members in enumerate(self.clusters):
            for x in members:
                cluster_of[x] = i
        return PartitionResult(
            self.clusters, cluster_of, self.inter_edges, self.rotations, self.clone_of
        )

    def _largest_component_root(self, v):
        best = None
        best_size = -1
        for w in self.work[v]:
            s = self._side_size(w, v)
            if s > best_size:
                best, best_size = w, s
        return best

    def _side_size(self, w, avoid):
        seen = {avoid, w}
        q = [w]
        count = 1 if self.real is None or w in self.real else 0
        while q:
            x = q.pop()
            for y in self.work[x]:
                if y not in seen:
                    seen.add(y)
                    if self.real is None or y in self.real:
                        count += 1
                    q.append(y)
        return count

    def _unbounded_vertex_case(self, v, n_s):
        third = self.params.B // 3
        nbrs = list(self.work[v])
        sizes = [self._side_size(w, v) for w in nbrs]
        big = max(sizes)
        if big >= third:
            w = nbrs[sizes.index(big)]
            _cut(self.work, v, w)
            self.inter_edges.append((v, w, True))
            return [v, w]
        # all pieces small: split v into clones around the most balanced corner
        total = n_s - 1
        best_j, best_gap = None, None
        pre = 0
        for j in range(1, len(nbrs)):
            pre += sizes[j - 1]
            gap = abs(pre - (total - pre))
            if best_gap is None or gap < best_gap:
                best_j, best_gap = j, gap
        j = best_j
        v2 = self.next_label
        self.next_label += 1
        self.clone_of[v2] = self.clone_of.get(v, v)
        if self.real is not None:
            self.real.add(v2)
        # split the FULL rotation at the corners after nbrs[j-1] and after
        # nbrs[-1]; stubs of already-severed edges ride with their arc
        full = self.rotations[v]
        i_j = full.index(nbrs[j - 1])
        i_d = full.index(nbrs[-1])
        if i_j <= i_d:
            arc_move = full[i_j + 1 : i_d + 1]
            arc_keep = full[i_d + 1 :] + full[: i_j + 1]
        else:
            arc_move = full[i_j + 1 :] + full[: i_d + 1]
            arc_keep = full[i_d + 1 : i_j + 1]
        moved = set(arc_move)
        self.rotations[v] = arc_keep + [v2]
        self.rotations[v2] = [v] + arc_move
        for w in arc_move:
            self.rotations[w] = [v2 if x == v else x for x in self.rotations[w]]
        self.work[v] = nbrs[:j]
        self.work[v2] = nbrs[j:]
        for w in nbrs[j:]:
            self.work[w] = [v2 if x == v else x for x in self.work[w]]
        self.inter_edges = [
            (v2 if a == v and b in moved else a, v2 if b == v and a in moved else b, t)
            for a, b, t in self.inter_edges
        ]
        self.inter_edges.append((v, v2, False))
        return [v, v2]


def decompose_bounded(rotations, params: ForestParams) -> PartitionResult:
    """Centroid recursion; every final cluster has at most B vertices and,
    when its tree needed splitting at all, at least ``lower``."""
    return _Decomposer(rotations, params).run("bounded")


def decompose_unbounded(rotations, params: ForestParams) -> PartitionResult:
    """Arbitrary-degree variant: vertex splits keep pieces balanced, so
    clusters land in [B/3, B] whenever the tree has at least B vertices."""
    return _Decomposer(rotations, params).run("unbounded")


def decompose(rotations, params: ForestParams, real=None) -> PartitionResult:
    """Mode dispatch; ``real`` marks the weight-one labels (phantom port
    stubs ride through with weight zero)."""
    return _Decomposer(rotations, params, real).run(params.mode)


# -- corner weights over an expanded partition ---------------------------------


def corner_weights(result: PartitionResult, cluster_index: int):
    """Cyclic intra-cluster step counts between the inter-cluster edges
    incident to one cluster, walking the expanded tree's tour."""
    rot = result.rotations
    members = [v for v in result.clusters[cluster_index]]
    cluster_of = result.cluster_of
    start = None
    for v in sorted(members):
        for w in rot[v]:
            if cluster_of[w] != cluster_index:
                start = (v, w)
                break
        if start:
            break
    if start is None:
        v0 = min(members)
        if not rot[v0]:
            return []
        steps = 0
        e = (v0, rot[v0][0])
        cur = e
        while True:
            steps += 1
            cur = _walk_successor(rot, cur)
            if cur == e:
                return [steps]
    weights = []
    run = 0
    counting = False
    cur = _walk_successor(rot, start)
    while True:
        tail_in = cluster_of[cur[0]] == cluster_index
        head_in = cluster_of[cur[1]] == cluster_index
        if tail_in and head_in:
            if counting:
                run += 1
        elif head_in:
            counting = True
            run = 0
        elif tail_in:
            if counting:
                weights.append(run)
            counting = False
        if cur == start:
            return weights
        cur = _walk_successor(rot, cur)


def _walk_successor(rot, e):
    u, v = e
    r = rot[v]
    return (v, r[(r.index(u) + 1) % len(r)])


def audit_partition(result: PartitionResult, params: ForestParams, tree_size: int):
    """Raise unless every size bound holds; returns the size list."""
    sizes = [len(c) for c in result.clusters]
    if sum(sizes) != len(result.rotations):
        raise ForestError("partition loses or duplicates vertices")
    if params.mode == "bounded":
        lo = params.lower if tree_size > params.lower else 1
    else:
        lo = params.B // 3 if tree_size >= params.B else 1
    for s in sizes:
        if s > params.B or (len(sizes) > 1 and s < lo):
            raise ForestError(f"cluster size {s} outside [{lo}, {params.B}]")
    for u, v, true in result.inter_edges:
        if not true:
            ou = result.clone_of.get(u, u)
            ov = result.clone_of.get(v, v)
            if ou != ov:
                raise ForestError("false edge joins clones of distinct vertices")
    return sizes
