"""Reference model: explicit embedded forests and their Euler tours.

Every vertex stores its neighbors in counter-clockwise order, which fixes
the planar embedding.  All operations are plain scans; this module is the
ground truth the compact structure is checked against, so clarity wins
over speed everywhere.
"""

from __future__ import annotations

from .errors import (
    CycleError,
    ForestError,
    InvalidHandleError,
    NotConnectedError,
    NotIsolatedError,
)

# A directed edge is a plain (tail, head) tuple.  A corner is addressed as
# ("after", u, v) meaning the gap that follows the directed edge (u, v) at
# its head, or ("at", u) for the sole corner of an isolated vertex.


def reverse_edge(e):
    return (e[1], e[0])


class EmbeddedForest:
    """Mutable embedded forest over integer vertex ids.

    Removed vertices leave tombstones so ids stay stable across a trace.
    """

    def __init__(self, rotations, validate: bool = True):
        self._rot = [list(r) for r in rotations]
        self._alive = [True] * len(self._rot)
        self._pos = [self._index(r) for r in self._rot]
        if validate:
            self.validate()

    @staticmethod
    def _index(rotation):
        return {w: i for i, w in enumerate(rotation)}

    # -- construction --------------------------------------------------------

    @classmethod
    def from_edges(cls, n: int, edges) -> "EmbeddedForest":
        """Build with rotation order = insertion order of the edge list."""
        rot = [[] for _ in range(n)]
        for u, v in edges:
            rot[u].append(v)
            rot[v].append(u)
        return cls(rot)

    @classmethod
    def from_text(cls, text: str) -> "EmbeddedForest":
        from .errors import TraceSyntaxError

        lines = text.splitlines()
        header = None
        rot = None
        n = 0
        for ln, raw in enumerate(lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if header is None:
                parts = line.split()
                if len(parts) != 2 or parts[0] != "forest" or not parts[1].isdigit():
                    raise TraceSyntaxError("expected 'forest <n>' header", ln)
                n = int(parts[1])
                rot = [None] * n
                header = ln
                continue
            head, _, rest = line.partition(":")
            try:
                v = int(head)
            except ValueError:
                raise TraceSyntaxError(f"bad vertex id {head!r}", ln) from None
            if v < 0 or v >= n:
                raise TraceSyntaxError(f"vertex {v} out of range", ln)
            if rot[v] is not None:
                raise TraceSyntaxError(f"duplicate rotation for {v}", ln)
            rot[v] = [int(tok) for tok in rest.split()]
        if header is None:
            raise TraceSyntaxError("missing 'forest <n>' header", None)
        rot = [r if r is not None else [] for r in rot]
        return cls(rot)

    def to_text(self) -> str:
        if not all(self._alive):
            raise ForestError("text form requires a tombstone-free forest")
        out = [f"forest {len(self._rot)}"]
        for v, r in enumerate(self._rot):
            nbrs = " ".join(map(str, r))
            out.append(f"{v}: {nbrs}".rstrip())
        return "\n".join(out) + "\n"

    # -- basic accessors ------------------------------------------------------

    @property
    def vertex_count(self) -> int:
        return sum(self._alive)

    def vertices(self):
        return [v for v in range(len(self._rot)) if self._alive[v]]

    def is_alive(self, v: int) -> bool:
        return 0 <= v < len(self._rot) and self._alive[v]

    def rotation(self, v: int):
        return tuple(self._rot[v])

    def degree(self, v: int) -> int:
        return len(self._rot[v])

    def has_edge(self, e) -> bool:
        u, v = e
        return (
            self.is_alive(u)
            and self.is_alive(v)
            and u in self._pos[v]
            and v in self._pos[u]
        )

    def directed_edges(self):
        for u in self.vertices():
            for v in self._rot[u]:
                yield (u, v)

    def validate(self):
        """Check edge symmetry and acyclicity of every component."""
        for u in self.vertices():
            seen = set()
            for v in self._rot[u]:
                if not self.is_alive(v):
                    raise ForestError(f"edge {u}-{v} points at a dead vertex")
                if v in seen or v == u:
                    raise ForestError(f"rotation of {u} repeats neighbor {v}")
                seen.add(v)
                if u not in self._pos[v]:
                    raise ForestError(f"edge {u}-{v} lacks its mirror entry")
        visited = set()
        for root in self.vertices():
            if root in visited:
                continue
            comp, edges = [root], 0
            visited.add(root)
            queue = [root]
            while queue:
                x = queue.pop()
                edges += len(self._rot[x])
                for y in self._rot[x]:
                    if y not in visited:
                        visited.add(y)
                        comp.append(y)
                        queue.append(y)
            if edges != 2 * (len(comp) - 1):
                raise ForestError("component is not a tree")

    # -- tours -----------------------------------------------------------------

    def _check_edge(self, e):
        if not self.has_edge(e):
            raise InvalidHandleError(f"unknown edge {e!r}")

    def tour_successor(self, e):
        """Next directed edge of the Euler tour: rotate at the head."""
        self._check_edge(e)
        u, v = e
        rot = self._rot[v]
        i = self._pos[v][u]
        return (v, rot[(i + 1) % len(rot)])

    def tour_predecessor(self, e):
        self._check_edge(e)
        u, v = e
        rot = self._rot[u]
        i = self._pos[u][v]
        return (rot[(i - 1) % len(rot)], u)

    def rotation_successor(self, e):
        """Counter-clockwise successor among edges leaving tail(e)."""
        return self.tour_successor(reverse_edge(e))

    def rotation_predecessor(self, e):
        return reverse_edge(self.tour_predecessor(e))

    def euler_tour(self, e):
        """Full cyclic tour starting at e, as a list of directed edges."""
        self._check_edge(e)
        out = [e]
        cur = self.tour_successor(e)
        while cur != e:
            out.append(cur)
            cur = self.tour_successor(cur)
        return out

    def tour_jump(self, e, t: int):
        """Edge t successor steps after e (t may exceed the tour length)."""
        self._check_edge(e)
        if t == 0:
            return e
        # walk once to learn the length only when t is large
        cur = e
        steps = 0
        while steps < t:
            cur = self.tour_successor(cur)
            steps += 1
            if cur == e and steps <= t:
                t %= steps
                steps = 0
                if t == 0:
                    return e
        return cur

    def tour_distance(self, e, e2) -> int:
        """Crossings strictly between e and e2 along the tour (0 for e == e2)."""
        self._check_edge(e)
        self._check_edge(e2)
        if e == e2:
            return 0
        cur = self.tour_successor(e)
        d = 0
        while cur != e2:
            cur = self.tour_successor(cur)
            d += 1
            if cur == e and d:
                raise NotConnectedError(f"{e2!r} not on the tour of {e!r}")
        return d

    def side_sizes(self, e):
        """Vertex counts of the two components e separates: (head side, tail side)."""
        self._check_edge(e)
        u, v = e
        seen = {u, v}
        queue = [v]
        count = 1
        while queue:
            x = queue.pop()
            for y in self._rot[x]:
                if y not in seen:
                    seen.add(y)
                    count += 1
                    queue.append(y)
        total = len(self.component_of(u))
        return (count, total - count)

    def component_of(self, v: int):
        seen = {v}
        queue = [v]
        while queue:
            x = queue.pop()
            for y in self._rot[x]:
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        return seen

    def same_tree(self, u: int, v: int) -> bool:
        return v in self.component_of(u)

    # -- corners and updates -----------------------------------------------------

    def _corner_vertex(self, corner) -> int:
        if corner[0] == "after":
            e = (corner[1], corner[2])
            self._check_edge(e)
            return e[1]
        if corner[0] == "at":
            v = corner[1]
            if not self.is_alive(v):
                raise InvalidHandleError(f"unknown vertex {v}")
            if self.degree(v):
                raise InvalidHandleError(f"vertex {v} is not isolated")
            return v
        raise InvalidHandleError(f"bad corner {corner!r}")

    def link(self, c1, c2):
        """Insert an edge bisecting the two corners; returns the new edge
        directed from c1's vertex to c2's."""
        x = self._corner_vertex(c1)
        y = self._corner_vertex(c2)
        if self.same_tree(x, y):
            raise CycleError(f"{x} and {y} are already connected")
        self._insert_at_corner(c1, y)
        self._insert_at_corner(c2, x)
        return (x, y)

    def _insert_at_corner(self, corner, nbr: int):
        if corner[0] == "at":
            v = corner[1]
            self._rot[v].append(nbr)
        else:
            _, a, v = corner
            self._rot[v].insert(self._pos[v][a] + 1, nbr)
        self._pos[v] = self._index(self._rot[v])

    def cut(self, e):
        """Delete the undirected edge behind e."""
        self._check_edge(e)
        u, v = e
        self._rot[u].remove(v)
        self._rot[v].remove(u)
        self._pos[u] = self._index(self._rot[u])
        self._pos[v] = self._index(self._rot[v])

    def add_vertex(self) -> int:
        self._rot.append([])
        self._alive.append(True)
        self._pos.append({})
        return len(self._rot) - 1

    def remove_vertex(self, v: int):
        if not self.is_alive(v):
            raise InvalidHandleError(f"unknown vertex {v}")
        if self.degree(v):
            raise NotIsolatedError(f"vertex {v} still has edges")
        self._alive[v] = False
        self._rot[v] = []
        self._pos[v] = {}

    # -- cluster views --------------------------------------------------------

    def corner_weights_around(self, partition, cluster):
        """Cyclic intra-cluster step counts between the inter-cluster edges
        incident to ``cluster``, in tour order.

        ``partition`` maps vertex id -> cluster id for every vertex of the
        host tree.  Entering/leaving crossings do not count.
        """
        members = [v for v in self.vertices() if partition.get(v) == cluster]
        if not members:
            raise ForestError(f"cluster {cluster!r} has no vertices")
        for v in self.component_of(members[0]):
            if v not in partition:
                raise ForestError(f"vertex {v} is not assigned to any cluster")
        start = None
        for v in members:
            for w in self._rot[v]:
                if partition[w] != cluster:
                    start = (v, w)
                    break
            if start:
                break
        if start is None:
            # portless: the whole walk is one implicit corner
            e0 = (members[0], self._rot[members[0]][0]) if self._rot[members[0]] else None
            return [len(self.euler_tour(e0))] if e0 else []
        # start on a leaving edge so each enter..leave run closes in order
        tour = self.euler_tour(start)
        weights = []
        run = 0
        counting = False
        for e in tour[1:] + [start]:
            tail_in = partition[e[0]] == cluster
            head_in = partition[e[1]] == cluster
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
        return weights
