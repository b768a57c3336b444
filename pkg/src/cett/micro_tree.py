"""Per-cluster succinct storage: parenthesis tree plus ports bitvector.

A cluster of n_C vertices keeps its rooted shape as 2 n_C parenthesis bits.
Walking the tree depth-first takes 2(n_C - 1) steps (one per directed
intra-cluster edge); the ports bitvector lists those steps as 0s, in order,
with a 1 wherever an edge to another cluster is passed.  Read cyclically
the bitvector is the cluster's own Euler tour, and the 0-runs between 1s
are the corner weights of the surrounding macro tour.

Step ranks are 1-based; step rank r sits at parenthesis position r, because
the root's opening bit occupies position 0.  A portless cluster stores no
ports bitvector at all (it would be all zeros).
"""

from __future__ import annotations

from .errors import ClusterSizeError, InvalidHandleError
from .succinct import BalancedParens, Bitvector

# Fragment form consumed by the builder: {label: [entry, ...]} where an
# entry is ("v", neighbor_label) or ("p", port_key) in ccw rotation order.
V = "v"
P = "p"


class Cluster:
    """Succinct micro-tree; immutable once built."""

    __slots__ = (
        "bp",
        "ports",
        "n",
        "port_keys",
        "cid",
        "epoch",
        "tree",
    )

    def __init__(self, bp: BalancedParens, ports, n: int, port_keys):
        self.bp = bp
        self.ports = ports
        self.n = n
        self.port_keys = port_keys
        self.cid = None
        self.epoch = None
        self.tree = None

    # -- geometry -------------------------------------------------------------

    @property
    def zeros(self) -> int:
        """Number of tour steps: 2 (n_C - 1)."""
        return 2 * (self.n - 1)

    @property
    def port_count(self) -> int:
        return len(self.port_keys)

    @property
    def cyclic_length(self) -> int:
        return self.zeros + self.port_count

    def step_pos(self, r: int) -> int:
        """Position of step r in the cyclic ports sequence."""
        if r < 1 or r > self.zeros:
            raise InvalidHandleError(f"step rank {r} out of range 1..{self.zeros}")
        return self.ports.select0(r) if self.ports is not None else r - 1

    def port_pos(self, k: int) -> int:
        if k < 1 or k > self.port_count:
            raise InvalidHandleError(f"port rank {k} out of range")
        return self.ports.select1(k)

    def rank_at(self, pos: int):
        """('step', rank) or ('port', rank) for a cyclic position."""
        if self.ports is None:
            return ("step", pos + 1)
        if self.ports.bit(pos):
            return ("port", self.ports.rank1(pos + 1))
        return ("step", self.ports.rank0(pos + 1))

    def is_down_step(self, r: int) -> bool:
        return self.bp.is_open(r)

    def reverse_step(self, r: int) -> int:
        """Step crossing the same edge the other way."""
        if r < 1 or r > self.zeros:
            raise InvalidHandleError(f"step rank {r} out of range")
        return self.bp.match(r)

    def tail_open(self, r: int) -> int:
        """Open position of the vertex a step leaves."""
        if self.bp.is_open(r):
            p = self.bp.enclose(r)
            return 0 if p is None else p
        return self.bp.find_open(r)

    def head_open(self, r: int) -> int:
        """Open position of the vertex a step enters."""
        if self.bp.is_open(r):
            return r
        p = self.bp.enclose(self.bp.find_open(r))
        return 0 if p is None else p

    # -- tour movement ----------------------------------------------------------

    def local_step(self, r: int, direction: str = "fwd"):
        """One Euler move inside the cluster: the next (or previous) step,
        or the port crossed first."""
        pos = self.step_pos(r)
        L = self.cyclic_length
        if direction == "fwd":
            q = pos + 1 if pos + 1 < L else 0
        elif direction == "back":
            q = pos - 1 if pos else L - 1
        else:
            raise ValueError(f"bad direction {direction!r}")
        return self.rank_at(q)

    def after_port(self, k: int, direction: str = "fwd"):
        """Event adjacent to port k: what follows (or precedes) its moment."""
        pos = self.port_pos(k)
        L = self.cyclic_length
        q = (pos + 1) % L if direction == "fwd" else (pos - 1) % L
        return self.rank_at(q)

    def steps_to_port(self, r: int, direction: str = "fwd"):
        """Nearest port in tour order and the step count before it; None for
        a portless cluster."""
        if self.ports is None:
            return None
        pos = self.step_pos(r)
        Pn = self.port_count
        if direction == "fwd":
            ones = self.ports.rank1(pos + 1)
            if ones < Pn:
                k = ones + 1
                count = self.ports.rank0(self.ports.select1(k)) - r
            else:
                k = 1
                count = (self.zeros - r) + self.ports.rank0(self.ports.select1(1))
        elif direction == "back":
            ones = self.ports.rank1(pos)
            if ones >= 1:
                k = ones
                count = (r - 1) - self.ports.rank0(self.ports.select1(k))
            else:
                k = Pn
                count = (r - 1) + (self.zeros - self.ports.rank0(self.ports.select1(Pn)))
        else:
            raise ValueError(f"bad direction {direction!r}")
        return (k, count)

    def steps_between(self, r1: int, r2: int) -> int:
        """Steps strictly between two steps going forward, provided no port
        interrupts; None when a port lies between."""
        if r1 == r2:
            return 0
        p1, p2 = self.step_pos(r1), self.step_pos(r2)
        if self.ports is not None:
            ones = (
                self.ports.rank1(p2) - self.ports.rank1(p1 + 1)
                if p1 < p2
                else self.ports.rank1(self.cyclic_length)
                - self.ports.rank1(p1 + 1)
                + self.ports.rank1(p2)
            )
            if ones:
                return None
        return (r2 - r1 - 1) % self.zeros

    def step_ahead(self, r: int, t: int) -> int:
        """Step rank t steps after r, ignoring ports (caller guarantees the
        walk stays inside)."""
        return (r - 1 + t) % self.zeros + 1

    def run_after_port(self, k: int) -> int:
        """Length of the 0-run following port k, cyclically: the corner
        weight of the macro edge arriving at this port."""
        pos = self.port_pos(k)
        if k < self.port_count:
            nxt = self.ports.select1(k + 1)
            return self.ports.rank0(nxt) - self.ports.rank0(pos)
        return (self.zeros - self.ports.rank0(pos)) + self.ports.rank0(
            self.ports.select1(1)
        )

    def cyclic_runs(self):
        """All 0-runs between consecutive 1s, starting after port 1."""
        return [self.run_after_port(k) for k in range(1, self.port_count + 1)]

    # -- rotation -----------------------------------------------------------------

    def enumerate_incident(self, r: int):
        """Full ccw rotation at the vertex step r leaves, starting with r:
        a list of ('step', out_rank) and ('port', rank) entries."""
        out = [("step", r)]
        L = self.cyclic_length
        pos = self.step_pos(self.reverse_step(r))
        while True:
            pos = pos + 1 if pos + 1 < L else 0
            kind, rank = self.rank_at(pos)
            if kind == "step":
                if rank == r:
                    return out
                out.append((kind, rank))
                pos = self.step_pos(self.reverse_step(rank))
            else:
                out.append((kind, rank))
                pos = self.port_pos(rank)


class BuildResult:
    """Cluster plus the transient label bookkeeping the caller needs."""

    __slots__ = ("cluster", "step_of_edge", "edge_of_step", "order", "port_keys")

    def __init__(self, cluster, step_of_edge, edge_of_step, order, port_keys):
        self.cluster = cluster
        self.step_of_edge = step_of_edge
        self.edge_of_step = edge_of_step
        self.order = order
        self.port_keys = port_keys


def build_cluster(fragment, root, start_index: int = 0, max_size=None) -> BuildResult:
    """Encode a connected fragment rooted at ``root``, walking its rotation
    from ``start_index``.  Port entries become 1s at the moments the walk
    passes them."""
    n = len(fragment)
    if max_size is not None and n > max_size:
        raise ClusterSizeError(f"fragment of {n} vertices exceeds bound {max_size}")
    bp_chars = ["1"]
    ports_chars = []
    port_keys = []
    edge_of_step = [None]  # 1-based
    step_of_edge = {}
    order = [root]
    seen = {root}
    root_rot = fragment[root]
    # frame: [vertex, rotation, consumed, total, offset, parent]
    stack = [[root, root_rot, 0, len(root_rot), start_index, None]]
    while stack:
        frame = stack[-1]
        v, rot, k, total, offset, parent = frame
        if k == total:
            stack.pop()
            if parent is not None:
                bp_chars.append("0")
                ports_chars.append("0")
                step_of_edge[(v, parent)] = len(edge_of_step)
                edge_of_step.append((v, parent))
            else:
                bp_chars.append("0")
            continue
        entry = rot[(offset + k) % len(rot)]
        frame[2] += 1
        if entry[0] == P:
            ports_chars.append("1")
            port_keys.append(entry[1])
            continue
        w = entry[1]
        if w == parent and (v, w) not in step_of_edge or w == parent:
            # skip the arrival edge; it is closed when the frame pops
            if w == parent:
                continue
        if w in seen:
            raise ClusterSizeError(f"fragment revisits vertex {w!r}; not a tree")
        seen.add(w)
        bp_chars.append("1")
        ports_chars.append("0")
        step_of_edge[(v, w)] = len(edge_of_step)
        edge_of_step.append((v, w))
        order.append(w)
        wrot = fragment[w]
        arrival = None
        for i, e2 in enumerate(wrot):
            if e2[0] == V and e2[1] == v:
                arrival = i
                break
        if arrival is None:
            raise ClusterSizeError(f"rotation of {w!r} lacks its parent {v!r}")
        stack.append([w, wrot, 0, len(wrot) - 1, arrival + 1, v])
    if len(seen) != n:
        raise ClusterSizeError("fragment is disconnected")
    bp = BalancedParens(Bitvector.from_string("".join(bp_chars)))
    ports = Bitvector.from_string("".join(ports_chars)) if port_keys else None
    cluster = Cluster(bp, ports, n, port_keys)
    return BuildResult(cluster, step_of_edge, edge_of_step, order, port_keys)


def rebuild_cluster(fragment, root, start_index=0, max_size=None) -> BuildResult:
    """Wholesale re-encode; identical to build (vectors are never patched)."""
    return build_cluster(fragment, root, start_index, max_size)


def decode_cluster(cluster: Cluster):
    """Reconstruct a fragment from the bits.

    Labels are preorder numbers; port slots are ('p', port_rank).  Also
    returns edge_of_step (rank -> directed label pair) so callers can tag
    steps with their current handles.
    """
    bp = cluster.bp
    n = cluster.n
    rot = {0: []}
    edge_of_step = [None]
    stack = [0]
    next_label = 1
    zeros_seen = 0
    L = cluster.cyclic_length
    for pos in range(L):
        kind = (
            "port"
            if cluster.ports is not None and cluster.ports.bit(pos)
            else "step"
        )
        cur = stack[-1]
        if kind == "port":
            rot[cur].append((P, cluster.ports.rank1(pos + 1)))
            continue
        zeros_seen += 1
        r = zeros_seen
        if bp.is_open(r):
            child = next_label
            next_label += 1
            rot[cur].append((V, child))
            rot[child] = [(V, cur)]
            edge_of_step.append((cur, child))
            stack.append(child)
        else:
            stack.pop()
            parent = stack[-1]
            edge_of_step.append((cur, parent))
    return rot, edge_of_step
