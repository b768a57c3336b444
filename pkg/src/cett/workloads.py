"""Deterministic forest generators and fuzz-trace synthesis."""

from __future__ import annotations

import random

from .oracle import EmbeddedForest

KINDS = ("path", "star", "binary", "random", "three_arms")


def gen_forest(kind: str, n: int, seed: int = 0) -> EmbeddedForest:
    """Deterministic embedded forest of a named shape."""
    if n < 1:
        raise ValueError("need at least one vertex")
    if kind == "path":
        rot = [[w for w in (v - 1, v + 1) if 0 <= w < n] for v in range(n)]
    elif kind == "star":
        rot = [list(range(1, n))] + [[0] for _ in range(n - 1)]
    elif kind == "binary":
        rot = [[] for _ in range(n)]
        for v in range(1, n):
            p = (v - 1) // 2
            rot[p].append(v)
            rot[v].insert(0, p)
    elif kind == "random":
        rng = random.Random(seed)
        rot = [[] for _ in range(n)]
        for v in range(1, n):
            u = rng.randrange(v)
            rot[u].insert(rng.randrange(len(rot[u]) + 1), v)
            rot[v].append(u)
    elif kind == "three_arms":
        # a center with three near-equal chains hanging off it
        rot = [[] for _ in range(n)]
        q, r = divmod(n - 1, 3)
        lengths = [q + (1 if i < r else 0) for i in range(3)]
        nxt = 1
        for length in lengths:
            prev = 0
            for _ in range(length):
                v = nxt
                nxt += 1
                rot[prev].append(v)
                rot[v].append(prev)
                prev = v
    else:
        raise ValueError(f"unknown forest kind {kind!r}")
    return EmbeddedForest(rot)


DEFAULT_MIX = {
    "succ": 24,
    "pred": 24,
    "rot": 22,
    "dist": 4,
    "jump": 4,
    "sides": 3,
    "link": 6,
    "cut": 6,
    "addv": 1,
    "rmv": 1,
}


class _Components:
    """Component ids maintained across cuts and links (smaller-side
    relabel)."""

    def __init__(self, ef: EmbeddedForest):
        self.comp = {}
        self.members = {}
        next_c = 0
        seen = set()
        for v in ef.vertices():
            if v in seen:
                continue
            c = ef.component_of(v)
            seen |= c
            for x in c:
                self.comp[x] = next_c
            self.members[next_c] = set(c)
            next_c += 1
        self.next_c = next_c

    def add_vertex(self, v):
        self.comp[v] = self.next_c
        self.members[self.next_c] = {v}
        self.next_c += 1

    def remove_vertex(self, v):
        c = self.comp.pop(v)
        self.members[c].discard(v)
        if not self.members[c]:
            del self.members[c]

    def link(self, x, y):
        cx, cy = self.comp[x], self.comp[y]
        if len(self.members[cx]) < len(self.members[cy]):
            cx, cy = cy, cx
        for v in self.members[cy]:
            self.comp[v] = cx
        self.members[cx] |= self.members.pop(cy)

    def cut(self, ef: EmbeddedForest, u, v):
        side = ef.component_of(v)
        old = self.comp[u]
        if len(side) * 2 > len(self.members[old]):
            side = self.members[old] - side
        new = self.next_c
        self.next_c += 1
        for x in side:
            self.comp[x] = new
        self.members[old] -= side
        self.members[new] = side

    def two_trees(self, rng):
        if len(self.members) < 2:
            return None
        cids = rng.sample(sorted(self.members), 2)
        return cids


def fuzz_trace(
    ef: EmbeddedForest,
    ops: int,
    seed: int = 0,
    mode: str = "bounded",
    d: int | None = None,
    mix: dict | None = None,
) -> str:
    """Emit a replayable operation trace; ``ef`` is consumed as a scratch
    mirror so proposals always reference live state."""
    rng = random.Random(seed)
    mix = dict(mix or DEFAULT_MIX)
    names = sorted(mix)
    weights = [mix[k] for k in names]
    comp = _Components(ef)
    lines = [f"# fuzz seed={seed} ops={ops} mode={mode}"]
    edges = list({tuple(sorted((u, v))) for u, v in ef.directed_edges()})
    isolated = [v for v in ef.vertices() if ef.degree(v) == 0]
    next_label = (max(ef.vertices()) + 1) if ef.vertices() else 0

    def any_edge():
        while edges:
            i = rng.randrange(len(edges))
            u, v = edges[i]
            if ef.has_edge((u, v)):
                return (u, v) if rng.random() < 0.5 else (v, u)
            edges[i] = edges[-1]
            edges.pop()
        return None

    def corner_for(x):
        if ef.degree(x) == 0:
            return f"at {x}"
        nb = ef.rotation(x)[rng.randrange(ef.degree(x))]
        return f"after {nb} {x}"

    emitted = 0
    while emitted < ops:
        op = rng.choices(names, weights)[0]
        if op in ("succ", "pred", "rot", "sides"):
            e = any_edge()
            if e is None:
                continue
            lines.append(f"{op} {e[0]} {e[1]}")
        elif op == "jump":
            e = any_edge()
            if e is None:
                continue
            t = rng.randrange(0, 48) if rng.random() < 0.9 else rng.randrange(
                0, 2 * max(2, ef.vertex_count)
            )
            lines.append(f"jump {e[0]} {e[1]} {t}")
        elif op == "dist":
            e = any_edge()
            if e is None:
                continue
            t = rng.randrange(0, 48) if rng.random() < 0.9 else rng.randrange(
                0, 2 * max(2, ef.vertex_count)
            )
            e2 = ef.tour_jump(e, t)
            lines.append(f"dist {e[0]} {e[1]} {e2[0]} {e2[1]}")
        elif op == "cut":
            e = any_edge()
            if e is None:
                continue
            u, v = e
            ef.cut((u, v))
            comp.cut(ef, u, v)
            if ef.degree(u) == 0:
                isolated.append(u)
            if ef.degree(v) == 0:
                isolated.append(v)
            lines.append(f"cut {u} {v}")
        elif op == "link":
            pair = comp.two_trees(rng)
            if pair is None:
                continue
            built = []
            ok = True
            for cid in pair:
                cand = sorted(comp.members[cid])
                rng.shuffle(cand)
                pick = None
                for x in cand[:8]:
                    if mode != "bounded" or d is None or ef.degree(x) < d:
                        pick = x
                        break
                if pick is None:
                    ok = False
                    break
                built.append(pick)
            if not ok:
                continue
            x, y = built
            cx, cy = corner_for(x), corner_for(y)
            ef.link(_parse_corner(cx), _parse_corner(cy))
            comp.link(x, y)
            for z in (x, y):
                if z in isolated:
                    isolated.remove(z)
            lines.append(f"link {x} {y} {cx} {cy}")
        elif op == "addv":
            v = ef.add_vertex()
            assert v == next_label
            next_label += 1
            comp.add_vertex(v)
            isolated.append(v)
            lines.append(f"addv {v}")
        elif op == "rmv":
            if not isolated:
                continue
            v = isolated.pop(rng.randrange(len(isolated)))
            ef.remove_vertex(v)
            comp.remove_vertex(v)
            lines.append(f"rmv {v}")
        else:
            raise AssertionError(op)
        emitted += 1
    return "\n".join(lines) + "\n"


def _parse_corner(text: str):
    parts = text.split()
    if parts[0] == "at":
        return ("at", int(parts[1]))
    return ("after", int(parts[1]), int(parts[2]))
