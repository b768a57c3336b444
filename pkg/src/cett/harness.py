"""Lockstep differential runner: compact forest versus the explicit oracle.

The runner keeps a bidirectional map between oracle directed edges and
compact handles, patches it from the forest's remap stream after every
update, and records any disagreement as a mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .clustering import ForestParams
from .forest import CompactForest
from .oracle import EmbeddedForest, reverse_edge


@dataclass
class Mismatch:
    line: int
    op: str
    expected: object
    got: object

    def __str__(self):
        return f"line {self.line}: {self.op}: expected {self.expected!r}, got {self.got!r}"


@dataclass
class VerifyReport:
    ops_run: int = 0
    mismatches: list = field(default_factory=list)
    size_violations: int = 0
    updates: int = 0
    space: object = None
    counters: dict = field(default_factory=dict)

    @property
    def equivalent(self) -> bool:
        return not self.mismatches and self.size_violations == 0


class LockstepRun:
    """Execute a parsed trace against both representations."""

    def __init__(
        self,
        ef: EmbeddedForest,
        trace_ops,
        *,
        mode: str = "bounded",
        epsilon: float = 1.0,
        d: int | None = None,
        params: ForestParams | None = None,
        audit_sizes: bool = True,
        mismatch_cap: int = 10,
        seed: int = 0,
    ):
        self.ef = ef
        self.ops = trace_ops
        self.audit_sizes = audit_sizes
        self.cap = mismatch_cap
        self.report = VerifyReport()
        self.forest, index = CompactForest.build(
            ef, epsilon=epsilon, mode=mode, d=d, params=params, seed=seed
        )
        self.edge_map = dict(index)
        self.inv = {h: e for e, h in index.items()}

    # -- map upkeep -----------------------------------------------------

    def _patch(self):
        for old, new in self.forest.drain_remap().items():
            key = self.inv.pop(old, None)
            if key is not None:
                self.edge_map[key] = new
                self.inv[new] = key

    def _drop(self, key):
        h = self.edge_map.pop(key, None)
        if h is not None:
            self.inv.pop(h, None)

    def _set(self, key, h):
        self.edge_map[key] = h
        self.inv[h] = key

    def _note(self, line, op, expected, got):
        self.report.mismatches.append(Mismatch(line, op, expected, got))
        return len(self.report.mismatches) >= self.cap

    # -- run --------------------------------------------------------------

    def run(self) -> VerifyReport:
        ef = self.ef
        fo = self.forest
        M = self.edge_map
        inv = self.inv
        rep = self.report
        floor = (
            self.forest.params.lower
            if self.forest.params.mode == "bounded"
            else self.forest.params.B // 3
        )
        B = self.forest.params.B
        for line, op, args in self.ops:
            rep.ops_run += 1
            if op in ("succ", "pred"):
                e = args
                want = (
                    ef.tour_successor(e) if op == "succ" else ef.tour_predecessor(e)
                )
                pred, succ = fo.tour_pred_succ(M[e])
                got = succ if op == "succ" else pred
                if inv.get(got) != want:
                    if self._note(line, op, want, inv.get(got)):
                        break
            elif op == "rot":
                e = args
                want = (ef.rotation_predecessor(e), ef.rotation_successor(e))
                rp, rs = fo.rotation_pred_succ(M[e])
                got = (inv.get(rp), inv.get(rs))
                if got != want:
                    if self._note(line, op, want, got):
                        break
            elif op == "sides":
                e = args
                want = ef.side_sizes(e)
                got = fo.side_sizes(M[e])
                if got != want:
                    if self._note(line, op, want, got):
                        break
            elif op == "dist":
                e = (args[0], args[1])
                e2 = (args[2], args[3])
                want = ef.tour_distance(e, e2)
                got = fo.tour_distance(M[e], M[e2])
                if got != want:
                    if self._note(line, op, want, got):
                        break
            elif op == "jump":
                e = (args[0], args[1])
                t = args[2]
                want = ef.tour_jump(e, t)
                got = fo.edge_at_distance(M[e], t)
                if inv.get(got) != want:
                    if self._note(line, op, want, inv.get(got)):
                        break
            elif op == "cut":
                u, v = args
                ef.cut((u, v))
                t_head, t_tail = fo.cut(M[(u, v)])
                self._drop((u, v))
                self._drop((v, u))
                self._patch()
                if ef.degree(v) == 0:
                    self._set(("iso", v), fo.iso_handle(t_head))
                if ef.degree(u) == 0:
                    self._set(("iso", u), fo.iso_handle(t_tail))
                rep.updates += 1
                if self.audit_sizes:
                    rep.size_violations += self._audit_sizes(floor, B)
            elif op == "link":
                u, v, c1, c2 = args
                e_new = ef.link(c1, c2)
                h1 = self._corner_handle(c1)
                h2 = self._corner_handle(c2)
                _tree, h_new = fo.link(h1, h2)
                self._patch()
                self._drop(("iso", u))
                self._drop(("iso", v))
                self._set(e_new, h_new)
                self._set(reverse_edge(e_new), fo.reverse(h_new))
                rep.updates += 1
                if self.audit_sizes:
                    rep.size_violations += self._audit_sizes(floor, B)
            elif op == "addv":
                (label,) = args
                got = ef.add_vertex()
                h = fo.add_vertex()
                self._patch()
                if got != label:
                    if self._note(line, op, label, got):
                        break
                self._set(("iso", label), h)
                rep.updates += 1
            elif op == "rmv":
                (label,) = args
                ef.remove_vertex(label)
                fo.remove_vertex(M[("iso", label)])
                self._drop(("iso", label))
                self._patch()
                rep.updates += 1
            else:
                raise AssertionError(op)
        self._final_sweep()
        rep.space = fo.space_report()
        rep.counters = dict(fo.counters)
        return rep

    def _corner_handle(self, corner):
        if corner[0] == "at":
            return ("at", self.edge_map[("iso", corner[1])])
        return ("after", self.edge_map[(corner[1], corner[2])])

    def _audit_sizes(self, floor, B) -> int:
        bad = 0
        for size, is_single in self.forest.cluster_sizes():
            if size > B or (not is_single and size < floor):
                bad += 1
        return bad

    def _final_sweep(self):
        """Whole-forest equivalence: every tree's tour, walked end to end."""
        rep = self.report
        try:
            self.forest.validate()
        except Exception as exc:  # noqa: BLE001 - recorded, not raised
            rep.mismatches.append(Mismatch(-1, "validate", "clean audit", repr(exc)))
            return
        seen = set()
        for v in self.ef.vertices():
            if v in seen:
                continue
            comp = self.ef.component_of(v)
            seen |= comp
            if self.ef.degree(v) == 0:
                if ("iso", v) not in self.edge_map:
                    rep.mismatches.append(
                        Mismatch(-1, "sweep", f"iso handle for {v}", None)
                    )
                continue
            e0 = (v, self.ef.rotation(v)[0])
            tour = self.ef.euler_tour(e0)
            h = self.edge_map[e0]
            for e in tour[1:]:
                h = self.forest.tour_pred_succ(h)[1]
                if self.inv.get(h) != e:
                    rep.mismatches.append(
                        Mismatch(-1, "sweep", e, self.inv.get(h))
                    )
                    return


def run_verify(ef, trace_text, *, mode="bounded", epsilon=1.0, d=None, params=None,
               audit_sizes=True, seed=0) -> VerifyReport:
    from .traces import parse_trace

    ops = parse_trace(trace_text)
    run = LockstepRun(
        ef,
        ops,
        mode=mode,
        epsilon=epsilon,
        d=d,
        params=params,
        audit_sizes=audit_sizes,
        seed=seed,
    )
    return run.run()
