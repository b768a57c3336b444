"""Trace file format: one command per line, '#' comments.

    link <u> <v> <corner-spec> <corner-spec>
    cut <u> <v>
    addv <label> | rmv <label>
    dist <u> <v> <x> <y>
    jump <u> <v> <t>
    sides <u> <v> | succ <u> <v> | pred <u> <v> | rot <u> <v>

A corner-spec is ``after <a> <b>`` (the corner following directed edge
(a, b)) or ``at <v>`` for an isolated vertex.
"""

from __future__ import annotations

from .errors import TraceSyntaxError


def parse_corner(tokens, ln):
    if not tokens:
        raise TraceSyntaxError("missing corner spec", ln)
    if tokens[0] == "at":
        if len(tokens) < 2:
            raise TraceSyntaxError("'at' needs a vertex", ln)
        return ("at", _num(tokens[1], ln)), tokens[2:]
    if tokens[0] == "after":
        if len(tokens) < 3:
            raise TraceSyntaxError("'after' needs two vertices", ln)
        return ("after", _num(tokens[1], ln), _num(tokens[2], ln)), tokens[3:]
    raise TraceSyntaxError(f"bad corner spec {tokens[0]!r}", ln)


def _num(tok, ln):
    try:
        return int(tok)
    except ValueError:
        raise TraceSyntaxError(f"expected an integer, got {tok!r}", ln) from None


def parse_trace(text: str):
    """Yield (line number, op name, args tuple)."""
    out = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        op, rest = toks[0], toks[1:]
        if op in ("succ", "pred", "rot", "sides", "cut"):
            if len(rest) != 2:
                raise TraceSyntaxError(f"{op} takes an edge", ln)
            out.append((ln, op, (_num(rest[0], ln), _num(rest[1], ln))))
        elif op == "dist":
            if len(rest) != 4:
                raise TraceSyntaxError("dist takes two edges", ln)
            out.append((ln, op, tuple(_num(t, ln) for t in rest)))
        elif op == "jump":
            if len(rest) != 3:
                raise TraceSyntaxError("jump takes an edge and a count", ln)
            out.append((ln, op, tuple(_num(t, ln) for t in rest)))
        elif op in ("addv", "rmv"):
            if len(rest) != 1:
                raise TraceSyntaxError(f"{op} takes a label", ln)
            out.append((ln, op, (_num(rest[0], ln),)))
        elif op == "link":
            if len(rest) < 2:
                raise TraceSyntaxError("link takes two vertices then corners", ln)
            u, v = _num(rest[0], ln), _num(rest[1], ln)
            c1, rest2 = parse_corner(rest[2:], ln)
            c2, rest3 = parse_corner(rest2, ln)
            if rest3:
                raise TraceSyntaxError("trailing tokens after link", ln)
            if (c1[0] == "at" and c1[1] != u) or (c1[0] == "after" and c1[2] != u):
                raise TraceSyntaxError("first corner must sit at the first vertex", ln)
            if (c2[0] == "at" and c2[1] != v) or (c2[0] == "after" and c2[2] != v):
                raise TraceSyntaxError("second corner must sit at the second vertex", ln)
            out.append((ln, op, (u, v, c1, c2)))
        else:
            raise TraceSyntaxError(f"unknown command {op!r}", ln)
    return out
