"""Rank/select and parenthesis navigation against brute-force scans."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cett.succinct import BalancedParens, Bitvector

PORTS_FIXTURE = "0010001001001000"


def brute_rank(s, sym, i):
    return sum(1 for c in s[:i] if int(c) == sym)


def brute_select(s, sym, k):
    seen = 0
    for i, c in enumerate(s):
        if int(c) == sym:
            seen += 1
            if seen == k:
                return i
    raise IndexError


class TestBitvector:
    def test_fixture_rank(self):
        b = Bitvector.from_string(PORTS_FIXTURE)
        assert b.rank(1, 16) == 4
        assert b.rank(1, 0) == 0
        assert b.rank(0, 16) == 12

    def test_fixture_select(self):
        b = Bitvector.from_string(PORTS_FIXTURE)
        assert b.select(1, 1) == 2
        assert b.select(1, 4) == 12

    def test_roundtrip_string(self):
        b = Bitvector.from_string(PORTS_FIXTURE)
        assert b.to01() == PORTS_FIXTURE

    def test_bounds(self):
        b = Bitvector.from_string("0101")
        with pytest.raises(IndexError):
            b.rank1(5)
        with pytest.raises(IndexError):
            b.select1(3)
        with pytest.raises(IndexError):
            b.select0(0)

    @pytest.mark.parametrize("directory", [False, True])
    @pytest.mark.parametrize("seed", [1, 2, 3, 4])
    def test_random_against_scan(self, seed, directory):
        rng = random.Random(seed)
        n = rng.randrange(1, 10_000)
        s = "".join(rng.choice("01") for _ in range(n))
        b = Bitvector.from_string(s, directory=directory)
        for _ in range(300):
            i = rng.randrange(n + 1)
            assert b.rank1(i) == brute_rank(s, 1, i)
            assert b.rank0(i) == brute_rank(s, 0, i)
        ones = s.count("1")
        zeros = n - ones
        for _ in range(300):
            if ones:
                k = rng.randrange(1, ones + 1)
                assert b.select1(k) == brute_select(s, 1, k)
            if zeros:
                k = rng.randrange(1, zeros + 1)
                assert b.select0(k) == brute_select(s, 0, k)

    def test_rank_select_roundtrip_many(self):
        # >= 1e5 sampled position identities across random vectors
        rng = random.Random(99)
        trials = 0
        while trials < 100_000:
            n = rng.randrange(1, 5000)
            b = Bitvector.from_iterable(rng.randrange(2) for _ in range(n))
            for _ in range(min(n, 2000)):
                i = rng.randrange(n)
                sym = b.bit(i)
                k = b.rank(sym, i + 1)
                assert b.select(sym, k) == i
                assert b.rank0(i) + b.rank1(i) == i
                trials += 1

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=700), st.data())
    @settings(max_examples=200, deadline=None)
    def test_rank_select_inverse_property(self, bits, data):
        b = Bitvector.from_iterable(bits)
        i = data.draw(st.integers(0, len(bits) - 1))
        sym = bits[i]
        assert b.select(sym, b.rank(sym, i + 1)) == i

    def test_directory_is_measured(self):
        big = Bitvector.from_iterable(
            (i * 2654435761) % 3 == 0 for i in range(50_000)
        )
        assert big.aux_bits() > 0
        small = Bitvector.from_string(PORTS_FIXTURE)
        assert small.aux_bits() == 0


class PointerTree:
    """Explicit ordinal tree built from a BP string, for cross-checking."""

    def __init__(self, parens):
        self.parent = {}
        self.children = {}
        stack = []
        for i, c in enumerate(parens):
            if c == "(":
                self.parent[i] = stack[-1] if stack else None
                self.children[i] = []
                if stack:
                    self.children[stack[-1]].append(i)
                stack.append(i)
            else:
                self.open_of = getattr(self, "open_of", {})
                self.open_of[i] = stack.pop()

    def subtree_size(self, i):
        return 1 + sum(self.subtree_size(c) for c in self.children[i])


def random_bp(rng, nodes):
    """Random tree as a parenthesis string via a random walk with budget."""
    out = []
    opened = 0
    closed = 0
    while opened < nodes:
        if opened == closed or (rng.random() < 0.55 and opened > closed):
            # bias keeps trees from degenerating into a single path
            pass
        if opened == closed:
            out.append("(")
            opened += 1
        elif opened < nodes and rng.random() < 0.5:
            out.append("(")
            opened += 1
        else:
            out.append(")")
            closed += 1
    out.append(")" * (opened - closed))
    return "".join(out)


class TestBalancedParens:
    def test_match_trivial(self):
        p = BalancedParens.from_string("(())")
        assert p.match(0) == 3
        assert p.match(1) == 2
        assert p.match(3) == 0

    def test_subtree_size_trivial(self):
        p = BalancedParens.from_string("(()())")
        assert p.subtree_size(0) == 3
        assert p.subtree_size(1) == 1

    def test_navigation_small(self):
        p = BalancedParens.from_string("((()())())")
        # root 0; children at 1 and 7; grandchildren at 2 and 4
        assert p.parent(0) is None
        assert p.parent(1) == 0
        assert p.parent(4) == 1
        assert p.first_child(0) == 1
        assert p.first_child(1) == 2
        assert p.next_sibling(1) == 7
        assert p.next_sibling(7) is None
        assert p.prev_sibling(7) == 1
        assert p.prev_sibling(1) is None
        assert p.is_leaf(2)
        assert not p.is_leaf(0)
        assert p.navigate("match", 0) == 9

    @pytest.mark.parametrize("seed", range(6))
    def test_against_pointer_tree(self, seed):
        rng = random.Random(seed)
        nodes = rng.randrange(2, 2000)
        s = random_bp(rng, nodes)
        bp = BalancedParens.from_string(s)
        assert bp.check_balanced()
        ref = PointerTree(s)
        opens = [i for i, c in enumerate(s) if c == "("]
        for i in opens:
            assert bp.parent(i) == ref.parent[i]
            kids = ref.children[i]
            assert bp.first_child(i) == (kids[0] if kids else None)
            assert bp.subtree_size(i) == ref.subtree_size(i)
        for i, c in enumerate(s):
            if c == ")":
                assert bp.find_open(i) == ref.open_of[i]
        for i in opens:
            sibs = ref.children[ref.parent[i]] if ref.parent[i] is not None else None
            if sibs:
                j = sibs.index(i)
                assert bp.next_sibling(i) == (sibs[j + 1] if j + 1 < len(sibs) else None)
                assert bp.prev_sibling(i) == (sibs[j - 1] if j else None)

    def test_preorder_rank_select(self):
        s = "((()())())"
        bp = BalancedParens.from_string(s)
        opens = [i for i, c in enumerate(s) if c == "("]
        for k, i in enumerate(opens):
            assert bp.preorder_select(k) == i
            assert bp.preorder_rank(i) == k
