"""Bit-level primitives: rank/select bitvectors and balanced-parentheses trees.

Positions are 0-based throughout.  A vector stores its payload in a single
Python int with bit ``i`` of the int holding position ``i``, so prefix masks
and popcounts run at C speed regardless of length.
"""

from __future__ import annotations

from .errors import ForestError

# Directories pay off only on long vectors; per-cluster vectors stay bare and
# are scanned word-wise instead.
_DIRECTORY_THRESHOLD = 4096
_SUPERBLOCK = 512
_BLOCK = 64
_SELECT_SAMPLE = 512

_WORD_MASK = (1 << 64) - 1

# Per-byte excess summaries, LSB-first (bit 0 of the byte is the earliest
# position).  Forward tables give net/min/max of prefix excess inside the
# byte; reverse tables the same for a right-to-left scan.
_FWD_NET = [0] * 256
_FWD_MIN = [0] * 256
_FWD_MAX = [0] * 256
_REV_MIN = [0] * 256
_REV_MAX = [0] * 256

for _b in range(256):
    run = lo = hi = 0
    for _k in range(8):
        run += 1 if (_b >> _k) & 1 else -1
        lo = min(lo, run)
        hi = max(hi, run)
    _FWD_NET[_b] = run
    _FWD_MIN[_b] = lo
    _FWD_MAX[_b] = hi
    run = lo = hi = 0
    for _k in range(7, -1, -1):
        run -= 1 if (_b >> _k) & 1 else -1
        lo = min(lo, run)
        hi = max(hi, run)
    _REV_MIN[_b] = lo
    _REV_MAX[_b] = hi
del _b, _k, run, lo, hi


def _select_in_word(word: int, k: int) -> int:
    """Position of the k-th (1-based) set bit inside a 64-bit word."""
    for _ in range(k - 1):
        word &= word - 1
    return (word & -word).bit_length() - 1


class Bitvector:
    """Immutable bit sequence with rank and select.

    A two-level directory (512-bit superblocks, 64-bit blocks, sampled
    select positions) is attached automatically above a length threshold;
    short vectors answer rank with a masked popcount and select with a
    word walk.  ``aux_bits`` reports the directory's measured size.
    """

    __slots__ = ("bits", "length", "_super", "_blocks", "_samples1", "_samples0")

    def __init__(self, bits: int, length: int, directory: bool | None = None):
        if bits < 0 or bits >> length:
            raise ValueError("bit payload does not fit the stated length")
        self.bits = bits
        self.length = length
        self._super = None
        self._blocks = None
        self._samples1 = None
        self._samples0 = None
        if directory is None:
            directory = length >= _DIRECTORY_THRESHOLD
        if directory and length:
            self._build_directory()

    @classmethod
    def from_string(cls, s: str, directory: bool | None = None) -> "Bitvector":
        """Parse ``"0010..."`` with the leftmost character at position 0."""
        bits = int(s[::-1], 2) if s else 0
        return cls(bits, len(s), directory)

    @classmethod
    def from_iterable(cls, it, directory: bool | None = None) -> "Bitvector":
        bits = 0
        n = 0
        for v in it:
            if v:
                bits |= 1 << n
            n += 1
        return cls(bits, n, directory)

    def to01(self) -> str:
        return format(self.bits, f"0{self.length}b")[::-1] if self.length else ""

    def __len__(self) -> int:
        return self.length

    def bit(self, i: int) -> int:
        return (self.bits >> i) & 1

    def _build_directory(self):
        supers = []
        blocks = []
        acc = 0
        bits = self.bits
        nwords = (self.length + _BLOCK - 1) // _BLOCK
        for w in range(nwords):
            if w % (_SUPERBLOCK // _BLOCK) == 0:
                supers.append(acc)
                base = acc
            blocks.append(acc - base)
            acc += ((bits >> (w * _BLOCK)) & _WORD_MASK).bit_count()
        self._super = supers
        self._blocks = blocks
        total1 = acc
        samples1 = []
        samples0 = []
        seen1 = seen0 = 0
        next1 = next0 = 1
        for w in range(nwords):
            word = (bits >> (w * _BLOCK)) & _WORD_MASK
            c1 = word.bit_count()
            hi = min(_BLOCK, self.length - w * _BLOCK)
            c0 = hi - c1
            while next1 <= seen1 + c1:
                samples1.append(w * _BLOCK + _select_in_word(word, next1 - seen1))
                next1 += _SELECT_SAMPLE
            inv = (~word) & ((1 << hi) - 1)
            while next0 <= seen0 + c0:
                samples0.append(w * _BLOCK + _select_in_word(inv, next0 - seen0))
                next0 += _SELECT_SAMPLE
            seen1 += c1
            seen0 += c0
        self._samples1 = samples1
        self._samples0 = samples0
        assert total1 == seen1

    # -- rank ---------------------------------------------------------------

    def rank1(self, i: int) -> int:
        """Number of 1s in positions [0, i)."""
        if i < 0 or i > self.length:
            raise IndexError(f"rank position {i} out of range 0..{self.length}")
        if self._super is None:
            return (self.bits & ((1 << i) - 1)).bit_count()
        w, r = divmod(i, _BLOCK)
        if w == len(self._blocks):
            w -= 1
            r += _BLOCK
        acc = self._super[w // (_SUPERBLOCK // _BLOCK)] + self._blocks[w]
        word = (self.bits >> (w * _BLOCK)) & ((1 << r) - 1)
        return acc + word.bit_count()

    def rank0(self, i: int) -> int:
        return i - self.rank1(i)

    def rank(self, sym: int, i: int) -> int:
        return self.rank1(i) if sym else self.rank0(i)

    # -- select -------------------------------------------------------------

    def select1(self, k: int) -> int:
        """Position of the k-th 1 (1-based)."""
        total = self.rank1(self.length)
        if k < 1 or k > total:
            raise IndexError(f"select1({k}) out of range 1..{total}")
        start_word = 0
        seen = 0
        if self._samples1:
            s = (k - 1) // _SELECT_SAMPLE
            pos = self._samples1[s]
            start_word = pos // _BLOCK
            seen = s * _SELECT_SAMPLE
            word = (self.bits >> (start_word * _BLOCK)) & _WORD_MASK
            seen -= (word & ((1 << (pos % _BLOCK)) - 1)).bit_count()
        bits = self.bits >> (start_word * _BLOCK)
        w = start_word
        while True:
            word = bits & _WORD_MASK
            c = word.bit_count()
            if seen + c >= k:
                return w * _BLOCK + _select_in_word(word, k - seen)
            seen += c
            bits >>= _BLOCK
            w += 1

    def select0(self, k: int) -> int:
        total = self.length - self.rank1(self.length)
        if k < 1 or k > total:
            raise IndexError(f"select0({k}) out of range 1..{total}")
        start_word = 0
        seen = 0
        if self._samples0:
            s = (k - 1) // _SELECT_SAMPLE
            pos = self._samples0[s]
            start_word = pos // _BLOCK
            seen = s * _SELECT_SAMPLE
            word = (~(self.bits >> (start_word * _BLOCK))) & _WORD_MASK
            seen -= (word & ((1 << (pos % _BLOCK)) - 1)).bit_count()
        w = start_word
        while True:
            hi = min(_BLOCK, self.length - w * _BLOCK)
            word = (~(self.bits >> (w * _BLOCK))) & ((1 << hi) - 1)
            c = word.bit_count()
            if seen + c >= k:
                return w * _BLOCK + _select_in_word(word, k - seen)
            seen += c
            w += 1

    def select(self, sym: int, k: int) -> int:
        return self.select1(k) if sym else self.select0(k)

    # -- accounting ----------------------------------------------------------

    def aux_bits(self) -> int:
        """Measured directory size: 64b per superblock entry, 16b per block
        entry, 64b per select sample."""
        if self._super is None:
            return 0
        return (
            64 * len(self._super)
            + 16 * len(self._blocks)
            + 64 * (len(self._samples1) + len(self._samples0))
        )


class BalancedParens:
    """Ordinal tree stored as a parenthesis string (1 = open, 0 = close).

    Navigation runs on excess searches accelerated by per-byte summary
    tables; within a cluster-sized string every operation is a short
    word/byte scan.
    """

    __slots__ = ("bv",)

    def __init__(self, bv: Bitvector):
        if bv.length % 2:
            raise ValueError("parenthesis strings have even length")
        self.bv = bv

    @classmethod
    def from_string(cls, s: str) -> "BalancedParens":
        return cls(Bitvector.from_string(s.replace("(", "1").replace(")", "0")))

    def to_parens(self) -> str:
        return self.bv.to01().replace("1", "(").replace("0", ")")

    @property
    def length(self) -> int:
        return self.bv.length

    @property
    def node_count(self) -> int:
        return self.bv.length // 2

    def is_open(self, i: int) -> bool:
        return bool(self.bv.bit(i))

    def excess(self, i: int) -> int:
        """Inclusive excess: opens minus closes across positions [0, i]."""
        return 2 * self.bv.rank1(i + 1) - (i + 1)

    # -- excess searches -----------------------------------------------------

    def fwdsearch(self, i: int, target: int):
        """Smallest j > i with inclusive excess == target, or None."""
        bits = self.bv.bits
        n = self.bv.length
        run = self.excess(i) if i >= 0 else 0
        j = i + 1
        # finish the current byte bit by bit
        while j < n and j % 8:
            run += 1 if (bits >> j) & 1 else -1
            if run == target:
                return j
            j += 1
        while j < n:
            if j + 8 <= n:
                byte = (bits >> j) & 0xFF
                if run + _FWD_MIN[byte] <= target <= run + _FWD_MAX[byte]:
                    for k in range(8):
                        run += 1 if (byte >> k) & 1 else -1
                        if run == target:
                            return j + k
                run += _FWD_NET[byte]
                j += 8
            else:
                run += 1 if (bits >> j) & 1 else -1
                if run == target:
                    return j
                j += 1
        return None

    def bwdsearch(self, i: int, target: int):
        """Largest j < i with inclusive excess == target; -1 stands for the
        empty prefix (excess 0); None when unreachable."""
        bits = self.bv.bits
        if i >= self.bv.length:
            i = self.bv.length
            run = self.excess(i - 1) if i else 0
        else:
            # exclusive excess just below position i
            run = self.excess(i) - (1 if (bits >> i) & 1 else -1)
        j = i
        while True:
            if run == target:
                return j - 1
            if j == 0:
                return None
            if j % 8 == 0 and j >= 8:
                byte = (bits >> (j - 8)) & 0xFF
                if run + _REV_MIN[byte] <= target <= run + _REV_MAX[byte]:
                    for k in range(7, -1, -1):
                        run -= 1 if (byte >> k) & 1 else -1
                        j -= 1
                        if run == target:
                            return j - 1
                    raise AssertionError("byte summary promised a hit")
                run -= _FWD_NET[byte]
                j -= 8
            else:
                j -= 1
                run -= 1 if (bits >> j) & 1 else -1

    # -- tree navigation -----------------------------------------------------

    def find_close(self, i: int) -> int:
        """Matching close of the open at i."""
        j = self.fwdsearch(i, self.excess(i) - 1)
        if j is None:
            raise ForestError(f"unmatched open parenthesis at {i}")
        return j

    def find_open(self, i: int) -> int:
        """Matching open of the close at i."""
        j = self.bwdsearch(i, self.excess(i))
        if j is None:
            raise ForestError(f"unmatched close parenthesis at {i}")
        return j + 1

    def match(self, i: int) -> int:
        return self.find_close(i) if self.is_open(i) else self.find_open(i)

    def enclose(self, i: int):
        """Open position of the parent of the node opened at i, or None."""
        if i == 0:
            return None
        j = self.bwdsearch(i, self.excess(i) - 2)
        if j is None:
            return None
        return j + 1

    def parent(self, i: int):
        return self.enclose(i)

    def first_child(self, i: int):
        return i + 1 if self.is_open(i + 1) else None

    def next_sibling(self, i: int):
        j = self.find_close(i) + 1
        if j < self.bv.length and self.is_open(j):
            return j
        return None

    def prev_sibling(self, i: int):
        if i == 0 or self.is_open(i - 1):
            return None
        return self.find_open(i - 1)

    def subtree_size(self, i: int) -> int:
        return (self.find_close(i) - i + 1) // 2

    def depth(self, i: int) -> int:
        return self.excess(i)

    def is_leaf(self, i: int) -> bool:
        return not self.is_open(i + 1)

    def preorder_select(self, k: int) -> int:
        """Open position of the k-th node in preorder (0-based)."""
        return self.bv.select1(k + 1)

    def preorder_rank(self, i: int) -> int:
        """Preorder index of the node opened at i (0-based)."""
        return self.bv.rank1(i + 1) - 1

    def navigate(self, op: str, i: int):
        """Dispatch by operation name; returns a position, a count, or None."""
        table = {
            "parent": self.parent,
            "first_child": self.first_child,
            "next_sibling": self.next_sibling,
            "match": self.match,
            "subtree_size": self.subtree_size,
        }
        return table[op](i)

    def check_balanced(self) -> bool:
        run = 0
        bits = self.bv.bits
        for i in range(self.bv.length):
            run += 1 if (bits >> i) & 1 else -1
            if run < 0:
                return False
        return run == 0
