"""Deck state: naive array deck, blocked order-statistic deck, seeded RNG.

Cards are integers 1..n named after their starting positions (position 1 is
the top of the deck).  The one primitive is remove_insert: take a card out,
reinsert it so that its final position among all n cards is ``slot``.  The
deck transiently holds n-1 cards and n gaps, so a uniform slot in {1..n}
means a uniform final position.

``Deck`` keeps a plain order array plus its inverse (O(n) per operation,
the reference implementation).  ``FastDeck`` keeps the same sequence as a
list of bounded blocks indexed by a Fenwick tree of block sizes, giving
rank queries, remove-at-rank and insert-at-rank in O(log n) tree steps
plus one small-block memmove.  Both produce identical orders for identical
operation sequences.

Deck instances are not thread-safe; use one instance (and one RngStream)
per thread.  Distinct stream ids derived from one seed are independent.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Deck", "FastDeck", "RngStream", "remove_insert", "positions_vector"]


class RngStream:
    """Counter-based random stream: Philox keyed by (seed, stream).

    The same (seed, stream) pair always yields the same draw sequence, and
    distinct stream ids give statistically independent streams, so Monte
    Carlo replicates can each own stream ``base + replica`` and be run in
    any order or in parallel.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def substream(self, offset: int) -> "RngStream":
        """A fresh stream with id shifted by ``offset`` (same seed)."""
        return RngStream(self.seed, self.stream + offset)

    def slot(self, n: int) -> int:
        """One uniform draw from {1..n}."""
        return int(self.generator.integers(1, n + 1))

    def slots(self, n: int, size) -> np.ndarray:
        """Uniform draws from {1..n} with the given shape."""
        return self.generator.integers(1, n + 1, size=size)

    def permutation(self, n: int) -> np.ndarray:
        """A uniform permutation of 1..n (Fisher-Yates)."""
        return self.generator.permutation(n) + 1

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"


class Deck:
    """Array-backed deck: order[p-1] is the card at position p."""

    __slots__ = ("order", "inv")

    def __init__(self, order):
        order = list(order)
        n = len(order)
        if sorted(order) != list(range(1, n + 1)):
            raise ValueError("order must be a permutation of 1..n")
        self.order = order
        self.inv = [0] * (n + 1)  # inv[card] = position, 1-based
        for p, c in enumerate(order, start=1):
            self.inv[c] = p

    @classmethod
    def identity(cls, n: int) -> "Deck":
        return cls(range(1, n + 1))

    @property
    def n(self) -> int:
        return len(self.order)

    def position_of(self, card: int) -> int:
        p = self.inv[card] if 1 <= card <= self.n else 0
        if p == 0:
            raise ValueError(f"card {card} not in deck")
        return p

    def card_at(self, position: int) -> int:
        return self.order[position - 1]

    def remove_insert(self, card: int, slot: int) -> "Deck":
        """Remove ``card`` and reinsert it at final position ``slot``.

        All other cards keep their relative order.
        """
        n = self.n
        if not 1 <= slot <= n:
            raise ValueError(f"slot {slot} out of range 1..{n}")
        p = self.position_of(card)
        if p == slot:
            return self
        self.order.pop(p - 1)
        self.order.insert(slot - 1, card)
        lo, hi = (p, slot) if p < slot else (slot, p)
        for q in range(lo, hi + 1):
            self.inv[self.order[q - 1]] = q
        return self

    def swap_positions(self, i: int, j: int) -> "Deck":
        """Exchange the cards in positions i and j."""
        ci, cj = self.card_at(i), self.card_at(j)
        if i != j:
            self.order[i - 1], self.order[j - 1] = cj, ci
            self.inv[ci], self.inv[cj] = j, i
        return self

    def copy(self) -> "Deck":
        return Deck(self.order)

    def __eq__(self, other):
        return isinstance(other, Deck) and self.order == other.order

    def __repr__(self):
        return f"Deck({self.order})"


def remove_insert(deck, card, slot):
    """Functional form of Deck.remove_insert (mutates and returns deck)."""
    return deck.remove_insert(card, slot)


def positions_vector(deck) -> np.ndarray:
    """Depth of each card: entry i-1 is position(card i) / n, in (0, 1]."""
    n = deck.n
    out = np.empty(n)
    for card in range(1, n + 1):
        out[card - 1] = deck.position_of(card) / n
    return out


class _Block:
    __slots__ = ("cards", "idx")

    def __init__(self, cards, idx):
        self.cards = cards
        self.idx = idx


class FastDeck:
    """Blocked-sequence deck with a Fenwick tree over block sizes.

    The order is split into blocks of at most 2 * block_size cards; a
    Fenwick tree over block sizes turns ranks into (block, offset) pairs in
    O(log #blocks), and a card -> block map makes position queries direct.
    Cards are homed to block objects, so a split renumbers only the block
    list (O(#blocks), amortized over the block size), never the cards.
    """

    def __init__(self, order, block_size: int = 512):
        order = list(order)
        n = len(order)
        if sorted(order) != list(range(1, n + 1)):
            raise ValueError("order must be a permutation of 1..n")
        self.block_size = block_size
        self.blocks = [
            _Block(order[i : i + block_size], idx)
            for idx, i in enumerate(range(0, n, block_size))
        ]
        if not self.blocks:
            self.blocks = [_Block([], 0)]
        self._home = {}
        for blk in self.blocks:
            for c in blk.cards:
                self._home[c] = blk
        self._rebuild_tree()

    @classmethod
    def identity(cls, n: int, block_size: int = 512) -> "FastDeck":
        return cls(range(1, n + 1), block_size)

    @property
    def n(self) -> int:
        return len(self._home)

    # -- Fenwick over block sizes ------------------------------------------

    def _rebuild_tree(self):
        m = len(self.blocks)
        tree = [0] * (m + 1)
        for i in range(1, m + 1):
            tree[i] += len(self.blocks[i - 1].cards)
            j = i + (i & -i)
            if j <= m:
                tree[j] += tree[i]
        self._tree = tree
        self._topbit = 1 << m.bit_length()

    def _tree_add(self, bi: int, delta: int):
        i = bi + 1
        tree = self._tree
        m = len(tree) - 1
        while i <= m:
            tree[i] += delta
            i += i & -i

    def _prefix(self, bi: int) -> int:
        """Cards in blocks 0..bi-1."""
        s = 0
        tree = self._tree
        i = bi
        while i > 0:
            s += tree[i]
            i -= i & -i
        return s

    def _block_for_rank(self, r: int):
        """Block index and within-block offset of global 0-based rank r."""
        tree = self._tree
        m = len(tree) - 1
        pos = 0
        bit = self._topbit
        rem = r
        while bit:
            nxt = pos + bit
            if nxt <= m and tree[nxt] <= rem:
                rem -= tree[nxt]
                pos = nxt
            bit >>= 1
        return pos, rem  # block index pos (0-based block pos), offset rem

    def _renumber_from(self, start: int):
        for j in range(start, len(self.blocks)):
            self.blocks[j].idx = j

    # -- rank-level primitives ---------------------------------------------

    def position_of(self, card: int) -> int:
        blk = self._home.get(card)
        if blk is None:
            raise ValueError(f"card {card} not in deck")
        return self._prefix(blk.idx) + blk.cards.index(card) + 1

    def card_at(self, position: int) -> int:
        if not 1 <= position <= self.n:
            raise ValueError("position out of range")
        bi, off = self._block_for_rank(position - 1)
        return self.blocks[bi].cards[off]

    def remove_at_rank(self, position: int) -> int:
        """Remove and return the card at the given 1-based position."""
        if not 1 <= position <= self.n:
            raise ValueError("position out of range")
        bi, off = self._block_for_rank(position - 1)
        blk = self.blocks[bi]
        card = blk.cards.pop(off)
        del self._home[card]
        self._tree_add(bi, -1)
        if not blk.cards and len(self.blocks) > 1:
            del self.blocks[bi]
            self._renumber_from(bi)
            self._rebuild_tree()
        return card

    def remove_card(self, card: int):
        """Remove a card wherever it sits (no rank computation needed)."""
        blk = self._home.pop(card, None)
        if blk is None:
            raise ValueError(f"card {card} not in deck")
        blk.cards.remove(card)
        self._tree_add(blk.idx, -1)
        if not blk.cards and len(self.blocks) > 1:
            del self.blocks[blk.idx]
            self._renumber_from(blk.idx)
            self._rebuild_tree()

    def insert_at_rank(self, position: int, card: int):
        """Insert ``card`` so that its final 1-based position is ``position``."""
        if card in self._home:
            raise ValueError(f"card {card} already in deck")
        if not 1 <= position <= self.n + 1:
            raise ValueError("position out of range")
        r = position - 1
        if r == self.n:
            blk = self.blocks[-1]
            off = len(blk.cards)
        else:
            bi, off = self._block_for_rank(r)
            blk = self.blocks[bi]
        blk.cards.insert(off, card)
        self._home[card] = blk
        self._tree_add(blk.idx, +1)
        if len(blk.cards) > 2 * self.block_size:
            mid = len(blk.cards) // 2
            right = _Block(blk.cards[mid:], blk.idx + 1)
            del blk.cards[mid:]
            self.blocks.insert(blk.idx + 1, right)
            self._renumber_from(blk.idx + 1)
            for c in right.cards:
                self._home[c] = right
            self._rebuild_tree()

    def remove_insert(self, card: int, slot: int) -> "FastDeck":
        if not 1 <= slot <= self.n:
            raise ValueError(f"slot {slot} out of range 1..{self.n}")
        self.remove_card(card)
        self.insert_at_rank(slot, card)
        return self

    def swap_positions(self, i: int, j: int) -> "FastDeck":
        """Exchange the cards in positions i and j."""
        if i == j:
            return self
        if i > j:
            i, j = j, i
        cj = self.remove_at_rank(j)
        ci = self.remove_at_rank(i)
        self.insert_at_rank(i, cj)
        self.insert_at_rank(j, ci)
        return self

    # -- export --------------------------------------------------------------

    def to_order(self) -> list:
        return [c for blk in self.blocks for c in blk.cards]

    def to_deck(self) -> Deck:
        return Deck(self.to_order())

    def __eq__(self, other):
        if isinstance(other, FastDeck):
            return self.to_order() == other.to_order()
        if isinstance(other, Deck):
            return self.to_order() == other.order
        return NotImplemented

    def __repr__(self):
        return f"FastDeck(n={self.n}, blocks={len(self.blocks)})"
