"""Vectorized simulation of CCRR rounds across many replicate decks.

One CCRR round processes cards in start-of-round position order, so every
replicate executes the same schedule and only the insertion slots differ.
That makes the round vectorizable across replicates with two passes:

Forward pass.  Keep, per replicate, a Fenwick tree over "skeleton" slots
1..n (the cards not yet processed this round, in their unchanged relative
order) plus a bottom gap.  The weight of live slot i is 1 + (number of
already-processed cards parked in the gap directly above skeleton card i),
so prefix sums are deck positions.  Step k removes skeleton card k (its
gap merges downward) and, for the reinsertion at final rank u, computes
v_k = number of processed cards above the insertion point.  Because
processed cards never change order relative to each other except through
these insertions, the v_k fully determine the final arrangement.

Reverse pass.  The final deck is the pure insertion sequence "card k
enters at rank v_k + 1 among processed cards"; walking k = n..1 and
claiming the (v_k + 1)-th free slot of a fresh Fenwick tree yields every
card's final position in O(n log n) per replicate, all replicates in
lockstep.

Trees are stored transposed, shape (size + 1, R), so fixed-index updates
are contiguous row operations.
"""

from __future__ import annotations

import numpy as np

from .deck import RngStream

__all__ = ["batch_round_positions", "BatchCcrr", "uniform_positions"]


def _tree_from_uniform_weights(size, reps, last_zero=True):
    """Fenwick tree (size+1, reps) for unit weights at 1..size-1 or 1..size."""
    w = np.ones(size + 1, dtype=np.int32)
    w[0] = 0
    if last_zero:
        w[size] = 0
    tree1 = w.copy()
    for i in range(1, size + 1):
        j = i + (i & -i)
        if j <= size:
            tree1[j] += tree1[i]
    return np.repeat(tree1[:, None], reps, axis=1)


def _update_fixed(tree, size, idx, delta):
    """tree[idx-chain] += delta for a scalar index, vector delta."""
    i = idx
    while i <= size:
        tree[i] += delta
        i += i & -i


def _update_varying(tree, size, idx, delta, cols):
    """Per-replicate point update at per-replicate indices."""
    i = idx.copy()
    active = i <= size
    while active.any():
        tree[i[active], cols[active]] += delta[active]
        i = i + (i & -i)
        active = i <= size


def _select(tree, size, k, cols, topbit, decrement=False):
    """Smallest index with prefix >= k, per replicate; size+1 if total < k.

    With ``decrement`` the weight at the found index is also reduced by one
    in the same descent (the skipped-over nodes are exactly that index's
    update chain), fusing a select with its point update.
    """
    reps = k.shape[0]
    pos = np.zeros(reps, dtype=np.int32)
    rem = k.astype(np.int32, copy=True)
    nxt = np.empty(reps, dtype=np.int32)
    clipped = np.empty(reps, dtype=np.int32)
    take = np.empty(reps, dtype=bool)
    bit = topbit
    while bit:
        np.add(pos, bit, out=nxt)
        np.minimum(nxt, size, out=clipped)
        t = tree[clipped, cols]
        np.less(t, rem, out=take)
        take &= nxt <= size
        rem = np.where(take, rem - t, rem)
        pos = np.where(take, nxt, pos)
        if decrement:
            stay = nxt <= size
            stay &= ~take
            tree[nxt[stay], cols[stay]] -= 1
        bit >>= 1
    return pos + 1


def batch_round_positions(slots):
    """Final positions after one CCRR round, per replicate.

    slots[r, k-1] in 1..n is the final rank drawn for the card processed
    k-th (the card in start-of-round position k) in replicate r.  Returns
    an int32 array of the same shape: entry [r, k-1] is that card's
    position at the end of the round.
    """
    slots = np.asarray(slots)
    reps, n = slots.shape
    size = n + 1  # skeleton slots 1..n plus the bottom gap at n+1
    cols = np.arange(reps)
    topbit = 1 << size.bit_length()

    tree = _tree_from_uniform_weights(size, reps, last_zero=True)
    w = np.ones((size + 1, reps), dtype=np.int32)
    w[0] = 0
    w[size] = 0

    v = np.empty((reps, n), dtype=np.int32)
    ones = np.ones(reps, dtype=np.int32)
    for k in range(1, n + 1):
        # remove skeleton card k; its gap merges into the next live slot
        gk = w[k] - 1
        _update_fixed(tree, size, k, -(gk + 1))
        _update_fixed(tree, size, k + 1, gk)
        w[k] = 0
        w[k + 1] += gk
        # insert at final rank u: count processed cards above the new card
        u = slots[:, k - 1].astype(np.int32)
        istar = np.minimum(_select(tree, size, u, cols, topbit), size)
        skel_above = np.clip(istar, k + 1, size) - (k + 1)
        v[:, k - 1] = u - 1 - skel_above
        _update_varying(tree, size, istar, ones, cols)
        w[istar, cols] += 1

    # reverse pass: card k claims the (v_k + 1)-th free final slot
    tree2 = _tree_from_uniform_weights(n, reps, last_zero=False)
    topbit2 = 1 << n.bit_length()
    final_pos = np.empty((reps, n), dtype=np.int32)
    for k in range(n, 0, -1):
        final_pos[:, k - 1] = _select(
            tree2, n, v[:, k - 1] + 1, cols, topbit2, decrement=True
        )
    return final_pos


class BatchCcrr:
    """R replicate decks evolved round by round under CCRR.

    Replicate r draws its slots from RngStream(seed, stream_base + r), n
    draws per round, so any single replicate reproduces exactly the
    sequential Deck simulation driven by the same stream.
    """

    def __init__(self, n, reps, seed, stream_base=1):
        self.n = n
        self.reps = reps
        self.seed = seed
        self.stream_base = stream_base
        self._gens = [RngStream(seed, stream_base + r) for r in range(reps)]
        self.order = np.tile(np.arange(1, n + 1, dtype=np.int32), (reps, 1))
        self.rounds_done = 0

    def draw_slots(self):
        slots = np.empty((self.reps, self.n), dtype=np.int32)
        for r, gen in enumerate(self._gens):
            slots[r] = gen.slots(self.n, self.n)
        return slots

    def run_round(self, slots=None):
        """Advance every replicate one round; returns the slots used."""
        if slots is None:
            slots = self.draw_slots()
        fp = batch_round_positions(slots)
        new_order = np.empty_like(self.order)
        np.put_along_axis(new_order, fp - 1, self.order, axis=1)
        self.order = new_order
        self.rounds_done += 1
        return slots

    def positions(self):
        """pos[r, c-1] = current position of card c in replicate r."""
        pos = np.empty_like(self.order)
        np.put_along_axis(
            pos,
            self.order - 1,
            np.broadcast_to(np.arange(1, self.n + 1, dtype=np.int32), self.order.shape),
            axis=1,
        )
        return pos


def uniform_positions(n, reps, seed, stream_base=1):
    """Positions of cards in ``reps`` independent uniform decks."""
    pos = np.empty((reps, n), dtype=np.int32)
    for r in range(reps):
        stream = RngStream(seed, stream_base + r)
        perm = stream.permutation(n)  # perm[p-1] = card at position p
        inv = np.empty(n, dtype=np.int32)
        inv[perm - 1] = np.arange(1, n + 1, dtype=np.int32)
        pos[r] = inv
    return pos
