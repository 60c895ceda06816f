"""Round drivers for the card shuffles under study.

A round is n consecutive single-card moves.  The two headline shuffles:

* CCR: at step k of every round, the card with original label k (the card
  that started the whole process in position k) is removed and reinserted
  at a uniform position.
* CCRR: same as CCR in round 1; at the start of each later round the cards
  are relabeled by their current positions.  Equivalently (and how it is
  implemented here), each CCRR round processes cards in the order of the
  positions they hold when the round starts, so no labels are mutated.

Baselines: top-to-random (move the current top card to a uniform
position), random transpositions (swap two uniformly chosen cards) and
cyclic-to-random (swap the card in position k with a uniformly chosen
card), each grouped into rounds of n steps.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .deck import positions_vector

__all__ = ["ShuffleKind", "RoundTrace", "run_round", "run_rounds"]


class ShuffleKind(enum.Enum):
    CCR = "ccr"
    CCRR = "ccrr"
    CYCLIC_TO_RANDOM = "cyclic"
    TOP_TO_RANDOM = "top"
    RANDOM_TRANSPOSITIONS = "transpositions"

    @classmethod
    def parse(cls, name: str) -> "ShuffleKind":
        for kind in cls:
            if kind.value == name.lower():
                return kind
        raise ValueError(f"unknown shuffle kind {name!r}")


@dataclass
class RoundTrace:
    """Per-step draws and the end-of-round positions, for diagnostics."""

    round_index: int
    slots: list = field(default_factory=list)
    positions: np.ndarray | None = None


def _round_ccr(deck, rng, trace):
    for card in range(1, deck.n + 1):
        u = rng.slot(deck.n)
        deck.remove_insert(card, u)
        trace.slots.append(u)


def _round_ccrr(deck, rng, trace):
    schedule = list(deck.order) if hasattr(deck, "order") else deck.to_order()
    for card in schedule:
        u = rng.slot(deck.n)
        deck.remove_insert(card, u)
        trace.slots.append(u)


def _round_top_to_random(deck, rng, trace):
    for _ in range(deck.n):
        u = rng.slot(deck.n)
        deck.remove_insert(deck.card_at(1), u)
        trace.slots.append(u)


def _round_random_transpositions(deck, rng, trace):
    n = deck.n
    for _ in range(n):
        i = rng.slot(n)
        j = rng.slot(n)
        deck.swap_positions(i, j)
        trace.slots.append((i, j))


def _round_cyclic_to_random(deck, rng, trace):
    n = deck.n
    for k in range(1, n + 1):
        j = rng.slot(n)
        deck.swap_positions(k, j)
        trace.slots.append((k, j))


_ROUNDS = {
    ShuffleKind.CCR: _round_ccr,
    ShuffleKind.CCRR: _round_ccrr,
    ShuffleKind.TOP_TO_RANDOM: _round_top_to_random,
    ShuffleKind.RANDOM_TRANSPOSITIONS: _round_random_transpositions,
    ShuffleKind.CYCLIC_TO_RANDOM: _round_cyclic_to_random,
}


def run_round(deck, kind, rng, round_index=0):
    """Run one round (n single-card moves) in place; return (deck, trace).

    CCR processes cards by their fixed original labels; CCRR by the
    positions held at the start of this round, which is the relabeling
    semantics without mutating any labels.  The swap-based kinds record
    the swapped position pair per step instead of an insertion slot.
    """
    trace = RoundTrace(round_index=round_index)
    _ROUNDS[kind](deck, rng, trace)
    trace.positions = positions_vector(deck)
    return deck, trace


def run_rounds(deck, kind, t, rng, per_round=None):
    """Run t rounds; optionally call per_round(round_index, deck, trace)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    for r in range(1, t + 1):
        _, trace = run_round(deck, kind, rng, round_index=r)
        if per_round is not None:
            per_round(r, deck, trace)
    return deck
