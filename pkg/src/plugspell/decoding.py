"""Dual-prediction change analysis and over-correction repair.

The corrector runs twice (the second pass on the first pass's output) and
each position's trajectory (x_i, y1_i, y2_i) is classified:

  S1  oscillation (A->B->C or A->B->A): over-correction, restore x_i
  S2  untouched (A->A->A): nothing to do
  S3  stable change (A->B->B): confident correction, keep it
  S4  late change (A->A->B): keep only if a neighbor is a confident
      correction, otherwise restore x_i

By default S4 keeps the change if at least one neighbor is S3 (the pseudocode
reading: restore when BOTH neighbors are not S3); strict=True demands both
neighbors be S3, the stricter prose reading. Missing neighbors at the
sequence boundaries count as "not S3". Neighbor states come from the
pre-repair classification; repair never cascades.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence


class ChangeState(Enum):
    S1 = 1  # over-correction: restore original
    S2 = 2  # no change needed
    S3 = 3  # confident correction: keep
    S4 = 4  # conditional correction: depends on neighbors


def classify_change(x_i: int, y1_i: int, y2_i: int) -> ChangeState:
    """Total over all (x, y1, y2) triples; exactly one case applies."""
    if x_i != y1_i:
        if x_i == y2_i:
            return ChangeState.S1  # A->B->A
        if y1_i != y2_i:
            return ChangeState.S1  # A->B->C
        return ChangeState.S3      # A->B->B
    if y1_i == y2_i:
        return ChangeState.S2      # A->A->A
    return ChangeState.S4          # A->A->B


def classify_sequence(x: Sequence[int], y1: Sequence[int], y2: Sequence[int]) -> list[ChangeState]:
    if not len(x) == len(y1) == len(y2):
        raise ValueError("x/y1/y2 length mismatch")
    return [classify_change(a, b, c) for a, b, c in zip(x, y1, y2)]


def repair_overcorrections(x: Sequence[int], y2: Sequence[int],
                           states: Sequence[ChangeState], strict: bool = False) -> list[int]:
    """Final output: y2 with S1 (and unsupported S4) positions restored to x."""
    if not len(x) == len(y2) == len(states):
        raise ValueError("x/y2/states length mismatch")
    out = list(y2)
    n = len(out)
    for i, state in enumerate(states):
        if state is ChangeState.S1:
            out[i] = x[i]
        elif state is ChangeState.S4:
            left = states[i - 1] if i > 0 else None
            right = states[i + 1] if i + 1 < n else None
            if strict:
                keep = left is ChangeState.S3 and right is ChangeState.S3
            else:
                keep = left is ChangeState.S3 or right is ChangeState.S3
            if not keep:
                out[i] = x[i]
    return out


@dataclass(frozen=True)
class DualPredictionTrace:
    """Full audit record of one dual-prediction run (all id sequences)."""

    x: tuple[int, ...]
    y1: tuple[int, ...]
    y2: tuple[int, ...]
    states: tuple[ChangeState, ...]
    y_final: tuple[int, ...]

    def __post_init__(self):
        n = len(self.x)
        if not (len(self.y1) == len(self.y2) == len(self.states) == len(self.y_final) == n):
            raise ValueError("trace sequences must share one length")
        for yf, xi, y2i in zip(self.y_final, self.x, self.y2):
            if yf not in (xi, y2i):
                raise ValueError("y_final must come from x or y2 at every position")


def dual_predict(predict: Callable[[Sequence[int]], Sequence[int]], ids: Sequence[int],
                 strict: bool = False) -> DualPredictionTrace:
    """Run the corrector twice and repair over-corrections.

    `predict` maps an id sequence to an equal-length id sequence; both passes
    use the same corrector configuration.
    """
    x = tuple(int(i) for i in ids)
    if not x:
        raise ValueError("empty input")
    y1 = tuple(int(i) for i in predict(x))
    if len(y1) != len(x):
        raise ValueError("first pass changed the sequence length")
    y2 = tuple(int(i) for i in predict(y1))
    if len(y2) != len(x):
        raise ValueError("second pass changed the sequence length")
    states = tuple(classify_sequence(x, y1, y2))
    y_final = tuple(repair_overcorrections(x, y2, states, strict=strict))
    return DualPredictionTrace(x, y1, y2, states, y_final)
