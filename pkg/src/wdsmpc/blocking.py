"""Move blocking on input rates.

A blocking schedule splits the prediction horizon into ``Nc`` blocks of
lengths ``l``. Two expansion maps lift the ``Nc`` reduced rate moves to the
full ``Np`` steps:

* ``binary``: every step of a block copies the block's move (classical
  delta-input blocking).
* ``interpolated``: the move at each block start (anchor) is exact and the
  steps strictly between two anchors are the linear interpolation of the
  neighbouring anchor moves. Steps after the last anchor hold the last move.
"""

from dataclasses import dataclass

import numpy as np


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class BlockingSchedule:
    Np: int
    lengths: tuple
    starts: tuple

    @property
    def Nc(self):
        return len(self.lengths)

    @property
    def is_unblocked(self):
        return all(l == 1 for l in self.lengths)


@dataclass(frozen=True)
class ExpansionMatrix:
    kind: str
    W: np.ndarray

    @property
    def Np(self):
        return self.W.shape[0]

    @property
    def Nc(self):
        return self.W.shape[1]


def schedule_from_lengths(lengths, Np):
    """Build a schedule from block lengths; starts are 1-based cumulative sums."""
    lengths = tuple(int(l) for l in lengths)
    if not lengths:
        raise ScheduleError("at least one block is required")
    bad = [l for l in lengths if l < 1]
    if bad:
        raise ScheduleError(f"block lengths must be >= 1, got {list(lengths)}")
    total = sum(lengths)
    if total != Np:
        raise ScheduleError(f"lengths sum {total} ≠ Np {Np}")
    starts = tuple(int(s) for s in 1 + np.concatenate(([0], np.cumsum(lengths)[:-1])))
    return BlockingSchedule(Np=int(Np), lengths=lengths, starts=starts)


def unblocked_schedule(Np):
    return schedule_from_lengths([1] * Np, Np)


def binary_blocking_matrix(schedule):
    W = np.zeros((schedule.Np, schedule.Nc))
    for i, (s, l) in enumerate(zip(schedule.starts, schedule.lengths)):
        W[s - 1:s - 1 + l, i] = 1.0
    W.setflags(write=False)
    return ExpansionMatrix("binary", W)


def interpolation_matrix(schedule):
    Np, starts = schedule.Np, schedule.starts
    W = np.zeros((Np, schedule.Nc))
    for i, s in enumerate(starts):
        W[s - 1, i] = 1.0
        if i + 1 < len(starts):
            s_next = starts[i + 1]
            for b in range(s + 1, s_next):
                lam = 1.0 - (b - s) / (s_next - s)
                W[b - 1, i] = lam
                W[b - 1, i + 1] = 1.0 - lam
        else:
            W[s:, i] = 1.0
    W.setflags(write=False)
    return ExpansionMatrix("interpolated", W)


def expand(matrix, reduced):
    """Lift an ``(Nc, n_u)`` sequence of moves to ``(Np, n_u)``.

    Equivalent to ``(W kron I_nu)`` acting on the stacked reduced vector.
    """
    reduced = np.asarray(reduced, dtype=float)
    if reduced.ndim == 1:
        reduced = reduced[:, None]
    if reduced.shape[0] != matrix.Nc:
        raise ValueError(f"expected {matrix.Nc} reduced moves, got {reduced.shape[0]}")
    return matrix.W @ reduced
