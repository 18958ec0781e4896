"""Bradley-Terry strength fitting from pairwise preference judgments.

Fitting runs simultaneous minorization-maximization updates

    pi_i <- wins_i / sum_{j != i} n_ij / (pi_i + pi_j)

from an all-ones start, with no per-iteration renormalization; the update
preserves the parameter scale on its own for balanced designs, and reported
scores s_i = pi_i / (pi_i + 1) do not depend on convergence-irrelevant drift.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyComparisons,
    NonPositivePi,
    NoWinsForAnyMethod,
    UnknownMethodName,
)

PI_FLOOR = 1e-9
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10000


@dataclass(frozen=True)
class PreferenceMatrix:
    """Square win-count matrix: wins[i, j] = times method i beat method j."""

    methods: tuple[str, ...]
    wins: np.ndarray  # (K, K) non-negative ints, zero diagonal

    def __post_init__(self):
        wins = np.array(self.wins, dtype=np.int64)
        k = len(self.methods)
        if wins.shape != (k, k):
            raise ValueError(f"wins must be ({k}, {k}), got {wins.shape}")
        if np.any(wins < 0):
            raise ValueError("win counts must be non-negative")
        if np.any(np.diag(wins) != 0):
            raise ValueError("diagonal win counts must be zero")
        if len(set(self.methods)) != k:
            raise ValueError("method names must be unique")
        wins.setflags(write=False)
        object.__setattr__(self, "wins", wins)
        object.__setattr__(self, "methods", tuple(self.methods))

    def total_comparisons(self) -> int:
        return int(self.wins.sum())


@dataclass(frozen=True)
class BtResult:
    methods: tuple[str, ...]
    pi: np.ndarray  # latent strengths, floored at PI_FLOOR
    scores: np.ndarray  # pi / (pi + 1), in (0, 1)
    iterations: int
    converged: bool


def build_matrix(
    judgments: Iterable[tuple[str, str]], methods: Sequence[str] | None = None
) -> PreferenceMatrix:
    """Tally (winner, loser) pairs into a PreferenceMatrix.

    With methods omitted, names are collected in first-appearance order.
    Unknown names against an explicit method list raise UnknownMethodName.
    """
    judgments = list(judgments)
    if methods is None:
        seen: dict[str, None] = {}
        for winner, loser in judgments:
            seen.setdefault(winner)
            seen.setdefault(loser)
        methods = list(seen)
    if not judgments:
        raise EmptyComparisons("no judgments to tally")
    index = {name: i for i, name in enumerate(methods)}
    wins = np.zeros((len(methods), len(methods)), dtype=np.int64)
    for winner, loser in judgments:
        if winner not in index or loser not in index:
            raise UnknownMethodName(f"judgment ({winner!r}, {loser!r}) names an unknown method")
        if winner == loser:
            raise ValueError(f"self-comparison for method {winner!r}")
        wins[index[winner], index[loser]] += 1
    return PreferenceMatrix(tuple(methods), wins)


def read_judgments(path) -> list[tuple[str, str]]:
    """Parse a winner,loser CSV (optional header) into judgment pairs."""
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'winner,loser', got {row!r}")
            a, b = row[0].strip(), row[1].strip()
            if lineno == 1 and (a.lower(), b.lower()) == ("winner", "loser"):
                continue
            out.append((a, b))
    return out


def bt_fit(
    matrix: PreferenceMatrix,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> BtResult:
    """Fit latent strengths by simultaneous MM updates from an all-ones start.

    Stops when the largest absolute parameter change drops below tol. Methods
    with zero wins land on the PI_FLOOR; a matrix with no wins at all is
    rejected.
    """
    wins = matrix.wins.astype(np.float64)
    if matrix.total_comparisons() == 0:
        raise EmptyComparisons("preference matrix holds no comparisons")
    win_totals = wins.sum(axis=1)
    if np.all(win_totals == 0.0):
        raise NoWinsForAnyMethod("every method has zero wins")
    n_pair = wins + wins.T
    k = len(matrix.methods)
    pi = np.ones(k)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        denom = np.zeros(k)
        for i in range(k):
            others = n_pair[i] > 0.0
            others[i] = False
            if np.any(others):
                denom[i] = np.sum(n_pair[i, others] / (pi[i] + pi[others]))
        new_pi = np.where(denom > 0.0, win_totals / np.where(denom > 0.0, denom, 1.0), 0.0)
        new_pi = np.maximum(new_pi, PI_FLOOR)
        delta = float(np.max(np.abs(new_pi - pi)))
        pi = new_pi
        if delta < tol:
            converged = True
            break
    if np.any(pi <= 0.0) or not np.all(np.isfinite(pi)):
        raise NonPositivePi(f"fit produced invalid strengths: {pi}")
    return BtResult(matrix.methods, pi, pi / (pi + 1.0), iterations, converged)


def bt_scores(result: BtResult) -> dict[str, float]:
    return {name: float(s) for name, s in zip(result.methods, result.scores)}
