"""Structural predicates and transforms on preference matrices.

A matrix is *perfectly single-peaked* (PSP) when every row is unimodal under
the identity column order: non-decreasing up to some peak position, then
non-increasing.  It is *single-peaked w.r.t. an order* when reindexing the
columns by that order makes it PSP.  The relaxed notion allows valleys of
bounded depth: a matrix is delta-ASP w.r.t. an order when for every row and
every ordered triple of positions i < j < l,

    row[j] >= min(row[i], row[l]) - delta.

``extract_order`` recovers an order from a noisy matrix by turning large gaps
in each user's sorted preferences into contiguity constraints on a PQ tree:
whenever the top-i values of a row all exceed the rest by more than 2*eps,
those i arms must be consecutive in any admissible order.  If the input is
within eps of some single-peaked matrix (sup-norm), the call succeeds and the
input is 2*K*eps-ASP w.r.t. the returned order.

Orders are permutation arrays: ``order[pos]`` is the arm placed at position
``pos``, so ``theta[:, order]`` is the reindexed matrix.  All operations are
pure functions and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SPBanditError
from .pqtree import PQTree

__all__ = [
    "NotPSP",
    "ExtractOrderFailed",
    "AspReport",
    "peaks_of",
    "asp_delta",
    "extract_order",
    "project_to_sp",
]


class NotPSP(SPBanditError):
    """Some row is not unimodal; carries the first offending (user, triple)."""

    def __init__(self, user: int, triple: tuple[int, int, int]):
        self.user = user
        self.triple = triple
        i, j, l = triple
        super().__init__(
            f"row {user} has a valley at positions ({i}, {j}, {l}) of the working order"
        )


class ExtractOrderFailed(SPBanditError):
    """The PQ tree rejected a contiguity constraint; no admissible order exists."""

    def __init__(self, user: int, constraint: tuple[int, ...]):
        self.user = user
        self.constraint = constraint
        super().__init__(f"constraint {sorted(constraint)} from row {user} is infeasible")


@dataclass(frozen=True)
class AspReport:
    """Smallest delta for which a matrix is delta-ASP w.r.t. an order."""

    order: tuple[int, ...]
    delta: float


def _as_order(order, arms: int) -> np.ndarray:
    if order is None:
        return np.arange(arms, dtype=np.int64)
    order = np.asarray(order, dtype=np.int64)
    if sorted(order.tolist()) != list(range(arms)):
        raise ValueError(f"order is not a permutation of range({arms})")
    return order


def _first_valley(row: np.ndarray) -> tuple[int, int, int] | None:
    """First (i, j, l) with row[j] < min(row[i], row[l]), or None."""
    k = row.shape[0]
    for j in range(1, k - 1):
        left = row[:j].max()
        right = row[j + 1 :].max()
        if min(left, right) > row[j]:
            i = int(np.argmax(row[:j] > row[j]))
            l = j + 1 + int(np.argmax(row[j + 1 :] > row[j]))
            return (i, j, l)
    return None


def peaks_of(theta, order=None) -> np.ndarray:
    """Peak positions of each row under ``order``; raises NotPSP on a valley.

    Ties are broken to the smallest position, which never changes attainable
    matching values.  Returns positions into the order, not arm indices.
    """
    theta = np.asarray(theta, dtype=np.float64)
    order = _as_order(order, theta.shape[1])
    reord = theta[:, order]
    peaks = np.argmax(reord, axis=1)
    for u in range(reord.shape[0]):
        row, p = reord[u], peaks[u]
        if np.any(np.diff(row[: p + 1]) < 0) or np.any(np.diff(row[p:]) > 0):
            valley = _first_valley(row)
            assert valley is not None
            raise NotPSP(u, valley)
    return peaks


def asp_delta(theta, order=None) -> AspReport:
    """Exact minimal delta such that theta is delta-ASP w.r.t. ``order``.

    delta == 0 iff the matrix is single-peaked w.r.t. the order.  Runs in
    O(U*K) after reindexing: the deepest valley below position j is
    min(max(row[:j]), max(row[j+1:])) - row[j].
    """
    theta = np.asarray(theta, dtype=np.float64)
    order = _as_order(order, theta.shape[1])
    reord = theta[:, order]
    k = reord.shape[1]
    if k < 3:
        return AspReport(order=tuple(order.tolist()), delta=0.0)
    prefmax = np.maximum.accumulate(reord, axis=1)
    sufmax = np.maximum.accumulate(reord[:, ::-1], axis=1)[:, ::-1]
    deficit = np.minimum(prefmax[:, :-2], sufmax[:, 2:]) - reord[:, 1:-1]
    return AspReport(order=tuple(order.tolist()), delta=float(max(0.0, deficit.max())))


def extract_order(theta, eps: float) -> np.ndarray:
    """Recover an arm order from (possibly noisy) preference estimates.

    For each user the arms are sorted by decreasing value (ties broken by
    smaller arm index); every strict gap exceeding 2*eps between consecutive
    sorted values yields a contiguity constraint on the prefix of higher
    arms.  Returns the canonical PQ frontier satisfying every constraint, or
    raises :class:`ExtractOrderFailed`.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if eps < 0:
        raise ValueError("eps must be >= 0")
    users, arms = theta.shape
    tree = PQTree(arms)
    for u in range(users):
        row = theta[u]
        idx = np.argsort(-row, kind="stable")
        vals = row[idx]
        for i in range(arms - 1):
            if vals[i] - vals[i + 1] > 2.0 * eps:
                prefix = idx[: i + 1]
                if not tree.reduce(prefix):
                    raise ExtractOrderFailed(u, tuple(int(x) for x in prefix))
    return np.asarray(tree.frontier(), dtype=np.int64)


def project_to_sp(theta, order=None) -> tuple[np.ndarray, float]:
    """Nearest-by-construction single-peaked matrix w.r.t. ``order``.

    Each row's peak is fixed at the position of its maximum (ties leftmost);
    entries before the peak become running prefix maxima, entries after it
    running suffix maxima.  The output is SP w.r.t. the order, and if the
    input was delta-ASP w.r.t. it, the sup-norm distance (also returned) is
    at most delta.
    """
    theta = np.asarray(theta, dtype=np.float64)
    order = _as_order(order, theta.shape[1])
    reord = theta[:, order]
    k = reord.shape[1]
    peaks = np.argmax(reord, axis=1)
    pref = np.maximum.accumulate(reord, axis=1)
    suf = np.maximum.accumulate(reord[:, ::-1], axis=1)[:, ::-1]
    positions = np.arange(k)[None, :]
    out_pos = np.where(positions <= peaks[:, None], pref, suf)
    out = np.empty_like(theta)
    out[:, order] = out_pos
    return out, float(np.abs(out - theta).max())
