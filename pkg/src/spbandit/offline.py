"""Offline solvers for the budgeted matching problem.

Given a selected arm subset S, the best matching assigns each user their
favorite arm in S, so the subset value is the coverage-style function

    f(S) = sum_u max_{k in S} theta[u, k],

which is monotone and submodular.  Three solvers are provided:

* ``sp_matching``  -- exact dynamic program for perfectly single-peaked
  matrices.  ``F[k][b]`` is the best reward when arm ``k`` is the rightmost
  selected arm under budget ``b``, counting only users whose peak is at or
  left of ``k``; a zero-cost, zero-reward fictive arm 0 seeds the table.
  Runs in O(K^2 U + K^2 B).
* ``brute_force_opt`` -- exact oracle for arbitrary matrices by enumerating
  every budget-feasible subset (exponential in K).
* ``greedy_max`` -- density greedy with single-arm augmentation at every
  prefix; guaranteed at least half the optimal subset value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SPBanditError
from .spstruct import NotPSP, extract_order, peaks_of

__all__ = [
    "EmptySubset",
    "TooManyArms",
    "coverage_value",
    "assign_to_subset",
    "feasible_subsets",
    "brute_force_opt",
    "greedy_max",
    "DPTable",
    "SPMatchingSolver",
    "sp_matching",
    "OfflineSolution",
    "solve_optimal",
]


class EmptySubset(SPBanditError):
    """A matching needs at least one selected arm."""


class TooManyArms(SPBanditError):
    """Subset enumeration refused above the hard cap."""


def coverage_value(theta, subset) -> float:
    """f(subset) = sum over users of their best entry in the subset; f({}) = 0."""
    idx = np.asarray(sorted(int(k) for k in subset), dtype=np.int64)
    if idx.size == 0:
        return 0.0
    theta = np.asarray(theta, dtype=np.float64)
    return float(theta[:, idx].max(axis=1).sum())


def assign_to_subset(theta, subset) -> tuple[np.ndarray, float]:
    """Best matching with image inside ``subset``: per-user argmax, ties to
    the smallest arm index.  Returns (assignment, value) with value equal to
    f(subset)."""
    idx = np.asarray(sorted(int(k) for k in set(subset)), dtype=np.int64)
    if idx.size == 0:
        raise EmptySubset("subset must contain at least one arm")
    theta = np.asarray(theta, dtype=np.float64)
    sub = theta[:, idx]
    choice = np.argmax(sub, axis=1)  # first maximum -> smallest arm in sorted idx
    assignment = idx[choice]
    value = float(sub[np.arange(theta.shape[0]), choice].sum())
    return assignment, value


def feasible_subsets(costs, budget, max_arms: int = 22) -> list[np.ndarray]:
    """All nonempty subsets with total cost <= budget, in bitmask order."""
    costs = np.asarray(costs, dtype=np.int64)
    k = costs.shape[0]
    if k > max_arms:
        raise TooManyArms(f"{k} arms exceeds enumeration cap {max_arms}")
    out = []
    for mask in range(1, 1 << k):
        idx = [j for j in range(k) if mask >> j & 1]
        if int(costs[idx].sum()) <= budget:
            out.append(np.asarray(idx, dtype=np.int64))
    return out


def brute_force_opt(theta, costs, budget, max_arms: int = 22) -> tuple[np.ndarray, float]:
    """Exact optimum by exhaustive subset enumeration; works for any matrix."""
    theta = np.asarray(theta, dtype=np.float64)
    best_val = -np.inf
    best_subset = None
    for idx in feasible_subsets(costs, budget, max_arms):
        val = float(theta[:, idx].max(axis=1).sum())
        if val > best_val:
            best_val = val
            best_subset = idx
    if best_subset is None:
        raise EmptySubset("no nonempty subset fits the budget")
    return assign_to_subset(theta, best_subset)


def greedy_max(theta, costs, budget) -> tuple[tuple[int, ...], float]:
    """Density greedy plus max augmentation; value >= 1/2 of the optimum.

    Repeatedly adds the affordable arm with the best marginal gain per unit
    cost; at every prefix (including the empty one, which covers the best
    single arm) it also considers adding the affordable arm with the best
    absolute gain, and returns the best subset seen.  Ties go to the smaller
    arm index.
    """
    theta = np.asarray(theta, dtype=np.float64)
    costs = np.asarray(costs, dtype=np.int64)
    users, arms = theta.shape

    chosen: list[int] = []
    in_set = np.zeros(arms, dtype=bool)
    cur = np.zeros(users)  # per-user best value within the prefix
    spent = 0
    best_val = -np.inf
    best_set: tuple[int, ...] = ()

    while True:
        affordable = ~in_set & (costs + spent <= budget)
        if not affordable.any():
            if float(cur.sum()) > best_val:
                best_val = float(cur.sum())
                best_set = tuple(sorted(chosen))
            break
        cand = np.flatnonzero(affordable)
        gains = np.maximum(theta[:, cand], cur[:, None]).sum(axis=0) - cur.sum()
        aug = int(cand[np.argmax(gains)])
        aug_val = float(cur.sum() + gains[np.argmax(gains)])
        if aug_val > best_val:
            best_val = aug_val
            best_set = tuple(sorted(chosen + [aug]))
        dens = gains / costs[cand]
        pick = int(cand[np.argmax(dens)])
        chosen.append(pick)
        in_set[pick] = True
        cur = np.maximum(cur, theta[:, pick])
        spent += int(costs[pick])

    return best_set, float(coverage_value(theta, best_set))


@dataclass(frozen=True)
class DPTable:
    """The filled dynamic-programming state, for diagnostics and testing.

    ``F`` is indexed by (arm in {0} + real arms, budget 0..B) with -inf where
    the arm cannot be the rightmost selection; ``G[i, k]`` is the precomputed
    reward of users with peaks in (i, k] split between arms i and k; ``parent``
    holds the backtracking links.
    """

    F: np.ndarray
    G: np.ndarray
    parent: np.ndarray


class SPMatchingSolver:
    """Reusable DP solver for fixed (costs, budget); ``solve`` per matrix.

    Splitting construction from solving lets per-round callers skip the
    cost-feasibility precomputation.
    """

    def __init__(self, costs, budget: int):
        costs = np.asarray(costs, dtype=np.int64)
        if costs.ndim != 1 or costs.size < 1:
            raise ValueError("costs must be a non-empty 1-D integer sequence")
        if costs.min() < 1 or costs.max() > budget:
            raise ValueError("need 1 <= c_k <= budget for every arm")
        self.budget = int(budget)
        self.k = int(costs.size)
        self.c0 = np.concatenate([[0], costs])  # fictive arm 0: zero cost
        self._c0_list = self.c0.tolist()
        ii, kk = np.meshgrid(np.arange(self.k + 1), np.arange(self.k + 1), indexing="ij")
        self._ii, self._kk = ii, kk
        # Per-round callers pass the same peaks object every call; cache its
        # derived bucket and tail masks.
        self._cached_peaks = None
        self._cached_masks = None

    def _peak_masks(self, peaks: np.ndarray):
        if self._cached_peaks is not None and peaks is self._cached_peaks:
            return self._cached_masks
        buckets = (peaks[None, :] == np.arange(self.k)[:, None]).astype(np.float64)
        tail_mask = (peaks[None, :] > np.arange(self.k)[:, None]).astype(np.float64)
        self._cached_peaks = peaks
        self._cached_masks = (buckets, tail_mask)
        return self._cached_masks

    def solve(self, theta, peaks=None, return_table: bool = False):
        """Optimal matching for a PSP matrix.

        ``peaks`` may be supplied when already known (positions of each row's
        maximum); otherwise they are computed and unimodality is verified,
        raising NotPSP for matrices that are not PSP.  Returns
        (assignment, value) or (assignment, value, DPTable).
        """
        theta = np.asarray(theta, dtype=np.float64)
        users, arms = theta.shape
        if arms != self.k:
            raise ValueError(f"matrix has {arms} arms, solver built for {self.k}")
        if peaks is None:
            peaks = peaks_of(theta)
        peaks = np.asarray(peaks, dtype=np.int64)
        k1 = self.k + 1
        budget = self.budget
        c0 = self._c0_list
        buckets, tail_mask = self._peak_masks(peaks)

        # G[i, k] = sum over users with i < peak+1 <= k of max(P[u,i], P[u,k]),
        # P being theta with the fictive zero column prepended.
        ext = np.concatenate([np.zeros((users, 1)), theta], axis=1)
        pairmax = np.maximum(ext[:, :, None], ext[:, None, :])
        by_peak = buckets @ pairmax.reshape(users, k1 * k1)
        csum = np.concatenate([np.zeros((1, k1 * k1)), np.cumsum(by_peak, axis=0)], axis=0)
        cs3 = csum.reshape(k1, k1, k1)
        G = cs3[self._kk, self._ii, self._kk] - cs3[self._ii, self._ii, self._kk]
        g_rows = G.tolist()

        # The DP table is tiny (K x B); plain Python beats vectorized dispatch.
        neg = -np.inf
        F = [[0.0] * (budget + 1)] + [[neg] * (budget + 1) for _ in range(self.k)]
        parent = [[0] * (budget + 1) for _ in range(k1)]
        for k in range(1, k1):
            ck = c0[k]
            fk, pk = F[k], parent[k]
            for b in range(ck, budget + 1):
                best, best_i = neg, 0
                prev_b = b - ck
                for i in range(k):
                    if c0[i] + ck <= b:
                        v = F[i][prev_b] + g_rows[i][k]
                        if v > best:  # strict: smaller predecessor wins ties
                            best, best_i = v, i
                fk[b] = best
                pk[b] = best_i

        # Users whose peak lies right of the rightmost selected arm k take arm k.
        tail = (tail_mask * theta.T).sum(axis=1)
        k_star, value = 0, neg
        for k in range(1, k1):
            total = F[k][budget] + tail[k - 1]
            if total > value:
                k_star, value = k, total
        value = float(value)

        selected = []
        k, b = k_star, budget
        while k > 0:
            selected.append(k - 1)
            pred = parent[k][b]
            b -= c0[k]
            k = pred
        assignment, _ = assign_to_subset(theta, selected)

        if return_table:
            table = DPTable(F=np.asarray(F), G=G, parent=np.asarray(parent, dtype=np.int64))
            return assignment, value, table
        return assignment, value


def sp_matching(theta, costs, budget, peaks=None) -> tuple[np.ndarray, float]:
    """Optimal budgeted matching for a perfectly single-peaked matrix.

    Raises NotPSP when the matrix is not unimodal under the identity order
    (reorder the columns first; see ``solve_optimal``).
    """
    return SPMatchingSolver(costs, budget).solve(theta, peaks=peaks)


@dataclass(frozen=True)
class OfflineSolution:
    assignment: np.ndarray
    value: float
    order: np.ndarray  # the column order under which the matrix was solved


def solve_optimal(theta, costs, budget) -> OfflineSolution:
    """Recover an order if needed, then solve exactly via the DP.

    Raises ExtractOrderFailed or NotPSP when the matrix is not single-peaked
    under any order.
    """
    theta = np.asarray(theta, dtype=np.float64)
    costs = np.asarray(costs, dtype=np.int64)
    try:
        peaks = peaks_of(theta)
        order = np.arange(theta.shape[1], dtype=np.int64)
    except NotPSP:
        order = extract_order(theta, 0.0)
        peaks = peaks_of(theta, order)  # raises NotPSP if genuinely not SP
    assignment_pos, value = sp_matching(theta[:, order], costs[order], budget, peaks=peaks)
    return OfflineSolution(assignment=order[assignment_pos], value=value, order=order)
