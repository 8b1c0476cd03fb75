"""Online learners for budgeted matching with semi-bandit feedback.

Every learner plays a feasible matching each round, observes one reward per
matched (user, arm) pair, and is scored by expected regret: the per-round gap
between the optimal matching value and the expected value of the played
matching under the true means.  Using expected rather than realized rewards
removes reward noise from the traces, so regret curves are functions of the
chosen matchings only.

Learners:

* ``run_mvm``             -- optimistic matching against the element-wise
  maximal single-peaked matrix of the confidence set (needs order + peaks).
* ``run_peak_id_mvm``     -- round-robin until every user's peak is separated
  by the confidence bounds, then the maximal-matrix learner (needs order).
* ``run_emc``             -- explore-then-commit: estimate means, extract an
  order, project onto a single-peaked matrix, commit to its optimal matching.
* ``run_cucb_bruteforce`` -- combinatorial UCB with an exhaustive inner
  optimization; exact but exponential in K, for small general instances.
* ``run_greedy_etc``      -- explore-then-commit around the greedy+max
  half-approximation; traces record 1/2-regret.

Environments are duck-typed: anything with ``theta``, ``instance``,
``optimal_value``, ``draw_round`` and ``draw_arm_block`` works (see
``spbandit.sim.Environment``).  Each run is single-threaded and deterministic
given (instance, seed, config); concurrent runs must not share state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .offline import (
    SPMatchingSolver,
    TooManyArms,
    assign_to_subset,
    feasible_subsets,
    greedy_max,
)
from .spstruct import ExtractOrderFailed, extract_order, project_to_sp

__all__ = [
    "BanditStats",
    "ConfidenceBounds",
    "RegretTrace",
    "maximal_matrix",
    "run_mvm",
    "run_peak_id_mvm",
    "run_emc",
    "run_cucb_bruteforce",
    "run_greedy_etc",
]


class BanditStats:
    """Per-(user, arm) pull counts and empirical means over a known horizon.

    Semi-bandit feedback: one observation per user per round, so the total
    count grows by U each round.  Confidence widths use sqrt(2 ln T / n).
    """

    def __init__(self, users: int, arms: int, horizon: int):
        self.users = users
        self.arms = arms
        self.horizon = int(horizon)
        self._log2t = 2.0 * math.log(self.horizon)
        self.counts = np.zeros((users, arms), dtype=np.int64)
        self.sums = np.zeros((users, arms), dtype=np.float64)
        self._rows = np.arange(users)
        # Bounds are maintained incrementally: only touched entries change.
        self._ucb = np.ones((users, arms))
        self._lcb = np.zeros((users, arms))

    def update(self, arms_played, rewards) -> None:
        """Record one round: user u observed rewards[u] on arms_played[u]."""
        rows = self._rows
        self.counts[rows, arms_played] += 1
        self.sums[rows, arms_played] += rewards
        n = self.counts[rows, arms_played]
        mean = self.sums[rows, arms_played] / n
        width = np.sqrt(self._log2t / n)
        self._ucb[rows, arms_played] = np.minimum(mean + width, 1.0)
        self._lcb[rows, arms_played] = np.maximum(mean - width, 0.0)

    def update_block(self, arm: int, n: int, reward_sums) -> None:
        """Record n whole-population rounds on a single arm."""
        self.counts[:, arm] += n
        self.sums[:, arm] += reward_sums
        total = self.counts[:, arm]
        mean = self.sums[:, arm] / total
        width = np.sqrt(self._log2t / total)
        self._ucb[:, arm] = np.minimum(mean + width, 1.0)
        self._lcb[:, arm] = np.maximum(mean - width, 0.0)

    def means(self) -> np.ndarray:
        n = np.maximum(self.counts, 1)
        return self.sums / n

    def ucb(self) -> np.ndarray:
        """Clamped upper bounds; unpulled pairs sit at 1.  Treat as read-only."""
        return self._ucb

    def lcb(self) -> np.ndarray:
        """Clamped lower bounds; unpulled pairs sit at 0.  Treat as read-only."""
        return self._lcb

    def bounds(self) -> "ConfidenceBounds":
        return ConfidenceBounds(ucb=self._ucb.copy(), lcb=self._lcb.copy())


@dataclass(frozen=True)
class ConfidenceBounds:
    """Clamped confidence box [lcb, ucb] per (user, arm); unpulled pairs span [0, 1]."""

    ucb: np.ndarray
    lcb: np.ndarray


@dataclass
class RegretTrace:
    """Per-round expected regret of one run.

    ``inst[t-1]`` is alpha * V_star - V(pi_t; theta); ``cum`` its running sum.
    For alpha = 1 the cumulative curve is non-decreasing; half-regret traces
    (alpha = 0.5) may decrease.
    """

    algo: str
    inst: np.ndarray
    optimal_value: float
    alpha: float = 1.0
    flags: tuple[str, ...] = ()
    info: dict = field(default_factory=dict)
    cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.cum = np.cumsum(self.inst)

    @property
    def horizon(self) -> int:
        return self.inst.shape[0]

    def sample(self, rounds) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(t, inst, cum) at the given 1-based round numbers."""
        idx = np.asarray(rounds, dtype=np.int64) - 1
        return idx + 1, self.inst[idx], self.cum[idx]


def maximal_matrix(bounds: ConfidenceBounds, order, peaks) -> np.ndarray:
    """Element-wise largest single-peaked matrix inside the confidence box.

    For each user, the entry at a position is the running minimum of upper
    bounds along the path from that position to the user's peak (both ends
    inclusive).  The result dominates every matrix in the confidence set that
    is single-peaked w.r.t. ``order`` with the given peaks, and is itself such
    a matrix.  ``peaks`` are positions in the order; the returned matrix is in
    original arm indexing.
    """
    order = np.asarray(order, dtype=np.int64)
    ucb = np.asarray(bounds.ucb, dtype=np.float64)
    peaks = np.asarray(peaks, dtype=np.int64)
    arms = ucb.shape[1]
    if sorted(order.tolist()) != list(range(arms)):
        raise ValueError(f"order is not a permutation of range({arms})")
    if peaks.shape[0] != ucb.shape[0] or peaks.min() < 0 or peaks.max() >= arms:
        raise ValueError("peaks must give one position in [0, K) per user")
    out_pos = _maximal_positions(ucb[:, order], peaks)
    out = np.empty_like(out_pos)
    out[:, order] = out_pos
    return out


def _peak_side_masks(k: int, peaks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(positions <= peak, positions >= peak) boolean masks, per user."""
    pos = np.arange(k)[None, :]
    return pos <= peaks[:, None], pos >= peaks[:, None]


def _maximal_positions(ucb_pos: np.ndarray, peaks: np.ndarray, masks=None) -> np.ndarray:
    """Running min of UCBs toward each row's peak, in order positions.

    Masking entries on the far side of the peak with +inf turns the
    min-toward-peak into plain running minima; ``masks`` (from
    ``_peak_side_masks``) may be precomputed by per-round callers.
    """
    if masks is None:
        masks = _peak_side_masks(ucb_pos.shape[1], peaks)
    leq, geq = masks
    from_right = np.minimum.accumulate(np.where(leq, ucb_pos, np.inf)[:, ::-1], axis=1)[:, ::-1]
    from_left = np.minimum.accumulate(np.where(geq, ucb_pos, np.inf), axis=1)
    return np.where(leq, from_right, from_left)


def _check_sp_input(theta, order, peaks) -> bool:
    """True when theta reindexed by order is unimodal with the given peaks."""
    reord = np.asarray(theta)[:, order]
    for u in range(reord.shape[0]):
        p = int(peaks[u])
        row = reord[u]
        if np.any(np.diff(row[: p + 1]) < 0) or np.any(np.diff(row[p:]) > 0):
            return False
    return True


def _mvm_rounds(env, stats, solver, order, peaks, inst, t_start, t_end,
                check_optimism=False):
    """Maximal-matrix rounds [t_start, t_end); writes expected regret into inst."""
    theta = env.theta
    users = theta.shape[0]
    rows = np.arange(users)
    v_star = env.optimal_value
    masks = _peak_side_masks(theta.shape[1], peaks)
    for t in range(t_start, t_end):
        ucb_pos = stats.ucb()[:, order]
        maximal = _maximal_positions(ucb_pos, peaks, masks)
        assignment_pos, opt_value = solver.solve(maximal, peaks=peaks)
        if check_optimism:
            lcb_pos = stats.lcb()[:, order]
            truth = theta[:, order]
            if np.all(truth >= lcb_pos - 1e-12) and np.all(truth <= ucb_pos + 1e-12):
                assert opt_value >= v_star - 1e-9, (
                    f"optimism violated at round {t}: {opt_value} < {v_star}"
                )
        arms = order[assignment_pos]
        rewards = env.draw_round(arms)
        stats.update(arms, rewards)
        inst[t] = v_star - theta[rows, arms].sum()


def run_mvm(env, order, peaks=None, check_optimism: bool = False) -> RegretTrace:
    """Match-via-maximal-matrix learner for a known order and known peaks.

    Each round builds the maximal single-peaked matrix of the current
    confidence set and plays its optimal matching.  When ``peaks`` is omitted
    the true peaks of the environment are used.  Regret grows as
    O(U sqrt(T K ln T)).
    """
    inst_obj = env.instance
    users, arms = env.theta.shape
    horizon = inst_obj.horizon
    order = np.asarray(order, dtype=np.int64)
    if peaks is None:
        peaks = np.argmax(env.theta[:, order], axis=1)
    peaks = np.asarray(peaks, dtype=np.int64)

    flags: list[str] = []
    if not _check_sp_input(env.theta, order, peaks):
        warnings.warn("environment matrix is not single-peaked for the given order/peaks")
        flags.append("not_sp_input")

    stats = BanditStats(users, arms, horizon)
    solver = SPMatchingSolver(inst_obj.costs[order], inst_obj.budget)
    inst = np.empty(horizon)
    _mvm_rounds(env, stats, solver, order, peaks, inst, 0, horizon,
                check_optimism=check_optimism)
    return RegretTrace(algo="mvm", inst=inst, optimal_value=env.optimal_value,
                       flags=tuple(flags))


def run_peak_id_mvm(env, order) -> RegretTrace:
    """Two-phase learner for known order but unknown, separated peaks.

    Phase 1 matches the whole population to one arm per round, cycling over
    the arms, until each user has an arm whose lower bound clears every other
    arm's upper bound; no separation parameter is needed.  Phase 2 hands the
    accumulated statistics to the maximal-matrix learner using the identified
    peaks.  If the horizon ends first the trace is flagged
    ``phase_one_exhausted``.
    """
    inst_obj = env.instance
    theta = env.theta
    users, arms = theta.shape
    horizon = inst_obj.horizon
    order = np.asarray(order, dtype=np.int64)
    pos_of_arm = np.argsort(order)
    rows = np.arange(users)
    v_star = env.optimal_value

    stats = BanditStats(users, arms, horizon)
    inst = np.empty(horizon)
    peak_arm = np.full(users, -1, dtype=np.int64)
    flags: list[str] = []

    t = 0
    while t < horizon and (peak_arm < 0).any():
        k = t % arms
        arms_played = np.full(users, k, dtype=np.int64)
        rewards = env.draw_round(arms_played)
        stats.update(arms_played, rewards)
        inst[t] = v_star - theta[:, k].sum()
        t += 1

        pending = np.flatnonzero(peak_arm < 0)
        ucb = stats.ucb()[pending]
        lcb = stats.lcb()[pending]
        top = np.argmax(ucb, axis=1)
        sub = ucb.copy()
        sub[np.arange(pending.size), top] = -np.inf
        second = sub.max(axis=1)
        # rival[j] = largest UCB among the other arms, for each candidate arm j
        rival = np.where(np.arange(arms)[None, :] == top[:, None],
                         second[:, None], ucb.max(axis=1)[:, None])
        hit = lcb > rival
        for row_idx in np.flatnonzero(hit.any(axis=1)):
            peak_arm[pending[row_idx]] = int(np.argmax(hit[row_idx]))

    if (peak_arm < 0).any():
        flags.append("phase_one_exhausted")
        return RegretTrace(algo="peak_id_mvm", inst=inst[:t] if t < horizon else inst,
                           optimal_value=v_star, flags=tuple(flags),
                           info={"peak_arms": peak_arm.copy(), "phase_one_rounds": t})

    peaks = pos_of_arm[peak_arm]
    solver = SPMatchingSolver(inst_obj.costs[order], inst_obj.budget)
    _mvm_rounds(env, stats, solver, order, peaks, inst, t, horizon)
    return RegretTrace(algo="peak_id_mvm", inst=inst, optimal_value=v_star,
                       flags=tuple(flags),
                       info={"peak_arms": peak_arm.copy(), "phase_one_rounds": t})


def _exploration_schedule(horizon: int, arms: int, n_explore, default_n: int):
    """Resolve the per-arm exploration length, clamping auto schedules."""
    flags: list[str] = []
    if n_explore == "auto":
        n = default_n
        if n * arms > horizon:
            n = horizon // arms
            flags.append("explore_truncated")
    else:
        n = int(n_explore)
        if n < 1 or n * arms > horizon:
            raise ValueError(f"need 1 <= n_explore and n_explore*K <= T, got {n}")
    return n, flags


def run_emc(env, n_explore="auto") -> RegretTrace:
    """Explore, extract an order, project, match, and commit.

    Exploration matches the whole population to each arm for N rounds
    (auto: N = ceil(T^(2/3) (ln T)^(1/3))), yielding N samples per pair.  The
    empirical means feed the order extraction at eps = sqrt(2 ln T / N); the
    projection of the means onto a single-peaked matrix w.r.t. that order is
    solved exactly and the resulting matching is played for the remaining
    rounds.  If extraction fails (possible only when the estimates stray far
    from the truth), the identity order is used and the trace flagged.
    Expected cumulative regret is O(U K T^(2/3) (ln T)^(1/3)).
    """
    inst_obj = env.instance
    theta = env.theta
    users, arms = theta.shape
    horizon = inst_obj.horizon
    v_star = env.optimal_value

    default_n = math.ceil(horizon ** (2.0 / 3.0) * math.log(horizon) ** (1.0 / 3.0))
    n, flags = _exploration_schedule(horizon, arms, n_explore, default_n)

    stats = BanditStats(users, arms, horizon)
    for k in range(arms):
        stats.update_block(k, n, env.draw_arm_block(k, n))
    means = stats.means()

    eps = math.sqrt(2.0 * math.log(horizon) / n)
    try:
        order = extract_order(means, eps)
    except ExtractOrderFailed:
        order = np.arange(arms, dtype=np.int64)
        flags.append("extract_order_failed")
    projected, _ = project_to_sp(means, order)
    assignment_pos, _ = sp_matching_reordered(projected, order, inst_obj.costs, inst_obj.budget)
    committed = order[assignment_pos]

    explore_gaps = v_star - theta.sum(axis=0)
    commit_gap = v_star - float(theta[np.arange(users), committed].sum())
    inst = np.concatenate([
        np.repeat(explore_gaps, n),
        np.full(horizon - n * arms, commit_gap),
    ])
    return RegretTrace(algo="emc", inst=inst, optimal_value=v_star, flags=tuple(flags),
                       info={"order": order, "committed": committed, "n_explore": n})


def sp_matching_reordered(theta_sp, order, costs, budget) -> tuple[np.ndarray, float]:
    """Solve a matrix that is single-peaked w.r.t. ``order`` (not PSP as given).

    Returns the assignment in order positions plus the optimal value; callers
    map positions back through ``order``.
    """
    order = np.asarray(order, dtype=np.int64)
    solver = SPMatchingSolver(np.asarray(costs, dtype=np.int64)[order], budget)
    return solver.solve(np.asarray(theta_sp, dtype=np.float64)[:, order])


def run_cucb_bruteforce(env, max_arms: int = 12) -> RegretTrace:
    """Combinatorial UCB with exhaustive subset optimization each round.

    Upper bounds are clamped to [0, 1] with unpulled pairs at 1; subsets
    covering more unpulled pairs are preferred outright, which forces every
    pair to be explored.  Exact for arbitrary matrices but exponential in K.
    Regret O(U sqrt(K T log T)).
    """
    inst_obj = env.instance
    theta = env.theta
    users, arms = theta.shape
    if arms > max_arms:
        raise TooManyArms(f"{arms} arms exceeds the per-round enumeration cap {max_arms}")
    horizon = inst_obj.horizon
    v_star = env.optimal_value
    rows = np.arange(users)

    subsets = feasible_subsets(inst_obj.costs, inst_obj.budget)
    member = np.zeros((len(subsets), arms), dtype=np.int64)
    for i, s in enumerate(subsets):
        member[i, s] = 1

    stats = BanditStats(users, arms, horizon)
    inst = np.empty(horizon)
    for t in range(horizon):
        ucb = stats.ucb()
        unpulled_per_arm = (stats.counts == 0).sum(axis=0)
        cover = member @ unpulled_per_arm
        candidates = np.flatnonzero(cover == cover.max())
        best_idx, best_val = -1, -np.inf
        for i in candidates:
            val = float(ucb[:, subsets[i]].max(axis=1).sum())
            if val > best_val:
                best_idx, best_val = int(i), val
        assignment, _ = assign_to_subset(ucb, subsets[best_idx])
        rewards = env.draw_round(assignment)
        stats.update(assignment, rewards)
        inst[t] = v_star - theta[rows, assignment].sum()
    return RegretTrace(algo="cucb", inst=inst, optimal_value=v_star)


def run_greedy_etc(env, n_explore="auto") -> RegretTrace:
    """Explore-then-commit around the greedy+max half-approximation.

    A simplified stand-in for a full confidence-scheduled learner: each arm is
    explored for N whole-population rounds (auto: N = ceil(ceil(T^(2/3)) / K)),
    then the learner commits to the best empirical assignment within the
    greedy+max subset of the empirical means.  The trace records 1/2-regret:
    inst = 0.5 * V_star - V(pi_t; theta), which may go negative.
    """
    inst_obj = env.instance
    theta = env.theta
    users, arms = theta.shape
    horizon = inst_obj.horizon
    v_star = env.optimal_value

    default_n = math.ceil(math.ceil(horizon ** (2.0 / 3.0)) / arms)
    n, flags = _exploration_schedule(horizon, arms, n_explore, default_n)
    flags.append("simplified_etc_schedule")

    stats = BanditStats(users, arms, horizon)
    for k in range(arms):
        stats.update_block(k, n, env.draw_arm_block(k, n))
    means = stats.means()

    subset, _ = greedy_max(means, inst_obj.costs, inst_obj.budget)
    committed, _ = assign_to_subset(means, subset)
    commit_value = float(theta[np.arange(users), committed].sum())

    half = 0.5 * v_star
    inst = np.concatenate([
        np.repeat(half - theta.sum(axis=0), n),
        np.full(horizon - n * arms, half - commit_value),
    ])
    return RegretTrace(algo="greedy_etc", inst=inst, optimal_value=v_star,
                       alpha=0.5, flags=tuple(flags))
