"""Instance generation, stochastic environments, experiment plans, and slope fits.

Reproducibility contract: every random quantity in the package is derived from
the uniform doubles of a Philox counter-based generator seeded through
``numpy.random.SeedSequence``.  Instances, permutations, and reward streams
are pure functions of (master seed, indices), so rerunning a plan with the
same master seed reproduces the output files byte for byte; the executor's
worker count never changes results.

Generated instances follow a fixed recipe: per user, K values are drawn
uniformly from a value range (default [0.2, 0.9]), a peak position is drawn
uniformly, the largest value is placed at the peak, and the remaining values
are assigned in decreasing order alternately to the nearest unfilled slot
left, then right, of the peak (falling back to the other side when one is
exhausted).  Rows are therefore unimodal by construction.  Default costs are
all 1 and the default budget is floor(K/2), clamped to at least 1.

Results CSV columns (exact order):
``algo, instance_id, seed, horizon, t, inst_regret, cum_regret, flags``.
Traces are stored on a subsampled grid: every round up to 1000, then
t <- max(t+1, floor(21*t/20)); the final round is always included.  The grid
is documented in the CSV header comments and is part of the file format.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bandit import (
    RegretTrace,
    run_cucb_bruteforce,
    run_emc,
    run_greedy_etc,
    run_mvm,
    run_peak_id_mvm,
)
from .core import Instance, SPBanditError, new_instance
from .offline import brute_force_opt, solve_optimal
from .spstruct import ExtractOrderFailed, NotPSP

__all__ = [
    "make_rng",
    "rand_permutation",
    "GeneratedInstance",
    "PermutedInstance",
    "generate_sp_theta",
    "generate_sp_instance",
    "permute_columns",
    "Environment",
    "AlgoConfig",
    "ExperimentPlan",
    "RunRecord",
    "subsample_grid",
    "simulate",
    "write_results_csv",
    "read_results_csv",
    "SlopeFit",
    "InsufficientPoints",
    "fit_slope",
    "fits_from_csv",
    "run_plan",
]

CSV_COLUMNS = ("algo", "instance_id", "seed", "horizon", "t", "inst_regret", "cum_regret", "flags")

_TAG_INSTANCE, _TAG_PERMUTE, _TAG_RUN = 1, 2, 3


class InsufficientPoints(SPBanditError):
    """Too few positive points in range to fit a log-log slope."""


def make_rng(entropy) -> np.random.Generator:
    """Philox-backed generator; the package consumes only its uniform doubles."""
    if not isinstance(entropy, np.random.SeedSequence):
        entropy = np.random.SeedSequence(entropy)
    return np.random.Generator(np.random.Philox(entropy))


def rand_permutation(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform permutation via argsort of uniform keys (portable)."""
    return np.argsort(rng.random(n), kind="stable").astype(np.int64)


def _rand_index(rng: np.random.Generator, n: int) -> int:
    return min(int(rng.random() * n), n - 1)


@dataclass(frozen=True)
class GeneratedInstance:
    """A generated instance plus its ground truth (identity order, peaks)."""

    instance: Instance
    peaks: np.ndarray  # peak position of each user under the identity order


@dataclass(frozen=True)
class PermutedInstance:
    """Column-shuffled instance; the permutation is diagnostic only.

    ``sp_order`` is the order that restores unimodality:
    theta[:, sp_order] is perfectly single-peaked.
    """

    instance: Instance
    permutation: np.ndarray
    sp_order: np.ndarray


def generate_sp_theta(users, arms, rng, value_range=(0.2, 0.9), peak_gap=0.0):
    """Unimodal reward rows; returns (theta, peak positions).

    With ``peak_gap > 0`` the non-peak values are drawn from the range shrunk
    by the gap and the peak is drawn above the runner-up by at least the gap,
    so every user's best arm is separated by at least ``peak_gap``.
    """
    lo, hi = float(value_range[0]), float(value_range[1])
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError(f"value range must satisfy 0 <= lo < hi <= 1, got {value_range}")
    if peak_gap < 0 or (peak_gap > 0 and hi - peak_gap <= lo):
        raise ValueError(f"peak_gap {peak_gap} leaves no room in {value_range}")
    theta = np.empty((users, arms))
    peaks = np.empty(users, dtype=np.int64)
    for u in range(users):
        if peak_gap > 0 and arms >= 2:
            rest = np.sort(lo + (hi - peak_gap - lo) * rng.random(arms - 1))[::-1]
            top = rest[0] + peak_gap + (hi - rest[0] - peak_gap) * rng.random()
            vals = np.concatenate([[top], rest])
        else:
            vals = np.sort(lo + (hi - lo) * rng.random(arms))[::-1]
        p = _rand_index(rng, arms)
        row = np.empty(arms)
        row[p] = vals[0]
        left, right, go_left = p - 1, p + 1, True
        for v in vals[1:]:
            if go_left and left >= 0:
                row[left] = v
                left -= 1
            elif not go_left and right < arms:
                row[right] = v
                right += 1
            elif left >= 0:
                row[left] = v
                left -= 1
            else:
                row[right] = v
                right += 1
            go_left = not go_left
        theta[u] = row
        peaks[u] = p
    return theta, peaks


def generate_sp_instance(users, arms, seed, value_range=(0.2, 0.9), costs_mode="unit",
                         budget=None, horizon=100_000, peak_gap=0.0) -> GeneratedInstance:
    """Draw a perfectly single-peaked instance; deterministic in the seed."""
    rng = make_rng(seed)
    theta, peaks = generate_sp_theta(users, arms, rng, value_range, peak_gap)
    if budget is None:
        budget = max(1, arms // 2)
    if costs_mode == "unit":
        costs = np.ones(arms, dtype=np.int64)
    elif costs_mode == "random":
        costs = 1 + np.floor(rng.random(arms) * budget).astype(np.int64)
        costs = np.minimum(costs, budget)
    else:
        raise ValueError(f"unknown costs mode {costs_mode!r}")
    inst = new_instance(theta, costs, budget, horizon)
    return GeneratedInstance(instance=inst, peaks=peaks)


def permute_columns(instance: Instance, seed) -> PermutedInstance:
    """Shuffle columns (costs follow their arms); records the hidden permutation."""
    rng = make_rng(seed)
    perm = rand_permutation(rng, instance.arms)
    shuffled = new_instance(instance.theta[:, perm], instance.costs[perm],
                            instance.budget, instance.horizon)
    return PermutedInstance(instance=shuffled, permutation=perm,
                            sp_order=np.argsort(perm).astype(np.int64))


class Environment:
    """Stochastic semi-bandit environment over one instance.

    Rewards are independent Bernoulli draws with the instance's means; in
    deterministic mode draws return the means themselves (zero noise).  The
    optimum used as the regret baseline is computed once at construction
    (single-peaked solver when possible, exhaustive search otherwise) unless
    supplied.  Each environment owns its generator and belongs to one run.
    """

    _CHUNK = 1 << 16

    def __init__(self, instance: Instance, seed, optimal_value=None, deterministic=False):
        self.instance = instance
        self.theta = instance.theta
        self.deterministic = bool(deterministic)
        self._rng = make_rng(seed)
        self._rows = np.arange(instance.users)
        if optimal_value is None:
            try:
                optimal_value = solve_optimal(instance.theta, instance.costs, instance.budget).value
            except (NotPSP, ExtractOrderFailed):
                optimal_value = brute_force_opt(instance.theta, instance.costs, instance.budget)[1]
        self.optimal_value = float(optimal_value)

    def draw_round(self, arms_played) -> np.ndarray:
        """One reward per user on their matched arm."""
        means = self.theta[self._rows, arms_played]
        if self.deterministic:
            return means.copy()
        return (self._rng.random(means.shape[0]) < means).astype(np.float64)

    def draw_arm_block(self, arm: int, n: int) -> np.ndarray:
        """Total reward per user over n whole-population rounds on one arm.

        Distribution-identical to n successive ``draw_round`` calls on a
        constant matching; drawn in bulk so long exploration phases stay
        cheap.
        """
        p = self.theta[:, arm]
        if self.deterministic:
            return n * p
        total = np.zeros(p.shape[0])
        done = 0
        while done < n:
            m = min(self._CHUNK, n - done)
            total += (self._rng.random((m, p.shape[0])) < p[None, :]).sum(axis=0)
            done += m
        return total


@dataclass
class AlgoConfig:
    """Tagged algorithm configuration: {algo: name, params: {...}}."""

    algo: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"algo": self.algo, "params": dict(self.params)}


_KNOWN_ALGOS = ("emc", "mvm", "peak_id_mvm", "cucb", "greedy_etc")


@dataclass
class ExperimentPlan:
    """Everything needed to reproduce an experiment from the master seed."""

    users: int
    arms: int
    n_instances: int
    seeds_per_instance: int
    horizons: tuple
    algorithms: tuple
    master_seed: int
    costs_mode: str = "unit"
    budget: int | None = None
    value_range: tuple = (0.2, 0.9)
    peak_gap: float = 0.0

    def __post_init__(self):
        self.horizons = tuple(int(t) for t in self.horizons)
        algos = []
        for cfg in self.algorithms:
            if isinstance(cfg, AlgoConfig):
                algos.append(cfg)
            else:
                algos.append(AlgoConfig(algo=cfg["algo"], params=dict(cfg.get("params", {}))))
        self.algorithms = tuple(algos)
        if not self.algorithms:
            raise ValueError("plan needs at least one algorithm")
        for cfg in self.algorithms:
            if cfg.algo not in _KNOWN_ALGOS:
                raise ValueError(f"unknown algorithm {cfg.algo!r}; known: {_KNOWN_ALGOS}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["horizons"] = list(self.horizons)
        d["algorithms"] = [cfg.to_dict() for cfg in self.algorithms]
        d["value_range"] = list(self.value_range)
        return d


@dataclass
class RunRecord:
    """One run's subsampled trace, ready for the results CSV."""

    algo: str
    instance_id: int
    seed: int
    horizon: int
    t: np.ndarray
    inst: np.ndarray
    cum: np.ndarray
    flags: str = ""


def subsample_grid(horizon: int) -> np.ndarray:
    """Storage grid: all rounds up to 1000, then ~5% steps, final round included."""
    if horizon <= 1000:
        return np.arange(1, horizon + 1, dtype=np.int64)
    ts = list(range(1, 1001))
    t = 1000
    while t < horizon:
        t = min(max(t + 1, 21 * t // 20), horizon)
        ts.append(t)
    return np.asarray(ts, dtype=np.int64)


def _plan_instance(plan: ExperimentPlan, instance_id: int, horizon: int):
    gen = generate_sp_instance(
        plan.users, plan.arms,
        seed=np.random.SeedSequence([plan.master_seed, _TAG_INSTANCE, instance_id]),
        value_range=plan.value_range, costs_mode=plan.costs_mode,
        budget=plan.budget, horizon=horizon, peak_gap=plan.peak_gap,
    )
    perm = permute_columns(gen.instance,
                           np.random.SeedSequence([plan.master_seed, _TAG_PERMUTE, instance_id]))
    return gen, perm


def _run_algorithm(cfg: AlgoConfig, gen: GeneratedInstance, perm: PermutedInstance,
                   run_seed, v_star: float) -> RegretTrace:
    """Dispatch one algorithm onto the view of the instance it is entitled to.

    Learners that know the single-peaked structure (mvm, peak_id_mvm) see the
    unshuffled instance with the identity order; structure-free learners see
    the column-permuted instance.
    """
    identity = np.arange(gen.instance.arms, dtype=np.int64)
    if cfg.algo == "mvm":
        env = Environment(gen.instance, run_seed, optimal_value=v_star)
        return run_mvm(env, identity, peaks=gen.peaks)
    if cfg.algo == "peak_id_mvm":
        env = Environment(gen.instance, run_seed, optimal_value=v_star)
        return run_peak_id_mvm(env, identity)
    env = Environment(perm.instance, run_seed, optimal_value=v_star)
    if cfg.algo == "emc":
        return run_emc(env, n_explore=cfg.params.get("n_explore", "auto"))
    if cfg.algo == "greedy_etc":
        return run_greedy_etc(env, n_explore=cfg.params.get("n_explore", "auto"))
    if cfg.algo == "cucb":
        return run_cucb_bruteforce(env, max_arms=cfg.params.get("max_arms", 12))
    raise ValueError(f"unknown algorithm {cfg.algo!r}")


def _simulate_cell(args) -> RunRecord:
    plan, instance_id, seed_idx, algo_idx, horizon = args
    cfg = plan.algorithms[algo_idx]
    gen, perm = _plan_instance(plan, instance_id, horizon)
    v_star = solve_optimal(gen.instance.theta, gen.instance.costs, gen.instance.budget).value
    run_seed = np.random.SeedSequence(
        [plan.master_seed, _TAG_RUN, instance_id, seed_idx, algo_idx, horizon])
    try:
        trace = _run_algorithm(cfg, gen, perm, run_seed, v_star)
    except SPBanditError as exc:
        return RunRecord(algo=cfg.algo, instance_id=instance_id, seed=seed_idx,
                         horizon=horizon, t=np.asarray([horizon], dtype=np.int64),
                         inst=np.asarray([np.nan]), cum=np.asarray([np.nan]),
                         flags=f"error:{type(exc).__name__}")
    grid = subsample_grid(horizon)
    t, inst, cum = trace.sample(grid)
    return RunRecord(algo=cfg.algo, instance_id=instance_id, seed=seed_idx,
                     horizon=horizon, t=t, inst=inst, cum=cum,
                     flags=";".join(trace.flags))


def simulate(plan: ExperimentPlan, jobs: int = 1) -> list[RunRecord]:
    """Execute every (instance, seed, algorithm, horizon) cell of the plan.

    Results are returned in deterministic plan order regardless of ``jobs``;
    every run derives its own seed from the master seed and the cell indices.
    """
    cells = [
        (plan, iid, sid, aid, horizon)
        for iid in range(plan.n_instances)
        for sid in range(plan.seeds_per_instance)
        for aid in range(len(plan.algorithms))
        for horizon in plan.horizons
    ]
    if jobs <= 1:
        return [_simulate_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_simulate_cell, cells, chunksize=1))


def write_results_csv(records: list[RunRecord], path) -> None:
    """Write the results CSV; floats use shortest round-trip repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# spbandit results v1\n")
        fh.write("# grid: every round t <= 1000, then t <- max(t+1, floor(21*t/20)); "
                 "final round always included\n")
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            prefix = f"{rec.algo},{rec.instance_id},{rec.seed},{rec.horizon}"
            for i in range(rec.t.shape[0]):
                fh.write(f"{prefix},{int(rec.t[i])},{float(rec.inst[i])!r},"
                         f"{float(rec.cum[i])!r},{rec.flags}\n")


def read_results_csv(path) -> dict:
    """Parse the results CSV back into column arrays (skips '#' comments)."""
    rows = {name: [] for name in CSV_COLUMNS}
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise SPBanditError(f"unexpected CSV columns {header}")
        for row in reader:
            for name, value in zip(CSV_COLUMNS, row):
                rows[name].append(value)
    return {
        "algo": np.asarray(rows["algo"], dtype=object),
        "instance_id": np.asarray(rows["instance_id"], dtype=np.int64),
        "seed": np.asarray(rows["seed"], dtype=np.int64),
        "horizon": np.asarray(rows["horizon"], dtype=np.int64),
        "t": np.asarray(rows["t"], dtype=np.int64),
        "inst_regret": np.asarray(rows["inst_regret"], dtype=np.float64),
        "cum_regret": np.asarray(rows["cum_regret"], dtype=np.float64),
        "flags": np.asarray(rows["flags"], dtype=object),
    }


@dataclass(frozen=True)
class SlopeFit:
    """Ordinary least squares on (ln t, ln R) over a time range."""

    slope: float
    intercept: float
    t_min: float
    t_max: float
    r2: float
    n_points: int


def fit_slope(t, r, t_min=None, t_max=None) -> SlopeFit:
    """OLS log-log slope; points with R <= 0 or outside the range are dropped.

    Raises :class:`InsufficientPoints` with fewer than 3 usable points.
    """
    t = np.asarray(t, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    lo = float(t_min) if t_min is not None else float(t.min())
    hi = float(t_max) if t_max is not None else float(t.max())
    mask = (t >= lo) & (t <= hi) & (r > 0.0) & np.isfinite(r)
    n = int(mask.sum())
    if n < 3:
        raise InsufficientPoints(f"only {n} positive points in [{lo}, {hi}]")
    x = np.log(t[mask])
    y = np.log(r[mask])
    xm, ym = x.mean(), y.mean()
    var = float(((x - xm) ** 2).sum())
    if var == 0.0:
        raise InsufficientPoints("all points share one time value")
    slope = float(((x - xm) * (y - ym)).sum() / var)
    intercept = float(ym - slope * xm)
    ss_res = float(((y - (intercept + slope * x)) ** 2).sum())
    ss_tot = float(((y - ym) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return SlopeFit(slope=slope, intercept=intercept, t_min=lo, t_max=hi, r2=r2, n_points=n)


def fits_from_csv(path, t_min=None, t_max=None) -> list[dict]:
    """One slope record per algorithm found in a results CSV.

    Algorithms run at several horizons get an *endpoint* fit: mean final
    regret per horizon against the horizon.  Single-horizon algorithms get a
    *trajectory* fit on the mean cumulative-regret curve; its default range is
    the upper half of the time grid in log scale, [sqrt(T), T].
    """
    cols = read_results_csv(path)
    ok = np.asarray([not f.startswith("error:") for f in cols["flags"]])
    fits = []
    seen: list[str] = []
    for a in cols["algo"]:
        if a not in seen:
            seen.append(a)
    for algo in seen:
        sel = (cols["algo"] == algo) & ok
        horizons = sorted(set(cols["horizon"][sel].tolist()))
        if not horizons:  # every run of this algorithm errored
            continue
        if len(horizons) > 1:
            points_t, points_r = [], []
            for horizon in horizons:
                at_end = sel & (cols["horizon"] == horizon) & (cols["t"] == horizon)
                points_t.append(horizon)
                points_r.append(float(cols["cum_regret"][at_end].mean()))
            record = {"algo": algo, "mode": "endpoint", "horizon": None}
            try:
                record.update(_fit_dict(fit_slope(points_t, points_r, t_min, t_max)))
            except InsufficientPoints:
                record.update(_null_fit(t_min, t_max))
            fits.append(record)
        else:
            horizon = horizons[0]
            at = sel & (cols["horizon"] == horizon)
            ts = np.unique(cols["t"][at])
            mean_r = np.asarray([float(cols["cum_regret"][at & (cols["t"] == t)].mean())
                                 for t in ts])
            lo = t_min if t_min is not None else math.ceil(math.sqrt(horizon))
            hi = t_max if t_max is not None else horizon
            record = {"algo": algo, "mode": "trajectory", "horizon": int(horizon)}
            try:
                record.update(_fit_dict(fit_slope(ts, mean_r, lo, hi)))
            except InsufficientPoints:
                record.update(_null_fit(lo, hi))
            fits.append(record)
    return fits


def _null_fit(t_min, t_max) -> dict:
    """Placeholder for groups with too few positive points to fit."""
    return {"slope": None, "intercept": None, "r2": None, "n_points": 0,
            "t_min": t_min, "t_max": t_max, "error": "insufficient_points"}


def _fit_dict(fit: SlopeFit) -> dict:
    return {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
            "n_points": fit.n_points, "t_min": fit.t_min, "t_max": fit.t_max}


def run_plan(plan: ExperimentPlan, out_dir, jobs: int = 1, t_min=None, t_max=None) -> dict:
    """Simulate a plan, write results.csv / slopes.json / resolved_config.json.

    The slopes are computed from the written CSV, so any consumer re-fitting
    from the file sees exactly the same numbers.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = simulate(plan, jobs=jobs)
    csv_path = out / "results.csv"
    write_results_csv(records, csv_path)
    fits = fits_from_csv(csv_path, t_min=t_min, t_max=t_max)
    slopes_path = out / "slopes.json"
    slopes_path.write_text(json.dumps({"fits": fits}, indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
    config_path = out / "resolved_config.json"
    resolved = {"plan": plan.to_dict(), "t_min": t_min, "t_max": t_max, "jobs": jobs}
    config_path.write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
    return {"csv": csv_path, "slopes": slopes_path, "config": config_path, "fits": fits}
