"""Problem-domain types for budgeted user-to-arm matching.

An instance couples an expected-reward matrix ``theta`` (users x arms, entries
in [0, 1]) with positive integer arm costs, an integer per-round budget, and a
horizon.  A matching assigns every user exactly one arm; it is feasible when
the costs of the *distinct* selected arms sum to at most the budget, so many
users may share one arm at no extra cost.

All indices are 0-based, including in the serialized instance format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

__all__ = [
    "SPBanditError",
    "EntryOutOfRange",
    "CostExceedsBudget",
    "BadDimensions",
    "IndexOutOfRange",
    "Instance",
    "new_instance",
    "validate_instance",
    "load_instance",
    "save_instance",
    "selected_arms",
    "matching_value",
    "matching_feasible",
]


class SPBanditError(Exception):
    """Base class for all library errors."""


class EntryOutOfRange(SPBanditError):
    """A reward entry lies outside [0, 1]."""


class CostExceedsBudget(SPBanditError):
    """Some arm cost exceeds the budget, so the arm could never be selected."""


class BadDimensions(SPBanditError):
    """Structurally invalid instance: shapes, integrality, or horizon."""


class IndexOutOfRange(SPBanditError):
    """A matching references an arm index outside [0, K)."""


@dataclass(frozen=True, eq=False)
class Instance:
    """A full problem statement: rewards, costs, budget, and horizon.

    Immutable after construction; the arrays are marked read-only and the
    object is safe to share across concurrent workers.
    """

    theta: np.ndarray   # (U, K) float64, entries in [0, 1]
    costs: np.ndarray   # (K,) int64, 1 <= c_k <= budget
    budget: int
    horizon: int

    @property
    def users(self) -> int:
        return self.theta.shape[0]

    @property
    def arms(self) -> int:
        return self.theta.shape[1]

    def to_dict(self) -> dict:
        return {
            "users": self.users,
            "arms": self.arms,
            "theta": self.theta.tolist(),
            "costs": self.costs.tolist(),
            "budget": int(self.budget),
            "horizon": int(self.horizon),
        }


def new_instance(theta, costs, budget, horizon) -> Instance:
    """Check every invariant and return an immutable :class:`Instance`.

    Raises the error for the first violated invariant: ``BadDimensions`` for
    structural problems (shapes, non-integer costs, horizon too short),
    ``EntryOutOfRange`` for rewards outside [0, 1], and ``CostExceedsBudget``
    when some arm could never fit the budget.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 2:
        raise BadDimensions(f"theta must be 2-D, got shape {theta.shape}")
    users, arms = theta.shape
    if users < 1 or arms < 1:
        raise BadDimensions(f"need at least one user and one arm, got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise EntryOutOfRange("theta contains non-finite entries")
    if theta.min() < 0.0 or theta.max() > 1.0:
        u, k = np.unravel_index(int(np.argmax((theta < 0.0) | (theta > 1.0))), theta.shape)
        raise EntryOutOfRange(f"theta[{u},{k}] = {theta[u, k]} lies outside [0, 1]")

    costs_arr = np.asarray(costs)
    if costs_arr.ndim != 1 or costs_arr.shape[0] != arms:
        raise BadDimensions(f"costs must have length {arms}, got shape {costs_arr.shape}")
    if not np.issubdtype(costs_arr.dtype, np.integer):
        if not np.all(costs_arr == np.floor(costs_arr)):
            raise BadDimensions("costs must be integers")
    costs_arr = costs_arr.astype(np.int64)
    if costs_arr.min() < 1:
        raise BadDimensions("every cost must be a positive integer")

    budget = int(budget)
    if budget < 1:
        raise BadDimensions("budget must be a positive integer")
    if costs_arr.max() > budget:
        k = int(np.argmax(costs_arr > budget))
        raise CostExceedsBudget(
            f"arm {k} costs {costs_arr[k]} > budget {budget}; such arms can never be selected"
        )

    horizon = int(horizon)
    if horizon < max(users, arms):
        raise BadDimensions(f"horizon {horizon} < max(users, arms) = {max(users, arms)}")

    theta = theta.copy()
    theta.setflags(write=False)
    costs_arr.setflags(write=False)
    return Instance(theta=theta, costs=costs_arr, budget=budget, horizon=horizon)


def validate_instance(record: Mapping) -> Instance:
    """Validate a JSON-shaped record and return the checked :class:`Instance`.

    Expected fields: ``users``, ``arms``, ``theta`` (row-major list of rows),
    ``costs``, ``budget``, ``horizon``; an optional ``sp_order`` carries a
    ground-truth column permutation for diagnostics and is not validated
    beyond being a permutation.
    """
    for field in ("users", "arms", "theta", "costs", "budget", "horizon"):
        if field not in record:
            raise BadDimensions(f"missing field {field!r}")
    theta = np.asarray(record["theta"], dtype=np.float64)
    if theta.ndim != 2 or theta.shape != (int(record["users"]), int(record["arms"])):
        raise BadDimensions(
            f"theta shape {theta.shape} does not match users={record['users']}, arms={record['arms']}"
        )
    inst = new_instance(theta, record["costs"], record["budget"], record["horizon"])
    sp_order = record.get("sp_order")
    if sp_order is not None and sorted(sp_order) != list(range(inst.arms)):
        raise BadDimensions("sp_order is not a permutation of the arm indices")
    return inst


def load_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return validate_instance(json.load(fh))


def save_instance(instance: Instance, path, sp_order=None) -> None:
    """Write the instance JSON; ``sp_order`` is an optional diagnostic field."""
    record = instance.to_dict()
    if sp_order is not None:
        record["sp_order"] = [int(x) for x in sp_order]
    Path(path).write_text(json.dumps(record) + "\n", encoding="utf-8")


def _checked_assignment(assignment, arms: int) -> np.ndarray:
    pi = np.asarray(assignment, dtype=np.int64)
    if pi.ndim != 1 or pi.size < 1:
        raise BadDimensions(f"assignment must be a non-empty 1-D sequence, got shape {pi.shape}")
    if pi.min() < 0 or pi.max() >= arms:
        u = int(np.argmax((pi < 0) | (pi >= arms)))
        raise IndexOutOfRange(f"assignment[{u}] = {pi[u]} outside [0, {arms})")
    return pi


def selected_arms(assignment) -> np.ndarray:
    """Distinct arms used by a matching, sorted ascending."""
    return np.unique(np.asarray(assignment, dtype=np.int64))


def matching_value(assignment, theta) -> float:
    """Total expected reward sum(theta[u, pi(u)]) of a matching."""
    theta = np.asarray(theta, dtype=np.float64)
    pi = _checked_assignment(assignment, theta.shape[1])
    if pi.shape[0] != theta.shape[0]:
        raise BadDimensions(f"assignment length {pi.shape[0]} != users {theta.shape[0]}")
    return float(theta[np.arange(theta.shape[0]), pi].sum())


def matching_feasible(assignment, instance: Instance) -> tuple[bool, int]:
    """Whether the distinct selected arms fit the budget, plus their total cost."""
    pi = _checked_assignment(assignment, instance.arms)
    cost = int(instance.costs[selected_arms(pi)].sum())
    return cost <= instance.budget, cost
