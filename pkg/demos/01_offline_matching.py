"""Offline budgeted matching on a small hand-built instance.

Three users rate five arms; the ratings only look single-peaked after
reordering the arms as 0, 1, 4, 3, 2.  We recover that order, solve the
budgeted matching exactly, and sanity-check against exhaustive enumeration
and the greedy half-approximation.
"""

import numpy as np

from spbandit import (
    assign_to_subset,
    brute_force_opt,
    greedy_max,
    matching_feasible,
    new_instance,
    solve_optimal,
)

theta = np.array([
    [0.85, 0.65, 0.15, 0.30, 0.45],
    [0.30, 0.90, 0.50, 0.60, 0.70],
    [0.10, 0.60, 0.25, 0.55, 0.95],
])
costs = np.array([1, 1, 1, 1, 1])
budget = 2

inst = new_instance(theta, costs, budget, horizon=100)
print(f"{inst.users} users x {inst.arms} arms, budget {budget}")

# Everyone on arm 1 is feasible (one arm, cost 1) and collects 2.15.
pi = np.array([1, 1, 1])
ok, cost = matching_feasible(pi, inst)
print(f"all users on arm 1: feasible={ok}, cost={cost}, "
      f"value={theta[np.arange(3), pi].sum():.2f}")

sol = solve_optimal(theta, costs, budget)
print(f"recovered arm order: {sol.order.tolist()}")
print(f"optimal value with budget {budget}: {sol.value:.4f} "
      f"(assignment {sol.assignment.tolist()})")

_, oracle = brute_force_opt(theta, costs, budget)
print(f"exhaustive oracle agrees: {abs(oracle - sol.value) < 1e-12}")

subset, gval = greedy_max(theta, costs, budget)
print(f"greedy+max picks {list(subset)} worth {gval:.4f} "
      f"(>= half of {oracle:.4f})")

assignment, value = assign_to_subset(theta, subset)
print(f"assignment within the greedy subset: {assignment.tolist()}, value {value:.4f}")
