"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("suite", max_examples=60, deadline=None, derandomize=True)
settings.load_profile("suite")


# Three users, five arms; unimodal only under the order (0, 1, 4, 3, 2).
DEMO_THETA = np.array([
    [0.85, 0.65, 0.15, 0.30, 0.45],
    [0.30, 0.90, 0.50, 0.60, 0.70],
    [0.10, 0.60, 0.25, 0.55, 0.95],
])
DEMO_ORDER = np.array([0, 1, 4, 3, 2])


@pytest.fixture
def demo_theta():
    return DEMO_THETA.copy()


def contiguity_filter(k: int, constraints) -> set[tuple[int, ...]]:
    """Brute-force oracle: permutations where every constraint is consecutive."""
    out = set()
    for perm in itertools.permutations(range(k)):
        pos = {a: i for i, a in enumerate(perm)}
        ok = True
        for c in constraints:
            ps = sorted(pos[a] for a in c)
            if ps[-1] - ps[0] != len(ps) - 1:
                ok = False
                break
        if ok:
            out.add(perm)
    return out


def asp_delta_bruteforce(theta, order) -> float:
    """Exhaustive triple scan defining the minimal ASP delta."""
    reord = np.asarray(theta)[:, np.asarray(order)]
    users, k = reord.shape
    worst = 0.0
    for u in range(users):
        for i in range(k):
            for j in range(i + 1, k):
                for l in range(j + 1, k):
                    worst = max(worst, min(reord[u, i], reord[u, l]) - reord[u, j])
    return worst


def unimodal_with_peak(row, p) -> bool:
    """Row is non-decreasing up to position p and non-increasing after."""
    row = np.asarray(row)
    return bool(np.all(np.diff(row[: p + 1]) >= 0) and np.all(np.diff(row[p:]) <= 0))


def sample_sp_in_box(rng, theta, ucb, peaks):
    """Random matrix in [theta, ucb] boxes, unimodal with the given peaks.

    Walking outward from each peak keeps every sampled entry between the true
    value and the running minimum of upper bounds, so the result lies in the
    confidence set whenever theta does.
    """
    users, arms = theta.shape
    out = np.empty_like(theta)
    for u in range(users):
        p = peaks[u]
        out[u, p] = theta[u, p] + rng.random() * (ucb[u, p] - theta[u, p])
        for q in range(p - 1, -1, -1):
            hi = min(ucb[u, q], out[u, q + 1])
            out[u, q] = theta[u, q] + rng.random() * (hi - theta[u, q])
        for q in range(p + 1, arms):
            hi = min(ucb[u, q], out[u, q - 1])
            out[u, q] = theta[u, q] + rng.random() * (hi - theta[u, q])
    return out


def random_unimodal_row(rng, k, lo=0.0, hi=1.0):
    vals = np.sort(lo + (hi - lo) * rng.random(k))[::-1]
    p = min(int(rng.random() * k), k - 1)
    row = np.empty(k)
    row[p] = vals[0]
    left, right, go_left = p - 1, p + 1, True
    for v in vals[1:]:
        if go_left and left >= 0:
            row[left] = v
            left -= 1
        elif not go_left and right < k:
            row[right] = v
            right += 1
        elif left >= 0:
            row[left] = v
            left -= 1
        else:
            row[right] = v
            right += 1
        go_left = not go_left
    return row, p
