"""Brute-force ground truth for small instances.

Enumeration is odometer order with node 0 as the most significant digit, so
the first minimum found is the lexicographically smallest argmin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import EnergyModel
from .errors import BudgetExceeded

DEFAULT_MAX_STATES = 10 ** 7
_CHUNK = 1 << 16


@dataclass(frozen=True)
class OracleBudget:
    max_states: int = DEFAULT_MAX_STATES


def _enumerate_min(candidates, energy_batch, budget: OracleBudget):
    sizes = [len(c) for c in candidates]
    total = 1
    for s in sizes:
        total *= s
    if total > budget.max_states:
        raise BudgetExceeded(f"{total} states exceed the budget of {budget.max_states}")
    k = len(sizes)
    if k == 0:
        return np.zeros(0, dtype=np.int64), float(energy_batch(np.zeros((1, 0), dtype=np.int64))[0])
    radix = np.array(sizes, dtype=np.int64)
    place = np.ones(k, dtype=np.int64)
    for i in range(k - 2, -1, -1):
        place[i] = place[i + 1] * radix[i + 1]
    best_e = np.inf
    best = None
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        digits = (codes[:, None] // place[None, :]) % radix[None, :]
        U = np.empty_like(digits)
        for i, c in enumerate(candidates):
            U[:, i] = np.asarray(c)[digits[:, i]]
        e = energy_batch(U)
        j = int(np.argmin(e))
        if e[j] < best_e:
            best_e = float(e[j])
            best = U[j].copy()
    return best, best_e


def exact_minimum(model: EnergyModel, prior_mode: str = "G", budget: OracleBudget = OracleBudget()):
    """Global minimum of the energy by exhaustive enumeration."""
    table = model.prior.table(prior_mode)
    off = model.prior.offset
    e = model.edges
    idx = np.arange(model.node_count)

    def batch(U):
        out = model.unary[idx[None, :], U].sum(axis=1)
        if len(e):
            out = out + (model.weights[None, :] * table[U[:, e[:, 0]] - U[:, e[:, 1]] + off]).sum(axis=1)
        return out

    cands = [np.arange(model.label_count)] * model.node_count
    return _enumerate_min(cands, batch, budget)


def exact_move_minimum(move, budget: OracleBudget = OracleBudget()):
    """Exhaustive minimum of a move's energy over its feasible set.

    ``move`` is any object with ``candidates()`` and ``evaluate_batch(U)``
    (range subproblems and binary moves both qualify).
    """
    return _enumerate_min(move.candidates(), move.evaluate_batch, budget)
