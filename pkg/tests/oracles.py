"""Slow, independent reference implementations used only by the tests."""

import itertools

import numpy as np
from scipy.optimize import linprog


def saturate_prices(tables, alloc, iters=None):
    """Largest envy-free IR prices by repeated relaxation from p_j = v_j(m_j); None if they keep falling."""
    B = len(alloc)
    own = [tables[j][alloc[j]] for j in range(B)]
    p = list(own)
    for _ in range(iters or B + 2):
        changed = False
        for j in range(B):
            for k in range(B):
                cand = own[j] - tables[j][alloc[k]] + p[k]
                if cand < p[j] - 1e-13:
                    p[j], changed = cand, True
        if not changed:
            return p
    return None


def brute_force_rev(tables, N):
    best = (-np.inf, None, None)
    for alloc in itertools.product(range(N + 1), repeat=len(tables)):
        p = saturate_prices(tables, alloc)
        if p is not None and sum(p) > best[0] + 1e-12:
            best = (sum(p), alloc, p)
    return best


def lp_prices(tables, alloc):
    """Max sum of prices subject to IRB and EFB, via scipy's LP solver."""
    B = len(alloc)
    A, b = [], []
    for j in range(B):
        row = np.zeros(B)
        row[j] = 1
        A.append(row)
        b.append(tables[j][alloc[j]])
        for k in range(B):
            if k != j:
                row = np.zeros(B)
                row[j], row[k] = 1, -1
                A.append(row)
                b.append(tables[j][alloc[j]] - tables[j][alloc[k]])
    res = linprog(-np.ones(B), A_ub=np.array(A), b_ub=np.array(b), bounds=[(None, None)] * B, method="highs")
    if res.status == 2:
        return None
    return res.x


def random_monotone_tables(rng, B, N):
    steps = rng.random((B, N)) * (rng.random((B, N)) < 0.8)
    tables = np.concatenate([np.zeros((B, 1)), np.cumsum(steps, axis=1)], axis=1)
    tables /= max(tables.max(), 1e-9)
    return tables
