"""Match statistics: exact binomial confidence intervals and Elo fitting.

The Clopper-Pearson interval is computed from Beta quantiles found by
bisection on a hand-rolled regularized incomplete beta (Lentz's continued
fraction), so the package stays dependency-light. Elo ratings maximize the
log-likelihood of pairwise results under the standard logistic model
P(i beats j) = 1 / (1 + 10**((Rj - Ri) / 400)) with an optional Gaussian
prior on ratings; the first agent is anchored at 0 to fix the translation
degree of freedom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_LN10_400 = math.log(10.0) / 400.0


# -- regularized incomplete beta --------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    # Lentz's algorithm for the continued fraction of I_x(a, b).
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log(1.0 - x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def beta_quantile(p: float, a: float, b: float) -> float:
    """Inverse CDF of Beta(a, b) by bisection (monotone, deterministic)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p outside [0, 1]")
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if regularized_incomplete_beta(mid, a, b) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def clopper_pearson(w: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Exact binomial interval for w successes in n trials."""
    if n <= 0 or not 0 <= w <= n:
        raise ValueError(f"invalid counts w={w} n={n}")
    if int(w) != w:
        raise ValueError("w must be an integer; see clopper_pearson_fractional")
    alpha = 1.0 - level
    lo = 0.0 if w == 0 else beta_quantile(alpha / 2.0, w, n - w + 1)
    hi = 1.0 if w == n else beta_quantile(1.0 - alpha / 2.0, w + 1, n - w)
    return lo, hi


def clopper_pearson_fractional(w: float, n: int,
                               level: float = 0.95) -> tuple[float, float]:
    """Conservative bracket for fractional success counts (draws = 0.5):
    the lower bound uses floor(w), the upper bound ceil(w)."""
    lo, _ = clopper_pearson(int(math.floor(w)), n, level)
    _, hi = clopper_pearson(int(math.ceil(w)), n, level)
    return lo, hi


# -- Elo fitting -------------------------------------------------------------

@dataclass
class EloTable:
    ratings: list[float]          # first agent anchored at 0
    standard_errors: list[float]
    log_likelihood: float
    gradient_norm: float

    def gap(self, i: int, j: int) -> float:
        return self.ratings[i] - self.ratings[j]


class DisconnectedResultsError(ValueError):
    def __init__(self, components: list[list[int]]):
        super().__init__(f"result graph is disconnected: {components}")
        self.components = components


def _components(n: int, results) -> list[list[int]]:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j, wij, wji, d in results:
        if wij + wji + d > 0:
            parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for k in range(n):
        groups.setdefault(find(k), []).append(k)
    return list(groups.values())


def elo_fit(results: list[tuple[int, int, float, float, float]],
            n_agents: int | None = None,
            prior_sigma: float | None = 350.0,
            tol: float = 1e-8, max_iters: int = 200000) -> EloTable:
    """Maximum-likelihood Elo ratings from (i, j, wins_ij, wins_ji, draws).

    Draws count half a win each way. `prior_sigma` is the Gaussian prior's
    standard deviation in Elo points (None for a flat prior). Gradient
    ascent with backtracking runs until the gradient norm drops below
    `tol`; the first agent's rating is fixed at 0.
    """
    if n_agents is None:
        n_agents = 1 + max(max(i, j) for i, j, *_ in results)
    comps = _components(n_agents, results)
    if len(comps) > 1:
        raise DisconnectedResultsError(comps)

    pairs = [(i, j, wij + 0.5 * d, wji + 0.5 * d)
             for i, j, wij, wji, d in results]

    def loglik_and_grad(r: np.ndarray):
        ll = 0.0
        grad = np.zeros(n_agents)
        for i, j, sij, sji in pairs:
            diff = (r[j] - r[i]) * _LN10_400
            # log P(i beats j) = -log(1 + exp(diff))
            lpij = -np.logaddexp(0.0, diff)
            lpji = -np.logaddexp(0.0, -diff)
            ll += sij * lpij + sji * lpji
            pij = math.exp(lpij)
            g = _LN10_400 * (sij * (1.0 - pij) - sji * pij)
            grad[i] += g
            grad[j] -= g
        if prior_sigma is not None:
            ll -= float((r ** 2).sum()) / (2.0 * prior_sigma ** 2)
            grad -= r / prior_sigma ** 2
        grad[0] = 0.0  # anchored
        return ll, grad

    r = np.zeros(n_agents)
    ll, grad = loglik_and_grad(r)
    step = 2000.0
    iters = 0
    while float(np.max(np.abs(grad))) > tol and iters < max_iters:
        iters += 1
        while True:
            cand = r + step * grad
            cand[0] = 0.0
            ll2, grad2 = loglik_and_grad(cand)
            if ll2 >= ll or step < 1e-18:
                break
            step *= 0.5
        r, ll, grad = cand, ll2, grad2
        step *= 1.3

    # Standard errors from the observed information of the free ratings.
    if n_agents > 1:
        hess = np.zeros((n_agents, n_agents))
        for i, j, sij, sji in pairs:
            diff = (r[j] - r[i]) * _LN10_400
            pij = 1.0 / (1.0 + math.exp(diff))
            wgt = (sij + sji) * pij * (1.0 - pij) * _LN10_400 ** 2
            hess[i, i] += wgt
            hess[j, j] += wgt
            hess[i, j] -= wgt
            hess[j, i] -= wgt
        if prior_sigma is not None:
            hess += np.eye(n_agents) / prior_sigma ** 2
        free = hess[1:, 1:]
        try:
            cov = np.linalg.inv(free)
            ses = [0.0] + [float(math.sqrt(max(v, 0.0)))
                           for v in np.diag(cov)]
        except np.linalg.LinAlgError:
            ses = [float("nan")] * n_agents
    else:
        ses = [0.0]
    return EloTable(ratings=[float(x) for x in r], standard_errors=ses,
                    log_likelihood=float(ll),
                    gradient_norm=float(np.max(np.abs(grad))))


def predicted_win_probability(table: EloTable, i: int, j: int) -> float:
    return 1.0 / (1.0 + 10.0 ** ((table.ratings[j] - table.ratings[i]) / 400.0))
