"""Certified upper bound on the mean squared gradient norm, plus the tuning
rules derived from it.

The bound ``g(mu, N, eta; P, B, K)`` is a sum of four terms: an optimization
term that decays like 1/N, two noise-floor terms scaling with sigma^2, and a
momentum-variance term scaling with mu^2 * M.  It is valid whenever the two
step-size conditions checked by :func:`stepsize_feasible` hold for some slack
constant delta in (0, 1); :func:`delta_max` returns the largest admissible
delta, which gives the tightest certifiable bound.

All searches here (best momentum, best averaging interval) are plain grid
scans over the bound, so their results can be replayed exactly by an
independent loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .errors import InfeasibilityError

DELTA_CAP = 1.0 - 1e-6  # keep delta strictly inside (0, 1)
MU_GRID = tuple(i / 100.0 for i in range(100))


@dataclass(frozen=True)
class BoundInputs:
    """Objective-side constants the bound consumes.

    ``delta_f`` is F at the start point minus the lower bound F*.  ``delta``
    is the slack constant; leave it None to have every evaluation use the
    largest admissible value for its own (eta, mu).
    """

    lipschitz_L: float
    grad_bound_M: float
    sigma2: float
    delta_f: float
    delta: float | None = None

    def __post_init__(self):
        for name in ("lipschitz_L", "grad_bound_M", "sigma2", "delta_f"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
            object.__setattr__(self, name, v)
        if self.delta is not None:
            delta = float(self.delta)
            if not (0.0 < delta < 1.0):
                raise ValueError(f"delta must lie in (0, 1), got {self.delta!r}")
            object.__setattr__(self, "delta", delta)


@dataclass(frozen=True)
class BoundBreakdown:
    """The four summands of the bound, in printed order, plus their sum."""

    term1: float
    term2: float
    term3: float
    term4: float
    total: float
    delta_used: float
    feasible: bool


@dataclass(frozen=True)
class FeasibilityReport:
    """Both step-size conditions, each reported as 1 minus its left side."""

    feasible: bool
    margin_step: float   # 1 - [L^2 eta^2 (K+1)(K-2) / (2(1-mu)^2) + 2 eta L K / (1-mu)]
    margin_delta: float  # 1 - [delta + L^2 eta^2 / (1-mu)^2]


@dataclass(frozen=True)
class ConditionReport:
    holds: bool
    margin: float
    branch: str


@dataclass(frozen=True)
class SpeedupReport:
    eta_threshold: float
    holds: bool
    g_mavg: float
    g_kavg_scaled: float
    scaled_n: int


@dataclass(frozen=True)
class MuVsPEntry:
    lam: int
    num_learners: int
    meta_iters: int
    mu_star: float
    bound: float


@dataclass(frozen=True)
class MuVsPReport:
    entries: tuple[MuVsPEntry, ...]
    nondecreasing: bool


def delta_max(eta: float, mu: float, lipschitz_L: float) -> float:
    """Largest slack constant compatible with the step size, capped below 1."""
    if eta <= 0 or lipschitz_L < 0:
        raise ValueError("need eta > 0 and lipschitz_L >= 0")
    if not (0.0 <= mu < 1.0):
        raise ValueError(f"momentum must lie in [0, 1), got {mu!r}")
    limit = 1.0 - lipschitz_L**2 * eta**2 / (1.0 - mu) ** 2
    out = min(DELTA_CAP, limit)
    if out <= 0.0:
        raise InfeasibilityError(
            f"no admissible delta: L^2 eta^2/(1-mu)^2 = {1.0 - limit:g} >= 1"
        )
    return out


def stepsize_feasible(
    eta: float, mu: float, local_steps: int, lipschitz_L: float, delta: float
) -> FeasibilityReport:
    """Evaluate both step-size conditions, in their stricter (additive) form.

    Infeasible is a valid outcome, reported rather than raised.  The (K-2)
    factor is kept as printed, so it contributes negatively at K = 1.
    """
    if eta <= 0 or local_steps < 1 or lipschitz_L < 0:
        raise ValueError("need eta > 0, local_steps >= 1, lipschitz_L >= 0")
    if not (0.0 <= mu < 1.0) or not (0.0 < delta < 1.0):
        raise ValueError("need mu in [0, 1) and delta in (0, 1)")
    L, k = lipschitz_L, local_steps
    lhs_step = (
        L**2 * eta**2 * (k + 1) * (k - 2) / (2 * (1 - mu) ** 2)
        + 2 * eta * L * k / (1 - mu)
    )
    lhs_delta = delta + L**2 * eta**2 / (1 - mu) ** 2
    margin_step = 1.0 - lhs_step
    margin_delta = 1.0 - lhs_delta
    return FeasibilityReport(
        feasible=(margin_step >= 0.0 and margin_delta >= 0.0),
        margin_step=margin_step,
        margin_delta=margin_delta,
    )


def _resolve_delta(inputs: BoundInputs, eta: float, mu: float) -> float:
    if inputs.delta is not None:
        return inputs.delta
    return delta_max(eta, mu, inputs.lipschitz_L)


def convergence_bound(
    mu: float, n_meta: int, eta: float, p: int, b: int, k: int, inputs: BoundInputs
) -> BoundBreakdown:
    """Evaluate the four-term bound at one hyperparameter tuple.

    The value is computed even when the step-size conditions fail; the
    ``feasible`` flag records whether it is actually certified.
    """
    if not (0.0 <= mu < 1.0):
        raise ValueError(f"momentum must lie in [0, 1), got {mu!r}")
    if eta <= 0:
        raise ValueError("eta must be positive")
    if min(n_meta, p, b, k) < 1:
        raise ValueError("n_meta, p, b, k must all be >= 1")
    delta = _resolve_delta(inputs, eta, mu)
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    L, m_bound, s2, df = (
        inputs.lipschitz_L, inputs.grad_bound_M, inputs.sigma2, inputs.delta_f,
    )
    theta = k - 1 + delta
    one_minus = 1.0 - mu
    term1 = 2 * one_minus * df / (n_meta * theta * eta)
    term2 = L**2 * eta**2 * s2 * (2 * k - 1) * k * (k - 1) / (6 * theta * b * one_minus**2)
    term3 = (
        2 * L * k**2 * s2 * eta / (p * b * theta * one_minus)
        * (1 + mu**2 / (2 * one_minus**2))
    )
    term4 = L * eta * mu**2 * k**2 * m_bound / (theta * one_minus**3)
    feasible = stepsize_feasible(eta, mu, k, L, delta).feasible
    return BoundBreakdown(
        term1=term1, term2=term2, term3=term3, term4=term4,
        total=term1 + term2 + term3 + term4,
        delta_used=delta, feasible=feasible,
    )


def optimal_mu(
    n_meta: int, eta: float, p: int, b: int, k: int, inputs: BoundInputs
) -> tuple[float, float]:
    """Minimize the bound over the momentum grid {0.00, 0.01, ..., 0.99}.

    Each grid point is evaluated with its own largest admissible delta and
    kept only if the step-size conditions hold there.  Ties break toward the
    smaller momentum.
    """
    best_mu, best_g = None, math.inf
    for mu in MU_GRID:
        try:
            delta = delta_max(eta, mu, inputs.lipschitz_L)
        except InfeasibilityError:
            continue
        if not stepsize_feasible(eta, mu, k, inputs.lipschitz_L, delta).feasible:
            continue
        g = convergence_bound(mu, n_meta, eta, p, b, k, replace(inputs, delta=delta)).total
        if g < best_g:
            best_mu, best_g = mu, g
    if best_mu is None:
        raise InfeasibilityError("no feasible momentum value on the grid")
    return best_mu, best_g


def positive_momentum_condition(
    n_meta: int, eta: float, p: int, b: int, k: int, inputs: BoundInputs
) -> ConditionReport:
    """The printed sufficient condition for the best momentum being nonzero.

    Dispatches on the averaging interval: one inequality for K <= 5, another
    for K > 5.  The margin is positive exactly when the condition holds.
    """
    L, s2, df = inputs.lipschitz_L, inputs.sigma2, inputs.delta_f
    if k <= 5:
        denom = 5 * L * n_meta * s2 * (5 / p + 6 * L)
        rhs = math.inf if denom == 0 else b * df / denom
        return ConditionReport(holds=eta**2 < rhs, margin=rhs - eta**2, branch="K<=5")
    if df == 0:
        lhs = 0.0 if n_meta * s2 == 0 else math.inf
    else:
        lhs = n_meta * s2 / (2 * b * df) * (1 / (2 * L * p) + 1 / L) if L > 0 else (
            0.0 if s2 == 0 else math.inf
        )
    return ConditionReport(holds=lhs < 1.0, margin=1.0 - lhs, branch="K>5")


def speedup_check(
    mu: float, n_meta: int, eta: float, p: int, b: int, k: int, inputs: BoundInputs
) -> SpeedupReport:
    """Compare the bound at momentum mu against momentum 0 with a longer run.

    The reference run length is N/(1 - mu/2), rounded up to keep it an
    iteration count.  Also reports the step-size threshold below which the
    momentum side is guaranteed to win.
    """
    if not (0.0 < mu < 1.0):
        raise ValueError("speedup comparison needs mu in (0, 1)")
    L, m_bound, s2, df = (
        inputs.lipschitz_L, inputs.grad_bound_M, inputs.sigma2, inputs.delta_f,
    )
    c3 = 2 * L * k * s2 + p * L**2 * s2 * (2 * k - 1) * (k - 1) + L * k * m_bound * p * b
    if c3 > 0:
        eta_threshold = math.sqrt(p * b * df * (1 - mu) ** 3 / (2 * n_meta * k * c3))
    else:
        eta_threshold = math.inf
    scaled_n = math.ceil(n_meta / (1 - mu / 2))
    g_mavg = convergence_bound(mu, n_meta, eta, p, b, k, inputs).total
    g_kavg = convergence_bound(0.0, scaled_n, eta, p, b, k, inputs).total
    return SpeedupReport(
        eta_threshold=eta_threshold,
        holds=g_mavg < g_kavg,
        g_mavg=g_mavg,
        g_kavg_scaled=g_kavg,
        scaled_n=scaled_n,
    )


def _divisors(s: int) -> list[int]:
    out = [k for k in range(1, s + 1) if s % k == 0]
    return out


def optimal_k(
    s_budget: int, mu: float, eta: float, p: int, b: int, inputs: BoundInputs
) -> tuple[int, list[tuple[int, float, bool]]]:
    """Best averaging interval under a fixed per-learner step budget.

    Scans the divisors K of ``s_budget`` so the iteration count N = S/K stays
    integral, evaluates the bound at (mu, N, K) with the per-K feasibility
    filter, and returns the feasible argmin (ties toward smaller K) together
    with the full (K, bound, feasible) profile.
    """
    if s_budget < 1:
        raise ValueError("s_budget must be >= 1")
    profile: list[tuple[int, float, bool]] = []
    best_k, best_g = None, math.inf
    for k in _divisors(s_budget):
        try:
            delta = delta_max(eta, mu, inputs.lipschitz_L)
        except InfeasibilityError:
            profile.append((k, math.nan, False))
            continue
        feasible = stepsize_feasible(eta, mu, k, inputs.lipschitz_L, delta).feasible
        g = convergence_bound(
            mu, s_budget // k, eta, p, b, k, replace(inputs, delta=delta)
        ).total
        profile.append((k, g, feasible))
        if feasible and g < best_g:
            best_k, best_g = k, g
    if best_k is None:
        raise InfeasibilityError(f"no feasible averaging interval divides {s_budget}")
    return best_k, profile


def k_opt_condition(
    s_budget: int, eta: float, mu: float, p: int, b: int, inputs: BoundInputs
) -> ConditionReport:
    """The printed condition under which infrequent averaging wins (K_opt > 1).

    Evaluated exactly as stated; note the (3*delta - 1) factor flips sign for
    delta < 1/3, which the branch field flags.
    """
    if s_budget < 1 or eta <= 0:
        raise ValueError("need s_budget >= 1 and eta > 0")
    L, m_bound, s2, df = (
        inputs.lipschitz_L, inputs.grad_bound_M, inputs.sigma2, inputs.delta_f,
    )
    delta = _resolve_delta(inputs, eta, mu)
    lhs = (1 - delta) / delta * df / (s_budget * eta)
    rhs = (
        L**2 * eta**2 * s2 / (2 * b) / (1 - mu) ** 3
        + (3 * delta - 1) / (2 * delta) / (1 - mu) ** 2
        * (mu**2 / (1 - mu) ** 2 * (L * s2 * eta / (p * b) + L * eta * m_bound)
           + 2 * L * s2 * eta / (p * b))
    )
    return ConditionReport(
        holds=lhs > rhs,
        margin=lhs - rhs,
        branch="delta<1/3" if delta < 1.0 / 3.0 else "ok",
    )


def mu_star_vs_p(
    s_total: int, eta: float, b: int, k: int, p0: int,
    lambdas: Sequence[int], inputs: BoundInputs,
) -> MuVsPReport:
    """Best momentum as the learner count scales, at fixed total sample budget.

    For each factor lambda the learner count becomes lambda * p0 and the
    iteration count N = s_total / (P * B * K) shrinks to match; N must stay a
    positive integer.  Reports the per-lambda optimum and whether the sequence
    is nondecreasing.
    """
    entries = []
    for lam in lambdas:
        if lam < 1 or int(lam) != lam:
            raise ValueError(f"lambda factors must be positive integers, got {lam!r}")
        p = int(lam) * p0
        n_meta, rem = divmod(s_total, p * b * k)
        if rem != 0 or n_meta < 1:
            raise ValueError(
                f"s_total = {s_total} does not split into N * {p} * {b} * {k}"
            )
        mu_star, g = optimal_mu(n_meta, eta, p, b, k, inputs)
        entries.append(MuVsPEntry(
            lam=int(lam), num_learners=p, meta_iters=n_meta, mu_star=mu_star, bound=g,
        ))
    nondecreasing = all(
        entries[i + 1].mu_star >= entries[i].mu_star for i in range(len(entries) - 1)
    )
    return MuVsPReport(entries=tuple(entries), nondecreasing=nondecreasing)
