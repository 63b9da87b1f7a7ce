"""Robust (min-max) variants of the three regimes.

A malevolent adversary distorts the damage sensitivities away from
benchmark values, paying a quadratic penalty alpha per unit of squared
deviation; the decision maker optimizes against the distorted model.
Small alpha means cheap distortions and cautious behavior; alpha = inf
is a first-class sentinel recovering the non-robust solution exactly
(not a large-number limit, which would lose precision in the square
root of the closed form).

All solved cases assume logarithmic payoffs and constant adversary
strategies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _search, regimes
from .climate_econ import (Allocation, ClimateParams, EconParams,
                           climate_integrate, emissions, phi_constant,
                           temperature)
from .itm_core import TimeGrid

ALPHA_INF = math.inf


@dataclass(frozen=True)
class RobustParams:
    """Penalty magnitude and benchmark damage sensitivities."""

    alpha: float = 1.0
    gamma1_hat: float = 0.0125
    gamma2_hat: float = 0.0125

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ValueError("alpha must be positive (math.inf allowed)")
        if self.gamma1_hat <= 0 or self.gamma2_hat <= 0:
            raise ValueError("benchmark gammas must be strictly positive")

    @property
    def is_rational_expectations(self) -> bool:
        return math.isinf(self.alpha)


@dataclass(frozen=True)
class RandomizationSpec:
    """Exponential-draw randomization of the benchmark sensitivities."""

    n_draws: int = 1000
    seed: int = 42
    percentile_low: float = 2.5
    percentile_high: float = 97.5

    def __post_init__(self):
        if self.n_draws < 2:
            raise ValueError("n_draws must be >= 2")
        if not (0.0 < self.percentile_low < self.percentile_high < 100.0):
            raise ValueError("percentiles must satisfy 0 < low < high < 100")


@dataclass
class RobustSolution:
    regime: str
    alpha: float
    gamma1: float
    gamma2: float
    allocation: Allocation
    diagnostics: dict = field(default_factory=dict)

    @property
    def gamma_sum(self) -> float:
        return self.gamma1 + self.gamma2


def _require_log(econ: EconParams):
    if econ.sigma1 != 1.0 or econ.sigma2 != 1.0:
        raise ValueError("robust solvers require logarithmic payoffs")
    if not econ.equal_discounting:
        raise ValueError("robust solvers require a common discount rate")


def _stock_head(econ: EconParams, climate: ClimateParams) -> float:
    rho = econ.rho
    return (climate.S_bar / rho - climate.P0 / rho
            - climate.T0 / (rho + climate.phi))


# ---------------------------------------------------------------------------
# global planner
# ---------------------------------------------------------------------------

def gamma1_aggregate(econ: EconParams, climate: ClimateParams) -> float:
    """Aggregate constant entering the planner's adversary first-order
    conditions.

    Built from the planner's abatement quantities, which contain no
    damage sensitivities, so the aggregate is a pure function of
    technology and climate data.
    """
    _require_log(econ)
    rho = econ.rho
    phi_c = phi_constant(rho, climate)
    a1 = econ.A_bar - 1.0
    b1 = regimes._b1_formula(econ)
    if regimes.gp_rb_zero_threshold(econ):
        rb = 0.0
    else:
        rb = regimes._solve_rb(econ, a1)
    b2 = regimes._b2_formula(econ, econ.g_fn(rb), a1)
    return (_stock_head(econ, climate)
            - phi_c * econ.eta_K / rho * (rb + b1 + b2)
            + phi_c * econ.eta_B / rho * (b1 ** econ.theta1
                                          + econ.g_fn(rb) * b2 ** econ.theta2))


def gp_outer_objective(gamma1: float, gamma2: float, robust: RobustParams,
                       econ: EconParams, climate: ClimateParams,
                       gamma1_agg: Optional[float] = None) -> float:
    """Reduced adversary objective whose minimizer is the closed form."""
    rho = econ.rho
    phi_c = phi_constant(rho, climate)
    if gamma1_agg is None:
        gamma1_agg = gamma1_aggregate(econ, climate)
    s = gamma1 + gamma2
    if s <= 0:
        return math.inf
    return ((2.0 / rho) * math.log((econ.A_bar - 1.0) / (s * phi_c * econ.eta_K))
            + s * gamma1_agg
            + robust.alpha / rho * ((gamma1 - robust.gamma1_hat) ** 2
                                    + (gamma2 - robust.gamma2_hat) ** 2))


def robust_gp(robust: RobustParams, econ: EconParams,
              climate: ClimateParams) -> RobustSolution:
    """Closed-form worst-case sensitivities and the induced planner policy.

    The adversary's two first-order conditions share the 1/(gamma1+gamma2)
    term, so the sum solves a scalar quadratic; the difference stays at
    the benchmark difference.  The square root is evaluated through the
    cancellation-free branch.
    """
    _require_log(econ)
    rho = econ.rho
    phi_c = phi_constant(rho, climate)
    if robust.is_rational_expectations:
        g1, g2 = robust.gamma1_hat, robust.gamma2_hat
        alloc = regimes.gp_weighted(econ, (g1 + g2) * phi_c)
        return RobustSolution("gp", robust.alpha, g1, g2, alloc,
                              {"rational_expectations": True})
    alpha = robust.alpha
    agg = gamma1_aggregate(econ, climate)
    s_hat = robust.gamma1_hat + robust.gamma2_hat
    b = rho * agg - alpha * s_hat
    disc = math.sqrt(b * b + 8.0 * alpha)
    if b > 0:
        gamma_sum = (4.0 / (disc + b))  # == (disc - b)/(2 alpha), stable
    else:
        gamma_sum = (disc - b) / (2.0 * alpha)
    if not gamma_sum > 0:
        raise RuntimeError("internal error: adversary sum non-positive")
    g1 = 0.5 * (gamma_sum + robust.gamma1_hat - robust.gamma2_hat)
    g2 = 0.5 * (gamma_sum + robust.gamma2_hat - robust.gamma1_hat)
    res1 = (-(2.0 / rho) / gamma_sum + agg
            + 2.0 * alpha / rho * (g1 - robust.gamma1_hat))
    res2 = (-(2.0 / rho) / gamma_sum + agg
            + 2.0 * alpha / rho * (g2 - robust.gamma2_hat))
    alloc = regimes.gp_weighted(econ, gamma_sum * phi_c)
    return RobustSolution("gp", alpha, g1, g2, alloc,
                          {"gamma1_aggregate": agg,
                           "foc_residuals": (res1, res2)})


# ---------------------------------------------------------------------------
# restricted planner
# ---------------------------------------------------------------------------

def rp_outer_objective(gamma1: float, gamma2: float, robust: RobustParams,
                       econ: EconParams, climate: ClimateParams,
                       transfer_start: Optional[np.ndarray] = None,
                       precise: bool = True) -> float:
    """Adversary objective with the transfer pair re-optimized inside."""
    rho = econ.rho
    phi_c = phi_constant(rho, climate)
    s = gamma1 + gamma2
    if s <= 0:
        return math.inf
    gamma_phi = s * phi_c
    ra, rb = regimes._rp_transfer_argmax(econ, gamma_phi, 1.0,
                                         start=transfer_start,
                                         precise=precise)
    h_ra = econ.h_fn(ra)
    base = econ.A_bar * h_ra - 1.0
    b1 = regimes._b1_formula(econ)
    b2 = regimes._b2_formula(econ, econ.g_fn(rb), base)
    lam = (_stock_head(econ, climate)
           - phi_c * econ.eta_K / rho * (ra + rb + b1 + b2)
           + phi_c * econ.eta_B / rho * (b1 ** econ.theta1
                                         + econ.g_fn(rb) * b2 ** econ.theta2))
    dev = ((gamma1 - robust.gamma1_hat) ** 2
           + (gamma2 - robust.gamma2_hat) ** 2)
    return ((1.0 / rho) * math.log((econ.A_bar - 1.0) * base
                                   / (gamma_phi * econ.eta_K) ** 2)
            + s * lam + econ.A_bar * h_ra + robust.alpha / rho * dev)


def robust_rp(robust: RobustParams, econ: EconParams, climate: ClimateParams,
              tol: float = 1e-11) -> RobustSolution:
    """Worst-case sensitivities for the restricted planner.

    The adversary objective depends on (gamma1, gamma2) only through the
    sum (all planner quantities do) plus the separable penalty, so in
    sum/difference coordinates it splits exactly: the difference stays at
    the benchmark difference and the sum solves a scalar coercive
    minimization, handled by bracketed golden-section with the transfer
    pair re-solved (warm-started) inside every evaluation.
    """
    _require_log(econ)
    rho = econ.rho
    phi_c = phi_constant(rho, climate)
    if robust.is_rational_expectations:
        g1, g2 = robust.gamma1_hat, robust.gamma2_hat
        alloc = regimes.rp_weighted(econ, (g1 + g2) * phi_c)
        return RobustSolution("rp", robust.alpha, g1, g2, alloc,
                              {"rational_expectations": True})

    warm: dict[str, Optional[np.ndarray]] = {"x": None}
    s_hat = robust.gamma1_hat + robust.gamma2_hat
    d_hat = robust.gamma1_hat - robust.gamma2_hat

    def sum_objective(s: float) -> float:
        # F(s) + (alpha / 2 rho) (s - s_hat)^2 at the optimal difference
        if s <= 0:
            return math.inf
        ra_rb = regimes._rp_transfer_argmax(econ, s * phi_c, 1.0,
                                            start=warm["x"], precise=False)
        warm["x"] = np.asarray(ra_rb)
        g1 = 0.5 * (s + d_hat)
        g2 = 0.5 * (s - d_hat)
        return rp_outer_objective(g1, g2, robust, econ, climate,
                                  transfer_start=warm["x"], precise=False)

    warm["x"] = regimes._rp_transfer_argmax(econ, s_hat * phi_c, 1.0)
    floor = 1e-10
    hi = max(4.0 * s_hat, 1.0)
    while sum_objective(2.0 * hi) < sum_objective(hi):
        hi *= 2.0
        if hi > 1e8:
            raise RuntimeError("robust RP outer bracket exhausted")
    s_star = _search.golden_section_max(lambda s: -sum_objective(s),
                                        floor, 2.0 * hi,
                                        tol=tol * max(1.0, s_hat))
    # golden section stalls once comparisons hit the inner-solve noise
    # floor (~1e-7); wide-step Newton corrections average past it
    for h_scale in (5e-3, 2e-3):
        h = h_scale * max(1.0, s_star)
        om, oc, op = (sum_objective(s_star - h), sum_objective(s_star),
                      sum_objective(s_star + h))
        slope = (op - om) / (2.0 * h)
        curv = (op - 2.0 * oc + om) / (h * h)
        if curv > 0:
            step = -slope / curv
            if abs(step) < 4.0 * h and s_star + step > floor:
                s_star += step
    g1 = 0.5 * (s_star + d_hat)
    g2 = 0.5 * (s_star - d_hat)

    # finite-difference stationarity residual at the minimizer
    h = 1e-5 * max(1.0, s_star)
    d1 = (rp_outer_objective(g1 + h, g2, robust, econ, climate, warm["x"])
          - rp_outer_objective(g1 - h, g2, robust, econ, climate, warm["x"])) / (2 * h)
    d2 = (rp_outer_objective(g1, g2 + h, robust, econ, climate, warm["x"])
          - rp_outer_objective(g1, g2 - h, robust, econ, climate, warm["x"])) / (2 * h)
    alloc = regimes.rp_weighted(econ, (g1 + g2) * phi_c,
                                transfer_start=warm["x"])
    return RobustSolution("rp", robust.alpha, g1, g2, alloc,
                          {"foc_residuals": (d1, d2)})


# ---------------------------------------------------------------------------
# Nash
# ---------------------------------------------------------------------------

def _nash_gamma_free(econ: EconParams):
    a1 = econ.A_bar - 1.0
    base = econ.A_bar * econ.h_fn(0.0) - 1.0
    b1 = regimes._b1_formula(econ)
    if regimes._nash_rb_zero(econ):
        rb = 0.0
    else:
        rb = regimes._solve_rb(econ, base)
    b2 = regimes._b2_formula(econ, econ.g_fn(rb), base)
    abat = b1 ** econ.theta1 + econ.g_fn(rb) * b2 ** econ.theta2
    return a1, base, b1, rb, b2, abat


def robust_nash(robust: RobustParams, econ: EconParams,
                climate: ClimateParams, tol: float = 1e-10,
                max_iter: int = 200,
                start: Optional[tuple[float, float]] = None) -> RobustSolution:
    """Worst-case sensitivities in the non-cooperative game.

    Each country faces its own adversary; given the opponent's
    sensitivity, the own first-order condition is a quadratic with a
    single positive root, so the coupled system is solved by damped
    alternation on those exact roots, with a bisection fallback if the
    alternation stalls.
    """
    _require_log(econ)
    rho = econ.rho
    phi_c = phi_constant(rho, climate)
    if robust.is_rational_expectations:
        g1, g2 = robust.gamma1_hat, robust.gamma2_hat
        alloc = regimes.nash_closed_form(econ.with_gammas(g1, g2), phi_c)
        return RobustSolution("nash", robust.alpha, g1, g2, alloc,
                              {"rational_expectations": True})
    alpha = robust.alpha
    a1, base, b1, rb, b2, abat = _nash_gamma_free(econ)
    head = _stock_head(econ, climate)
    k_coef = econ.eta_K * phi_c / rho
    b_coef = econ.eta_B * phi_c / rho

    def big_g1(g2: float) -> float:
        k2 = (base / (g2 * phi_c * econ.eta_K) + b2) / base
        return head - k_coef * ((b1 + rb) / a1 + k2) + b_coef * abat

    def big_g2(g1: float) -> float:
        k1 = (a1 / (g1 * phi_c * econ.eta_K) + b1 + rb) / a1
        return head - k_coef * (k1 + b2 / base) + b_coef * abat

    def own_root(big_g: float, gamma_hat: float) -> float:
        # (2a/rho) g^2 + (G - (2a/rho) ghat) g - 1/rho = 0, positive root
        qa = 2.0 * alpha / rho
        qb = big_g - qa * gamma_hat
        qc = -1.0 / rho
        disc = math.sqrt(qb * qb - 4.0 * qa * qc)
        if qb <= 0:
            return (-qb + disc) / (2.0 * qa)
        return -2.0 * qc / (qb + disc)

    def residuals(g1: float, g2: float) -> tuple[float, float]:
        r1 = big_g1(g2) + 2.0 * alpha / rho * (g1 - robust.gamma1_hat) \
            - 1.0 / (rho * g1)
        r2 = big_g2(g1) + 2.0 * alpha / rho * (g2 - robust.gamma2_hat) \
            - 1.0 / (rho * g2)
        return r1, r2

    if start is None:
        g1, g2 = robust.gamma1_hat, robust.gamma2_hat
    else:
        g1, g2 = start
        if g1 <= 0 or g2 <= 0:
            raise ValueError("start must be strictly positive")
    prev = (0.0, 0.0)
    converged = False
    for it in range(1, max_iter + 1):
        g1_new = own_root(big_g1(g2), robust.gamma1_hat)
        g2_new = own_root(big_g2(g1_new), robust.gamma2_hat)
        d = (g1_new - g1, g2_new - g2)
        if it > 1 and (d[0] * prev[0] < 0 or d[1] * prev[1] < 0):
            g1_new = g1 + 0.5 * d[0]
            g2_new = g2 + 0.5 * d[1]
            d = (g1_new - g1, g2_new - g2)
        prev = d
        g1, g2 = g1_new, g2_new
        r1, r2 = residuals(g1, g2)
        if max(abs(r1), abs(r2)) < tol:
            converged = True
            break
    if not converged:
        # bisection on the sum-difference reduction per coordinate
        from scipy.optimize import brentq
        for _ in range(50):
            g1 = brentq(lambda g: big_g1(g2) + 2 * alpha / rho
                        * (g - robust.gamma1_hat) - 1.0 / (rho * g),
                        1e-12, 1e8, xtol=1e-14)
            g2 = brentq(lambda g: big_g2(g1) + 2 * alpha / rho
                        * (g - robust.gamma2_hat) - 1.0 / (rho * g),
                        1e-12, 1e8, xtol=1e-14)
            r1, r2 = residuals(g1, g2)
            if max(abs(r1), abs(r2)) < tol:
                converged = True
                break
        if not converged:
            raise RuntimeError("robust Nash iteration did not converge "
                               f"(residuals {r1:g}, {r2:g})")
    if g1 <= 0 or g2 <= 0:
        raise RuntimeError("robust Nash produced non-positive sensitivity")
    alloc = regimes.nash_closed_form(econ.with_gammas(g1, g2), phi_c)
    return RobustSolution("nash", alpha, g1, g2, alloc,
                          {"foc_residuals": residuals(g1, g2),
                           "iterations": it})


def solve_robust(regime: str, robust: RobustParams, econ: EconParams,
                 climate: ClimateParams) -> RobustSolution:
    regime = regime.lower()
    if regime == "gp":
        return robust_gp(robust, econ, climate)
    if regime == "rp":
        return robust_rp(robust, econ, climate)
    if regime == "nash":
        return robust_nash(robust, econ, climate)
    raise ValueError(f"unknown regime {regime!r}")


# ---------------------------------------------------------------------------
# sweeps and randomization
# ---------------------------------------------------------------------------

@dataclass
class AlphaPoint:
    alpha: float
    solution: Optional[RobustSolution]
    temperature: Optional[np.ndarray]
    emission_flow: Optional[float]
    error: Optional[str] = None


def alpha_sweep(regime: str, robust_base: RobustParams, alphas,
                econ: EconParams, climate: ClimateParams,
                grid: TimeGrid) -> list[AlphaPoint]:
    """Solve the robust regime across penalty levels; failures are
    recorded per point rather than aborting the sweep."""
    out = []
    for a in alphas:
        rp = RobustParams(alpha=float(a), gamma1_hat=robust_base.gamma1_hat,
                          gamma2_hat=robust_base.gamma2_hat)
        try:
            sol = solve_robust(regime, rp, econ, climate)
            g = emissions(sol.allocation, econ)
            _, _, s = climate_integrate(climate, np.full(grid.n_points - 1, g),
                                        grid)
            temp = temperature(s, climate.S_bar)
            out.append(AlphaPoint(float(a), sol, temp, g))
        except Exception as exc:
            out.append(AlphaPoint(float(a), None, None, None, error=str(exc)))
    return out


@dataclass
class BandResult:
    regime: str
    alpha: float
    times: np.ndarray
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray
    n_draws: int
    n_failures: int
    gamma_draws: np.ndarray  # (n_ok, 2) benchmark draws actually used


def randomized_bands(regime: str, rspec: RandomizationSpec,
                     robust_base: RobustParams, econ: EconParams,
                     climate: ClimateParams, grid: TimeGrid,
                     naive: bool = False,
                     max_failure_share: float = 0.05) -> BandResult:
    """Percentile bands of the temperature path under benchmark draws.

    Each draw resamples the benchmarks from exponential distributions
    with the configured means, applies the regime's worst-case response
    at the configured alpha (or uses the draws directly in naive mode),
    and integrates the temperature path.  Draw k uses generator
    seeded (seed, k), so results do not depend on evaluation order.
    """
    temps = []
    gammas = []
    failures = 0
    for k in range(rspec.n_draws):
        rng = np.random.default_rng([rspec.seed, k])
        gh1 = rng.exponential(scale=robust_base.gamma1_hat)
        gh2 = rng.exponential(scale=robust_base.gamma2_hat)
        try:
            if naive:
                phi_c = phi_constant(econ.rho, climate)
                regime_l = regime.lower()
                if regime_l == "gp":
                    alloc = regimes.gp_weighted(econ, (gh1 + gh2) * phi_c)
                elif regime_l == "rp":
                    alloc = regimes.rp_weighted(econ, (gh1 + gh2) * phi_c)
                else:
                    alloc = regimes.nash_closed_form(
                        econ.with_gammas(gh1, gh2), phi_c)
            else:
                rp = RobustParams(alpha=robust_base.alpha, gamma1_hat=gh1,
                                  gamma2_hat=gh2)
                alloc = solve_robust(regime, rp, econ, climate).allocation
            g = emissions(alloc, econ)
            _, _, s = climate_integrate(climate,
                                        np.full(grid.n_points - 1, g), grid)
            temps.append(temperature(s, climate.S_bar))
            gammas.append((gh1, gh2))
        except Exception:
            failures += 1
    if failures > max_failure_share * rspec.n_draws:
        raise RuntimeError(f"{failures}/{rspec.n_draws} randomization draws "
                           "failed")
    temps = np.asarray(temps)
    lo, med, hi = np.percentile(
        temps, [rspec.percentile_low, 50.0, rspec.percentile_high], axis=0)
    return BandResult(regime=regime, alpha=robust_base.alpha,
                      times=grid.times, lower=lo, median=med, upper=hi,
                      n_draws=rspec.n_draws, n_failures=failures,
                      gamma_draws=np.asarray(gammas))
