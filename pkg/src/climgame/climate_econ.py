"""Two-country climate-economy model.

Country 1 (north) operates at the technology frontier; country 2 (south)
produces with a transfer-dependent productivity discount h(Ra) and abates
with transfer-dependent efficiency g(Rb).  Net emissions feed a two-box
carbon stock (permanent + geometrically decaying), and each country's
payoff is CRRA/log consumption utility minus a damage term linear in the
excess stock.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .itm_core import (ControlPath, DiscountedLinearObjective,
                       LinearStateSystem, TimeGrid)

logger = logging.getLogger(__name__)

#: column order used throughout for allocation vectors
ALLOC_FIELDS = ("C1", "C2", "B1", "B2", "K1", "K2", "Ra", "Rb")


class DomainError(ValueError):
    """Argument outside the model's domain (e.g. non-positive stock)."""


# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClimateParams:
    """Carbon-cycle coefficients and initial stocks.

    phi     decay rate of the temporary stock (1/time)
    phi_L   fraction of emissions that stays permanently
    phi_0   retention fraction of the non-permanent part
    S_bar   pre-industrial stock; temperature is zero at S = S_bar
    P0, T0  initial permanent / temporary stocks
    """

    phi: float = 0.5
    phi_L: float = 0.2
    phi_0: float = 0.393
    S_bar: float = 1.0
    P0: float = 0.5
    T0: float = 0.5

    def __post_init__(self):
        if self.phi <= 0:
            raise ValueError("phi must be positive")
        for name in ("phi_L", "phi_0"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.S_bar <= 0:
            raise ValueError("S_bar must be positive")
        if self.P0 < 0 or self.T0 < 0:
            raise ValueError("initial stocks must be non-negative")

    @property
    def initial_stock(self) -> float:
        return self.P0 + self.T0


@dataclass(frozen=True)
class TechCurve:
    """Rational transfer-response curve x -> (v_inf * x + v0) / (x + 1).

    Strictly increasing and concave on [0, inf), rising from v0 toward
    the asymptote v_inf; both values must lie in (0, 1).
    """

    value_at_zero: float
    value_at_infinity: float

    def __post_init__(self):
        if not 0.0 < self.value_at_zero < 1.0:
            raise ValueError("value_at_zero must lie in (0, 1)")
        if not 0.0 < self.value_at_infinity < 1.0:
            raise ValueError("value_at_infinity must lie in (0, 1)")
        if self.value_at_infinity <= self.value_at_zero:
            raise ValueError("curve must be strictly increasing "
                             "(value_at_infinity > value_at_zero)")

    def __call__(self, x):
        return (self.value_at_infinity * x + self.value_at_zero) / (x + 1.0)

    def derivative(self, x):
        return (self.value_at_infinity - self.value_at_zero) / (x + 1.0) ** 2

    def derivative_inverse(self, slope: float) -> float:
        """x >= 0 with derivative(x) = slope; caller ensures slope <= d(0)."""
        gap = self.value_at_infinity - self.value_at_zero
        return math.sqrt(gap / slope) - 1.0


@dataclass(frozen=True)
class EconParams:
    """Preference and technology parameters.

    Defaults reproduce the benchmark parameterization; rho defaults to
    -ln(0.96^10).  Setting rho2 different from rho1 selects the
    heterogeneous-discounting variant.
    """

    A_bar: float = 10.0
    sigma1: float = 1.0
    sigma2: float = 1.0
    gamma1: float = 0.0125
    gamma2: float = 0.0125
    rho1: float = -10.0 * math.log(0.96)
    rho2: Optional[float] = None
    eta_K: float = 1.0
    eta_B: float = 1.0
    theta1: float = 0.5
    theta2: float = 0.5
    g_fn: TechCurve = TechCurve(0.2, 0.5)
    h_fn: TechCurve = TechCurve(0.5, 0.9)

    def __post_init__(self):
        if self.rho2 is None:
            object.__setattr__(self, "rho2", self.rho1)
        if self.A_bar <= 1.0:
            raise ValueError("A_bar must exceed 1")
        for name in ("sigma1", "sigma2", "gamma1", "gamma2", "rho1", "rho2",
                     "eta_K", "eta_B"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("theta1", "theta2"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.A_bar * self.h_fn(0.0) <= 1.0:
            raise ValueError("need A_bar * h(0) > 1 so southern production "
                             "is viable")
        self._check_g_power_concavity()

    def _check_g_power_concavity(self, n_grid: int = 64):
        # midpoint test of g^{1/(1-theta2)} on a log-spaced grid; this
        # power-concavity is what makes the transfer problem unimodal
        p = 1.0 / (1.0 - self.theta2)
        xs = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, n_grid)])
        vals = self.g_fn(xs) ** p
        mid = self.g_fn(0.5 * (xs[:-1] + xs[1:])) ** p
        if np.any(mid + 1e-12 < 0.5 * (vals[:-1] + vals[1:])):
            raise ValueError("g(x)^(1/(1-theta2)) is not concave for these "
                             "parameters")

    @property
    def rho(self) -> float:
        if not self.equal_discounting:
            raise ValueError("countries discount at different rates; "
                             "use rho1/rho2 explicitly")
        return self.rho1

    @property
    def equal_discounting(self) -> bool:
        return self.rho1 == self.rho2

    def utility(self, c: float, country: int) -> float:
        sigma = self.sigma1 if country == 1 else self.sigma2
        return crra_utility(c, sigma)

    def gamma(self, country: int) -> float:
        return self.gamma1 if country == 1 else self.gamma2

    def with_gammas(self, gamma1: float, gamma2: float) -> "EconParams":
        return EconParams(A_bar=self.A_bar, sigma1=self.sigma1,
                          sigma2=self.sigma2, gamma1=gamma1, gamma2=gamma2,
                          rho1=self.rho1, rho2=self.rho2, eta_K=self.eta_K,
                          eta_B=self.eta_B, theta1=self.theta1,
                          theta2=self.theta2, g_fn=self.g_fn, h_fn=self.h_fn)


def crra_utility(c, sigma: float):
    """C^{1-sigma}/(1-sigma); sigma == 1 dispatches exactly to ln."""
    if sigma == 1.0:
        return np.log(c)
    return c ** (1.0 - sigma) / (1.0 - sigma)


# ---------------------------------------------------------------------------
# allocations and states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Allocation:
    """One instant's choices: consumption, abatement, dirty input, transfers."""

    C1: float
    C2: float
    B1: float
    B2: float
    K1: float
    K2: float
    Ra: float
    Rb: float

    def __post_init__(self):
        for name in ALLOC_FIELDS:
            v = float(getattr(self, name))
            if v < 0:
                raise ValueError(f"{name} must be non-negative")
            object.__setattr__(self, name, v)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in ALLOC_FIELDS])

    @staticmethod
    def from_array(u) -> "Allocation":
        u = np.asarray(u, dtype=float)
        return Allocation(*(float(v) for v in u))


@dataclass(frozen=True)
class ClimateState:
    """Permanent stock P, temporary stock T, and their sum S."""

    P: float
    T: float

    @property
    def S(self) -> float:
        return self.P + self.T


# ---------------------------------------------------------------------------
# model primitives
# ---------------------------------------------------------------------------

def phi_constant(rho: float, climate: ClimateParams) -> float:
    """Discounted damage exposure of a unit emission flow.

    phi_L/rho for the permanently retained part plus
    (1-phi_L)*phi_0/(rho+phi) for the decaying part.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    return (climate.phi_L / rho
            + (1.0 - climate.phi_L) * climate.phi_0 / (rho + climate.phi))


def emissions(alloc: Allocation, econ: EconParams) -> float:
    """Net emission flow eta_K (K1+K2) - eta_B (B1^t1 + g(Rb) B2^t2).

    May be negative (net removal); the model's analysis assumes positive
    flows, so path-level diagnostics flag negative values.
    """
    return (econ.eta_K * (alloc.K1 + alloc.K2)
            - econ.eta_B * (alloc.B1 ** econ.theta1
                            + econ.g_fn(alloc.Rb) * alloc.B2 ** econ.theta2))


def emissions_by_country(alloc: Allocation, econ: EconParams) -> tuple[float, float]:
    """Split of the net flow: each country's dirty input minus own abatement."""
    g1 = econ.eta_K * alloc.K1 - econ.eta_B * alloc.B1 ** econ.theta1
    g2 = (econ.eta_K * alloc.K2
          - econ.eta_B * econ.g_fn(alloc.Rb) * alloc.B2 ** econ.theta2)
    return g1, g2


def emissions_from_array(u: np.ndarray, econ: EconParams) -> np.ndarray:
    """Vectorized net-flow evaluation for (n, 8) allocation arrays."""
    u = np.atleast_2d(u)
    c1, c2, b1, b2, k1, k2, ra, rb = (u[:, i] for i in range(8))
    return (econ.eta_K * (k1 + k2)
            - econ.eta_B * (b1 ** econ.theta1
                            + econ.g_fn(rb) * b2 ** econ.theta2))


def climate_integrate(climate: ClimateParams, emissions_path: np.ndarray,
                      grid: TimeGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Propagate (P, T) under a piecewise-constant emission flow.

    emissions_path[j] applies on cell [t_j, t_{j+1}); the update per cell
    is the exact variation-of-constants step.  Returns (P, T, S) at the
    grid nodes with S stored as the exact sum.
    """
    g = np.asarray(emissions_path, dtype=float)
    if g.shape[0] not in (grid.n_points, grid.n_points - 1):
        raise ValueError("emissions_path must have one value per node or cell")
    n = grid.n_points
    dt = grid.dt
    phi = climate.phi
    decay = math.exp(-phi * dt)
    pulse = -math.expm1(-phi * dt) / phi  # int_0^dt e^{-phi s} ds
    p = np.empty(n)
    tmp = np.empty(n)
    p[0] = climate.P0
    tmp[0] = climate.T0
    for j in range(n - 1):
        gj = g[j]
        p[j + 1] = p[j] + climate.phi_L * gj * dt
        tmp[j + 1] = decay * tmp[j] + (1.0 - climate.phi_L) * climate.phi_0 * gj * pulse
    return p, tmp, p + tmp


def temperature(S, S_bar: float):
    """Warming above pre-industrial: 3 ln(S / S_bar) / ln 2 degrees."""
    S = np.asarray(S, dtype=float)
    if S_bar <= 0:
        raise DomainError("S_bar must be positive")
    if np.any(S <= 0):
        raise DomainError("total stock must be positive to map to temperature")
    out = 3.0 * np.log(S / S_bar) / math.log(2.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# welfare
# ---------------------------------------------------------------------------

def discounted_flow_integral(values_cells: np.ndarray, rho: float,
                             grid: TimeGrid) -> float:
    """Exact integral of e^{-rho t} times a piecewise-constant flow."""
    t = grid.times
    weights = (np.exp(-rho * t[:-1]) - np.exp(-rho * t[1:])) / rho
    return float(np.dot(np.asarray(values_cells, dtype=float), weights))


def country_welfare(alloc_path: np.ndarray, climate: ClimateParams,
                    econ: EconParams, country: int,
                    grid: TimeGrid) -> float:
    """Discounted payoff of one country along an allocation path.

    Uses the state-free rewriting: a constant head term for the initial
    stocks plus the discounted flow of consumption utility net of the
    damage exposure of current emissions.  Consumption must stay strictly
    positive under log/low-sigma utility; violations return -inf.
    """
    u = np.atleast_2d(np.asarray(alloc_path, dtype=float))
    if u.shape[0] == grid.n_points:
        u = u[:-1]
    rho = econ.rho1 if country == 1 else econ.rho2
    gamma = econ.gamma(country)
    sigma = econ.sigma1 if country == 1 else econ.sigma2
    c = u[:, 0] if country == 1 else u[:, 1]
    if np.any(c <= 0):
        return -math.inf
    phi_c = phi_constant(rho, climate)
    head = gamma * (climate.S_bar / rho - climate.P0 / rho
                    - climate.T0 / (rho + climate.phi))
    flow = crra_utility(c, sigma) - gamma * phi_c * emissions_from_array(u, econ)
    return head + discounted_flow_integral(flow, rho, grid)


def direct_welfare(alloc_path: np.ndarray, climate: ClimateParams,
                   econ: EconParams, country: int, grid: TimeGrid) -> float:
    """Same payoff computed the long way, from the integrated stock.

    Quadratures e^{-rho t}[u_i(C_i) - gamma_i (S(t) - S_bar)] with the
    stock path integrated from the emission flow; serves as the
    independent cross-check of `country_welfare`.
    """
    u = np.atleast_2d(np.asarray(alloc_path, dtype=float))
    if u.shape[0] != grid.n_points:
        raise ValueError("direct_welfare expects one allocation per node")
    rho = econ.rho1 if country == 1 else econ.rho2
    sigma = econ.sigma1 if country == 1 else econ.sigma2
    gamma = econ.gamma(country)
    g_cells = emissions_from_array(u[:-1], econ)
    p, tmp, s = climate_integrate(climate, g_cells, grid)

    t = grid.times
    tm = grid.midpoints
    dt = grid.dt
    c_cells = u[:-1, 0] if country == 1 else u[:-1, 1]
    if np.any(c_cells <= 0):
        return -math.inf
    util = crra_utility(c_cells, sigma)

    # mid-cell stock from the same exact per-cell update
    phi = climate.phi
    decay_h = math.exp(-phi * 0.5 * dt)
    pulse_h = -math.expm1(-phi * 0.5 * dt) / phi
    p_mid = p[:-1] + climate.phi_L * g_cells * 0.5 * dt
    t_mid = decay_h * tmp[:-1] + (1 - climate.phi_L) * climate.phi_0 * g_cells * pulse_h
    s_mid = p_mid + t_mid

    f_left = np.exp(-rho * t[:-1]) * (util - gamma * (s[:-1] - climate.S_bar))
    f_midv = np.exp(-rho * tm) * (util - gamma * (s_mid - climate.S_bar))
    f_right = np.exp(-rho * t[1:]) * (util - gamma * (s[1:] - climate.S_bar))
    return float(np.sum((f_left + 4.0 * f_midv + f_right) * (dt / 6.0)))


# ---------------------------------------------------------------------------
# feasibility
# ---------------------------------------------------------------------------

def resource_feasibility(alloc: Allocation, econ: EconParams, regime: str,
                         tol: float = 1e-9) -> tuple[bool, dict[str, float]]:
    """Check the regime's resource constraints; returns (ok, slacks).

    GP pools both countries into a single constraint; RP and Nash impose
    one budget per country.  Positive slack means unused output.
    """
    a = econ.A_bar
    h = econ.h_fn
    regime = regime.lower()
    if regime == "gp":
        out = a * (alloc.K1 + h(alloc.Ra) * alloc.K2)
        used = (alloc.C1 + alloc.C2 + alloc.B1 + alloc.B2 + alloc.K1
                + alloc.K2 + alloc.Ra + alloc.Rb)
        slacks = {"pooled": out - used}
    elif regime in ("rp", "nash"):
        out1 = a * alloc.K1
        used1 = alloc.C1 + alloc.B1 + alloc.K1 + alloc.Ra + alloc.Rb
        out2 = a * h(alloc.Ra) * alloc.K2
        used2 = alloc.C2 + alloc.B2 + alloc.K2
        slacks = {"country1": out1 - used1, "country2": out2 - used2}
    else:
        raise ValueError(f"unknown regime {regime!r}")
    ok = all(s >= -tol for s in slacks.values())
    return ok, slacks


# ---------------------------------------------------------------------------
# state-space formulation used by the generic solvers
# ---------------------------------------------------------------------------

def carbon_system(climate: ClimateParams, econ: EconParams) -> LinearStateSystem:
    """(P, T) dynamics driven by the allocation vector as control."""
    a = np.array([[0.0, 0.0], [0.0, -climate.phi]])

    def f(t: float, u: np.ndarray) -> np.ndarray:
        g = emissions_from_array(np.asarray(u), econ)[0]
        return np.array([climate.phi_L * g,
                         (1.0 - climate.phi_L) * climate.phi_0 * g])

    # |f| <= const * (1 + |u|): the flow is linear in K and sublinear in B
    bound = econ.eta_K * 2.0 + econ.eta_B * 2.0 + 1.0
    return LinearStateSystem(dim_state=2, dim_control=8, dynamics=a,
                             control_map=f,
                             initial_state=np.array([climate.P0, climate.T0]),
                             linear_growth_bound=bound)


def planner_objective(climate: ClimateParams, econ: EconParams) -> DiscountedLinearObjective:
    """Pooled objective: both utilities minus joint damages (equal discounting)."""
    rho = econ.rho
    gsum = econ.gamma1 + econ.gamma2
    a_vec = -gsum * np.ones(2)

    def h(t: float, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        if (u[0] <= 0 and econ.sigma1 >= 1) or (u[1] <= 0 and econ.sigma2 >= 1):
            return -math.inf
        return (crra_utility(u[0], econ.sigma1) + crra_utility(u[1], econ.sigma2)
                + gsum * climate.S_bar)

    return DiscountedLinearObjective(state_weight=a_vec, control_payoff=h,
                                     discount_rate=rho)


def player_objective(climate: ClimateParams, econ: EconParams,
                     country: int) -> DiscountedLinearObjective:
    """One country's objective over the joint control vector."""
    rho = econ.rho1 if country == 1 else econ.rho2
    gamma = econ.gamma(country)
    sigma = econ.sigma1 if country == 1 else econ.sigma2
    idx = 0 if country == 1 else 1
    a_vec = -gamma * np.ones(2)

    def h(t: float, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        if u[idx] <= 0 and sigma >= 1:
            return -math.inf
        return crra_utility(u[idx], sigma) + gamma * climate.S_bar

    return DiscountedLinearObjective(state_weight=a_vec, control_payoff=h,
                                     discount_rate=rho)


def sample_admissible_path(econ: EconParams, grid: TimeGrid,
                           rng: np.random.Generator,
                           k_hi: float = 5.0) -> ControlPath:
    """Random pooled-budget-feasible piecewise-constant allocation path.

    K1, K2 are drawn first; the guaranteed output floor A_bar*(K1+h(0)K2)
    is then split across the remaining uses at a random utilization, so
    every drawn cell satisfies the pooled constraint with slack.
    Consumption is bounded away from zero for the log branch.
    """
    n = grid.n_points
    k1 = rng.uniform(0.1, k_hi, size=n)
    k2 = rng.uniform(0.0, k_hi, size=n)
    floor = econ.A_bar * (k1 + econ.h_fn(0.0) * k2) - k1 - k2
    w = rng.uniform(0.05, 1.0, size=(n, 6))  # C1 C2 B1 B2 Ra Rb
    w /= w.sum(axis=1, keepdims=True)
    util = rng.uniform(0.3, 0.95, size=n)
    parts = w * (util * floor)[:, None]
    values = np.column_stack([parts[:, 0], parts[:, 1], parts[:, 2],
                              parts[:, 3], k1, k2, parts[:, 4], parts[:, 5]])
    return ControlPath(grid, values)
