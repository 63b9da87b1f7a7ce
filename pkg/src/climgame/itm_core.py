"""Machinery for discounted objectives that are linear in the state.

When the state enters the dynamics and the running payoff linearly, the
discounted objective can be rewritten so the state drops out: a shadow
weight vector absorbs the discounted future impact of the state, and
what remains is a family of static ("temporary") problems, one per time
point.  Maximizing the temporary problem pointwise in t solves the
dynamic problem; a pointwise Nash equilibrium of the temporary game is
an open-loop equilibrium of the dynamic game.  This module provides the
evolution operators, shadow weights, both objective evaluators (original
and rewritten), the pointwise solvers, and a self-consistency check of
the rewriting identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, linalg


class NumericFailureError(RuntimeError):
    """Non-finite values produced during integration or evaluation."""


class IllPosedProblemError(ValueError):
    """Shadow-weight integral does not converge for the given data."""


class EquilibriumNotFoundError(RuntimeError):
    """Best-response iteration failed to reach a fixed point."""

    def __init__(self, message: str, last_iterate=None, t: float | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.t = t


class InnerSolverError(RuntimeError):
    """Temporary-problem solver failed; carries the offending time."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (at t={t:g})")
        self.t = t


# ---------------------------------------------------------------------------
# grids and paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [t_start, t_end] with n_points nodes."""

    t_start: float = 0.0
    t_end: float = 50.0
    n_points: int = 512

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("n_points must be >= 2")
        if not self.t_end > self.t_start >= 0.0:
            raise ValueError("need t_end > t_start >= 0")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_points)

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.n_points - 1)

    @property
    def midpoints(self) -> np.ndarray:
        t = self.times
        return 0.5 * (t[:-1] + t[1:])

    def tail_factor(self, rho: float) -> float:
        """Discount weight left beyond the horizon."""
        return math.exp(-rho * self.t_end)


@dataclass(frozen=True)
class ControlPath:
    """Piecewise-constant control: values[j] applies on [t_j, t_{j+1})."""

    grid: TimeGrid
    values: np.ndarray  # (n_points, dim_control)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.n_points:
            raise ValueError("values length must equal grid n_points")
        object.__setattr__(self, "values", v)

    @property
    def cell_values(self) -> np.ndarray:
        return self.values[:-1]


@dataclass(frozen=True)
class StatePath:
    """Piecewise-linear state trajectory sampled at the grid nodes."""

    grid: TimeGrid
    values: np.ndarray  # (n_points, dim_state)
    midpoint_values: Optional[np.ndarray] = None  # (n_points-1, dim_state)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.n_points:
            raise ValueError("values length must equal grid n_points")
        object.__setattr__(self, "values", v)


def constant_path(grid: TimeGrid, u: np.ndarray) -> ControlPath:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return ControlPath(grid, np.tile(u, (grid.n_points, 1)))


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearStateSystem:
    """State dynamics x' = A(t) x + f(t, u), x(0) = x0.

    `dynamics` is either a constant matrix or a callable t -> matrix.
    `control_map` must satisfy the linear growth bound
    |f(t, u)| <= C (1 + |u|), which keeps the state global in time.
    """

    dim_state: int
    dim_control: int
    dynamics: np.ndarray | Callable[[float], np.ndarray]
    control_map: Callable[[float, np.ndarray], np.ndarray]
    initial_state: np.ndarray
    linear_growth_bound: float = 1.0

    def __post_init__(self):
        if self.dim_state < 1 or self.dim_control < 1:
            raise ValueError("state and control dimensions must be >= 1")
        if self.linear_growth_bound <= 0:
            raise ValueError("linear_growth_bound must be positive")
        x0 = np.atleast_1d(np.asarray(self.initial_state, dtype=float))
        if x0.shape != (self.dim_state,):
            raise ValueError("initial_state has wrong dimension")
        object.__setattr__(self, "initial_state", x0)
        if not callable(self.dynamics):
            a = np.asarray(self.dynamics, dtype=float)
            if a.shape != (self.dim_state, self.dim_state):
                raise ValueError("dynamics matrix has wrong shape")
            object.__setattr__(self, "dynamics", a)

    @property
    def has_constant_dynamics(self) -> bool:
        return not callable(self.dynamics)

    @property
    def has_diagonal_dynamics(self) -> bool:
        if callable(self.dynamics):
            return False
        a = self.dynamics
        return np.count_nonzero(a - np.diag(np.diagonal(a))) == 0


@dataclass(frozen=True)
class DiscountedLinearObjective:
    """J(u) = int e^{-rho t} [ <a(t), x(t)> + h(t, u(t)) ] dt.

    `state_weight` is a constant vector or a callable t -> vector, bounded
    on the working horizon.
    """

    state_weight: np.ndarray | Callable[[float], np.ndarray]
    control_payoff: Callable[[float, np.ndarray], float]
    discount_rate: float

    def __post_init__(self):
        if self.discount_rate <= 0:
            raise ValueError("discount_rate must be positive")
        if not callable(self.state_weight):
            a = np.atleast_1d(np.asarray(self.state_weight, dtype=float))
            object.__setattr__(self, "state_weight", a)

    @property
    def has_constant_state_weight(self) -> bool:
        return not callable(self.state_weight)

    def state_weight_at(self, t: float) -> np.ndarray:
        if callable(self.state_weight):
            return np.atleast_1d(np.asarray(self.state_weight(t), dtype=float))
        return self.state_weight


@dataclass(frozen=True)
class ShadowWeight:
    """Discounted-adjoint weight b(t): the value of a marginal unit of state.

    b(t) = int_0^inf e^{-rho tau} Phi_A(t+tau, t)^T a(t+tau) dtau
    """

    values: Callable[[float], np.ndarray]
    closed_form_flag: bool = False

    def __call__(self, t: float) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.values(t), dtype=float))


# ---------------------------------------------------------------------------
# evolution operator
# ---------------------------------------------------------------------------

def evolution_operator(system: LinearStateSystem, t: float, s: float) -> np.ndarray:
    """Propagator Phi_A(t, s) of the homogeneous part; Phi(s, s) = I."""
    if not t >= s >= 0:
        raise ValueError("need t >= s >= 0")
    n = system.dim_state
    if t == s:
        return np.eye(n)
    if system.has_constant_dynamics:
        a = system.dynamics
        if system.has_diagonal_dynamics:
            phi = np.diag(np.exp(np.diagonal(a) * (t - s)))
        else:
            phi = linalg.expm(a * (t - s))
    else:
        def rhs(tau, m):
            return (np.asarray(system.dynamics(tau)) @ m.reshape(n, n)).ravel()

        sol = integrate.solve_ivp(rhs, (s, t), np.eye(n).ravel(),
                                  rtol=1e-11, atol=1e-13, method="DOP853")
        if not sol.success:
            raise NumericFailureError("evolution-operator ODE failed: " + sol.message)
        phi = sol.y[:, -1].reshape(n, n)
    if not np.all(np.isfinite(phi)):
        raise NumericFailureError("non-finite entries in evolution operator")
    return phi


# ---------------------------------------------------------------------------
# shadow weight
# ---------------------------------------------------------------------------

def _spectral_abscissa(a: np.ndarray) -> float:
    return float(np.max(np.real(np.linalg.eigvals(a))))


def shadow_weight(system: LinearStateSystem,
                  objective: DiscountedLinearObjective,
                  quad_tol: float = 1e-12) -> ShadowWeight:
    """Compute b(.) for the pair (A, a) under discount rho.

    Constant diagonal A with constant a gives the componentwise closed
    form a_i / (rho - A_ii); anything else falls back to adaptive
    quadrature of the defining integral with an exponential tail bound.
    """
    rho = objective.discount_rate
    if system.has_constant_dynamics:
        margin = rho - _spectral_abscissa(system.dynamics)
        if margin <= 0:
            raise IllPosedProblemError(
                "rho must exceed the spectral abscissa of A "
                f"(margin {margin:g})")
    if (system.has_diagonal_dynamics and objective.has_constant_state_weight):
        diag = np.diagonal(system.dynamics)
        b0 = objective.state_weight / (rho - diag)
        return ShadowWeight(values=lambda t, b0=b0.copy(): b0,
                            closed_form_flag=True)

    # quadrature branch: per component, integrate to a horizon where the
    # exponential envelope is below tolerance
    if system.has_constant_dynamics:
        decay = rho - _spectral_abscissa(system.dynamics)
    else:
        decay = rho  # conservative; convergence is monitored below
    horizon = max(1.0, -math.log(quad_tol) / decay)

    def b_at(t: float) -> np.ndarray:
        def integrand(tau: float, i: int) -> float:
            phi = evolution_operator(system, t + tau, t)
            vec = phi.T @ objective.state_weight_at(t + tau)
            return math.exp(-rho * tau) * vec[i]

        out = np.empty(system.dim_state)
        for i in range(system.dim_state):
            val, err = integrate.quad(integrand, 0.0, horizon, args=(i,),
                                      epsabs=quad_tol, epsrel=quad_tol,
                                      limit=400)
            if not math.isfinite(val) or err > 1e-6 * (1.0 + abs(val)):
                raise IllPosedProblemError(
                    f"shadow-weight quadrature did not converge (err {err:g})")
            out[i] = val
        return out

    return ShadowWeight(values=b_at, closed_form_flag=False)


# ---------------------------------------------------------------------------
# state integration
# ---------------------------------------------------------------------------

def integrate_state(system: LinearStateSystem, path: ControlPath) -> StatePath:
    """Propagate the state along a piecewise-constant control path.

    Constant dynamics use the exact variation-of-constants step per grid
    cell; time-varying dynamics fall back to RK4 sub-stepping.  Midpoint
    states are recorded for the quadrature of the running payoff.
    """
    grid = path.grid
    t = grid.times
    n = grid.n_points
    x = np.empty((n, system.dim_state))
    xm = np.empty((n - 1, system.dim_state))
    x[0] = system.initial_state

    if system.has_constant_dynamics:
        a = system.dynamics
        dt = grid.dt
        prop_full, duh_full = _step_operators(a, dt)
        prop_half, duh_half = _step_operators(a, 0.5 * dt)
        for j in range(n - 1):
            fj = np.asarray(system.control_map(t[j], path.values[j]), dtype=float)
            xm[j] = prop_half @ x[j] + duh_half @ fj
            x[j + 1] = prop_full @ x[j] + duh_full @ fj
    else:
        for j in range(n - 1):
            fj = np.asarray(system.control_map(t[j], path.values[j]), dtype=float)
            xm[j] = _rk4_affine(system.dynamics, t[j], x[j], fj, 0.5 * grid.dt, 2)
            x[j + 1] = _rk4_affine(system.dynamics, t[j] + 0.5 * grid.dt, xm[j],
                                   fj, 0.5 * grid.dt, 2)
    if not np.all(np.isfinite(x)):
        raise NumericFailureError("state trajectory blew up")
    return StatePath(grid, x, midpoint_values=xm)


def _step_operators(a: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """exp(A dt) and int_0^dt exp(A s) ds for the affine exact step."""
    n = a.shape[0]
    if np.count_nonzero(a - np.diag(np.diagonal(a))) == 0:
        lam = np.diagonal(a)
        prop = np.diag(np.exp(lam * dt))
        duh = np.diag(np.array([np.expm1(l * dt) / l if l != 0.0 else dt
                                for l in lam]))
        return prop, duh
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = a * dt
    aug[:n, n:] = np.eye(n) * dt
    e = linalg.expm(aug)
    return e[:n, :n], e[:n, n:]


def _rk4_affine(a_fn, t0, x0, f_const, h, substeps):
    x = x0.copy()
    tau = t0
    hh = h / substeps
    for _ in range(substeps):
        def rhs(tt, xx):
            return np.asarray(a_fn(tt)) @ xx + f_const
        k1 = rhs(tau, x)
        k2 = rhs(tau + 0.5 * hh, x + 0.5 * hh * k1)
        k3 = rhs(tau + 0.5 * hh, x + 0.5 * hh * k2)
        k4 = rhs(tau + hh, x + hh * k3)
        x = x + (hh / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        tau += hh
    return x


# ---------------------------------------------------------------------------
# objective evaluation
# ---------------------------------------------------------------------------

def _simpson_cells(grid: TimeGrid, f_nodes: np.ndarray, f_mid: np.ndarray) -> float:
    """Composite Simpson, one panel per grid cell (integrand smooth inside)."""
    dt = grid.dt
    return float(np.sum((f_nodes[:-1] + 4.0 * f_mid + f_nodes[1:]) * (dt / 6.0)))


def evaluate_original(system: LinearStateSystem,
                      objective: DiscountedLinearObjective,
                      path: ControlPath) -> float:
    """Discounted value along the path, computed from the state trajectory."""
    grid = path.grid
    state = integrate_state(system, path)
    t = grid.times
    tm = grid.midpoints
    rho = objective.discount_rate

    a_nodes = np.array([objective.state_weight_at(tt) for tt in t])
    a_mid = np.array([objective.state_weight_at(tt) for tt in tm])
    sx_nodes = np.einsum("ij,ij->i", a_nodes, state.values)
    sx_mid = np.einsum("ij,ij->i", a_mid, state.midpoint_values)

    # cell j carries control values[j]; h is sampled at the cell's own
    # left edge, midpoint, and right edge so time-dependent payoffs stay
    # consistent with the piecewise-constant control convention
    ncell = grid.n_points - 1
    h_left = np.array([objective.control_payoff(t[j], path.values[j])
                       for j in range(ncell)])
    h_mid = np.array([objective.control_payoff(tm[j], path.values[j])
                      for j in range(ncell)])
    h_right = np.array([objective.control_payoff(t[j + 1], path.values[j])
                        for j in range(ncell)])

    disc_nodes = np.exp(-rho * t)
    disc_mid = np.exp(-rho * tm)
    left = disc_nodes[:-1] * (sx_nodes[:-1] + h_left)
    right = disc_nodes[1:] * (sx_nodes[1:] + h_right)
    mid = disc_mid * (sx_mid + h_mid)
    val = float(np.sum((left + 4.0 * mid + right) * (grid.dt / 6.0)))
    if not math.isfinite(val):
        raise NumericFailureError("original objective evaluated non-finite")
    return val


def evaluate_transformed(system: LinearStateSystem,
                         objective: DiscountedLinearObjective,
                         path: ControlPath,
                         shadow: Optional[ShadowWeight] = None) -> float:
    """Discounted value via the state-free rewriting.

    Equals <b(0), x0> plus the discounted integral of
    <b(t), f(t, u(t))> + h(t, u(t)); must agree with evaluate_original on
    every admissible path.
    """
    grid = path.grid
    if shadow is None:
        shadow = shadow_weight(system, objective)
    t = grid.times
    tm = grid.midpoints
    rho = objective.discount_rate

    def integrand(tt: float, u: np.ndarray) -> float:
        b = shadow(tt)
        f = np.asarray(system.control_map(tt, u), dtype=float)
        return float(b @ f) + objective.control_payoff(tt, u)

    left = np.array([integrand(t[j], path.values[j])
                     for j in range(grid.n_points - 1)])
    mid = np.array([integrand(tm[j], path.values[j])
                    for j in range(grid.n_points - 1)])
    right = np.array([integrand(t[j + 1], path.values[j])
                      for j in range(grid.n_points - 1)])
    disc_l = np.exp(-rho * t[:-1])
    disc_m = np.exp(-rho * tm)
    disc_r = np.exp(-rho * t[1:])
    flow = float(np.sum((disc_l * left + 4.0 * disc_m * mid + disc_r * right)
                        * (grid.dt / 6.0)))
    head = float(shadow(0.0) @ system.initial_state)
    val = head + flow
    if not math.isfinite(val):
        raise NumericFailureError("transformed objective evaluated non-finite")
    return val


# ---------------------------------------------------------------------------
# pointwise solvers
# ---------------------------------------------------------------------------

def pointwise_solve(system: LinearStateSystem,
                    objective: DiscountedLinearObjective,
                    grid: TimeGrid,
                    inner_solver: Callable[[float, Callable[[np.ndarray], float]], np.ndarray],
                    shadow: Optional[ShadowWeight] = None,
                    autonomous: bool = False) -> ControlPath:
    """Maximize the temporary objective at every grid time.

    `inner_solver(t, obj)` must return the maximizer of
    obj(u) = <b(t), f(t, u)> + h(t, u) over the admissible control set;
    it is responsible for enforcing the control constraints and must be
    deterministic.  For autonomous data the single time-zero solution is
    broadcast across the grid.
    """
    if shadow is None:
        shadow = shadow_weight(system, objective)
    t = grid.times

    def temp_objective(tt: float) -> Callable[[np.ndarray], float]:
        b = shadow(tt)

        def obj(u: np.ndarray) -> float:
            f = np.asarray(system.control_map(tt, u), dtype=float)
            return float(b @ f) + objective.control_payoff(tt, u)

        return obj

    if autonomous:
        try:
            u0 = np.atleast_1d(inner_solver(t[0], temp_objective(t[0])))
        except Exception as exc:  # propagate with the offending time
            raise InnerSolverError(str(exc), t[0]) from exc
        return ControlPath(grid, np.tile(u0, (grid.n_points, 1)))

    values = np.empty((grid.n_points, system.dim_control))
    for j, tt in enumerate(t):
        try:
            values[j] = np.atleast_1d(inner_solver(tt, temp_objective(tt)))
        except Exception as exc:
            raise InnerSolverError(str(exc), tt) from exc
    return ControlPath(grid, values)


@dataclass(frozen=True)
class NashPlayer:
    """One player's data for the temporary game.

    `best_response(t, u)` returns the player's optimal block given the
    full joint control vector u; `control_indices` marks which entries of
    the joint vector the player owns (in the order best_response returns
    them).
    """

    name: str
    control_indices: np.ndarray
    best_response: Callable[[float, np.ndarray], np.ndarray]

    def __post_init__(self):
        object.__setattr__(self, "control_indices",
                           np.asarray(self.control_indices, dtype=int))


@dataclass
class NashDiagnostics:
    iterations: int = 0
    max_iterations_used: int = 0
    residual: float = 0.0
    damped_steps: int = 0
    accelerated_steps: int = 0


def temporary_nash(players: Sequence[NashPlayer],
                   grid: TimeGrid,
                   dim_control: int,
                   initial_guess: np.ndarray,
                   closed_form_equilibrium: Optional[Callable[[float], np.ndarray]] = None,
                   tol: float = 1e-12,
                   max_iter: int = 80,
                   autonomous: bool = True,
                   project: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> tuple[ControlPath, NashDiagnostics]:
    """Fixed point of the best-response map at each grid time.

    Sweeps the players in order (Gauss-Seidel), with 0.5 damping when an
    update oscillates and a safeguarded Aitken extrapolation every third
    sweep.  A single player degenerates to plain pointwise maximization.
    With `closed_form_equilibrium` supplied, that candidate is evaluated
    and returned directly.
    """
    diag = NashDiagnostics()
    if closed_form_equilibrium is not None:
        vals = np.array([np.atleast_1d(closed_form_equilibrium(tt))
                         for tt in grid.times])
        return ControlPath(grid, vals), diag

    def sweep(tt: float, u: np.ndarray) -> np.ndarray:
        u_new = u.copy()
        for p in players:
            u_new[p.control_indices] = np.atleast_1d(p.best_response(tt, u_new))
        return u_new

    def solve_at(tt: float) -> np.ndarray:
        u = np.asarray(initial_guess, dtype=float).copy()
        prev_delta = np.zeros_like(u)
        history = [u.copy()]
        sweeps = 0
        while sweeps < max_iter:
            u_new = sweep(tt, u)
            sweeps += 1
            delta = u_new - u
            # damp oscillating components (sign flip of successive updates)
            if sweeps > 1:
                flip = (delta * prev_delta) < 0
                if np.any(flip):
                    u_new[flip] = u[flip] + 0.5 * delta[flip]
                    delta = u_new - u
                    diag.damped_steps += 1
            prev_delta = delta
            scale = 1.0 + np.max(np.abs(u_new))
            res = float(np.max(np.abs(delta)) / scale)
            u = u_new
            history.append(u.copy())
            diag.iterations = sweeps
            diag.max_iterations_used = max(diag.max_iterations_used, sweeps)
            diag.residual = res
            if res < tol:
                return u
            # Aitken extrapolation over the last three iterates; the
            # verification sweep it costs is counted like any other
            if len(history) >= 3 and sweeps % 3 == 0 and sweeps < max_iter:
                x0, x1, x2 = history[-3], history[-2], history[-1]
                d1, d2 = x1 - x0, x2 - x1
                denom = d2 - d1
                safe = np.abs(denom) > 1e-14 * scale
                cand = x2.copy()
                cand[safe] = x2[safe] - d2[safe] ** 2 / denom[safe]
                if project is not None:
                    cand = project(cand)
                cand_next = sweep(tt, cand)
                sweeps += 1
                diag.iterations = sweeps
                diag.max_iterations_used = max(diag.max_iterations_used, sweeps)
                if np.max(np.abs(cand_next - cand)) < np.max(np.abs(delta)):
                    u = cand_next
                    history.append(u.copy())
                    diag.accelerated_steps += 1
                    prev_delta = cand_next - cand
                    res = float(np.max(np.abs(cand_next - cand)) / scale)
                    diag.residual = res
                    if res < tol:
                        return u
        raise EquilibriumNotFoundError(
            f"best-response iteration did not converge (residual {diag.residual:g})",
            last_iterate=u, t=tt)

    if autonomous:
        u_star = solve_at(grid.times[0])
        return ControlPath(grid, np.tile(u_star, (grid.n_points, 1))), diag

    vals = np.empty((grid.n_points, dim_control))
    for j, tt in enumerate(grid.times):
        vals[j] = solve_at(tt)
    return ControlPath(grid, vals), diag


# ---------------------------------------------------------------------------
# transform-identity check
# ---------------------------------------------------------------------------

@dataclass
class FubiniReport:
    n_samples: int
    max_rel_discrepancy: float
    discrepancies: np.ndarray = field(repr=False)
    originals: np.ndarray = field(repr=False)
    transformeds: np.ndarray = field(repr=False)


def fubini_check(system: LinearStateSystem,
                 objective: DiscountedLinearObjective,
                 grid: TimeGrid,
                 path_sampler: Callable[[np.random.Generator, TimeGrid], ControlPath],
                 n_samples: int = 100,
                 seed: int = 0) -> FubiniReport:
    """Compare both evaluators on random admissible piecewise-constant paths.

    Reports the maximum discrepancy normalized by 1 + |value|.  Each
    sample uses its own seeded generator so results are independent of
    evaluation order.
    """
    shadow = shadow_weight(system, objective)
    disc = np.empty(n_samples)
    origs = np.empty(n_samples)
    trans = np.empty(n_samples)
    for k in range(n_samples):
        rng = np.random.default_rng([seed, k])
        path = path_sampler(rng, grid)
        jo = evaluate_original(system, objective, path)
        jt = evaluate_transformed(system, objective, path, shadow=shadow)
        origs[k] = jo
        trans[k] = jt
        disc[k] = abs(jo - jt) / (1.0 + max(abs(jo), abs(jt)))
    return FubiniReport(n_samples=n_samples,
                        max_rel_discrepancy=float(np.max(disc)),
                        discrepancies=disc, originals=origs, transformeds=trans)
