"""Derivative-free maximization helpers shared by the regime solvers.

All routines are deterministic: fixed iteration rules, fixed multi-start
grids, and ties broken toward the lexicographically smaller argument.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy import optimize

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0  # 1/golden ratio


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-10) -> float:
    """Locate the maximizer of a unimodal f on [lo, hi].

    Returns the midpoint of the final bracket; accuracy `tol` on the
    argument.
    """
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def maximize_1d_nonneg(f: Callable[[float], float], hi0: float = 1.0,
                       tol: float = 1e-10, max_expand: int = 60) -> float:
    """Maximize a unimodal f over [0, inf).

    The right end of the bracket is doubled until f is decreasing there,
    then golden-section search runs on the bracket.  The boundary
    candidate x = 0 is always compared against the interior one.
    """
    hi = float(hi0)
    n = 0
    while f(hi) > f(0.7 * hi) and n < max_expand:
        hi *= 2.0
        n += 1
    if n == max_expand:
        raise RuntimeError("bracket expansion exhausted: objective still "
                           f"increasing at {hi:g}")
    x = golden_section_max(f, 0.0, hi, tol=tol)
    # tie-break toward the boundary when it is at least as good
    if f(0.0) >= f(x):
        return 0.0
    return x


def _coordinate_refine(f: Callable[[np.ndarray], float], x: np.ndarray,
                       tol: float, max_pass: int = 40) -> np.ndarray:
    """Cyclic per-coordinate golden-section polish on the nonnegative orthant."""
    x = np.asarray(x, dtype=float).copy()
    span = np.maximum(np.abs(x), 1.0)
    for _ in range(max_pass):
        moved = 0.0
        for i in range(x.size):
            def f1(v: float, i: int = i) -> float:
                xi = x.copy()
                xi[i] = v
                return f(xi)

            lo = max(0.0, x[i] - span[i])
            hi = x[i] + span[i]
            xi_new = golden_section_max(f1, lo, hi, tol=tol * max(1.0, abs(x[i])))
            if f1(0.0) >= f1(xi_new):
                xi_new = 0.0
            moved = max(moved, abs(xi_new - x[i]))
            x[i] = xi_new
        span = np.maximum(0.25 * span, 10.0 * tol)
        if moved < tol:
            break
    return x


def warm_start_max(f: Callable[[np.ndarray], float], x0: np.ndarray,
                   tol: float = 1e-9, refine_passes: int = 2) -> np.ndarray:
    """Cheap re-solve from a nearby previous optimum (continuation use).

    Nelder-Mead relocates the optimum, a short coordinate polish handles
    coordinates parked at zero, and the Newton step removes the
    coordinate-descent zigzag bias (which would otherwise corrupt
    envelope-based outer derivatives).
    """
    x0 = np.asarray(x0, dtype=float)
    res = optimize.minimize(lambda x: -f(np.maximum(x, 0.0)), x0,
                            method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-14,
                                     "maxiter": 2000})
    x = _coordinate_refine(f, np.maximum(res.x, 0.0), tol=tol,
                           max_pass=refine_passes)
    return newton_polish_nonneg(f, x, steps=6)


def maximize_nd_nonneg(f: Callable[[np.ndarray], float],
                       starts: Sequence[np.ndarray],
                       tol: float = 1e-10,
                       tie_tol: float = 1e-9) -> np.ndarray:
    """Maximize a smooth function over the nonnegative orthant.

    Nelder-Mead from each deterministic start, then cyclic golden-section
    refinement of the best candidate.  Near-ties resolve toward the
    lexicographically smaller argument.
    """
    def f_clip(x: np.ndarray) -> float:
        return f(np.maximum(x, 0.0))

    best_x, best_v = None, -np.inf
    for x0 in starts:
        x0 = np.asarray(x0, dtype=float)
        res = optimize.minimize(lambda x: -f_clip(x), x0, method="Nelder-Mead",
                                options={"xatol": 1e-9, "fatol": 1e-12,
                                         "maxiter": 4000})
        cand = np.maximum(res.x, 0.0)
        val = f(cand)
        if val > best_v + tie_tol or (abs(val - best_v) <= tie_tol and
                                      best_x is not None and
                                      tuple(cand) < tuple(best_x)):
            best_x, best_v = cand, max(val, best_v)
    assert best_x is not None
    return _coordinate_refine(f, best_x, tol=tol)


def lbfgsb_max_nonneg(f: Callable[[np.ndarray], float], x0: np.ndarray,
                      upper: np.ndarray | None = None) -> np.ndarray:
    """Bound-constrained maximization, used by the numeric oracles."""
    x0 = np.asarray(x0, dtype=float)
    hi = np.full(x0.size, np.inf) if upper is None else np.asarray(upper, float)
    res = optimize.minimize(lambda x: -f(x), x0, method="L-BFGS-B",
                            bounds=list(zip(np.zeros(x0.size), hi)),
                            options={"ftol": 1e-15, "gtol": 1e-12,
                                     "maxiter": 2000, "maxfun": 20000})
    return np.maximum(res.x, 0.0)


def newton_polish_nonneg(f: Callable[[np.ndarray], float], x: np.ndarray,
                         steps: int = 12, zero_tol: float = 1e-11) -> np.ndarray:
    """Finite-difference Newton refinement on the nonnegative orthant.

    Coordinates pinned at zero stay inactive when their one-sided
    derivative points outward; the remaining block takes damped Newton
    steps with per-coordinate scaled central differences.  Used to push
    derivative-free optima to near machine precision.
    """
    x = np.maximum(np.asarray(x, dtype=float).copy(), 0.0)
    n = x.size
    for _ in range(steps):
        h = 6e-6 * np.maximum(np.abs(x), 1.0)
        active = []
        for i in range(n):
            if x[i] > zero_tol:
                active.append(i)
            else:
                e = np.zeros(n)
                e[i] = h[i]
                if (f(x + e) - f(x)) / h[i] > 0.0:
                    active.append(i)
                else:
                    x[i] = 0.0
        if not active:
            break
        m = len(active)
        grad = np.zeros(m)
        hess = np.zeros((m, m))
        fx = f(x)
        fp = np.empty(m)
        fm = np.empty(m)
        # keep central differences inside the orthant
        for a, i in enumerate(active):
            if 0.0 < x[i] < h[i]:
                h[i] = 0.5 * x[i]
        for a, i in enumerate(active):
            e = np.zeros(n)
            e[i] = h[i]
            fp[a] = f(x + e)
            fm[a] = f(np.maximum(x - e, 0.0))
            grad[a] = (fp[a] - fm[a]) / (2.0 * h[i])
            hess[a, a] = (fp[a] - 2.0 * fx + fm[a]) / h[i] ** 2
        for a, i in enumerate(active):
            for b0, j in enumerate(active):
                if b0 <= a:
                    continue
                ei = np.zeros(n)
                ei[i] = h[i]
                ej = np.zeros(n)
                ej[j] = h[j]
                fpp = f(x + ei + ej)
                fpm = f(np.maximum(x + ei - ej, 0.0))
                fmp = f(np.maximum(x - ei + ej, 0.0))
                fmm = f(np.maximum(x - ei - ej, 0.0))
                hess[a, b0] = hess[b0, a] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
        try:
            delta = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            break
        step = np.zeros(n)
        for a, i in enumerate(active):
            step[i] = delta[a]
        # backtrack if the full step does not improve
        for scale_ in (1.0, 0.5, 0.25, 0.1):
            cand = np.maximum(x + scale_ * step, 0.0)
            if f(cand) >= fx:
                x = cand
                break
        else:
            break
        if np.max(np.abs(scale_ * step) / np.maximum(np.abs(x), 1.0)) < 1e-13:
            break
    return x
