"""Self-contained numerical kernels used by every other module.

Contents: complete elliptic integral of the first kind (AGM iteration),
the real part of the digamma function on the line 1/2 + iy (recurrence plus
asymptotic series), a damped Gauss-Newton / Levenberg-Marquardt least-squares
driver with a numerically differenced Jacobian, and an algebraic (Taubin)
circle fit with one geometric refinement pass.

All functions are pure; nothing here keeps state between calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateDataError, DomainError, SingularJacobianError

__all__ = [
    "FitResult",
    "Circle2D",
    "elliptic_k",
    "digamma_half_line",
    "numeric_jacobian",
    "least_squares_fit",
    "circle_fit",
]


# --------------------------------------------------------------------------
# special functions
# --------------------------------------------------------------------------

def elliptic_k(k: float) -> float:
    """Complete elliptic integral of the first kind K(k).

    Takes the *modulus* k (not the parameter m = k^2); the conformal-mapping
    formulas in :mod:`resokit.cpw` are written in terms of k.  Evaluated by
    arithmetic-geometric-mean iteration, relative accuracy better than 1e-12.
    """
    k = float(k)
    if not 0.0 <= k < 1.0:
        raise DomainError(f"elliptic_k requires 0 <= k < 1, got {k}")
    a = 1.0
    b = math.sqrt(1.0 - k * k)
    # AGM converges quadratically; the gap bottoms out at ~1 ulp, so stop on
    # stagnation rather than an absolute threshold
    for _ in range(60):
        gap = abs(a - b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        if abs(a - b) >= gap:
            break
    return math.pi / (a + b)


# Bernoulli-number coefficients B_{2n}/(2n) of the digamma asymptotic series.
_DIGAMMA_ASYMPTOTIC = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def digamma_half_line(y: float) -> float:
    """Re psi(1/2 + i*y) for real y.

    Even in y by conjugate symmetry.  Uses the recurrence psi(z+1) = psi(z) + 1/z
    to push the argument to |z| > 9, then the standard asymptotic series
    psi(z) ~ ln z - 1/(2z) - sum B_2n / (2n z^2n).  Relative accuracy ~1e-13.
    """
    z = complex(0.5, abs(float(y)))
    shift = 0.0
    while abs(z) < 9.0:
        shift += (1.0 / z).real
        z += 1.0
    inv2 = 1.0 / (z * z)
    series = 0.0 + 0.0j
    term = inv2
    for coeff in _DIGAMMA_ASYMPTOTIC:
        series += coeff * term
        term *= inv2
    return (np.log(z) - 0.5 / z - series).real - shift


# --------------------------------------------------------------------------
# damped nonlinear least squares
# --------------------------------------------------------------------------

@dataclass
class FitResult:
    """Outcome of a least-squares fit.

    covariance is sigma^2 (J^T J)^-1 with sigma^2 = |r|^2 / (N - M); it is
    symmetrized on output and positive semi-definite up to round-off.
    """

    params: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool


def numeric_jacobian(fun: Callable[[np.ndarray], np.ndarray],
                     params: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of a residual function.

    Step per parameter: max(1e-8, 1e-8*|p|).  Callers fitting physical
    quantities with extreme scales (Hz next to seconds) should hand in
    rescaled parameters; the step rule assumes O(1)-ish magnitudes.
    """
    params = np.asarray(params, dtype=float)
    r0 = np.asarray(fun(params), dtype=float)
    jac = np.empty((r0.size, params.size))
    for i in range(params.size):
        h = max(1e-8, 1e-8 * abs(params[i]))
        plus = params.copy()
        minus = params.copy()
        plus[i] += h
        minus[i] -= h
        jac[:, i] = (np.asarray(fun(plus), float) - np.asarray(fun(minus), float)) / (2.0 * h)
    return jac


def _logistic_forward(x: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                      free: np.ndarray) -> np.ndarray:
    p = x.copy()
    b = ~free
    p[b] = lo[b] + (hi[b] - lo[b]) / (1.0 + np.exp(-x[b]))
    return p


def _logistic_inverse(p: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                      free: np.ndarray) -> np.ndarray:
    x = p.copy()
    b = ~free
    t = (p[b] - lo[b]) / (hi[b] - lo[b])
    t = np.clip(t, 1e-12, 1.0 - 1e-12)
    x[b] = np.log(t / (1.0 - t))
    return x


def _logistic_slope(x: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                    free: np.ndarray) -> np.ndarray:
    d = np.ones_like(x)
    b = ~free
    s = 1.0 / (1.0 + np.exp(-x[b]))
    d[b] = (hi[b] - lo[b]) * s * (1.0 - s)
    return d


def least_squares_fit(fun: Callable[..., np.ndarray],
                      initial: Sequence[float],
                      bounds: Sequence[tuple[float | None, float | None]] | None = None,
                      args: tuple = (),
                      max_iterations: int = 200,
                      rel_tol: float = 1e-12,
                      step_tol: float = 1e-12) -> FitResult:
    """Levenberg-Marquardt style damped Gauss-Newton.

    fun(params, *args) returns the residual vector.  Bounded parameters are
    mapped onto the open interval with a logistic transform so the core stays
    unconstrained; the covariance is mapped back through the chain rule.

    Each iteration first tries the undamped Gauss-Newton step; if that fails
    to reduce the residual the Marquardt ladder takes over with lambda scaled
    x3 on reject and /3 on accept (lambda_0 = 1e-3).  Trying the pure step
    first is what makes quadratic objectives converge in <= 2 iterations.

    Stops when the relative residual decrease or the (scaled) step norm drops
    below the tolerances, or after max_iterations.  Non-convergence is
    reported through ``converged``, never raised; a rank-deficient J^T J at
    the solution raises SingularJacobianError.
    """
    p_ext = np.asarray(initial, dtype=float).copy()
    n_par = p_ext.size

    if bounds is None:
        lo = np.full(n_par, -np.inf)
        hi = np.full(n_par, np.inf)
        free = np.ones(n_par, dtype=bool)
    else:
        if len(bounds) != n_par:
            raise DomainError("bounds length must match parameter count")
        lo = np.array([-np.inf if b is None or b[0] is None else float(b[0]) for b in bounds])
        hi = np.array([np.inf if b is None or b[1] is None else float(b[1]) for b in bounds])
        free = ~(np.isfinite(lo) & np.isfinite(hi))
        half = np.isfinite(lo) ^ np.isfinite(hi)
        if np.any(half):
            raise DomainError("bounds must be a finite (lo, hi) pair or fully open")
        inside = free | ((p_ext > lo) & (p_ext < hi))
        if not np.all(inside):
            raise DomainError("initial parameters must lie strictly inside bounds")

    def residuals_internal(x: np.ndarray) -> np.ndarray:
        return np.asarray(fun(_logistic_forward(x, lo, hi, free), *args), dtype=float)

    x = _logistic_inverse(p_ext, lo, hi, free)
    r = residuals_internal(x)
    n_res = r.size
    if n_res < n_par:
        raise DomainError(f"need at least {n_par} residuals, got {n_res}")
    cost = float(r @ r)

    lam = 1e-3
    iterations = 0
    converged = False
    jac = None

    while iterations < max_iterations:
        jac = numeric_jacobian(residuals_internal, x)
        jtj = jac.T @ jac
        g = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0.0] = 1.0

        accepted = False
        # undamped Gauss-Newton trial first; a sub-tolerance trial step means
        # the optimum is already resolved and is not counted as an iteration
        gn_predicted = None
        try:
            step = np.linalg.solve(jtj, -g)
        except np.linalg.LinAlgError:
            step = None
        if step is not None and np.all(np.isfinite(step)):
            gn_predicted = float(-g @ step)  # g^T (J^T J)^-1 g >= 0
            if float(np.linalg.norm(step)) / (float(np.linalg.norm(x)) + 1.0) < step_tol:
                converged = True
                break
            r_new = residuals_internal(x + step)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
        if not accepted:
            for _retry in range(60):
                step = np.linalg.solve(jtj + lam * np.diag(diag), -g)
                r_new = residuals_internal(x + step)
                cost_new = float(r_new @ r_new)
                if np.isfinite(cost_new) and cost_new < cost:
                    accepted = True
                    lam = max(lam / 3.0, 1e-14)
                    break
                lam *= 3.0
            else:
                # no step of any damping reduces the cost: a numerically
                # stationary point when the model predicts (almost) no gain
                if (gn_predicted is not None and cost > 0.0
                        and gn_predicted < 1e-9 * cost):
                    converged = True
                break

        iterations += 1
        step_norm = float(np.linalg.norm(step)) / (float(np.linalg.norm(x)) + 1.0)
        rel_decrease = (cost - cost_new) / cost if cost > 0.0 else 0.0
        x = x + step
        r = r_new
        cost = cost_new
        if rel_decrease < rel_tol or step_norm < step_tol:
            converged = True
            break

    params = _logistic_forward(x, lo, hi, free)
    covariance = np.zeros((n_par, n_par))
    if iterations > 0 and n_res > n_par:
        jac = numeric_jacobian(residuals_internal, x)
        jtj = jac.T @ jac
        rank = int(np.linalg.matrix_rank(jtj))
        if rank < n_par:
            raise SingularJacobianError(rank, n_par)
        sigma2 = cost / (n_res - n_par)
        cov_int = sigma2 * np.linalg.inv(jtj)
        slope = _logistic_slope(x, lo, hi, free)
        covariance = cov_int * np.outer(slope, slope)
        covariance = 0.5 * (covariance + covariance.T)

    return FitResult(params=params, covariance=covariance,
                     residual_norm=math.sqrt(cost), iterations=iterations,
                     converged=converged)


# --------------------------------------------------------------------------
# circle fit
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Circle2D:
    center_re: float
    center_im: float
    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise DegenerateDataError(f"circle radius must be positive, got {self.radius}")


def _taubin_svd(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Algebraic circle fit with Taubin normalization (SVD form)."""
    xm, ym = x.mean(), y.mean()
    u, v = x - xm, y - ym
    z = u * u + v * v
    zm = z.mean()
    if zm <= 0.0:
        raise DegenerateDataError("all points coincide; no circle defined")
    z0 = (z - zm) / (2.0 * math.sqrt(zm))
    mat = np.column_stack([z0, u, v])
    _, s, vt = np.linalg.svd(mat, full_matrices=False)
    if s[-1] > 1e-8 * s[0] and s[0] > 0:
        # no direction annihilates the design matrix: points are not on any
        # circle, but the smallest singular vector is still the LS solution
        pass
    a = vt[-1]
    a0 = a[0] / (2.0 * math.sqrt(zm))
    a3 = -zm * a0
    if abs(a0) < 1e-14 * max(abs(a[1]), abs(a[2]), 1.0):
        raise DegenerateDataError("points are collinear; circle fit is degenerate")
    cx = -a[1] / (2.0 * a0)
    cy = -a[2] / (2.0 * a0)
    r = math.sqrt(max(a[1] * a[1] + a[2] * a[2] - 4.0 * a0 * a3, 0.0)) / (2.0 * abs(a0))
    return cx + xm, cy + ym, r


def circle_fit(points: Sequence[tuple[float, float]] | np.ndarray) -> Circle2D:
    """Least-squares circle through 2-D points.

    Taubin-normalized algebraic fit followed by one geometric refinement pass
    (distance-to-circle residuals via least_squares_fit).  Raises
    DegenerateDataError for < 3 distinct points or collinear input.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise DegenerateDataError("circle_fit needs >= 3 (re, im) points")
    x, y = pts[:, 0], pts[:, 1]
    distinct = np.unique(pts, axis=0)
    if distinct.shape[0] < 3:
        raise DegenerateDataError("circle_fit needs >= 3 distinct points")
    # collinearity check on the centered coordinates
    centered = pts - pts.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[1] <= 1e-12 * max(s[0], 1e-300):
        raise DegenerateDataError("points are collinear; circle fit is degenerate")

    # scale to O(1) so the algebraic stage is well conditioned
    scale = float(np.abs(centered).max())
    cx, cy, r = _taubin_svd(x / scale, y / scale)
    cx, cy, r = cx * scale, cy * scale, r * scale

    def res(p: np.ndarray) -> np.ndarray:
        return np.hypot(x - p[0], y - p[1]) - p[2]

    refined = least_squares_fit(res, [cx, cy, r], max_iterations=30)
    cx, cy, r = refined.params
    return Circle2D(center_re=float(cx), center_im=float(cy), radius=float(r))
