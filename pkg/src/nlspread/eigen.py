"""Principal eigenvalue of the nonlocal operator with drift on ``[-h, h]``.

The operator is

    L[phi](x) = d int_{-h}^{h} J(x-y) phi(y) dy - d phi(x) - nu phi'(x) + a0 phi(x)

discretised on ``m`` uniform nodes including both ends: trapezoid weights for
the convolution and a first-order upwind difference for the drift, with the
eigenfunction extended by zero on the inflow side.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, PreconditionError
from .kernel import Kernel

log = logging.getLogger(__name__)

MAX_SPACING = 0.05
MIN_NODES = 128


def default_nodes(h: float) -> int:
    """Smallest node count with spacing at most ``min(0.05, h/32)``."""
    dx = min(MAX_SPACING, h / 32.0)
    return max(MIN_NODES, int(math.ceil(2.0 * h / dx)) + 1)


@dataclass(frozen=True)
class EigenProblem:
    d: float
    a0: float
    nu: float
    h: float
    kernel: Kernel
    m: int | None = None

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("d must be > 0")
        if self.nu < 0:
            raise ValueError("nu must be >= 0")
        if not self.h > 0:
            raise ValueError("h must be > 0")
        if self.m is None:
            object.__setattr__(self, "m", default_nodes(self.h))
        if self.m < MIN_NODES:
            raise ValueError(f"need at least {MIN_NODES} nodes, got {self.m}")

    @property
    def nodes(self) -> np.ndarray:
        x = np.linspace(-self.h, self.h, self.m)
        return 0.5 * (x - x[::-1])

    @property
    def dx(self) -> float:
        return 2.0 * self.h / (self.m - 1)


@dataclass
class EigenResult:
    lambda_p: float
    eigenfunction: np.ndarray
    iterations: int
    residual: float
    nodes: np.ndarray = field(repr=False, default=None)
    bounds: tuple[float, float] = (math.nan, math.nan)


def trapezoid_weights(m: int, dx: float) -> np.ndarray:
    w = np.full(m, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


def assemble(p: EigenProblem) -> np.ndarray:
    x = p.nodes
    w = trapezoid_weights(p.m, p.dx)
    offsets = np.arange(p.m) * p.dx
    jrow = p.kernel.eval(offsets)
    idx = np.abs(np.subtract.outer(np.arange(p.m), np.arange(p.m)))
    A = p.d * jrow[idx] * w[None, :]
    A[np.diag_indices_from(A)] += p.a0 - p.d
    if p.nu > 0:
        c = p.nu / p.dx
        A[np.diag_indices_from(A)] -= c
        A[np.arange(1, p.m), np.arange(p.m - 1)] += c
    del x
    return A


def balancing_rate(p: EigenProblem) -> float:
    """Exponential rate ``kappa`` minimising ``d (M(kappa) - 1) - nu kappa``.

    With drift the Perron vector grows roughly like ``exp(kappa x)``; the
    diagonal similarity ``exp(-kappa x) A exp(kappa x)`` flattens it so the
    iteration keeps full relative accuracy at the inflow end.
    """
    if p.nu == 0:
        return 0.0
    from scipy.optimize import minimize_scalar

    from .kernel import DIVERGENT

    def g(k):
        mgf = p.kernel.exp_moment(k) if k > 0 else 1.0
        if mgf is DIVERGENT:
            return math.inf
        return p.d * (mgf - 1.0) - p.nu * k

    hi = 1.0
    while g(hi) < g(0.5 * hi) and hi < 1e3:
        hi *= 2.0
    if g(1e-6) is math.inf:
        return 0.0
    res = minimize_scalar(g, bounds=(0.0, hi), method="bounded", options={"xatol": 1e-8})
    k = float(res.x)
    # cap the dynamic range of the similarity to stay clear of overflow
    return min(k, 600.0 / (2.0 * p.h))


def principal_eigenvalue(
    p: EigenProblem,
    tol: float = 1e-10,
    max_iter: int = 500,
    x0: np.ndarray | None = None,
) -> EigenResult:
    """Perron eigenpair by shifted inverse iteration.

    ``A`` is essentially nonnegative, so for a shift ``s`` above the spectral
    bound ``(sI - A)^-1`` is entrywise positive with the same Perron vector.
    Shifts come from the Collatz-Wielandt bounds
    ``min_i (Ax)_i/x_i <= lambda_p <= max_i (Ax)_i/x_i`` of the current
    iterate; iteration stops when successive eigenvalue estimates agree to
    ``tol (1 + |lambda|)`` and the residual is below ``1e-8 (1 + |lambda|)``.
    """
    A0 = assemble(p)
    kappa = balancing_rate(p)
    x_nodes = p.nodes
    scale = np.exp(kappa * (x_nodes - x_nodes[-1]))
    # B = S^-1 A S with S = diag(scale)
    B = A0 * (scale[None, :] / scale[:, None]) if kappa else A0
    n = p.m
    z = np.ones(n) if x0 is None else np.maximum(np.asarray(x0, float) / scale, 1e-300)
    z = z / np.max(z)
    bz = B @ z
    ratio = bz / z
    lo, hi = float(np.min(ratio)), float(np.max(ratio))
    lam_prev = math.inf
    lam = float(z @ bz / (z @ z))
    eye = np.eye(n)
    safe = True
    for it in range(1, max_iter + 1):
        if safe:
            # rigorous: strictly above the Collatz-Wielandt upper bound
            shift = hi + max(0.5 * (hi - lo), 1e-12 * (1.0 + abs(hi)))
        else:
            # accelerated: just above the current estimate
            shift = lam + max(abs(lam - lam_prev), 1e-9 * (1.0 + abs(lam)))
        lu = scipy.linalg.lu_factor(shift * eye - B, check_finite=False)
        y = scipy.linalg.lu_solve(lu, z, check_finite=False)
        if not np.all(y > 0):
            if safe:
                raise ConvergenceError("eigen: inverse iterate lost positivity")
            safe = True
            continue
        z = y / np.max(y)
        bz = B @ z
        ratio = bz / z
        lo = max(lo, float(np.min(ratio)))
        hi = min(hi, float(np.max(ratio)))
        lam_prev, lam = lam, float(z @ bz / (z @ z))
        safe = False
        if abs(lam - lam_prev) < tol * (1.0 + abs(lam)):
            phi = z * scale
            phi = phi / np.max(phi)
            res = float(np.max(np.abs(A0 @ phi - lam * phi)))
            if res <= 1e-8 * (1.0 + abs(lam)):
                return EigenResult(lam, phi, it, res, x_nodes, (lo, hi))
    raise ConvergenceError(f"eigen: no convergence in {max_iter} iterations (gap {hi - lo:.3e})")


CRITICAL_NODES = 512


def critical_length(
    d: float,
    f0: float,
    nu: float,
    kernel: Kernel,
    tol: float = 1e-6,
    m: int | None = None,
) -> float:
    """Half-length ``h*`` where the principal eigenvalue with ``a0 = f0`` vanishes.

    A sign change is bracketed by doubling from ``h = 0.1``; the root is then
    refined with Brent's method at a fixed node count (default 512, so that
    the discretisation itself does not move between evaluations).
    """
    if not f0 < d:
        raise PreconditionError(
            f"critical length needs f0 < d (got f0={f0}, d={d}); spreading always occurs"
        )
    if not tol > 0:
        raise ValueError("tol must be > 0")
    from scipy.optimize import brentq

    cache: dict[float, float] = {}

    def lam_at(h: float) -> float:
        if h not in cache:
            mm = m or max(CRITICAL_NODES, default_nodes(h))
            cache[h] = principal_eigenvalue(EigenProblem(d, f0, nu, h, kernel, mm)).lambda_p
        return cache[h]

    hi_h = 0.1
    while lam_at(hi_h) <= 0:
        hi_h *= 2.0
        if hi_h > 1e3:
            raise PreconditionError("critical length: no sign change below h = 1e3")
    lo_h = 0.5 * hi_h
    while lam_at(lo_h) >= 0:
        lo_h *= 0.5
        if lo_h < 1e-8:  # pragma: no cover
            raise PreconditionError("critical length: no sign change above h = 1e-8")
    if m is None and default_nodes(hi_h) > CRITICAL_NODES:
        # keep one grid across the whole refinement
        m = default_nodes(hi_h)
        cache.clear()
    h_star = brentq(lam_at, lo_h, hi_h, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    lam = lam_at(h_star)
    if abs(lam) > tol:
        raise ConvergenceError(f"critical length: root refinement stalled at |lambda_p| = {abs(lam):.2e}")
    log.debug("critical length h*=%.10g (lambda=%.3e)", h_star, lam)
    return float(h_star)
