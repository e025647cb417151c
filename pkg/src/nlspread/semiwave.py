"""Semi-wave profiles on the half-line and the speeds they select.

A semi-wave with front speed ``c`` solves, on ``x < 0``,

    d int_{-inf}^0 J(x-y) phi(y) dy - d phi + s phi' + f(phi) = 0,
    phi(-inf) = u0,  phi(0) = 0,

with effective drift ``s = c - nu`` (rightward front), ``s = c`` (no
advection) or ``s = c + nu`` (leftward front).  The speed is fixed by the
flux identity ``c = mu M(c)`` where ``M(c) = int_{-inf}^0 phi(x) K(-x) dx``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
from scipy.optimize import brentq, minimize_scalar

from .errors import ConvergenceError, PreconditionError
from .kernel import DIVERGENT, Kernel, Moment
from .reaction import Reaction

log = logging.getLogger(__name__)

MAX_SPACING = 0.05
PROFILE_TOL = 1e-11
THETA_TOL = 1e-8


# ------------------------------------------------------------ min speed


def min_wave_speed(kernel: Kernel, d: float, f0: float) -> Moment:
    """Linearly determined minimal speed ``min_lam [d (M(lam) - 1) + f0] / lam``.

    ``M`` is the exponential moment; the speed is :data:`DIVERGENT` when no
    exponential moment exists.
    """
    return _min_wave_speed(kernel, float(d), float(f0))


_MWS_CACHE: dict[tuple, Moment] = {}


def _min_wave_speed(kernel: Kernel, d: float, f0: float) -> Moment:
    key = (kernel, d, f0)
    try:
        return _MWS_CACHE[key]
    except (KeyError, TypeError):
        pass
    val = _compute_min_wave_speed(kernel, d, f0)
    try:
        _MWS_CACHE[key] = val
    except TypeError:  # pragma: no cover
        pass
    return val


def _lambda_ceiling(kernel: Kernel) -> float:
    from .kernel import Laplace

    if isinstance(kernel, Laplace):
        return kernel.beta * (1.0 - 1e-9)
    return math.inf


def _compute_min_wave_speed(kernel: Kernel, d: float, f0: float) -> Moment:
    if not (d > 0 and f0 > 0):
        raise ValueError("min_wave_speed needs d > 0 and f0 > 0")
    from .kernel import validate

    if not validate(kernel).holds_Jstarstar:
        return DIVERGENT
    lam_cap = _lambda_ceiling(kernel)

    def speed(lam: float) -> float:
        try:
            m = kernel.exp_moment(lam)
        except OverflowError:
            return math.inf
        if m is DIVERGENT or not math.isfinite(m):
            return math.inf
        return (d * (m - 1.0) + f0) / lam

    grid = np.logspace(-3, 2.5, 221)
    grid = grid[grid < lam_cap]
    vals = np.array([speed(v) for v in grid])
    if not np.any(np.isfinite(vals)):
        raise ConvergenceError("min_wave_speed: no finite value on the search bracket")
    i = int(np.argmin(vals))
    if i in (0, grid.size - 1):
        raise ConvergenceError("min_wave_speed: minimiser at the edge of the log bracket")
    a, b = float(grid[i - 1]), float(grid[i + 1])
    res = minimize_scalar(
        lambda t: speed(math.exp(t)),
        bracket=(math.log(a), math.log(grid[i]), math.log(b)),
        method="golden",
        tol=1e-12,
    )
    return float(min(res.fun, vals[i]))


# -------------------------------------------------------------- problem


class DriftMode(str, enum.Enum):
    RIGHTWARD = "right"
    NEUTRAL = "neutral"
    LEFTWARD = "left"

    def drift(self, c: float, nu: float) -> float:
        if self is DriftMode.RIGHTWARD:
            return c - nu
        if self is DriftMode.LEFTWARD:
            return c + nu
        return c

    def offset(self, nu: float) -> float:
        """Speed at which the effective drift vanishes."""
        return self.drift(0.0, nu) * -1.0

    def threshold(self, c_tilde: float, nu: float) -> float:
        """Upper end of the admissible speeds (``c~`` shifted by the drift)."""
        return c_tilde + self.offset(nu)


def default_length(f0: float) -> float:
    return 40.0 / math.sqrt(f0)


@dataclass(frozen=True)
class SemiWaveProblem:
    d: float
    nu: float
    mu: float
    kernel: Kernel
    reaction: Reaction
    mode: DriftMode = DriftMode.NEUTRAL
    L: float | None = None
    m: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", DriftMode(self.mode))
        if not self.d > 0:
            raise ValueError("d must be > 0")
        if not self.nu >= 0:
            raise ValueError("nu must be >= 0")
        if not self.mu > 0:
            raise ValueError("mu must be > 0")
        f0 = self.reaction.f_prime_zero
        if self.L is None:
            object.__setattr__(self, "L", default_length(f0))
        if self.L < default_length(f0) * (1 - 1e-12):
            raise ValueError(f"L must be >= 40/sqrt(f0) = {default_length(f0):g}")
        if self.m is None:
            object.__setattr__(self, "m", int(math.ceil(self.L / MAX_SPACING)) + 1)
        if self.L / (self.m - 1) > MAX_SPACING * (1 + 1e-12):
            raise ValueError(f"node spacing must be <= {MAX_SPACING}")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.L, 0.0, self.m)

    @property
    def dx(self) -> float:
        return self.L / (self.m - 1)


@dataclass
class SemiWaveProfile:
    c: float
    phi: np.ndarray
    residual: float
    flux: float
    x: np.ndarray = field(repr=False, default=None)
    iterations: int = 0
    projected: bool = False
    monotone_defect: float = 0.0


@dataclass(frozen=True)
class _Operator:
    """Linear part ``d K - d I + s D`` on the unknown nodes plus its boundary vector."""

    matrix: np.ndarray
    boundary: np.ndarray


_OP_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _convolution(p: SemiWaveProblem) -> tuple[np.ndarray, np.ndarray]:
    key = (p.kernel, p.d, p.L, p.m, p.reaction.positive_zero)
    hit = _OP_CACHE.get(key)
    if hit is not None:
        return hit
    x = p.nodes
    n = p.m - 1  # last node is the pinned zero
    dx = p.dx
    u0 = p.reaction.positive_zero
    # phi = u0 continues left of -L; the first few kernel widths of that
    # continuation are put on the grid so node 0 is an interior trapezoid node
    ext = int(math.ceil(min(p.kernel.mass_window(1e-14), p.L) / dx))
    row = p.kernel.eval(np.arange(n + ext + 1) * dx)
    idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    w = np.full(n, dx)
    K = p.d * row[idx] * w[None, :]
    we = np.full(ext, dx)
    we[-1] = 0.5 * dx
    dist = np.arange(n)[:, None] + np.arange(1, ext + 1)[None, :]
    b = p.d * u0 * (row[dist] @ we + p.kernel.tail_mass(x[:n] + p.L + ext * dx))
    if len(_OP_CACHE) > 32:
        _OP_CACHE.clear()
    _OP_CACHE[key] = (K, b)
    return K, b


def _operator(p: SemiWaveProblem, s: float) -> _Operator:
    K, b = _convolution(p)
    n = p.m - 1
    a = s / p.dx
    M = K.copy()
    M[np.diag_indices(n)] -= p.d + a
    M[np.arange(n - 1), np.arange(1, n)] += a
    return _Operator(M, b)


def _residual(op: _Operator, r: Reaction, phi: np.ndarray) -> np.ndarray:
    return op.matrix @ phi + op.boundary + r.eval_f(phi, check=False)


def initial_guess(p: SemiWaveProblem) -> np.ndarray:
    return p.reaction.positive_zero * np.minimum(1.0, -p.nodes / 5.0)


def solve_profile(
    p: SemiWaveProblem,
    c: float,
    phi0: np.ndarray | None = None,
    tol: float = PROFILE_TOL,
    max_steps: int = 10**6,
) -> SemiWaveProfile:
    """Semi-wave profile at front speed ``c``.

    The relaxation ``phi_t = F(phi)`` is advanced with linearly implicit
    Euler steps whose pseudo-time step grows as the residual falls
    (switched evolution relaxation), which turns into Newton's method near
    the fixed point.  Stops once ``max |F| <= tol``.
    """
    s = p.mode.drift(c, p.nu)
    if not s > 0:
        raise PreconditionError(f"effective drift must be > 0 (c={c}, mode={p.mode.value}, nu={p.nu})")
    op = _operator(p, s)
    r = p.reaction
    n = p.m - 1
    phi = (initial_guess(p) if phi0 is None else np.asarray(phi0, dtype=float))[:n].copy()
    F = _residual(op, r, phi)
    res = float(np.max(np.abs(F)))
    tau = 1.0
    eye = np.eye(n)
    it = 0
    while res > tol:
        it += 1
        if it > max_steps:
            raise ConvergenceError(f"semi-wave relaxation did not converge (residual {res:.2e})")
        jac = op.matrix + np.diag(r.derivative(phi))
        delta = scipy.linalg.solve(eye / tau - jac, F, check_finite=False)
        trial = np.maximum(phi + delta, 0.0)
        F_new = _residual(op, r, trial)
        res_new = float(np.max(np.abs(F_new)))
        if not math.isfinite(res_new) or res_new > 2.0 * res:
            tau = max(0.25 * tau, 1e-6)
            if tau <= 1e-6 and it > 200:
                raise ConvergenceError("semi-wave relaxation stalled")
            continue
        tau = min(tau * max(res / max(res_new, 1e-300), 0.5), 1e12)
        phi, F, res = trial, F_new, res_new
    phi_full = np.append(phi, 0.0)
    projected = False
    defect = float(max(np.max(np.diff(phi_full)), 0.0))
    if defect > 1e-10:
        # keep the profile nonincreasing in x
        phi_full = np.maximum.accumulate(phi_full[::-1])[::-1]
        projected = True
    prof = SemiWaveProfile(c, phi_full, res, 0.0, p.nodes, it, projected, defect)
    prof.flux = flux_functional(prof, p.kernel, p.reaction.positive_zero)
    return prof


def flux_functional(profile: SemiWaveProfile, kernel: Kernel, u0: float | None = None) -> float:
    """``int_{-inf}^0 phi(x) K(-x) dx`` on the grid plus the constant tail beyond ``-L``.

    ``u0`` is the level assumed left of the grid; by default the leftmost
    profile value.
    """
    x = profile.x
    phi = profile.phi
    if x is None:
        raise ValueError("profile has no node array")
    L = -float(x[0])
    level = float(phi[0]) if u0 is None else float(u0)
    main = float(np.trapezoid(phi * kernel.tail_mass(-x), x))
    if level == 0.0:
        return main
    tail = kernel.integrated_tail(L)
    if tail is DIVERGENT:
        raise PreconditionError("flux functional is infinite: kernel has no finite first half-moment")
    return main + level * tail


# ------------------------------------------------------------ selection


@dataclass
class Selection:
    c: float
    profile: SemiWaveProfile
    theta: float
    iterations: int
    bracket: tuple[float, float]
    theta_bracket: tuple[float, float]


def speed_bracket(p: SemiWaveProblem) -> tuple[float, float]:
    """Initial ``(c_lo, c_hi)`` for the root of ``Theta``."""
    c_tilde = min_wave_speed(p.kernel, p.d, p.reaction.f_prime_zero)
    if c_tilde is DIVERGENT:
        raise PreconditionError("no finite minimal wave speed; the front accelerates")
    off = p.mode.offset(p.nu)
    thr = p.mode.threshold(c_tilde, p.nu)
    if not thr > max(off, 0.0):
        raise PreconditionError(f"empty speed range for mode {p.mode.value}: nu must be below c~={c_tilde:.6g}")
    delta = min(p.nu * 1e-3 + 1e-6, 1e-4)
    c_lo = max(off, 0.0) + delta
    # Theta > 0 once c exceeds mu * u0 * first half-moment (phi <= u0)
    m1 = p.kernel.first_half_moment()
    c_hi = 0.999 * thr
    if m1 is not DIVERGENT:
        c_hi = min(c_hi, p.mu * p.reaction.positive_zero * m1 + 1e-6)
    c_hi = max(c_hi, c_lo + delta)
    return c_lo, c_hi


def select_speed(p: SemiWaveProblem, tol: float = THETA_TOL) -> tuple[float, SemiWaveProfile]:
    sel = select_speed_detailed(p, tol)
    return sel.c, sel.profile


def select_speed_detailed(p: SemiWaveProblem, tol: float = THETA_TOL) -> Selection:
    """Root of ``Theta(c) = c - mu M(c)`` by a bracketing solver."""
    c_lo, c_hi = speed_bracket(p)
    u0 = p.reaction.positive_zero
    warm: dict[str, np.ndarray] = {}
    profiles: dict[float, SemiWaveProfile] = {}

    def theta(c: float) -> float:
        prof = solve_profile(p, c, phi0=warm.get("phi"))
        if prof.phi[0] > 0.5 * u0:
            warm["phi"] = prof.phi
        profiles[c] = prof
        return c - p.mu * prof.flux

    t_lo = theta(c_lo)
    # shrink toward the drift offset if needed
    off = max(p.mode.offset(p.nu), 0.0)
    shrink = 0
    while t_lo >= 0 and shrink < 20:
        nxt = off + 0.1 * (c_lo - off)
        if not nxt > off * (1 + 1e-12) + 1e-15:
            break
        c_lo = nxt
        t_lo = theta(c_lo)
        shrink += 1
    if t_lo >= 0:
        raise ConvergenceError(
            f"Theta > 0 down to c={c_lo:.6g} (value {t_lo:.3e}): no speed with positive effective drift "
            f"in mode {p.mode.value}"
        )
    t_hi = theta(c_hi)
    if not (t_lo < 0 < t_hi):
        raise ConvergenceError(
            f"Theta has no sign change on [{c_lo:.6g}, {c_hi:.6g}] (values {t_lo:.3e}, {t_hi:.3e})"
        )
    root, info = brentq(theta, c_lo, c_hi, xtol=1e-13, rtol=1e-14, maxiter=200, full_output=True)
    prof = profiles.get(root) or solve_profile(p, root, phi0=warm.get("phi"))
    th = root - p.mu * prof.flux
    if abs(th) > tol:
        raise ConvergenceError(f"speed selection residual {abs(th):.2e} exceeds {tol:.1e}")
    return Selection(float(root), prof, float(th), int(info.iterations), (c_lo, c_hi), (t_lo, t_hi))


def theta_samples(p: SemiWaveProblem, count: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """``Theta`` on ``count`` equispaced speeds inside the admissible bracket."""
    c_lo, c_hi = speed_bracket(p)
    cs = np.linspace(c_lo, c_hi, count)
    vals = []
    warm = None
    for c in cs:
        prof = solve_profile(p, float(c), phi0=warm)
        if prof.phi[0] > 0.5 * p.reaction.positive_zero:
            warm = prof.phi
        vals.append(c - p.mu * prof.flux)
    return cs, np.array(vals)


# -------------------------------------------------------------- triples


@dataclass
class SpeedTriple:
    c_l_star: float
    c_star: float
    c_r_star: float
    c_tilde: Moment
    diagnostics: dict = field(default_factory=dict)
    c_tilde_method: str = "linearly determined"


def speed_triple(
    d: float,
    nu: float,
    mu: float,
    kernel: Kernel,
    reaction: Reaction | None = None,
    L: float | None = None,
    m: int | None = None,
) -> SpeedTriple:
    """Leftward, non-advective and rightward semi-wave speeds."""
    reaction = reaction or Reaction.logistic()
    c_tilde = min_wave_speed(kernel, d, reaction.f_prime_zero)
    if c_tilde is DIVERGENT:
        raise PreconditionError("no finite minimal wave speed; the front accelerates")
    if not nu < c_tilde:
        raise PreconditionError(f"advection nu={nu} must be below c~={c_tilde:.6g}")
    base = SemiWaveProblem(d, nu, mu, kernel, reaction, DriftMode.NEUTRAL, L, m)
    sel = {mode: select_speed_detailed(replace(base, mode=mode)) for mode in DriftMode}
    cl = sel[DriftMode.LEFTWARD].c
    cs = sel[DriftMode.NEUTRAL].c
    cr = sel[DriftMode.RIGHTWARD].c
    diag = {
        mode.value: {
            "iterations": s.iterations,
            "theta_residual": s.theta,
            "profile_residual": s.profile.residual,
            "bracket": list(s.bracket),
        }
        for mode, s in sel.items()
    }
    if nu > 0 and not (0 < cl < cs < cr):
        raise ConvergenceError(f"speed ordering violated: {cl!r}, {cs!r}, {cr!r}")
    if cl < cs - nu - 1e-6 or cr > cs + nu + 1e-6:
        raise ConvergenceError(f"speed bounds violated: c_l={cl!r}, c*={cs!r}, c_r={cr!r}, nu={nu}")
    return SpeedTriple(cl, cs, cr, c_tilde, diag)


def sandwich_speeds(
    d: float,
    nu: float,
    mu: float,
    kernel: Kernel,
    eps: float,
    L: float | None = None,
    m: int | None = None,
) -> tuple[float, float, float, float]:
    """``(c_r2, c_r1, c_l2, c_l1)`` for the lower (2) and upper (1) perturbed reactions."""
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    out = []
    for mode in (DriftMode.RIGHTWARD, DriftMode.LEFTWARD):
        for r in (Reaction.lower(eps), Reaction.upper(eps)):
            out.append(select_speed(SemiWaveProblem(d, nu, mu, kernel, r, mode, L, m))[0])
    cr2, cr1, cl2, cl1 = out
    if not (cr2 < cr1 and cl2 < cl1):
        raise ConvergenceError(f"perturbed speeds out of order: {out}")
    return cr2, cr1, cl2, cl1
