"""Free-boundary nonlocal diffusion with advection in front-fixed coordinates.

The physical problem on ``g(t) < x < h(t)``

    u_t = d int_g^h J(x-y) u(y) dy - d u - nu u_x + f(u),
    h'  =  mu int_g^h u(x) K(h-x) dx,     g' = -mu int_g^h u(x) K(x-g) dx,

(``K`` the kernel tail mass) is mapped to ``y in [-1, 1]`` by
``y = (2x - (h+g)) / (h-g)``.  With ``A = 2/(h-g)`` and
``B = -[y (h'-g') + (h'+g')] / (h-g)`` the field ``w(t, y) = u(t, x)`` obeys

    w_t = d int_{-1}^{1} J((y-z)/A) w(z) dz/A - d w - (nu A + B) w_y + f(w).

The chain rule fixes the sign of the transport term: a node at fixed ``y``
moves in ``x`` with speed ``-B/A``, so ``u_t = w_t + B w_y``.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import ConfigError, ConvergenceError, PreconditionError
from .kernel import Kernel
from .reaction import Reaction

log = logging.getLogger(__name__)

MIN_NODES = 64
ACTIVE_LEVEL = 1e-12


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class SolverConfig:
    """Physical and numerical parameters of one simulation.

    ``sample_dt`` is the spacing of the recorded time series; steps are
    clipped to land on every sample time, so runs that differ only in their
    initial data are sampled at identical times.  A snapshot of the profile
    is kept every ``snapshot_every`` samples.
    """

    d: float
    nu: float
    mu: float
    h0: float
    kernel: Kernel
    reaction: Reaction = field(default_factory=Reaction.logistic)
    n: int = 400
    cfl: float = 0.5
    t_end: float = 60.0
    snapshot_every: int = 50
    sample_dt: float = 0.1

    def __post_init__(self):
        if not self.d > 0:
            raise ConfigError("d must be > 0")
        if not self.nu >= 0:
            raise ConfigError("nu must be >= 0")
        # mu = 0 is kept for the frozen-front degenerate case
        if not self.mu >= 0:
            raise ConfigError("mu must be >= 0")
        if not self.h0 > 0:
            raise ConfigError("h0 must be > 0")
        if int(self.n) != self.n or self.n < MIN_NODES:
            raise ConfigError(f"n must be an integer >= {MIN_NODES}")
        if not 0 < self.cfl <= 1:
            raise ConfigError("cfl must lie in (0, 1]")
        if not self.t_end > 0:
            raise ConfigError("t_end must be > 0")
        if int(self.snapshot_every) != self.snapshot_every or self.snapshot_every < 1:
            raise ConfigError("snapshot_every must be a positive integer")
        if not self.sample_dt > 0:
            raise ConfigError("sample_dt must be > 0")

    def advection_warning(self) -> str | None:
        """Message when ``nu`` is not below the minimal wave speed, else ``None``."""
        from .semiwave import min_wave_speed
        from .kernel import DIVERGENT

        c_tilde = min_wave_speed(self.kernel, self.d, self.reaction.f_prime_zero)
        if c_tilde is not DIVERGENT and self.nu >= c_tilde:
            return f"nu={self.nu} is not below the minimal wave speed {c_tilde:.6g}"
        return None


# ----------------------------------------------------------------- state


@dataclass(frozen=True)
class FbState:
    t: float
    g: float
    h: float
    w: np.ndarray
    g_rate: float = 0.0
    h_rate: float = 0.0

    @property
    def n(self) -> int:
        return self.w.size

    @property
    def x(self) -> np.ndarray:
        return physical_nodes(self.n, self.g, self.h)

    @property
    def max_w(self) -> float:
        return float(np.max(self.w))

    def mass(self) -> float:
        return float(_weights(self.n) @ self.w) * 0.5 * (self.h - self.g)


@lru_cache(maxsize=16)
def _grid(n: int) -> np.ndarray:
    y = np.linspace(-1.0, 1.0, n)
    y = 0.5 * (y - y[::-1])
    y.setflags(write=False)
    return y


@lru_cache(maxsize=16)
def _weights(n: int) -> np.ndarray:
    dy = 2.0 / (n - 1)
    w = np.full(n, dy)
    w[0] = w[-1] = 0.5 * dy
    w.setflags(write=False)
    return w


@lru_cache(maxsize=4)
def _toeplitz_index(n: int) -> np.ndarray:
    i = np.arange(n)
    idx = np.abs(i[:, None] - i[None, :])
    idx.setflags(write=False)
    return idx


def y_nodes(n: int) -> np.ndarray:
    """Uniform, exactly symmetric nodes on ``[-1, 1]``."""
    return _grid(n).copy()


def physical_nodes(n: int, g: float, h: float) -> np.ndarray:
    return _grid(n) * (0.5 * (h - g)) + 0.5 * (h + g)


def _check_state(state: FbState) -> None:
    if not state.h > state.g:
        raise PreconditionError(f"invalid state: h={state.h} <= g={state.g}")
    if state.w.ndim != 1 or state.w.size < 3:
        raise PreconditionError("invalid state: w must be a 1-D array of length >= 3")
    if not np.all(np.isfinite(state.w)):
        raise PreconditionError("invalid state: w has non-finite entries")


# --------------------------------------------------------- initial data


class ProfileKind(enum.Enum):
    PARABOLIC = "parabolic"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Profile:
    kind: ProfileKind = ProfileKind.PARABOLIC
    amplitude: float = 1.0
    values: tuple[float, ...] | None = None

    @classmethod
    def parabolic(cls, amplitude: float = 1.0) -> "Profile":
        return cls(ProfileKind.PARABOLIC, amplitude=amplitude)

    @classmethod
    def custom(cls, values: Sequence[float]) -> "Profile":
        return cls(ProfileKind.CUSTOM, values=tuple(float(v) for v in values))

    def scaled(self, factor: float) -> "Profile":
        if self.kind is ProfileKind.PARABOLIC:
            return Profile.parabolic(self.amplitude * factor)
        return Profile.custom([factor * v for v in self.values])


def init_state(cfg: SolverConfig, profile: Profile | None = None) -> FbState:
    """State at ``t = 0`` on ``[-h0, h0]``; the default profile is parabolic with amplitude 1."""
    profile = profile or Profile.parabolic()
    y = _grid(cfg.n)
    if profile.kind is ProfileKind.PARABOLIC:
        if not profile.amplitude > 0:
            raise PreconditionError("parabolic amplitude must be > 0")
        w = profile.amplitude * (1.0 - y * y)
        w[0] = w[-1] = 0.0
    else:
        w = np.asarray(profile.values, dtype=float)
        if w.shape != (cfg.n,):
            raise PreconditionError(f"custom profile needs {cfg.n} values, got {w.size}")
        if w[0] != 0.0 or w[-1] != 0.0:
            raise PreconditionError("initial profile must vanish at both ends")
        if np.any(w[1:-1] < 0) or not np.any(w[1:-1] > 0):
            raise PreconditionError("initial profile must be nonnegative and nontrivial inside")
        if not np.all(np.isfinite(w)):
            raise PreconditionError("initial profile has non-finite values")
    state = FbState(0.0, -cfg.h0, cfg.h0, w)
    h_rate, g_rate = boundary_flux(state, cfg.kernel, cfg.mu)
    return replace(state, h_rate=h_rate, g_rate=g_rate)


# ------------------------------------------------------------ operators


def coeffs(y, g: float, h: float, g_rate: float, h_rate: float):
    """Scale ``A`` and apparent drift ``B`` of the front-fixing transform."""
    if not h > g:
        raise PreconditionError(f"coeffs needs g < h (got g={g}, h={h})")
    L = h - g
    A = 2.0 / L
    B = -(np.asarray(y, dtype=float) * (h_rate - g_rate) + (h_rate + g_rate)) / L
    return A, (float(B) if np.ndim(B) == 0 else B)


def _kernel_row(kernel: Kernel, n: int, L: float) -> np.ndarray:
    # J at physical distances k * dx, k = 0..n-1
    return kernel.eval(np.arange(n) * (L / (n - 1)))


def _convolve(kernel: Kernel, w: np.ndarray, L: float) -> np.ndarray:
    """``int_{-1}^{1} J((y_i - z)/A) w(z) dz / A`` by the trapezoid rule."""
    n = w.size
    row = _kernel_row(kernel, n, L)
    vec = _weights(n) * w * (0.5 * L)
    return row[_toeplitz_index(n)] @ vec


def nonlocal_term(state: FbState, k: Kernel, d: float) -> np.ndarray:
    """Discrete ``d (J * w) - d w`` at every node."""
    _check_state(state)
    L = state.h - state.g
    return d * _convolve(k, state.w, L) - d * state.w


def _fluxes(kernel: Kernel, w: np.ndarray, L: float) -> tuple[float, float]:
    n = w.size
    y = _grid(n)
    vec = _weights(n) * w * (0.5 * L)
    right = float(vec @ kernel.tail_mass((1.0 - y) * (0.5 * L)))
    left = float(vec @ kernel.tail_mass((1.0 + y) * (0.5 * L)))
    return right, left


def boundary_flux(state: FbState, k: Kernel, mu: float) -> tuple[float, float]:
    """Front velocities ``(h', g')`` from the outward dispersal fluxes."""
    _check_state(state)
    right, left = _fluxes(k, state.w, state.h - state.g)
    return mu * right, -mu * left


def _upwind_dw(w: np.ndarray, v: np.ndarray, dy: float) -> np.ndarray:
    back = np.empty_like(w)
    fwd = np.empty_like(w)
    back[1:] = w[1:] - w[:-1]
    back[0] = w[0]
    fwd[:-1] = w[1:] - w[:-1]
    fwd[-1] = -w[-1]
    return np.where(v > 0, back, fwd) / dy


def _rhs(cfg: SolverConfig, w: np.ndarray, g: float, h: float, g_rate: float, h_rate: float):
    n = w.size
    y = _grid(n)
    L = h - g
    A, B = coeffs(y, g, h, g_rate, h_rate)
    v = cfg.nu * A + B
    r = (
        cfg.d * _convolve(cfg.kernel, w, L)
        - cfg.d * w
        - v * _upwind_dw(w, v, 2.0 / (n - 1))
        + cfg.reaction.eval_f(w, check=False)
    )
    r[0] = r[-1] = 0.0
    return r


def stable_dt(cfg: SolverConfig, state: FbState) -> float:
    """``cfl * min(dy / max|nu A + B|, 1/(2d), 1/(2 f0))``."""
    n = state.n
    A, B = coeffs(_grid(n), state.g, state.h, state.g_rate, state.h_rate)
    vmax = float(np.max(np.abs(cfg.nu * A + B)))
    limits = [1.0 / (2.0 * cfg.d), 1.0 / (2.0 * cfg.reaction.f_prime_zero)]
    if vmax > 0:
        limits.append((2.0 / (n - 1)) / vmax)
    return cfg.cfl * min(limits)


@dataclass
class StepStats:
    clamps: int = 0
    min_w: float = math.inf


def _clamp(w: np.ndarray, stats: StepStats) -> np.ndarray:
    lo = float(np.min(w))
    stats.min_w = min(stats.min_w, lo)
    if lo < 0:
        neg = w < 0
        stats.clamps += int(np.count_nonzero(neg))
        w = np.where(neg, 0.0, w)
    return w


def step(state: FbState, cfg: SolverConfig, dt: float | None = None, stats: StepStats | None = None) -> FbState:
    """One explicit midpoint (RK2) step of the coupled field/front system.

    ``dt`` defaults to :func:`stable_dt`; a smaller value may be passed to hit
    an output time.  Negative values left by the discretisation are reset to
    zero and counted in ``stats``.
    """
    _check_state(state)
    stats = stats if stats is not None else StepStats()
    kern, mu = cfg.kernel, cfg.mu
    h_rate, g_rate = boundary_flux(state, kern, mu)
    state = replace(state, h_rate=h_rate, g_rate=g_rate)
    dt_max = stable_dt(cfg, state)
    dt = dt_max if dt is None else min(dt, dt_max)
    if not dt > 1e-14 * max(1.0, abs(state.t)):
        raise ConvergenceError(f"time step underflow (dt={dt:.3e}, h-g={state.h - state.g:.3e})")

    w, g, h = state.w, state.g, state.h
    k1 = _rhs(cfg, w, g, h, g_rate, h_rate)
    half = 0.5 * dt
    wm = _clamp(w + half * k1, stats)
    gm, hm = g + half * g_rate, h + half * h_rate
    rm, lm = _fluxes(kern, wm, hm - gm)
    hm_rate, gm_rate = mu * rm, -mu * lm
    k2 = _rhs(cfg, wm, gm, hm, gm_rate, hm_rate)
    w_new = _clamp(w + dt * k2, stats)
    w_new[0] = w_new[-1] = 0.0
    g_new, h_new = g + dt * gm_rate, h + dt * hm_rate
    if not h_new > g_new:
        raise ConvergenceError("fronts crossed")
    r_new, l_new = _fluxes(kern, w_new, h_new - g_new)
    return FbState(state.t + dt, g_new, h_new, w_new, -mu * l_new, mu * r_new)


# ------------------------------------------------------------ trajectory


@dataclass
class RunDiagnostics:
    steps: int = 0
    clamps: int = 0
    min_w: float = math.inf
    front_violations: int = 0
    max_asymmetry: float = 0.0
    max_center_drift: float = 0.0
    max_w_seen: float = 0.0


@dataclass
class Snapshot:
    t: float
    x: np.ndarray
    u: np.ndarray


@dataclass
class Trajectory:
    t: np.ndarray
    g: np.ndarray
    h: np.ndarray
    h_rate: np.ndarray
    g_rate: np.ndarray
    max_w: np.ndarray
    mass: np.ndarray
    snapshots: list[Snapshot] = field(default_factory=list)
    final_state: FbState | None = None
    diagnostics: RunDiagnostics = field(default_factory=RunDiagnostics)
    t_end: float = math.nan

    def __len__(self) -> int:
        return int(self.t.size)

    @classmethod
    def empty(cls) -> "Trajectory":
        z = np.zeros(0)
        return cls(z, z, z, z, z, z, z)


def simulate(cfg: SolverConfig, profile: Profile | None = None, state: FbState | None = None) -> Trajectory:
    """Integrate from ``t = 0`` (or from ``state``) to ``cfg.t_end``."""
    msg = cfg.advection_warning()
    if msg:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    if state is None:
        state = init_state(cfg, profile)
    diag = RunDiagnostics()
    stats = StepStats()
    rows: list[tuple[float, ...]] = []
    snaps: list[Snapshot] = []

    def record(s: FbState) -> None:
        rows.append((s.t, s.g, s.h, s.h_rate, s.g_rate, s.max_w, s.mass()))
        if (len(rows) - 1) % cfg.snapshot_every == 0:
            snaps.append(Snapshot(s.t, s.x, s.w.copy()))

    def watch(s: FbState) -> None:
        diag.max_asymmetry = max(diag.max_asymmetry, float(np.max(np.abs(s.w - s.w[::-1]))))
        diag.max_center_drift = max(diag.max_center_drift, abs(s.g + s.h) / max(1.0, abs(s.h)))
        mw = s.max_w
        diag.max_w_seen = max(diag.max_w_seen, mw)
        if mw > ACTIVE_LEVEL and not (s.h_rate > 0 and s.g_rate < 0):
            diag.front_violations += 1

    watch(state)
    record(state)
    k = 1
    t_stop = state.t + cfg.t_end if state.t else cfg.t_end
    t0 = state.t
    n_samples = int(math.floor((t_stop - t0) / cfg.sample_dt + 1e-9))
    while k <= n_samples or state.t < t_stop * (1 - 1e-14):
        target = t0 + k * cfg.sample_dt if k <= n_samples else t_stop
        state = step(state, cfg, dt=target - state.t, stats=stats)
        diag.steps += 1
        if abs(state.t - target) <= 1e-12 * max(1.0, target):
            state = replace(state, t=target)
            record(state)
            k += 1
        watch(state)
    if rows[-1][0] != state.t:
        record(state)
    diag.clamps = stats.clamps
    diag.min_w = min(stats.min_w, float(np.min(state.w)))
    cols = np.array(rows, dtype=float).T
    return Trajectory(*cols, snapshots=snaps, final_state=state, diagnostics=diag, t_end=t_stop)


# -------------------------------------------------------- classification


class Outcome(str, enum.Enum):
    SPREADING = "Spreading"
    VANISHING = "Vanishing"
    UNDECIDED = "Undecided"


VANISH_LEVEL = 1e-3
VANISH_RATE = 1e-6
PERSIST_LEVEL = 1e-3


def _middle_half_min(state: FbState) -> float:
    n = state.n
    y = _grid(n)
    core = np.abs(y) <= 0.5
    return float(np.min(state.w[core]))


def vanishing_certificate(state: FbState, cfg: SolverConfig, h_star: float, fractions=(0.25, 0.5, 0.75)) -> bool:
    """Sufficient test that the fronts stay bounded and ``u`` decays from ``state`` on.

    Treats ``state`` as initial data on an interval of half-length
    ``l = (h-g)/2`` and looks for ``l < h~ < h*`` with
    ``4 mu h~ gamma <= |lambda_p(h~)| (h~ - l)``, where ``gamma`` is the least
    multiple of the principal eigenfunction on ``[-h~, h~]`` (recentred)
    dominating the current profile.
    """
    from .eigen import EigenProblem, principal_eigenvalue

    ell = 0.5 * (state.h - state.g)
    if not (h_star > ell) or not math.isfinite(h_star):
        return False
    if state.max_w == 0.0:
        return True
    center = 0.5 * (state.h + state.g)
    x = state.x - center
    a0 = cfg.reaction.f_prime_zero
    for frac in fractions:
        ht = ell + frac * (h_star - ell)
        res = principal_eigenvalue(EigenProblem(cfg.d, a0, cfg.nu, ht, cfg.kernel, m=256))
        lam = res.lambda_p
        if not lam < 0:
            continue
        phi = np.interp(x, res.nodes, res.eigenfunction)
        inside = state.w > 0
        gamma = float(np.max(state.w[inside] / phi[inside]))
        if ell + 4.0 * cfg.mu * ht * gamma / abs(lam) <= ht:
            return True
    return False


@lru_cache(maxsize=64)
def _critical_length_cached(d: float, f0: float, nu: float, kernel: Kernel) -> float:
    from .eigen import critical_length

    if not f0 < d:
        return 0.0
    return critical_length(d, f0, nu, kernel)


def projected_width(traj: Trajectory) -> float | None:
    """Final habitat width plus the growth still to come under geometric decay.

    Uses the last quarter of the samples: when ``max_w`` and the total front
    speed ``h' - g'`` both decrease strictly there and the speed decays at a
    fitted exponential rate ``kappa > 0``, the remaining growth is bounded by
    ``(h' - g') / kappa``.  Returns ``None`` when the decay is not established.
    """
    n = len(traj)
    q = n - max(n // 4, 4)
    if q < 1:
        return None
    rate = traj.h_rate[q:] - traj.g_rate[q:]
    mw = traj.max_w[q:]
    if not (np.all(rate > 0) and np.all(np.diff(rate) < 0) and np.all(np.diff(mw) < 0)):
        return None
    kappa = -np.polyfit(traj.t[q:], np.log(rate), 1)[0]
    if not kappa > 0:
        return None
    # the local decay rate must not be slowing down toward the end
    half = rate.size // 2
    late = -np.polyfit(traj.t[q + half :], np.log(rate[half:]), 1)[0] if rate.size - half >= 2 else kappa
    kappa = min(kappa, late)
    if not kappa > 0:
        return None
    return float(traj.h[-1] - traj.g[-1] + rate[-1] / kappa)


def classify_outcome(traj: Trajectory, cfg: SolverConfig, h_star: float | None = None) -> Outcome:
    """Spreading, Vanishing or Undecided at the end of a run.

    Vanishing when, at the last sample, ``max_w < 1e-3`` and either
    ``h' - g' < 1e-6`` or the extrapolated final width (see
    :func:`projected_width`) stays below ``2 h*``; a passed
    :func:`vanishing_certificate` also counts.  Spreading when
    ``h - g > 4 h*`` with the middle half of the habitat at least ``u0/2``,
    or ``h - g > 2 h*`` (wider than any bounded habitat can become) with the
    middle half above ``1e-3``.
    """
    if len(traj) == 0:
        return Outcome.UNDECIDED
    horizon = traj.t_end if math.isfinite(traj.t_end) else cfg.t_end
    if traj.t[-1] - traj.t[0] < 0.8 * horizon * (1 - 1e-12):
        return Outcome.UNDECIDED
    if h_star is None:
        h_star = _critical_length_cached(cfg.d, cfg.reaction.f_prime_zero, cfg.nu, cfg.kernel)
    final = traj.final_state
    low = traj.max_w[-1] < VANISH_LEVEL
    if low and traj.h_rate[-1] - traj.g_rate[-1] < VANISH_RATE:
        return Outcome.VANISHING
    width = traj.h[-1] - traj.g[-1]
    if final is not None:
        core = _middle_half_min(final)
        u0 = cfg.reaction.positive_zero
        if width > 4.0 * h_star and core >= 0.5 * u0:
            return Outcome.SPREADING
        if width > 2.0 * h_star and core >= PERSIST_LEVEL:
            return Outcome.SPREADING
    if low and width < 2.0 * h_star:
        proj = projected_width(traj)
        if proj is not None and proj < 2.0 * h_star:
            return Outcome.VANISHING
    if final is not None and cfg.mu > 0 and vanishing_certificate(final, cfg, h_star):
        return Outcome.VANISHING
    if final is not None and cfg.mu == 0 and final.max_w < VANISH_LEVEL:
        return Outcome.VANISHING
    return Outcome.UNDECIDED
