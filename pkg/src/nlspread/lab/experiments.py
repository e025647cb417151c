"""Experiments built on the solvers: speeds, dichotomy scans, bounds, acceleration."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..eigen import EigenProblem, critical_length, principal_eigenvalue
from ..errors import ConvergenceError, PreconditionError
from ..fbsolver import (
    Outcome,
    Profile,
    SolverConfig,
    Trajectory,
    classify_outcome,
    init_state,
    simulate,
)
from ..kernel import Gaussian, cutoff_sequence, validate

log = logging.getLogger(__name__)

MIN_WINDOW_SAMPLES = 10


@dataclass
class RunSummary:
    outcome: str | None = None
    h_slope: float | None = None
    g_slope: float | None = None
    lambda_p: float | None = None
    h_star: float | None = None
    mu_star_bracket: list[float] | None = None
    c_l: float | None = None
    c_star: float | None = None
    c_r: float | None = None
    c_tilde: float | str | None = None
    wall_time: float | None = None


# ---------------------------------------------------------------- speeds


def measure_speeds(traj: Trajectory, window_fraction: float = 0.5) -> tuple[float, float]:
    """Least-squares slopes of ``h(t)`` and ``-g(t)`` over the last part of a run."""
    if not 0 < window_fraction < 1:
        raise ValueError("window_fraction must lie in (0, 1)")
    n = len(traj)
    if n == 0 or not traj.t[-1] > 0:
        raise PreconditionError("trajectory must reach a positive time")
    t_last = traj.t[-1]
    start = traj.t[0] + (1.0 - window_fraction) * (t_last - traj.t[0])
    sel = traj.t >= start - 1e-12 * max(1.0, t_last)
    if np.count_nonzero(sel) < MIN_WINDOW_SAMPLES:
        raise PreconditionError(f"need >= {MIN_WINDOW_SAMPLES} samples in the slope window")
    t = traj.t[sel]
    h_slope = float(np.polyfit(t, traj.h[sel], 1)[0])
    g_slope = float(np.polyfit(t, -traj.g[sel], 1)[0])
    return h_slope, g_slope


# --------------------------------------------------------------- h* etc.


def critical_length_or_zero(cfg: SolverConfig) -> float:
    """``h*``, or 0 when ``f0 >= d`` (every habitat is large enough)."""
    f0 = cfg.reaction.f_prime_zero
    if not f0 < cfg.d:
        return 0.0
    return critical_length(cfg.d, f0, cfg.nu, cfg.kernel)


# ------------------------------------------------------------ dichotomy


@dataclass
class ScanRecord:
    mu: float
    outcome: Outcome
    t_end: float


@dataclass
class ScanResult:
    bracket: tuple[float, float]
    h_star: float
    history: list[ScanRecord] = field(default_factory=list)

    @property
    def relative_width(self) -> float:
        lo, hi = self.bracket
        return (hi - lo) / lo

    def inversions(self) -> int:
        """Pairs ``mu_a < mu_b`` with ``mu_a`` spreading but ``mu_b`` vanishing."""
        rec = sorted(self.history, key=lambda r: r.mu)
        bad = 0
        seen_spread = False
        for r in rec:
            if r.outcome is Outcome.SPREADING:
                seen_spread = True
            elif r.outcome is Outcome.VANISHING and seen_spread:
                bad += 1
        return bad


def _decide(cfg: SolverConfig, mu: float, h_star: float, profile, history: list[ScanRecord], doublings: int = 2) -> Outcome:
    t_end = cfg.t_end
    for attempt in range(doublings + 1):
        run_cfg = replace(cfg, mu=mu, t_end=t_end)
        out = classify_outcome(simulate(run_cfg, profile), run_cfg, h_star)
        history.append(ScanRecord(mu, out, t_end))
        log.info("scan mu=%.6g t_end=%g -> %s", mu, t_end, out.value)
        if out is not Outcome.UNDECIDED:
            return out
        t_end *= 2.0
    raise ConvergenceError(f"outcome at mu={mu:.6g} still undecided at t_end={t_end / 2:g}")


def dichotomy_scan(
    cfg: SolverConfig,
    mu_lo: float,
    mu_hi: float,
    tol_rel: float = 0.05,
    profile: Profile | None = None,
    h_star: float | None = None,
) -> ScanResult:
    """Bracket the spreading threshold ``mu*`` by geometric bisection on ``mu``."""
    if not (0 < mu_lo < mu_hi):
        raise PreconditionError("need 0 < mu_lo < mu_hi")
    if not tol_rel > 0:
        raise PreconditionError("tol_rel must be > 0")
    if h_star is None:
        h_star = critical_length_or_zero(cfg)
    if not cfg.h0 < h_star:
        raise PreconditionError(
            f"h0={cfg.h0:.6g} >= h*={h_star:.6g}: spreading always occurs, there is no threshold in mu"
        )
    history: list[ScanRecord] = []
    lo_out = _decide(cfg, mu_lo, h_star, profile, history)
    hi_out = _decide(cfg, mu_hi, h_star, profile, history)
    if lo_out is not Outcome.VANISHING or hi_out is not Outcome.SPREADING:
        raise PreconditionError(
            f"endpoints do not straddle the threshold (mu_lo -> {lo_out.value}, mu_hi -> {hi_out.value})"
        )
    lo, hi = mu_lo, mu_hi
    while (hi - lo) / lo > tol_rel:
        mid = math.sqrt(lo * hi)
        if _decide(cfg, mid, h_star, profile, history) is Outcome.VANISHING:
            lo = mid
        else:
            hi = mid
    res = ScanResult((lo, hi), h_star, history)
    if res.inversions():
        raise ConvergenceError("outcome inversion observed in the scan")
    return res


# ------------------------------------------------------- vanishing bound


def mu_tilde_formula(lam: float, h0: float, h_tilde: float, gamma: float) -> float:
    """``lambda (h0 - h~) / (4 h~ gamma)``; positive when ``lambda < 0 < h0 < h~``."""
    return lam * (h0 - h_tilde) / (4.0 * h_tilde * gamma)


@dataclass
class VanishingBound:
    mu_tilde: float
    h_tilde: float
    lambda_p: float
    gamma: float
    confirmation: Outcome | None = None


def _bound_at(cfg: SolverConfig, h_tilde: float, x0: np.ndarray, u0: np.ndarray) -> VanishingBound:
    res = principal_eigenvalue(EigenProblem(cfg.d, cfg.reaction.f_prime_zero, cfg.nu, h_tilde, cfg.kernel))
    phi = np.interp(x0, res.nodes, res.eigenfunction)
    inside = u0 > 0
    gamma = float(np.max(u0[inside] / phi[inside]))
    lam = res.lambda_p
    return VanishingBound(float(mu_tilde_formula(lam, cfg.h0, h_tilde, gamma)), float(h_tilde), lam, gamma)


def vanishing_mu_bound(
    cfg: SolverConfig,
    h_tilde: float | None = None,
    profile: Profile | None = None,
    h_star: float | None = None,
    confirm: bool = True,
) -> VanishingBound:
    """Explicit sufficient vanishing level ``mu~*``.

    ``gamma`` is the least multiple of the max-normalised principal
    eigenfunction on ``[-h~, h~]`` that dominates the initial profile.  When
    ``h_tilde`` is omitted the best value over a grid in ``(h0, h*)`` is
    used.  With ``confirm`` a run at ``mu~*/2`` is classified.
    """
    f0 = cfg.reaction.f_prime_zero
    if not f0 < cfg.d:
        raise PreconditionError("vanishing bound needs f0 < d")
    if h_star is None:
        h_star = critical_length(cfg.d, f0, cfg.nu, cfg.kernel)
    if not cfg.h0 < h_star:
        raise PreconditionError(f"vanishing bound needs h0 < h* (h0={cfg.h0:.6g}, h*={h_star:.6g})")
    st = init_state(cfg, profile)
    x0, u0 = st.x, st.w
    if h_tilde is None:
        cands = [_bound_at(cfg, cfg.h0 + th * (h_star - cfg.h0), x0, u0) for th in np.linspace(0.05, 0.95, 19)]
        best = max((b for b in cands if b.lambda_p < 0), key=lambda b: b.mu_tilde)
    else:
        if not cfg.h0 < h_tilde < h_star:
            raise PreconditionError(f"need h0 < h~ < h* (h~={h_tilde:.6g})")
        best = _bound_at(cfg, h_tilde, x0, u0)
        if not best.lambda_p < 0:  # pragma: no cover
            raise PreconditionError("principal eigenvalue at h~ is not negative")
    if confirm:
        run_cfg = replace(cfg, mu=0.5 * best.mu_tilde)
        best.confirmation = classify_outcome(simulate(run_cfg, profile), run_cfg, h_star)
        if best.confirmation is Outcome.SPREADING:
            raise ConvergenceError(f"confirmation run at mu={run_cfg.mu:.3e} spread")
    return best


# --------------------------------------------------------- acceleration


@dataclass
class AccelerationReport:
    checkpoints: list[float]
    ratios: list[float]
    accelerating: list[bool]
    cutoff_radii: list[float]
    cutoff_slopes: list[float]
    cutoff_increasing: bool
    control_ratios: list[float] | None = None
    control_change: float | None = None
    outcome: str | None = None


def _ratios(traj: Trajectory, checkpoints) -> list[float]:
    out = []
    for tc in checkpoints:
        i = int(np.argmin(np.abs(traj.t - tc)))
        if abs(traj.t[i] - tc) > 1e-9 * max(1.0, tc):
            raise PreconditionError(f"no sample at checkpoint t={tc}")
        out.append(float(traj.h[i] / traj.t[i]))
    return out


def acceleration_check(
    cfg: SolverConfig,
    checkpoints=(20.0, 40.0),
    radii=(5.0, 10.0, 20.0),
    control: bool = True,
    profile: Profile | None = None,
) -> AccelerationReport:
    """Front ratios ``h(t)/t`` for a kernel without a finite first half-moment.

    Also reports the measured slopes of the same run with the kernel cut off
    at each radius and, optionally, the ratios of a Gaussian control.
    """
    cps = [float(c) for c in checkpoints]
    if len(cps) < 2 or any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] <= 0:
        raise PreconditionError("checkpoints must be positive and strictly increasing")
    if validate(cfg.kernel).holds_Jstar:
        raise PreconditionError("acceleration check needs a kernel with infinite first half-moment")
    run_cfg = replace(cfg, t_end=cps[-1])
    traj = simulate(run_cfg, profile)
    outcome = classify_outcome(traj, run_cfg, 0.0 if cfg.reaction.f_prime_zero >= cfg.d else None)
    if outcome is Outcome.VANISHING:
        raise PreconditionError("run vanishes; acceleration check inapplicable")
    ratios = _ratios(traj, cps)
    acc = [b >= 1.1 * a for a, b in zip(ratios, ratios[1:])]
    slopes = []
    for k in cutoff_sequence(cfg.kernel, radii):
        slopes.append(measure_speeds(simulate(replace(run_cfg, kernel=k), profile))[0])
    increasing = bool(all(b > a for a, b in zip(slopes, slopes[1:])) and all(math.isfinite(s) for s in slopes))
    rep = AccelerationReport(cps, ratios, acc, [float(r) for r in radii], slopes, increasing, outcome=outcome.value)
    if control:
        ctrl = _ratios(simulate(replace(run_cfg, kernel=Gaussian(1.0)), profile), cps)
        rep.control_ratios = ctrl
        rep.control_change = float(max(abs(b / a - 1.0) for a, b in zip(ctrl, ctrl[1:])))
    return rep
