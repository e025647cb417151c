"""Dispersal kernels: even probability densities on the real line.

Every family exposes pointwise evaluation, the tail mass
``K(a) = int_a^inf J(s) ds``, the integrated tail ``int_a^inf K(s) ds``, the
first half-moment and the exponential moment.  Closed forms are used where
they exist; the generic fallbacks use adaptive quadrature.

Divergent moments are reported as :data:`DIVERGENT`, never as a float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Union

import numpy as np
from scipy import integrate, special

QUAD_ABS_TOL = 1e-10
QUAD_LIMIT = 10_000


class _Divergent:
    """Marker for a moment that does not converge."""

    _instance: "_Divergent | None" = None

    def __new__(cls) -> "_Divergent":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "DIVERGENT"

    def __bool__(self) -> bool:
        return False


DIVERGENT = _Divergent()
Moment = Union[float, _Divergent]


def is_finite_moment(m: Moment) -> bool:
    return m is not DIVERGENT


def _quad(fun, a: float, b: float, points=None) -> float:
    val, _err = integrate.quad(
        fun, a, b, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=QUAD_LIMIT, points=points
    )
    return float(val)


class Kernel:
    """Base class; subclasses override the closed forms they know."""

    #: C^1 on the whole line (the Laplace and power families have a kink at 0)
    smooth: bool = True
    #: half-width of the support, ``inf`` for full-line families
    support: float = math.inf

    # -- evaluation -----------------------------------------------------
    def _density(self, ax: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def eval(self, x):
        """Density J(x); accepts scalars or arrays."""
        ax = np.abs(np.asarray(x, dtype=float))
        out = self._density(ax)
        return float(out) if np.ndim(out) == 0 else out

    __call__ = eval

    # -- tails ----------------------------------------------------------
    def _tail_pos(self, a: float) -> float:
        # int_a^inf J for a >= 0
        if a >= self.support:
            return 0.0
        upper = self.support if math.isfinite(self.support) else np.inf
        return _quad(lambda s: self.eval(s), a, upper)

    def _tail_pos_array(self, a: np.ndarray) -> np.ndarray:
        return np.array([self._tail_pos(float(v)) for v in a.ravel()]).reshape(a.shape)

    def tail_mass(self, a):
        """Mass to the right of ``a``: ``int_a^inf J(s) ds``."""
        arr = np.asarray(a, dtype=float)
        pos = self._tail_pos_array(np.abs(arr))
        out = np.where(arr >= 0, pos, 1.0 - pos)
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def integrated_tail(self, a: float) -> Moment:
        """``int_a^inf tail_mass(s) ds`` for ``a >= 0`` (equals ``int_a^inf (x-a) J(x) dx``)."""
        if a < 0:
            raise ValueError("integrated_tail needs a >= 0")
        m1 = self.first_half_moment()
        if m1 is DIVERGENT:
            return DIVERGENT
        if a == 0:
            return m1
        if a >= self.support:
            return 0.0
        upper = self.support if math.isfinite(self.support) else np.inf
        return _quad(lambda x: (x - a) * self.eval(x), a, upper)

    # -- moments --------------------------------------------------------
    def first_half_moment(self) -> Moment:
        """``int_0^inf x J(x) dx``."""
        upper = self.support if math.isfinite(self.support) else np.inf
        return _quad(lambda x: x * self.eval(x), 0.0, upper)

    def exp_moment(self, lam: float) -> Moment:
        """``int_R exp(lam x) J(x) dx`` for ``lam > 0``."""
        if lam <= 0:
            raise ValueError("exp_moment needs lam > 0")
        r = self.support
        if not math.isfinite(r):
            raise NotImplementedError
        # cosh form keeps the integrand even and well scaled
        return 2.0 * _quad(lambda x: math.cosh(lam * x) * self.eval(x), 0.0, r)

    def mass_window(self, tol: float = 1e-12) -> float:
        """Half-width W with tail_mass(W) <= tol (support radius when compact)."""
        if math.isfinite(self.support):
            return self.support
        w = 1.0
        while self.tail_mass(w) > tol and w < 1e12:
            w *= 2.0
        return w

    def to_config(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Gaussian(Kernel):
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("Gaussian sigma must be > 0")

    def _density(self, ax):
        s = self.sigma
        return np.exp(-0.5 * (ax / s) ** 2) / (s * math.sqrt(2.0 * math.pi))

    def _tail_pos_array(self, a):
        return 0.5 * special.erfc(a / (self.sigma * math.sqrt(2.0)))

    def _tail_pos(self, a):
        return 0.5 * math.erfc(a / (self.sigma * math.sqrt(2.0)))

    def integrated_tail(self, a):
        if a < 0:
            raise ValueError("integrated_tail needs a >= 0")
        z = a / self.sigma
        pdf = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        return self.sigma * pdf - a * self._tail_pos(a)

    def first_half_moment(self):
        return self.sigma / math.sqrt(2.0 * math.pi)

    def exp_moment(self, lam):
        if lam <= 0:
            raise ValueError("exp_moment needs lam > 0")
        return math.exp(0.5 * (lam * self.sigma) ** 2)

    def to_config(self):
        return {"type": "gaussian", "params": {"sigma": self.sigma}}


@dataclass(frozen=True)
class Laplace(Kernel):
    """``(beta/2) exp(-beta |x|)``; kinked at the origin."""

    beta: float = 1.0
    smooth = False

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("Laplace beta must be > 0")

    def _density(self, ax):
        return 0.5 * self.beta * np.exp(-self.beta * ax)

    def _tail_pos_array(self, a):
        return 0.5 * np.exp(-self.beta * a)

    def _tail_pos(self, a):
        return 0.5 * math.exp(-self.beta * a)

    def integrated_tail(self, a):
        if a < 0:
            raise ValueError("integrated_tail needs a >= 0")
        return math.exp(-self.beta * a) / (2.0 * self.beta)

    def first_half_moment(self):
        return 1.0 / (2.0 * self.beta)

    def exp_moment(self, lam):
        if lam <= 0:
            raise ValueError("exp_moment needs lam > 0")
        if lam >= self.beta:
            return DIVERGENT
        return self.beta**2 / (self.beta**2 - lam**2)

    def to_config(self):
        return {"type": "laplace", "params": {"beta": self.beta}}


@dataclass(frozen=True)
class PowerTailCubic(Kernel):
    """``(1 + |x|)^-3``: finite first moment, no exponential moment."""

    smooth = False

    def _density(self, ax):
        return (1.0 + ax) ** -3

    def _tail_pos_array(self, a):
        return 0.5 * (1.0 + a) ** -2

    def _tail_pos(self, a):
        return 0.5 * (1.0 + a) ** -2

    def integrated_tail(self, a):
        if a < 0:
            raise ValueError("integrated_tail needs a >= 0")
        return 0.5 / (1.0 + a)

    def first_half_moment(self):
        return 0.5

    def exp_moment(self, lam):
        if lam <= 0:
            raise ValueError("exp_moment needs lam > 0")
        return DIVERGENT

    def to_config(self):
        return {"type": "power3", "params": {}}


@dataclass(frozen=True)
class PowerTailQuadratic(Kernel):
    """``(1/2)(1 + |x|)^-2``: the first half-moment diverges."""

    smooth = False

    def _density(self, ax):
        return 0.5 * (1.0 + ax) ** -2

    def _tail_pos_array(self, a):
        return 0.5 / (1.0 + a)

    def _tail_pos(self, a):
        return 0.5 / (1.0 + a)

    def integrated_tail(self, a):
        if a < 0:
            raise ValueError("integrated_tail needs a >= 0")
        return DIVERGENT

    def first_half_moment(self):
        return DIVERGENT

    def exp_moment(self, lam):
        if lam <= 0:
            raise ValueError("exp_moment needs lam > 0")
        return DIVERGENT

    def to_config(self):
        return {"type": "power2", "params": {}}


@dataclass(frozen=True)
class SmoothBump(Kernel):
    """Compactly supported C-infinity bump ``C exp(-1/(1-(x/r)^2))``."""

    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("SmoothBump radius must be > 0")
        object.__setattr__(self, "support", float(self.radius))

    @cached_property
    def _norm(self) -> float:
        r = self.radius
        half = _quad(lambda x: math.exp(-1.0 / (1.0 - (x / r) ** 2)), 0.0, r)
        return 1.0 / (2.0 * half)

    def _density(self, ax):
        z = np.minimum(ax / self.radius, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            core = np.exp(-1.0 / (1.0 - z * z))
        return np.where(z < 1.0, self._norm * core, 0.0)

    def to_config(self):
        return {"type": "bump", "params": {"radius": self.radius}}


@dataclass(frozen=True)
class CutOff(Kernel):
    """``base`` restricted to ``[-radius, radius]`` and renormalized to mass 1."""

    base: Kernel = field(default_factory=Gaussian)
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("CutOff radius must be > 0")
        r = min(float(self.radius), self.base.support)
        object.__setattr__(self, "support", r)
        object.__setattr__(self, "smooth", False)

    @cached_property
    def raw_mass(self) -> float:
        """Mass of the un-renormalized truncation, ``1 - 2 K_base(r)``."""
        return 1.0 - 2.0 * self.base.tail_mass(self.support)

    @cached_property
    def _base_tail_r(self) -> float:
        return self.base.tail_mass(self.support)

    def _density(self, ax):
        return np.where(ax <= self.support, self.base._density(ax) / self.raw_mass, 0.0)

    def _tail_pos_array(self, a):
        inside = (self.base.tail_mass(np.minimum(a, self.support)) - self._base_tail_r) / self.raw_mass
        return np.where(a >= self.support, 0.0, np.maximum(inside, 0.0))

    def _tail_pos(self, a):
        if a >= self.support:
            return 0.0
        return max((self.base.tail_mass(a) - self._base_tail_r) / self.raw_mass, 0.0)

    def to_config(self):
        return {"type": "cutoff", "params": {"base": self.base.to_config(), "radius": self.radius}}


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionReport:
    holds_J: bool
    holds_Jstar: bool
    holds_Jstarstar: bool
    smooth: bool


def validate(k: Kernel) -> AssumptionReport:
    """Classify a kernel against the standing assumptions.

    ``holds_J`` checks evenness, nonnegativity, ``J(0) > 0`` and unit mass;
    C^1 regularity is reported separately in ``smooth`` and not enforced.
    """
    x = np.linspace(0.0, min(k.mass_window(1e-10), 50.0), 2001)
    vals = k.eval(x)
    even = np.all(np.abs(k.eval(-x) - vals) <= 1e-12 * np.maximum(1.0, vals))
    upper = k.support if math.isfinite(k.support) else np.inf
    mass = 2.0 * _quad(lambda s: k.eval(s), 0.0, upper)
    holds_J = bool(even and np.all(vals >= 0) and k.eval(0.0) > 0 and abs(mass - 1.0) < 1e-8)
    holds_Jstar = is_finite_moment(k.first_half_moment())
    holds_Jss = holds_Jstar and is_finite_moment(k.exp_moment(_probe_lambda(k)))
    return AssumptionReport(holds_J, holds_Jstar, holds_Jss, k.smooth)


def _probe_lambda(k: Kernel) -> float:
    # any lam > 0 witnesses an exponential moment; small lam is the weakest test
    if isinstance(k, Laplace):
        return 0.5 * k.beta
    return 1e-3


def cutoff_sequence(base: Kernel, radii) -> list[CutOff]:
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii):
        raise ValueError("cut-off radii must be > 0")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("cut-off radii must be strictly increasing")
    return [CutOff(base, r) for r in radii]


_PARAMS = {
    "gaussian": (Gaussian, {"sigma"}),
    "laplace": (Laplace, {"beta"}),
    "bump": (SmoothBump, {"radius"}),
    "power3": (PowerTailCubic, set()),
    "power2": (PowerTailQuadratic, set()),
}


def kernel_from_config(cfg: dict[str, Any]) -> Kernel:
    """Build a kernel from ``{"type": ..., "params": {...}}``."""
    if not isinstance(cfg, dict):
        raise ValueError("kernel: expected an object with 'type' and 'params'")
    unknown = set(cfg) - {"type", "params"}
    if unknown:
        raise ValueError(f"kernel: unknown keys {sorted(unknown)}")
    kind = cfg.get("type")
    params = dict(cfg.get("params") or {})
    if kind == "cutoff":
        extra = set(params) - {"base", "radius"}
        if extra or "base" not in params or "radius" not in params:
            raise ValueError("kernel.params: cutoff needs exactly 'base' and 'radius'")
        return CutOff(kernel_from_config(params["base"]), float(params["radius"]))
    if kind not in _PARAMS:
        raise ValueError(f"kernel.type: unknown kernel {kind!r}")
    cls, allowed = _PARAMS[kind]
    extra = set(params) - allowed
    if extra:
        raise ValueError(f"kernel.params: unknown keys {sorted(extra)} for {kind}")
    return cls(**{k: float(v) for k, v in params.items()})
