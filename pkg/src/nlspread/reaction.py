"""Logistic KPP reactions and their epsilon perturbations.

``f(u) = u (1 - u / K)`` with carrying capacity ``K = 1`` (logistic),
``1 + eps`` (upper perturbation) or ``1 - eps`` (lower perturbation).  All
three share the linearisation ``f'(0) = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np


class ReactionKind(str, Enum):
    LOGISTIC = "logistic"
    UPPER = "logistic_upper"
    LOWER = "logistic_lower"


@dataclass(frozen=True)
class Reaction:
    kind: ReactionKind = ReactionKind.LOGISTIC
    eps: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ReactionKind(self.kind))
        if self.kind is ReactionKind.LOGISTIC:
            if self.eps != 0.0:
                raise ValueError("logistic reaction takes no eps")
        elif not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")

    @classmethod
    def logistic(cls) -> "Reaction":
        return cls(ReactionKind.LOGISTIC)

    @classmethod
    def upper(cls, eps: float) -> "Reaction":
        return cls(ReactionKind.UPPER, eps)

    @classmethod
    def lower(cls, eps: float) -> "Reaction":
        return cls(ReactionKind.LOWER, eps)

    @property
    def positive_zero(self) -> float:
        if self.kind is ReactionKind.UPPER:
            return 1.0 + self.eps
        if self.kind is ReactionKind.LOWER:
            return 1.0 - self.eps
        return 1.0

    @property
    def f_prime_zero(self) -> float:
        return 1.0

    @property
    def k0(self) -> float:
        """A level beyond which ``f < 0``."""
        return self.positive_zero + 1.0

    def eval_f(self, u, check: bool = True):
        """``f(u)``; negative densities are rejected unless ``check=False``."""
        arr = np.asarray(u, dtype=float)
        if check and np.any(arr < 0):
            raise ValueError("reaction is defined for u >= 0 only")
        out = arr * (1.0 - arr / self.positive_zero)
        return float(out) if out.ndim == 0 else out

    __call__ = eval_f

    def derivative(self, u):
        return 1.0 - 2.0 * np.asarray(u, dtype=float) / self.positive_zero

    def to_config(self) -> dict[str, Any]:
        if self.kind is ReactionKind.LOGISTIC:
            return {"reaction": "logistic"}
        return {"reaction": self.kind.value, "eps": self.eps}


def f_prime_zero(r: Reaction) -> float:
    return r.f_prime_zero


def positive_zero(r: Reaction) -> float:
    return r.positive_zero


def eval_f(r: Reaction, u):
    return r.eval_f(u)


@dataclass(frozen=True)
class KPPReport:
    ratio_nonincreasing: bool
    negative_beyond_k0: bool
    positive_below_zero: bool

    @property
    def ok(self) -> bool:
        return self.ratio_nonincreasing and self.negative_beyond_k0 and self.positive_below_zero


def validate_kpp(r: Reaction, grid) -> KPPReport:
    """Check the KPP structure of ``r`` on a sorted grid of positive levels."""
    u = np.asarray(grid, dtype=float)
    if u.size == 0 or np.any(u <= 0) or np.any(np.diff(u) < 0):
        raise ValueError("grid must be a nonempty sorted array of positive reals")
    fu = r.eval_f(u)
    ratio = fu / u
    k0 = r.k0
    beyond = np.concatenate([u[u >= k0], [k0, 2.0 * k0]])
    inner = u[u < r.positive_zero]
    return KPPReport(
        ratio_nonincreasing=bool(np.all(np.diff(ratio) <= 0)),
        negative_beyond_k0=bool(np.all(r.eval_f(beyond) < 0)),
        positive_below_zero=bool(np.all(r.eval_f(inner) > 0)) if inner.size else True,
    )


def reaction_from_config(cfg: dict[str, Any]) -> Reaction:
    unknown = set(cfg) - {"reaction", "eps"}
    if unknown:
        raise ValueError(f"reaction: unknown keys {sorted(unknown)}")
    name = cfg.get("reaction", "logistic")
    try:
        kind = ReactionKind(name)
    except ValueError:
        raise ValueError(f"reaction: unknown reaction {name!r}") from None
    if kind is ReactionKind.LOGISTIC:
        if "eps" in cfg and float(cfg["eps"]) != 0.0:
            raise ValueError("reaction.eps: logistic takes no eps")
        return Reaction.logistic()
    if "eps" not in cfg:
        raise ValueError("reaction.eps: required for perturbed reactions")
    return Reaction(kind, float(cfg["eps"]))
