"""Boundary functions b(t) for the randomized first passage problem.

A boundary is an immutable tagged value. Callers may assume b(0) = 0 without
loss of generality, but nothing here enforces it.

General boundaries wrap a user callable. Continuity, differentiability and
regularity (no instant absorption) of that callable are the caller's
responsibility and are not checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError

DRIFT_GRID_POINTS = 512
DEFAULT_T_MAX = 1e4


@dataclass(frozen=True)
class Boundary:
    kind: str = field(init=False, default="general")

    def __call__(self, t):
        return self.evaluate(t)

    def evaluate(self, t):
        raise NotImplementedError

    @property
    def b0(self) -> float:
        return float(self.evaluate(0.0))

    def spec(self) -> str:
        """Text form accepted by :func:`parse_boundary`."""
        raise NotImplementedError


@dataclass(frozen=True)
class Zero(Boundary):
    kind: str = field(init=False, default="zero")

    def evaluate(self, t):
        return np.zeros(np.shape(t)) if np.ndim(t) else 0.0

    def spec(self) -> str:
        return "zero"


@dataclass(frozen=True)
class Linear(Boundary):
    mu: float
    kind: str = field(init=False, default="linear")

    def evaluate(self, t):
        return self.mu * np.asarray(t, dtype=float) if np.ndim(t) else self.mu * float(t)

    def spec(self) -> str:
        return f"linear:{self.mu!r}"


@dataclass(frozen=True)
class Sqrt(Boundary):
    mu: float
    kind: str = field(init=False, default="sqrt")

    def evaluate(self, t):
        return self.mu * np.sqrt(t) if np.ndim(t) else self.mu * math.sqrt(t)

    def spec(self) -> str:
        return f"sqrt:{self.mu!r}"


@dataclass(frozen=True)
class Quadratic(Boundary):
    c2: float
    c1: float
    c0: float = 0.0
    kind: str = field(init=False, default="quadratic")

    def evaluate(self, t):
        t = np.asarray(t, dtype=float) if np.ndim(t) else float(t)
        return self.c2 * t * t + self.c1 * t + self.c0

    def spec(self) -> str:
        return f"quadratic:{self.c2!r}:{self.c1!r}:{self.c0!r}"


@dataclass(frozen=True)
class General(Boundary):
    func: Callable[[float], float]
    label: str = "general"
    kind: str = field(init=False, default="general")

    def evaluate(self, t):
        if np.ndim(t):
            return np.array([float(self.func(float(s))) for s in np.ravel(t)]).reshape(np.shape(t))
        return float(self.func(float(t)))

    def spec(self) -> str:
        raise ConfigError(f"general boundary {self.label!r} has no text form")


def evaluate(b: Boundary, t):
    if np.any(np.asarray(t) < 0):
        raise DomainError("boundaries are defined for t >= 0")
    return b.evaluate(t)


@dataclass(frozen=True)
class DriftCheck:
    satisfied: bool
    evidence: str
    heuristic: bool = False

    def __bool__(self) -> bool:
        return self.satisfied


def check_drift_bounded_below(b: Boundary, alpha: float, t_max: float = DEFAULT_T_MAX,
                              grid_n: int = DRIFT_GRID_POINTS) -> DriftCheck:
    """Is t -> b(t) + alpha t bounded below as t grows?

    Tagged kinds get an analytic verdict. General boundaries are probed on a
    log-spaced grid on [1e-6, t_max] and the verdict is marked heuristic.
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    if isinstance(b, Zero):
        return DriftCheck(True, f"b(t)+{alpha}t = {alpha}t -> +inf")
    if isinstance(b, Linear):
        slope = b.mu + alpha
        if slope > 0:
            return DriftCheck(True, f"b(t)+alpha t = {slope:g} t -> +inf")
        if slope == 0:
            return DriftCheck(True, "b(t)+alpha t = 0 identically")
        return DriftCheck(False, f"b(t)+alpha t = {slope:g} t -> -inf")
    if isinstance(b, Sqrt):
        if b.mu >= 0:
            return DriftCheck(True, "mu sqrt(t) + alpha t >= 0")
        t_min = (b.mu / (2 * alpha)) ** 2
        low = b.mu * math.sqrt(t_min) + alpha * t_min
        return DriftCheck(True, f"minimum {low:g} attained at t={t_min:g}")
    if isinstance(b, Quadratic):
        if b.c2 > 0:
            return DriftCheck(True, "positive quadratic coefficient dominates")
        if b.c2 == 0:
            slope = b.c1 + alpha
            return DriftCheck(slope >= 0, f"linear drift {slope:g} t")
        return DriftCheck(False, "negative quadratic coefficient -> -inf")
    ts = np.geomspace(1e-6, t_max, grid_n)
    vals = b.evaluate(ts) + alpha * ts
    i = int(np.argmin(vals))
    # a minimum at the right edge means the drifted boundary is still falling
    falling = i >= grid_n - 2 and vals[-1] < vals[-grid_n // 8]
    ok = bool(np.all(np.isfinite(vals))) and not falling
    return DriftCheck(ok, f"grid minimum {vals[i]:g} at t={ts[i]:g} on [1e-6, {t_max:g}]",
                      heuristic=True)


def scale_boundary(b1: Boundary, lam: float) -> Boundary:
    """Member b_lam(t) = b1(lam^2 t) / lam of the scale family generated by b1."""
    if lam <= 0:
        raise DomainError("scale parameter must be positive")
    if isinstance(b1, Zero):
        return b1
    if isinstance(b1, Linear):
        return Linear(lam * b1.mu)
    if isinstance(b1, Sqrt):
        return b1
    if isinstance(b1, Quadratic):
        return Quadratic(b1.c2 * lam ** 3, b1.c1 * lam, b1.c0 / lam)
    func = b1.evaluate
    return General(lambda t: func(lam * lam * t) / lam, label=f"scaled({b1.label},{lam:g})")


def affine_shift(b: Boundary, lam: float) -> Boundary:
    """Boundary t -> b(t) + lam t."""
    if isinstance(b, Zero):
        return Linear(lam)
    if isinstance(b, Linear):
        return Linear(b.mu + lam)
    if isinstance(b, Quadratic):
        return Quadratic(b.c2, b.c1 + lam, b.c0)
    func = b.evaluate
    label = getattr(b, "label", b.kind)
    return General(lambda t: func(t) + lam * t, label=f"shift({label},{lam:g})")


def parse_boundary(text: str) -> Boundary:
    """Parse ``zero``, ``linear:MU``, ``sqrt:MU`` or ``quadratic:C2:C1[:C0]``."""
    parts = [p.strip() for p in text.strip().split(":")]
    kind = parts[0].lower()
    try:
        args = [float(p) for p in parts[1:]]
    except ValueError as exc:
        raise ConfigError(f"bad boundary spec {text!r}: {exc}") from None
    if kind == "zero" and not args:
        return Zero()
    if kind == "linear" and len(args) == 1:
        return Linear(args[0])
    if kind == "sqrt" and len(args) == 1:
        return Sqrt(args[0])
    if kind == "quadratic" and len(args) in (2, 3):
        return Quadratic(*args)
    raise ConfigError(f"bad boundary spec {text!r}")
