"""Boundary-specific transform r(alpha) of a target density and existence checks.

r(alpha) = int_0^inf exp(-alpha b(t) - alpha^2 t / 2) f(t) dt is the Laplace
transform of the starting-point law whenever one exists; the existence
question is whether r is completely monotone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import specfun
from .boundaries import Boundary, Linear, Quadratic, Sqrt, Zero, check_drift_bounded_below
from .errors import DomainError, PreconditionError
from .quadrature import integrate_halfline
from .targets import GammaMixture, TargetDensity

CM_TOLERANCE = 1e-9
DEFAULT_ALPHA_GRID = tuple(np.round(np.geomspace(0.05, 5.0, 10), 6))


def _require_drift(b: Boundary, alpha: float) -> None:
    verdict = check_drift_bounded_below(b, alpha)
    if not verdict.satisfied:
        raise PreconditionError(f"drifted boundary unbounded below at alpha={alpha}: {verdict.evidence}")


def r_alpha(b: Boundary, f: TargetDensity, alpha: float, epsrel: float = 1e-12,
            use_laplace: bool = True) -> float:
    """r(alpha) for boundary ``b`` and target ``f``.

    Linear boundaries with a known Laplace transform short-circuit to
    f~(alpha mu + alpha^2 / 2).
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    _require_drift(b, alpha)
    if use_laplace and isinstance(b, (Linear, Zero)) and f.has_laplace:
        mu = b.mu if isinstance(b, Linear) else 0.0
        s = alpha * mu + 0.5 * alpha * alpha
        if s > 0:
            return float(f.laplace(s))

    def integrand(t):
        if t <= 0:
            return 0.0
        return math.exp(-alpha * b.evaluate(t) - 0.5 * alpha * alpha * t) * f.pdf(t)

    return integrate_halfline(integrand, epsrel=epsrel).value


def monotonicity_integral(b: Boundary, f: TargetDensity, n: int, alpha: float,
                          epsrel: float = 1e-10) -> float:
    """I_n(alpha) = int t^{n/2} e^{-alpha b - alpha^2 t/2} H_n((b + alpha t)/sqrt(2t)) f dt.

    Equals 2^{n/2} (-1)^n r^{(n)}(alpha).
    """
    def integrand(t):
        if t <= 0:
            return 0.0
        bt = b.evaluate(t)
        z = (bt + alpha * t) / math.sqrt(2.0 * t)
        log_w = 0.5 * n * math.log(t) - alpha * bt - 0.5 * alpha * alpha * t
        return math.exp(log_w) * specfun.hermite(n, z) * f.pdf(t)

    # absolute floor keeps near-zero integrals from demanding impossible relative accuracy
    return integrate_halfline(integrand, epsrel=epsrel, epsabs=1e-14, raise_on_fail=False).value


def _check_lemma_hypotheses(b: Boundary) -> str:
    if isinstance(b, (Zero, Linear, Sqrt)):
        return "verified"
    if isinstance(b, Quadratic):
        if b.c0 > 0:
            raise PreconditionError("b(0) > 0 makes exp(beta b(t)/sqrt(t)) blow up at the origin")
        return "verified"
    return "assumed"


@dataclass
class MonotonicityReport:
    n_checked: int
    alpha_grid: list
    min_value: float
    witness: Optional[tuple] = None
    verdict: str = "ConsistentWithCM"
    values: np.ndarray = field(default=None, repr=False)
    hypotheses: str = "verified"

    @property
    def violation(self) -> bool:
        return self.verdict == "ViolationFound"

    def rows(self):
        """(n, alpha, I_n(alpha)) triples."""
        for i, n in enumerate(range(1, self.n_checked + 1)):
            for j, a in enumerate(self.alpha_grid):
                yield n, a, float(self.values[i, j])


def check_complete_monotonicity(b: Boundary, f: TargetDensity, n_max: int = 8,
                                alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID,
                                tol: float = CM_TOLERANCE) -> MonotonicityReport:
    """Probe the sign conditions I_n(alpha) >= 0 for n = 1..n_max over a grid.

    A clean sweep only means "consistent with complete monotonicity"; it is
    never a proof.
    """
    alpha_grid = [float(a) for a in alpha_grid]
    if any(a <= 0 for a in alpha_grid):
        raise DomainError("alpha grid must be positive")
    for a in alpha_grid:
        _require_drift(b, a)
    hyp = _check_lemma_hypotheses(b)
    values = np.empty((n_max, len(alpha_grid)))
    witness = None
    for i, n in enumerate(range(1, n_max + 1)):
        for j, a in enumerate(alpha_grid):
            values[i, j] = monotonicity_integral(b, f, n, a)
            if witness is None and values[i, j] < -tol:
                witness = (n, a)
    min_value = float(values.min())
    verdict = "ViolationFound" if witness is not None else "ConsistentWithCM"
    return MonotonicityReport(n_max, alpha_grid, min_value, witness, verdict, values, hyp)


def kernel_triviality(b: Boundary) -> str:
    """Whether r-transform uniqueness (only z = 0 maps to 0) is known for ``b``.

    Linear boundaries with positive slope reduce it to Laplace uniqueness,
    square-root boundaries to Mellin uniqueness; nothing else is decidable.
    """
    if isinstance(b, Linear) and b.mu > 0:
        return "verified"
    if isinstance(b, Sqrt):
        return "verified"
    return "unverified"


@dataclass
class ExistenceReport:
    drift_ok: bool
    monotonicity: MonotonicityReport
    kernel: str

    @property
    def exists(self) -> Optional[bool]:
        if not self.drift_ok or self.monotonicity.violation:
            return False
        return True if self.kernel == "verified" else None


def existence_report(b: Boundary, f: TargetDensity, n_max: int = 8,
                     alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID) -> ExistenceReport:
    drift_ok = all(check_drift_bounded_below(b, a).satisfied for a in alpha_grid)
    report = check_complete_monotonicity(b, f, n_max, alpha_grid) if drift_ok else None
    return ExistenceReport(drift_ok, report, kernel_triviality(b))


def mellin_transform(f: TargetDensity, z: float) -> float:
    """int_0^inf t^{z-1} f(t) dt, raising DomainError when the origin makes it diverge."""
    if isinstance(f, GammaMixture):
        shift = z - 1.0
        if np.any(f.shapes + shift <= 0):
            raise DomainError(f"Mellin transform at {z} diverges for gamma shapes {f.shapes.min():g}")
        from scipy.special import gammaln
        terms = f.weights * np.exp(gammaln(f.shapes + shift) - gammaln(f.shapes) + shift * np.log(f.scales))
        return float(terms.sum())
    # t^{z} f(t) must vanish at the origin for integrability there
    probe = [t ** z * float(f.pdf(t)) for t in (1e-6, 1e-9, 1e-12)]
    if not (probe[2] < probe[1] < probe[0] or max(probe) == 0.0):
        raise DomainError(f"Mellin transform at {z} diverges at the origin")
    value = integrate_halfline(lambda t: t ** (z - 1.0) * float(f.pdf(t)) if t > 0 else 0.0,
                               epsrel=1e-10).value
    if not math.isfinite(value):
        raise DomainError(f"Mellin transform at {z} diverges")
    return value


def mellin_of_laplace_sqrt(f: TargetDensity, p: float) -> float:
    """Mellin transform at p of the starting-point Laplace transform for b(t) = sqrt(t).

    Equals e^{1/4} Gamma(p) D_{-p}(1) times the Mellin transform of f at 1 - p/2.
    """
    if p <= 0:
        raise DomainError("p must be positive")
    mf = mellin_transform(f, 1.0 - p / 2.0)
    d = specfun.parabolic_cylinder(-p, 1.0).value
    return math.exp(0.25 + math.lgamma(p)) * d * mf
