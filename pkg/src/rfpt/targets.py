"""Target densities f for the hitting time, including Gamma mixtures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import mpmath
import numpy as np
from scipy.special import gammainc, gammaln

from .errors import AdmissibilityError, ParameterError, PreconditionError
from .quadrature import integrate_halfline

NORMALIZATION_TOL = 1e-8
MIXTURE_MASS_TOL = 1e-10


class TargetDensity:
    """Density of the hitting time on [0, inf).

    ``pdf`` accepts scalars or arrays. ``laplace`` (real s > 0), ``cdf`` and
    ``mp_pdf`` (mpmath precision evaluation) are optional refinements used by
    faster or more accurate code paths when present.
    """

    label = "target"

    def pdf(self, t):
        raise NotImplementedError

    def __call__(self, t):
        return self.pdf(t)

    def laplace(self, s: float) -> float:
        raise NotImplementedError

    @property
    def has_laplace(self) -> bool:
        return False

    def cdf(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.array([_cdf_by_quadrature(self.pdf, float(x)) for x in t_arr])
        return out if np.ndim(t) else float(out[0])

    def mp_pdf(self, t):
        return mpmath.mpf(float(self.pdf(float(t))))

    @property
    def has_mp_pdf(self) -> bool:
        return False


def _cdf_by_quadrature(pdf, t: float) -> float:
    from .quadrature import integrate_to_endpoint

    if t <= 0:
        return 0.0
    return integrate_to_endpoint(lambda s: float(pdf(s)), t, epsrel=1e-11).value


@dataclass(frozen=True)
class GammaComponent:
    weight: float
    scale: float
    shape: float


class GammaMixture(TargetDensity):
    """Finite (possibly truncated infinite) mixture of Gamma(scale, shape) densities.

    ``truncated_mass`` is the weight dropped when an infinite family was cut
    off; weights plus truncated mass sum to one.
    """

    def __init__(self, components: Sequence[tuple[float, float, float]] | Sequence[GammaComponent],
                 truncated_mass: float = 0.0, label: str = "gamma-mixture"):
        comps = [c if isinstance(c, GammaComponent) else GammaComponent(*map(float, c))
                 for c in components]
        if not comps:
            raise ParameterError("a mixture needs at least one component")
        for c in comps:
            if not (c.weight > 0 and c.scale > 0 and c.shape > 0):
                raise ParameterError(f"invalid gamma component {c}")
        total = math.fsum(c.weight for c in comps) + truncated_mass
        if abs(total - 1.0) > MIXTURE_MASS_TOL:
            raise ParameterError(f"weights plus truncated mass sum to {total!r}, not 1")
        self.components = tuple(comps)
        self.truncated_mass = float(truncated_mass)
        self.label = label
        self._w = np.array([c.weight for c in comps])
        self._a = np.array([c.scale for c in comps])
        self._b = np.array([c.shape for c in comps])

    def __repr__(self) -> str:
        parts = ", ".join(f"({c.weight:g}, {c.scale:g}, {c.shape:g})" for c in self.components[:4])
        more = "" if len(self.components) <= 4 else f", ... {len(self.components)} total"
        return f"GammaMixture([{parts}{more}])"

    @property
    def weights(self) -> np.ndarray:
        return self._w

    @property
    def scales(self) -> np.ndarray:
        return self._a

    @property
    def shapes(self) -> np.ndarray:
        return self._b

    def pdf(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t_arr)
        pos = t_arr > 0
        tp = t_arr[pos]
        if tp.size:
            logt = np.log(tp)
            for w, a, b in zip(self._w, self._a, self._b):
                out[pos] += w * np.exp((b - 1) * logt - tp / a - gammaln(b) - b * math.log(a))
        at_zero = t_arr == 0
        if np.any(at_zero):
            # density at the origin: infinite below shape 1, 1/a at shape 1
            val = 0.0
            for w, a, b in zip(self._w, self._a, self._b):
                if b < 1:
                    val = math.inf
                elif b == 1:
                    val += w / a
            out[at_zero] = val
        return out if np.ndim(t) else float(out[0])

    def mp_pdf(self, t):
        t = mpmath.mpf(t)
        if t <= 0:
            return mpmath.mpf(0)
        total = mpmath.mpf(0)
        logt = mpmath.log(t)
        for c in self.components:
            a, b = mpmath.mpf(c.scale), mpmath.mpf(c.shape)
            total += mpmath.mpf(c.weight) * mpmath.exp((b - 1) * logt - t / a - mpmath.loggamma(b) - b * mpmath.log(a))
        return total

    @property
    def has_mp_pdf(self) -> bool:
        return True

    def cdf(self, t):
        t_arr = np.maximum(np.atleast_1d(np.asarray(t, dtype=float)), 0.0)
        out = np.zeros_like(t_arr)
        for w, a, b in zip(self._w, self._a, self._b):
            out += w * gammainc(b, t_arr / a)
        return out if np.ndim(t) else float(out[0])

    def laplace(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for w, a, b in zip(self._w, self._a, self._b):
            out = out + w * (1.0 + a * s) ** (-b)
        return out if out.ndim else float(out)

    def laplace_complex(self, s):
        s = np.asarray(s, dtype=complex)
        out = np.zeros_like(s)
        for w, a, b in zip(self._w, self._a, self._b):
            out = out + w * np.exp(-b * np.log(1.0 + a * s))
        return out

    @property
    def has_laplace(self) -> bool:
        return True

    def min_scale(self) -> float:
        return float(self._a.min())

    def is_admissible(self, mu: float) -> bool:
        """Class-C membership for slope mu: every scale at least 2 / mu^2."""
        return mu > 0 and self.min_scale() >= 2.0 / mu ** 2 * (1 - 1e-12)

    def check_admissible(self, mu: float) -> None:
        if mu <= 0:
            raise AdmissibilityError(f"slope must be positive, got {mu}")
        if not self.is_admissible(mu):
            raise AdmissibilityError(
                f"smallest scale {self.min_scale():g} is below 2/mu^2 = {2 / mu ** 2:g}")

    def mean(self) -> float:
        return float(np.dot(self._w, self._a * self._b))


def gamma_density(scale: float, shape: float) -> GammaMixture:
    return GammaMixture([(1.0, scale, shape)], label=f"gamma({scale:g},{shape:g})")


class Exponential(GammaMixture):
    def __init__(self, rate: float):
        if rate <= 0:
            raise ParameterError("exponential rate must be positive")
        super().__init__([(1.0, 1.0 / rate, 1.0)], label=f"exp({rate:g})")
        self.rate = float(rate)


class GeneralDensity(TargetDensity):
    """User-supplied density, optionally with its Laplace transform.

    Normalization is checked at construction by quadrature.
    """

    def __init__(self, pdf: Callable, laplace: Optional[Callable] = None,
                 label: str = "general", check: bool = True):
        self._pdf = pdf
        self._laplace = laplace
        self.label = label
        if check:
            mass = integrate_halfline(lambda t: float(pdf(t)), epsrel=1e-11).value
            if abs(mass - 1.0) > NORMALIZATION_TOL:
                raise PreconditionError(f"density integrates to {mass!r}, not 1")

    def pdf(self, t):
        if np.ndim(t):
            return np.array([float(self._pdf(float(s))) for s in np.ravel(t)]).reshape(np.shape(t))
        return float(self._pdf(float(t)))

    def laplace(self, s):
        if self._laplace is None:
            raise PreconditionError(f"{self.label} has no Laplace transform")
        return self._laplace(s)

    @property
    def has_laplace(self) -> bool:
        return self._laplace is not None


def parse_target(text: str) -> TargetDensity:
    """Parse ``exp:RATE``, ``gamma:SCALE:SHAPE`` or ``mixture:p,a,b;p,a,b;...``."""
    from .errors import ConfigError

    kind, _, rest = text.strip().partition(":")
    kind = kind.lower()
    try:
        if kind == "exp":
            return Exponential(float(rest))
        if kind == "gamma":
            scale, shape = (float(v) for v in rest.split(":"))
            return gamma_density(scale, shape)
        if kind == "mixture":
            comps = [tuple(float(v) for v in item.split(",")) for item in rest.split(";") if item]
            if any(len(c) != 3 for c in comps):
                raise ValueError("each component needs p,a,b")
            return GammaMixture(comps)
    except (ValueError, ParameterError) as exc:
        raise ConfigError(f"bad target spec {text!r}: {exc}") from None
    raise ConfigError(f"bad target spec {text!r}")
