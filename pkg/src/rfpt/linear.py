"""Closed-form solutions for the linear boundary b(t) = mu t.

For targets in the admissible class of Gamma mixtures (every scale at least
2 / mu^2) the matching density of the starting point is a mixture of
convolutions of two Gamma densities, written through modified Bessel
functions. The module also carries the zero-boundary image operator and the
signed zero-boundary counterexample.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats
from scipy.integrate import quad
from scipy.special import gammaln, xlogy

from . import specfun
from .boundaries import Boundary, Linear
from .errors import ConvergenceWarning, DomainError, ParameterError
from .quadrature import integrate_halfline, integrate_to_endpoint
from .targets import GammaMixture, TargetDensity

DEGENERATE_DISC = 1e-7
DEFAULT_EPS_TAIL = 1e-10
DEFAULT_MAX_TERMS = 10_000


def inverse_gaussian_pdf(t, x: float, mu: float):
    """Density of the first time x + W_t reaches mu t, started from x > 0."""
    t = np.asarray(t, dtype=float)
    if x <= 0:
        raise DomainError("starting point must be positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(t > 0, x / np.sqrt(2 * np.pi * t ** 3) * np.exp(-(mu * t - x) ** 2 / (2 * t)), 0.0)
    return out if out.ndim else float(out)


def inverse_gaussian_cdf(t, x: float, mu: float):
    """P(first passage of x + W to mu t happens before t), mu > 0 or mu <= 0."""
    t = np.maximum(np.asarray(t, dtype=float), 1e-300)
    st = np.sqrt(t)
    a = stats.norm.cdf((mu * t - x) / st)
    # exp(2 mu x) Phi(-(mu t + x)/sqrt t), in log space to avoid overflow
    b = np.exp(2 * mu * x + stats.norm.logcdf(-(mu * t + x) / st))
    out = a + b
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# Matching density for Gamma-mixture targets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BesselComponent:
    weight: float
    scale: float
    shape: float
    disc: float
    c_plus: float
    c_minus: float


@dataclass
class BesselMixtureDensity:
    """Starting-point density for slope ``mu`` and a Gamma-mixture target.

    Component n is the convolution of Gamma(c_n^+, b_n) and Gamma(c_n^-, b_n)
    with c_n^{+/-} = a_n (mu +/- sqrt(mu^2 - 2/a_n)) / 2.
    """

    mu: float
    components: tuple
    truncated_mass: float = 0.0
    tag: str = field(default="ClosedFormBesselMixture")

    def _component_logpdf(self, c: BesselComponent, x: np.ndarray) -> np.ndarray:
        nu = c.shape - 0.5
        out = np.empty_like(x)
        pos = x > 0
        xp = x[pos]
        if c.disc < DEGENERATE_DISC:
            # Gamma(1/mu, 2b): the Bessel form is 0/0 here though finite
            k = 2 * c.shape
            out[pos] = (k - 1) * np.log(xp) - self.mu * xp + k * math.log(self.mu) - gammaln(k)
        else:
            z = xp * c.disc
            log_i = specfun.log_bessel_i_scaled(nu, z) + z
            out[pos] = (0.5 * math.log(2 * math.pi) - self.mu * xp - gammaln(c.shape)
                        - 0.5 * math.log(c.scale) + nu * np.log(xp / (c.scale * c.disc)) + log_i)
        # value at the origin follows the x^{2b-1} leading behaviour
        if c.shape > 0.5:
            out[~pos] = -np.inf
        elif c.shape == 0.5:
            out[~pos] = 0.5 * math.log(2.0 / c.scale) if c.disc >= DEGENERATE_DISC else math.log(self.mu)
        else:
            out[~pos] = np.inf
        return out

    def pdf(self, x):
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x_arr)
        neg = x_arr < 0
        xs = np.where(neg, 0.0, x_arr)
        for c in self.components:
            out += c.weight * np.exp(self._component_logpdf(c, xs))
        out[neg] = 0.0
        return out if np.ndim(x) else float(out[0])

    __call__ = pdf

    def laplace(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        out = np.zeros_like(alpha)
        for c in self.components:
            out = out + c.weight * ((1 + c.c_plus * alpha) * (1 + c.c_minus * alpha)) ** (-c.shape)
        return out if out.ndim else float(out)

    def cdf(self, x):
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([integrate_to_endpoint(lambda s: float(self.pdf(s)), float(v), epsrel=1e-10).value
                        if v > 0 else 0.0 for v in x_arr])
        return out if np.ndim(x) else float(out[0])

    def mean(self) -> float:
        return float(sum(c.weight * c.shape * (c.c_plus + c.c_minus) for c in self.components))

    @property
    def is_density(self) -> bool:
        return True

    def sampler(self):
        """X sampler fed by three uniforms per path: component, two Gamma draws."""
        return _BesselMixtureSampler(self)


class _BesselMixtureSampler:
    n_uniforms = 3

    def __init__(self, g: BesselMixtureDensity):
        self.g = g
        w = np.array([c.weight for c in g.components])
        self._cum = np.cumsum(w) / w.sum()
        self.label = "bessel-mixture"

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        idx = np.minimum(np.searchsorted(self._cum, u[:, 0], side="right"), len(self._cum) - 1)
        out = np.empty(u.shape[0])
        for k, c in enumerate(self.g.components):
            sel = idx == k
            if np.any(sel):
                out[sel] = (stats.gamma.ppf(u[sel, 1], c.shape, scale=c.c_plus)
                            + stats.gamma.ppf(u[sel, 2], c.shape, scale=c.c_minus))
        return out

    @property
    def has_atom_at_zero(self) -> bool:
        return False


def factorize(mu: float, scale: float) -> tuple[float, float, float]:
    """(disc, c+, c-) with disc = sqrt(mu^2 - 2/scale)."""
    d2 = mu * mu - 2.0 / scale
    if d2 < 0:
        if d2 > -1e-12 * mu * mu:
            d2 = 0.0
        else:
            raise DomainError("complex roots: scale below 2/mu^2")
    disc = math.sqrt(d2)
    return disc, 0.5 * scale * (mu + disc), 0.5 * scale * (mu - disc)


def solve_gamma_mixture(mu: float, f: GammaMixture) -> BesselMixtureDensity:
    """Matching starting-point density for slope ``mu`` and target ``f``."""
    f.check_admissible(mu)
    comps = []
    for c in f.components:
        disc, cp, cm = factorize(mu, c.scale)
        comps.append(BesselComponent(c.weight, c.scale, c.shape, disc, cp, cm))
    return BesselMixtureDensity(float(mu), tuple(comps), f.truncated_mass)


def example3_density(mu: float, f: GammaMixture) -> Callable:
    """Shape-one special case: 2 e^{-mu x} sum p_n sinh(x d_n) / (a_n d_n)."""
    if np.any(f.shapes != 1.0):
        raise ParameterError("the sinh form needs every shape equal to 1")
    f.check_admissible(mu)
    parts = [(c.weight, c.scale, factorize(mu, c.scale)[0]) for c in f.components]

    def g(x):
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for p, a, d in parts:
            # e^{-mu x} sinh(x d) / d, written to stay finite as d -> 0
            shrink = np.where(d > 0, -np.expm1(-2 * x * d) / (2 * d if d > 0 else 1.0), x)
            total = total + p / a * np.exp(-(mu - d) * x) * shrink
        return 2.0 * total
    return g


def example4_density(mu: float, k: float) -> Callable:
    """Matching density for a chi-square(k) target and slope mu > 1."""
    if mu <= 1:
        raise ParameterError("chi-square targets need slope mu > 1")
    d = math.sqrt(mu * mu - 1)
    nu = (k - 1) / 2

    def g(x):
        x = np.asarray(x, dtype=float)
        z = x * d
        log_v = (0.5 * math.log(math.pi) - mu * x - math.lgamma(k / 2)
                 + nu * np.log(x / (2 * d)) + specfun.log_bessel_i_scaled(nu, z) + z)
        return np.exp(log_v)
    return g


def example5_density(mu: float, a: float, v: float, c: float, n_terms: int = 200) -> Callable:
    """Matching density for the Poisson-weighted Gamma family, as one series.

    g(x) = sqrt(2 pi) c^{v+1} (x/d)^{v+1/2} e^{-mu x - a}
           * sum_k (x c a / d)^k I_{v+k+1/2}(x d) / (k! Gamma(v+k+1)),
    d = sqrt(mu^2 - 2c). The Gamma(v+k+1) factor is what the convolution
    derivation produces.
    """
    if c > mu * mu / 2:
        raise ParameterError("need c <= mu^2 / 2")
    d = math.sqrt(mu * mu - 2 * c)

    def g(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = x * d
        logpre = (0.5 * math.log(2 * math.pi) + (v + 1) * math.log(c)
                  + (v + 0.5) * np.log(x / d) - mu * x - a)
        total = np.zeros_like(x)
        for k in range(n_terms):
            log_t = (xlogy(k, x * c * a / d) + specfun.log_bessel_i_scaled(v + k + 0.5, z) + z
                     - math.lgamma(k + 1) - math.lgamma(v + k + 1))
            total += np.exp(logpre + log_t)
        return total
    return g


# --------------------------------------------------------------------------
# Target families
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NoncentralChiSq:
    m: float
    delta: float


@dataclass(frozen=True)
class PoissonGamma:
    a: float
    v: float
    c: float


@dataclass(frozen=True)
class Hypergeometric:
    alphas: tuple
    betas: tuple
    c: float


@dataclass(frozen=True)
class ShiftedExample3:
    scales: tuple
    weights: tuple


def _poisson_mixture(lam: float, shape0: float, scale: float, eps_tail: float,
                     max_terms: int, label: str) -> GammaMixture:
    if lam == 0:
        return GammaMixture([(1.0, scale, shape0)], label=label)
    comps = []
    for j in range(max_terms):
        comps.append((float(stats.poisson.pmf(j, lam)), scale, shape0 + j))
        remaining = float(stats.poisson.sf(j, lam))
        if remaining < eps_tail and j >= lam:
            break
    comps = [c for c in comps if c[0] > 0]
    total = math.fsum(c[0] for c in comps)
    return GammaMixture(comps, truncated_mass=1.0 - total, label=label)


def build_family(kind, eps_tail: float = DEFAULT_EPS_TAIL,
                 max_terms: int = DEFAULT_MAX_TERMS) -> GammaMixture:
    """Gamma mixture of a named infinite family, truncated once the dropped weight is below ``eps_tail``."""
    if isinstance(kind, NoncentralChiSq):
        if kind.m <= 0 or kind.delta < 0:
            raise ParameterError("need m > 0 and delta >= 0")
        return _poisson_mixture(kind.delta ** 2 / 2, kind.m / 2, 2.0, eps_tail, max_terms,
                                f"ncx2({kind.m:g},{kind.delta:g})")
    if isinstance(kind, PoissonGamma):
        if kind.a < 0 or kind.c <= 0 or kind.v + 1 <= 0:
            raise ParameterError("need a >= 0, c > 0 and v > -1")
        return _poisson_mixture(kind.a, kind.v + 1, 1.0 / kind.c, eps_tail, max_terms,
                                f"poisson-gamma({kind.a:g},{kind.v:g},{kind.c:g})")
    if isinstance(kind, Hypergeometric):
        return _hypergeometric_mixture(kind, eps_tail, max_terms)
    if isinstance(kind, ShiftedExample3):
        if len(kind.scales) != len(kind.weights):
            raise ParameterError("scales and weights differ in length")
        w = np.asarray(kind.weights, dtype=float)
        if np.any(w <= 0):
            raise ParameterError("weights must be positive")
        w = w / w.sum()
        return GammaMixture([(p, a, 1.0) for p, a in zip(w, kind.scales)], label="shape-one mixture")
    raise ParameterError(f"unknown family {kind!r}")


def _hypergeometric_mixture(kind: Hypergeometric, eps_tail: float, max_terms: int) -> GammaMixture:
    al = [float(v) for v in kind.alphas]
    be = [float(v) for v in kind.betas]
    if kind.c <= 0:
        raise ParameterError("c must be positive")
    if len(al) > len(be):
        raise ParameterError("weights grow without bound when r > q")
    if any(v <= 0 for v in al + be):
        raise ParameterError("positive weights need positive alpha and beta parameters")
    exact_k = None
    if len(al) == len(be):
        excess = sum(be) - sum(al)
        if excess <= 1:
            raise ParameterError(f"weights are not summable: need sum(beta) - sum(alpha) > 1, got {excess:g}")
        if len(al) == 1:
            # Gauss summation of 2F1(alpha, 1; beta; 1)
            exact_k = (be[0] - 1) / (be[0] - al[0] - 1)
    raw = []
    term = 1.0
    running = 0.0
    for n in range(max_terms):
        raw.append(term)
        running += term
        if exact_k is not None:
            if 1.0 - running / exact_k < eps_tail:
                break
        elif len(al) < len(be) and term < eps_tail * running * 1e-3:
            break
        ratio = 1.0
        for a in al:
            ratio *= a + n
        for b in be:
            ratio /= b + n
        term *= ratio
    raw = np.array(raw)
    if exact_k is not None:
        k = exact_k
    elif len(al) == len(be):
        # polynomial decay p_n ~ C n^{-s}: integral bound on the tail
        s = sum(be) - sum(al)
        n_last = len(raw)
        k = raw.sum() + raw[-1] * n_last / (s - 1)
    else:
        k = raw.sum()
    weights = raw / k
    truncated = 1.0 - math.fsum(weights)
    if truncated > eps_tail:
        warnings.warn(f"hypergeometric family truncated at {len(raw)} terms with mass {truncated:.3g} dropped",
                      ConvergenceWarning, stacklevel=3)
    comps = [(float(w), 1.0 / kind.c, float(n + 1)) for n, w in enumerate(weights)]
    mix = GammaMixture(comps, truncated_mass=truncated, label=f"hypergeometric(c={kind.c:g})")
    mix.normalizer = k
    return mix


def hypergeometric_family_pdf(kind: Hypergeometric, t, normalizer: float):
    """c e^{-ct} rFq(alphas; betas; ct) / K, evaluated through the series directly."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    vals = [kind.c * math.exp(-kind.c * s) * specfun.hypergeometric(kind.alphas, kind.betas, kind.c * s).value
            / normalizer for s in t]
    return np.array(vals)


# --------------------------------------------------------------------------
# Zero-boundary image and counterexample
# --------------------------------------------------------------------------

def zero_boundary_kernel(b_s: float, w: float) -> float:
    """exp(-b^2 / 2w) b / (sqrt(2 pi) w^{3/2}) with w = t - s."""
    if w <= 0:
        return 0.0
    return math.exp(-b_s * b_s / (2 * w)) * b_s / (math.sqrt(2 * math.pi) * w ** 1.5)


def zero_image(b: Boundary, f: TargetDensity, t: float, epsrel: float = 1e-11) -> float:
    """Zero-boundary hitting density produced by the same start law that gives ``f`` on ``b``."""
    if t <= 0:
        raise DomainError("t must be positive")

    def integrand(s):
        if s <= 0 or s >= t:
            return 0.0
        return zero_boundary_kernel(b.evaluate(s), t - s) * float(f.pdf(s))

    return integrate_to_endpoint(integrand, t, epsrel=epsrel).value


def zero_boundary_image(mu: float, f: TargetDensity, t: float, epsrel: float = 1e-11) -> float:
    """(K f)(t) for the linear boundary mu t."""
    if mu <= 0:
        raise DomainError("slope must be positive")
    return zero_image(Linear(mu), f, t, epsrel)


@dataclass
class SignedSolution:
    """A solution of the matching equation that is not a probability density."""

    func: Callable
    laplace_closed: Callable
    period: float
    tag: str = "SignedNonDensity"

    def __call__(self, x):
        return self.func(x)

    def laplace_quadrature(self, alpha: float) -> float:
        raise NotImplementedError

    def negative_mass(self) -> float:
        """Mass of the negative part over one period."""
        v, _ = quad(lambda x: max(-float(self.func(x)), 0.0), 0.0, self.period,
                    points=[self.period / 2], limit=200)
        return v

    @property
    def is_density(self) -> bool:
        return False


class _SineSolution(SignedSolution):
    def __init__(self, lam: float):
        w = math.sqrt(2 * lam)
        super().__init__(lambda x: w * np.sin(w * np.asarray(x, dtype=float)),
                         lambda a: 2 * lam / (2 * lam + np.asarray(a, dtype=float) ** 2),
                         2 * math.pi / w)
        self.lam = lam
        self.omega = w

    def laplace_quadrature(self, alpha: float) -> float:
        # QUADPACK's Fourier-integral rule handles the oscillatory tail
        v, _ = quad(lambda x: math.exp(-alpha * x), 0.0, np.inf, weight="sin", wvar=self.omega)
        return self.omega * v


def zero_boundary_counterexample(lam: float) -> SignedSolution:
    """Unique solution sqrt(2 lam) sin(x sqrt(2 lam)) for the zero boundary and an Exp(lam) target."""
    if lam <= 0:
        raise DomainError("rate must be positive")
    return _SineSolution(lam)


def counterexample_diagnostics(sol: SignedSolution, alphas: Sequence[float]) -> dict:
    quad_vals = np.array([sol.laplace_quadrature(a) for a in alphas])
    closed = np.asarray(sol.laplace_closed(np.asarray(alphas)))
    return {
        "alphas": list(alphas),
        "laplace_quadrature": quad_vals,
        "laplace_closed": closed,
        "max_rel_error": float(np.max(np.abs(quad_vals / closed - 1))),
        "negative_mass": sol.negative_mass(),
        "min_value": float(np.min(sol(np.linspace(0, sol.period, 2001)))),
    }


def zero_image_cdf(b: Boundary, f: TargetDensity, t: float, epsrel: float = 1e-11) -> float:
    """Distribution function of the zero-boundary image at t.

    Integrating the image density over (0, t] and swapping the order gives
    int_0^t f(s) erfc(b(s) / sqrt(2 (t - s))) ds.
    """
    if t <= 0:
        return 0.0

    def integrand(s):
        if s <= 0 or s >= t:
            return 0.0
        return math.erfc(b.evaluate(s) / math.sqrt(2.0 * (t - s))) * float(f.pdf(s))

    return integrate_to_endpoint(integrand, t, epsrel=epsrel).value


def zero_image_mass(b: Boundary, f: TargetDensity, horizon: float = 1e4, epsrel: float = 1e-11) -> float:
    """Total mass of the zero-boundary image density by direct integration.

    The density is integrated numerically up to ``horizon``; beyond it the
    expansion t^{-3/2} (C + D / t) gives the tail 2 C T^{-1/2} + (2/3) D T^{-3/2},
    with C = E[b(tau)] / sqrt(2 pi) and D = E[b(tau) (3 tau - b(tau)^2) / 2] / sqrt(2 pi).
    """
    def image(t):
        return zero_image(b, f, t, epsrel) if t > 0 else 0.0

    head, _ = quad(lambda u: 2.0 * u * image(u * u), 0.0, 1.0, epsrel=1e-10, limit=200)
    body = head
    lo = 1.0
    while lo < horizon:
        hi = min(2.0 * lo, horizon)
        v, _ = quad(image, lo, hi, epsrel=1e-10, limit=200)
        body += v
        lo = hi
    root = math.sqrt(2.0 * math.pi)
    c = integrate_halfline(lambda s: b.evaluate(s) * float(f.pdf(s)) if s > 0 else 0.0,
                           epsrel=1e-12).value / root
    d = integrate_halfline(lambda s: 0.5 * b.evaluate(s) * (3.0 * s - b.evaluate(s) ** 2) * float(f.pdf(s))
                           if s > 0 else 0.0, epsrel=1e-12).value / root
    return body + 2.0 * c / math.sqrt(horizon) + 2.0 * d / (3.0 * horizon ** 1.5)
