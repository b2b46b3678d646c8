"""Changing the boundary slope at a fixed starting law, and the log-mgf ratio
for doubly randomized boundaries.

For the linear boundary mu t the starting law g satisfies
g~(alpha) = f_mu~(alpha mu + alpha^2/2). Keeping g and moving to slope nu gives

    f_nu~(s) = f_mu~(nu (nu - mu) + s + sqrt(2) (mu - nu) sqrt(s + nu^2 / 2)).
"""

from __future__ import annotations

import cmath
import math
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import DivisionError, DomainError, PreconditionError
from .inversion import InversionConfig, LaplaceFn, TalbotContour, invert
from .quadrature import integrate_to_endpoint
from .targets import GammaMixture


def _inner(s, mu: float, nu: float):
    root = cmath.sqrt(s + nu * nu / 2) if isinstance(s, complex) else math.sqrt(s + nu * nu / 2)
    return nu * (nu - mu) + s + math.sqrt(2.0) * (mu - nu) * root


def affine_target_laplace(f_mu: LaplaceFn, mu: float, nu: float) -> LaplaceFn:
    """Transform of the hitting time on slope ``nu`` when the start law matches ``f_mu`` on slope ``mu``.

    The inner argument equals (sqrt(s + nu^2/2) + (mu - nu)/sqrt 2)^2 - mu^2/2,
    positive for every s > 0; each evaluation still checks it against the
    validity range of ``f_mu``.
    """
    if mu <= 0:
        raise DomainError("source slope must be positive")
    lo = f_mu.domain_min

    def real_eval(s):
        if np.ndim(s):
            return np.array([real_eval(float(v)) for v in np.ravel(s)]).reshape(np.shape(s))
        if s <= -nu * nu / 2:
            raise DomainError(f"s={s} outside the transform's domain")
        z = _inner(float(s), mu, nu)
        if not z > lo:
            raise DomainError(f"inner argument {z:g} at s={s:g} is not above {lo:g}")
        return float(f_mu.eval(z))

    complex_eval = None
    if f_mu.complex_eval is not None:
        def complex_eval(s):
            return f_mu.complex_eval(_inner(complex(s), mu, nu))

    return LaplaceFn(real_eval, 0.0 if nu >= 0 else -nu * nu / 2,
                     f"slope {mu:g} -> {nu:g} of [{f_mu.provenance}]", complex_eval)


def gamma_mixture_laplace(f: GammaMixture) -> LaplaceFn:
    lo = -1.0 / f.scales.max()
    return LaplaceFn(f.laplace, lo, f.label, f.laplace_complex)


def gamma_affine_coefficients(scale: float, mu: float, nu: float) -> tuple[float, float, float]:
    """(A, B, C) of (A + scale s + B sqrt(s + C))^{-shape}."""
    return 1.0 + scale * nu * (nu - mu), scale * math.sqrt(2.0) * (mu - nu), nu * nu / 2


def affine_gamma_laplace(scale: float, shape: float, mu: float, nu: float) -> LaplaceFn:
    """Closed form of the slope-changed transform for a single Gamma(scale, shape) source."""
    if mu <= 0:
        raise DomainError("source slope must be positive")
    A, B, C = gamma_affine_coefficients(scale, mu, nu)

    def real_eval(s):
        s = np.asarray(s, dtype=float)
        out = (A + scale * s + B * np.sqrt(s + C)) ** (-shape)
        return out if out.ndim else float(out)

    def complex_eval(s):
        s = complex(s)
        return cmath.exp(-shape * cmath.log(A + scale * s + B * cmath.sqrt(s + C)))

    return LaplaceFn(real_eval, 0.0, f"gamma({scale:g},{shape:g}) slope {mu:g} -> {nu:g}", complex_eval)


def affine_gamma_density(scale: float, shape: float, mu: float, nu: float, t: float,
                         epsrel: float = 1e-10) -> float:
    """Hitting density on slope ``nu`` for the start law that gives Gamma(scale, shape) on slope ``mu``.

    Valid for mu > nu:
        (B/a) a^{-b} e^{-tC} / (2 Gamma(b) sqrt(pi))
          * int_0^t (t-x)^{-3/2} x^b exp(-x (A/a - C) - x^2 (B/a)^2 / (4 (t-x))) dx.
    """
    if mu <= nu:
        raise DomainError("the integral representation needs mu > nu")
    if t <= 0:
        raise DomainError("t must be positive")
    A, B, C = gamma_affine_coefficients(scale, mu, nu)
    ba = B / scale
    lin = A / scale - C
    log_pre = math.log(ba) - shape * math.log(scale) - t * C - math.log(2.0) - gammaln(shape) - 0.5 * math.log(math.pi)

    def integrand(x):
        w = t - x
        if x <= 0 or w <= 0:
            return 0.0
        return math.exp(log_pre - 1.5 * math.log(w) + shape * math.log(x) - x * lin - x * x * ba * ba / (4 * w))

    return integrate_to_endpoint(integrand, t, epsrel=epsrel).value


def affine_gamma_density_grid(scale: float, shape: float, mu: float, nu: float, t_grid,
                              method=None) -> np.ndarray:
    """Slope-changed density on a grid: explicit integral when mu > nu, contour inversion otherwise."""
    t_grid = np.asarray(t_grid, dtype=float)
    if mu > nu and method is None:
        return np.array([affine_gamma_density(scale, shape, mu, nu, float(t)) for t in t_grid])
    F = affine_gamma_laplace(scale, shape, mu, nu)
    res = invert(F, InversionConfig(method or TalbotContour(), t_grid, cross_check=False))
    return res.values


def rdsfpt_mgf(f_log_tau: Callable[[float], float], h_log_tau: Callable[[float], float], alpha: float,
               mass_at_zero: bool = False) -> float:
    """mgf of 2 ln X at alpha from the mgfs of ln tau_{X, a/X} and ln tau_{1, a}."""
    if mass_at_zero:
        raise PreconditionError("the identity needs X without mass at zero")
    h = float(h_log_tau(alpha))
    if h == 0.0:
        raise DivisionError("mgf of ln tau_{1,a} vanishes at this alpha")
    return float(f_log_tau(alpha)) / h


def empirical_log_mgf(samples) -> Callable[[float], float]:
    """alpha -> mean(samples^alpha), the mgf of the log of positive samples."""
    logs = np.log(np.asarray(samples, dtype=float))

    def mgf(alpha: float) -> float:
        return float(np.mean(np.exp(alpha * logs)))
    return mgf
