"""Special functions used by the RFPT formulas.

Hermite polynomials, parabolic cylinder functions, modified Bessel functions
of the first kind, Pochhammer symbols and generalized hypergeometric series.
Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln

from .errors import ConvergenceError, DomainError

__all__ = [
    "SpecFunResult",
    "hermite",
    "hermite_bound",
    "parabolic_cylinder",
    "bessel_i",
    "log_bessel_i_scaled",
    "bessel_i_scaled",
    "pochhammer",
    "hypergeometric",
    "compensated_sum",
]

DEFAULT_TOL = 1e-14
BESSEL_CROSSOVER = 30.0
HYPERGEOMETRIC_MAX_TERMS = 10_000


@dataclass(frozen=True)
class SpecFunResult:
    value: float
    est_abs_error: float
    converged: bool

    def __float__(self) -> float:
        return float(self.value)


def compensated_sum(terms) -> float:
    """Exactly rounded sum of an iterable of floats.

    Alternating series with large cancellation (high-order Hermite sums) lose
    all significant digits under naive accumulation.
    """
    return math.fsum(float(t) for t in terms)


# --------------------------------------------------------------------------
# Hermite polynomials (physicists' convention)
# --------------------------------------------------------------------------

def hermite(n: int, x):
    """H_n(x) via the three-term recurrence H_{k+1} = 2x H_k - 2k H_{k-1}.

    Accepts scalars or arrays for ``x``.
    """
    if n < 0:
        raise DomainError(f"Hermite degree must be non-negative, got {n}")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = 2.0 * x
    for k in range(1, n):
        h_prev, h = h, 2.0 * x * h - 2.0 * k * h_prev
    return h if h.ndim else float(h)


def hermite_all(n_max: int, x) -> np.ndarray:
    """Stack of H_0..H_{n_max} at ``x``; shape (n_max + 1, *x.shape)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 2.0 * x
    for k in range(1, n_max):
        out[k + 1] = 2.0 * x * out[k] - 2.0 * k * out[k - 1]
    return out


def hermite_bound(n: int, x):
    """Upper bound 2^{n/2-m} (n!/m!) exp(2|x| sqrt(k)) on |H_n(x)|, m = floor(n/2).

    k = m except for n = 1, where m = 0 would bound the linear H_1 by a
    constant; k = 1 there.
    """
    m = n // 2
    k = 1 if n == 1 else m
    log_c = (n / 2 - m) * math.log(2.0) + math.lgamma(n + 1) - math.lgamma(m + 1)
    x = np.abs(np.asarray(x, dtype=float))
    out = np.exp(log_c + 2.0 * x * math.sqrt(k))
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# Parabolic cylinder function D_p
# --------------------------------------------------------------------------

def parabolic_cylinder(p: float, z: float, tol: float = 1e-13) -> SpecFunResult:
    """Parabolic cylinder function D_p(z).

    Non-negative integer ``p`` goes through the Hermite relation; ``p < 0``
    through the integral representation, split at x* = max(1, -p) and at the
    peak of exp(-xz - x^2/2) when z < 0.
    """
    if p >= 0:
        if float(p).is_integer():
            n = int(p)
            val = 2.0 ** (-n / 2) * math.exp(-z * z / 4) * hermite(n, z / math.sqrt(2.0))
            return SpecFunResult(float(val), abs(val) * 4e-16 * (n + 1), True)
        raise DomainError(f"D_p(z) is only available for p < 0 or integer p >= 0 (got p={p})")

    expo = -p - 1.0
    x_star = max(1.0, -p)
    # the integrand exp(-xz - x^2/2) peaks at x = -z
    peak = max(0.0, -z)

    def body(x):
        return math.exp(-x * z - 0.5 * x * x)

    if expo != 0.0:
        head, err_head = quad(body, 0.0, x_star, weight="alg", wvar=(expo, 0.0),
                              epsabs=0.0, epsrel=tol, limit=200)
    else:
        head, err_head = quad(body, 0.0, x_star, epsabs=0.0, epsrel=tol, limit=200)

    def tail_integrand(x):
        return math.exp(-x * z - 0.5 * x * x + expo * math.log(x))

    points = [x_star]
    if peak > x_star:
        points += [peak, peak + 10.0]
    tail, err_tail = 0.0, 0.0
    for lo, hi in zip(points[:-1], points[1:]):
        v, e = quad(tail_integrand, lo, hi, epsabs=0.0, epsrel=tol, limit=200)
        tail += v
        err_tail += e
    v, e = quad(tail_integrand, points[-1], np.inf, epsabs=0.0, epsrel=tol, limit=200)
    tail += v
    err_tail += e

    scale = math.exp(-z * z / 4 - math.lgamma(-p))
    value = scale * (head + tail)
    err = scale * (err_head + err_tail)
    return SpecFunResult(value, err, err <= max(tol * abs(value), 1e-300) * 100)


# --------------------------------------------------------------------------
# Modified Bessel function of the first kind
# --------------------------------------------------------------------------

def _log_bessel_series(nu: float, x: np.ndarray, tol: float, max_terms: int):
    """log(e^{-x} I_nu(x)) from the ascending series, summed in log space."""
    half = np.log(x / 2.0)
    # the largest series term sits at k* = (sqrt(nu^2 + x^2) - nu) / 2
    k_star = float(np.max((np.sqrt(nu * nu + x * x) - nu) / 2.0))
    k_max = int(k_star + 25.0 * math.sqrt(k_star + 1.0) + 40)
    if k_max > max_terms:
        raise ConvergenceError(f"Bessel series needs {k_max} terms (> {max_terms})")
    k = np.arange(k_max + 1, dtype=float)[:, None]
    log_terms = (nu + 2 * k) * half[None, :] - gammaln(k + 1) - gammaln(nu + k + 1)
    peak = log_terms.max(axis=0)
    s = np.exp(log_terms - peak).sum(axis=0)
    # remaining terms shrink at least geometrically with the last ratio
    ratio = (x / 2.0) ** 2 / ((k_max + 1) * (nu + k_max + 1))
    last = np.exp(log_terms[-1] - peak)
    tail = np.where(ratio < 1, last * ratio / np.maximum(1 - ratio, 1e-300), np.inf)
    rel_err = tail / s + 2.2e-16 * math.sqrt(k_max + 1)
    return peak + np.log(s) - x, rel_err


def _log_bessel_asymptotic(nu: float, x: np.ndarray, tol: float):
    """log(e^{-x} I_nu(x)) from the large-argument Hankel expansion.

    Returns (values, relative error, ok-mask); entries where the divergent
    series never dropped below ``tol`` are flagged not ok.
    """
    mu4 = 4.0 * nu * nu
    s = np.ones_like(x)
    term = np.ones_like(x)
    best = np.full_like(x, np.inf)
    done = np.zeros(x.shape, dtype=bool)
    for k in range(1, 200):
        new = -term * (mu4 - (2 * k - 1) ** 2) / (k * 8.0 * x)
        growing = np.abs(new) > np.abs(term)
        done |= growing
        upd = ~done
        s = np.where(upd, s + new, s)
        term = np.where(upd, new, term)
        best = np.where(upd, np.abs(new), best)
        conv = np.abs(term) < tol * np.abs(s)
        done |= conv
        if np.all(done):
            break
        if mu4 == (2 * k - 1) ** 2:
            # half-integer order: series terminates
            best = np.zeros_like(x)
            break
    rel_err = best / np.abs(s)
    ok = (rel_err <= max(tol, 1e-15) * 10) & (s > 0)
    return -0.5 * np.log(2 * np.pi * x) + np.log(np.abs(s)), rel_err, ok


def log_bessel_i_scaled(nu: float, x, tol: float = DEFAULT_TOL, max_terms: int = 200_000):
    """log(exp(-x) * I_nu(x)) for nu > -1, x >= 0 (array-valued).

    Orders in (-1, 0) are needed by gamma shapes below 1/2; the ascending
    series keeps positive terms there.

    Series below x = 30 + nu, Hankel asymptotic above; asymptotic points that
    fail to reach ``tol`` fall back to the (always positive-term) series.
    """
    if nu <= -1:
        raise DomainError(f"Bessel order must exceed -1, got {nu}")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(x < 0):
        raise DomainError("Bessel argument must be non-negative")
    out = np.empty_like(x)
    zero = x == 0
    out[zero] = 0.0 if nu == 0 else (-np.inf if nu > 0 else np.inf)
    big = (~zero) & (x >= BESSEL_CROSSOVER + nu)
    small = (~zero) & ~big
    if np.any(big):
        vals, _, ok = _log_bessel_asymptotic(nu, x[big], tol)
        idx = np.flatnonzero(big)
        out[idx[ok]] = vals[ok]
        small[idx[~ok]] = True
    if np.any(small):
        vals, _ = _log_bessel_series(nu, x[small], tol, max_terms)
        out[small] = vals
    return float(out[0]) if scalar else out


def bessel_i_scaled(nu: float, x, tol: float = DEFAULT_TOL):
    """exp(-x) * I_nu(x)."""
    out = np.exp(log_bessel_i_scaled(nu, x, tol))
    return out


def bessel_i(nu: float, x: float, tol: float = DEFAULT_TOL) -> SpecFunResult:
    """I_nu(x) with an error estimate; raises ConvergenceError on failure."""
    if nu < 0 or x < 0:
        raise DomainError(f"bessel_i needs nu >= 0 and x >= 0 (got nu={nu}, x={x})")
    if x == 0:
        return SpecFunResult(1.0 if nu == 0 else 0.0, 0.0, True)
    xa = np.array([float(x)])
    if x >= BESSEL_CROSSOVER + nu:
        log_v, rel, ok = _log_bessel_asymptotic(nu, xa, tol)
        if not ok[0]:
            log_v, rel = _log_bessel_series(nu, xa, tol, 200_000)
    else:
        log_v, rel = _log_bessel_series(nu, xa, tol, 200_000)
    log_value = float(log_v[0]) + x
    if log_value > 709.0:
        # beyond double range; callers needing this regime use log_bessel_i_scaled
        return SpecFunResult(math.inf, math.inf, False)
    value = math.exp(log_value)
    err = abs(value) * float(rel[0])
    if not math.isfinite(err):
        raise ConvergenceError(f"I_{nu}({x}) did not converge")
    return SpecFunResult(value, err, float(rel[0]) <= max(tol, 1e-15) * 10)


# --------------------------------------------------------------------------
# Pochhammer symbol and hypergeometric series
# --------------------------------------------------------------------------

def pochhammer(z: float, n: int) -> float:
    """Rising factorial (z)_n = z (z+1) ... (z+n-1), with (z)_0 = 1."""
    if n < 0:
        raise DomainError("pochhammer needs n >= 0")
    out = 1.0
    for k in range(n):
        out *= z + k
        if out == 0.0:
            return 0.0
    return out


def log_pochhammer(z: float, n: int) -> float:
    """log (z)_n for z > 0."""
    return math.lgamma(z + n) - math.lgamma(z)


def hypergeometric(numer: Sequence[float], denom: Sequence[float], x: float,
                   tol: float = 1e-15,
                   max_terms: int = HYPERGEOMETRIC_MAX_TERMS) -> SpecFunResult:
    """Generalized hypergeometric series rFq(numer; denom; x).

    Truncates once |term| < tol * |partial sum| for three consecutive terms.
    """
    numer = [float(a) for a in numer]
    denom = [float(b) for b in denom]
    r, q = len(numer), len(denom)
    if x != 0 and r > q + 1:
        raise DomainError(f"{r}F{q} series diverges for x != 0")
    if r == q + 1 and abs(x) >= 1:
        raise DomainError(f"{r}F{q} series requires |x| < 1 (got {x})")

    term = 1.0
    total, comp = 1.0, 0.0  # Neumaier compensated running sum
    quiet = 0
    for n in range(max_terms):
        num = 1.0
        for a in numer:
            num *= a + n
        if num == 0.0:
            s = total + comp
            return SpecFunResult(s, abs(s) * 1e-16 * (n + 1), True)
        den = float(n + 1)
        for b in denom:
            if b + n == 0.0:
                raise DomainError(f"denominator parameter {b} hits a non-positive integer")
            den *= b + n
        term *= num / den * x
        if not math.isfinite(term):
            break
        t = total + term
        if abs(total) >= abs(term):
            comp += (total - t) + term
        else:
            comp += (term - t) + total
        total = t
        partial = total + comp
        if abs(term) < tol * abs(partial):
            quiet += 1
            if quiet >= 3:
                return SpecFunResult(partial, abs(term) + abs(partial) * 1e-16 * (n + 1), True)
        else:
            quiet = 0
    raise ConvergenceError(f"{r}F{q} series did not converge in {max_terms} terms at x={x}")
