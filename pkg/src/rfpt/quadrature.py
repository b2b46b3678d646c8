"""Adaptive integration helpers over [0, inf) and (0, t) built on QUADPACK."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import QuadratureError

# Relative size below which a dyadic block [T, 2T] counts as negligible tail.
TAIL_RATIO = 1e-14


@dataclass(frozen=True)
class Integral:
    value: float
    abs_error: float
    t_star: float = math.inf

    def __float__(self) -> float:
        return self.value


def _quad(fn, lo, hi, epsabs, epsrel, limit=200, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            return quad(fn, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=limit, **kw)
        except IntegrationWarning:
            pass
    # retry with a larger budget and accept the estimate with its error bound
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        return quad(fn, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=4 * limit, **kw)


def integrate_halfline(fn, epsrel: float = 1e-12, epsabs: float = 0.0,
                       scale: float = 1.0, max_blocks: int = 80,
                       raise_on_fail: bool = True) -> Integral:
    """Integral of ``fn`` over [0, inf).

    [0, scale] is integrated in u = sqrt(t) so t^{-1/2} endpoint singularities
    become bounded; the rest is covered by dyadic blocks [T, 2T] until a block
    falls below ``TAIL_RATIO`` of the running total and ``fn`` is negligible
    at the block edge. The remainder beyond T* goes to QUADPACK's infinite-range
    rule as a final certificate.
    """
    def head(u):
        return 2.0 * u * fn(u * u)

    total, err = _quad(head, 0.0, math.sqrt(scale), epsabs, epsrel)
    lo = scale
    quiet = 0
    for _ in range(max_blocks):
        hi = 2.0 * lo
        v, e = _quad(fn, lo, hi, epsabs, epsrel)
        total += v
        err += e
        lo = hi
        edge = abs(fn(lo)) * lo
        if abs(v) <= TAIL_RATIO * abs(total) and edge <= TAIL_RATIO * max(abs(total), 1e-300):
            quiet += 1
            if quiet >= 2:
                break
        else:
            quiet = 0
    else:
        if raise_on_fail:
            raise QuadratureError(f"integrand not negligible by t={lo:g}")
    tail, tail_err = _quad(fn, lo, np.inf, epsabs, epsrel)
    total += tail
    err += tail_err + abs(tail)
    if not math.isfinite(total):
        raise QuadratureError("non-finite integral")
    if raise_on_fail and err > max(1e3 * epsrel * abs(total), 1e3 * epsabs, 1e-13):
        raise QuadratureError(f"quadrature error estimate {err:.3g} too large for value {total:.6g}")
    return Integral(total, err, lo)


def integrate_to_endpoint(fn, t: float, epsrel: float = 1e-12, epsabs: float = 0.0,
                          split: float = 0.5) -> Integral:
    """Integral of ``fn(s)`` over (0, t) with square-root substitutions at both ends.

    Near s = 0 uses s = v^2; near s = t uses s = t - u^2. Both remove
    inverse-square-root endpoint behaviour (gamma shapes >= 1/2 at the origin,
    heat-kernel factors at the top end).
    """
    mid = split * t

    def lower(v):
        return 2.0 * v * fn(v * v)

    def upper(u):
        return 2.0 * u * fn(t - u * u)

    a, ea = _quad(lower, 0.0, math.sqrt(mid), epsabs, epsrel)
    b, eb = _quad(upper, 0.0, math.sqrt(t - mid), epsabs, epsrel)
    total = a + b
    if not math.isfinite(total):
        raise QuadratureError("non-finite integral")
    return Integral(total, ea + eb)


def gauss_legendre(fn_vec, lo: float, hi: float, n: int = 64, panels: int = 1) -> float:
    """Composite Gauss-Legendre rule for vectorized integrands."""
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(lo, hi, panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        total += half * float(np.dot(w, fn_vec(half * x + 0.5 * (a + b))))
    return total
