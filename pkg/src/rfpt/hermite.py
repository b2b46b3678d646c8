"""Hermite-series solution of the matching equation for a general boundary.

With anchor t (b(t) > 0) the starting density is

    g(x) = (2 pi)^{-1/2} sum_n t^{n/2} a_n(t) / (2^n n!) H_n(x / sqrt(2t)),
    a_n(t) = int_0^t exp(-b(s)^2 / 2w) w^{-(n+1)/2} H_n(b(s) / sqrt(2w)) f(s) ds,

w = t - s. The a_n integrals cancel heavily for moderate n (the integrand is
many orders larger than the result), so they are evaluated in mpmath with
composite Gauss-Legendre rules at a working precision raised until the
cancellation is absorbed. The series itself is summed with normalized
Hermite polynomials h_n = H_n / sqrt(2^n n! sqrt(pi)), whose recurrence
does not overflow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import mpmath
import numpy as np
from scipy.integrate import trapezoid

from .boundaries import Boundary, General, Linear, Quadratic, Sqrt, Zero
from .errors import ConvergenceWarning, InstabilityWarning, PreconditionError, QuadratureError
from .targets import TargetDensity

DEFAULT_N = 40
PLATEAU_RATIO = 1e-12
ANCHOR_CANDIDATES = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
PROBE_ORDER = 10
PANELS = 12
GL_DEGREE = 5  # mpmath degree 5 -> 48 nodes per panel


@lru_cache(maxsize=16)
def _gl_nodes(degree: int, dps: int):
    prec = int(dps * 3.33) + 20
    with mpmath.workdps(dps):
        return tuple(mpmath.calculus.quadrature.GaussLegendre(mpmath.mp).calc_nodes(degree, prec))


def _check_anchor(b: Boundary, t: float) -> None:
    if not t > 0:
        raise PreconditionError("anchor t must be positive")
    if not b.evaluate(t) > 0:
        raise PreconditionError(f"series needs b(t) > 0 at the anchor, got b({t:g}) = {b.evaluate(t):g}")


def _panel_edges(width: float, peak: float, panels: int) -> list[float]:
    """Panel edges on [0, width], graded geometrically toward ``peak``."""
    peak = min(max(peak, width * 1e-3), width)
    edges = {0.0, width}
    for k in range(1, panels // 2 + 1):
        edges.add(peak * 2.0 ** -k)
        edges.add(min(width, peak * 2.0 ** (k / 2)))
    edges.add(peak)
    return sorted(e for e in edges if 0.0 <= e <= width)


def _scaled_coefficients(b: Boundary, f: TargetDensity, t: float, n_max: int, dps: int,
                         degree: int = GL_DEGREE):
    """Return (c_n, sum |terms|) for n = 0..n_max at working precision ``dps``.

    c_n = t^{n/2} a_n pi^{1/4} / (sqrt(2 pi) sqrt(2^n n!)), so that
    g(x) = sum c_n h_n(x / sqrt(2t)).
    """
    use_mp = getattr(f, "has_mp_pdf", False)
    b_mp = _mp_boundary(b)
    nodes = _gl_nodes(degree, dps)
    with mpmath.workdps(dps):
        tt = mpmath.mpf(t)
        half = tt / 2
        root_half = mpmath.sqrt(half)
        sqrt2 = mpmath.sqrt(2)
        pi_q = mpmath.pi ** mpmath.mpf(-0.25)
        rec_a = [mpmath.sqrt(mpmath.mpf(2) / (k + 1)) for k in range(n_max)]
        rec_b = [mpmath.sqrt(mpmath.mpf(k) / (k + 1)) for k in range(n_max)]
        acc = [mpmath.mpf(0)] * (n_max + 1)
        mag = [mpmath.mpf(0)] * (n_max + 1)

        def pdf(s):
            return f.mp_pdf(s) if use_mp else mpmath.mpf(float(f.pdf(float(s))))

        def accumulate(s, w, weight):
            # weight already carries the Jacobian and the w^{-1/2} factor
            bs = b_mp(s)
            z = bs / mpmath.sqrt(2 * w)
            base = weight * mpmath.exp(-z * z) * pdf(s) / sqrt2
            if base == 0:
                return
            rho = mpmath.sqrt(tt / w)
            zr = z * rho
            r2 = rho * rho
            prev = mpmath.mpf(0)
            cur = pi_q
            for n in range(n_max + 1):
                v = base * cur
                acc[n] += v
                mag[n] += abs(v)
                if n < n_max:
                    prev, cur = cur, rec_a[n] * zr * cur - rec_b[n] * r2 * prev

        # Peak of the top-end integrand sits near w ~ b(t)^2 / (2 n); grade panels toward it.
        bt = b.evaluate(t)
        u_peak = bt / math.sqrt(2.0 * max(n_max, 1))
        width = float(root_half)
        for lo_e, hi_e in _pairs(_panel_edges(width, u_peak, PANELS)):
            lo_m, hi_m = mpmath.mpf(lo_e), mpmath.mpf(hi_e)
            h = (hi_m - lo_m) / 2
            c = (hi_m + lo_m) / 2
            for x, wgt in nodes:
                u = c + h * x
                # s = t - u^2: ds = 2u du and w^{-1/2} = 1/u, so the Jacobian is 2
                accumulate(tt - u * u, u * u, 2 * h * wgt)
        for lo_e, hi_e in _pairs(_panel_edges(width, width, PANELS // 2)):
            lo_m, hi_m = mpmath.mpf(lo_e), mpmath.mpf(hi_e)
            h = (hi_m - lo_m) / 2
            c = (hi_m + lo_m) / 2
            for x, wgt in nodes:
                v = c + h * x
                s = v * v
                # s = v^2: ds = 2v dv
                accumulate(s, tt - s, 2 * v * h * wgt / mpmath.sqrt(tt - s))
        return [float(a) for a in acc], [float(m) for m in mag]


def _mp_boundary(b: Boundary):
    """Boundary evaluator in working precision; callables fall back to double."""
    if isinstance(b, Linear):
        mu = mpmath.mpf(b.mu)
        return lambda s: mu * s
    if isinstance(b, Sqrt):
        mu = mpmath.mpf(b.mu)
        return lambda s: mu * mpmath.sqrt(s)
    if isinstance(b, Quadratic):
        c2, c1, c0 = (mpmath.mpf(v) for v in (b.c2, b.c1, b.c0))
        return lambda s: (c2 * s + c1) * s + c0
    if isinstance(b, Zero):
        return lambda s: mpmath.mpf(0)
    return lambda s: mpmath.mpf(float(b.evaluate(float(s))))


def _pairs(edges):
    return list(zip(edges[:-1], edges[1:]))


def scaled_coefficients(b: Boundary, f: TargetDensity, t: float, n_max: int,
                        rtol: float = 1e-10, max_degree: int = 8) -> np.ndarray:
    """Normalized series coefficients c_0..c_n_max.

    Working precision is raised until it covers the observed cancellation,
    then the Gauss-Legendre degree is raised until two successive rules agree
    to ``rtol`` relative to the largest coefficient.
    """
    _check_anchor(b, t)
    dps = 30
    for _ in range(6):
        vals, mags = _scaled_coefficients(b, f, t, n_max, dps)
        worst = max((m / abs(v) if v != 0 else (math.inf if m > 0 else 1.0)) for v, m in zip(vals, mags))
        needed = math.log10(max(worst, 1.0)) - math.log10(rtol) + 5
        if needed <= dps:
            break
        dps = int(min(needed + 10, 400))
    else:
        raise QuadratureError("coefficient cancellation exceeds the precision budget")
    exact_inputs = getattr(f, "has_mp_pdf", False) and not isinstance(b, General)
    if not exact_inputs and worst > 1e6:
        warnings.warn(f"boundary or target only available in double precision; coefficients lose about "
                      f"{math.log10(worst):.0f} digits to cancellation", InstabilityWarning, stacklevel=2)
    prev = np.array(vals)
    for degree in range(GL_DEGREE + 1, max_degree + 1):
        cur = np.array(_scaled_coefficients(b, f, t, n_max, dps, degree)[0])
        if np.max(np.abs(cur - prev)) <= rtol * np.max(np.abs(cur)):
            return cur
        prev = cur
    raise QuadratureError(f"coefficient quadrature did not settle by degree {max_degree}")


def _to_a_n(c: np.ndarray, t: float) -> np.ndarray:
    n = np.arange(len(c))
    log_scale = (0.5 * np.log(2 * np.pi) - 0.25 * np.log(np.pi) + 0.5 * (n * np.log(2.0)
                 + np.array([math.lgamma(k + 1) for k in n])) - 0.5 * n * np.log(t))
    return c * np.exp(log_scale)


def coefficient_a_n(b: Boundary, f: TargetDensity, n: int, t: float) -> float:
    """a_n(t) of the Hermite expansion."""
    if n < 0:
        raise ValueError("n must be non-negative")
    c = scaled_coefficients(b, f, t, n)
    return float(_to_a_n(c, t)[n])


def normalized_hermite(n_max: int, u) -> np.ndarray:
    """Rows h_0..h_n_max at u, h_n = H_n(u) / sqrt(2^n n! sqrt(pi))."""
    u = np.asarray(u, dtype=float)
    out = np.empty((n_max + 1,) + u.shape)
    out[0] = math.pi ** -0.25
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * u * out[0]
    for n in range(1, n_max):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * u * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


@dataclass
class HermiteSeries:
    t_anchor: float
    coeffs: np.ndarray  # a_0..a_N
    N: int
    est_trunc_error: float
    scaled: np.ndarray = field(repr=False, default=None)
    x_max: float = 5.0
    tag: str = "HermiteSeries"

    def terms(self, x) -> np.ndarray:
        u = np.asarray(x, dtype=float) / math.sqrt(2.0 * self.t_anchor)
        h = normalized_hermite(self.N, u)
        return self.scaled[:, None] * h.reshape(self.N + 1, -1)

    def evaluate(self, x):
        """Partial sum at x; the series is a density on the whole real line."""
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = self.terms(x_arr).sum(axis=0)
        return out if np.ndim(x) else float(out[0])

    __call__ = evaluate

    def coefficient_magnitudes(self) -> np.ndarray:
        return np.abs(self.scaled)

    def negative_mass(self, lo: Optional[float] = None, hi: Optional[float] = None, n: int = 4001) -> float:
        lo = -self.x_max if lo is None else lo
        hi = self.x_max if hi is None else hi
        x = np.linspace(lo, hi, n)
        return float(trapezoid(np.maximum(-self.evaluate(x), 0.0), x))

    def is_density(self, tol: float = 1e-3) -> bool:
        return self.negative_mass() <= tol

    def mass(self, lo: Optional[float] = None, hi: Optional[float] = None, n: int = 4001) -> float:
        lo = -self.x_max if lo is None else lo
        hi = self.x_max if hi is None else hi
        x = np.linspace(lo, hi, n)
        return float(trapezoid(self.evaluate(x), x))


def _term_sup(c: np.ndarray, t: float, x_max: float) -> np.ndarray:
    """sup over [0, x_max] of each series term |c_n h_n(x / sqrt(2t))|."""
    grid = np.linspace(0.0, x_max, 401)
    h = normalized_hermite(len(c) - 1, grid / math.sqrt(2.0 * t))
    return np.max(np.abs(c[:, None] * h), axis=1)


def default_anchor(b: Boundary, f: TargetDensity, x_max: float = 5.0) -> float:
    """Candidate anchor whose order-10 terms are smallest relative to the largest term.

    Terms tend to alternate in size between odd and even orders, so the probe
    takes the larger of the last two.
    """
    best, best_val = None, math.inf
    for t in ANCHOR_CANDIDATES:
        if not b.evaluate(t) > 0:
            continue
        ts = _term_sup(scaled_coefficients(b, f, t, PROBE_ORDER), t, x_max)
        v = max(ts[PROBE_ORDER - 1], ts[PROBE_ORDER]) / ts.max()
        if v < best_val:
            best, best_val = t, v
    if best is None:
        raise PreconditionError("boundary is not positive at any candidate anchor")
    return best


def solve_series(b: Boundary, f: TargetDensity, t: Optional[float] = None, N: int = DEFAULT_N,
                 x_max: float = 5.0) -> HermiteSeries:
    """Truncated Hermite series for the starting density, anchored at t."""
    if N < 0:
        raise ValueError("N must be non-negative")
    if t is None:
        t = default_anchor(b, f, x_max)
    _check_anchor(b, t)
    c = scaled_coefficients(b, f, t, N)
    term_sup = _term_sup(c, t, x_max)
    peak = term_sup.max()
    n_used = N
    small = np.nonzero(term_sup < PLATEAU_RATIO * peak)[0]
    small = small[small > 0]
    if small.size:
        n_used = int(small[0])
    elif N >= 8 and term_sup[-1] > 1e-3 * peak:
        warnings.warn(f"Hermite terms are not decaying by order {N}: last term {term_sup[-1]:.3g} "
                      f"against largest {peak:.3g}", ConvergenceWarning, stacklevel=2)
    c = c[:n_used + 1]
    return HermiteSeries(float(t), _to_a_n(c, t), n_used, float(term_sup[n_used]), c, x_max)
