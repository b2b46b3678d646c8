"""Monte Carlo first-passage simulation of W_t + X against a boundary.

Paths are stepped on a fixed grid. With the bridge correction on, a step
from distance d_k > 0 to d_{k+1} crosses the (linearized) boundary with
probability exp(-2 d_k d_{k+1} / dt); the crossing time inside the step is
then drawn from its exact conditional law, so linear boundaries are
simulated without discretization bias. Randomness comes from a Philox4x32-10
counter-based generator keyed by the seed with counter (step, stream, path,
tag), so each path's draws do not depend on how paths are split over threads.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numba
import numpy as np
from numba import njit, prange
from scipy import stats

from .boundaries import Boundary, General, Linear, Quadratic, Sqrt, Zero, scale_boundary
from .errors import ConfigError, PreconditionError

THREADS_ENV = "RFPT_THREADS"
TAG_PATH = 0
TAG_X = 1
DEFAULT_HORIZON = 50.0

# numba tries TBB first and warns when the installed TBB is too old
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = np.uint64(0x9E3779B9)
_PHILOX_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_INV32 = 1.0 / 4294967296.0


@njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds; all words are uint64 holding 32-bit values."""
    for r in range(10):
        p0 = _PHILOX_M0 * c0
        p1 = _PHILOX_M1 * c2
        hi0 = p0 >> np.uint64(32)
        lo0 = p0 & _MASK32
        hi1 = p1 >> np.uint64(32)
        lo1 = p1 & _MASK32
        c0 = (hi1 ^ c1 ^ k0) & _MASK32
        c1 = lo1
        c2 = (hi0 ^ c3 ^ k1) & _MASK32
        c3 = lo0
        if r < 9:
            k0 = (k0 + _PHILOX_W0) & _MASK32
            k1 = (k1 + _PHILOX_W1) & _MASK32
    return c0, c1, c2, c3


def philox_block(counter, key) -> tuple:
    """One Philox4x32-10 output block for a 4-word counter and 2-word key."""
    c = [np.uint64(v) for v in counter]
    k = [np.uint64(v) for v in key]
    return tuple(int(v) for v in philox4x32(c[0], c[1], c[2], c[3], k[0], k[1]))


def _key(seed: int) -> tuple[np.uint64, np.uint64]:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


@njit(cache=True, inline="always")
def _uniform(word):
    # (w + 0.5) / 2^32 lies strictly inside (0, 1)
    return (np.float64(word) + 0.5) * _INV32


@njit(cache=True, parallel=True)
def _path_uniforms(n_paths, n_uniforms, stream, k0, k1):
    out = np.empty((n_paths, n_uniforms))
    for i in prange(n_paths):
        for j in range((n_uniforms + 3) // 4):
            w = philox4x32(np.uint64(j), np.uint64(stream), np.uint64(i), np.uint64(1), k0, k1)
            for q in range(4):
                col = 4 * j + q
                if col < n_uniforms:
                    out[i, col] = _uniform(w[q])
    return out


@njit(cache=True, inline="always")
def _boundary_at(coefs, row, grid, use_grid, k, dt):
    if use_grid:
        return grid[k]
    t = k * dt
    return coefs[row, 0] + coefs[row, 1] * t + coefs[row, 2] * t * t + coefs[row, 3] * math.sqrt(t)


@njit(cache=True, inline="always")
def _bridge_hit_offset(a, b, h, z, u):
    """Time to reach 0 within a step for a Brownian bridge from a > 0 to b, given that it does.

    With u = s / (h (h - s)), u is inverse Gaussian with mean a / (h |b|) and
    shape (a / h)^2; for b = 0 it is Levy with scale (a / h)^2.
    """
    lam = (a / h) ** 2
    bb = abs(b)
    y = z * z
    if bb <= 1e-300:
        v = lam / max(y, 1e-300)
    else:
        m = a / (h * bb)
        my = m * y
        root = math.sqrt(my * my + 4.0 * m * lam * y)
        x = m * 4.0 * m * lam * y / ((root + my) ** 2) if y > 0 else m
        v = x if u <= m / (m + x) else m * m / x
    return v * h * h / (1.0 + v * h)


@njit(cache=True, parallel=True)
def _simulate_kernel(x0, coefs, grid, use_grid, dt, steps, bridge, stream, k0, k1, tau, status):
    n = x0.shape[0]
    per_path_coefs = coefs.shape[0] == n
    per_path_steps = steps.shape[0] == n
    sq = math.sqrt(dt)
    two_pi = 2.0 * math.pi
    for i in prange(n):
        row = np.int64(i) if per_path_coefs else np.int64(0)
        n_steps = steps[i] if per_path_steps else steps[0]
        y = x0[i]
        d = y - _boundary_at(coefs, row, grid, use_grid, 0, dt)
        if d <= 0.0:
            tau[i] = 0.0
            status[i] = 2
            continue
        tau[i] = np.nan
        status[i] = 0
        for k in range(n_steps):
            w0, w1, w2, w3 = philox4x32(np.uint64(k), np.uint64(stream), np.uint64(i),
                                        np.uint64(0), k0, k1)
            u1 = _uniform(w0)
            u2 = _uniform(w1)
            rad = math.sqrt(-2.0 * math.log(u1))
            y += sq * rad * math.cos(two_pi * u2)
            d1 = y - _boundary_at(coefs, row, grid, use_grid, k + 1, dt)
            hit = d1 <= 0.0
            if not hit and bridge:
                hit = _uniform(w2) < math.exp(-2.0 * d * d1 / dt)
            if hit:
                if bridge:
                    tau[i] = k * dt + _bridge_hit_offset(d, d1, dt, rad * math.sin(two_pi * u2), _uniform(w3))
                else:
                    tau[i] = (k + 1) * dt
                status[i] = 1
                break
            d = d1


# --------------------------------------------------------------------------
# Samplers for the starting point
# --------------------------------------------------------------------------

class FixedX:
    n_uniforms = 0

    def __init__(self, value: float):
        self.value = float(value)
        self.label = f"fixed:{value:g}"

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        return np.full(u.shape[0], self.value)

    @property
    def has_atom_at_zero(self) -> bool:
        return self.value == 0.0


class DistributionSampler:
    """Inverse-CDF sampler around a frozen scipy distribution."""

    n_uniforms = 1

    def __init__(self, dist, label: str = "dist"):
        self.dist = dist
        self.label = label

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        return self.dist.ppf(u[:, 0])

    @property
    def has_atom_at_zero(self) -> bool:
        # continuous scipy laws have no atoms; discrete ones expose a pmf
        pmf = getattr(self.dist, "pmf", None)
        return pmf is not None and float(pmf(0)) > 0.0


def parse_x_dist(text: str):
    """``fixed:V``, ``exp:RATE``, ``gamma:SCALE:SHAPE``, ``lognormal:MU:SIGMA`` or ``uniform:LO:HI``."""
    kind, _, rest = text.strip().partition(":")
    vals = [v for v in rest.split(":") if v]
    try:
        nums = [float(v) for v in vals]
        if kind == "fixed" and len(nums) == 1:
            return FixedX(nums[0])
        if kind == "exp" and len(nums) == 1 and nums[0] > 0:
            return DistributionSampler(stats.expon(scale=1.0 / nums[0]), text)
        if kind == "gamma" and len(nums) == 2 and min(nums) > 0:
            return DistributionSampler(stats.gamma(nums[1], scale=nums[0]), text)
        if kind == "lognormal" and len(nums) == 2 and nums[1] > 0:
            return DistributionSampler(stats.lognorm(nums[1], scale=math.exp(nums[0])), text)
        if kind == "uniform" and len(nums) == 2 and nums[1] > nums[0]:
            return DistributionSampler(stats.uniform(nums[0], nums[1] - nums[0]), text)
    except ValueError:
        pass
    raise ConfigError(f"bad starting-point distribution {text!r}")


# --------------------------------------------------------------------------
# Configuration and results
# --------------------------------------------------------------------------

def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return numba.config.NUMBA_NUM_THREADS


@dataclass
class SimConfig:
    n_paths: int = 100_000
    dt: float = 1e-3
    t_horizon: float = DEFAULT_HORIZON
    bridge_correction: bool = True
    seed: int = 0
    n_workers: int = field(default_factory=default_workers)

    def __post_init__(self):
        if self.n_paths < 100:
            raise ConfigError("need at least 100 paths")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.dt >= self.t_horizon:
            raise ConfigError("dt must be smaller than the horizon")
        if self.n_workers < 1:
            raise ConfigError("n_workers must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in 64 unsigned bits")


@dataclass
class EmpiricalDistribution:
    """Absorbed hitting times (sorted) out of ``n_paths`` simulated paths."""

    times: np.ndarray
    n_paths: int
    n_censored: int
    n_instant: int
    t_horizon: float
    first_step_fraction: float = 0.0

    @property
    def n_absorbed(self) -> int:
        return int(self.times.size)

    @property
    def censored_fraction(self) -> float:
        return self.n_censored / self.n_paths

    def ecdf(self, t):
        return np.searchsorted(self.times, np.asarray(t, dtype=float), side="right") / self.n_paths

    def ks_vs(self, cdf: Callable) -> float:
        return ks_distance(self, cdf)

    def mean(self) -> float:
        return float(self.times.mean()) if self.times.size else math.nan


def ks_distance(emp: EmpiricalDistribution, cdf: Callable) -> float:
    """sup over [0, horizon] of |ecdf - cdf|, where the ecdf counts censored paths as not yet absorbed."""
    n = emp.n_paths
    end = float(np.asarray(cdf(np.array([emp.t_horizon])), dtype=float).ravel()[0])
    tail_gap = abs(end - emp.n_absorbed / n)
    if emp.n_absorbed == 0:
        return end
    x = emp.times
    f = np.asarray(cdf(x), dtype=float)
    j = np.arange(x.size)
    d = np.maximum(np.abs(f - (j + 1) / n), np.abs(f - j / n))
    return float(max(d.max(), tail_gap))


# --------------------------------------------------------------------------
# Drivers
# --------------------------------------------------------------------------

def boundary_coefficients(b: Boundary) -> Optional[np.ndarray]:
    """(c0, c1, c2, c_sqrt) with b(t) = c0 + c1 t + c2 t^2 + c_sqrt sqrt(t), or None for callables."""
    if isinstance(b, Zero):
        return np.zeros(4)
    if isinstance(b, Linear):
        return np.array([0.0, b.mu, 0.0, 0.0])
    if isinstance(b, Sqrt):
        return np.array([0.0, 0.0, 0.0, b.mu])
    if isinstance(b, Quadratic):
        return np.array([b.c0, b.c1, b.c2, 0.0])
    return None


def _draw_x(x_sampler, n: int, seed: int, stream: int) -> np.ndarray:
    k0, k1 = _key(seed)
    k = int(getattr(x_sampler, "n_uniforms", 1))
    u = _path_uniforms(n, max(k, 1), stream, k0, k1)
    return np.asarray(x_sampler.from_uniforms(u), dtype=float)


def _run(x0: np.ndarray, coefs: Optional[np.ndarray], b: Boundary, cfg: SimConfig,
         horizon: np.ndarray, stream: int) -> tuple[np.ndarray, np.ndarray]:
    n = x0.size
    steps = np.ceil(horizon / cfg.dt).astype(np.int64)
    if coefs is None:
        grid = np.asarray(b.evaluate(np.arange(int(steps.max()) + 1) * cfg.dt), dtype=float)
        coefs_arr = np.zeros((1, 4))
        use_grid = True
    else:
        grid = np.zeros(1)
        coefs_arr = np.atleast_2d(coefs).astype(float)
        use_grid = False
    tau = np.empty(n)
    status = np.empty(n, dtype=np.int8)
    k0, k1 = _key(cfg.seed)
    previous = numba.get_num_threads()
    numba.set_num_threads(min(cfg.n_workers, numba.config.NUMBA_NUM_THREADS))
    try:
        _simulate_kernel(x0, coefs_arr, grid, use_grid, cfg.dt, steps, cfg.bridge_correction,
                         stream, k0, k1, tau, status)
    finally:
        numba.set_num_threads(previous)
    # crossings inside the last partial step can land beyond the horizon
    late = (status == 1) & (tau > horizon)
    status[late] = 0
    tau[late] = np.nan
    return tau, status


def _empirical(tau, status, horizon: float, dt: float) -> EmpiricalDistribution:
    absorbed = np.sort(tau[status != 0])
    n = tau.size
    first = float(np.count_nonzero(absorbed <= dt)) / n
    return EmpiricalDistribution(absorbed, n, int(np.count_nonzero(status == 0)),
                                 int(np.count_nonzero(status == 2)), horizon, first)


def simulate_tau(b: Boundary, x_sampler, cfg: SimConfig, stream: int = 0) -> EmpiricalDistribution:
    """Empirical law of the first time W_t + X reaches b(t), censored at cfg.t_horizon."""
    x0 = _draw_x(x_sampler, cfg.n_paths, cfg.seed, stream)
    horizon = np.array([cfg.t_horizon])
    tau, status = _run(x0, boundary_coefficients(b), b, cfg, horizon, stream)
    return _empirical(tau, status, cfg.t_horizon, cfg.dt)


def simulate_rdsfpt(b1: Boundary, a: float, x_sampler, cfg: SimConfig, stream: int = 0) -> EmpiricalDistribution:
    """Empirical law of tau_{X, a/X}: start at X under the boundary b1 scaled by a / X."""
    if a <= 0:
        raise ConfigError("scale parameter must be positive")
    if getattr(x_sampler, "has_atom_at_zero", False):
        raise PreconditionError("the doubly randomized time needs X without mass at zero")
    x = _draw_x(x_sampler, cfg.n_paths, cfg.seed, stream)
    if np.any(x <= 0):
        raise PreconditionError("starting points must be positive")
    coefs = [boundary_coefficients(scale_boundary(b1, a / xi)) for xi in x]
    if any(c is None for c in coefs):
        raise ConfigError("per-path boundaries need a closed form")
    tau, status = _run(x, np.array(coefs), b1, cfg, np.array([cfg.t_horizon]), stream)
    return _empirical(tau, status, cfg.t_horizon, cfg.dt)


@dataclass
class ScalingReport:
    statistic: float
    p_value: float
    level: float
    unit_start: EmpiricalDistribution
    rescaled: EmpiricalDistribution

    @property
    def passed(self) -> bool:
        return self.p_value >= self.level


def check_scaling_identity(b1: Boundary, lam: float, x_sampler, cfg: SimConfig,
                           level: float = 0.01) -> ScalingReport:
    """Two-sample KS between tau_{1, lam X} and tau_{X, lam} / X^2.

    The first sample starts at 1 under the boundary scaled by lam X (a new
    boundary per path); the second starts at X under the boundary scaled by
    lam, with each path's horizon stretched by X^2 so both samples are
    censored at the same rescaled time.
    """
    if lam <= 0:
        raise ConfigError("scale parameter must be positive")
    if getattr(x_sampler, "has_atom_at_zero", False):
        raise PreconditionError("the scaling identity needs X without mass at zero")
    x = _draw_x(x_sampler, cfg.n_paths, cfg.seed, 0)
    if np.any(x <= 0):
        raise PreconditionError("starting points must be positive")
    coefs1 = [boundary_coefficients(scale_boundary(b1, lam * xi)) for xi in x]
    if any(c is None for c in coefs1):
        raise ConfigError("the scaling check needs a boundary with a closed form")
    tau_a, st_a = _run(np.ones_like(x), np.array(coefs1), b1, cfg, np.array([cfg.t_horizon]), 1)
    b_lam = scale_boundary(b1, lam)
    tau_b, st_b = _run(x, boundary_coefficients(b_lam), b_lam, cfg, cfg.t_horizon * x * x, 2)
    tau_b = tau_b / (x * x)
    emp_a = _empirical(tau_a, st_a, cfg.t_horizon, cfg.dt)
    emp_b = _empirical(tau_b, st_b, cfg.t_horizon, cfg.dt)
    # censored paths sit beyond the common horizon in both samples
    beyond = 2.0 * cfg.t_horizon
    sa = np.where(st_a == 0, beyond, tau_a)
    sb = np.where(st_b == 0, beyond, tau_b)
    res = stats.ks_2samp(sa, sb)
    return ScalingReport(float(res.statistic), float(res.pvalue), level, emp_a, emp_b)
