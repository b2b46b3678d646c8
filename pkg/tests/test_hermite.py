import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from rfpt.boundaries import General, Linear, Zero
from rfpt.errors import ConvergenceWarning, InstabilityWarning, PreconditionError
from rfpt.hermite import (HermiteSeries, coefficient_a_n, default_anchor, normalized_hermite,
                          scaled_coefficients, solve_series)
from rfpt.linear import zero_boundary_image
from rfpt.specfun import hermite
from rfpt.targets import Exponential, gamma_density

# mpmath quad at 30 digits of a_0(1) for b(t) = t and f = Gamma(scale 2, shape 1/2)
A0_LINEAR1_GAMMA_T1 = 0.655679542418798467561515376263

# Sup-norm distance on [0, 5] to e^{-x} at N = 40, measured and frozen. The
# zero extension of g below x = 0 limits every anchor to errors of this size.
FROZEN_SUP_ERROR = {2.0: 0.61, 4.0: 0.61}

B, F = Linear(1.0), gamma_density(2.0, 0.5)


@pytest.fixture(scope="module")
def series():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        return {t: solve_series(B, F, t=t, N=40) for t in (2.0, 4.0)}


class TestCoefficients:
    def test_a0_oracle(self):
        assert coefficient_a_n(B, F, 0, 1.0) == pytest.approx(A0_LINEAR1_GAMMA_T1, rel=1e-10)

    @pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
    def test_a1_is_zero_image(self, t):
        # H_1(z) = 2z turns a_1 into 2 sqrt(pi) times the zero-boundary image density
        assert coefficient_a_n(B, F, 1, t) == pytest.approx(2 * math.sqrt(math.pi) * zero_boundary_image(1.0, F, t),
                                                            rel=1e-9)

    def test_x_side_projection(self):
        # the series is the Hermite expansion of g = e^{-x} on x > 0, zero below
        t = 2.0
        c = scaled_coefficients(B, F, t, 15)
        s = math.sqrt(2 * t)
        for n in range(16):
            proj, _ = quad(lambda u: math.exp(-s * u - u * u) * normalized_hermite(n, u)[n], 0, np.inf,
                           epsabs=1e-14, limit=200)
            assert c[n] == pytest.approx(proj, abs=1e-9 * np.max(np.abs(c)))

    @pytest.mark.parametrize("n", [2, 4])
    def test_even_order_positive_for_constant_boundary(self, n):
        b = General(lambda s: 1.0, "one")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", InstabilityWarning)
            assert coefficient_a_n(b, Exponential(1.0), n, 0.05) > 0

    def test_zero_boundary_rejected(self):
        with pytest.raises(PreconditionError):
            solve_series(Zero(), Exponential(1.0), t=1.0, N=5)

    def test_nonpositive_anchor_rejected(self):
        with pytest.raises(PreconditionError):
            coefficient_a_n(Linear(-1.0), Exponential(1.0), 0, 1.0)


class TestNormalizedHermite:
    def test_matches_physicists(self):
        u = np.linspace(-4, 4, 17)
        h = normalized_hermite(20, u)
        for n in range(21):
            scale = math.sqrt(2.0 ** n * math.factorial(n) * math.sqrt(math.pi))
            np.testing.assert_allclose(h[n] * scale, hermite(n, u), rtol=1e-11, atol=1e-9 * scale)

    def test_no_overflow_at_high_order(self):
        h = normalized_hermite(300, np.array([0.5, 10.0]))
        assert np.all(np.isfinite(h))


class TestSeries:
    @pytest.mark.parametrize("t", [2.0, 4.0])
    def test_frozen_recovery_tolerance(self, series, t):
        x = np.linspace(0, 5, 2001)
        assert np.max(np.abs(series[t](x) - np.exp(-x))) < FROZEN_SUP_ERROR[t]

    def test_interior_improves_with_anchor(self, series):
        x = np.linspace(0.5, 5, 2001)
        err = {t: np.max(np.abs(s(x) - np.exp(-x))) for t, s in series.items()}
        assert err[4.0] < 0.15 and err[4.0] < err[2.0]

    @pytest.mark.parametrize("t", [2.0, 4.0])
    def test_normalization(self, series, t):
        s = series[t]
        assert s.mass() == pytest.approx(1.0, abs=s.est_trunc_error + 1e-3)

    @pytest.mark.xfail(strict=True, reason="zero extension at x = 0 caps the L1 accuracy near 0.35 at N = 40")
    def test_density_recovery_l1(self, series):
        x = np.linspace(0, 5, 4001)
        assert np.trapezoid(np.abs(series[4.0](x) - np.exp(-x)), x) < 1e-2

    @pytest.mark.xfail(strict=True, reason="partial sums at different anchors differ by more than their last terms")
    def test_anchor_invariance(self, series):
        x = np.linspace(0, 5, 401)
        gap = np.max(np.abs(series[2.0](x) - series[4.0](x)))
        assert gap <= series[2.0].est_trunc_error + series[4.0].est_trunc_error + 1e-6

    def test_signed_series_reported(self, series):
        s = series[2.0]
        assert isinstance(s, HermiteSeries) and s.negative_mass() > 0 and not s.is_density()
        assert len(s.coeffs) == s.N + 1

    def test_low_order_kept(self):
        s = solve_series(B, F, t=2.0, N=3)
        assert s.N == 3 and s.est_trunc_error >= 0

    def test_default_anchor_is_candidate(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            assert default_anchor(B, F) in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
