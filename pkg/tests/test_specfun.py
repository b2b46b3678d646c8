import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfpt import specfun
from rfpt.errors import DomainError

# Frozen oracle values from mpmath at 30 digits (hermite, pcfd, besseli, hyp2f1).
H10_AT_1_3 = -66123.4130330624
D_MINUS1_AT_1 = 0.510643741079660674895037967391
D_MINUS2_AT_1 = 0.268157041991744193350132299588
I_3HALF_AT_2_5 = 1.87327838883761888852719131629
HYP2F1_05_15_12_03 = 1.25371666532769272908694239441


def hermite_by_derivatives(n, x):
    """H_n(x) = (-1)^n e^{x^2} d^n/dx^n e^{-x^2}, expanded from the explicit sum."""
    total = 0
    for m in range(n // 2 + 1):
        total += (-1) ** m * math.factorial(n) / (math.factorial(m) * math.factorial(n - 2 * m)) * (2 * x) ** (n - 2 * m)
    return total


class TestHermite:
    def test_constant(self):
        assert specfun.hermite(0, 7.3) == 1.0

    def test_linear(self):
        assert specfun.hermite(1, 2.0) == 4.0

    def test_degree_ten(self):
        v = specfun.hermite(10, 1.3)
        assert v == pytest.approx(H10_AT_1_3, rel=1e-13)
        assert v == pytest.approx(hermite_by_derivatives(10, 1.3), rel=1e-12)

    def test_array_input(self):
        x = np.linspace(-2, 2, 7)
        np.testing.assert_allclose(specfun.hermite(3, x), 8 * x ** 3 - 12 * x, rtol=1e-14, atol=1e-13)

    def test_hermite_all_matches_single(self):
        x = np.linspace(-3, 3, 11)
        rows = specfun.hermite_all(12, x)
        for n in range(13):
            np.testing.assert_array_equal(rows[n], specfun.hermite(n, x))

    def test_negative_degree(self):
        with pytest.raises(DomainError):
            specfun.hermite(-1, 0.0)

    @given(n=st.integers(1, 29), x=st.integers(-40, 40).map(lambda k: k / 4))
    def test_recurrence_exact(self, n, x):
        # quarter-integer points keep every intermediate product representable
        lhs = specfun.hermite(n + 1, x)
        rhs = 2 * x * specfun.hermite(n, x) - 2 * n * specfun.hermite(n - 1, x)
        assert lhs == rhs

    @pytest.mark.parametrize("m", range(9))
    def test_orthogonality(self, m):
        # a 20-node Gauss-Hermite rule integrates degree <= 39 polynomials exactly
        nodes, wts = np.polynomial.hermite.hermgauss(20)
        for n in range(9):
            v = float(np.dot(wts, specfun.hermite(m, nodes) * specfun.hermite(n, nodes)))
            v /= math.sqrt(math.pi) * 2 ** n * math.factorial(n)
            assert v == pytest.approx(1.0 if m == n else 0.0, abs=1e-8)

    @settings(max_examples=200)
    @given(n=st.integers(0, 40), x=st.floats(-15, 15))
    def test_bound_holds(self, n, x):
        assert abs(specfun.hermite(n, x)) <= specfun.hermite_bound(n, x) * (1 + 1e-12)

    def test_compensated_sum_cancellation(self):
        assert specfun.compensated_sum([1e20, 1.0, -1e20]) == 1.0


class TestParabolicCylinder:
    def test_order_zero(self):
        assert specfun.parabolic_cylinder(0, 1.0).value == pytest.approx(math.exp(-0.25), rel=1e-15)

    def test_integral_route(self):
        r = specfun.parabolic_cylinder(-1, 1.0)
        assert r.converged
        assert r.value == pytest.approx(D_MINUS1_AT_1, rel=1e-12)
        assert specfun.parabolic_cylinder(-2, 1.0).value == pytest.approx(D_MINUS2_AT_1, rel=1e-12)

    @pytest.mark.parametrize("z", np.linspace(-3, 3, 13))
    def test_order_one_hermite_form(self, z):
        expect = 2 ** -0.5 * math.exp(-z * z / 4) * 2 * (z / math.sqrt(2))
        assert specfun.parabolic_cylinder(1, z).value == pytest.approx(expect, rel=1e-14, abs=1e-16)

    @pytest.mark.parametrize("p,z", [(-0.5, 0.3), (-2.5, -1.5), (-4.0, 2.0), (-1.3, -4.0)])
    def test_against_mpmath_values(self, p, z):
        import mpmath
        assert specfun.parabolic_cylinder(p, z).value == pytest.approx(float(mpmath.pcfd(p, z)), rel=1e-11)

    def test_bridge_between_routes(self):
        # D_{p+1}(z) - z D_p(z) + p D_{p-1}(z) = 0 links the integer route to the integral route
        z = 0.7
        d0 = specfun.parabolic_cylinder(0, z).value
        dm1 = specfun.parabolic_cylinder(-1, z).value
        dm2 = specfun.parabolic_cylinder(-2, z).value
        assert d0 - z * dm1 - dm2 == pytest.approx(0.0, abs=1e-13)

    def test_positive_non_integer_rejected(self):
        with pytest.raises(DomainError):
            specfun.parabolic_cylinder(0.5, 1.0)


class TestBessel:
    def test_at_origin(self):
        assert specfun.bessel_i(0, 0).value == 1.0

    def test_half_order_example(self):
        assert specfun.bessel_i(0.5, 1.0).value == pytest.approx(2 * math.sinh(1) / math.sqrt(2 * math.pi), rel=1e-14)

    def test_three_halves(self):
        assert specfun.bessel_i(1.5, 2.5).value == pytest.approx(I_3HALF_AT_2_5, rel=1e-13)

    @pytest.mark.parametrize("u", np.linspace(0.05, 10, 40))
    def test_half_order_identity(self, u):
        assert specfun.bessel_i(0.5, u).value == pytest.approx(2 * math.sinh(u) / math.sqrt(2 * math.pi * u), rel=1e-10)

    @pytest.mark.parametrize("nu,x", [(0.0, 29.0), (0.0, 31.0), (2.5, 32.4), (7.0, 80.0), (0.25, 500.0),
                                      (40.5, 10.0), (-0.5, 3.0), (-0.25, 0.2)])
    def test_against_mpmath_both_regimes(self, nu, x):
        import mpmath
        expect = float(mpmath.log(mpmath.besseli(nu, x)) - x)
        assert float(specfun.log_bessel_i_scaled(nu, x)) == pytest.approx(expect, rel=1e-12, abs=1e-13)

    def test_vectorized_scaled(self):
        x = np.array([0.5, 5.0, 50.0, 5000.0])
        v = specfun.bessel_i_scaled(1.5, x)
        import mpmath
        ref = [float(mpmath.besseli(1.5, xi) * mpmath.exp(-xi)) for xi in x]
        np.testing.assert_allclose(v, ref, rtol=1e-12)

    def test_overflow_flags(self):
        r = specfun.bessel_i(0.0, 1000.0)
        assert not r.converged and math.isinf(r.value)


class TestPochhammer:
    def test_empty_product(self):
        assert specfun.pochhammer(5.5, 0) == 1.0

    def test_factorial(self):
        assert specfun.pochhammer(1, 4) == 24.0

    def test_hits_zero(self):
        assert specfun.pochhammer(-2, 4) == 0.0

    @given(z=st.floats(0.01, 50), n=st.integers(0, 60))
    def test_gamma_ratio(self, z, n):
        expect = math.exp(math.lgamma(z + n) - math.lgamma(z))
        assert specfun.pochhammer(z, n) == pytest.approx(expect, rel=1e-12)


class TestHypergeometric:
    def test_constant_term(self):
        assert specfun.hypergeometric([0.3, 0.7], [1.1], 0.0).value == 1.0

    @pytest.mark.parametrize("x", np.linspace(0, 3, 13))
    def test_exponential(self, x):
        assert specfun.hypergeometric([1], [1], x).value == pytest.approx(math.exp(x), rel=1e-14)

    def test_gauss_series(self):
        r = specfun.hypergeometric([0.5, 1.5], [1.2], 0.3)
        assert r.converged
        assert r.value == pytest.approx(HYP2F1_05_15_12_03, rel=1e-14)

    def test_kummer_negative_argument(self):
        import mpmath
        assert specfun.hypergeometric([1.0], [2.5], -4.0).value == pytest.approx(float(mpmath.hyp1f1(1, 2.5, -4)), rel=1e-12)

    def test_terminating(self):
        # 2F1(-2, b; c; x) is a quadratic polynomial
        b, c, x = 1.5, 2.0, 0.4
        expect = 1 - 2 * b / c * x + b * (b + 1) / (c * (c + 1)) * x * x
        assert specfun.hypergeometric([-2, b], [c], x).value == pytest.approx(expect, rel=1e-15)

    def test_gauss_outside_disc(self):
        with pytest.raises(DomainError):
            specfun.hypergeometric([0.5, 1.5], [1.2], 1.0)

    def test_divergent_type(self):
        with pytest.raises(DomainError):
            specfun.hypergeometric([1, 1, 1], [1], 0.1)

    def test_bad_denominator(self):
        with pytest.raises(DomainError):
            specfun.hypergeometric([1.5], [-2.0], 0.5)
