from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from conspart.flux import FluxModel, make_flux

burgers = FluxModel.burgers()
quartic = FluxModel.quartic()
bl = FluxModel.buckley_leverett()

unit = st.floats(0.0, 1.0, allow_nan=False)


def average_by_quadrature(flux, u1, u2):
    """Independent oracle: int f'' u du / int f'' du."""
    num = quad(lambda s: float(flux.ddf(s)) * s, u1, u2, epsabs=1e-14)[0]
    den = quad(lambda s: float(flux.ddf(s)), u1, u2, epsabs=1e-14)[0]
    return num / den


class TestLegendre:
    def test_burgers_at_one(self):
        assert burgers.legendre(1.0) == 0.5

    @pytest.mark.parametrize("flux", [burgers, quartic, bl])
    def test_zero(self, flux):
        assert flux.legendre(0.0) == 0.0

    def test_quartic_at_one(self):
        # u^4 - u^4/4
        assert quartic.legendre(1.0) == pytest.approx(0.75, abs=1e-15)

    def test_derivative_is_u_times_ddf(self):
        u = np.linspace(0.05, 0.95, 7)
        h = 1e-6
        fd = (bl.legendre(u + h) - bl.legendre(u - h)) / (2 * h)
        np.testing.assert_allclose(fd, u * bl.ddf(u), rtol=1e-7)


class TestNonlinearAverage:
    def test_burgers_is_arithmetic_mean(self):
        assert burgers.nonlinear_average(0.2, 0.8) == pytest.approx(0.5, abs=1e-15)

    def test_equal_arguments(self):
        assert quartic.nonlinear_average(0.7, 0.7) == 0.7

    def test_quartic_unit_interval(self):
        # frozen from average_by_quadrature(quartic, 0, 1)
        assert quartic.nonlinear_average(0.0, 1.0) == pytest.approx(0.75, abs=1e-14)

    @pytest.mark.parametrize("u1,u2", [(0.0, 0.3), (0.1, 0.35), (0.4, 0.9), (0.5, 1.0)])
    def test_matches_quadrature_on_convex_ranges(self, u1, u2):
        assert bl.nonlinear_average(u1, u2) == pytest.approx(
            average_by_quadrature(bl, u1, u2), abs=1e-12)

    @given(unit, unit)
    def test_symmetric_and_between(self, u1, u2):
        a = quartic.nonlinear_average(u1, u2)
        assert a == quartic.nonlinear_average(u2, u1)
        assert min(u1, u2) <= a <= max(u1, u2)

    @given(st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_equals_flux_jump_ratio(self, u1, u2):
        if abs(u1 - u2) < 1e-3:
            return
        expect = (quartic.legendre(u2) - quartic.legendre(u1)) / (quartic.df(u2) - quartic.df(u1))
        assert quartic.nonlinear_average(u1, u2) == pytest.approx(expect, rel=1e-10)

    @settings(max_examples=100)
    @given(st.floats(0.45, 0.95), st.floats(1e-9, 1e-3))
    def test_close_values_against_exact_rationals(self, u1, gap):
        # [F]/[f'] in exact arithmetic; near-equal values cancel in floating point
        u2 = u1 + gap
        a, b = Fraction(u1), Fraction(u2)
        m = Fraction(1, 2)
        f = lambda u: u * u / (u * u + m * (1 - u) ** 2)
        df = lambda u: 2 * m * u * (1 - u) / (u * u + m * (1 - u) ** 2) ** 2
        expect = (df(b) * b - f(b) - df(a) * a + f(a)) / (df(b) - df(a))
        got = bl.nonlinear_average(u1, u2)
        assert abs(got - float(expect)) <= 1e-13 * gap + 4 * np.spacing(u2)

    @settings(max_examples=50)
    @given(st.floats(0.0, 0.9), st.floats(0.01, 0.1))
    def test_partials_match_finite_differences(self, u1, gap):
        u2 = u1 + gap
        p1, p2 = quartic.average_partials(u1, u2)
        h = 1e-7
        fd1 = (quartic.nonlinear_average(u1 + h, u2) - quartic.nonlinear_average(u1 - h, u2)) / (2 * h)
        fd2 = (quartic.nonlinear_average(u1, u2 + h) - quartic.nonlinear_average(u1, u2 - h)) / (2 * h)
        assert p1 == pytest.approx(fd1, abs=1e-5)
        assert p2 == pytest.approx(fd2, abs=1e-5)


class TestInflection:
    def test_burgers_has_none(self):
        assert burgers.inflection_points(0.0, 1.0) == []

    def test_quartic_positive_range_has_none(self):
        assert quartic.inflection_points(0.1, 1.0) == []

    def test_buckley_leverett_single_sign_change(self):
        pts = bl.inflection_points(0.0, 1.0)
        assert len(pts) == 1
        us = pts[0]
        assert bl.ddf(us - 1e-6) * bl.ddf(us + 1e-6) < 0

    def test_bad_interval(self):
        with pytest.raises(ValueError):
            bl.inflection_points(1.0, 0.0)

    def test_convexity_sign(self):
        us = bl.inflection_values[0]
        assert bl.convexity_sign(0.0, us) == 1
        assert bl.convexity_sign(us, 1.0) == -1
        assert bl.negated().convexity_sign(0.0, us) == -1


class TestDerivatives:
    @pytest.mark.parametrize("flux", [quartic, bl, FluxModel.polynomial([0, 0.1, 0.5, 0.2])])
    def test_analytic_derivatives(self, flux):
        u = np.linspace(0.05, 0.95, 9)
        h = 1e-6
        np.testing.assert_allclose((flux.f(u + h) - flux.f(u - h)) / (2 * h), flux.df(u),
                                   rtol=1e-7, atol=1e-9)
        np.testing.assert_allclose((flux.df(u + h) - flux.df(u - h)) / (2 * h), flux.ddf(u),
                                   rtol=1e-6, atol=1e-8)

    def test_invert_df(self):
        v = bl.invert_df(bl.df(0.2), 0.0, bl.inflection_values[0])
        assert v == pytest.approx(0.2, abs=1e-12)
        assert quartic.invert_df(0.5, 0.0, 1.0) == pytest.approx(0.5 ** (1 / 3), abs=1e-15)

    def test_reflected_flux(self):
        c = bl.inflection_values[0]
        r = bl.reflected(c)
        u = np.linspace(0.0, 0.5, 5)
        np.testing.assert_allclose(r.ddf(u), -bl.ddf(2 * c - u), atol=1e-12)


def test_make_flux_catalog():
    assert make_flux("burgers").name == "burgers"
    assert make_flux("buckley-leverett").inflection_values
    with pytest.raises(ValueError):
        make_flux("nope")
    with pytest.raises(ValueError):
        make_flux("polynomial")
