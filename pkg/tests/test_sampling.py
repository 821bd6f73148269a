import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conspart.flux import FluxModel
from conspart.reference import fit_order
from conspart.sampling import (InitialCondition, constant, error_density, gaussian_cosine,
                               placement_positions, riemann, sample, sample_adaptive,
                               sample_equidistant, sampling_error)

burgers = FluxModel.burgers()
quartic = FluxModel.quartic()


def poly_ic(c, domain=(0.0, 2.0)):
    p = np.polynomial.Polynomial(c)
    return InitialCondition(p, domain, du0=p.deriv(), ddu0=p.deriv(2))


class TestEquidistant:
    def test_constant(self):
        s = sample_equidistant(constant(0.3, (0.0, 2.0)), 5, quartic)
        np.testing.assert_array_equal(s.u, 0.3)
        np.testing.assert_allclose(np.diff(s.x), 0.5)

    def test_riemann_jump_pair(self):
        s = sample_equidistant(riemann(1.0, 0.0, 0.1, (-1.0, 1.0)), 6, burgers)
        k = np.nonzero(np.diff(s.x) == 0)[0]
        assert len(k) == 1
        assert s.x[k[0]] == 0.1 and s.u[k[0]] == 1.0 and s.u[k[0] + 1] == 0.0
        assert set(s.u) == {0.0, 1.0}

    def test_particles_on_curve(self):
        ic = gaussian_cosine()
        s = sample_equidistant(ic, 100, quartic)
        np.testing.assert_allclose(s.u, ic.u0(s.x), atol=1e-15)

    def test_second_order(self):
        ic = gaussian_cosine()
        ns = [50, 100, 200, 400]
        errs = [sampling_error(sample_equidistant(ic, n, quartic), ic) for n in ns]
        assert 1.8 <= fit_order(ns, errs) <= 2.2

    def test_too_few(self):
        with pytest.raises(ValueError):
            sample_equidistant(constant(0.0), 1, burgers)


class TestErrorDensity:
    def test_linear_data_quadratic_flux(self):
        e = error_density(poly_ic([0.1, 0.5]), burgers, np.linspace(0, 2, 5))
        np.testing.assert_array_equal(e, 0.0)

    def test_burgers_parabola(self):
        # (f'' w'' + f''' w'^2) / (12 f'') with f'' = 1, f''' = 0, w'' = 2
        assert error_density(poly_ic([0, 0, 1]), burgers, np.array([1.0]))[0] == pytest.approx(1 / 6)

    def test_constant_data(self):
        e = error_density(constant(0.4, (0.0, 1.0)), quartic, np.linspace(0, 1, 5))
        np.testing.assert_array_equal(e, 0.0)

    def test_agrees_with_local_error(self):
        # quartic: (3w^2 w'' + 6 w w'^2) / (36 w^2) evaluated by hand
        ic = poly_ic([0.5, 0.2, 0.1])
        x = np.array([0.3, 1.1])
        w, w1, w2 = ic.u0(x), 0.2 + 0.2 * x, 0.2
        expect = (3 * w**2 * w2 + 6 * w * w1**2) / (36 * w**2)
        np.testing.assert_allclose(error_density(ic, quartic, x), expect, rtol=1e-14)


class TestAdaptive:
    def test_uniform_density(self):
        xs = placement_positions(constant(0.4, (0.0, 1.0)), quartic, 11)
        np.testing.assert_allclose(xs, np.linspace(0, 1, 11), atol=1e-12)

    def test_two_particles(self):
        s = sample_adaptive(gaussian_cosine(), 2, quartic)
        np.testing.assert_array_equal(s.x, [-4.0, 4.0])

    @pytest.mark.parametrize("n", [100, 200, 400, 800])
    def test_beats_equidistant(self, n):
        ic = gaussian_cosine()
        eq = sampling_error(sample(ic, n, quartic, "equidistant"), ic)
        ad = sampling_error(sample(ic, n, quartic, "adaptive"), ic)
        assert ad < eq

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            sample(constant(0.0), 4, burgers, "random")

    @settings(max_examples=25, deadline=None)
    @given(st.integers(3, 60), st.floats(0.05, 0.4))
    def test_positions_sorted_within_domain(self, n, amp):
        xs = placement_positions(gaussian_cosine(amplitude=amp), quartic, n)
        assert xs[0] == -4.0 and xs[-1] == 4.0
        assert np.all(np.diff(xs) > 0)
