import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import voigt_profile

from starkhole import lineshape
from starkhole.errors import DomainError, QuadratureError
from starkhole.lineshape import (
    HoleShapeQuery,
    branch_angle,
    hole_fwhm,
    hole_shape,
    hole_shape_curve,
    hole_shape_with_error,
    integrand,
    lorentzian,
)
from starkhole.oracle import EnsembleSpec, mc_hole_shape


def direct_quad(x, f_bar):
    """Unsubstituted two-part integral in f, infinite upper limit, via QUADPACK."""
    s = math.sqrt(1 + x * x)
    d = lambda f: 1 - f * f + x * x  # noqa: E731
    lo = quad(lambda f: f * math.exp(-(f / f_bar) ** 2) * math.atan(2 * f / d(f)) if d(f) > 0 else 0.0,
              0, s, epsabs=0, epsrel=1e-12, limit=200)[0]
    hi = quad(lambda f: f * math.exp(-(f / f_bar) ** 2) * (math.pi + math.atan(2 * f / d(f))) if d(f) < 0
              else f * math.exp(-(f / f_bar) ** 2) * math.pi / 2,
              s, np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]
    return 2 / (math.pi**1.5 * f_bar**3) * (lo + hi)


def test_zero_broadening_is_lorentzian():
    assert hole_shape(0.0, 0.0) == 1 / math.pi
    x = np.linspace(-5, 5, 11)
    assert np.array_equal(hole_shape_with_error(x, 5e-5)[0], lorentzian(x))


def test_small_broadening_approaches_lorentzian():
    x = np.linspace(-10, 10, 401)
    h, _ = hole_shape_with_error(x, 1e-3)
    assert np.max(np.abs(h - lorentzian(x))) < 1e-6
    assert hole_shape(0.0, 1e-3) == pytest.approx(1 / math.pi, abs=1e-6)


@pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 2.5, 7.0, 40.0])
@pytest.mark.parametrize("f_bar", [0.01, 0.5, 1.0, 3.0, 12.0])
def test_matches_direct_two_part_integral(x, f_bar):
    assert hole_shape(x, f_bar, 1e-10) == pytest.approx(direct_quad(x, f_bar), rel=1e-8)


@pytest.mark.parametrize("f_bar", [1e-3, 0.25, 1.0, 4.0, 20.0])
def test_matches_voigt_closed_form(f_bar):
    # Averaging over orientation and Maxwell magnitude turns the shift
    # distribution into a Gaussian of variance f_bar**2 / 2.
    x = np.linspace(-60, 60, 241)
    h, _ = hole_shape_with_error(x, f_bar, 1e-10)
    assert np.allclose(h, voigt_profile(x, f_bar / math.sqrt(2), 1.0), rtol=1e-9, atol=0)


@pytest.mark.parametrize("x", [0.5, 1.0, 3.0])
def test_even_in_detuning(x):
    assert hole_shape(x, 1.0) == hole_shape(-x, 1.0)


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-50, 50), f_bar=st.floats(0.0, 30.0))
def test_even_random(x, f_bar):
    a, b = hole_shape(x, f_bar), hole_shape(-x, f_bar)
    assert abs(a - b) <= 1e-8 * a


def test_branch_continuity_at_split():
    for x in [0.0, 0.7, 3.0, 25.0]:
        split = math.sqrt(1 + x * x)
        below = branch_angle(np.nextafter(split, 0), x, upper=False)
        above = branch_angle(np.nextafter(split, np.inf), x, upper=True)
        assert abs(below - above) < 1e-9
        assert branch_angle(split, x, upper=False) == pytest.approx(math.pi / 2, abs=1e-12)
        assert branch_angle(split, x, upper=True) == pytest.approx(math.pi / 2, abs=1e-12)
        for f_bar in [0.3, 2.0]:
            u = split / f_bar
            lo = integrand(u * (1 - 1e-13), x, f_bar, upper=False)
            hi = integrand(u * (1 + 1e-13), x, f_bar, upper=True)
            assert abs(lo - hi) < 1e-9


def test_branch_angle_matches_arctan_difference():
    f = np.linspace(0.01, 10, 500)
    for x in [0.0, 1.5, -4.0]:
        split = math.sqrt(1 + x * x)
        angle = np.where(f < split, branch_angle(f, x, False), branch_angle(f, x, True))
        assert np.allclose(angle, np.arctan(x + f) - np.arctan(x - f), rtol=1e-12, atol=1e-13)


def test_mc_agreement_at_center():
    mc = mc_hole_shape(EnsembleSpec(10**6, 2.0, 7, [0.0]))
    h, err = hole_shape_with_error(np.array([0.0]), 2.0)
    assert abs(mc.mean[0] - h[0]) <= 3 * (mc.stderr[0] + err[0])


def normalization_grid(f_bar, x_max=1e5):
    core = 10.0 + 6.0 * f_bar
    inner = np.arange(-core, core + 1e-9, 0.01)
    outer = core * 1.002 ** np.arange(1, int(math.log(x_max / core) / math.log(1.002)) + 2)
    return np.concatenate([-outer[::-1], inner, outer])


@pytest.mark.parametrize("f_bar", [0.0, 0.1, 1.0, 5.0, 20.0])
def test_unit_area(f_bar):
    # Beyond 1e5 the Lorentzian tail mass 2 / (pi x) is 6.4e-6 < 1e-5.
    x = normalization_grid(f_bar)
    h, _ = hole_shape_with_error(x, f_bar)
    assert abs(np.trapezoid(h, x) - 1.0) < 1e-4


def test_curve_area_with_tail_correction():
    x = np.linspace(-200, 200, 40001)
    h = hole_shape_curve(HoleShapeQuery(x, 5.0))
    tail = 2.0 * (0.5 - math.atan(200.0) / math.pi)
    assert abs(np.trapezoid(h, x) + tail - 1.0) < 1e-4


def test_curve_examples():
    assert hole_shape_curve(HoleShapeQuery([0.0], 0.0))[0] == 1 / math.pi
    x = np.linspace(-8, 8, 33)
    h = hole_shape_curve(HoleShapeQuery(x, 1.0))
    assert np.array_equal(h, h[::-1])
    assert np.array_equal(h, [hole_shape(v, 1.0) for v in x])


def test_query_validation():
    with pytest.raises(DomainError):
        HoleShapeQuery([], 1.0)
    with pytest.raises(DomainError):
        HoleShapeQuery([0.0, np.nan], 1.0)
    with pytest.raises(DomainError):
        HoleShapeQuery([0.0], -1.0)
    with pytest.raises(DomainError):
        HoleShapeQuery([0.0], 1.0, rel_tol=0.1)


def test_evaluation_order_independent():
    x = np.linspace(-20, 20, 81)
    full, _ = hole_shape_with_error(x, 1.7)
    shuffled = np.random.default_rng(3).permutation(x.size)
    part, _ = hole_shape_with_error(x[shuffled], 1.7)
    assert np.array_equal(part, full[shuffled])
    with ThreadPoolExecutor(4) as pool:
        threaded = list(pool.map(lambda v: hole_shape(v, 1.7), x))
    assert np.array_equal(threaded, full)


def test_quadrature_failure_carries_detuning(monkeypatch):
    real = lineshape.quadrature.integrate
    monkeypatch.setattr(lineshape.quadrature, "integrate",
                        lambda *a, **k: real(*a, **{**k, "max_rounds": 0}))
    with pytest.raises(QuadratureError) as info:
        hole_shape_with_error(np.array([0.0, 3.0]), 1.0, 1e-10)
    assert info.value.x in (0.0, 3.0)
    assert info.value.achieved_error > 0


def test_fwhm_limits_and_monotonicity():
    assert hole_fwhm(0.0) == 2.0
    widths = [hole_fwhm(f) for f in (0.5, 1.0, 2.0)]
    assert widths[0] < widths[1] < widths[2]
    sweep = [hole_fwhm(f) for f in np.linspace(0.0, 10.0, 21)]
    assert np.all(np.diff(sweep) > 0)


def test_fwhm_half_maximum_property():
    for f_bar in (0.3, 1.0, 6.0):
        w = hole_fwhm(f_bar)
        assert hole_shape(w / 2, f_bar, 1e-11) == pytest.approx(hole_shape(0.0, f_bar, 1e-11) / 2, rel=1e-9)


def test_fwhm_against_mc_histogram():
    x = np.linspace(0.0, 3.0, 601)
    mc = mc_hole_shape(EnsembleSpec(10**6, 1.0, 11, x))
    half = mc.mean[0] / 2
    k = np.flatnonzero(mc.mean < half)[0]
    x_half = np.interp(half, mc.mean[k - 1:k + 1][::-1], x[k - 1:k + 1][::-1])
    assert hole_fwhm(1.0) == pytest.approx(2 * x_half, rel=0.02)


def test_fwhm_against_voigt_width_formula():
    # Olivero-Longbothum: fV = 0.5346 fL + sqrt(0.2166 fL^2 + fG^2), accurate to 0.02%
    for f_bar in (0.5, 2.0, 10.0):
        f_l, f_g = 2.0, 2.0 * math.sqrt(math.log(2)) * f_bar
        approx = 0.5346 * f_l + math.sqrt(0.2166 * f_l**2 + f_g**2)
        assert hole_fwhm(f_bar) == pytest.approx(approx, rel=3e-4)


def test_fwhm_asymptotically_linear():
    assert hole_fwhm(200.0) / 200.0 == pytest.approx(2 * math.sqrt(math.log(2)), rel=0.01)
