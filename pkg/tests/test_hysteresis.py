import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from hystrelax.hysteresis import (
    Band,
    band_hausdorff,
    implicit_yosida_step,
    project,
    subdiff_contains,
    yosida_force,
)

B = Band(0.2, 0.8)


def test_band_validation():
    Band(0.3, 0.3)
    for lo, hi in [(-0.1, 0.5), (0.6, 0.5), (0.2, 1.1)]:
        with pytest.raises(ValueError):
            Band(lo, hi)
    assert Band(0.4, 0.4).degenerate and not B.degenerate


@pytest.mark.parametrize(
    "sigma,band,mu,expected",
    [(0.5, B, 0.01, 0.0), (0.9, B, 0.01, 10.0), (0.1, B, 0.05, -2.0)],
)
def test_yosida_force_examples(sigma, band, mu, expected):
    assert yosida_force(sigma, band, mu) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("mu", [0.0, -1.0])
def test_yosida_force_rejects_nonpositive_mu(mu):
    with pytest.raises(ValueError):
        yosida_force(0.5, B, mu)


@pytest.mark.parametrize(
    "sigma,band,expected", [(0.5, B, 0.5), (1.3, B, 0.8), (-0.4, Band(0.0, 1.0), 0.0)]
)
def test_project_examples(sigma, band, expected):
    assert project(sigma, band) == expected


@pytest.mark.parametrize(
    "sigma,force,expected", [(0.5, 0.0, True), (0.8, 7.0, True), (0.5, 1.0, False)]
)
def test_subdiff_examples(sigma, force, expected):
    assert subdiff_contains(sigma, B, force, tol=1e-9) is expected


def test_subdiff_case_table():
    # lower face admits (-inf, 0], outside the band nothing, degenerate band everything
    assert subdiff_contains(0.2, B, -3.0)
    assert not subdiff_contains(0.2, B, 3.0)
    assert not subdiff_contains(0.8, B, -3.0)
    assert not subdiff_contains(0.95, B, 1.0)
    deg = Band(0.4, 0.4)
    assert subdiff_contains(0.4, deg, -1e6) and subdiff_contains(0.4, deg, 1e6)


def test_subdiff_vectorized():
    sig = np.array([0.5, 0.8, 0.2])
    out = subdiff_contains(sig, (np.full(3, 0.2), np.full(3, 0.8)), np.array([0.0, 1.0, 1.0]))
    assert out.tolist() == [True, True, False]


def _bisection_oracle(rhs, lo, hi, mu, dt):
    def resid(s):
        return s + dt / mu * (max(s - hi, 0.0) - max(lo - s, 0.0)) - rhs

    return brentq(resid, -10.0, 10.0, xtol=1e-15, rtol=1e-15)


def test_implicit_step_examples():
    assert implicit_yosida_step(0.5, B, 0.01, 0.001) == 0.5
    assert implicit_yosida_step(0.9, B, 0.01, 0.01) == pytest.approx(0.85, abs=1e-14)
    assert implicit_yosida_step(0.9, B, 0.01, 0.01) == pytest.approx(
        _bisection_oracle(0.9, 0.2, 0.8, 0.01, 0.01), abs=1e-13
    )


@pytest.mark.parametrize("rhs", [-0.5, 0.1, 0.5, 0.95, 2.0])
def test_implicit_step_projection_limit(rhs):
    assert implicit_yosida_step(rhs, B, 1.0, 1e8) == pytest.approx(project(rhs, B), abs=1e-6)


def test_implicit_step_degenerate_band_collapses():
    assert implicit_yosida_step(0.9, Band(0.4, 0.4), 1e-6, 1.0) == pytest.approx(0.4, abs=1e-5)
    assert project(0.9, Band(0.4, 0.4)) == 0.4


def test_band_hausdorff():
    assert band_hausdorff(Band(0.1, 0.5), Band(0.2, 0.9)) == pytest.approx(0.4)


# subnormal band ends would underflow the force to zero
unit = st.floats(0, 1, allow_subnormal=False)
bands = st.tuples(unit, unit).map(lambda p: Band(min(p), max(p)))
reals = st.floats(-3, 3, allow_subnormal=False)
mus = st.floats(1e-4, 10)


@settings(max_examples=300, deadline=None)
@given(reals, bands, mus)
def test_force_zero_iff_in_band(sigma, band, mu):
    inside = band.lo <= sigma <= band.hi
    assert (yosida_force(sigma, band, mu) == 0.0) == inside


@settings(max_examples=300, deadline=None)
@given(reals, reals, bands, mus)
def test_force_monotone(a, b, band, mu):
    lo, hi = min(a, b), max(a, b)
    assert yosida_force(lo, band, mu) <= yosida_force(hi, band, mu) + 1e-12


@settings(max_examples=300, deadline=None)
@given(reals, bands, mus, st.floats(1e-6, 10))
def test_resolvent_consistency(rhs, band, mu, dt):
    s = implicit_yosida_step(rhs, band, mu, dt)
    assert s + dt * yosida_force(s, band, mu) == pytest.approx(rhs, abs=1e-12 * max(1.0, dt / mu))


@settings(max_examples=300, deadline=None)
@given(reals, reals, bands)
def test_projection_nonexpansive(a, b, band):
    assert abs(project(a, band) - project(b, band)) <= abs(a - b) + 1e-15


@settings(max_examples=200, deadline=None)
@given(reals, bands, st.floats(0, 5))
def test_projection_residual_in_normal_cone(sigma, band, dt):
    # sigma - project(sigma) is a valid selection of the subdifferential at the projection
    p = project(sigma, band)
    assert subdiff_contains(p, band, sigma - p, tol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 2), st.floats(0, 2), st.floats(0, 2), st.floats(0, 2))
def test_budworm_band_lipschitz_transport(v1, w1, v2, w2):
    # f_hi = 1/(1+v), f_lo = f_hi/(1+w) are 1-Lipschitz in each argument on the nonnegative box
    def band(v, w):
        hi = 1.0 / (1.0 + v)
        return Band(hi / (1.0 + w), hi)

    assert band_hausdorff(band(v1, w1), band(v2, w2)) <= 1.0 * (abs(v1 - v2) + abs(w1 - w2)) + 1e-14
