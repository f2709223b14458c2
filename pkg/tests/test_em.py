import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from nsi_ibp import (Interval, ObservationPoint, RwgPair, electrostatic_integral, gauss_legendre_rule,
                     green_kernel_inner, kernel_case, rwg_convolution, rwg_current, rwg_oracle)
from nsi_ibp.em import FOUR_PI, in_triangle, relative_error, rwg_current_masked
from nsi_ibp.errors import DivergenceError, DomainError, InvalidArgumentError

PAIR = RwgPair.unit_square(1.0)
STATIC = RwgPair.unit_square(0.0)


# geometry and current

def test_pair_geometry():
    assert PAIR.area_plus == PAIR.area_minus == 0.5
    assert PAIR.edge_length == math.sqrt(2)
    with pytest.raises(InvalidArgumentError):
        RwgPair(k=-1.0)


def test_current_examples():
    assert_allclose(rwg_current(PAIR, 0.0, 0.0), [0.0, 0.0], atol=0)
    assert_allclose(rwg_current(PAIR, 0.5, 0.25), math.sqrt(2) * np.array([0.5, 0.25]), rtol=1e-15)
    assert_allclose(rwg_current(PAIR, 1.0, 1.0, "minus"), [0.0, 0.0], atol=0)
    with pytest.raises(DomainError):
        rwg_current(PAIR, 0.8, 0.8)


def test_current_normal_component_continuous_across_shared_edge():
    # flux through the diagonal is the same from both sides
    n = np.array([1.0, 1.0]) / math.sqrt(2)
    for t in np.linspace(0.0, 1.0, 5):
        p = np.array([t, 1 - t])
        assert_allclose(rwg_current(PAIR, *p) @ n, rwg_current(PAIR, *p, "minus") @ n, rtol=1e-14)


def test_support_masking_is_exact_zero():
    x = np.array([0.9, 0.6, -0.1, 0.2])
    y = np.array([0.9, 0.6, 0.5, 0.2])
    vals = rwg_current_masked(PAIR, x, y, "plus", "x")
    assert np.all(vals[:3] == 0.0)
    assert vals[3] != 0.0
    assert list(in_triangle(x, y, "minus")) == [True, True, False, False]


def test_kernel_case():
    kc = kernel_case(ObservationPoint(0.3, 0.4, 0.2), 0.1)
    assert_allclose(kc.R0, math.hypot(0.3, 0.2), rtol=1e-15)
    assert (kc.inner_interval.a, kc.inner_interval.b) == (0.0, 0.9)
    assert kernel_case(ObservationPoint(0.3, 0.4), 1.0).inner_interval is None


# electrostatic kernel

def test_electrostatic_unit_ratio():
    assert abs(electrostatic_integral(0.1) - math.log(1 + math.sqrt(2))) < 1e-4 * math.log(1 + math.sqrt(2))
    assert_allclose(electrostatic_integral(0.1, method="conventional"), math.log(1 + math.sqrt(2)), rtol=1e-15)


def test_electrostatic_empty_interval():
    assert electrostatic_integral(0.3, (0.0, 0.0)) == 0.0
    with pytest.raises(InvalidArgumentError):
        electrostatic_integral(0.0)


@pytest.mark.parametrize("d", [0.1, 0.15, 0.2])
@pytest.mark.parametrize("r", [0.0, 1.0, 10.0, 50.0])
def test_electrostatic_sweep_cells(d, r):
    o = r * d
    ref = math.asinh((d + o) / d) - math.asinh(o / d)
    assert abs(electrostatic_integral(d, offset=o) - ref) < 1e-4 * ref


# inner integral

def test_inner_reduces_to_electrostatic():
    obs = ObservationPoint(0.0, 0.1)
    val = green_kernel_inner(obs, STATIC, 0.0, "unit")
    assert_allclose(val.real, electrostatic_integral(0.1, (0.0, 1.0), method="conventional") / FOUR_PI, rtol=1e-12)
    assert val.imag == 0.0


@pytest.mark.parametrize("xo,yo", [(0.3, 0.4), (0.05, 0.95), (-0.2, 0.5), (1.3, -0.2)])
def test_reduction_chain_pointwise(xo, yo, kernel_backend):
    obs = ObservationPoint(xo, yo)
    for y in np.linspace(0.013, 0.987, 8):
        R = abs(yo - y)
        ref = electrostatic_integral(R, (-xo, 1 - y - xo), method="conventional") / FOUR_PI
        assert_allclose(green_kernel_inner(obs, STATIC, y, "unit").real, ref, rtol=1e-12)


def _mp_inner(obs, y, k, comp):
    c = math.sqrt(2)
    def f(x):
        r = mp.sqrt((x - obs.x) ** 2 + (y - obs.y) ** 2 + obs.z ** 2)
        J = c * (x if comp == "x" else y)
        return mp.exp(-1j * k * r) / (4 * mp.pi * r) * J
    with mp.workdps(30):
        pts = sorted({0.0, 1 - y, min(max(obs.x, 0.0), 1 - y)})
        return complex(mp.quad(f, pts))


@pytest.mark.parametrize("comp", ["x", "y"])
@pytest.mark.parametrize("xo,yo,y", [(0.35, 0.45, 0.2), (0.35, 0.45, 0.449), (0.7, 0.1, 0.1 + 1e-7),
                                     (1.2, 0.5, 0.5 - 1e-9), (0.5, 0.5, 0.3), (-0.3, 0.2, 0.6)])
def test_inner_against_mpmath(xo, yo, y, comp, kernel_backend):
    obs = ObservationPoint(xo, yo)
    got = green_kernel_inner(obs, PAIR, y, comp)
    ref = _mp_inner(obs, y, 1.0, comp)
    # the second-derivative residual has a bump of width R beside x'; rows with R ~ 1e-7..1e-5
    # lose a few digits (about R^2 ln R), which the outer integral does not feel
    assert abs(got - ref) < 1e-10 * abs(ref)


def test_inner_on_observation_row_diverges():
    with pytest.raises(DivergenceError):
        green_kernel_inner(ObservationPoint(0.3, 0.4), PAIR, 0.4, "x")


def test_inner_empty_row():
    assert green_kernel_inner(ObservationPoint(0.3, 0.4), PAIR, 1.0, "x") == 0j


# full convolution

def test_static_unit_result_is_real(kernel_backend):
    val = rwg_convolution(ObservationPoint(0.35, 0.25), STATIC, "unit")
    assert abs(val.imag) < 1e-14


def _plain_2d(obs, pair, comp, n=40, panels=8):
    rule = gauss_legendre_rule(n, panels)
    ys, wy = rule.abscissae(Interval(0.0, 1.0))
    total = 0j
    for y, w in zip(ys, wy):
        xs, wx = rule.abscissae(Interval(0.0, 1.0 - y))
        r = np.sqrt((xs - obs.x) ** 2 + (y - obs.y) ** 2 + obs.z ** 2)
        J = math.sqrt(2) * (xs if comp == "x" else np.full_like(xs, y))
        total += w * np.sum(wx * np.exp(-1j * pair.k * r) / (FOUR_PI * r) * J)
    return total


def test_far_observation_matches_plain_quadrature(kernel_backend):
    obs = ObservationPoint(10.0, 0.5)
    for comp in ("x", "y"):
        got = rwg_convolution(obs, PAIR, comp)
        assert relative_error(got, _plain_2d(obs, PAIR, comp)) < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.floats(0.02, 0.98), st.floats(0.02, 0.98))
def test_reflection_symmetry(x, y):
    # the plus triangle is symmetric about x = y, which swaps J_x and J_y
    a = rwg_convolution(ObservationPoint(x, y), PAIR, "x")
    b = rwg_convolution(ObservationPoint(y, x), PAIR, "y")
    assert abs(a - b) < 1e-8 * abs(a)


def test_minus_triangle_symmetry():
    # the minus triangle is symmetric about x = y as well, with v- = (1, 1) on the axis
    for x, y in [(0.7, 0.6), (0.35, 0.85), (0.95, 0.15)]:
        a = rwg_convolution(ObservationPoint(x, y), PAIR, "x", triangle="minus")
        b = rwg_convolution(ObservationPoint(y, x), PAIR, "y", triangle="minus")
        assert abs(a - b) < 1e-8 * abs(a)


def test_point_reflection_maps_plus_to_minus():
    # (x, y) -> (1 - x, 1 - y) maps plus onto minus; the RWG current keeps its direction
    for x, y in [(0.25, 0.35), (0.65, 0.15), (0.55, 0.55)]:
        a = rwg_convolution(ObservationPoint(x, y), PAIR, "x")
        b = rwg_convolution(ObservationPoint(1 - x, 1 - y), PAIR, "x", triangle="minus")
        assert abs(a - b) < 1e-8 * abs(a)


@pytest.mark.parametrize("xo,yo", [(0.05, 0.05), (0.35, 0.25), (0.45, 0.45), (0.95, 0.95), (0.65, 0.05)])
def test_grid_cells_against_oracle(xo, yo, kernel_backend):
    obs = ObservationPoint(xo, yo)
    assert relative_error(rwg_convolution(obs, PAIR, "x"), rwg_oracle(obs, PAIR, "x")) < 1e-6


@pytest.mark.parametrize("obs", [ObservationPoint(0.3, 0.3, 0.05), ObservationPoint(0.5, 0.5, 1e-3),
                                 ObservationPoint(0.0, 0.0), ObservationPoint(1.0, 0.0), ObservationPoint(0.2, 0.8)])
def test_off_plane_and_vertex_points(obs, kernel_backend):
    for comp in ("x", "y"):
        got = rwg_convolution(obs, PAIR, comp)
        ref = rwg_oracle(obs, PAIR, comp, n_points=400_000)
        assert relative_error(got, ref) < 1e-6


def test_outer_rule_refinement_is_stable():
    obs = ObservationPoint(0.35, 0.55)
    a = rwg_convolution(obs, PAIR, "y")
    b = rwg_convolution(obs, PAIR, "y", outer_rule=gauss_legendre_rule(16, 24),
                        inner_rule=gauss_legendre_rule(16, 40))
    assert relative_error(a, b) < 1e-12
