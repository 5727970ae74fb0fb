"""Map representation: composition, inversion, derivatives, conjugacy."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from henonlab import (ComposedMap, DegenerateParameterError,
                      MagnitudeOverflowError, Point2, apply, apply_inverse,
                      as_point, derivative, eig2, from_classical_henon,
                      inverse_composed, iterate, make_map, orbit_derivative)
from henonlab.errors import HenonLabError


def test_single_factor_constant_term(henon_classic):
    out = apply(henon_classic.map, (0, 0))
    assert out.x == 0 and out.y == 1


def test_apply_fixes_fixed_point(henon_classic):
    (x1, _), _ = oracles.classical_fixed_points(1.4, 0.3)
    # tau carries (x, bx) to (x, x)
    z = Point2(x1, x1)
    out = apply(henon_classic.map, z)
    assert abs(out.x - z.x) < 1e-12 and abs(out.y - z.y) < 1e-12


def test_two_stacked_factors_compose():
    f1 = ([0.5, 0.1, 1.0], 0.7)
    f2 = ([0, -0.2, 0, 0.9], -1.1)
    m12 = make_map([f1, f2])
    m1 = make_map([f1])
    m2 = make_map([f2])
    rng = np.random.default_rng(5)
    for _ in range(25):
        z = Point2(*(rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2)))
        a = apply(m12, z)
        b = apply(m2, apply(m1, z))
        assert abs(a.x - b.x) < 1e-12 and abs(a.y - b.y) < 1e-12


def test_inverse_round_trip(henon_classic):
    rng = np.random.default_rng(11)
    m = henon_classic.map
    for _ in range(1000):
        z = Point2(*(rng.uniform(-2, 2, 2) + 1j * rng.uniform(-2, 2, 2)))
        w = apply_inverse(m, apply(m, z))
        scale = max(1.0, z.max_abs())
        assert abs(w.x - z.x) / scale < 1e-10
        assert abs(w.y - z.y) / scale < 1e-10


def test_inverse_formula_fixed_point():
    m = make_map([([0, 0, 1.0], 1.0)])
    out = apply_inverse(m, (0, 0))
    assert out.x == 0 and out.y == 0


def test_composed_inverse_is_reversed_factor_inverses():
    f1 = ([0.3, 0.0, -1.2], 0.4)
    f2 = ([0, 1.0, 0.5, 2.0], 1.5)
    m = make_map([f1, f2])
    m1 = make_map([f1])
    m2 = make_map([f2])
    rng = np.random.default_rng(2)
    for _ in range(50):
        z = Point2(*(rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2)))
        a = apply_inverse(m, z)
        b = apply_inverse(m1, apply_inverse(m2, z))
        assert abs(a.x - b.x) < 1e-10 and abs(a.y - b.y) < 1e-10


def test_derivative_det_is_jac_det(henon_classic):
    m = henon_classic.map
    rng = np.random.default_rng(7)
    for _ in range(100):
        z = Point2(*(rng.uniform(-2, 2, 2) + 1j * rng.uniform(-2, 2, 2)))
        J = derivative(m, z)
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        assert abs(det - m.jac_det) < 1e-12 * abs(m.jac_det)


def test_fixed_point_eigenvalues_match_oracle(henon_classic):
    (x1, _), _ = oracles.classical_fixed_points(1.4, 0.3)
    lam = oracles.eig2x2(oracles.classical_jacobian(1.4, 0.3, x1))
    J = derivative(henon_classic.map, (x1, x1))
    got = sorted(np.linalg.eigvals(J), key=abs)
    assert abs(got[0] - lam[0]) < 1e-10
    assert abs(got[1] - lam[1]) < 1e-10
    # frozen oracle values
    assert abs(lam[1] - (-1.9237388581534067)) < 1e-12
    assert abs(lam[0] - 0.15594632230279395) < 1e-12


def test_chain_rule_over_two_steps(henon_classic):
    m = henon_classic.map
    rng = np.random.default_rng(3)
    for _ in range(20):
        z = Point2(*(rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2)))
        J2 = orbit_derivative(m, z, 2)
        J_manual = derivative(m, apply(m, z)) @ derivative(m, z)
        assert np.max(np.abs(J2 - J_manual)) < 1e-12


def test_from_classical_conjugacy_identity(henon_classic):
    ch = henon_classic
    rng = np.random.default_rng(13)
    for _ in range(1000):
        z = Point2(*(rng.uniform(-2, 2, 2) + 1j * rng.uniform(-2, 2, 2)))
        lhs = apply(ch.map, z)
        rhs = ch.tau.forward(ch.classical_apply(ch.tau.inverse(z)))
        scale = max(1.0, lhs.max_abs())
        assert abs(lhs.x - rhs.x) / scale < 1e-12
        assert abs(lhs.y - rhs.y) / scale < 1e-12


def test_from_classical_basic_fields(henon_classic):
    m = henon_classic.map
    assert m.degree == 2
    assert abs(m.jac_det - (-0.3)) < 1e-15
    assert m.is_real


def test_fixed_points_are_tau_images(henon_classic):
    for (x, y) in oracles.classical_fixed_points(1.4, 0.3):
        w = henon_classic.tau.forward((x, y))
        out = apply(henon_classic.map, w)
        assert abs(out.x - w.x) < 1e-12 and abs(out.y - w.y) < 1e-12


def test_degenerate_parameter():
    with pytest.raises(DegenerateParameterError):
        from_classical_henon(1.4, 0.0)
    with pytest.raises(DegenerateParameterError):
        make_map([([1.0, 2.0], 1.0)])  # degree 1
    with pytest.raises(DegenerateParameterError):
        make_map([([1.0, 0.0, 1.0], 0.0)])  # delta 0


def test_overflow_raises(henon_classic):
    with pytest.raises((MagnitudeOverflowError, OverflowError)):
        z = Point2(0.0, 1e200)
        for _ in range(10):
            z = apply(henon_classic.map, z)


def test_point_rejects_nonfinite():
    with pytest.raises(HenonLabError):
        Point2(float("nan"), 0.0)


def test_inverse_composed_degree_and_det(henon_classic):
    g = inverse_composed(henon_classic.map)
    assert g.degree == henon_classic.map.degree
    assert abs(g.jac_det - 1.0 / henon_classic.map.jac_det) < 1e-14


def test_iterate_negative(henon_classic):
    z = Point2(0.3, -0.2)
    w = iterate(henon_classic.map, iterate(henon_classic.map, z, 3), -3)
    assert abs(w.x - z.x) < 1e-12 and abs(w.y - z.y) < 1e-12


# ---------------------------------------------------------------------------
# property tests
# ---------------------------------------------------------------------------

_coeff = st.floats(-1.5, 1.5).map(lambda v: round(v, 3))
_delta = st.floats(0.1, 1.5).map(lambda v: round(v, 3))


def _factor_strategy():
    return st.tuples(st.lists(_coeff, min_size=3, max_size=4), _delta,
                     st.sampled_from([1, -1])).map(
        lambda t: (_fix_leading(t[0]), t[1] * t[2]))


def _fix_leading(coeffs):
    c = list(coeffs)
    if c[-1] == 0:
        c[-1] = 1.0
    return c


@settings(max_examples=40, deadline=None)
@given(st.lists(_factor_strategy(), min_size=1, max_size=3),
       st.floats(-1.0, 1.0), st.floats(-1.0, 1.0),
       st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_prop_round_trip_and_det(specs, xr, xi, yr, yi):
    m = make_map(specs)
    z = Point2(complex(xr, xi), complex(yr, yi))
    try:
        w = apply(m, z)
        back = apply_inverse(m, w)
    except (MagnitudeOverflowError, OverflowError):
        return
    scale = max(1.0, z.max_abs())
    assert abs(back.x - z.x) / scale < 1e-9
    assert abs(back.y - z.y) / scale < 1e-9
    J = derivative(m, z)
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    assert abs(det - m.jac_det) <= 1e-11 * max(1.0, abs(m.jac_det))


@settings(max_examples=40, deadline=None)
@given(st.lists(_factor_strategy(), min_size=1, max_size=2),
       st.floats(-1.0, 1.0), st.floats(-1.0, 1.0),
       st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_prop_real_map_commutes_with_conjugation(specs, xr, xi, yr, yi):
    m = make_map(specs)
    assert m.is_real
    z = Point2(complex(xr, xi), complex(yr, yi))
    try:
        a = apply(m, z)
        b = apply(m, z.conj()).conj()
    except (MagnitudeOverflowError, OverflowError):
        return
    assert abs(a.x - b.x) <= 1e-12 * max(1.0, abs(a.x))
    assert abs(a.y - b.y) <= 1e-12 * max(1.0, abs(a.y))


@settings(max_examples=30, deadline=None)
@given(st.lists(_factor_strategy(), min_size=1, max_size=2),
       st.lists(_factor_strategy(), min_size=1, max_size=2))
def test_prop_degree_multiplicative(s1, s2):
    m1 = make_map(s1)
    m2 = make_map(s2)
    m = make_map(s1 + s2)
    assert m.degree == m1.degree * m2.degree
    assert abs(m.jac_det - m1.jac_det * m2.jac_det) < 1e-12


def test_eig2_agrees_with_numpy():
    rng = np.random.default_rng(4)
    for _ in range(200):
        M = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        mine = eig2(M)
        ref = sorted(np.linalg.eigvals(M), key=abs)
        assert abs(mine[0] - ref[0]) < 1e-10 * max(1, abs(ref[0]))
        assert abs(mine[1] - ref[1]) < 1e-10 * max(1, abs(ref[1]))
