import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hodovort import maps
from hodovort.errors import DegenerateError, WindowError, ZeroVorticityError
from hodovort.surface import branch_times, double_root_locus
from hodovort.vorticity import (SigmaCoefficients, axial_from_two_form, centered_vorticity,
                                curl_numerator, direction_vector, fit_laurent_series,
                                fit_temporal_exponent, laurent_fit, sigma_coefficients, stress_tensor,
                                temporal_blowup_order, vorticity, vorticity_magnitude,
                                vorticity_on_grid, vorticity_scalar_2d, vorticity_series,
                                vorticity_two_form, vorticity_vector)

NILPOTENT = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, -1.0]])


def _gradient_map_3d():
    # f = grad(phi) with phi = u1^2 u2 + sin(u3) u1 + u2^3 / 3: symmetric Jacobian
    return maps.from_expressions(["2*u1*u2 + sin(u3)", "u1^2 + u2^2", "cos(u3)*u1"], dim=3)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_rotational_closed_form(alpha):
    m = maps.rotational(alpha)
    ts = np.linspace(0, 10, 201)
    got = np.array([vorticity_scalar_2d(m, t, [0.3, -0.2]) for t in ts])
    assert np.max(np.abs(got - 2 * alpha / (alpha ** 2 * ts ** 2 + 1))) <= 1e-12


def test_cubic_closed_form(cubic):
    rng = np.random.default_rng(0)
    for _ in range(50):
        u, t = rng.uniform(-2, 2, 2), rng.uniform(-1, 3)
        want = cubic.references["vorticity"](t, u)
        if abs(want) < 1e6:
            assert vorticity_scalar_2d(cubic, t, u) == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_harmonic_and_analytic_closed_forms():
    for m in (maps.builtin("harmonic", W="exp"), maps.analytic2d("V^3/3 - I*V")):
        rng = np.random.default_rng(1)
        for _ in range(20):
            u, t = rng.uniform(-1, 1, 2), rng.uniform(0, 3)
            assert vorticity_scalar_2d(m, t, u) == pytest.approx(m.references["vorticity"](t, u), rel=1e-9)


def test_two_form_antisymmetric_and_stress_symmetric(cubic):
    rng = np.random.default_rng(2)
    for m in (cubic, maps.constant_jacobian(rng.normal(size=(3, 3))),
              maps.constant_jacobian(rng.normal(size=(4, 4)))):
        u = rng.uniform(-1, 1, m.dim)
        W, S = vorticity_two_form(m, 0.37, u), stress_tensor(m, 0.37, u)
        assert np.array_equal(W, -W.T)
        assert np.array_equal(S, S.T)
        inv = np.linalg.inv(0.37 * np.eye(m.dim) + m.jac(u))
        assert np.allclose(W + S, 2 * inv.T)


def test_gradient_maps_are_irrotational():
    m = _gradient_map_3d()
    rng = np.random.default_rng(3)
    for _ in range(10):
        u = rng.uniform(-1, 1, 3)
        t = rng.uniform(0.5, 2)
        assert np.max(np.abs(vorticity_two_form(m, t, u))) <= 1e-12 * max(1.0, np.max(np.abs(stress_tensor(m, t, u))))
    for t in np.linspace(0, 5, 11):
        assert vorticity_scalar_2d(maps.linear(1.3), t, [0.2, 0.4]) == 0.0


def test_axial_vector_conventions():
    rng = np.random.default_rng(4)
    m = maps.constant_jacobian(rng.normal(size=(3, 3)))
    rec = vorticity_vector(m, 0.8, [0.0, 0.0, 0.0])
    W = rec.omega
    assert np.allclose(rec.vector, axial_from_two_form(W))
    assert np.allclose(rec.vector, curl_numerator(np.linalg.det(0.8 * np.eye(3) + m.jac([0, 0, 0]))
                                                  * np.linalg.inv(0.8 * np.eye(3) + m.jac([0, 0, 0])))
                       / np.linalg.det(0.8 * np.eye(3) + m.jac([0, 0, 0])))
    assert vorticity_magnitude(m, 0.8, [0, 0, 0]) == pytest.approx(np.linalg.norm(rec.vector))
    assert vorticity(m, 0.8, [0, 0, 0]).vector.shape == (3,)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 4))
def test_grid_evaluation_matches_pointwise(u1, u2, t):
    m = maps.cubic()
    u = np.array([u1, u2])
    det = np.linalg.det(t * np.eye(2) + m.jac(u))
    got = vorticity_on_grid(m, t, u[None])[0, 0]
    if abs(det) > 1e-6:
        assert got == pytest.approx(vorticity_scalar_2d(m, t, u), rel=1e-12, abs=1e-12)


def test_sigma_coefficients_match_closed_form(cubic):
    u = np.array([2.0, 1.0])
    for t_b in branch_times(cubic, u).times:
        sc = sigma_coefficients(cubic, u, t_b)
        # 2D residue: omega ~ sigma / (t - t_b) with sigma = (3 - 2/3 u1 u2) / D1
        assert sc.sigma[0] == pytest.approx((3 - 2 / 3 * u[0] * u[1]) / sc.d1, rel=1e-10)
        t = t_b + 1e-7
        assert vorticity_scalar_2d(cubic, t, u) * 1e-7 == pytest.approx(sc.sigma[0], rel=1e-5)


def test_sigma_undefined_at_double_root(cubic):
    p = double_root_locus(cubic, n_points=60)[0]
    with pytest.raises(DegenerateError):
        sigma_coefficients(cubic, p.u, p.t_b)


def test_degree_ladder(cubic):
    u = np.array([2.0, 1.0])
    degs = temporal_blowup_order(cubic, u)
    assert [d.degree for d in degs] == [1, 1]
    p = double_root_locus(cubic, n_points=60)[3]
    (d,) = [d for d in temporal_blowup_order(cubic, p.u) if d.multiplicity == 2]
    assert d.degree == 2
    # f = u: triple root but the adjugate is symmetric, so no vorticity at all
    (iso,) = temporal_blowup_order(maps.isotropic(1.0), [0.1, 0.2, 0.3])
    assert iso.multiplicity == 3 and iso.degree == 0 and iso.rank == 0
    (nil,) = temporal_blowup_order(maps.constant_jacobian(NILPOTENT), [0.0, 0.0, 0.0])
    assert nil.multiplicity == 3 and nil.rank == 2
    assert tuple(nil.component_degrees) == (2, 3, 2) and nil.degree == 3


def test_temporal_fit_slopes(cubic):
    u = np.array([2.0, 1.0])
    for t_b in branch_times(cubic, u).times:
        assert fit_temporal_exponent(cubic, u, t_b).slope == pytest.approx(-1.0, abs=0.03)
    for p in double_root_locus(cubic, n_points=60)[:5]:
        assert fit_temporal_exponent(cubic, p.u, p.t_b).slope == pytest.approx(-2.0, abs=0.05)
    fit = fit_temporal_exponent(maps.constant_jacobian(NILPOTENT), [0.0, 0.0, 0.0], 1.0)
    assert fit.slope == pytest.approx(-3.0, abs=0.1)


def test_temporal_fit_errors(cubic):
    with pytest.raises(WindowError):
        fit_temporal_exponent(maps.rotational(1.0), [0.1, 0.1], 1.0)
    with pytest.raises(WindowError):
        fit_temporal_exponent(cubic, [2.0, 1.0], 0.123)
    with pytest.raises(ZeroVorticityError):
        fit_temporal_exponent(maps.isotropic(1.0), [0.1, 0.2, 0.3], -1.0)


def test_centered_expansion_agrees_with_direct_evaluation(cubic):
    u = np.array([2.0, 1.0])
    t_b, k = branch_times(cubic, u).roots[0]
    om = centered_vorticity(cubic, u, t_b, k)
    for e in (1e-3, -2e-3, 0.05):
        assert om(e)[0] == pytest.approx(vorticity_scalar_2d(cubic, t_b + e, u), rel=1e-7)


def test_laurent_series_of_known_function():
    fit = fit_laurent_series(lambda t: 2 / (t - 5) + 3, 5.0)
    assert fit.coefficients[-1] == pytest.approx(-2.0, rel=1e-9)
    assert fit.coefficients[0] == pytest.approx(3.0, rel=1e-6)
    # c_1 multiplies s <= 1e-3, so rounding in the pole term leaves it least determined
    assert abs(fit.coefficients[1]) <= max(1e-4, fit.uncertainty[1])


def test_laurent_without_pole_is_analytic():
    fit = fit_laurent_series(lambda t: 2 / (1 + t * t), 1.3)
    assert abs(fit.coefficients[-1]) <= 1e-9


def test_gaussian_laurent(gaussian_pieces, gaussian_catastrophe):
    r = gaussian_catastrophe
    m = [p for p in gaussian_pieces if p.branch_label == r.branch_id][0]
    fit = laurent_fit(m, r.u_c, r.t_c)
    assert fit.coefficients[-1] == pytest.approx(0.270466, rel=1e-2)
    assert fit.coefficients[0] == pytest.approx(-0.0747002, rel=1e-2)
    assert fit.coefficients[1] == pytest.approx(0.0206315, rel=5e-2)
    # the leading coefficient is minus the residue in t
    sc = sigma_coefficients(m, r.u_c, r.t_c)
    assert fit.coefficients[-1] == pytest.approx(-sc.sigma[0], rel=1e-6)
    assert set(fit.to_dict()["coefficients"]) == {"-1", "0", "1"}


def test_laurent_refuses_higher_poles(cubic):
    p = double_root_locus(cubic, n_points=60)[0]
    with pytest.raises(DegenerateError):
        laurent_fit(cubic, p.u, p.t_b, order=1)
    assert laurent_fit(cubic, p.u, p.t_b, order=2).pole_order == 2


def test_direction_vector():
    d = direction_vector(np.array([0.0, 3.0, 1e-12]))
    assert np.allclose(d.vector, [0, 1, 0]) and d.subdominant == (1, 3)
    with pytest.raises(ZeroVorticityError):
        direction_vector(np.zeros(3))
    sc = SigmaCoefficients(t_b=1.0, sigma=np.array([1.0, -1.0, 0.0]), sigma_prime=None, d1=1.0, d2=0.0)
    assert np.allclose(direction_vector(sc).vector, [2 ** -0.5, -(2 ** -0.5), 0])


def test_series_rows():
    rows = vorticity_series(maps.rotational(1.0), [0.0, 0.0], [0.0, 1.0])
    assert rows == [[0.0, 2.0], [1.0, 1.0]]
    rows = vorticity_series(maps.linear(1.0), [0.0, 0.0], [-1.0])
    assert np.isnan(rows[0][1])
