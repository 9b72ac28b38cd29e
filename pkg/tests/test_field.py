import numpy as np
import pytest

from hodovort import maps
from hodovort.errors import BranchViolation, HodographError, NoConvergence, NotAvailable, SingularNewton
from hodovort.field import (characteristics_check, fd_curl, fd_gradient, foot_point, newton,
                            read_binary, solve_grid, solve_point)
from hodovort.vorticity import vorticity_two_form

X_C = np.array([0.759774, 0.77468])


def test_linear_map_solution():
    s = solve_point(maps.linear(1.0), [1.0, 2.0], 1.0)
    assert np.allclose(s.u, [0.5, 1.0])


def test_newton_round_trip(cubic):
    rng = np.random.default_rng(0)
    errors = []
    for _ in range(1000):
        u = rng.uniform(-2, 2, 2)
        t = rng.uniform(-1, 3)
        M = t * np.eye(2) + cubic.jac(u)
        if abs(np.linalg.det(M)) < 1e-2 * max(1.0, np.linalg.norm(M)) ** 2:
            continue
        x = u * t + cubic.value(u)
        got, residual, _ = newton(cubic, x, t, u + rng.normal(scale=1e-3, size=2))
        errors.append(np.max(np.abs(got - u)))
    assert len(errors) > 800
    assert max(errors) <= 1e-8


def test_newton_reports_failures():
    with pytest.raises((SingularNewton, NoConvergence)):
        newton(maps.linear(1.0), [1.0, 1.0], -1.0, [0.2, 0.3])


def test_gaussian_initial_data(gaussian_pieces):
    s = solve_point(gaussian_pieces, [1.0, 1.0], 0.0)
    assert np.allclose(s.u, [np.exp(-2), np.exp(-4)]) and s.branch_id == "++"
    rng = np.random.default_rng(1)
    for x in rng.uniform(-2, 2, (40, 2)):
        s = solve_point(gaussian_pieces, x, 0.0)
        assert np.allclose(s.u, maps._gaussian_u0(x), atol=1e-10)


def test_branch_restriction(gaussian_pieces):
    # the (-,-) piece only reaches x1, x2 < 0 at t = 0
    with pytest.raises(HodographError):
        solve_point(gaussian_pieces, [1.0, 1.0], 0.0, branch="--")
    with pytest.raises(ValueError):
        solve_point(gaussian_pieces, [1.0, 1.0], 0.0, branch="??")


def test_foot_point_of_rotation():
    m = maps.rotational(1.0)
    x, t = np.array([0.4, -0.3]), 1.2
    xi = foot_point(m.initial_data, x, t)
    assert np.allclose(xi + t * m.initial_data(xi), x)


def test_characteristics(gaussian_pieces):
    rng = np.random.default_rng(2)
    for m, t in ((gaussian_pieces, 0.4), (maps.rotational(2.0), 1.7)):
        for x in rng.uniform(-1.5, 1.5, (20, 2)):
            assert characteristics_check(m, x, t) <= 1e-8
    with pytest.raises(NotAvailable):
        characteristics_check(maps.cubic(), [0.0, 0.0], 0.0)


def test_fd_gradient_matches_inverse(cubic):
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(60):
        u, t = rng.uniform(-2, 2, 2), rng.uniform(0, 2)
        M = t * np.eye(2) + cubic.jac(u)
        if abs(np.linalg.det(M)) <= 1e-3:
            continue
        x = u * t + cubic.value(u)
        s = solve_point(cubic, x, t, seed=u)
        assert np.max(np.abs(fd_gradient(cubic, x, t, sample=s) - np.linalg.inv(M))) <= 1e-6
        assert np.allclose(fd_curl(cubic, x, t, sample=s), vorticity_two_form(cubic, t, s.u), atol=1e-5)
        checked += 1
    assert checked > 40


@pytest.mark.parametrize("t", [0.0, 2.0, 7.5])
def test_rotational_grid_matches_closed_form(t):
    m = maps.rotational(1.0)
    g = solve_grid(m, [(-2, 2, 21), (-2, 2, 21)], t)
    assert not g.mask.any()
    assert np.max(np.abs(g.u - m.references["solution"](g.points(), t))) <= 1e-10


def test_grid_is_independent_of_workers(gaussian_pieces):
    axes = [(-1, 1.5, 11), (-1, 1.5, 9)]
    a = solve_grid(gaussian_pieces, axes, 0.5, workers=1)
    b = solve_grid(gaussian_pieces, axes, 0.5, workers=4)
    assert np.array_equal(a.mask, b.mask)
    assert np.array_equal(a.u[~a.mask], b.u[~b.mask])
    assert (a.branch == b.branch).all()


def test_gaussian_grid_initial_data_and_seams(gaussian_pieces):
    g = solve_grid(gaussian_pieces, [(-2, 2, 41), (-2, 2, 41)], 0.0)
    assert not g.mask.any()
    assert np.max(np.abs(g.u - maps._gaussian_u0(g.points()))) <= 1e-8


def test_mask_appears_only_near_catastrophe(gaussian_pieces, gaussian_catastrophe):
    axes = [(0.66, 0.86, 101), (0.67, 0.87, 101)]
    early = solve_grid(gaussian_pieces, axes, 0.85 * gaussian_catastrophe.t_c)
    assert not early.mask.any()
    late = solve_grid(gaussian_pieces, axes, 0.999 * gaussian_catastrophe.t_c)
    masked = late.points()[late.mask]
    assert len(masked) > 0
    assert np.max(np.linalg.norm(masked - X_C, axis=-1)) <= 0.05


def test_grid_files_round_trip(tmp_path, gaussian_pieces):
    g = solve_grid(gaussian_pieces, [(0.0, 1.0, 6), (-0.5, 0.5, 5)], 0.3)
    g.mask[0, 0] = True
    g.u[0, 0] = np.nan
    g.branch[0, 0] = ""
    path = tmp_path / "f.bin"
    g.write_binary(path)
    h = read_binary(path)
    assert h.axes == [(0.0, 1.0, 6), (-0.5, 0.5, 5)] and h.t == 0.3
    assert np.array_equal(h.mask, g.mask)
    assert np.array_equal(h.u[~h.mask], g.u[~g.mask])
    assert (h.branch == g.branch).all()
    g.write_csv(tmp_path / "f.csv", extra={"omega": np.zeros(30)})
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,u1,u2,branch,mask,omega" and len(lines) == 31


def test_branch_violation_reported():
    piece = maps.linear(1.0).with_branch("left", lambda x, u, t, tol=0.0: u[0] < 0)
    assert solve_point([piece], [-1.0, 1.0], 1.0).branch_id == "left"
    with pytest.raises(BranchViolation) as err:
        solve_point([piece], [1.0, 1.0], 1.0)
    assert np.allclose(err.value.u, [0.5, 0.5])
