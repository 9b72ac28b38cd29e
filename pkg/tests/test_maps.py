import json

import numpy as np
import pytest

from hodovort import maps
from hodovort.errors import ExpressionError
from hodovort.expr import parse

BUILT = [
    maps.cubic(),
    maps.rotational(0.5),
    maps.linear(1.5),
    maps.builtin("harmonic", W="cubic"),
    maps.builtin("harmonic", W="exp"),
    maps.analytic2d("V^3/3 - I*V"),
    maps.gaussian(),
    maps.gaussian(-1, 1),
    maps.isotropic(2.0),
]


def _inside(m, rng, k=20):
    pts = []
    while len(pts) < k:
        s = rng.uniform(0.05, 0.95, m.dim)
        u = m.to_chart_domain(s)
        if m.in_domain(u):
            pts.append(u)
    return np.array(pts)


@pytest.mark.parametrize("m", BUILT, ids=lambda m: m.label)
def test_jacobian_matches_differences(m):
    rng = np.random.default_rng(0)
    for u in _inside(m, rng):
        h = 1e-6
        fd = np.stack([(m.value(u + h * e) - m.value(u - h * e)) / (2 * h) for e in np.eye(m.dim)], -1)
        assert np.allclose(m.jac(u), fd, rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize("m", BUILT, ids=lambda m: m.label)
def test_hessian_matches_differences(m):
    rng = np.random.default_rng(1)
    for u in _inside(m, rng, 8):
        h = 1e-5
        fd = np.stack([(m.jac(u + h * e) - m.jac(u - h * e)) / (2 * h) for e in np.eye(m.dim)], -1)
        assert np.allclose(m.hess(u), fd, rtol=1e-4, atol=1e-4)


def test_batched_evaluation_matches_pointwise():
    m = maps.cubic()
    U = np.random.default_rng(2).normal(size=(4, 3, 2))
    J = m.jac(U)
    assert J.shape == (4, 3, 2, 2)
    assert np.allclose(J[2, 1], m.jac(U[2, 1]))


def test_gaussian_map_inverts_initial_data():
    rng = np.random.default_rng(3)
    for a, b in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        m = maps.gaussian(a, b)
        x = rng.uniform(0.05, 1.5, 2) * np.array([a, b])
        u = maps._gaussian_u0(x)
        assert m.in_domain(u)
        assert np.allclose(m.value(u), x, atol=1e-12)
        assert m.branch_predicate(x, u, 0.0)


def test_rotational_references():
    m = maps.rotational(2.0)
    x = np.array([0.3, -0.7])
    u = m.references["solution"](x, 1.5)
    assert np.allclose(u * 1.5 + m.value(u), x)
    assert np.allclose(m.initial_data(x), m.references["solution"](x, 0.0))


def test_harmonic_rejects_non_harmonic_potential():
    with pytest.raises(ExpressionError):
        maps.harmonic("u1^2 + u2^2")


def test_parse_map_spec_variants():
    (r,) = maps.parse_map_spec("rotational:alpha=2")
    assert r.params["alpha"] == 2.0
    (h,) = maps.parse_map_spec("harmonic:W=(u2^2-u1^2)/2")
    assert h.name == "harmonic"
    pieces = maps.parse_map_spec("gaussian")
    assert [p.branch_label for p in pieces] == ["++", "+-", "-+", "--"]
    with pytest.raises(ValueError):
        maps.parse_map_spec("rotational:alpha")
    with pytest.raises(KeyError):
        maps.parse_map_spec("nosuch")


def test_load_map_documents(tmp_path):
    doc = {"dim": 2, "expr": ["u1^3/3 + u2", "u2^2 - u1"], "box": [[-1, 1], [-1, 1]]}
    (m,) = maps.load_map(doc)
    assert np.allclose(m.jac([1.0, 2.0]), [[1.0, 1.0], [-1.0, 4.0]])
    path = tmp_path / "map.json"
    path.write_text(json.dumps({"builtin": "linear", "params": {"beta": 3}}))
    (lin,) = maps.load_map(str(path))
    assert np.allclose(lin.value([1.0, 1.0]), [3.0, 3.0])
    with pytest.raises(ValueError):
        maps.load_map({"dim": 3, "builtin": "cubic"})


def test_expression_parser_and_derivatives():
    e = parse("u1^2 * sin(u2) + exp(u1*u2)/2", ["u1", "u2"])
    u1, u2 = 0.7, -0.4
    assert np.isclose(e.evaluate([u1, u2]), u1 ** 2 * np.sin(u2) + np.exp(u1 * u2) / 2)
    assert np.isclose(e.diff(0).evaluate([u1, u2]), 2 * u1 * np.sin(u2) + u2 * np.exp(u1 * u2) / 2)
    assert np.isclose(e.diff(1).diff(0).evaluate([u1, u2]),
                      2 * u1 * np.cos(u2) + (1 + u1 * u2) * np.exp(u1 * u2) / 2)
    for bad in ("u1 +", "import os", "u3", "__import__('os')", "u1.real"):
        with pytest.raises(ExpressionError):
            parse(bad, ["u1", "u2"])


def test_complex_expression():
    e = parse("I*V^2", ["V"])
    assert np.isclose(e.diff(0).evaluate([1 + 2j]), 2j * (1 + 2j))
