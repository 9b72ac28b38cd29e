"""Hodograph offset maps ``f(u)`` and the built-in example catalogue.

A map is the inverse of the initial velocity field: the hodograph relation
``x = u t + f(u)`` holds along every characteristic. All callables accept a
point of shape ``(n,)`` or a batch of shape ``(..., n)`` and broadcast over
the leading axes; the Jacobian has shape ``(..., n, n)`` with
``J[..., i, j] = d f_i / d u_j`` and the Hessian ``(..., n, n, n)`` with
``H[..., i, j, k] = d^2 f_i / d u_j d u_k``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import expr as _expr
from .errors import DerivativeError, DomainError, ExpressionError

EPS = np.finfo(float).eps
H_JAC = EPS ** (1 / 3)
H_HESS = EPS ** (1 / 4)


@dataclass(frozen=True)
class InitialDataMap:
    """Hodograph offset ``f`` with derivative providers and a validity domain.

    Parameters
    ----------
    dim : int
        Spatial dimension ``n``.
    f : callable
        ``u -> f(u)``, broadcasting over leading axes.
    jacobian, hessian : callable, optional
        Analytic derivatives. Central finite differences are used when absent.
    contains : callable, optional
        Vectorised validity predicate ``u -> bool array``. Defaults to
        "``f`` is finite".
    box : array_like, shape (n, 2)
        Bounding box used by searches and scans.
    chart : callable, optional
        Map from the unit box ``[0, 1]^n`` onto the validity domain. Searches
        run in chart coordinates, which lets them reach curved domain edges.
    chart_box : array_like, shape (n, 2), optional
        Sub-box of chart coordinates to search (defaults to the unit box).
    branch_label : str, optional
        Identifier of the piece of a piecewise map.
    branch_predicate : callable, optional
        ``(x, u, t) -> bool`` deciding whether a converged ``u`` belongs to
        this piece.
    initial_data : callable, optional
        ``x -> u0(x)``, the initial velocity field when known in closed form.
    references : dict
        Closed-form reference functions (e.g. ``"vorticity"``,
        ``"solution"``) used by checks.
    """

    dim: int
    f: Callable
    jacobian: Optional[Callable] = None
    hessian: Optional[Callable] = None
    contains: Optional[Callable] = None
    box: Optional[np.ndarray] = None
    chart: Optional[Callable] = None
    chart_box: Optional[np.ndarray] = None
    branch_label: Optional[str] = None
    branch_predicate: Optional[Callable] = None
    initial_data: Optional[Callable] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    references: dict = field(default_factory=dict)

    def __post_init__(self):
        box = self.box
        if box is None:
            box = np.tile([-1.0, 1.0], (self.dim, 1))
        object.__setattr__(self, "box", np.asarray(box, dtype=float).reshape(self.dim, 2))
        if self.chart_box is not None:
            object.__setattr__(self, "chart_box", np.asarray(self.chart_box, float).reshape(self.dim, 2))

    @property
    def label(self):
        return self.name if self.branch_label is None else f"{self.name}[{self.branch_label}]"

    def in_domain(self, u):
        """Boolean (array) telling which points are valid."""
        u = np.asarray(u, dtype=float)
        ok = np.all(np.isfinite(u), axis=-1)
        if self.contains is not None:
            with np.errstate(all="ignore"):
                ok = ok & np.asarray(self.contains(u), dtype=bool)
        else:
            with np.errstate(all="ignore"):
                ok = ok & np.all(np.isfinite(self.f(u)), axis=-1)
        return ok

    def check_domain(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.dim:
            raise DomainError(f"expected points of dimension {self.dim}, got shape {u.shape}")
        if not np.all(self.in_domain(u)):
            raise DomainError(f"point outside the domain of {self.label}: {u}")
        return u

    def to_chart_domain(self, s):
        """Map chart coordinates ``s`` to hodograph points."""
        s = np.asarray(s, dtype=float)
        if self.chart is not None:
            return self.chart(s)
        lo, hi = self.box[:, 0], self.box[:, 1]
        return lo + s * (hi - lo)

    def search_box(self):
        if self.chart_box is not None:
            return self.chart_box
        return np.tile([0.0, 1.0], (self.dim, 1))

    def value(self, u):
        return np.asarray(self.f(np.asarray(u, dtype=float)), dtype=float)

    def jac(self, u, check=True):
        """Jacobian ``d f_i / d u_j``; finite differences when no analytic form."""
        u = np.asarray(u, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(u), dtype=float)
        return _fd_jacobian(self, u, check)

    def hess(self, u, check=True):
        """Hessian ``d^2 f_i / d u_j d u_k``."""
        u = np.asarray(u, dtype=float)
        if self.hessian is not None:
            return np.asarray(self.hessian(u), dtype=float)
        if self.jacobian is not None:
            return _fd_jacobian_of_jacobian(self, u, check)
        return _fd_hessian(self, u, check)

    def with_branch(self, label, predicate=None):
        return replace(self, branch_label=label, branch_predicate=predicate)


def _steps(u, base):
    return base * np.maximum(1.0, np.abs(u))


def _stencil_ok(m, pts, check):
    if check and not np.all(m.in_domain(pts)):
        raise DerivativeError(f"finite-difference stencil leaves the domain of {m.label}")


def _fd_jacobian(m, u, check):
    n = m.dim
    h = _steps(u, H_JAC)
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        step = h[..., j, None] * e
        up, dn = u + step, u - step
        _stencil_ok(m, up, check)
        _stencil_ok(m, dn, check)
        cols.append((m.value(up) - m.value(dn)) / (2 * h[..., j, None]))
    return np.stack(cols, axis=-1)


def _fd_jacobian_of_jacobian(m, u, check):
    n = m.dim
    h = _steps(u, H_JAC)
    out = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        step = h[..., k, None] * e
        up, dn = u + step, u - step
        _stencil_ok(m, up, check)
        _stencil_ok(m, dn, check)
        out.append((m.jac(up) - m.jac(dn)) / (2 * h[..., k, None, None]))
    return np.stack(out, axis=-1)


def _fd_hessian(m, u, check):
    n = m.dim
    h = _steps(u, H_HESS)
    H = np.zeros(u.shape[:-1] + (n, n, n))
    eye = np.eye(n)
    for j in range(n):
        for k in range(j, n):
            sj = h[..., j, None] * eye[j]
            sk = h[..., k, None] * eye[k]
            pts = [u + sj + sk, u + sj - sk, u - sj + sk, u - sj - sk]
            for p in pts:
                _stencil_ok(m, p, check)
            fpp, fpm, fmp, fmm = (m.value(p) for p in pts)
            d = (fpp - fpm - fmp + fmm) / (4 * h[..., j, None] * h[..., k, None])
            H[..., :, j, k] = d
            H[..., :, k, j] = d
    return H


# ---------------------------------------------------------------------------
# Expression-defined maps


def _stack_last(parts, shape):
    return np.stack([np.broadcast_to(np.asarray(p, dtype=float), shape) for p in parts], axis=-1)


def from_expressions(exprs, dim=None, box=None, name="expr", params=None) -> InitialDataMap:
    """Build a map from component expressions in ``u1..un``.

    Jacobian and Hessian are obtained by symbolic differentiation of the
    parsed trees, so they are exact up to round-off.
    """
    exprs = list(exprs)
    n = dim or len(exprs)
    if len(exprs) != n:
        raise ExpressionError(f"need {n} component expressions, got {len(exprs)}")
    names = [f"u{i + 1}" for i in range(n)]
    trees = [e if isinstance(e, _expr.Expr) else _expr.parse(e, names) for e in exprs]
    jac_trees = [[t.diff(j) for j in range(n)] for t in trees]
    hess_trees = [[[d.diff(k) for k in range(n)] for d in row] for row in jac_trees]

    def env(u):
        return [u[..., i] for i in range(n)]

    def f(u):
        u = np.asarray(u, dtype=float)
        return _stack_last([t.evaluate(env(u)) for t in trees], u.shape[:-1])

    def jac(u):
        u = np.asarray(u, dtype=float)
        shape = u.shape[:-1]
        rows = [_stack_last([d.evaluate(env(u)) for d in row], shape) for row in jac_trees]
        return np.stack(rows, axis=-2)

    def hess(u):
        u = np.asarray(u, dtype=float)
        shape = u.shape[:-1]
        out = np.empty(shape + (n, n, n))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    out[..., i, j, k] = np.broadcast_to(
                        np.asarray(hess_trees[i][j][k].evaluate(env(u)), dtype=float), shape)
        return out

    return InitialDataMap(dim=n, f=f, jacobian=jac, hessian=hess, box=box, name=name,
                          params=dict(params or {}, expr=[str(t) for t in trees]))


# ---------------------------------------------------------------------------
# Built-in maps


def linear(beta=1.0, dim=2) -> InitialDataMap:
    """``f = beta u``: decoupled Burgers flow along every axis, ``u0 = x / beta``."""
    beta = float(beta)
    eye = np.eye(dim)

    def jac(u):
        return np.broadcast_to(beta * eye, np.shape(u)[:-1] + (dim, dim)).copy()

    def hess(u):
        return np.zeros(np.shape(u)[:-1] + (dim, dim, dim))

    u0 = (lambda x: np.asarray(x, float) / beta) if beta != 0 else None
    return InitialDataMap(
        dim=dim, f=lambda u: beta * np.asarray(u, float), jacobian=jac, hessian=hess,
        box=np.tile([-2.0, 2.0], (dim, 1)), initial_data=u0, name="linear",
        params={"beta": beta, "dim": dim},
        references={"solution": lambda x, t: np.asarray(x, float) / (t + beta),
                    "vorticity": lambda t, u: 0.0})


def constant_jacobian(J, name="constant") -> InitialDataMap:
    """Linear map ``f(u) = J u`` with a fixed Jacobian (any dimension)."""
    J = np.array(J, dtype=float)
    n = J.shape[0]

    def f(u):
        return np.asarray(u, float) @ J.T

    def jac(u):
        return np.broadcast_to(J, np.shape(u)[:-1] + (n, n)).copy()

    def hess(u):
        return np.zeros(np.shape(u)[:-1] + (n, n, n))

    return InitialDataMap(dim=n, f=f, jacobian=jac, hessian=hess, box=np.tile([-2.0, 2.0], (n, 1)),
                          name=name, params={"J": J.tolist()})


def zero(dim=3) -> InitialDataMap:
    """``f = 0``: every characteristic leaves the origin, ``det M = t^n``."""
    return constant_jacobian(np.zeros((dim, dim)), name="zero")


def isotropic(c=1.0, dim=3) -> InitialDataMap:
    """``f = c u``: one root ``t = -c`` of multiplicity ``dim``."""
    return constant_jacobian(c * np.eye(dim), name="isotropic")


def rotational(alpha=1.0) -> InitialDataMap:
    """Rigid-rotation initial data ``u0 = (-alpha x2, alpha x1)``, the inverse of ``f``."""
    a = float(alpha)

    def f(u):
        u = np.asarray(u, float)
        return np.stack([u[..., 1] / a, -u[..., 0] / a], axis=-1)

    J = np.array([[0.0, 1.0 / a], [-1.0 / a, 0.0]])

    def jac(u):
        return np.broadcast_to(J, np.shape(u)[:-1] + (2, 2)).copy()

    def hess(u):
        return np.zeros(np.shape(u)[:-1] + (2, 2, 2))

    def u0(x):
        x = np.asarray(x, float)
        return np.stack([-a * x[..., 1], a * x[..., 0]], axis=-1)

    def solution(x, t):
        x = np.asarray(x, float)
        d = a * a * t * t + 1
        return np.stack([a * (a * x[..., 0] * t - x[..., 1]) / d,
                         a * (a * x[..., 1] * t + x[..., 0]) / d], axis=-1)

    return InitialDataMap(
        dim=2, f=f, jacobian=jac, hessian=hess, box=np.tile([-2.0, 2.0], (2, 1)),
        initial_data=u0, name="rotational", params={"alpha": a},
        references={"solution": solution,
                    "vorticity": lambda t, u: 2 * a / (a * a * t * t + 1)})


def harmonic(W="(u2^2-u1^2)/2", box=None) -> InitialDataMap:
    """Potential maps ``f1 = dW/du2, f2 = dW/du1`` with ``W`` harmonic.

    ``W`` is given in the expression language over ``u1, u2``; harmonicity is
    checked numerically on the box.
    """
    names = ["u1", "u2"]
    w = _expr.parse(W, names) if isinstance(W, str) else W
    m = from_expressions([w.diff(1), w.diff(0)], box=box if box is not None else np.tile([-2.0, 2.0], (2, 1)),
                         name="harmonic", params={"W": str(W)})
    w11, w12 = w.diff(0).diff(0), w.diff(0).diff(1)
    lap = lambda u: w11.evaluate([u[..., 0], u[..., 1]]) + w.diff(1).diff(1).evaluate([u[..., 0], u[..., 1]])
    probe = np.random.default_rng(0).uniform(m.box[:, 0], m.box[:, 1], size=(64, 2))
    scale = np.max(np.abs(np.asarray(w11.evaluate([probe[:, 0], probe[:, 1]]), float))) + 1.0
    if np.max(np.abs(np.asarray(lap(probe), float))) > 1e-8 * scale:
        raise ExpressionError(f"W = {W} is not harmonic")

    def disc(u):
        u = np.asarray(u, float)
        return -4.0 * np.asarray(w11.evaluate([u[..., 0], u[..., 1]]), float) ** 2

    def vort(t, u):
        u = np.asarray(u, float)
        a = np.asarray(w11.evaluate([u[..., 0], u[..., 1]]), float)
        b = np.asarray(w12.evaluate([u[..., 0], u[..., 1]]), float)
        return -2 * a / (t * t + 2 * b * t + b * b + a * a)

    return replace(m, references={"discriminant": disc, "vorticity": vort})


HARMONIC_PRESETS = {
    "cubic": "u1^3 - 3*u1*u2^2",
    "exp": "exp(u1)*cos(u2)",
    "quartic": "u1^4 - 6*u1^2*u2^2 + u2^4",
}


def analytic2d(F="-I*V", box=None) -> InitialDataMap:
    """Complex-analytic hodograph ``Z - V t = F(V)`` with ``V = u1 + i u2``.

    ``f1 = Re F``, ``f2 = Im F``; derivatives follow from ``F'`` and ``F''``
    through the Cauchy-Riemann relations.
    """
    tree = _expr.parse(F, ["V"]) if isinstance(F, str) else F
    d1 = tree.diff(0)
    d2 = d1.diff(0)

    def V(u):
        u = np.asarray(u, float)
        return u[..., 0] + 1j * u[..., 1]

    def cplx(t, u):
        return np.broadcast_to(np.asarray(t.evaluate([V(u)]), complex), np.shape(u)[:-1])

    def f(u):
        z = cplx(tree, u)
        return np.stack([z.real, z.imag], axis=-1)

    def jac(u):
        z = cplx(d1, u)
        p, q = z.real, z.imag
        return np.stack([np.stack([p, -q], -1), np.stack([q, p], -1)], -2)

    def hess(u):
        z = cplx(d2, u)
        # d^2F/du1^2 = F'', d^2F/du1du2 = iF'', d^2F/du2^2 = -F''
        second = [[z, 1j * z], [1j * z, -z]]
        H = np.empty(np.shape(u)[:-1] + (2, 2, 2))
        for j in range(2):
            for k in range(2):
                H[..., 0, j, k] = second[j][k].real
                H[..., 1, j, k] = second[j][k].imag
        return H

    def vort(t, u):
        z = cplx(d1, u)
        return -2 * z.imag / np.abs(t + z) ** 2

    return InitialDataMap(dim=2, f=f, jacobian=jac, hessian=hess,
                          box=box if box is not None else np.tile([-2.0, 2.0], (2, 1)),
                          name="analytic2d", params={"F": str(F)}, references={"vorticity": vort})


def cubic() -> InitialDataMap:
    """Polynomial map with a quartic marginal curve separating blowup regions.

    ``f1 = -u1^3/3 - 2/3 u1 u2^2 + 2 u2``, ``f2 = -u2^3/3 - 1/3 u1^2 u2 - u1``.
    """

    def f(u):
        u = np.asarray(u, float)
        u1, u2 = u[..., 0], u[..., 1]
        return np.stack([-u1 ** 3 / 3 - 2 / 3 * u1 * u2 ** 2 + 2 * u2,
                         -u2 ** 3 / 3 - u1 ** 2 * u2 / 3 - u1], axis=-1)

    def jac(u):
        u = np.asarray(u, float)
        u1, u2 = u[..., 0], u[..., 1]
        return np.stack([
            np.stack([-(u1 ** 2 + 2 / 3 * u2 ** 2), 2 - 4 / 3 * u1 * u2], -1),
            np.stack([-2 / 3 * u1 * u2 - 1, -(u1 ** 2 / 3 + u2 ** 2)], -1),
        ], -2)

    def hess(u):
        u = np.asarray(u, float)
        u1, u2 = u[..., 0], u[..., 1]
        H = np.empty(u.shape[:-1] + (2, 2, 2))
        H[..., 0, 0, 0] = -2 * u1
        H[..., 0, 0, 1] = H[..., 0, 1, 0] = -4 / 3 * u2
        H[..., 0, 1, 1] = -4 / 3 * u1
        H[..., 1, 0, 0] = -2 / 3 * u2
        H[..., 1, 0, 1] = H[..., 1, 1, 0] = -2 / 3 * u1
        H[..., 1, 1, 1] = -2 * u2
        return H

    def quartic(u):
        u = np.asarray(u, float)
        u1, u2 = u[..., 0], u[..., 1]
        return 4 * u1 ** 4 + 28 * u2 ** 2 * u1 ** 2 + u2 ** 4 - 72

    def vort(t, u):
        u = np.asarray(u, float)
        u1, u2 = u[..., 0], u[..., 1]
        det = (t * t - (4 / 3 * u1 ** 2 + 5 / 3 * u2 ** 2) * t
               + u1 ** 4 / 3 + u1 ** 2 * u2 ** 2 / 3 + 2 / 3 * u2 ** 4 + 2)
        return (3 - 2 / 3 * u1 * u2) / det

    def branches(u):
        u = np.asarray(u, float)
        u1, u2 = u[..., 0], u[..., 1]
        r = np.sqrt(quartic(u))
        return (4 * u1 ** 2 + 5 * u2 ** 2 - r) / 6, (4 * u1 ** 2 + 5 * u2 ** 2 + r) / 6

    return InitialDataMap(dim=2, f=f, jacobian=jac, hessian=hess, box=np.tile([-3.0, 3.0], (2, 1)),
                          name="cubic",
                          references={"quartic": quartic, "vorticity": vort, "branches": branches})


def _gaussian_u0(x):
    x = np.asarray(x, float)
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([np.exp(-x1 ** 2 - x2 ** 2), np.exp(-x1 ** 2 - 3 * x2 ** 2)], axis=-1)


def _gaussian_logs(u):
    u1, u2 = u[..., 0], u[..., 1]
    # clamp rounding below zero on the wedge edges
    return np.maximum(np.log(u2 / (u1 * u1 * u1)), 0.0), np.maximum(np.log(u1 / u2), 0.0)


def _gaussian_contains(u):
    u = np.asarray(u, float)
    u1, u2 = u[..., 0], u[..., 1]
    return (u1 > 0) & (u1 <= 1) & (u2 > 0) & (u2 <= 1) & (u1 ** 3 <= u2) & (u2 <= u1)


def _gaussian_chart(s):
    # (s1, s2) in [0,1]^2 -> u1 = s1, u2 interpolates between the wedge edges u1^3 and u1
    s = np.asarray(s, float)
    u1 = s[..., 0]
    return np.stack([u1, u1 ** 3 + s[..., 1] * (u1 - u1 ** 3)], axis=-1)


def gaussian(a=1, b=1) -> InitialDataMap:
    """One invertibility piece of ``u0 = (exp(-x1^2-x2^2), exp(-x1^2-3 x2^2))``.

    The piece ``(a, b)`` covers ``sign(x1 - u1 t) = a, sign(x2 - u2 t) = b``.
    Real square roots require ``u1^3 <= u2 <= u1``; the Jacobian is singular
    on both edges of that wedge.
    """
    a = 1 if a > 0 else -1
    b = 1 if b > 0 else -1
    k = 1 / (2 * np.sqrt(2))

    def f(u):
        u = np.asarray(u, float)
        L1, L2 = _gaussian_logs(u)
        return np.stack([a * np.sqrt(0.5 * L1), b * np.sqrt(0.5 * L2)], axis=-1)

    def jac(u):
        u = np.asarray(u, float)
        u1, u2 = u[..., 0], u[..., 1]
        L1, L2 = _gaussian_logs(u)
        s1, s2 = np.sqrt(L1), np.sqrt(L2)
        return np.stack([
            np.stack([-3 * a * k / (u1 * s1), a * k / (u2 * s1)], -1),
            np.stack([b * k / (u1 * s2), -b * k / (u2 * s2)], -1),
        ], -2)

    def hess(u):
        # f1 = a sqrt(L1/2), dL1 = (-3/u1, 1/u2); f2 = b sqrt(L2/2), dL2 = (1/u1, -1/u2)
        u = np.asarray(u, float)
        u1, u2 = u[..., 0], u[..., 1]
        L1, L2 = _gaussian_logs(u)
        H = np.empty(u.shape[:-1] + (2, 2, 2))
        for i, (sign, L, g, gg) in enumerate((
                (a, L1, (-3 / u1, 1 / u2), ((3 / u1 ** 2, 0 * u1), (0 * u1, -1 / u2 ** 2))),
                (b, L2, (1 / u1, -1 / u2), ((-1 / u1 ** 2, 0 * u1), (0 * u1, 1 / u2 ** 2))))):
            # d2 sqrt(L/2) = (1/(2 sqrt 2)) (L^{-1/2} d2L - 1/2 L^{-3/2} dL dL)
            for j in range(2):
                for kk in range(2):
                    H[..., i, j, kk] = sign * k * (gg[j][kk] / np.sqrt(L) - 0.5 * g[j] * g[kk] / L ** 1.5)
        return H

    def predicate(x, u, t, tol=0.0):
        xi = np.asarray(x, float) - np.asarray(u, float) * t
        return bool(a * xi[0] >= -tol and b * xi[1] >= -tol)

    label = ("+" if a > 0 else "-") + ("+" if b > 0 else "-")
    return InitialDataMap(
        dim=2, f=f, jacobian=jac, hessian=hess, contains=_gaussian_contains,
        box=np.array([[0.0, 1.0], [0.0, 1.0]]), chart=_gaussian_chart,
        chart_box=np.array([[1e-6, 1.0], [1e-14, 1 - 1e-14]]),
        branch_label=label, branch_predicate=predicate, initial_data=_gaussian_u0,
        name="gaussian", params={"a": a, "b": b})


def gaussian_branches() -> list:
    """All four invertibility pieces, ordered ``++, +-, -+, --``."""
    return [gaussian(a, b) for a, b in ((1, 1), (1, -1), (-1, 1), (-1, -1))]


BUILTINS = {
    "linear": linear,
    "rotational": rotational,
    "harmonic": harmonic,
    "analytic2d": analytic2d,
    "cubic": cubic,
    "gaussian": gaussian,
    "zero": zero,
    "isotropic": isotropic,
}


def _coerce(v):
    if isinstance(v, str):
        try:
            return int(v)
        except ValueError:
            pass
        try:
            return float(v)
        except ValueError:
            return v
    return v


def builtin(name, **params):
    """Instantiate a built-in map. ``harmonic`` accepts a preset name for ``W``."""
    if name not in BUILTINS:
        raise KeyError(f"unknown built-in map {name!r}; choose from {sorted(BUILTINS)}")
    params = {k: _coerce(v) for k, v in params.items()}
    if name == "harmonic" and params.get("W") in HARMONIC_PRESETS:
        params["W"] = HARMONIC_PRESETS[params["W"]]
    return BUILTINS[name](**params)


_SPEC_RE = re.compile(r"^(?P<name>[A-Za-z_][A-Za-z0-9_]*)(?::(?P<args>.*))?$")


def parse_map_spec(spec: str):
    """Parse ``name[:key=value,...]``, e.g. ``rotational:alpha=2`` or
    ``harmonic:W=(u2^2-u1^2)/2``.

    Returns a list of maps: one element, or the four pieces for ``gaussian``
    when no branch is specified.
    """
    m = _SPEC_RE.match(spec.strip())
    if not m:
        raise ValueError(f"malformed map spec {spec!r}")
    name, args = m.group("name"), m.group("args")
    params = {}
    if args:
        # expressions may contain commas inside parentheses; split on top-level commas only
        depth, cur, parts = 0, "", []
        for ch in args:
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            if ch == "," and depth == 0:
                parts.append(cur)
                cur = ""
            else:
                cur += ch
        parts.append(cur)
        for p in parts:
            if "=" not in p:
                raise ValueError(f"expected key=value in map spec, got {p!r}")
            k, v = p.split("=", 1)
            params[k.strip()] = v.strip()
    if name == "gaussian" and not params:
        return gaussian_branches()
    return [builtin(name, **params)]


def load_map(doc):
    """Load maps from a JSON document (dict, JSON text, or path).

    ``{"dim": n, "builtin": name, "params": {...}}`` or
    ``{"dim": n, "expr": ["...", ...], "box": [[lo, hi], ...]}``.
    Returns a list of maps (several for piecewise built-ins).
    """
    if isinstance(doc, str):
        text = doc
        if not doc.lstrip().startswith("{"):
            with open(doc) as fh:
                text = fh.read()
        doc = json.loads(text)
    if "builtin" in doc:
        name = doc["builtin"]
        params = dict(doc.get("params", {}))
        if name == "gaussian" and not params:
            maps = gaussian_branches()
        else:
            maps = [builtin(name, **params)]
        if "dim" in doc and maps[0].dim != int(doc["dim"]):
            raise ValueError(f"built-in {name!r} has dimension {maps[0].dim}, document says {doc['dim']}")
        return maps
    if "expr" in doc:
        dim = int(doc.get("dim", len(doc["expr"])))
        return [from_expressions(doc["expr"], dim=dim, box=doc.get("box"), name=doc.get("name", "expr"))]
    raise ValueError("map document needs either 'builtin' or 'expr'")
