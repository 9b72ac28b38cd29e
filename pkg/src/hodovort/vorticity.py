"""Vorticity, stress and their asymptotics near the blowup surface.

Every quantity is a combination of the adjugate over ``det M``:

* two-form ``omega_ij = (adj_ji - adj_ij) / det``,
* stress ``S_ij = (adj_ij + adj_ji) / det``,
* 3D axial vector ``omega_i = sum eps_ijk adj_kj / det``,
* 2D scalar ``omega = (adj_21 - adj_12) / det``.

Near a root ``t_b`` of ``det M(., u_b)`` the numerator is a polynomial in
``t`` and the denominator vanishes to the root's multiplicity, which is what
the degree classification and the fits below rely on.
"""

from __future__ import annotations

import json
from math import comb
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import (adjugate, adjugate_t_derivative, adjugate_t_polynomial, build_matrix,
                   characteristic_coefficients, derivatives_from_inverse, determinant, numerical_rank)
from .errors import DegenerateError, SingularError, WindowError, ZeroVorticityError
from .surface import branch_times

TOL_SIGMA = 1e-8
TEMPORAL_WINDOW = (1e-6, 1e-2)
TEMPORAL_POINTS = 16
LAURENT_WINDOW = (1e-5, 1e-3)
LAURENT_POINTS = 24
CONTAMINATION_FACTOR = 10.0


def curl_numerator(A):
    """Antisymmetric combination of a square matrix in the natural shape.

    2D: scalar ``A_21 - A_12``. 3D: vector ``sum_jk eps_ijk A_kj``.
    Otherwise the full two-form ``A^T - A``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    if n == 2:
        return A[..., 1, 0] - A[..., 0, 1]
    if n == 3:
        return np.stack([A[..., 2, 1] - A[..., 1, 2],
                         A[..., 0, 2] - A[..., 2, 0],
                         A[..., 1, 0] - A[..., 0, 1]], -1)
    return np.swapaxes(A, -1, -2) - A


def axial_from_two_form(W):
    """``omega_i = (1/2) sum eps_ijk omega_jk`` for a 3x3 antisymmetric matrix."""
    return np.array([W[1, 2], W[2, 0], W[0, 1]])


@dataclass
class VorticityRecord:
    """Vorticity at one ``(t, u)`` or the leading data of its pole at a root.

    ``omega`` is always the antisymmetric matrix; ``vector`` holds the 3D
    axial vector or the 2D scalar (as a length-1 array).
    """

    t: float
    u: np.ndarray
    omega: np.ndarray
    vector: np.ndarray | None = None
    sigma: np.ndarray | None = None
    sigma_prime: np.ndarray | None = None
    direction: np.ndarray | None = None
    degree: int = 0

    @property
    def magnitude(self):
        return float(np.linalg.norm(self.vector if self.vector is not None else self.omega))


def _inverse(m, t, u):
    Mh = build_matrix(m, t, u)
    return Mh, derivatives_from_inverse(Mh)


def vorticity_two_form(m, t, u):
    """``(M^-1)^T - M^-1`` at ``(t, u)``; raises SingularError on the blowup surface."""
    _, inv = _inverse(m, t, u)
    return inv.T - inv


def stress_tensor(m, t, u):
    """``M^-1 + (M^-1)^T`` at ``(t, u)``; raises SingularError on the blowup surface."""
    _, inv = _inverse(m, t, u)
    return inv + inv.T


def vorticity_scalar_2d(m, t, u):
    """``(df1/du2 - df2/du1) / det M`` for two-dimensional maps."""
    if m.dim != 2:
        raise ValueError("vorticity_scalar_2d needs a two-dimensional map")
    Mh = build_matrix(m, t, u)
    derivatives_from_inverse(Mh)
    J = Mh.entries
    return float((J[0, 1] - J[1, 0]) / Mh.det)


def vorticity_vector(m, t, u) -> VorticityRecord:
    """Axial vorticity of a 3D map with its two-form and unit direction."""
    if m.dim != 3:
        raise ValueError("vorticity_vector needs a three-dimensional map")
    Mh, inv = _inverse(m, t, u)
    vec = curl_numerator(Mh.adjugate) / Mh.det
    norm = np.linalg.norm(vec)
    return VorticityRecord(t=float(t), u=Mh.u, omega=inv.T - inv, vector=vec,
                           direction=vec / norm if norm > 0 else None)


def vorticity(m, t, u) -> VorticityRecord:
    """Dimension-generic record (scalar in 2D, axial vector in 3D)."""
    if m.dim == 3:
        return vorticity_vector(m, t, u)
    Mh, inv = _inverse(m, t, u)
    W = inv.T - inv
    vec = np.array([W[0, 1]]) if m.dim == 2 else None
    return VorticityRecord(t=float(t), u=Mh.u, omega=W, vector=vec)


def vorticity_magnitude(m, t, u):
    """``|omega|``: absolute scalar (2D), vector norm (3D), Frobenius/sqrt(2) otherwise."""
    W = vorticity_two_form(m, t, u)
    return float(np.linalg.norm(W) / np.sqrt(2))


# ---------------------------------------------------------------------------
# behaviour at a root


def _snap_root(m, u_b, t_b, rel=1e-6):
    bs = branch_times(m, u_b)
    if len(bs) == 0:
        raise WindowError(f"no real blowup time at u = {np.asarray(u_b).tolist()}")
    k = bs.nearest(t_b)
    t, mult = bs.roots[k]
    if abs(t - t_b) > rel * max(1.0, abs(t_b)):
        raise WindowError(f"t = {t_b} is not a blowup time at u = {np.asarray(u_b).tolist()} "
                          f"(nearest root {t})")
    return bs, k


def _d1_scale(coeffs, t):
    a = np.append(np.abs(coeffs), 1.0)
    return float(sum(k * a[k] * abs(t) ** (k - 1) for k in range(1, len(a))))


@dataclass(frozen=True)
class SigmaCoefficients:
    t_b: float
    sigma: np.ndarray
    sigma_prime: np.ndarray
    d1: float
    d2: float


def sigma_coefficients(m, u_b, t_b, tol=TOL_SIGMA) -> SigmaCoefficients:
    """Residue ``sigma = numerator / D1`` and ``sigma' = numerator of d adj/dt`` at a root.

    ``t_b`` is snapped to the exact root of the characteristic polynomial.
    ``D1`` and ``D2`` are the first two Taylor coefficients of
    ``det M(t_b + e, u_b)`` in ``e``.

    Raises
    ------
    DegenerateError
        When ``|D1|`` is negligible: the root is multiple and the pole is of
        higher order, so use the Laurent fit with a larger order.
    """
    bs, k = _snap_root(m, u_b, t_b)
    t = bs.roots[k][0]
    coeffs = characteristic_coefficients(m, u_b).coeffs
    d1, d2 = bs.d1[k], bs.d2[k]
    if abs(d1) <= tol * _d1_scale(coeffs, t):
        raise DegenerateError(f"D1 = {d1:.3e} at t_b = {t}: root of multiplicity {bs.roots[k][1]}")
    M = t * np.eye(m.dim) + m.jac(u_b)
    num = np.atleast_1d(curl_numerator(adjugate(M)))
    num_p = np.atleast_1d(curl_numerator(adjugate_t_derivative(M)))
    return SigmaCoefficients(t_b=t, sigma=num / d1, sigma_prime=num_p, d1=d1, d2=d2)


@dataclass(frozen=True)
class RootDegree:
    t_b: float
    multiplicity: int
    rank: int
    component_degrees: tuple
    adjugate_vanishes: bool

    @property
    def degree(self):
        return max(self.component_degrees) if self.component_degrees else 0


def _taylor_at(poly_coeffs, t):
    """Taylor coefficients at ``t`` of polynomials given by ascending coefficients (last axis)."""
    c = np.asarray(poly_coeffs, dtype=float)
    deg = c.shape[-1] - 1
    out = np.zeros_like(c)
    for j in range(deg + 1):
        # coefficient of e^j in sum_k c_k (t + e)^k
        for k in range(j, deg + 1):
            out[..., j] += c[..., k] * comb(k, j) * t ** (k - j)
    return out


def temporal_blowup_order(m, u_b, tol=TOL_SIGMA) -> list:
    """Pole order of each vorticity component at each real root.

    At a root of multiplicity ``k`` a component whose numerator vanishes to
    order ``j`` at ``t_b`` diverges like ``(t - t_b)^-(k - j)`` (degree 0 if
    ``j >= k``). A numerator that vanishes identically, as for gradient maps,
    has degree 0.
    """
    bs = branch_times(m, u_b)
    J = m.jac(u_b)
    B = adjugate_t_polynomial(J)  # adj(tI + J) = sum_k t^k B[k]
    rows = _numerator_rows(m, B)
    out = []
    for t, mult in bs.roots:
        scale = max(1.0, float(np.max(np.abs(B)))) * max(1.0, abs(t)) ** (m.dim - 1)
        degs = []
        for row in _taylor_at(rows, t):
            nz = np.flatnonzero(np.abs(row) > tol * scale)
            degs.append(max(0, mult - int(nz[0])) if nz.size else 0)
        Mb = t * np.eye(m.dim) + J
        out.append(RootDegree(t_b=t, multiplicity=mult, rank=numerical_rank(Mb),
                              component_degrees=tuple(degs),
                              adjugate_vanishes=bool(np.max(np.abs(adjugate(Mb))) <= tol * scale)))
    return out


# ---------------------------------------------------------------------------
# fits


@dataclass
class TemporalFit:
    slope: float
    stderr: float
    side: str
    t_b: float
    eps: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


def geometric_window(window, n, scale=1.0):
    lo, hi = window
    return np.geomspace(lo, hi, n) * scale


def _check_contamination(bs, k, eps_max):
    t = bs.roots[k][0]
    for j, (s, _) in enumerate(bs.roots):
        if j != k and abs(s - t) < CONTAMINATION_FACTOR * eps_max:
            raise WindowError(f"another blowup time {s} lies within {CONTAMINATION_FACTOR:g}x the "
                              f"window of t_b = {t}")


def _loglog(eps, vals):
    ok = np.isfinite(vals) & (vals > 0)
    if ok.sum() < 3:
        raise ZeroVorticityError("vorticity vanishes along the fit window")
    r = stats.linregress(np.log(eps[ok]), np.log(vals[ok]))
    return float(r.slope), float(r.stderr)


def _numerator_rows(m, B):
    N = curl_numerator(B)
    if m.dim == 2:
        return N[None, :]
    if m.dim == 3:
        return N.T
    iu = np.triu_indices(m.dim, 1)
    return N[:, iu[0], iu[1]].T


def centered_vorticity(m, u_b, t_b, mult):
    """Vorticity components as a function of ``e = t - t_b``, expanded about the root.

    Both numerator and ``det M`` are evaluated from their Taylor coefficients
    at ``t_b``; the first ``mult`` coefficients of ``det M`` vanish at a root
    of that multiplicity and are set to zero exactly, so cancellation in
    ``det M`` does not limit how close to ``t_b`` the function can be used.
    """
    J = m.jac(u_b)
    num = _taylor_at(_numerator_rows(m, adjugate_t_polynomial(J)), t_b)
    det = _taylor_at(np.append(characteristic_coefficients(m, u_b).coeffs, 1.0), t_b)
    det[:mult] = 0.0
    num = np.pad(num, ((0, 0), (0, 1)))

    def omega(e):
        e = np.asarray(e, dtype=float)
        powers = e[..., None] ** np.arange(det.shape[-1])
        return (powers @ num.T) / (powers @ det)[..., None]

    return omega


def fit_temporal_exponent(m, u_b, t_b, window=TEMPORAL_WINDOW, n=TEMPORAL_POINTS, side="auto",
                          quantity=None) -> TemporalFit:
    """Log-log slope of ``|omega(t, u_b)|`` against ``|t - t_b|``.

    Parameters
    ----------
    window : (float, float)
        Relative range of ``|t - t_b|``, multiplied by ``max(1, |t_b|)``.
    side : {"auto", "below", "above"}
        ``"auto"`` fits both sides and keeps the one with the smaller stderr.
    quantity : callable, optional
        ``quantity(m, t, u)`` returning the positive scalar to fit. By default
        the vorticity magnitude is evaluated from the expansion about the
        root (see :func:`centered_vorticity`).

    Raises
    ------
    WindowError
        If ``t_b`` is not a root at ``u_b`` or another root lies within ten
        times the window.
    ZeroVorticityError
        If the fitted quantity vanishes on the window.
    """
    bs, k = _snap_root(m, u_b, t_b)
    t, mult = bs.roots[k]
    eps = geometric_window(window, n, max(1.0, abs(t)))
    _check_contamination(bs, k, eps[-1])
    if quantity is None:
        om = centered_vorticity(m, u_b, t, mult)
        evaluate = lambda e: float(np.linalg.norm(om(e)))
    else:
        evaluate = lambda e: quantity(m, t + e, u_b)
    sides = ("below", "above") if side == "auto" else (side,)
    best = None
    for s in sides:
        sign = -1.0 if s == "below" else 1.0
        vals = np.array([evaluate(sign * e) for e in eps])
        slope, err = _loglog(eps, vals)
        fit = TemporalFit(slope=slope, stderr=err, side=s, t_b=t, eps=eps, values=vals)
        if best is None or fit.stderr < best.stderr:
            best = fit
    return best


@dataclass
class LaurentFit:
    """``sum_k c_k (t_c - t)^k`` for ``k = -order .. 1``."""

    t_c: float
    pole_order: int
    coefficients: dict
    uncertainty: dict
    residual: float
    u: np.ndarray | None = None

    def coefficient(self, k):
        return self.coefficients[k]

    @property
    def leading_magnitude(self):
        return abs(self.coefficients[-self.pole_order])

    def __call__(self, t):
        s = self.t_c - np.asarray(t, dtype=float)
        return sum(c * s ** k for k, c in self.coefficients.items())

    def to_dict(self):
        return {"t_c": self.t_c, "pole_order": self.pole_order,
                "u": None if self.u is None else list(map(float, self.u)),
                "coefficients": {str(k): v for k, v in self.coefficients.items()},
                "uncertainty": {str(k): v for k, v in self.uncertainty.items()},
                "leading_magnitude": self.leading_magnitude, "residual": self.residual}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _lstsq_laurent(s, vals, order):
    powers = list(range(-order, 2))
    A = np.stack([s ** k for k in powers], -1)
    # column scaling keeps the system well conditioned across decades
    w = np.max(np.abs(A), axis=0)
    coef, res, *_ = np.linalg.lstsq(A / w, vals, rcond=None)
    coef = coef / w
    resid = vals - A @ coef
    dof = max(1, len(s) - len(powers))
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.pinv((A / w).T @ (A / w)) / np.outer(w, w)
    return dict(zip(powers, coef)), dict(zip(powers, np.sqrt(np.abs(np.diag(cov))))), float(np.max(np.abs(resid)))


def fit_laurent_series(func, t_c, order=1, window=LAURENT_WINDOW, n=LAURENT_POINTS) -> LaurentFit:
    """Fit ``func(t)`` by ``c_-order/(t_c-t)^order + ... + c_0 + c_1 (t_c-t)``.

    Samples are taken at ``t = t_c - s`` on a geometric ``s`` window scaled
    by ``max(1, |t_c|)``. Each reported uncertainty is twice the change of the
    coefficient when the window is halved, plus the regression stderr.
    """
    scale = max(1.0, abs(t_c))
    s = geometric_window(window, n, scale)
    vals = np.array([func(t_c - si) for si in s], dtype=float)
    coef, err, resid = _lstsq_laurent(s, vals, order)
    s2 = s / 2
    vals2 = np.array([func(t_c - si) for si in s2], dtype=float)
    coef2, _, _ = _lstsq_laurent(s2, vals2, order)
    unc = {k: 2 * abs(coef[k] - coef2[k]) + err[k] for k in coef}
    return LaurentFit(t_c=float(t_c), pole_order=order, coefficients={k: float(v) for k, v in coef.items()},
                      uncertainty={k: float(v) for k, v in unc.items()}, residual=resid)


def laurent_fit(m, u_b, t_b, order=1, window=LAURENT_WINDOW, n=LAURENT_POINTS) -> LaurentFit:
    """Laurent coefficients of the vorticity at fixed ``u_b`` about the root ``t_b``.

    The 2D scalar is fitted in 2D; elsewhere the largest-degree component of
    the axial vector (3D) or two-form. ``t_b`` is snapped to the exact root.

    Raises
    ------
    DegenerateError
        If the pole order at ``t_b`` exceeds ``order``.
    """
    bs, k = _snap_root(m, u_b, t_b)
    t = bs.roots[k][0]
    deg = temporal_blowup_order(m, u_b)[k]
    if deg.degree > order:
        raise DegenerateError(f"pole of order {deg.degree} at t_b = {t}; raise order")
    comp = int(np.argmax(deg.component_degrees)) if deg.component_degrees else 0

    def omega(tt):
        W = vorticity_two_form(m, tt, u_b)
        if m.dim == 2:
            return W[0, 1]
        if m.dim == 3:
            return axial_from_two_form(W)[comp]
        iu = np.triu_indices(m.dim, 1)
        return W[iu][comp]

    fit = fit_laurent_series(omega, t, order, window, n)
    fit.u = np.asarray(u_b, dtype=float)
    return fit


@dataclass(frozen=True)
class Direction:
    vector: np.ndarray
    subdominant: tuple


def direction_vector(record, tol_sigma=TOL_SIGMA) -> Direction:
    """Unit vorticity direction, from the pole residue when available.

    Components below ``tol_sigma`` times the largest are reported as zero and
    listed (1-based) in ``subdominant``. Accepts a VorticityRecord, a
    SigmaCoefficients or a raw vector.
    """
    if isinstance(record, VorticityRecord):
        v = record.sigma if record.sigma is not None else (record.vector if record.vector is not None
                                                           else record.omega)
    elif isinstance(record, SigmaCoefficients):
        v = record.sigma
    else:
        v = record
    v = np.atleast_1d(np.asarray(v, dtype=float)).ravel()
    big = float(np.max(np.abs(v))) if v.size else 0.0
    if big == 0 or not np.isfinite(big):
        raise ZeroVorticityError("vorticity (or its residue) vanishes")
    small = np.abs(v) <= tol_sigma * big
    w = np.where(small, 0.0, v)
    return Direction(vector=w / np.linalg.norm(w), subdominant=tuple(int(i) + 1 for i in np.flatnonzero(small)))


def vorticity_series(m, u, times):
    """Rows ``(t, omega...)``; singular times give ``nan``."""
    rows = []
    for t in times:
        try:
            W = vorticity_two_form(m, t, u)
        except SingularError:
            W = np.full((m.dim, m.dim), np.nan)
        if m.dim == 2:
            vals = [W[0, 1]]
        elif m.dim == 3:
            vals = list(axial_from_two_form(W))
        else:
            vals = list(W[np.triu_indices(m.dim, 1)])
        rows.append([float(t)] + [float(v) for v in vals])
    return rows


def vorticity_on_grid(m, t, U, tol=1e-14):
    """Vorticity components at time ``t`` for a batch of hodograph points ``U``.

    Returns an array of shape ``(len(U), k)`` (``k = 1`` in 2D, 3 in 3D,
    ``n(n-1)/2`` otherwise) with ``nan`` where ``|det M|`` falls below
    ``tol * ||M||^n`` or ``U`` is outside the domain.
    """
    U = np.asarray(U, dtype=float)
    with np.errstate(all="ignore"):
        M = t * np.eye(m.dim) + m.jac(U, check=False)
        A = adjugate(M)
        det = determinant(M)
        scale = np.max(np.abs(M), axis=(-1, -2)) ** m.dim
        W = (np.swapaxes(A, -1, -2) - A) / det[..., None, None]
    bad = ~m.in_domain(U) | ~(np.abs(det) > tol * scale)
    if m.dim == 2:
        out = W[..., 0, 1][..., None]
    elif m.dim == 3:
        out = np.stack([W[..., 1, 2], W[..., 2, 0], W[..., 0, 1]], -1)
    else:
        iu = np.triu_indices(m.dim, 1)
        out = W[..., iu[0], iu[1]]
    out[bad] = np.nan
    return out
