"""Null-vector frames at blowup points and the fixed-time blowup exponents.

At a point ``(t_b, u_b)`` where ``M`` has rank ``r < n`` the right and left
null vectors split displacements into singular and regular parts. Along a
ray ``x_b + e d`` at fixed ``t_b`` leaving the caustic in the singular
direction, derivatives diverge like ``e^(-m/(m+1))``; the exponent is
measured here by solving for the preimages along the ray and fitting
log-log slopes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from .core import adjugate, build_matrix, char_coeffs_from_jacobian
from .errors import ContaminationError, FullRankError, HodographError, WindowError
from .field import solve_point
from .surface import real_roots_batch, trace_zero_set

TOL_NULL = 1e-8
SPATIAL_WINDOW = (1e-7, 1e-3)
SPATIAL_POINTS = 20
SPATIAL_KEEP = 12
FOLD_TOL = 1e-8


def _sign_canonical(v):
    nz = np.flatnonzero(np.abs(v) > 1e-14 * max(1.0, float(np.max(np.abs(v)))))
    return -v if nz.size and v[nz[0]] < 0 else v


def canonical_basis(P, k):
    """Deterministic orthonormal basis of the range of projector ``P`` (rank ``k``).

    Gram-Schmidt over the columns of ``P`` in index order; each vector's
    first nonzero component is made positive.
    """
    n = P.shape[0]
    basis = []
    for j in range(n):
        v = P[:, j].copy()
        for b in basis:
            v -= (b @ v) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            basis.append(v / nv)
        if len(basis) == k:
            break
    # a second orthogonalisation pass keeps round-off at machine level
    out = []
    for v in basis:
        for b in out:
            v = v - (b @ v) * b
        out.append(_sign_canonical(v / np.linalg.norm(v)))
    return np.array(out).reshape(len(out), n)


def null_vectors(M, tol_null=TOL_NULL):
    """Orthonormal right and left null bases, as rows.

    Singular values below ``tol_null * sigma_max`` count as zero; the bases
    are canonicalised with :func:`canonical_basis` so repeated calls are
    bit-for-bit identical.

    Raises
    ------
    FullRankError
        If ``M`` has full rank under ``tol_null``.
    """
    A = np.asarray(M.entries if hasattr(M, "entries") else M, dtype=float)
    n = A.shape[0]
    U, s, Vt = np.linalg.svd(A)
    rank = int(np.sum(s > tol_null * s[0])) if s[0] > 0 else 0
    if rank == n:
        raise FullRankError(f"matrix has full rank {n} (smallest singular value {s[-1]:.3e})")
    Vn = Vt[rank:].T
    Un = U[:, rank:]
    R = canonical_basis(Vn @ Vn.T, n - rank)
    L = canonical_basis(Un @ Un.T, n - rank)
    return R, L


@dataclass
class AdaptedFrame:
    """Right/left null vectors, complements and the dual (P) vectors.

    All vector sets are stored as rows. ``P`` and ``P_tilde`` are the columns
    of the inverse of the stacked ``[L; L_tilde]`` matrix, so
    ``P^T L + P_tilde^T L_tilde = I``.
    """

    u_b: np.ndarray | None
    t_b: float | None
    rank: int
    R: np.ndarray
    R_tilde: np.ndarray
    L: np.ndarray
    L_tilde: np.ndarray
    P: np.ndarray
    P_tilde: np.ndarray
    q: np.ndarray | None = None

    @property
    def dim(self):
        return self.R.shape[1]

    @property
    def R_stack(self):
        return np.vstack([self.R, self.R_tilde])

    @property
    def L_stack(self):
        return np.vstack([self.L, self.L_tilde])

    @property
    def P_stack(self):
        return np.vstack([self.P, self.P_tilde])

    def completeness_defect(self):
        C = self.P.T @ self.L + self.P_tilde.T @ self.L_tilde
        return float(np.max(np.abs(C - np.eye(self.dim))))

    def to_dict(self):
        conv = lambda a: None if a is None else np.asarray(a).tolist()
        return {"u_b": conv(self.u_b), "t_b": self.t_b, "rank": self.rank, "R": conv(self.R),
                "R_tilde": conv(self.R_tilde), "L": conv(self.L), "L_tilde": conv(self.L_tilde),
                "P": conv(self.P), "P_tilde": conv(self.P_tilde), "q": conv(self.q)}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def complementary_basis(R, L, u_b=None, t_b=None) -> AdaptedFrame:
    """Complete orthonormal null sets ``R``, ``L`` (rows) into an adapted frame."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    L = np.atleast_2d(np.asarray(L, dtype=float))
    n = R.shape[1]
    k = R.shape[0]
    eye = np.eye(n)
    Rt = canonical_basis(eye - R.T @ R, n - k)
    Lt = canonical_basis(eye - L.T @ L, n - k)
    Pcols = np.linalg.inv(np.vstack([L, Lt]))
    return AdaptedFrame(u_b=None if u_b is None else np.asarray(u_b, float), t_b=t_b, rank=n - k,
                        R=R, R_tilde=Rt, L=L, L_tilde=Lt, P=Pcols[:, :k].T, P_tilde=Pcols[:, k:].T)


def q_matrix(frame: AdaptedFrame):
    """``q[a, b] = R_a . P_b`` with null vectors first, complements after."""
    return frame.R_stack @ frame.P_stack.T


def adapted_frame(m, u_b, t_b, tol_null=TOL_NULL) -> AdaptedFrame:
    """Frame of ``M(t_b, u_b)`` including ``q``."""
    Mh = build_matrix(m, t_b, u_b)
    R, L = null_vectors(Mh, tol_null)
    fr = complementary_basis(R, L, Mh.u, float(t_b))
    fr.q = q_matrix(fr)
    return fr


def displacement_to_y(frame: AdaptedFrame, dx):
    """``dy_b = L_b . dx`` in stacked order."""
    return frame.L_stack @ np.asarray(dx, dtype=float)


def y_to_displacement(frame: AdaptedFrame, dy):
    """Inverse of :func:`displacement_to_y`: ``dx = sum_b P_b dy_b``."""
    return frame.P_stack.T @ np.asarray(dy, dtype=float)


def frame_gradient(frame: AdaptedFrame, grad):
    """Velocity gradient in frame components: ``dv_a/dy_b`` with ``v = R_stack^-T``-coordinates.

    Velocity is expanded as ``du = sum_a R_a dv_a`` and position as
    ``dx = sum_b P_b dy_b``, so ``dv/dy = R_stack^-T grad P_stack^T``.
    """
    Rs = frame.R_stack
    return np.linalg.solve(Rs.T, grad @ frame.P_stack.T)


# ---------------------------------------------------------------------------
# fold coefficients


def fold_coefficient(m, u_b, t_b, frame=None):
    """``L . H(R, R)``: curvature of the fold along the null direction.

    Zero marks the second level (cusp-type points), where the fixed-time
    exponent steepens from ``-1/2`` to ``-2/3``.
    """
    fr = frame or adapted_frame(m, u_b, t_b)
    H = m.hess(np.asarray(u_b, float))
    R, L = fr.R[0], fr.L[0]
    return float(L @ np.einsum("ijk,j,k->i", H, R, R))


def level_indicator(m, R_raw=None):
    """Smooth field vanishing where the fold coefficient does, for 2D scans.

    Evaluates ``grad_u det M(t, u) . r`` on each blowup branch, with ``r``
    the first column of ``adj M`` (or ``R_raw``-selected column), which
    equals a nonzero multiple of the fold coefficient while avoiding the
    sign ambiguity of normalised null vectors. Returns ``g(u, branch)``.
    """
    col = 0 if R_raw is None else int(R_raw)

    def g(u, branch):
        u = np.asarray(u, dtype=float)
        with np.errstate(all="ignore"):
            J = m.jac(u, check=False)
            roots = real_roots_batch(char_coeffs_from_jacobian(J))
            t = roots[..., branch]
            M = t[..., None, None] * np.eye(m.dim) + J
            A = adjugate(M)
            H = m.hess(u, check=False)
            r = A[..., :, col]
            # d det / d u_k = sum_ij adj_ji H_ijk
            grad = np.einsum("...ji,...ijk->...k", A, H)
            val = np.einsum("...k,...k->...", grad, r)
        ok = m.in_domain(u) & np.isfinite(t)
        return np.where(ok, val, np.nan)

    return g


@dataclass(frozen=True)
class LevelCandidate:
    u: np.ndarray
    t_b: float
    branch: int
    level: int
    indicator: float


def scan_level_candidates(m, box=None, n_points=120, branches=None, col=0):
    """Points of the blowup surface where the fold coefficient vanishes (level 2).

    The scan traces the zero set of :func:`level_indicator` on each branch
    over the box. The set found is a sample, not a proof of completeness.
    """
    if m.dim != 2:
        raise ValueError("level scans are implemented for two-dimensional maps")
    box = m.box if box is None else np.asarray(box, float)
    branches = range(m.dim) if branches is None else branches
    g = level_indicator(m, col)
    out = []
    for b in branches:
        for u, val in trace_zero_set(lambda uu: g(uu, b), box, n_points):
            roots = real_roots_batch(char_coeffs_from_jacobian(m.jac(u)))
            if np.isnan(roots[b]):
                continue
            out.append(LevelCandidate(u=u, t_b=float(roots[b]), branch=b, level=2, indicator=val))
    return out


# ---------------------------------------------------------------------------
# fixed-time exponent


@dataclass
class SpatialFit:
    slopes: dict
    stderr: dict
    eps: np.ndarray = field(repr=False)
    values: dict = field(repr=False)
    direction: np.ndarray = None
    t_b: float = 0.0
    u_b: np.ndarray = None


def _first_root(phi, sgn, s_max):
    """Smallest ``|s|`` root of ``phi`` with sign ``sgn``, by doubling then Brent."""
    f0 = phi(0.0)
    s_prev, s_hi = 0.0, 1e-12
    while s_hi < s_max:
        f_hi = phi(sgn * s_hi)
        if not np.isfinite(f_hi):
            return None
        if np.sign(f_hi) != np.sign(f0):
            return brentq(phi, sgn * s_prev, sgn * s_hi, xtol=1e-16)
        s_prev, s_hi = s_hi, 2 * s_hi
    return None


def _ray_seed(m, u_b, t_b, x_b, frame, d, e, side=None, s_max=1.0):
    """Preimage of ``x_b + e d`` near ``u_b`` by reduction onto the null direction.

    Writes ``u = u_b + s R + R_tilde^T w``. For each ``s`` the complement
    equations ``L_tilde . g(u) = 0`` (regular, since ``M`` is invertible
    from the complement of ``R`` to that of ``L``) are solved for ``w`` by
    Newton; the remaining scalar ``L . g(u)`` is then bracketed in ``s``.
    With ``side`` (+1 or -1) only that sign of ``s`` is searched; otherwise
    the smaller root wins, ties (within a factor two) going to positive
    ``s``. Returns ``(u, side)`` or ``None``.
    """
    R, L = frame.R[0], frame.L[0]
    Rt, Lt = frame.R_tilde, frame.L_tilde
    x = x_b + e * np.asarray(d, dtype=float)
    w_cache = {"w": np.zeros(Rt.shape[0])}

    def point(s):
        w = w_cache["w"].copy()
        for _ in range(30):
            u = u_b + s * R + w @ Rt
            if not m.in_domain(u):
                raise WindowError("left the domain")
            g = u * t_b + m.value(u) - x
            rg = Lt @ g
            if np.max(np.abs(rg)) <= 1e-15 * max(1.0, float(np.max(np.abs(x)))):
                break
            A = Lt @ (t_b * np.eye(m.dim) + m.jac(u)) @ Rt.T
            w = w - np.linalg.solve(A, rg)
        w_cache["w"] = w
        return u_b + s * R + w @ Rt

    def phi(s):
        u = point(s)
        return float(L @ (u * t_b + m.value(u) - x))

    roots = {}
    for sgn in ((1, -1) if side is None else (side,)):
        w_cache["w"] = np.zeros(Rt.shape[0])
        try:
            roots[sgn] = _first_root(phi, float(sgn), s_max)
        except (HodographError, np.linalg.LinAlgError):
            roots[sgn] = None
    plus, minus = roots.get(1), roots.get(-1)
    if plus is None and minus is None:
        return None
    pick = 1 if minus is None or (plus is not None and abs(plus) <= 2 * abs(minus)) else -1
    w_cache["w"] = np.zeros(Rt.shape[0])
    return point(plus if pick == 1 else minus), pick


def fit_spatial_exponent(m, u_b, t_b, direction=None, window=SPATIAL_WINDOW, n=SPATIAL_POINTS,
                         keep=SPATIAL_KEEP, tol_null=TOL_NULL) -> SpatialFit:
    """Log-log slopes of derivative sizes along a ray at fixed ``t_b``.

    Parameters
    ----------
    direction : array_like or "singular", optional
        Ray direction ``d`` in ``x``. Default (``"singular"``): the first
        dual vector ``P`` times the sign of the fold coefficient, the side of
        the caustic that has preimages (``+P`` when the coefficient vanishes).
    window : (float, float)
        Range of ``e`` in ``x_b + e d``; ``n`` geometric points, of which the
        middle ``keep`` enter the fit.

    Returns
    -------
    SpatialFit
        Slopes for ``"vorticity"`` (the antisymmetric part), ``"gradient"``
        (max entry of ``du/dx``), ``"singular"`` (``dv/dy`` null-null entry)
        and ``"bounded"`` (the complement block, largest entry).

    Raises
    ------
    ContaminationError
        When the preimages cross another sheet of the blowup surface
        inside the window.
    WindowError
        When too few ray points can be solved.
    """
    u_b = np.asarray(u_b, dtype=float)
    frame = adapted_frame(m, u_b, t_b, tol_null)
    x_b = u_b * t_b + m.value(u_b)
    eps = np.geomspace(window[0], window[1], n)
    if direction is None or (isinstance(direction, str) and direction == "singular"):
        kappa = fold_coefficient(m, u_b, t_b, frame)
        scale = max(1.0, float(np.max(np.abs(m.hess(u_b)))))
        d = frame.P[0] if abs(kappa) <= FOLD_TOL * scale else np.sign(kappa) * frame.P[0]
    else:
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
    k = frame.dim - frame.rank
    names = ("vorticity", "gradient", "singular", "bounded")
    vals = {q: np.full(n, np.nan) for q in names}
    dets = np.full(n, np.nan)
    side = None
    # the preimage sheet is fixed where the asymptotics are cleanest and then followed
    for i in range(n):
        e = eps[i]
        x = x_b + e * d
        found = _ray_seed(m, u_b, t_b, x_b, frame, d, e, side)
        if found is None:
            continue
        guess, side = found
        try:
            s = solve_point(m, x, t_b, seed=guess)
        except HodographError:
            continue
        Mh = build_matrix(m, t_b, s.u)
        G = Mh.adjugate / Mh.det
        F = frame_gradient(frame, G)
        vals["vorticity"][i] = np.linalg.norm(G.T - G) / np.sqrt(2)
        vals["gradient"][i] = np.max(np.abs(G))
        vals["singular"][i] = abs(F[0, 0])
        vals["bounded"][i] = np.max(np.abs(F[k:, k:]))
        dets[i] = Mh.det
    ok = np.isfinite(dets)
    if np.any(ok) and np.any(np.sign(dets[ok]) != np.sign(dets[ok][-1])):
        raise ContaminationError("preimages cross another sheet of the blowup surface")
    lo = (n - keep) // 2
    sel = np.zeros(n, dtype=bool)
    sel[lo:lo + keep] = True
    sel &= ok
    if sel.sum() < max(6, keep // 2):
        raise WindowError(f"only {int(sel.sum())} ray points solved")
    slopes, errs = {}, {}
    for q in names:
        v = vals[q][sel]
        good = v > 0
        if good.sum() < 3:
            slopes[q], errs[q] = np.nan, np.nan
            continue
        r = stats.linregress(np.log(eps[sel][good]), np.log(v[good]))
        slopes[q], errs[q] = float(r.slope), float(r.stderr)
    return SpatialFit(slopes=slopes, stderr=errs, eps=eps, values=vals, direction=d, t_b=float(t_b),
                      u_b=u_b)


def gamma_points(m, n_points, rng, branch=None, box=None, margin=1e-2):
    """Random points of the blowup surface of a 2D map: ``(u, t_b, branch)`` tuples.

    Points within ``margin`` (relative) of the double-root locus are skipped
    so that the two sheets are well separated.
    """
    box = m.box if box is None else np.asarray(box, float)
    out = []
    tries = 0
    while len(out) < n_points and tries < 1000 * n_points:
        tries += 1
        u = box[:, 0] + rng.random(m.dim) * (box[:, 1] - box[:, 0])
        if not m.in_domain(u):
            continue
        roots = real_roots_batch(char_coeffs_from_jacobian(m.jac(u)))
        if np.any(np.isnan(roots)):
            continue
        if m.dim == 2 and abs(roots[1] - roots[0]) < margin * max(1.0, abs(roots[0])):
            continue
        b = int(rng.integers(m.dim)) if branch is None else branch
        out.append((u, float(roots[b]), b))
    return out


def write_frame_json(frame: AdaptedFrame, path):
    with open(path, "w") as fh:
        json.dump(frame.to_dict(), fh, indent=2)


def is_generic_point(m, u_b, t_b, min_fold=0.05, min_numerator=0.05, min_gap=0.1):
    """Whether ``(t_b, u_b)`` is a clean first-level point of the blowup surface.

    Requires a simple root separated from the others by ``min_gap`` (relative),
    a fold coefficient of at least ``min_fold`` times the Hessian scale, and a
    vorticity numerator (antisymmetric part of the adjugate) of at least
    ``min_numerator`` times the adjugate scale. Near the zero sets of either
    quantity the asymptotic exponents are only reached at much smaller
    distances than a fixed fit window covers.
    """
    u_b = np.asarray(u_b, dtype=float)
    J = m.jac(u_b)
    roots = real_roots_batch(char_coeffs_from_jacobian(J))
    roots = roots[np.isfinite(roots)]
    others = roots[np.abs(roots - t_b) > 1e-9 * max(1.0, abs(t_b))]
    if len(others) and np.min(np.abs(others - t_b)) < min_gap * max(1.0, abs(t_b)):
        return False
    try:
        fr = adapted_frame(m, u_b, t_b)
    except FullRankError:
        return False
    if fr.rank != m.dim - 1:
        return False
    H = m.hess(u_b)
    if abs(fold_coefficient(m, u_b, t_b, fr)) < min_fold * max(1.0, float(np.max(np.abs(H)))):
        return False
    A = adjugate(t_b * np.eye(m.dim) + J)
    asym = np.max(np.abs(A - A.T))
    return bool(asym >= min_numerator * max(1.0, float(np.max(np.abs(A)))))
