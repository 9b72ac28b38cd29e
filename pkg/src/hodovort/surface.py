"""Blowup surface: real roots of ``det M(t, u) = 0`` in ``t``.

Root multiplicity decides the blowup degree, so roots closer than
``ROOT_CLUSTER_TOL * max(1, |t|)`` (and complex pairs whose imaginary part
is that small) are merged into one root of higher multiplicity; pointwise
evaluation additionally recognises wider numerical clusters by a
backward-error test (see :func:`real_roots`). A merged root of multiplicity
``m`` is polished as the simple root of the ``(m-1)``-th derivative of the
characteristic polynomial.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .core import CharacteristicCoefficients, char_coeffs_from_jacobian, characteristic_coefficients
from .errors import EmptyLocus, NoBlowupError

ROOT_CLUSTER_TOL = 1e-7
LOOSE_TOL = 1e-3
BACKWARD_FACTOR = 1e3
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class BlowupBranchSet:
    """Real blowup times at one hodograph point.

    ``roots`` holds ``(t, multiplicity)`` pairs in ascending ``t``; ``d1`` and
    ``d2`` hold ``d det/dt`` and ``(1/2) d^2 det/dt^2`` at each root, i.e. the
    first two Taylor coefficients of ``det M(t_b + e)`` in ``e``.
    """

    u: np.ndarray
    roots: tuple
    d1: tuple
    d2: tuple

    @property
    def times(self):
        return np.array([t for t, _ in self.roots])

    @property
    def multiplicities(self):
        return [m for _, m in self.roots]

    def positive(self):
        return [(t, m) for t, m in self.roots if t > 0]

    def smallest_positive(self):
        pos = self.positive()
        return pos[0][0] if pos else np.inf

    def nearest(self, t):
        """Index of the root closest to ``t``."""
        if not self.roots:
            raise ValueError("no real roots")
        return int(np.argmin(np.abs(self.times - t)))

    def __len__(self):
        return len(self.roots)


class DomainLabel(enum.Enum):
    Dplus = "D+"
    Dminus = "D-"
    Dzero = "D0"


# ---------------------------------------------------------------------------
# roots of monic polynomials


def _complex_roots(coeffs):
    """All complex roots of ``t^n + a_{n-1} t^{n-1} + ... + a_0`` (batch for n <= 3)."""
    a = np.asarray(coeffs, dtype=float)
    n = a.shape[-1]
    if n == 1:
        return (-a[..., 0])[..., None].astype(complex)
    if n == 2:
        a0, a1 = a[..., 0], a[..., 1]
        d = a1 * a1 - 4 * a0
        sq = np.sqrt(np.abs(d))
        # cancellation-free pair for real roots
        q = -0.5 * (a1 + np.where(a1 >= 0, 1.0, -1.0) * sq)
        with np.errstate(all="ignore"):
            r2 = np.where(q != 0, a0 / q, 0.0)
        real = np.stack([q + 0j, r2 + 0j], -1)
        cplx = np.stack([-a1 / 2 - 0.5j * sq, -a1 / 2 + 0.5j * sq], -1)
        return np.where((d >= 0)[..., None], real, cplx)
    if n == 3:
        a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
        shift = -a2 / 3
        p = a1 - a2 * a2 / 3
        q = 2 * a2 ** 3 / 27 - a2 * a1 / 3 + a0
        D = (q / 2) ** 2 + (p / 3) ** 3
        with np.errstate(all="ignore"):
            # three real roots (trigonometric form)
            r = np.sqrt(np.maximum(-p / 3, 0.0))
            arg = np.where(r > 0, -q / (2 * np.where(r > 0, r, 1.0) ** 3), 0.0)
            phi = np.arccos(np.clip(arg, -1.0, 1.0)) / 3
            trig = np.stack([2 * r * np.cos(phi - 2 * np.pi * k / 3) for k in range(3)], -1)
            # one real root and a complex pair (Cardano)
            sD = np.sqrt(np.maximum(D, 0.0))
            A = np.cbrt(-q / 2 + sD)
            B = np.cbrt(-q / 2 - sD)
            y = A + B
            im = np.sqrt(3) / 2 * (A - B)
            card = np.stack([y + 0j, -y / 2 + 1j * im, -y / 2 - 1j * im], -1)
        out = np.where((D <= 0)[..., None], trig + 0j, card)
        return out + shift[..., None]
    flat = a.reshape(-1, n)
    roots = np.array([np.roots(np.append(1.0, row[::-1])) for row in flat])
    return roots.reshape(a.shape[:-1] + (n,))


def _poly_eval(monic_asc, t, order=0):
    p = np.polynomial.Polynomial(monic_asc)
    if order:
        p = p.deriv(order)
    return p(t)


def _polish(monic_asc, t, mult, iters=8):
    """Refine a root of multiplicity ``mult`` via Newton on the (mult-1)-th derivative."""
    p = np.polynomial.Polynomial(monic_asc).deriv(mult - 1)
    dp = p.deriv()
    for _ in range(iters):
        d = dp(t)
        if d == 0 or not np.isfinite(d):
            break
        step = p(t) / d
        if not np.isfinite(step) or abs(step) > 1e-3 * max(1.0, abs(t)):
            break
        t = t - step
        if abs(step) <= 4 * EPS * max(1.0, abs(t)):
            break
    return t


def _vanishes(monic_asc, t, mult):
    """Whether ``p, p', ..., p^(mult-1)`` all vanish at ``t`` up to rounding."""
    p = np.polynomial.Polynomial(monic_asc)
    for j in range(mult):
        d = p.deriv(j) if j else p
        scale = np.polynomial.Polynomial(np.abs(d.coef))(abs(t))
        if abs(d(t)) > BACKWARD_FACTOR * EPS * scale:
            return False
    return True


def _strict_clusters(monic, group, cluster_tol):
    cands = sorted(z.real for z in group if abs(z.imag) <= cluster_tol * max(1.0, abs(z.real)))
    clusters = []
    for t in cands:
        if clusters and t - clusters[-1][-1] <= cluster_tol * max(1.0, abs(t)):
            clusters[-1].append(t)
        else:
            clusters.append([t])
    return [(_polish(monic, float(np.mean(cl)), len(cl)), len(cl)) for cl in clusters]


def _near_real_groups(z):
    near = sorted((r for r in z if abs(r.imag) <= LOOSE_TOL * max(1.0, abs(r.real))), key=lambda r: r.real)
    groups = []
    for r in near:
        if groups and abs(r - groups[-1][-1]) <= LOOSE_TOL * max(1.0, abs(r.real)):
            groups[-1].append(r)
        else:
            groups.append([r])
    return groups


def real_roots(coeffs, cluster_tol=ROOT_CLUSTER_TOL, u=None) -> BlowupBranchSet:
    """Real roots of the characteristic polynomial with clustered multiplicities.

    Roots of a multiple root come back from any solver spread by about
    ``eps^(1/m)``, possibly as complex pairs. Nearby near-real roots are
    therefore grouped first; a group of ``k`` is accepted as one root of the
    largest multiplicity ``m <= k`` at which ``p`` and its first ``m - 1``
    derivatives vanish to rounding level at the polished point. Otherwise
    the members are treated one by one: real within ``cluster_tol`` and
    merged when closer than ``cluster_tol``.

    Parameters
    ----------
    coeffs : CharacteristicCoefficients or array_like
        ``a_0 .. a_{n-1}`` of the monic polynomial.
    cluster_tol : float
        Relative merging tolerance.
    """
    if isinstance(coeffs, CharacteristicCoefficients):
        u = coeffs.u if u is None else u
        coeffs = coeffs.coeffs
    a = np.asarray(coeffs, dtype=float)
    monic = np.append(a, 1.0)
    found = []
    for group in _near_real_groups(_complex_roots(a)):
        k = len(group)
        for m in range(k, 1, -1):
            t = _polish(monic, float(np.mean([r.real for r in group])), m)
            if _vanishes(monic, t, m):
                found.append((t, m))
                rest = sorted(group, key=lambda r: abs(r - t))[m:]
                found.extend(_strict_clusters(monic, rest, cluster_tol))
                break
        else:
            found.extend(_strict_clusters(monic, group, cluster_tol))
    found.sort()
    roots = tuple((float(t), int(m)) for t, m in found)
    d1 = tuple(float(_poly_eval(monic, t, 1)) for t, _ in roots)
    d2 = tuple(float(_poly_eval(monic, t, 2)) / 2 for t, _ in roots)
    return BlowupBranchSet(u=None if u is None else np.asarray(u, float), roots=roots, d1=d1, d2=d2)


def real_roots_batch(coeffs, cluster_tol=ROOT_CLUSTER_TOL):
    """Sorted real roots per point, ``nan`` where a root is not real.

    Near-real complex pairs count as real (their real part, twice).
    """
    z = _complex_roots(coeffs)
    tol = cluster_tol * np.maximum(1.0, np.abs(z.real))
    r = np.where(np.abs(z.imag) <= tol, z.real, np.nan)
    return np.sort(r, axis=-1)


# ---------------------------------------------------------------------------
# point-wise operations


def branch_times(m, u, cluster_tol=ROOT_CLUSTER_TOL) -> BlowupBranchSet:
    """Real blowup times at ``u`` with multiplicities and ``D1``/``D2``."""
    return real_roots(characteristic_coefficients(m, u), cluster_tol)


def discriminant_2d(m, u):
    """``(J11 - J22)^2 + 4 J12 J21``: positive where two real branches exist."""
    if m.dim != 2:
        raise ValueError("discriminant_2d needs a two-dimensional map")
    u = m.check_domain(u)
    d = _disc2_from_jac(m.jac(u))
    return float(d) if np.ndim(d) == 0 else d


def _disc2_from_jac(J):
    return (J[..., 0, 0] - J[..., 1, 1]) ** 2 + 4 * J[..., 0, 1] * J[..., 1, 0]


def _disc2_scale(J):
    return (np.abs(J[..., 0, 0]) + np.abs(J[..., 1, 1])) ** 2 + 4 * np.abs(J[..., 0, 1] * J[..., 1, 0]) + 1e-300


def classify_domain(m, u, tol_disc=1e-10) -> DomainLabel:
    if m.dim != 2:
        raise ValueError("classify_domain needs a two-dimensional map")
    u = m.check_domain(u)
    J = m.jac(u)
    d = _disc2_from_jac(J)
    if abs(d) <= tol_disc * _disc2_scale(J):
        return DomainLabel.Dzero
    return DomainLabel.Dplus if d > 0 else DomainLabel.Dminus


def cubic_discriminant(coeffs):
    """Discriminant of ``t^3 + a2 t^2 + a1 t + a0`` (zero iff a repeated root)."""
    a = np.asarray(coeffs, dtype=float)
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    return 18 * a2 * a1 * a0 - 4 * a2 ** 3 * a0 + a2 ** 2 * a1 ** 2 - 4 * a1 ** 3 - 27 * a0 ** 2


def triple_root_check(m, u, tol=1e-7) -> bool:
    """True when some root at ``u`` has both ``D1`` and ``D2`` negligible."""
    bs = branch_times(m, u)
    scale = max(1.0, float(np.max(np.abs(characteristic_coefficients(m, u).coeffs))))
    return any(abs(a) <= tol * scale and abs(b) <= tol * scale for a, b in zip(bs.d1, bs.d2))


# ---------------------------------------------------------------------------
# searches


def smallest_positive_root(m, u):
    """Vectorised smallest positive blowup time; ``inf`` where none or invalid."""
    u = np.asarray(u, dtype=float)
    ok = m.in_domain(u)
    out = np.full(u.shape[:-1], np.inf)
    if not np.any(ok):
        return out
    with np.errstate(all="ignore"):
        J = m.jac(u[ok], check=False)
        r = real_roots_batch(char_coeffs_from_jacobian(J))
    r = np.where(r > 0, r, np.inf)
    best = np.min(np.where(np.isnan(r), np.inf, r), axis=-1)
    out[ok] = np.where(np.isfinite(best), best, np.inf)
    return out


def cluster_nodes(lo, hi, n):
    """Chebyshev nodes on ``(lo, hi)``: dense near the edges, never on them."""
    k = np.arange(n)
    return lo + (hi - lo) * (1 - np.cos(np.pi * (k + 0.5) / n)) / 2


@dataclass
class CatastropheResult:
    t_c: float
    u_c: np.ndarray
    x_c: np.ndarray
    branch_id: str
    optimizer_trace: list = field(default_factory=list)
    n_evals: int = 0
    branch_minima: dict = field(default_factory=dict)

    def to_dict(self):
        return {"t_c": self.t_c, "u_c": list(map(float, self.u_c)), "x_c": list(map(float, self.x_c)),
                "branch": self.branch_id, "n_evals": int(self.n_evals),
                "branch_minima": {k: v for k, v in self.branch_minima.items()}}


def _branch_search(m, box, grid, n_seeds, xatol, workers, use_chart):
    lo, hi = box[:, 0], box[:, 1]
    to_u = m.to_chart_domain if use_chart else (lambda s: s)
    axes = [cluster_nodes(lo[i], hi[i], grid) for i in range(m.dim)]
    S = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, m.dim)
    vals = smallest_positive_root(m, to_u(S))
    n_evals = len(S)
    # seeds need finite grid neighbours too: times confined to curves of
    # degenerate double roots (zero measure) are not part of a blowup surface
    fin = np.isfinite(vals).reshape((grid,) * m.dim)
    inner = fin.copy()
    for ax in range(m.dim):
        for step in (1, -1):
            nb = np.roll(fin, step, axis=ax)
            edge = [slice(None)] * m.dim
            edge[ax] = 0 if step == 1 else -1
            nb[tuple(edge)] = True
            inner &= nb
    finite = np.flatnonzero(inner.reshape(-1))
    if finite.size == 0:
        return None, n_evals
    order = finite[np.lexsort(tuple(S[finite].T[::-1]) + (vals[finite],))]
    seeds = S[order[:n_seeds]]

    def objective(s):
        v = smallest_positive_root(m, to_u(np.clip(s, lo, hi)))
        return float(v)

    def refine(seed):
        res = minimize(objective, seed, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                       options={"xatol": xatol, "fatol": 1e-13, "maxiter": 4000, "maxfev": 8000})
        return res

    with ThreadPoolExecutor(max_workers=max(1, workers or 1)) as pool:
        results = list(pool.map(refine, seeds))
    trace = []
    best = None
    for seed, res in zip(seeds, results):
        s = np.clip(res.x, lo, hi)
        val = objective(s)
        n_evals += int(res.nfev)
        u = to_u(s)
        trace.append({"branch": m.branch_label or m.name, "seed": to_u(seed).tolist(), "t": val,
                      "u": u.tolist(), "nfev": int(res.nfev)})
        key = (val, tuple(u))
        if np.isfinite(val) and (best is None or key < best[0]):
            best = (key, val, u)
    if best is None:
        return None, n_evals
    return (best[1], best[2], trace), n_evals


def find_catastrophe(maps, box=None, grid=200, n_seeds=5, xatol=1e-11, workers=1) -> CatastropheResult:
    """Earliest positive blowup time over the searched domain.

    Dense seeding on a Chebyshev grid (``grid`` nodes per axis) is followed by
    bounded Nelder-Mead refinement from the ``n_seeds`` best nodes. The
    smallest-positive-root function has square-root kinks where branches
    merge, so no gradients are used. Piecewise maps are searched piece by
    piece and the global minimum is returned.

    Parameters
    ----------
    maps : InitialDataMap or sequence of them
    box : array_like, shape (n, 2), optional
        Search box in ``u``. By default each map's chart (or bounding box) is
        used.
    """
    if not isinstance(maps, (list, tuple)):
        maps = [maps]
    best = None
    trace, minima, total = [], {}, 0
    for m in maps:
        b = m.search_box() if box is None else np.asarray(box, float).reshape(m.dim, 2)
        found, n = _branch_search(m, b, grid, n_seeds, xatol, workers, use_chart=box is None)
        total += n
        label = m.branch_label or m.name
        if found is None:
            continue
        val, u, tr = found
        trace.extend(tr)
        minima[label] = float(val)
        key = (val, tuple(u))
        if best is None or key < best[0]:
            best = (key, val, u, m)
    if best is None:
        raise NoBlowupError("no sampled point has a positive real blowup time")
    _, t_c, u_c, m = best
    x_c = u_c * t_c + m.value(u_c)
    return CatastropheResult(t_c=float(t_c), u_c=np.asarray(u_c, float), x_c=np.asarray(x_c, float),
                             branch_id=m.branch_label or m.name, optimizer_trace=trace,
                             n_evals=total, branch_minima=minima)


@dataclass(frozen=True)
class LocusPoint:
    u: np.ndarray
    t_b: float
    value: float


def trace_zero_set(func, box, shape, tol=None, chart=None):
    """Zero crossings of a scalar field on a grid, refined by bisection on edges.

    ``func`` maps points ``(..., n)`` to values ``(...)`` (``nan`` where
    undefined). Every grid edge whose endpoint values have opposite signs is
    bisected with Brent's method. Returns a list of points (in ``u`` space if
    a ``chart`` is given).
    """
    box = np.asarray(box, float)
    n = box.shape[0]
    shape = (shape,) * n if np.isscalar(shape) else tuple(shape)
    axes = [np.linspace(box[i, 0], box[i, 1], shape[i]) for i in range(n)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
    to_u = chart if chart is not None else (lambda s: s)
    with np.errstate(all="ignore"):
        V = func(to_u(G))
    pts = []
    for ax in range(n):
        a = [slice(None)] * n
        b = [slice(None)] * n
        a[ax] = slice(0, -1)
        b[ax] = slice(1, None)
        va, vb = V[tuple(a)], V[tuple(b)]
        hit = np.isfinite(va) & np.isfinite(vb) & (np.sign(va) * np.sign(vb) < 0)
        for idx in zip(*np.nonzero(hit)):
            p0 = G[tuple(a)][idx]
            p1 = G[tuple(b)][idx]
            g = lambda s: float(func(to_u(p0 + s * (p1 - p0))))
            try:
                s = brentq(g, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            except ValueError:
                continue
            p = to_u(p0 + s * (p1 - p0))
            val = float(func(p))
            if tol is None or abs(val) <= tol:
                pts.append((p, val))
    pts.sort(key=lambda pv: tuple(pv[0]))
    return pts


def degeneracy_function(m):
    """Scalar field vanishing where two blowup branches merge.

    2D: the discriminant of the quadratic. 3D: the discriminant of the cubic.
    """
    def g(u):
        u = np.asarray(u, float)
        ok = m.in_domain(u)
        with np.errstate(all="ignore"):
            J = m.jac(u, check=False)
            if m.dim == 2:
                v = _disc2_from_jac(J)
            else:
                v = cubic_discriminant(char_coeffs_from_jacobian(J))
        return np.where(ok, v, np.nan)
    return g


def double_root_locus(m, box=None, n_points=200, locus_tol=1e-8):
    """Points where two blowup branches coincide, with the merged time.

    The degeneracy function is sampled on an ``n_points``-per-axis grid,
    sign changes along grid edges are bisected, and each point is kept if
    the degeneracy is below ``locus_tol`` times its local scale.

    Raises
    ------
    EmptyLocus
        When no sign change is found (e.g. blowup-free maps).
    """
    if m.dim not in (2, 3):
        raise ValueError("double_root_locus supports dimensions 2 and 3")
    g = degeneracy_function(m)
    if box is None:
        box, chart = m.search_box(), m.to_chart_domain
    else:
        chart = None
    raw = trace_zero_set(g, box, n_points, chart=chart)
    out = []
    for u, val in raw:
        J = m.jac(u)
        scale = float(_disc2_scale(J)) if m.dim == 2 else max(1.0, float(np.max(np.abs(J))) ** 6)
        if abs(val) > locus_tol * scale:
            continue
        bs = branch_times(m, u)
        multi = [t for t, k in bs.roots if k >= 2]
        if not multi:
            continue
        out.append(LocusPoint(u=np.asarray(u, float), t_b=float(multi[0]), value=val))
    if not out:
        raise EmptyLocus(f"no double-root locus found for {m.label}")
    return out


def sample_surface(m, axes, cluster_tol=ROOT_CLUSTER_TOL):
    """Real blowup times on a tensor grid of ``u``.

    Returns an array of rows ``(u_1..u_n, t, multiplicity)``, one per
    distinct real root, for every grid point inside the domain.
    """
    lin = [np.linspace(a, b, int(c)) for a, b, c in axes]
    U = np.stack(np.meshgrid(*lin, indexing="ij"), -1).reshape(-1, len(axes))
    U = U[m.in_domain(U)]
    if len(U) == 0:
        return np.empty((0, len(axes) + 2))
    with np.errstate(all="ignore"):
        r = real_roots_batch(char_coeffs_from_jacobian(m.jac(U, check=False)), cluster_tol)
    rows = []
    n = r.shape[-1]
    k = 0
    while k < n:
        t = r[:, k]
        mult = np.ones(len(U), dtype=int)
        for j in range(k + 1, n):
            same = np.abs(r[:, j] - t) <= cluster_tol * np.maximum(1.0, np.abs(t))
            mult += same
        rows.append((t, mult))
        k += 1
    out = []
    for k, (t, mult) in enumerate(rows):
        # keep only the first member of each cluster
        first = np.ones(len(U), dtype=bool)
        for j in range(k):
            first &= ~(np.abs(r[:, j] - t) <= cluster_tol * np.maximum(1.0, np.abs(t)))
        keep = np.isfinite(t) & first
        out.append(np.column_stack([U[keep], t[keep], mult[keep]]))
    res = np.vstack(out)
    order = np.lexsort((res[:, -2],) + tuple(res[:, i] for i in range(len(axes) - 1, -1, -1)))
    return res[order]


def domain_labels(m, axes, tol_disc=1e-10):
    """2D grid of ``(u1, u2, discriminant, label)`` with labels ``D+``, ``D-``, ``D0``."""
    if m.dim != 2:
        raise ValueError("domain labels are defined for two-dimensional maps")
    lin = [np.linspace(a, b, int(c)) for a, b, c in axes]
    U = np.stack(np.meshgrid(*lin, indexing="ij"), -1).reshape(-1, 2)
    U = U[m.in_domain(U)]
    J = m.jac(U, check=False)
    d = _disc2_from_jac(J)
    lab = np.where(np.abs(d) <= tol_disc * _disc2_scale(J), DomainLabel.Dzero.value,
                   np.where(d > 0, DomainLabel.Dplus.value, DomainLabel.Dminus.value))
    return U, d, lab
