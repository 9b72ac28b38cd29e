"""Physical velocity field by Newton inversion of ``x = u t + f(u)``.

Piecewise maps are passed as a list of pieces, each carrying a predicate
``(x, u, t) -> bool`` that decides whether a converged ``u`` belongs to it.
"""

from __future__ import annotations

import csv
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import adjugate, determinant
from .errors import (BranchViolation, DomainError, HodographError, NoConvergence, NotAvailable,
                     SingularNewton)

NEWTON_TOL = 1e-12
MAX_ITER = 60
MAX_HALVINGS = 30
ARMIJO = 1e-4
SINGULAR_TOL = 1e-14
BRANCH_TOL = 1e-12
MASK_GRADIENT = 500.0
NOISE_FACTOR = 16.0
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class FieldSample:
    x: np.ndarray
    t: float
    u: np.ndarray
    branch_id: str | None
    residual: float
    newton_iters: int


def _pieces(m):
    return list(m) if isinstance(m, (list, tuple)) else [m]


def _residual(m, u, x, t):
    return u * t + m.value(u) - x


def newton(m, x, t, seed, tol=None, max_iter=MAX_ITER):
    """Damped Newton for ``u t + f(u) = x`` with Armijo backtracking.

    Converges when the residual is below ``tol`` (default
    ``1e-12 * max(1, |x|)``) or below the rounding floor of ``f`` scaled by
    ``|df/du| |u|``, which dominates near edges where ``df/du`` is unbounded.
    Steps leaving the map's domain count as failed backtracking trials.

    Returns
    -------
    (u, residual_norm, iterations)

    Raises
    ------
    SingularNewton
        When ``M(t, u)`` becomes numerically singular along the iteration.
    NoConvergence
        When backtracking or the iteration budget is exhausted.
    """
    with np.errstate(all="ignore"):
        return _newton(m, x, t, seed, tol, max_iter)


def _newton(m, x, t, seed, tol, max_iter):
    x = np.asarray(x, dtype=float)
    tol = NEWTON_TOL * max(1.0, float(np.linalg.norm(x))) if tol is None else tol
    u = np.asarray(seed, dtype=float).copy()
    if not m.in_domain(u):
        raise DomainError(f"seed outside the domain of {m.label}: {u}")
    n = m.dim
    r = _residual(m, u, x, t)
    rn = float(np.linalg.norm(r))
    for it in range(max_iter + 1):
        if rn <= tol:
            return u, rn, it
        J = m.jac(u)
        # residual cannot be resolved below the rounding of f amplified by its conditioning
        floor = NOISE_FACTOR * EPS * (float(np.max(np.abs(J))) * float(np.max(np.abs(u)))
                                      + float(np.max(np.abs(x))) + abs(t) * float(np.max(np.abs(u))))
        if np.isfinite(floor) and rn <= floor:
            return u, rn, it
        if it == max_iter:
            break
        M = t * np.eye(n) + J
        det = float(determinant(M))
        scale = float(np.max(np.abs(M))) ** n
        if not np.isfinite(det) or abs(det) <= SINGULAR_TOL * max(scale, 1e-300):
            raise SingularNewton(f"det M = {det:.3e} during Newton at u = {u}", u=u, residual=rn,
                                 iterations=it)
        step = -(adjugate(M) @ r) / det
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = u + lam * step
            if m.in_domain(trial):
                rt = _residual(m, trial, x, t)
                rtn = float(np.linalg.norm(rt))
                if np.isfinite(rtn) and rtn <= (1 - ARMIJO * lam) * rn:
                    break
            lam *= 0.5
        else:
            raise NoConvergence(f"line search failed at u = {u} (residual {rn:.3e})", u=u,
                                residual=rn, iterations=it)
        u, r, rn = trial, rt, rtn
    raise NoConvergence(f"no convergence in {max_iter} iterations (residual {rn:.3e})", u=u,
                        residual=rn, iterations=max_iter)


def _fd_jacobian(func, xi, h=None):
    xi = np.asarray(xi, dtype=float)
    n = xi.size
    h = np.finfo(float).eps ** (1 / 3) * np.maximum(1.0, np.abs(xi)) if h is None else np.full(n, h)
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = h[j]
        cols.append((func(xi + e) - func(xi - e)) / (2 * h[j]))
    return np.stack(cols, -1)


def foot_point(u0, x, t, ladder=8, max_iter=MAX_ITER):
    """Solve ``xi + t u0(xi) = x`` for the characteristic foot ``xi``.

    ``u0`` is smooth across the seams of piecewise hodograph maps, so this
    gives seeds that already sit on the right piece. Continuation in ``t``
    from ``xi = x`` at ``t = 0``.
    """
    x = np.asarray(x, dtype=float)
    xi = x.copy()
    for tk in np.linspace(0.0, t, ladder + 1)[1:]:
        for _ in range(max_iter):
            g = xi + tk * u0(xi) - x
            if np.linalg.norm(g) <= NEWTON_TOL * max(1.0, np.linalg.norm(x)):
                break
            A = np.eye(x.size) + tk * _fd_jacobian(u0, xi)
            try:
                step = np.linalg.solve(A, -g)
            except np.linalg.LinAlgError:
                break
            lam = 1.0
            gn = np.linalg.norm(g)
            for _ in range(MAX_HALVINGS):
                if np.linalg.norm(xi + lam * step + tk * u0(xi + lam * step) - x) < gn:
                    break
                lam *= 0.5
            xi = xi + lam * step
    return xi


def _default_seeds(m, pieces, x, t):
    """Candidate seeds: the foot-point image (when ``u0`` is known), then the box centre."""
    seeds = []
    u0 = pieces[0].initial_data
    if u0 is not None:
        with np.errstate(all="ignore"):
            xi = foot_point(u0, x, t)
            seeds.append(np.asarray(u0(xi), dtype=float))
    seeds.append(pieces[0].box.mean(axis=1))
    return seeds


def _accepts(piece, x, u, t):
    if piece.branch_predicate is None:
        return True
    return bool(piece.branch_predicate(x, u, t, BRANCH_TOL * max(1.0, float(np.linalg.norm(x)))))


def _try_piece(piece, x, t, seed, tol):
    u, res, it = newton(piece, x, t, seed, tol)
    if not _accepts(piece, x, u, t):
        raise BranchViolation(f"converged u = {u} violates the predicate of {piece.label}", u=u,
                              branch=piece.branch_label)
    return FieldSample(x=np.asarray(x, float), t=float(t), u=u, branch_id=piece.branch_label,
                       residual=res, newton_iters=it)


def _t_ladder(piece, x, t, seed, tol, rungs=8):
    """Continuation in time from ``t = 0`` using the previous rung as seed."""
    u = np.asarray(seed, float)
    for tk in np.linspace(0.0, t, rungs + 1):
        u, _, _ = newton(piece, x, tk, u, tol)
    return u


def solve_point(m, x, t, seed=None, branch=None, tol=None) -> FieldSample:
    """Hodograph preimage ``u`` of ``(x, t)``.

    Parameters
    ----------
    m : InitialDataMap or list of pieces
    seed : array_like, optional
        Starting iterate. By default the foot-point image of the initial
        data, then the domain centre, then continuation in ``t``.
    branch : str, optional
        Restrict a piecewise map to the piece with this label.

    Raises
    ------
    NoConvergence, SingularNewton
        Newton failure (the last error is raised after all seeds fail).
    BranchViolation
        If ``u`` converged but no piece's predicate accepts it.
    """
    x = np.asarray(x, dtype=float)
    pieces = _pieces(m)
    if branch is not None:
        pieces = [p for p in pieces if p.branch_label == branch]
        if not pieces:
            raise ValueError(f"no piece labelled {branch!r}")
    tol = NEWTON_TOL * max(1.0, float(np.linalg.norm(x))) if tol is None else tol
    seeds = [np.asarray(seed, float)] if seed is not None else _default_seeds(m, pieces, x, t)
    last = None
    for s in seeds:
        # pieces whose predicate holds at the seed are tried first
        order = sorted(pieces, key=lambda p: not (p.in_domain(s) and _accepts(p, x, s, t)))
        for p in order:
            if not p.in_domain(s):
                continue
            try:
                return _try_piece(p, x, t, s, tol)
            except HodographError as exc:
                last = exc
    if seed is None and t != 0:
        for p in pieces:
            try:
                u = _t_ladder(p, x, t, seeds[-1], tol)
                if _accepts(p, x, u, t):
                    return _try_piece(p, x, t, u, tol)
            except HodographError as exc:
                last = exc
    if last is None:
        last = NoConvergence(f"no usable seed for x = {x}")
    raise last


def fd_gradient(m, x, t, h=3e-5, sample=None):
    """Finite-difference ``du_i/dx_j`` of the Newton-inverted field at ``(x, t)``.

    Central differences at steps ``h`` and ``h/2`` combined by Richardson
    extrapolation (error ``O(h^4)``); every solve runs to the rounding floor
    so that solver tolerance does not leak into the quotient. Near a fold the
    step shrinks with the smallest singular value of ``M`` so that the stencil
    stays inside the locally invertible neighbourhood.
    """
    x = np.asarray(x, dtype=float)
    base = sample or solve_point(m, x, t)
    pieces = _pieces(m)
    n = x.size
    piece = next((p for p in pieces if p.branch_label == base.branch_id), pieces[0])
    sv = np.linalg.svd(t * np.eye(n) + piece.jac(base.u), compute_uv=False)
    h = h * min(1.0, float(sv[-1]))

    def central(step):
        G = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = step * max(1.0, abs(x[j]))
            up = solve_point(pieces, x + e, t, seed=base.u, tol=0.0).u
            dn = solve_point(pieces, x - e, t, seed=base.u, tol=0.0).u
            G[:, j] = (up - dn) / (2 * e[j])
        return G

    return (4 * central(h / 2) - central(h)) / 3


def fd_curl(m, x, t, h=1e-5, sample=None):
    """Vorticity two-form ``dU_j/dx_i - dU_i/dx_j`` of the Newton-inverted field by central differences."""
    G = fd_gradient(m, x, t, h, sample)
    return G.T - G


def characteristics_check(m, x, t, sample=None):
    """``|u(x, t) - u0(x - u t)|``: consistency with transport along characteristics.

    Raises
    ------
    NotAvailable
        When the map carries no initial data.
    """
    u0 = _pieces(m)[0].initial_data
    if u0 is None:
        raise NotAvailable(f"{_pieces(m)[0].label} has no closed-form initial data")
    s = sample or solve_point(m, x, t)
    return float(np.linalg.norm(s.u - u0(s.x - s.u * t)))


# ---------------------------------------------------------------------------
# grids


@dataclass
class FieldGrid:
    """Field samples on a tensor grid.

    ``u`` has shape ``counts + (n,)`` and holds ``nan`` in masked cells;
    ``branch`` holds piece labels (``""`` when masked or unlabelled).
    """

    axes: list
    t: float
    u: np.ndarray
    branch: np.ndarray
    mask: np.ndarray
    residual: np.ndarray

    @property
    def dim(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(int(c) for _, _, c in self.axes)

    def points(self):
        lin = [np.linspace(a, b, int(c)) for a, b, c in self.axes]
        return np.stack(np.meshgrid(*lin, indexing="ij"), -1)

    def write_csv(self, path, extra=None):
        """Rows ``x1..xn, u1..un, branch, mask`` plus optional extra columns."""
        X = self.points().reshape(-1, self.dim)
        U = self.u.reshape(-1, self.dim)
        B = self.branch.reshape(-1)
        K = self.mask.reshape(-1)
        n = self.dim
        header = [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(n)] + ["branch", "mask"]
        cols = {}
        if extra:
            cols = {k: np.asarray(v).reshape(len(X), -1) for k, v in extra.items()}
            for k, v in cols.items():
                header += [k] if v.shape[1] == 1 else [f"{k}{i + 1}" for i in range(v.shape[1])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(len(X)):
                row = [repr(float(v)) for v in X[i]] + [repr(float(v)) for v in U[i]] + [B[i], int(K[i])]
                for v in cols.values():
                    row += [repr(float(z)) for z in v[i]]
                w.writerow(row)

    def write_binary(self, path):
        """Little-endian layout.

        Header: ``b"HVFG"``, ``uint32`` version (1), ``uint32`` n, then per
        axis ``float64`` min, ``float64`` max, ``uint32`` count, then
        ``float64`` t, ``uint32`` number of branch labels and each label as
        ``uint16`` length plus UTF-8 bytes. Payload: per cell in row-major
        order, ``n + 2`` float64 values ``u1..un, branch index, residual``
        with ``u = nan`` and branch index ``-1`` in masked cells.
        """
        labels = sorted({str(b) for b in self.branch.reshape(-1) if b})
        index = {b: i for i, b in enumerate(labels)}
        with open(path, "wb") as fh:
            fh.write(b"HVFG")
            fh.write(struct.pack("<II", 1, self.dim))
            for lo, hi, c in self.axes:
                fh.write(struct.pack("<ddI", float(lo), float(hi), int(c)))
            fh.write(struct.pack("<dI", float(self.t), len(labels)))
            for b in labels:
                raw = b.encode()
                fh.write(struct.pack("<H", len(raw)) + raw)
            bidx = np.array([index.get(str(b), -1) if not k else -1
                             for b, k in zip(self.branch.reshape(-1), self.mask.reshape(-1))], float)
            payload = np.column_stack([self.u.reshape(-1, self.dim), bidx, self.residual.reshape(-1)])
            fh.write(payload.astype("<f8").tobytes())


def read_binary(path) -> FieldGrid:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != b"HVFG":
        raise ValueError("not a field grid file")
    version, n = struct.unpack_from("<II", data, 4)
    if version != 1:
        raise ValueError(f"unsupported version {version}")
    off = 12
    axes = []
    for _ in range(n):
        lo, hi, c = struct.unpack_from("<ddI", data, off)
        axes.append((lo, hi, c))
        off += 20
    t, nb = struct.unpack_from("<dI", data, off)
    off += 12
    labels = []
    for _ in range(nb):
        (ln,) = struct.unpack_from("<H", data, off)
        labels.append(data[off + 2: off + 2 + ln].decode())
        off += 2 + ln
    shape = tuple(int(c) for _, _, c in axes)
    payload = np.frombuffer(data, dtype="<f8", offset=off).reshape(shape + (n + 2,))
    bidx = payload[..., n].astype(int)
    branch = np.array([labels[i] if i >= 0 else "" for i in bidx.reshape(-1)], dtype=object).reshape(shape)
    return FieldGrid(axes=axes, t=t, u=payload[..., :n].copy(), branch=branch,
                     mask=bidx < 0, residual=payload[..., n + 1].copy())


def _stripes(shape):
    """Cell indices grouped into lines along the last axis."""
    return [[cell + (k,) for k in range(shape[-1])] for cell in np.ndindex(*shape[:-1])]


def _gradient_size(pieces, U, B, t):
    """``max |du_i/dx_j|`` per cell, evaluated piece by piece in batch."""
    out = np.full(B.shape, np.nan)
    for p in pieces:
        sel = B == (p.branch_label or "")
        if not np.any(sel):
            continue
        with np.errstate(all="ignore"):
            M = t * np.eye(p.dim) + p.jac(U[sel], check=False)
            out[sel] = np.max(np.abs(adjugate(M)), axis=(-1, -2)) / np.abs(determinant(M))
    return out


def solve_grid(m, axes, t, continuation=True, workers=1, mask_gradient=MASK_GRADIENT) -> FieldGrid:
    """Solve on a tensor grid ``axes = [(min, max, count), ...]``.

    Each stripe (a line along the last axis) is swept with the previous
    cell's ``u`` as seed; a stripe starts from the default seed policy. A second pass retries failed cells seeded from
    their solved neighbours, in a fixed order, so the result does not depend
    on how stripes were scheduled. Cells that fail, and cells where
    ``max |du_i/dx_j|`` exceeds ``mask_gradient`` (the blowup surface is
    close), are masked.
    """
    pieces = _pieces(m)
    axes = [(float(a), float(b), int(c)) for a, b, c in axes]
    shape = tuple(c for _, _, c in axes)
    n = len(axes)
    if n != pieces[0].dim:
        raise ValueError(f"grid has {n} axes for a {pieces[0].dim}-dimensional map")
    lin = [np.linspace(a, b, c) for a, b, c in axes]
    X = np.stack(np.meshgrid(*lin, indexing="ij"), -1)
    U = np.full(shape + (n,), np.nan)
    B = np.full(shape, "", dtype=object)
    R = np.full(shape, np.nan)
    ok = np.zeros(shape, dtype=bool)

    def record(cell, s):
        U[cell], B[cell], R[cell], ok[cell] = s.u, s.branch_id or "", s.residual, True

    def stripe(cells):
        prev = None
        out = []
        for cell in cells:
            x = X[cell]
            s = None
            if continuation and prev is not None:
                try:
                    s = solve_point(pieces, x, t, seed=prev.u)
                except HodographError:
                    s = None
            if s is None:
                try:
                    s = solve_point(pieces, x, t)
                except HodographError:
                    s = None
            out.append((cell, s))
            prev = s if s is not None else prev
        return out

    lines = _stripes(shape)
    with ThreadPoolExecutor(max_workers=max(1, workers or 1)) as pool:
        results = list(pool.map(stripe, lines))
    for line in results:
        for cell, s in line:
            if s is not None:
                record(cell, s)
    # pass 2: failed cells, seeded from solved neighbours in index order
    for cell in zip(*np.nonzero(~ok)):
        for ax in range(n):
            for d in (-1, 1):
                nb = list(cell)
                nb[ax] += d
                nb = tuple(nb)
                if ok[cell] or not all(0 <= nb[i] < shape[i] for i in range(n)) or not ok[nb]:
                    continue
                try:
                    record(cell, solve_point(pieces, X[cell], t, seed=U[nb]))
                except HodographError:
                    pass
    grad = _gradient_size(pieces, U, B, t)
    # nan comes from inf/inf where f itself is not differentiable, which is not blowup
    mask = ~ok | (grad >= mask_gradient)
    U[mask] = np.nan
    B[mask] = ""
    return FieldGrid(axes=axes, t=float(t), u=U, branch=B, mask=mask, residual=R)
