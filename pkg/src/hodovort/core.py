"""The hodograph matrix ``M(t, u) = t I + df/du`` and its small-matrix algebra.

Adjugates and characteristic coefficients use closed cofactor formulas for
``n <= 3`` and the Faddeev-LeVerrier recursion beyond. All helpers broadcast
over leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularError

TOL_RANK = 1e-8


def adjugate(M):
    """Adjugate (transposed cofactor matrix) with ``M @ adj(M) = det(M) I``."""
    M = np.asarray(M, dtype=float)
    n = M.shape[-1]
    if n == 1:
        return np.ones_like(M)
    if n == 2:
        a, b = M[..., 0, 0], M[..., 0, 1]
        c, d = M[..., 1, 0], M[..., 1, 1]
        return np.stack([np.stack([d, -b], -1), np.stack([-c, a], -1)], -2)
    if n == 3:
        out = np.empty_like(M)
        for i in range(3):
            for j in range(3):
                r = [k for k in range(3) if k != j]
                c = [k for k in range(3) if k != i]
                minor = M[..., r[0], c[0]] * M[..., r[1], c[1]] - M[..., r[0], c[1]] * M[..., r[1], c[0]]
                out[..., i, j] = (-1) ** (i + j) * minor
        return out
    return faddeev_leverrier(M)[1]


def determinant(M):
    M = np.asarray(M, dtype=float)
    n = M.shape[-1]
    if n == 1:
        return M[..., 0, 0]
    if n == 2:
        return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    if n == 3:
        adj = adjugate(M)
        return np.einsum("...j,...j->...", M[..., 0, :], adj[..., :, 0])
    return faddeev_leverrier(M)[0][..., 0] * (-1) ** n


def faddeev_leverrier(A):
    """Characteristic coefficients and adjugate of ``A``.

    Returns ``(c, adj)`` where ``det(lambda I - A) = sum_k c[..., k] lambda^k``
    (``c[..., n] = 1``) and ``adj = adj(A)``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    eye = np.broadcast_to(np.eye(n), A.shape)
    c = np.zeros(A.shape[:-2] + (n + 1,))
    c[..., n] = 1.0
    Mk = np.zeros_like(A)
    for k in range(1, n + 1):
        Mk = A @ Mk + c[..., n - k + 1, None, None] * eye
        AM = A @ Mk
        c[..., n - k] = -np.trace(AM, axis1=-2, axis2=-1) / k
    # Mk now holds M_n and adj(A) = (-1)^(n-1) M_n
    return c, (-1) ** (n - 1) * Mk


def char_coeffs_from_jacobian(J):
    """Coefficients ``a_0..a_{n-1}`` of ``det(t I + J) = t^n + a_{n-1} t^{n-1} + ... + a_0``.

    ``a_{n-k}`` is the sum of the principal ``k``-minors of ``J``.
    """
    J = np.asarray(J, dtype=float)
    n = J.shape[-1]
    if n == 1:
        return J[..., 0, :1].copy()
    tr = np.trace(J, axis1=-2, axis2=-1)
    if n == 2:
        return np.stack([determinant(J), tr], -1)
    if n == 3:
        m2 = (J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
              + J[..., 0, 0] * J[..., 2, 2] - J[..., 0, 2] * J[..., 2, 0]
              + J[..., 1, 1] * J[..., 2, 2] - J[..., 1, 2] * J[..., 2, 1])
        return np.stack([determinant(J), m2, tr], -1)
    # det(t I + J) = det(t I - A) with A = -J
    c, _ = faddeev_leverrier(-J)
    return c[..., :n]


def adjugate_t_polynomial(J):
    """Matrix coefficients ``B_k`` with ``adj(t I + J) = sum_k t^k B_k``.

    Returned with shape ``(..., n, n, n)``, index ``k`` last-but-two.
    """
    J = np.asarray(J, dtype=float)
    n = J.shape[-1]
    A = -J
    coeffs = char_coeffs_from_jacobian(J)
    eye = np.broadcast_to(np.eye(n), J.shape)
    # adj(t I - A) = sum_{k=0}^{n-1} t^{n-1-k} N_k, N_0 = I, N_k = A N_{k-1} + c_{n-k} I
    N = [eye.copy()]
    for k in range(1, n):
        N.append(A @ N[-1] + coeffs[..., n - k, None, None] * eye)
    B = np.stack([N[n - 1 - k] for k in range(n)], axis=-3)
    return B


def adjugate_t_derivative(M):
    """``d adj(M) / dt`` for ``M = t I + J`` (exact: adj is polynomial in t)."""
    M = np.asarray(M, dtype=float)
    n = M.shape[-1]
    eye = np.broadcast_to(np.eye(n), M.shape)
    if n == 1:
        return np.zeros_like(M)
    if n == 2:
        return eye.copy()
    if n == 3:
        return np.trace(M, axis1=-2, axis2=-1)[..., None, None] * eye - M
    # treat M itself as "t I + J" at t = 0 and differentiate the polynomial there
    B = adjugate_t_polynomial(M)
    return B[..., 1, :, :]


def numerical_rank(M, tol_rank=TOL_RANK):
    """Rank counting singular values above ``tol_rank * sigma_max``."""
    M = np.asarray(M.entries if isinstance(M, HodographMatrix) else M, dtype=float)
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol_rank * s[0]))


@dataclass(frozen=True)
class HodographMatrix:
    t: float
    u: np.ndarray
    entries: np.ndarray
    det: float
    adjugate: np.ndarray
    rank: int

    @property
    def dim(self):
        return self.entries.shape[0]

    @property
    def norm(self):
        return float(np.linalg.norm(self.entries, 2))


@dataclass(frozen=True)
class CharacteristicCoefficients:
    """``det M(t, u) = t^n + a_{n-1} t^{n-1} + ... + a_0``; ``coeffs[k] = a_k``."""

    u: np.ndarray
    coeffs: np.ndarray

    @property
    def degree(self):
        return len(self.coeffs)

    def monic(self):
        """Coefficients in ascending order including the leading 1."""
        return np.append(self.coeffs, 1.0)

    def __call__(self, t, order=0):
        """Evaluate ``d^order/dt^order det M`` at ``t``."""
        p = np.polynomial.Polynomial(self.monic())
        if order:
            p = p.deriv(order)
        return p(t)


def build_matrix(m, t, u, tol_rank=TOL_RANK) -> HodographMatrix:
    """Assemble ``M(t, u)`` for map ``m`` with determinant, adjugate and rank."""
    u = m.check_domain(np.asarray(u, dtype=float))
    J = m.jac(u)
    M = float(t) * np.eye(m.dim) + J
    adj = adjugate(M)
    det = float(determinant(M))
    return HodographMatrix(t=float(t), u=u.copy(), entries=M, det=det, adjugate=adj,
                           rank=numerical_rank(M, tol_rank))


def derivatives_from_inverse(Mh: HodographMatrix, tol=1e-14):
    """Velocity gradient ``du_j/dx_k = adj(M)_{jk} / det M``.

    Raises
    ------
    SingularError
        When ``|det M|`` is below ``tol * ||M||^n``: the point is on the
        blowup surface.
    """
    scale = max(Mh.norm, 1e-300) ** Mh.dim
    if not np.isfinite(Mh.det) or abs(Mh.det) <= tol * scale:
        raise SingularError(f"det M = {Mh.det:.3e} at t = {Mh.t}, u = {Mh.u}")
    return Mh.adjugate / Mh.det


def characteristic_coefficients(m, u) -> CharacteristicCoefficients:
    u = m.check_domain(np.asarray(u, dtype=float))
    return CharacteristicCoefficients(u=u.copy(), coeffs=char_coeffs_from_jacobian(m.jac(u)))
