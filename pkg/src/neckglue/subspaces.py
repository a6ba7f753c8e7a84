"""Finite-dimensional subspace geometry.

Subspaces of C^n are stored as orthonormal frames.  Every metric in this
module reduces to singular values of small matrices built from frames, which
keeps the results independent of the chosen basis.

Conventions
-----------
The directed gap of the zero subspace is 0 (supremum over an empty set).  The
directed gap from a nonzero subspace into the zero subspace is 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_RANK_TOL = 1e-9
_ORTHONORMAL_TOL = 1e-11


@dataclass(frozen=True)
class Frame:
    """Orthonormal basis of a subspace of C^n.

    Parameters
    ----------
    columns : ndarray, shape (n, k)
        Columns must be orthonormal.  ``k`` may be zero.
    """

    columns: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.columns, dtype=complex)
        if q.ndim != 2:
            raise ValueError("frame columns must be a 2-d array")
        n, k = q.shape
        if n < 1:
            raise ValueError("ambient dimension must be positive")
        if k > n:
            raise ValueError(f"frame has {k} columns in C^{n}")
        if k:
            defect = np.linalg.norm(q.conj().T @ q - np.eye(k), 2)
            if defect > _ORTHONORMAL_TOL * max(1, k):
                raise ValueError(f"frame columns are not orthonormal (defect {defect:.3e})")
        q = q.copy()
        q.setflags(write=False)
        object.__setattr__(self, "columns", q)

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[0]

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    @property
    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the subspace."""
        q = self.columns
        return q @ q.conj().T

    @classmethod
    def zero(cls, n: int) -> "Frame":
        return cls(np.zeros((n, 0), dtype=complex))

    @classmethod
    def full(cls, n: int) -> "Frame":
        return cls(np.eye(n, dtype=complex))

    def apply(self, matrix: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> "Frame":
        """Frame of the image ``matrix @ span(self)``."""
        return orthonormalize(np.asarray(matrix) @ self.columns, rank_tol)


def orthonormalize(m, rank_tol: float = DEFAULT_RANK_TOL) -> Frame:
    """Orthonormal frame for the column space of ``m``.

    Directions whose singular value falls below ``rank_tol`` times the largest
    singular value are dropped.

    Parameters
    ----------
    m : array_like, shape (n, k)
    rank_tol : float
        Relative singular value cut-off, must be positive.
    """
    if not rank_tol > 0:
        raise ValueError("rank_tol must be positive")
    m = np.asarray(m, dtype=complex)
    if m.ndim == 1:
        m = m[:, None]
    n, k = m.shape
    if k == 0 or not np.any(m):
        return Frame.zero(n)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    rank = int(np.sum(s > rank_tol * s[0]))
    return Frame(u[:, :rank])


def _check_pair(u: Frame, v: Frame) -> None:
    if u.ambient_dim != v.ambient_dim:
        raise ValueError(
            f"ambient dimensions differ: {u.ambient_dim} vs {v.ambient_dim}"
        )


def gap_directed(u: Frame, v: Frame) -> float:
    """Directed gap: the largest distance from a unit vector of U to V.

    Equals the largest singular value of ``(I - P_V) Q_U``.  The zero
    subspace has directed gap 0 to anything; when ``dim U > dim V`` some
    unit vector of U is orthogonal to V and the gap is exactly 1.
    """
    _check_pair(u, v)
    if u.dim == 0:
        return 0.0
    qu = u.columns
    if u.dim > v.dim:
        return 1.0
    qv = v.columns
    residual = qu - qv @ (qv.conj().T @ qu)
    return float(min(1.0, np.linalg.norm(residual, 2)))


def gap(u: Frame, v: Frame) -> float:
    """Symmetric gap ``max(gap_directed(U, V), gap_directed(V, U))``."""
    return max(gap_directed(u, v), gap_directed(v, u))


@dataclass(frozen=True)
class ProjectionBound:
    sigma_min: float
    injective: bool
    isomorphism: bool


def projection_bound(u: Frame, v: Frame) -> ProjectionBound:
    """Lower bound of ``|P_V x| / |x|`` over ``x`` in U.

    ``sigma_min`` is the smallest singular value of ``Q_V^H Q_U`` (zero when
    ``dim U > dim V`` because the restriction cannot be injective).  If the
    directed gap is ``sqrt(1 - a**2)`` then ``sigma_min >= a``.
    """
    _check_pair(u, v)
    if u.dim == 0:
        sigma_min = 1.0
    elif u.dim > v.dim:
        sigma_min = 0.0
    else:
        s = np.linalg.svd(v.columns.conj().T @ u.columns, compute_uv=False)
        sigma_min = float(min(1.0, s[-1]))
    d_uv = gap_directed(u, v)
    injective = d_uv < 1.0
    isomorphism = max(d_uv, gap_directed(v, u)) < 1.0 and u.dim == v.dim
    return ProjectionBound(sigma_min, injective, isomorphism)


def principal_cosines(u: Frame, v: Frame) -> np.ndarray:
    """Principal cosines between U and V, in decreasing order."""
    _check_pair(u, v)
    if u.dim == 0 or v.dim == 0:
        return np.zeros(0)
    s = np.linalg.svd(u.columns.conj().T @ v.columns, compute_uv=False)
    return np.clip(s, 0.0, 1.0)


def subspace_sum(u: Frame, v: Frame, rank_tol: float = DEFAULT_RANK_TOL) -> Frame:
    """Frame of ``U + V``."""
    _check_pair(u, v)
    return orthonormalize(np.hstack([u.columns, v.columns]), rank_tol)


def subspace_intersection(u: Frame, v: Frame, rank_tol: float = DEFAULT_RANK_TOL) -> Frame:
    """Frame of ``U ∩ V`` from principal vectors with cosine >= 1 - rank_tol."""
    _check_pair(u, v)
    if u.dim == 0 or v.dim == 0:
        return Frame.zero(u.ambient_dim)
    y, s, _ = np.linalg.svd(u.columns.conj().T @ v.columns, full_matrices=False)
    keep = s >= 1.0 - rank_tol
    if not np.any(keep):
        return Frame.zero(u.ambient_dim)
    return orthonormalize(u.columns @ y[:, keep], rank_tol)


def asymptotic_projection_defect(u: Frame, v: Frame) -> float:
    """Operator norm of ``1_U - P_U P_V`` restricted to U.

    In the frame of U this is ``I - G G^H`` with ``G = Q_U^H Q_V``, whose
    eigenvalues are the squared sines of the principal angles (padded by 1
    when ``dim V < dim U``).
    """
    _check_pair(u, v)
    if u.dim == 0:
        return 0.0
    g = u.columns.conj().T @ v.columns
    m = np.eye(u.dim) - g @ g.conj().T
    return float(np.linalg.norm(m, 2))
