"""Cross-section data: the boundary operator, Clifford unit and chirality.

The cross-section is an ``n``-dimensional Hermitian system.  ``D`` is the
boundary operator, ``J`` the Clifford unit (``J^2 = -1``, ``J^H = -J``)
anti-commuting with ``D``, and ``C`` an optional chirality commuting with
``D`` and anti-commuting with ``J``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .subspaces import (
    DEFAULT_RANK_TOL,
    Frame,
    gap,
    gap_directed,
    orthonormalize,
)

STRUCTURE_TOL = 1e-12


@dataclass(frozen=True)
class Violation:
    """A violated model invariant together with its numerical defect."""

    invariant: str
    defect: float

    def __str__(self) -> str:
        return f"{self.invariant} (defect {self.defect:.3e})"


@dataclass(frozen=True)
class BoundaryModel:
    """Boundary data ``(n, D, J, C)``.

    Construction does not validate; call :func:`validate` or
    :meth:`require_valid`.
    """

    D: np.ndarray
    J: np.ndarray
    C: np.ndarray | None = None

    def __post_init__(self):
        for name in ("D", "J", "C"):
            value = getattr(self, name)
            if value is None:
                continue
            a = np.array(value, dtype=complex)
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise ValueError(f"{name} must be a square matrix")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.J.shape != self.D.shape:
            raise ValueError("D and J must have the same shape")
        if self.C is not None and self.C.shape != self.D.shape:
            raise ValueError("C must have the same shape as D")

    @property
    def n(self) -> int:
        return self.D.shape[0]

    @property
    def graded(self) -> bool:
        return self.C is not None

    def require_valid(self) -> None:
        problems = validate(self)
        if problems:
            raise ValueError("invalid boundary model: " + "; ".join(map(str, problems)))


def _norm(a) -> float:
    return float(np.linalg.norm(a, 2)) if np.size(a) else 0.0


def validate(model: BoundaryModel, tol: float = STRUCTURE_TOL) -> list[Violation]:
    """List the violated invariants of ``model`` (empty when valid)."""
    out: list[Violation] = []
    n = model.n
    D, J, C = model.D, model.J, model.C
    if n % 2:
        out.append(Violation("n must be even", float(n % 2)))
    scale = max(1.0, _norm(D))
    checks = [
        ("D† = D", _norm(D - D.conj().T) / scale),
        ("J† = −J", _norm(J + J.conj().T)),
        ("J†J = I", _norm(J.conj().T @ J - np.eye(n))),
        ("JD+DJ = 0", _norm(J @ D + D @ J) / scale),
    ]
    if C is not None:
        checks += [
            ("C† = C", _norm(C - C.conj().T)),
            ("C² = I", _norm(C @ C - np.eye(n))),
            ("CD−DC = 0", _norm(C @ D - D @ C) / scale),
            ("CJ+JC = 0", _norm(C @ J + J @ C)),
        ]
    for name, defect in checks:
        if not defect < tol * max(1, n):
            out.append(Violation(name, defect))
    return out


@dataclass(frozen=True)
class SpectralData:
    """Spectral decomposition of ``D``.

    Attributes
    ----------
    eigenvalues : ndarray
        All eigenvalues, sorted ascending (with multiplicity).
    values : ndarray
        Distinct eigenvalues (cluster representatives), ascending.
    eigenframes : tuple of Frame
        One frame per distinct eigenvalue.  In graded models each frame
        consists of chirality eigenvectors.
    gamma : float
        Smallest positive eigenvalue, ``inf`` when there is none.
    kernel, positive_frame, negative_frame : Frame
        ``ker D`` and the sums of the positive and negative eigenspaces.
    """

    eigenvalues: np.ndarray
    values: np.ndarray
    eigenframes: tuple
    gamma: float
    kernel: Frame
    positive_frame: Frame
    negative_frame: Frame
    eig_tol: float
    warnings: tuple = field(default=())

    @property
    def n(self) -> int:
        return self.kernel.ambient_dim

    def projector(self, value_index: int) -> np.ndarray:
        return self.eigenframes[value_index].projector

    def stable_frame(self, side: str) -> Frame:
        """Decaying directions along the end: ``μ < 0`` to the right, ``μ > 0`` to the left."""
        return self.negative_frame if side == "right_infinite" else self.positive_frame

    def unstable_frame(self, side: str) -> Frame:
        return self.positive_frame if side == "right_infinite" else self.negative_frame


def _cluster(values: np.ndarray, tol: float):
    groups = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[groups[-1][-1]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _graded_basis(q: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Rotate an orthonormal basis of a C-invariant space into C-eigenvectors."""
    m = q.conj().T @ C @ q
    m = 0.5 * (m + m.conj().T)
    w, y = np.linalg.eigh(m)
    order = np.argsort(-w, kind="stable")
    return q @ y[:, order]


def spectral_decompose(model: BoundaryModel, eig_tol: float | None = None) -> SpectralData:
    """Eigen-decomposition of ``D`` with eigenvalue clustering.

    Eigenvalues closer than ``eig_tol`` (default ``1e-10 * max(1, |D|)``)
    are merged into one eigenspace.  Groupings that are ambiguous (gaps
    between ``eig_tol`` and ``10 * eig_tol``) are reported as warnings.
    """
    problems = validate(model)
    if problems:
        raise ValueError("invalid boundary model: " + "; ".join(map(str, problems)))
    D = model.D
    n = model.n
    if eig_tol is None:
        eig_tol = 1e-10 * max(1.0, _norm(D))
    w, v = np.linalg.eigh(0.5 * (D + D.conj().T))
    groups = _cluster(w, eig_tol)
    notes = []
    for a, b in zip(groups[:-1], groups[1:]):
        spacing = w[b[0]] - w[a[-1]]
        if spacing <= 10 * eig_tol:
            notes.append(
                f"ambiguous eigenvalue clustering near {w[a[-1]]:.6g}: "
                f"dims ({len(a)}, {len(b)}) separate or {len(a) + len(b)} merged"
            )
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)

    values = []
    frames = []
    kernel_cols = []
    pos_cols = []
    neg_cols = []
    for g in groups:
        mu = float(np.mean(w[g]))
        if abs(mu) <= eig_tol:
            mu = 0.0
        q = v[:, g]
        if model.C is not None:
            q = _graded_basis(q, model.C)
        values.append(mu)
        frames.append(Frame(q))
        if mu == 0.0:
            kernel_cols.append(q)
        elif mu > 0:
            pos_cols.append(q)
        else:
            neg_cols.append(q)

    def stack(cols):
        return Frame(np.hstack(cols)) if cols else Frame.zero(n)

    positive = [mu for mu in values if mu > 0]
    gamma = min(positive) if positive else np.inf
    return SpectralData(
        eigenvalues=w.copy(),
        values=np.array(values),
        eigenframes=tuple(frames),
        gamma=float(gamma),
        kernel=stack(kernel_cols),
        positive_frame=stack(pos_cols),
        negative_frame=stack(neg_cols),
        eig_tol=float(eig_tol),
        warnings=tuple(notes),
    )


def symplectic_form(model: BoundaryModel, u, v) -> complex:
    """``ω(u, v) = <J u, v>``, linear in ``u`` and conjugate-linear in ``v``."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != (model.n,) or v.shape != (model.n,):
        raise ValueError(f"vectors must have length {model.n}")
    return complex(np.vdot(v, model.J @ u))


def j_eigenframes(J: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases of the ``+i`` and ``-i`` eigenspaces of ``J``."""
    h = 1j * np.asarray(J, dtype=complex)
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    # J v = i v  <=>  (iJ) v = -v
    plus = v[:, w < 0]
    minus = v[:, w > 0]
    if plus.shape[1] != minus.shape[1]:
        raise ValueError("J does not have balanced ±i eigenspaces")
    return plus, minus


@dataclass(frozen=True)
class LagrangianCheck:
    lagrangian: bool
    defect: float


def orthogonal_complement(space: Frame, within: Frame) -> Frame:
    """Orthogonal complement of ``space`` inside ``within``."""
    if within.dim == 0:
        return Frame.zero(within.ambient_dim)
    p = within.columns
    if space.dim == 0:
        return within
    m = p - space.columns @ (space.columns.conj().T @ p)
    return orthonormalize(m, 1e-8)


def is_lagrangian(
    L: Frame, within: Frame, model: BoundaryModel, tol: float = 1e-8
) -> LagrangianCheck:
    """Check ``L^⊥ = J L`` inside the J-invariant space ``within``."""
    if gap_directed(L, within) >= 1e-8:
        raise ValueError("L is not contained in the ambient space `within`")
    complement = orthogonal_complement(L, within)
    jl = L.apply(model.J)
    if complement.dim == 0 and jl.dim == 0:
        defect = 0.0
    else:
        defect = gap(complement, jl)
    return LagrangianCheck(bool(defect < tol), float(defect))


def graded_split(
    space: Frame, C: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL
) -> tuple[Frame, Frame]:
    """Split a C-invariant space into its even and odd parts."""
    C = np.asarray(C, dtype=complex)
    if space.dim == 0:
        z = Frame.zero(space.ambient_dim)
        return z, z
    defect = gap(space.apply(C), space)
    if defect >= 1e-8:
        raise InvarianceError(defect)
    eye = np.eye(C.shape[0])
    even = orthonormalize(0.5 * (eye + C) @ space.columns, rank_tol)
    odd = orthonormalize(0.5 * (eye - C) @ space.columns, rank_tol)
    return even, odd


class InvarianceError(ValueError):
    """A subspace is not invariant under the chirality."""

    def __init__(self, defect: float):
        super().__init__(f"space is not C-invariant (defect {defect:.3e})")
        self.defect = defect


def clifford_block(model: BoundaryModel) -> np.ndarray:
    """The block ``G: E^+ -> E^-`` of ``J`` in a chirality eigenbasis."""
    if model.C is None:
        raise ValueError("model has no grading")
    w, v = np.linalg.eigh(model.C)
    plus = v[:, w > 0]
    minus = v[:, w < 0]
    return minus.conj().T @ model.J @ plus


def graded_lagrangian_defect(
    L: Frame, within: Frame, model: BoundaryModel, rank_tol: float = DEFAULT_RANK_TOL
) -> float:
    """Defect of the graded lagrangian relations for ``L ⊆ within``.

    With ``J = [[0, -G^H], [G, 0]]`` in a chirality eigenbasis the relations
    read ``(L^+)^⊥ = G^H L^-`` inside ``within^+`` and ``(L^-)^⊥ = G L^+``
    inside ``within^-``.  As subspaces ``G^H L^- = J L^-`` and
    ``G L^+ = J L^+``, which is how they are evaluated here.
    """
    if model.C is None:
        raise ValueError("model has no grading")
    l_even, l_odd = graded_split(L, model.C, rank_tol)
    w_even, w_odd = graded_split(within, model.C, rank_tol)
    defects = []
    for part, other, ambient in ((l_even, l_odd, w_even), (l_odd, l_even, w_odd)):
        comp = orthogonal_complement(part, ambient)
        image = other.apply(model.J, rank_tol)
        if comp.dim == 0 and image.dim == 0:
            defects.append(0.0)
        else:
            defects.append(gap(comp, image))
    return float(max(defects))
