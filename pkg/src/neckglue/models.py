"""Built-in regression models and random admissible data.

Every model is returned as a pair ``(end1, end2)`` of ends over one shared
boundary model, ready for :func:`neckglue.glue.assemble`.
"""
from __future__ import annotations

import numpy as np

from .boundary import BoundaryModel, j_eigenframes
from .ends import EndModel
from .necks import NeckPerturbation
from .subspaces import Frame, orthonormalize

J_STD = np.array([[0.0, -1.0], [1.0, 0.0]])
CHIRALITY = np.diag([1.0, -1.0])
E1 = np.array([[1.0], [0.0]])
E2 = np.array([[0.0], [1.0]])


def line(v) -> Frame:
    """Frame of the line spanned by ``v``."""
    v = np.asarray(v, dtype=complex).reshape(-1, 1)
    return Frame(v / np.linalg.norm(v))


def _pair(boundary, lam1, lam2, cap1=0.0, cap2=0.0, neck1=None, neck2=None):
    end1 = EndModel(boundary, "right_infinite", lam1, cap_length=cap1, neck=neck1)
    end2 = EndModel(boundary, "left_infinite", lam2, cap_length=cap2, neck=neck2)
    return end1, end2


def rotation(orthogonal: bool = False, graded: bool = False, cap_length: float = 0.0):
    """``n = 2``, ``D = 0``, no perturbation; ``Λ1 = span(e1)``.

    ``Λ2 = span(e1)`` or, with ``orthogonal``, ``span(e2)``.
    """
    b = BoundaryModel(np.zeros((2, 2)), J_STD, CHIRALITY if graded else None)
    return _pair(b, line(E1), line(E2 if orthogonal else E1), cap_length, cap_length)


def exponential(gamma: float = 1.0, graded: bool = False, mismatched: bool = False):
    """``D = diag(γ, -γ)``, no perturbation.

    Default lagrangians ``Λ1 = span(e2)`` and ``Λ2 = span(e1)`` carry one
    decaying mode each; ``mismatched`` uses ``span(e1 + e2)`` at both ends.
    """
    b = BoundaryModel(np.diag([gamma, -gamma]), J_STD, CHIRALITY if graded else None)
    if mismatched:
        both = line([1.0, 1.0])
        return _pair(b, both, both)
    return _pair(b, line(E2), line(E1))


def perturbed_rotation(amplitude: float = 0.5, decay: float = 1.0, graded: bool = False):
    """Rotation model with ``A(t) = C_A e^{-λ|t|} diag(1, -1)`` on both necks."""
    b = BoundaryModel(np.zeros((2, 2)), J_STD, CHIRALITY if graded else None)
    neck = NeckPerturbation(np.diag([1.0, -1.0]), decay, amplitude)
    return _pair(b, line(E1), line(E1), neck1=neck, neck2=neck)


REGRESSION_MODELS = {
    "rotation": lambda: rotation(),
    "rotation_orthogonal": lambda: rotation(orthogonal=True),
    "exponential": lambda: exponential(),
    "exponential_mismatched": lambda: exponential(mismatched=True),
    "perturbed_rotation": lambda: perturbed_rotation(),
    "graded_rotation": lambda: rotation(graded=True),
    "graded_exponential": lambda: exponential(graded=True),
}


# ---------------------------------------------------------------------------
# random admissible data


def random_clifford(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random unitary ``J`` with ``J^H = -J`` (eigenvalues ``±i`` in equal number)."""
    if n % 2:
        raise ValueError("n must be even")
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, _ = np.linalg.qr(z)
    signs = np.concatenate([np.ones(n // 2), -np.ones(n // 2)])
    return q @ np.diag(1j * signs) @ q.conj().T


def anticommuting_hermitian(J: np.ndarray, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Random Hermitian matrix anti-commuting with ``J``: ``(X + J X J) / 2``."""
    n = J.shape[0]
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    x = 0.5 * (x + x.conj().T)
    d = 0.5 * (x + J @ x @ J)
    return scale * 0.5 * (d + d.conj().T)


def random_lagrangian(J: np.ndarray, rng: np.random.Generator) -> Frame:
    """Random lagrangian ``{v_+ a + v_- U a}`` with ``U`` a random unitary."""
    vp, vm = j_eigenframes(J)
    m = vp.shape[1]
    z = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    u, _ = np.linalg.qr(z)
    return orthonormalize(vp + vm @ u)


def random_end(
    n: int,
    side: str,
    rng: np.random.Generator,
    boundary: BoundaryModel | None = None,
    cap_length: float = 1.0,
    amplitude: float = 0.3,
    decay: float = 1.5,
) -> EndModel:
    """Random admissible end: random ``Λ`` and a random anti-commuting neck."""
    if boundary is None:
        J = random_clifford(n, rng)
        boundary = BoundaryModel(anticommuting_hermitian(J, rng), J)
    J = boundary.J
    b0 = anticommuting_hermitian(J, rng)
    neck = NeckPerturbation(J @ b0, decay, amplitude)  # B0 = -J A0
    return EndModel(boundary, side, random_lagrangian(J, rng), cap_length=cap_length, neck=neck)


def random_boundary(n: int, rng: np.random.Generator, kernel_dim: int = 0) -> BoundaryModel:
    """Random boundary model; ``kernel_dim`` (even) eigenvalues are forced to 0."""
    J = random_clifford(n, rng)
    D = anticommuting_hermitian(J, rng)
    if kernel_dim:
        if kernel_dim % 2 or kernel_dim > n:
            raise ValueError("kernel_dim must be even and at most n")
        w, v = np.linalg.eigh(D)
        order = np.argsort(np.abs(w))
        w = w.copy()
        w[order[:kernel_dim]] = 0.0
        D = v @ np.diag(w) @ v.conj().T
        D = 0.5 * (D + D.conj().T)
    return BoundaryModel(D, J)
