"""Propagation of the first-order eigen-system along a sampled interval.

The eigenvalue equation ``J u' + H(x) u = λ u`` with ``H = -J D + B(x)``
Hermitian is the Hamiltonian system ``u' = J (H(x) - λ) u``.  Each grid step
is advanced with a fourth-order Magnus exponential (two Gauss points), or
optionally with the second-order midpoint exponential.  The step generator is
affine in λ, ``Ω(λ) = Ω0 + λ Ω1``, so identical steps are exponentiated only
once per λ.

Long products are kept bounded with QR renormalization of frames.  The phase
``arg det(V_-^H Q) - arg det(V_+^H Q)`` of a lagrangian frame ``Q`` (with
``V_±`` the ``±i`` eigenspaces of ``J``) is invariant under renormalization
and is tracked continuously for root counting.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .boundary import j_eigenframes

_GAUSS = np.sqrt(3.0) / 6.0
SCHEMES = ("magnus4", "midpoint")


@dataclass(frozen=True)
class HamiltonianSystem:
    """Sampled Hamiltonian system ``u' = J (H(x) - λ) u`` on ``grid``.

    Attributes
    ----------
    grid : ndarray, shape (K+1,)
    J : ndarray, shape (n, n)
    omega0, omega1 : ndarray, shape (K, n, n)
        Step generators with ``Ω_k(λ) = omega0[k] + λ omega1[k]``.
    unique_index, inverse : ndarray
        Deduplication map: step ``k`` uses unique generator ``inverse[k]``.
    """

    grid: np.ndarray
    J: np.ndarray
    omega0: np.ndarray
    omega1: np.ndarray
    unique_index: np.ndarray
    inverse: np.ndarray
    h_norm: float
    v_plus: np.ndarray
    v_minus: np.ndarray

    @property
    def n(self) -> int:
        return self.J.shape[0]

    @property
    def steps(self) -> int:
        return self.grid.size - 1


def build_system(grid, J, hamiltonian, scheme: str = "magnus4") -> HamiltonianSystem:
    """Sample ``hamiltonian`` (vectorized callable x -> (..., n, n)) on ``grid``."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    grid = np.asarray(grid, dtype=float)
    J = np.asarray(J, dtype=complex)
    h = np.diff(grid)
    if np.any(h <= 0):
        raise ValueError("grid must be strictly increasing")
    if scheme == "magnus4":
        x1 = grid[:-1] + (0.5 - _GAUSS) * h
        x2 = grid[:-1] + (0.5 + _GAUSS) * h
        H1 = np.asarray(hamiltonian(x1), dtype=complex)
        H2 = np.asarray(hamiltonian(x2), dtype=complex)
        M1, M2 = J @ H1, J @ H2
        c = (np.sqrt(3.0) / 12.0) * h[:, None, None] ** 2
        hh = h[:, None, None]
        omega0 = 0.5 * hh * (M1 + M2) + c * (M2 @ M1 - M1 @ M2)
        dM = J @ (H2 - H1)
        omega1 = -hh * J - c * (dM @ J - J @ dM)
        hmax = max(float(np.max(np.linalg.norm(H1, 2, axis=(1, 2)))),
                   float(np.max(np.linalg.norm(H2, 2, axis=(1, 2)))))
    else:
        xm = grid[:-1] + 0.5 * h
        Hm = np.asarray(hamiltonian(xm), dtype=complex)
        hh = h[:, None, None]
        omega0 = hh * (J @ Hm)
        omega1 = -hh * np.broadcast_to(J, Hm.shape)
        hmax = float(np.max(np.linalg.norm(Hm, 2, axis=(1, 2))))
    K, n = omega0.shape[0], J.shape[0]
    key = np.concatenate([omega0.reshape(K, -1), omega1.reshape(K, -1)], axis=1)
    # steps equal up to rounding share one exponential (absolute 1e-15 quantum)
    key = np.round(np.ascontiguousarray(key).view(float).reshape(K, -1), 15)
    _, unique_index, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    v_plus, v_minus = j_eigenframes(J)
    return HamiltonianSystem(
        grid=grid,
        J=J,
        omega0=omega0,
        omega1=np.ascontiguousarray(omega1),
        unique_index=unique_index,
        inverse=inverse.reshape(-1),
        h_norm=hmax,
        v_plus=v_plus,
        v_minus=v_minus,
    )


def step_exponentials(sys: HamiltonianSystem, lams, sign: float = 1.0, steps=None) -> np.ndarray:
    """``exp(sign * Ω_k(λ))`` for every λ in ``lams``; shape (Nλ, K, n, n).

    ``steps`` optionally restricts to a slice of steps.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    sel = slice(None) if steps is None else steps
    inverse = sys.inverse[sel]
    used, local = np.unique(inverse, return_inverse=True)
    idx = sys.unique_index[used]
    o0 = sys.omega0[idx]
    o1 = sys.omega1[idx]
    gen = sign * (o0[None] + lams[:, None, None, None] * o1[None])
    ex = expm(gen)
    return ex[:, local.reshape(-1)]


def _pairwise_product(E: np.ndarray) -> np.ndarray:
    """Ordered product over axis -3 (later steps multiply from the left)."""
    n = E.shape[-1]
    while E.shape[-3] > 1:
        if E.shape[-3] % 2:
            pad = np.broadcast_to(np.eye(n, dtype=E.dtype), E.shape[:-3] + (1, n, n))
            E = np.concatenate([E, pad], axis=-3)
        E = E[..., 1::2, :, :] @ E[..., 0::2, :, :]
    return E[..., 0, :, :]


def chunk_products(E: np.ndarray, per_chunk: int) -> np.ndarray:
    """Products of consecutive groups of ``per_chunk`` steps (forward order)."""
    N, K, n, _ = E.shape
    per_chunk = max(1, min(per_chunk, K))
    chunks = -(-K // per_chunk)
    pad = chunks * per_chunk - K
    if pad:
        eye = np.broadcast_to(np.eye(n, dtype=E.dtype), (N, pad, n, n))
        E = np.concatenate([E, eye], axis=1)
    E = E.reshape(N, chunks, per_chunk, n, n)
    return _pairwise_product(E)


def steps_per_chunk(sys: HamiltonianSystem, lam_max: float, m: int) -> int:
    """Chunk size keeping the per-chunk phase change below π/2."""
    rate = 2.0 * max(1, m) * (sys.h_norm + abs(lam_max)) + 1e-300
    length = min(1.0, (np.pi / 2) / rate)
    hmax = float(np.max(np.diff(sys.grid)))
    return max(1, int(length / hmax))


def _qr(q: np.ndarray) -> np.ndarray:
    return np.linalg.qr(q)[0]


def frame_phase_factor(sys: HamiltonianSystem, Q: np.ndarray) -> np.ndarray:
    """``det(V_-^H Q) conj(det(V_+^H Q))`` (phase equals arg det of the Souriau map)."""
    a = np.swapaxes(sys.v_plus.conj(), -1, -2) @ Q
    b = np.swapaxes(sys.v_minus.conj(), -1, -2) @ Q
    return np.linalg.det(b) * np.conj(np.linalg.det(a))


def souriau(sys: HamiltonianSystem, Q: np.ndarray) -> np.ndarray:
    """Unitary ``U = (V_-^H Q)(V_+^H Q)^{-1}`` of a lagrangian frame."""
    a = np.swapaxes(sys.v_plus.conj(), -1, -2) @ Q
    b = np.swapaxes(sys.v_minus.conj(), -1, -2) @ Q
    # U = b a^{-1}  <=>  U^T = a^{-T} b^T
    ut = np.linalg.solve(np.swapaxes(a, -1, -2), np.swapaxes(b, -1, -2))
    return np.swapaxes(ut, -1, -2)


def edge_phase(sys: HamiltonianSystem, lams, Q0: np.ndarray):
    """Unwrapped frame phase accumulated over the whole grid.

    Returns
    -------
    phase : ndarray, shape (Nλ,)
        Continuous change of ``arg det U`` from the first node to the last.
    Q : ndarray, shape (Nλ, n, m)
        Orthonormal frame at the last node.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    m = Q0.shape[1]
    E = step_exponentials(sys, lams)
    P = chunk_products(E, steps_per_chunk(sys, float(np.max(np.abs(lams))), m))
    Q = np.broadcast_to(Q0, (lams.size,) + Q0.shape).astype(complex)
    z = frame_phase_factor(sys, Q)
    phase = np.zeros(lams.size)
    for c in range(P.shape[1]):
        Q = _qr(P[:, c] @ Q)
        z_new = frame_phase_factor(sys, Q)
        phase += np.angle(z_new * np.conj(z))
        z = z_new
    return phase, Q


def frames_at(sys: HamiltonianSystem, lams, Q0: np.ndarray, node: int, forward: bool) -> np.ndarray:
    """Frame at ``node`` propagated from the first node (forward) or the last node."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    m = Q0.shape[1]
    Q = np.broadcast_to(Q0, (lams.size,) + Q0.shape).astype(complex)
    K = sys.steps
    if forward:
        if node == 0:
            return Q
        E = step_exponentials(sys, lams, 1.0, slice(0, node))
    else:
        if node == K:
            return Q
        E = step_exponentials(sys, lams, -1.0, slice(node, K))[:, ::-1]
    P = chunk_products(E, steps_per_chunk(sys, float(np.max(np.abs(lams))), m))
    for c in range(P.shape[1]):
        Q = _qr(P[:, c] @ Q)
    return Q


@dataclass(frozen=True)
class FrameTrack:
    """Renormalized frames on the nodes ``first..last`` (ascending).

    For a forward track ``E_k frames[k] = frames[k+1] R[k]``; for a backward
    track ``E_k^{-1} frames[k+1] = frames[k] R[k]`` (indices local to the
    track).
    """

    grid: np.ndarray
    frames: np.ndarray
    R: np.ndarray
    forward: bool
    first: int

    def section(self, coeffs: np.ndarray) -> np.ndarray:
        """Values of the solutions whose coefficients are given at the end
        of the track (last node if forward, first node otherwise).

        Parameters
        ----------
        coeffs : ndarray, shape (m, p)

        Returns
        -------
        ndarray, shape (nodes, n, p)
        """
        coeffs = np.asarray(coeffs, dtype=complex)
        K = self.frames.shape[0] - 1
        c = np.empty((K + 1,) + coeffs.shape, dtype=complex)
        if self.forward:
            c[K] = coeffs
            for k in range(K - 1, -1, -1):
                c[k] = np.linalg.solve(self.R[k], c[k + 1])
        else:
            c[0] = coeffs
            for k in range(1, K + 1):
                c[k] = np.linalg.solve(self.R[k - 1], c[k - 1])
        return self.frames @ c


def track_frames(
    sys: HamiltonianSystem,
    lam: float,
    Q0: np.ndarray,
    forward: bool = True,
    stop: int | None = None,
) -> FrameTrack:
    """Propagate ``Q0`` one step at a time with QR after every step.

    Forward tracks start at node 0 and end at ``stop`` (default: last node).
    Backward tracks start at the last node and end at ``stop`` (default 0).
    """
    K = sys.steps
    if forward:
        lo, hi = 0, K if stop is None else int(stop)
    else:
        lo, hi = (0 if stop is None else int(stop)), K
    E = step_exponentials(sys, [lam], 1.0 if forward else -1.0, slice(lo, hi))[0]
    count = hi - lo
    frames = np.empty((count + 1,) + Q0.shape, dtype=complex)
    R = np.empty((count, Q0.shape[1], Q0.shape[1]), dtype=complex)
    if forward:
        frames[0] = Q0
        for k in range(count):
            q, r = np.linalg.qr(E[k] @ frames[k])
            frames[k + 1], R[k] = q, r
    else:
        frames[count] = Q0
        for k in range(count, 0, -1):
            q, r = np.linalg.qr(E[k - 1] @ frames[k])
            frames[k - 1], R[k - 1] = q, r
    if not np.all(np.isfinite(frames)):
        raise FloatingPointError("non-finite values after renormalized propagation")
    return FrameTrack(sys.grid[lo: hi + 1], frames, R, forward, lo)


def transfer_matrix(sys: HamiltonianSystem, lam: float) -> np.ndarray:
    """Plain product of all step exponentials (no renormalization)."""
    E = step_exponentials(sys, [lam])
    with np.errstate(over="ignore", invalid="ignore"):
        F = _pairwise_product(E[0][None])[0]
    if not np.all(np.isfinite(F)):
        raise FloatingPointError(
            "transfer matrix overflowed; use renormalized frame propagation"
        )
    return F
