"""Manifolds with one cylindrical end, reduced to a cap interval plus a neck.

An end consists of a cap interval of length ``T_c`` carrying an arbitrary
Hermitian potential, a lagrangian boundary condition ``Λ`` at the far side
of the cap, and a half-infinite neck with a decaying perturbation.  End 1 is
``right_infinite`` (cap on ``[-T_c, 0]``, neck ``t >= 0``); end 2 is
``left_infinite`` (neck ``s <= 0``, cap on ``[0, T_c]``).

Internally both ends are handled in the outward coordinate ``τ`` (``τ = t``
for end 1 and ``τ = -s`` for end 2).  Reversing the direction of an end
replaces ``J`` by ``-J`` and ``D`` by ``-D`` and leaves ``H = -J D + B``
unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import propagation as prop
from .boundary import (
    BoundaryModel,
    SpectralData,
    is_lagrangian,
    spectral_decompose,
    validate,
)
from .necks import CylinderSection, NeckPerturbation, perturbation_potential
from .subspaces import DEFAULT_RANK_TOL, Frame, gap_directed, orthonormalize

SIDES = ("right_infinite", "left_infinite")
DEFAULT_STEP = 0.02


# ---------------------------------------------------------------------------
# cap potentials


@dataclass(frozen=True)
class CapPotential:
    """Piecewise-linear Hermitian potential on the cap.

    ``nodes`` are positions in the end's own coordinate; values outside the
    node range are held constant.
    """

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float).reshape(-1)
        values = np.array(self.values, dtype=complex)
        if values.ndim != 3 or values.shape[0] != nodes.size:
            raise ValueError("cap potential needs one matrix per node")
        if nodes.size > 1 and not np.all(np.diff(nodes) > 0):
            raise ValueError("cap potential nodes must increase")
        herm = np.max(np.abs(values - np.conj(np.swapaxes(values, 1, 2)))) if values.size else 0
        if herm > 1e-12 * max(1.0, float(np.max(np.abs(values)))):
            raise ValueError("cap potential samples must be Hermitian")
        nodes.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.nodes.size == 1:
            return np.broadcast_to(self.values[0], t.shape + self.values.shape[1:]).copy()
        flat = t.reshape(-1)
        k = np.clip(np.searchsorted(self.nodes, flat, side="right") - 1, 0, self.nodes.size - 2)
        w = (flat - self.nodes[k]) / (self.nodes[k + 1] - self.nodes[k])
        w = np.clip(w, 0.0, 1.0)[:, None, None]
        out = (1 - w) * self.values[k] + w * self.values[k + 1]
        return out.reshape(t.shape + self.values.shape[1:])


def eval_cap(cap: CapPotential | None, t, n: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if cap is None:
        return np.zeros(t.shape + (n, n), dtype=complex)
    return cap(t)


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class EndModel:
    """One end: cap, boundary lagrangian, neck perturbation."""

    boundary: BoundaryModel
    side: str
    boundary_lagrangian: Frame
    cap_length: float = 0.0
    cap_potential: CapPotential | None = None
    neck: NeckPerturbation | None = None

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}")
        if self.cap_length < 0:
            raise ValueError("cap_length must be non-negative")
        if self.boundary_lagrangian.ambient_dim != self.boundary.n:
            raise ValueError("boundary lagrangian has the wrong ambient dimension")

    @property
    def n(self) -> int:
        return self.boundary.n

    @property
    def outward_sign(self) -> int:
        return 1 if self.side == "right_infinite" else -1

    @property
    def decay_lambda(self) -> float:
        return self.neck.decay_lambda if self.neck is not None else np.inf

    def cap_breakpoints(self) -> np.ndarray:
        """Cap sample nodes in the outward coordinate, inside ``(-T_c, 0)``."""
        if self.cap_potential is None or self.cap_length == 0:
            return np.zeros(0)
        tau = self.outward_sign * self.cap_potential.nodes
        return np.sort(tau[(tau > -self.cap_length) & (tau < 0)])

    def potential(self, t) -> np.ndarray:
        """Un-cut potential ``B`` in the end's own coordinate."""
        t = np.asarray(t, dtype=float)
        n = self.n
        on_cap = t > 0 if self.side == "left_infinite" else t < 0
        cap = eval_cap(self.cap_potential, t, n)
        neck = perturbation_potential(self.neck, self.boundary.J, t)
        return np.where(on_cap[..., None, None], cap, neck)


def validate_end(end: EndModel) -> list[str]:
    """Invariant violations of an end (empty when valid)."""
    out = [str(v) for v in validate(end.boundary)]
    if out:
        return out
    if end.boundary_lagrangian.dim * 2 != end.n:
        out.append(f"boundary lagrangian must have dimension {end.n // 2}")
    else:
        chk = is_lagrangian(end.boundary_lagrangian, Frame.full(end.n), end.boundary, tol=1e-10)
        if not chk.lagrangian:
            out.append(f"boundary lagrangian is not lagrangian (defect {chk.defect:.3e})")
    if end.neck is not None:
        if end.neck.A0.shape != (end.n, end.n):
            out.append("perturbation A0 has the wrong shape")
        else:
            out.extend(end.neck.validate(end.boundary.J, end.boundary.C))
    C = end.boundary.C
    if C is not None:
        lam = end.boundary_lagrangian
        defect = gap_directed(lam.apply(C), lam) if lam.dim else 0.0
        if defect >= 1e-10:
            out.append(f"boundary lagrangian is not C-invariant (defect {defect:.3e})")
        if end.cap_potential is not None:
            v = end.cap_potential.values
            anti = np.max(np.abs(C @ v + v @ C))
            if anti >= 1e-12 * max(1.0, float(np.max(np.abs(v)))):
                out.append(f"cap potential does not anti-commute with C (defect {anti:.3e})")
    return out


# ---------------------------------------------------------------------------
# grids


def subdivide(breakpoints, step: float) -> np.ndarray:
    """Uniformly subdivide each interval between breakpoints with spacing <= step."""
    b = np.asarray(breakpoints, dtype=float)
    pieces = [b[:1]]
    for lo, hi in zip(b[:-1], b[1:]):
        k = max(1, math.ceil((hi - lo) / step - 1e-9))
        seg = lo + (hi - lo) * np.arange(1, k + 1) / k
        seg[-1] = hi
        pieces.append(seg)
    return np.concatenate(pieces)


def neck_nodes(anchor: float, step: float, t_end: float) -> np.ndarray:
    """Neck nodes on ``[0, t_end]`` anchored at ``anchor``.

    Uniform on ``[0, anchor]``, then quarter-unit cells from ``anchor`` so
    that ``anchor + j/4`` are nodes.  ``t_end`` is rounded up to the quarter
    grid.
    """
    if anchor < 0:
        raise ValueError("anchor must be non-negative")
    quarters = max(1, math.ceil((t_end - anchor) / 0.25 - 1e-9))
    q = max(1, math.ceil(0.25 / step - 1e-9))
    tail = anchor + 0.25 * (np.arange(quarters * q + 1) / q)
    if anchor > 0:
        k = max(1, math.ceil(anchor / step - 1e-9))
        head = anchor * np.arange(k) / k
        return np.concatenate([head, tail])
    return tail


def cap_nodes(end: EndModel, step: float) -> np.ndarray:
    """Cap nodes in the outward coordinate on ``[-T_c, 0]`` (excluding 0)."""
    if end.cap_length == 0:
        return np.zeros(0)
    b = np.concatenate([[-end.cap_length], end.cap_breakpoints(), [0.0]])
    return subdivide(b, step)[:-1]


def outward_nodes(end: EndModel, step: float, anchor: float, t_end: float) -> np.ndarray:
    return np.concatenate([cap_nodes(end, step), neck_nodes(anchor, step, t_end)])


def outward_hamiltonian(end: EndModel, eta=None):
    """``H(τ) = -J D + B(τ)`` in the outward coordinate (optionally cut off)."""
    J, D = end.boundary.J, end.boundary.D
    base = -J @ D
    sign = end.outward_sign

    def H(tau):
        tau = np.asarray(tau, dtype=float)
        b = end.potential(sign * tau)
        if eta is not None:
            scale = np.where(tau < 0, 1.0, eta(tau))
            b = scale[..., None, None] * b
        return base + b

    return H


def outward_system(end: EndModel, nodes, scheme: str = "magnus4", eta=None) -> prop.HamiltonianSystem:
    J = end.outward_sign * end.boundary.J
    return prop.build_system(nodes, J, outward_hamiltonian(end, eta), scheme)


# ---------------------------------------------------------------------------
# extended kernel


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    w = np.zeros_like(grid)
    h = np.diff(grid)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def section_gram(grid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gram matrix ``G[i, j] = ∫ a_i^H b_j`` (trapezoid rule).

    ``a`` has shape (K+1, n, p), ``b`` (K+1, n, q).
    """
    w = trapezoid_weights(np.asarray(grid, dtype=float))
    return np.einsum("k,kni,knj->ij", w, np.conj(a), b)


@dataclass(frozen=True)
class EndKernel:
    """Extended-L² kernel of one end.

    Attributes
    ----------
    kappa : int
    grid : ndarray
        Nodes in the end's own coordinate (ascending).
    values : ndarray, shape (K+1, n, kappa)
        Solutions, orthonormal in the extended inner product.
    u_inf : ndarray, shape (n, kappa)
        Asymptotic values (the trace map matrix).
    tail : ndarray, shape (n, kappa)
        ``u(T_cut) - u_inf``; beyond ``T_cut`` it decays as ``exp(τ D)``.
    traces : Frame
        Trace space ``L`` inside ``ker D``.
    """

    side: str
    kappa: int
    grid: np.ndarray
    values: np.ndarray
    u_inf: np.ndarray
    tail: np.ndarray
    traces: Frame
    T_cut: float
    trace_error_bound: float
    spectral: SpectralData
    cap_length: float
    neck_index: np.ndarray = field(repr=False)

    @property
    def trace_map_matrix(self) -> np.ndarray:
        return self.u_inf

    @property
    def solutions(self) -> list[CylinderSection]:
        return [CylinderSection(self.grid, self.values[:, :, j]) for j in range(self.kappa)]

    def tail_gram(self, wa: np.ndarray, wb: np.ndarray) -> np.ndarray:
        """Closed-form ``∫_{T_cut}^∞ <·,·>`` of decaying tails ``e^{τD'} w``."""
        return tail_gram(self.spectral, self.side, wa, wb)


def tail_gram(spectral: SpectralData, side: str, wa, wb) -> np.ndarray:
    out = 0
    for mu, fr in zip(spectral.values, spectral.eigenframes):
        stable = mu < 0 if side == "right_infinite" else mu > 0
        if not stable:
            continue
        p = fr.projector
        out = out + (np.conj(p @ wa).T @ (p @ wb)) / (2 * abs(mu))
    if np.isscalar(out):
        return np.zeros((np.shape(wa)[1], np.shape(wb)[1]), dtype=complex)
    return out


def default_cut(end: EndModel, rank_tol: float, minimum: float = 0.0) -> float:
    """Cut position where the neck perturbation is below tolerance."""
    spectral_gamma = spectral_decompose(end.boundary).gamma
    t = 0.0
    if end.neck is not None:
        scale = rank_tol * max(1.0, spectral_gamma if np.isfinite(spectral_gamma) else 1.0)
        t = max(0.0, math.log(end.neck.amplitude / scale) / end.neck.decay_lambda)
    t = max(t + 1.0, minimum)
    return math.ceil(t * 4 - 1e-9) / 4


def extended_kernel(
    end: EndModel,
    T_cut: float | None = None,
    step: float = DEFAULT_STEP,
    rank_tol: float = DEFAULT_RANK_TOL,
    anchor: float = 0.0,
    scheme: str = "magnus4",
    nodes: np.ndarray | None = None,
) -> EndKernel:
    """Extended-L² kernel ``K`` and trace space ``L`` of an end.

    The frame of ``Λ`` is propagated at ``λ = 0`` from the cap end to
    ``T_cut``; solutions whose unstable component vanishes at ``T_cut`` form
    the kernel.  The trace is the ``ker D`` component at ``T_cut``.

    Parameters
    ----------
    T_cut : float, optional
        Outward cut position; defaults to where ``|A| < rank_tol max(1, γ)``.
    anchor : float
        Neck grid anchor (see :func:`neck_nodes`); glued problems pass ``r``.
    nodes : ndarray, optional
        Explicit outward nodes; overrides ``T_cut``, ``step`` and ``anchor``.
    """
    problems = validate_end(end)
    if problems:
        raise ValueError("invalid end: " + "; ".join(problems))
    spectral = spectral_decompose(end.boundary)
    if nodes is None:
        if T_cut is None:
            T_cut = default_cut(end, rank_tol, anchor + 1.0)
        if T_cut <= anchor:
            raise ValueError("T_cut must exceed the grid anchor")
        nodes = outward_nodes(end, step, anchor, T_cut)
    nodes = np.asarray(nodes, dtype=float)
    T_cut = float(nodes[-1])
    if T_cut <= 0:
        raise ValueError("T_cut must be positive")
    if end.neck is not None:
        bound = end.neck.amplitude * math.exp(-end.neck.decay_lambda * T_cut)
        if bound >= 1e-3 * max(1.0, spectral.gamma if np.isfinite(spectral.gamma) else 1.0):
            raise ValueError(f"T_cut = {T_cut} is too small (|A(T_cut)| = {bound:.3e})")

    system = outward_system(end, nodes, scheme)
    track = prop.track_frames(system, 0.0, end.boundary_lagrangian.columns, forward=True)
    q_end = track.frames[-1]
    unstable = spectral.unstable_frame(end.side)
    m = q_end.shape[1]
    if unstable.dim:
        _, s, vh = np.linalg.svd(unstable.columns.conj().T @ q_end)
        rank = int(np.sum(s > rank_tol))
        coeffs = vh.conj().T[:, rank:]
    else:
        coeffs = np.eye(m, dtype=complex)
    values = track.section(coeffs)  # (K+1, n, kappa) in outward order
    kappa = values.shape[2]

    p0 = spectral.kernel.projector
    u_end = values[-1]
    u_inf = p0 @ u_end
    tail = u_end - u_inf
    cap_mask = nodes <= 0
    neck_mask = nodes >= 0
    gram = _extended_gram(
        nodes, cap_mask, neck_mask, values, u_inf, values, u_inf,
        tail_gram(spectral, end.side, tail, tail),
    )
    if kappa:
        gram = 0.5 * (gram + gram.conj().T)
        chol = np.linalg.cholesky(gram)
        transform = np.linalg.inv(chol).conj().T
        values = values @ transform
        u_inf = u_inf @ transform
        tail = tail @ transform
    traces = orthonormalize(u_inf, rank_tol) if kappa else Frame.zero(end.n)

    err = 0.0
    if end.neck is not None and kappa:
        lam = end.neck.decay_lambda
        size = float(np.max(np.linalg.norm(values[-1], axis=0)))
        err = end.neck.amplitude * math.exp(-lam * T_cut) / lam * size
        if np.isfinite(spectral.gamma):
            err *= 1.0 + spectral.gamma ** -2

    if end.side == "left_infinite":
        grid = -nodes[::-1]
        values = values[::-1]
        neck_index = np.nonzero(neck_mask[::-1])[0]
    else:
        grid = nodes
        neck_index = np.nonzero(neck_mask)[0]
    return EndKernel(
        side=end.side,
        kappa=kappa,
        grid=grid,
        values=np.ascontiguousarray(values),
        u_inf=u_inf,
        tail=tail,
        traces=traces,
        T_cut=T_cut,
        trace_error_bound=float(err),
        spectral=spectral,
        cap_length=end.cap_length,
        neck_index=neck_index,
    )


def _extended_gram(nodes, cap_mask, neck_mask, a, a_inf, b, b_inf, tail_part) -> np.ndarray:
    g = np.conj(a_inf).T @ b_inf + tail_part
    if np.count_nonzero(cap_mask) > 1:
        g = g + section_gram(nodes[cap_mask], a[cap_mask], b[cap_mask])
    if np.count_nonzero(neck_mask) > 1:
        da = a[neck_mask] - a_inf[None]
        db = b[neck_mask] - b_inf[None]
        g = g + section_gram(nodes[neck_mask], da, db)
    return g


def kernel_gram(k: EndKernel) -> np.ndarray:
    """Extended Gram matrix of the stored basis (identity up to rounding)."""
    nodes = k.grid
    cap_mask = nodes <= 0 if k.side == "right_infinite" else nodes >= 0
    neck_mask = nodes >= 0 if k.side == "right_infinite" else nodes <= 0
    return _extended_gram(
        nodes, cap_mask, neck_mask, k.values, k.u_inf, k.values, k.u_inf,
        k.tail_gram(k.tail, k.tail),
    )


@dataclass(frozen=True)
class DifferenceKernel:
    """Kernel of the trace difference map on ``K1 ⊕ K2``.

    ``K_inf_frame`` lives in the coefficient space ``C^{κ1+κ2}`` of the two
    orthonormal kernel bases; it is ``None`` when both kernels are zero.
    """

    K_inf_frame: Frame | None
    dim_K_inf: int
    L_sum: Frame
    L_cap: Frame
    delta_matrix: np.ndarray
    consistent: bool


def difference_kernel(
    K1: EndKernel, K2: EndKernel, spectral: SpectralData | None = None,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> DifferenceKernel:
    """``ker(T1 - T2)`` together with ``L1 + L2`` and ``L1 ∩ L2``."""
    from .subspaces import subspace_intersection

    if K1.u_inf.shape[0] != K2.u_inf.shape[0]:
        raise ValueError("kernels belong to different boundary models")
    if spectral is not None and spectral.n != K1.u_inf.shape[0]:
        raise ValueError("spectral data does not match the kernels")
    n = K1.u_inf.shape[0]
    delta = np.hstack([K1.u_inf, -K2.u_inf])
    total = K1.kappa + K2.kappa
    if total == 0:
        return DifferenceKernel(None, 0, Frame.zero(n), Frame.zero(n), delta, True)
    u, s, vh = np.linalg.svd(delta) if delta.size else (None, np.zeros(0), np.eye(total))
    rank = int(np.sum(s > rank_tol)) if s.size else 0
    null = vh.conj().T[:, rank:]
    k_inf = Frame(null) if null.shape[1] else Frame.zero(total)
    l_sum = Frame(u[:, :rank]) if rank else Frame.zero(n)
    l_cap = subspace_intersection(K1.traces, K2.traces, rank_tol)
    consistent = (total - rank) == k_inf.dim
    return DifferenceKernel(k_inf, k_inf.dim, l_sum, l_cap, delta, consistent)
