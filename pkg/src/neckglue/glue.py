"""Assembly of the glued interval problem, the gluing map and the splitting map.

The glued problem lives on ``x ∈ [0, L_tot]`` with ``L_tot = T_c1 + 2r + 3 +
T_c2``.  Side 1 uses ``t = x - T_c1`` and side 2 uses ``s = t - (2r + 3)``;
the two neck pieces meet at ``t = r + 3/2`` (``s = -r - 3/2``).  Each side
potential is multiplied by the cutoff ``η_r`` along its neck, so the band
``t ∈ [r + 1, r + 2]`` carries no perturbation for ``r >= 1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import propagation as prop
from .boundary import BoundaryModel, SpectralData, spectral_decompose
from .ends import (
    DEFAULT_STEP,
    EndKernel,
    EndModel,
    section_gram,
    outward_nodes,
    tail_gram,
    trapezoid_weights,
    validate_end,
)
from .necks import CylinderSection, eval_cutoff, eval_cutoff_derivative, eval_perturbation
from .subspaces import Frame

CONVENTIONS = ("frozen", "window")


@dataclass(frozen=True)
class GluedProblem:
    """The operator ``J d/dx - J D + B_r(x)`` on ``[0, L_tot]`` with lagrangian ends.

    Attributes
    ----------
    grid : ndarray
        Global nodes ``x``.
    mid_index : int
        Index of the node ``t = r + 3/2``; nodes ``0..mid_index`` belong to
        side 1 and ``mid_index..`` to side 2.
    side1_tau, side2_tau : ndarray
        Outward coordinates of the side nodes (``t`` for side 1, ``-s`` for
        side 2), both ascending from ``-T_c`` to ``r + 3/2``.
    """

    end1: EndModel
    end2: EndModel
    r: float
    step: float
    grid: np.ndarray
    mid_index: int
    side1_tau: np.ndarray
    side2_tau: np.ndarray
    system: prop.HamiltonianSystem
    spectral: SpectralData
    scheme: str

    @property
    def boundary(self) -> BoundaryModel:
        return self.end1.boundary

    @property
    def n(self) -> int:
        return self.boundary.n

    @property
    def T_c1(self) -> float:
        return self.end1.cap_length

    @property
    def T_c2(self) -> float:
        return self.end2.cap_length

    @property
    def total_length(self) -> float:
        return self.T_c1 + 2 * self.r + 3 + self.T_c2

    @property
    def lambda_left(self) -> Frame:
        return self.end1.boundary_lagrangian

    @property
    def lambda_right(self) -> Frame:
        return self.end2.boundary_lagrangian

    @property
    def decay_rate(self) -> float:
        """``min(γ, λ_1, λ_2)`` with ``inf`` meaning no constraint."""
        return float(min(self.spectral.gamma, self.end1.decay_lambda, self.end2.decay_lambda))

    def to_t(self, x):
        return np.asarray(x, dtype=float) - self.T_c1

    def to_s(self, x):
        return np.asarray(x, dtype=float) - self.T_c1 - (2 * self.r + 3)

    def side2_indices(self) -> np.ndarray:
        """Glued node indices of side 2 in outward order (``τ = -s`` ascending)."""
        return np.arange(self.grid.size - 1, self.mid_index - 1, -1)

    def potential(self, x) -> np.ndarray:
        """Glued potential ``B_r(x)`` (Hermitian)."""
        x = np.asarray(x, dtype=float)
        t = self.to_t(x)
        s = self.to_s(x)
        r = self.r
        b1 = self.end1.potential(t)
        b2 = self.end2.potential(s)
        eta1 = np.where(t < 0, 1.0, eval_cutoff(r, t))
        eta2 = np.where(s > 0, 1.0, eval_cutoff(r, s))
        first = (t <= r + 1.5)[..., None, None]
        return np.where(first, eta1[..., None, None] * b1, eta2[..., None, None] * b2)

    def hamiltonian(self, x) -> np.ndarray:
        """``H(x) = -J D + B_r(x)``."""
        J, D = self.boundary.J, self.boundary.D
        return -J @ D + self.potential(x)


def assemble(
    end1: EndModel, end2: EndModel, r: float, step: float = DEFAULT_STEP, scheme: str = "magnus4"
) -> GluedProblem:
    """Glue two ends along a neck of parameter ``r``."""
    if end1.boundary is not end2.boundary:
        same = (
            np.array_equal(end1.boundary.D, end2.boundary.D)
            and np.array_equal(end1.boundary.J, end2.boundary.J)
            and (
                (end1.boundary.C is None and end2.boundary.C is None)
                or (
                    end1.boundary.C is not None
                    and end2.boundary.C is not None
                    and np.array_equal(end1.boundary.C, end2.boundary.C)
                )
            )
        )
        if not same:
            raise ValueError("ends use different boundary models")
    if end1.side != "right_infinite" or end2.side != "left_infinite":
        raise ValueError("end1 must be right_infinite and end2 left_infinite")
    if not r >= 1:
        raise ValueError("r must be at least 1")
    if not step > 0:
        raise ValueError("step must be positive")
    for end in (end1, end2):
        problems = validate_end(end)
        if problems:
            raise ValueError("invalid end: " + "; ".join(problems))
    r = float(r)
    tau1 = outward_nodes(end1, step, r, r + 1.5)
    tau2 = outward_nodes(end2, step, r, r + 1.5)
    T1 = end1.cap_length
    x1 = T1 + tau1
    x2 = T1 + (2 * r + 3) - tau2[::-1]
    grid = np.concatenate([x1, x2[1:]])
    mid = tau1.size - 1
    spectral = spectral_decompose(end1.boundary)
    problem = GluedProblem(
        end1=end1,
        end2=end2,
        r=r,
        step=float(step),
        grid=grid,
        mid_index=mid,
        side1_tau=tau1,
        side2_tau=tau2,
        system=None,
        spectral=spectral,
        scheme=scheme,
    )
    system = prop.build_system(grid, end1.boundary.J, problem.hamiltonian, scheme)
    object.__setattr__(problem, "system", system)
    return problem


def glued_kernel_nodes(problem: GluedProblem, side: int, T_cut: float) -> np.ndarray:
    """Outward end nodes that coincide with the glued grid up to ``r + 3/2``."""
    end = problem.end1 if side == 1 else problem.end2
    return outward_nodes(end, problem.step, problem.r, T_cut)


# ---------------------------------------------------------------------------
# gluing map


def _outward(k: EndKernel) -> np.ndarray:
    return k.values if k.side == "right_infinite" else k.values[::-1]


def _outward_grid(k: EndKernel) -> np.ndarray:
    return k.grid if k.side == "right_infinite" else -k.grid[::-1]


def _check_alignment(problem: GluedProblem, K1: EndKernel, K2: EndKernel) -> None:
    for tau, k in ((problem.side1_tau, K1), (problem.side2_tau, K2)):
        g = _outward_grid(k)
        if g.size < tau.size or not np.allclose(g[: tau.size], tau, rtol=0, atol=1e-12):
            raise ValueError(
                "kernel grids must coincide with the glued grid; compute them with "
                "glued_kernel_nodes"
            )


@dataclass(frozen=True)
class GluedSection:
    """A section on the glued grid."""

    grid: np.ndarray
    values: np.ndarray

    def norm(self) -> float:
        w = trapezoid_weights(self.grid)
        return float(np.sqrt(np.sum(w[:, None] * np.abs(self.values) ** 2)))

    def as_section(self) -> CylinderSection:
        return CylinderSection(self.grid, self.values)


def glue_map(
    problem: GluedProblem,
    K1: EndKernel,
    K2: EndKernel,
    coeffs,
    trace_tol: float = 1e-8,
) -> tuple[GluedSection, GluedSection]:
    """Gluing map applied to ``(û1, û2) = (K1 c1, K2 c2)``.

    Parameters
    ----------
    coeffs : ndarray, shape (κ1 + κ2,) or (κ1 + κ2, p)
        Coefficients on the orthonormal kernel bases; the pair must have a
        common trace.

    Returns
    -------
    section, residual : GluedSection
        ``Ψ_r`` on the glued grid (values shape (N, n) or (N, n, p)) and the
        exact operator residual ``𝔻_r Ψ_r`` (supported where ``η_r'`` or
        ``η_r(1 - η_r)`` is nonzero).
    """
    _check_alignment(problem, K1, K2)
    c = np.asarray(coeffs, dtype=complex)
    single = c.ndim == 1
    if single:
        c = c[:, None]
    if c.shape[0] != K1.kappa + K2.kappa:
        raise ValueError("coefficient vector has the wrong length")
    c1, c2 = c[: K1.kappa], c[K1.kappa:]
    inf1 = K1.u_inf @ c1
    inf2 = K2.u_inf @ c2
    scale = max(1.0, float(np.max(np.linalg.norm(c, axis=0))))
    mismatch = float(np.max(np.linalg.norm(inf1 - inf2, axis=0))) if c.shape[1] else 0.0
    if mismatch > trace_tol * scale:
        raise ValueError(f"traces differ by {mismatch:.3e}; input is not in the difference kernel")
    u_inf = 0.5 * (inf1 + inf2)

    r = problem.r
    n = problem.n
    J = problem.boundary.J
    values = np.zeros((problem.grid.size, n, c.shape[1]), dtype=complex)
    residual = np.zeros_like(values)
    sides = (
        (problem.side1_tau, K1, c1, problem.end1, np.arange(problem.mid_index + 1), 1.0),
        (problem.side2_tau, K2, c2, problem.end2, problem.side2_indices(), -1.0),
    )
    for tau, k, ck, end, idx, sign in sides:
        u = _outward(k)[: tau.size] @ ck  # (m, n, p)
        neck = tau >= 0
        eta = np.where(neck, eval_cutoff(r, tau), 1.0)
        deta = np.where(neck, eval_cutoff_derivative(r, tau), 0.0)
        diff = u - u_inf[None]
        v = u_inf[None] + eta[:, None, None] * diff
        values[idx] = v
        # derivative along x is sign * d/dτ
        a = eval_perturbation(end.neck, tau, n)
        a = np.where(neck[:, None, None], a, 0.0)
        term = sign * deta[:, None, None] * diff + (eta * (1 - eta))[:, None, None] * (a @ diff)
        residual[idx] = J @ term
    if single:
        values, residual = values[..., 0], residual[..., 0]
    return GluedSection(problem.grid, values), GluedSection(problem.grid, residual)


# ---------------------------------------------------------------------------
# splitting map


@dataclass(frozen=True)
class ExtendedSection:
    """One half of a split section, as an extended-L² section of an end.

    ``tau``/``values`` cover the cap and the neck up to the freeze slice in
    outward order.  Beyond the slice the section is the constant ``frozen``.
    ``u_inf`` is its asymptotic value: ``frozen`` itself for the ``frozen``
    convention, its ``ker D`` component for the ``window`` convention (the
    remainder is kept for a window of length ``window`` and then dropped).
    """

    tau: np.ndarray
    values: np.ndarray
    frozen: np.ndarray
    u_inf: np.ndarray
    window: float
    norm: float


def _neck_weights(tau: np.ndarray):
    cap = tau <= 0
    neck = tau >= 0
    return cap, neck


def _split_side(tau, vals, freeze_idx, p0, convention, window) -> ExtendedSection:
    t = tau[: freeze_idx + 1]
    v = vals[: freeze_idx + 1]
    frozen = v[-1]
    if convention == "frozen":
        u_inf = frozen
        off = np.zeros_like(frozen)
        w = 0.0
    else:
        u_inf = p0 @ frozen
        off = frozen - u_inf
        w = window
    cap, neck = _neck_weights(t)
    nrm2 = np.sum(np.abs(u_inf) ** 2, axis=0)
    if np.count_nonzero(cap) > 1:
        wc = trapezoid_weights(t[cap])
        nrm2 = nrm2 + np.einsum("k,kn...->...", wc, np.abs(v[cap]) ** 2)
    if np.count_nonzero(neck) > 1:
        wn = trapezoid_weights(t[neck])
        nrm2 = nrm2 + np.einsum("k,kn...->...", wn, np.abs(v[neck] - u_inf[None]) ** 2)
    nrm2 = nrm2 + w * np.sum(np.abs(off) ** 2, axis=0)
    return ExtendedSection(t, v, frozen, u_inf, w, np.sqrt(nrm2))


def freeze_index(tau: np.ndarray, r: float) -> int:
    return int(np.argmin(np.abs(tau - r)))


def split_map(
    problem: GluedProblem, psi, convention: str = "frozen", window: float | None = None
) -> tuple[ExtendedSection, ExtendedSection]:
    """Restrict a glued section to each side and freeze it at the slice ``|t| = r``.

    Parameters
    ----------
    psi : ndarray, shape (N, n) or (N, n, p)
        Values on the glued grid.
    convention : {"frozen", "window"}
        See :class:`ExtendedSection`.
    window : float, optional
        Window length for the ``window`` convention (default ``10/max(γ, 1)``).
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    psi = np.asarray(psi, dtype=complex)
    if psi.shape[0] != problem.grid.size:
        raise ValueError("psi must be sampled on the glued grid")
    if window is None:
        g = problem.spectral.gamma
        window = 10.0 / max(g if np.isfinite(g) else 1.0, 1.0)
    p0 = problem.spectral.kernel.projector
    out = []
    for tau, idx in (
        (problem.side1_tau, np.arange(problem.mid_index + 1)),
        (problem.side2_tau, problem.side2_indices()),
    ):
        k = freeze_index(tau, problem.r)
        out.append(_split_side(tau, psi[idx], k, p0, convention, window))
    return out[0], out[1]


def split_inner(split: ExtendedSection, kernel: EndKernel) -> np.ndarray:
    """Extended inner products ``<k_j, S ψ>`` with the kernel basis.

    Returns shape (κ,) or (κ, p).
    """
    tau = split.tau
    m = tau.size
    kv = _outward(kernel)
    kg = _outward_grid(kernel)
    if kg.size < m or not np.allclose(kg[:m], tau, rtol=0, atol=1e-12):
        raise ValueError("kernel grid does not match the split section")
    v = split.values
    single = v.ndim == 2
    if single:
        v = v[..., None]
    u_inf = split.u_inf if not single else split.u_inf[:, None]
    frozen = split.frozen if not single else split.frozen[:, None]
    g = np.conj(kernel.u_inf).T @ u_inf
    cap, neck = _neck_weights(tau)
    if np.count_nonzero(cap) > 1:
        g = g + section_gram(tau[cap], kv[:m][cap], v[cap])
    if np.count_nonzero(neck) > 1:
        g = g + section_gram(
            tau[neck], kv[:m][neck] - kernel.u_inf[None], v[neck] - u_inf[None]
        )
    if split.window > 0:
        off = frozen - u_inf
        lo = tau[-1]
        hi = lo + split.window
        sel = (kg >= lo - 1e-12) & (kg <= hi + 1e-12)
        grid = kg[sel]
        diff = kv[sel] - kernel.u_inf[None]
        if grid.size > 1:
            w = trapezoid_weights(grid)
            g = g + np.einsum("k,kni,nj->ij", w, np.conj(diff), off)
        if hi > kg[-1] + 1e-12:
            raise ValueError("kernel grid is shorter than the split window")
    return g[:, 0] if single else g


def split_gram(a: ExtendedSection, b: ExtendedSection) -> np.ndarray:
    """Extended Gram matrix ``<S a_i, S b_j>`` of two split families on one side."""
    if a.tau.size != b.tau.size:
        raise ValueError("split sections from different grids")
    va = a.values if a.values.ndim == 3 else a.values[..., None]
    vb = b.values if b.values.ndim == 3 else b.values[..., None]
    ia = a.u_inf if a.u_inf.ndim == 2 else a.u_inf[:, None]
    ib = b.u_inf if b.u_inf.ndim == 2 else b.u_inf[:, None]
    fa = a.frozen if a.frozen.ndim == 2 else a.frozen[:, None]
    fb = b.frozen if b.frozen.ndim == 2 else b.frozen[:, None]
    g = np.conj(ia).T @ ib
    cap, neck = _neck_weights(a.tau)
    if np.count_nonzero(cap) > 1:
        g = g + section_gram(a.tau[cap], va[cap], vb[cap])
    if np.count_nonzero(neck) > 1:
        g = g + section_gram(a.tau[neck], va[neck] - ia[None], vb[neck] - ib[None])
    g = g + a.window * (np.conj(fa - ia).T @ (fb - ib))
    return g


__all__ = [
    "CONVENTIONS",
    "ExtendedSection",
    "GluedProblem",
    "GluedSection",
    "assemble",
    "glue_map",
    "glued_kernel_nodes",
    "split_gram",
    "split_inner",
    "split_map",
    "tail_gram",
]
