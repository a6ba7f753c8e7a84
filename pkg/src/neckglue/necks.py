"""Neck perturbations, the cutoff profile, slice norms and estimate checkers.

Along a cylindrical end the operator is ``J(d/dt - D) + B(t)`` with
``B(t) = -J A(t)`` and ``A(t) = C_A exp(-λ|t|) A0``.  Sections of the end
are sampled on increasing grids; all integrals use the trapezoid rule on the
piecewise-linear interpolant of ``|u|^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .boundary import STRUCTURE_TOL, SpectralData

CUTOFF_START = 0.25
CUTOFF_END = 0.75
CUTOFF_SLOPE_MAX = 3.75


# ---------------------------------------------------------------------------
# perturbations


@dataclass(frozen=True)
class NeckPerturbation:
    """Exponentially decaying neck perturbation ``A(t) = C_A e^{-λ|t|} A0``.

    ``A0`` is rescaled to unit spectral norm on construction.
    """

    A0: np.ndarray
    decay_lambda: float
    amplitude: float

    def __post_init__(self):
        a0 = np.array(self.A0, dtype=complex)
        if a0.ndim != 2 or a0.shape[0] != a0.shape[1]:
            raise ValueError("A0 must be a square matrix")
        norm = np.linalg.norm(a0, 2)
        if norm == 0:
            raise ValueError("A0 must be nonzero")
        if not self.decay_lambda > 0:
            raise ValueError("decay_lambda must be positive")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        a0 = a0 / norm
        a0.setflags(write=False)
        object.__setattr__(self, "A0", a0)
        object.__setattr__(self, "decay_lambda", float(self.decay_lambda))
        object.__setattr__(self, "amplitude", float(self.amplitude))

    def structure_defects(self, J: np.ndarray, C: np.ndarray | None = None) -> dict:
        """Defects of the admissibility relations for this perturbation.

        ``B0 = -J A0`` must be Hermitian and ``A0`` must anti-commute with
        ``J``.  With a chirality, ``B0`` must anti-commute with ``C``, which
        is the same as ``A0`` commuting with ``C``.
        """
        a0 = self.A0
        b0 = -J @ a0
        out = {
            "JA0+A0J = 0": float(np.linalg.norm(J @ a0 + a0 @ J, 2)),
            "B0† = B0": float(np.linalg.norm(b0 - b0.conj().T, 2)),
        }
        if C is not None:
            out["CA0−A0C = 0"] = float(np.linalg.norm(C @ a0 - a0 @ C, 2))
        return out

    def validate(self, J: np.ndarray, C: np.ndarray | None = None) -> list[str]:
        return [
            f"{name} (defect {d:.3e})"
            for name, d in self.structure_defects(J, C).items()
            if not d < STRUCTURE_TOL * max(1, J.shape[0])
        ]


def eval_perturbation(p: NeckPerturbation | None, t, n: int | None = None) -> np.ndarray:
    """``A(t)``; vectorized over ``t`` (returns shape ``t.shape + (n, n)``)."""
    t = np.asarray(t, dtype=float)
    if p is None:
        if n is None:
            raise ValueError("n is required for a zero perturbation")
        return np.zeros(t.shape + (n, n), dtype=complex)
    scale = p.amplitude * np.exp(-p.decay_lambda * np.abs(t))
    return scale[..., None, None] * p.A0


def perturbation_potential(p: NeckPerturbation | None, J: np.ndarray, t) -> np.ndarray:
    """Hermitian potential ``B(t) = -J A(t)``."""
    J = np.asarray(J, dtype=complex)
    return -J @ eval_perturbation(p, t, J.shape[0])


def decay_check(p: NeckPerturbation, t: float, samples: int = 201) -> tuple[float, float]:
    """Sampled ``sup |A|`` over a unit window and the bound ``C_A e^{-λ|t|}``.

    The window is ``[t, t+1]`` for ``t >= 0`` and ``[t-1, t]`` for ``t < 0``
    so that it points into the end.
    """
    s = np.linspace(t, t + 1, samples) if t >= 0 else np.linspace(t - 1, t, samples)
    sup = float(np.max(p.amplitude * np.exp(-p.decay_lambda * np.abs(s))))
    return sup, p.amplitude * float(np.exp(-p.decay_lambda * abs(t)))


# ---------------------------------------------------------------------------
# cutoff


def smoothstep(x):
    """Quintic smoothstep ``6x^5 - 15x^4 + 10x^3`` clamped to [0, 1]."""
    x = np.clip(x, 0.0, 1.0)
    # evaluate near the end that is closer, using s(x) = 1 - s(1 - x), so the
    # rounding error is relative to the small side and the plateaus are exact
    y = np.minimum(x, 1.0 - x)
    low = y * y * y * (y * (6.0 * y - 15.0) + 10.0)
    return np.where(x <= 0.5, low, 1.0 - low)


def cutoff(t):
    """Canonical cutoff: 1 on ``t <= 1/4``, 0 on ``t >= 3/4``."""
    x = (np.asarray(t, dtype=float) - CUTOFF_START) / (CUTOFF_END - CUTOFF_START)
    return 1.0 - smoothstep(x)


def cutoff_derivative(t):
    x = (np.asarray(t, dtype=float) - CUTOFF_START) / (CUTOFF_END - CUTOFF_START)
    inside = (x > 0) & (x < 1)
    ds = 30.0 * x * x * (1.0 - x) ** 2
    return np.where(inside, -ds / (CUTOFF_END - CUTOFF_START), 0.0)


def eval_cutoff(r: float, t):
    """``η_r(t) = η(|t| - r)``."""
    out = cutoff(np.abs(np.asarray(t, dtype=float)) - r)
    return float(out) if np.ndim(out) == 0 else out


def eval_cutoff_derivative(r: float, t):
    """Derivative of ``η_r`` with respect to ``t``."""
    t = np.asarray(t, dtype=float)
    out = np.sign(t) * cutoff_derivative(np.abs(t) - r)
    return float(out) if np.ndim(out) == 0 else out


def with_cutoff(p: NeckPerturbation | None, r: float, t, n: int | None = None) -> np.ndarray:
    """``η_r(t) A(t)``."""
    eta = np.asarray(eval_cutoff(r, t))
    return eta[..., None, None] * eval_perturbation(p, t, n)


# ---------------------------------------------------------------------------
# sections and slice norms


@dataclass(frozen=True)
class CylinderSection:
    """A section sampled on strictly increasing nodes.

    Attributes
    ----------
    grid : ndarray, shape (K+1,)
    values : ndarray, shape (K+1, n)
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        values = np.array(self.values, dtype=complex)
        if values.ndim == 1:
            values = values[:, None]
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("a section needs at least two nodes")
        if values.shape[0] != grid.size:
            raise ValueError("values must have one row per grid node")
        if not np.all(np.diff(grid) > 0):
            raise ValueError("grid must be strictly increasing")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def step(self) -> float:
        return float(np.max(np.diff(self.grid)))

    def pointwise_norm2(self) -> np.ndarray:
        return np.sum(np.abs(self.values) ** 2, axis=1)

    def map(self, matrix: np.ndarray) -> "CylinderSection":
        """Apply a constant matrix pointwise."""
        return CylinderSection(self.grid, self.values @ np.asarray(matrix).T)


def _cumulative(grid: np.ndarray, f: np.ndarray) -> np.ndarray:
    out = np.zeros_like(f, dtype=float)
    out[1:] = np.cumsum(0.5 * np.diff(grid) * (f[1:] + f[:-1]))
    return out


def _antiderivative_at(grid, f, cum, x):
    """Integral of the piecewise-linear interpolant of ``f`` from grid[0] to x."""
    x = np.asarray(x, dtype=float)
    k = np.clip(np.searchsorted(grid, x, side="right") - 1, 0, grid.size - 2)
    dx = x - grid[k]
    slope = (f[k + 1] - f[k]) / (grid[k + 1] - grid[k])
    fx = f[k] + slope * dx
    return cum[k] + 0.5 * dx * (f[k] + fx)


def window_integral(grid, f, a, b):
    """Integral over ``[a, b]`` of the piecewise-linear interpolant of ``f``."""
    grid = np.asarray(grid, dtype=float)
    f = np.asarray(f, dtype=float)
    cum = _cumulative(grid, f)
    return _antiderivative_at(grid, f, cum, b) - _antiderivative_at(grid, f, cum, a)


def _slack(grid) -> float:
    return 1e-9 * max(1.0, abs(grid[0]), abs(grid[-1]))


def _slice_norms(u: CylinderSection, s) -> np.ndarray:
    f = u.pointwise_norm2()
    cum = _cumulative(u.grid, f)
    s = np.asarray(s, dtype=float)
    lo = _antiderivative_at(u.grid, f, cum, s)
    hi = _antiderivative_at(u.grid, f, cum, np.minimum(s + 1.0, u.grid[-1]))
    return np.sqrt(np.maximum(hi - lo, 0.0))


def slice_norm(u: CylinderSection, t: float) -> float:
    """``ρ_t(u)``: L² norm of ``u`` over the slab ``[t, t+1]``."""
    eps = _slack(u.grid)
    if t < u.grid[0] - eps or t + 1.0 > u.grid[-1] + eps:
        raise ValueError(f"slab [{t}, {t + 1}] is outside the grid")
    return float(_slice_norms(u, t))


def tail_sup(u: CylinderSection, t: float, L: float | None = None) -> float:
    """``q_{t,L}(u)``: supremum of ``ρ_s(u)`` over ``t <= s <= L - 1``.

    With the piecewise-linear interpolant of ``|u|^2``, ``ρ_s^2`` is a
    piecewise quadratic in ``s`` with breaks where ``s`` or ``s + 1`` is a
    node, so the supremum is attained at ``t``, ``L - 1``, a break, or an
    interior critical point; all of these are evaluated.
    """
    grid = u.grid
    end = grid[-1] if L is None else min(L, grid[-1])
    eps = _slack(grid)
    if t < grid[0] - eps or t + 1.0 > end + eps:
        raise ValueError(f"slab [{t}, {t + 1}] is outside the grid")
    last = max(t, end - 1.0)
    breaks = np.concatenate([grid, grid - 1.0])
    pts = np.concatenate([[t], np.unique(breaks[(breaks > t) & (breaks < last)]), [last]])
    f = u.pointwise_norm2()
    a, b = pts[:-1], pts[1:]
    # d/ds ρ_s^2 = f(s + 1) - f(s) is linear on each piece
    da = np.interp(a + 1.0, grid, f) - np.interp(a, grid, f)
    db = np.interp(b + 1.0, grid, f) - np.interp(b, grid, f)
    sign_change = da * db < 0
    crit = a[sign_change] - da[sign_change] * (b - a)[sign_change] / (db - da)[sign_change]
    return float(np.max(_slice_norms(u, np.concatenate([pts, crit]))))


def _tail_sup_profile(u: CylinderSection, s_values) -> np.ndarray:
    """``q_{s,L}`` at each of ``s_values`` (vectorized over grid nodes)."""
    eps = _slack(u.grid)
    starts = u.grid[u.grid + 1.0 <= u.grid[-1] + eps]
    rho = _slice_norms(u, starts)
    # suffix maximum over nodes
    suffix = np.maximum.accumulate(rho[::-1])[::-1]
    out = []
    for s in np.atleast_1d(s_values):
        k = np.searchsorted(starts, s, side="right")
        tail = suffix[k] if k < suffix.size else 0.0
        out.append(max(float(_slice_norms(u, s)), tail))
    return np.array(out)


# ---------------------------------------------------------------------------
# appendix scalar lemma


@dataclass(frozen=True)
class InequalityCheck:
    """Both sides of an inequality ``lhs <= rhs``.

    ``rhs`` is the explicit constant chain from the proof and is the side that
    is asserted.  ``stated_rhs`` is the simplified published form, reported
    for comparison.
    """

    lhs: float
    rhs: float
    stated_rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-6) + 1e-14

    @property
    def stated_holds(self) -> bool:
        return self.lhs <= self.stated_rhs * (1 + 1e-6) + 1e-14

    @property
    def margin(self) -> float:
        """Relative slack ``(rhs - lhs) / max(rhs, tiny)``."""
        return (self.rhs - self.lhs) / max(self.rhs, 1e-300)


def unit_exponential_l2(mu: float) -> float:
    """``(∫_0^1 e^{-2|μ|s} ds)^{1/2}``, the Cauchy–Schwarz factor of one unit step."""
    a = abs(mu)
    if a < 1e-8:
        return float(np.sqrt(1.0 - a))
    return float(np.sqrt(-np.expm1(-2 * a) / (2 * a)))


def _as_section(x, grid=None) -> CylinderSection:
    if isinstance(x, CylinderSection):
        return x
    if grid is None:
        raise ValueError("a grid is required for raw samples")
    return CylinderSection(grid, x)


def _ode_residual(grid, u, rhs) -> float:
    du = CubicSpline(grid, u, axis=0)(grid, 1)
    res = du - rhs
    scale = max(1.0, float(np.max(np.abs(du))), float(np.max(np.abs(rhs))))
    return float(np.max(np.abs(res)) / scale)


def _node_value(section: CylinderSection, t: float) -> np.ndarray:
    g = section.grid
    k = int(np.argmin(np.abs(g - t)))
    if abs(g[k] - t) <= _slack(g):
        return section.values[k]
    return np.array([np.interp(t, g, section.values[:, j]) for j in range(section.n)])


def _integral_of_tail_sup(f: CylinderSection, t: float, n_steps: int) -> float:
    g = f.grid
    inside = g[(g > t) & (g < t + n_steps)]
    s = np.concatenate([[t], inside, [t + n_steps]])
    q = _tail_sup_profile(f, s)
    return float(np.trapezoid(q, s))


def scalar_ode_bounds(
    mu: float,
    u,
    f,
    t: float,
    n_steps: int,
    grid=None,
    tol: float = 1e-4,
) -> dict[str, InequalityCheck]:
    """Both sides of the scalar-ODE bounds for ``u' = μ u + f``.

    Returns a dict keyed by ``"a1"`` (μ = 0), ``"a2"`` (μ > 0) or ``"a3"``
    (μ < 0).  With ``κ(μ) = (∫_0^1 e^{-2|μ|s} ds)^{1/2}`` the asserted chains
    are::

        a1: |u(t) - u(t+n)| <= Σ_k ρ_{t+k}(f)
        a2: |u(t)|   <= e^{-nμ}|u(t+n)| + κ Σ_k e^{-kμ} ρ_{t+k}(f)
        a3: |u(t+n)| <= e^{-n|μ|}|u(t)| + κ Σ_k e^{-k|μ|} ρ_{t+n-1-k}(f)

    ``stated_rhs`` holds ``∫_t^{t+n} q_{s,L}(f) ds`` for a1 and the
    ``q_{t,L}(f) / (|μ|(1 - e^{-|μ|}))`` form for a2/a3.

    Parameters
    ----------
    u, f : CylinderSection or array
        Scalar samples (raw arrays need ``grid``).
    tol : float
        Maximum relative residual of ``u' - μu - f`` (spline derivative).
    """
    us = _as_section(u, grid)
    fs = _as_section(f, us.grid if grid is None else grid)
    if us.n != 1 or fs.n != 1:
        raise ValueError("scalar samples expected")
    if us.grid.shape != fs.grid.shape or not np.allclose(us.grid, fs.grid, rtol=0, atol=0):
        raise ValueError("u and f must share the grid")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if t < us.grid[0] - _slack(us.grid) or t + n_steps > us.grid[-1] + _slack(us.grid):
        raise ValueError("t + n_steps exceeds the grid")
    residual = _ode_residual(us.grid, us.values[:, 0], mu * us.values[:, 0] + fs.values[:, 0])
    if residual > tol:
        raise ValueError(f"u and f do not satisfy u' = mu u + f (residual {residual:.3e})")

    u_t = abs(_node_value(us, t)[0])
    u_tn = abs(_node_value(us, t + n_steps)[0])
    if mu == 0:
        lhs = abs(_node_value(us, t)[0] - _node_value(us, t + n_steps)[0])
        rhs = sum(slice_norm(fs, t + k) for k in range(n_steps))
        stated = _integral_of_tail_sup(fs, t, n_steps)
        return {"a1": InequalityCheck(float(lhs), float(rhs), stated)}
    a = abs(mu)
    kappa = unit_exponential_l2(a)
    q = tail_sup(fs, t)
    simplified = q / (a * -np.expm1(-a))
    if mu > 0:
        rhs = np.exp(-n_steps * a) * u_tn + kappa * sum(
            np.exp(-k * a) * slice_norm(fs, t + k) for k in range(n_steps)
        )
        stated = np.exp(-n_steps * a) * u_tn + simplified
        return {"a2": InequalityCheck(float(u_t), float(rhs), float(stated))}
    rhs = np.exp(-n_steps * a) * u_t + kappa * sum(
        np.exp(-k * a) * slice_norm(fs, t + n_steps - 1 - k) for k in range(n_steps)
    )
    stated = np.exp(-n_steps * a) * u_t + simplified
    return {"a3": InequalityCheck(float(u_tn), float(rhs), float(stated))}


# ---------------------------------------------------------------------------
# key estimate


@dataclass(frozen=True)
class KeyEstimateCheck:
    key1: InequalityCheck
    key2: InequalityCheck
    per_mode: dict


def key_estimate_check(
    u: CylinderSection,
    f: CylinderSection,
    spectral: SpectralData,
    t: float,
    n_steps: int,
    tol: float = 1e-4,
) -> KeyEstimateCheck:
    """Evaluate both sides of the two neck estimates for ``u' - D u = f``.

    ``key1`` compares ``|u0(t) - u0(t+n)|`` (kernel component) with the chain
    ``Σ_k ρ_{t+k}(P_0 f)``.  ``key2`` compares ``ρ_{t+n}(u^⊥)`` with the
    root-sum-square of the per-mode bounds

    * ``μ < 0``: ``e^{-n|μ|} ρ_t(u_μ) + κ(μ) q_t(f_μ) / (1 - e^{-|μ|})``
    * ``μ > 0``: ``e^{-nμ} ρ_{t+2n}(u_μ) + κ(μ) q_{t+n}(f_μ) / (1 - e^{-μ})``

    which is valid because the modes are pointwise orthogonal.  The
    aggregate ``e^{-γn}(ρ_t + ρ_{t+2n})(u^⊥) + γ^{-2} q_t(f^⊥)`` is reported
    as ``stated_rhs``.
    """
    if not np.isfinite(spectral.gamma) and spectral.kernel.dim < spectral.n:
        raise ValueError("inconsistent spectral data")
    if u.grid.shape != f.grid.shape or np.any(u.grid != f.grid):
        raise ValueError("u and f must share the grid")
    D = sum(mu * fr.projector for mu, fr in zip(spectral.values, spectral.eigenframes))
    residual = _ode_residual(u.grid, u.values, u.values @ D.T + f.values)
    if residual > tol:
        raise ValueError(f"u and f do not satisfy u' - D u = f (residual {residual:.3e})")

    p0 = spectral.kernel.projector
    u0 = u.map(p0)
    f0 = f.map(p0)
    lhs1 = float(np.linalg.norm(_node_value(u0, t) - _node_value(u0, t + n_steps)))
    rhs1 = sum(slice_norm(f0, t + k) for k in range(n_steps))
    stated1 = _integral_of_tail_sup(f0, t, n_steps)
    key1 = InequalityCheck(lhs1, float(rhs1), stated1)

    eye = np.eye(spectral.n)
    u_perp = u.map(eye - p0)
    f_perp = f.map(eye - p0)
    lhs2 = slice_norm(u_perp, t + n_steps)
    per_mode = {}
    bounds = []
    for mu, fr in zip(spectral.values, spectral.eigenframes):
        if mu == 0:
            continue
        pm = fr.projector
        um, fm = u.map(pm), f.map(pm)
        a = abs(mu)
        forcing = unit_exponential_l2(a) / -np.expm1(-a)
        if mu < 0:
            b = np.exp(-n_steps * a) * slice_norm(um, t) + forcing * tail_sup(fm, t)
        else:
            b = np.exp(-n_steps * a) * slice_norm(um, t + 2 * n_steps) + forcing * tail_sup(
                fm, t + n_steps
            )
        per_mode[float(mu)] = InequalityCheck(slice_norm(um, t + n_steps), float(b), float(b))
        bounds.append(b)
    rhs2 = float(np.sqrt(np.sum(np.square(bounds)))) if bounds else 0.0
    gamma = spectral.gamma
    if np.isfinite(gamma):
        stated2 = np.exp(-gamma * n_steps) * (
            slice_norm(u_perp, t) + slice_norm(u_perp, t + 2 * n_steps)
        ) + tail_sup(f_perp, t) / gamma**2
    else:
        stated2 = 0.0
    key2 = InequalityCheck(float(lhs2), rhs2, float(stated2))
    return KeyEstimateCheck(key1, key2, per_mode)
