"""Eigenvalues and eigenvectors of the glued interval problem.

Root location uses two ingredients:

* Exact counting.  For a lagrangian frame propagated from the left end, the
  eigenphases of ``W(λ) = U_R^H U_L(L; λ)`` (Souriau unitaries) increase
  with λ and an eigenvalue occurs whenever one of them passes through 0.
  The total phase change along λ at the right end equals the difference of
  the phases accumulated along ``x`` at the two λ values, so the number of
  eigenvalues in ``(a, b]`` follows from two propagations without any
  λ-resolution requirement.
* Two-sided refinement.  Inside an isolated bracket the signed eigenphase of
  ``U_R(m)^H U_L(m)`` at the midpoint ``m`` (both ends propagated toward
  it) is driven to zero with Brent's method.  Matching in the middle keeps
  exponentially small eigenvalues accurate to relative precision.

A box-scheme finite-difference discretization serves as an independent
oracle.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import propagation as prop
from .ends import subdivide, trapezoid_weights
from .glue import GluedProblem, GluedSection

DEFAULT_BISECT_TOL = 1e-15
DEFAULT_RESID_TOL = 1e-4
_SUBDIVISIONS = 8
_OFFSET = (math.sqrt(5) - 1) / 2  # keeps scan points off symmetric special values


# ---------------------------------------------------------------------------
# matching


def _frames_mid(problem: GluedProblem, lams):
    sys = problem.system
    mid = problem.mid_index
    ql = prop.frames_at(sys, lams, problem.lambda_left.columns, mid, forward=True)
    qr = prop.frames_at(sys, lams, problem.lambda_right.columns, mid, forward=False)
    return ql, qr


@dataclass(frozen=True)
class MatchingSigma:
    sigma_min: float
    det_abs: float
    singular_values: np.ndarray


def matching_sigma(problem: GluedProblem, lam: float, match_index: int | None = None) -> MatchingSigma:
    """Singular values of ``[Q_L(m) | Q_R(m)]`` at the matching node ``m``.

    ``Q_L`` is the left boundary lagrangian propagated to ``m`` and ``Q_R``
    the right one propagated backward; both are orthonormal.  ``λ`` is an
    eigenvalue iff the smallest singular value vanishes.
    """
    sys = problem.system
    m = problem.mid_index if match_index is None else int(match_index)
    ql = prop.frames_at(sys, [lam], problem.lambda_left.columns, m, forward=True)[0]
    qr = prop.frames_at(sys, [lam], problem.lambda_right.columns, m, forward=False)[0]
    mat = np.hstack([ql, qr])
    s = np.linalg.svd(mat, compute_uv=False)
    return MatchingSigma(float(s[-1]), float(abs(np.linalg.det(mat))), s)


def _midpoint_phases(problem: GluedProblem, lams) -> np.ndarray:
    """Eigenphases in (-π, π] of ``U_R^H U_L`` at the midpoint; shape (Nλ, m)."""
    ql, qr = _frames_mid(problem, lams)
    sys = problem.system
    ul = prop.souriau(sys, ql)
    ur = prop.souriau(sys, qr)
    w = np.swapaxes(ur.conj(), -1, -2) @ ul
    return np.angle(np.linalg.eigvals(w))


def _signed_phase(problem: GluedProblem, lams) -> np.ndarray:
    ph = _midpoint_phases(problem, lams)
    k = np.argmin(np.abs(ph), axis=-1)
    return np.take_along_axis(ph, k[:, None], axis=-1)[:, 0]


def _count_data(problem: GluedProblem, lams, batch: int = 32):
    """Edge phase and reduced eigenphase sum at each λ (for counting)."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    sys = problem.system
    q0 = problem.lambda_left.columns
    ur = prop.souriau(sys, problem.lambda_right.columns[None])[0]
    phi = np.empty(lams.size)
    ssum = np.empty(lams.size)
    for i in range(0, lams.size, batch):
        sl = slice(i, i + batch)
        p, q = prop.edge_phase(sys, lams[sl], q0)
        ul = prop.souriau(sys, q)
        w = ur.conj().T @ ul
        alpha = np.mod(np.angle(np.linalg.eigvals(w)), 2 * np.pi)
        phi[sl] = p
        ssum[sl] = alpha.sum(axis=-1)
    return phi, ssum


def _counts(phi, ssum):
    raw = (np.diff(phi) - np.diff(ssum)) / (2 * np.pi)
    counts = np.rint(raw).astype(int)
    return counts, float(np.max(np.abs(raw - counts))) if raw.size else 0.0


def count_eigenvalues(problem: GluedProblem, a: float, b: float) -> int:
    """Number of eigenvalues (with multiplicity) in ``(a, b]``."""
    if not b > a:
        raise ValueError("need a < b")
    phi, ssum = _count_data(problem, [a, b])
    counts, _ = _counts(phi, ssum)
    return int(counts[0])


# ---------------------------------------------------------------------------
# eigenvalues


@dataclass(frozen=True)
class EigenResult:
    """Eigenpairs of a glued problem.

    Attributes
    ----------
    eigenvalues : ndarray
        Distinct eigenvalues, ascending.
    multiplicities : ndarray of int
    eigenvectors : list of GluedSection
        One entry per distinct eigenvalue with values of shape (N, n, mult),
        L²-orthonormal (trapezoid rule).  Empty when only eigenvalues were
        requested.
    residuals : ndarray
        ``max_j |𝔻_r ψ_j - λ ψ_j|`` per distinct eigenvalue (nan if no vectors).
    """

    eigenvalues: np.ndarray
    multiplicities: np.ndarray
    window: float
    eigenvectors: list = field(default_factory=list)
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    warnings: tuple = ()

    @property
    def spectrum(self) -> np.ndarray:
        """Eigenvalues repeated according to multiplicity."""
        return np.repeat(self.eigenvalues, self.multiplicities)

    @property
    def dimension(self) -> int:
        return int(np.sum(self.multiplicities))

    def vectors(self) -> np.ndarray:
        """All eigenvectors stacked, shape (N, n, dimension)."""
        if not self.eigenvectors:
            return np.zeros((0, 0, 0), dtype=complex)
        return np.concatenate([v.values for v in self.eigenvectors], axis=2)


def default_window(problem: GluedProblem, c: float = 0.0) -> float:
    """``max(10 c, min(γ/2, 3.3 π / L_tot))``."""
    bulk = 3.3 * np.pi / problem.total_length
    return float(max(10 * c, min(problem.spectral.gamma / 2, bulk)))


def _brent(problem, a, b, ga, gb):
    f = lambda x: float(_signed_phase(problem, [x])[0])  # noqa: E731
    try:
        return brentq(f, a, b, xtol=1e-22, rtol=4 * np.finfo(float).eps, maxiter=300)
    except (RuntimeError, ValueError):
        return 0.5 * (a + b)


def find_eigenvalues(
    problem: GluedProblem,
    window: float | None = None,
    scan_step: float | None = None,
    bisect_tol: float = DEFAULT_BISECT_TOL,
    rank_tol: float = 1e-9,
) -> EigenResult:
    """All eigenvalues in ``(-w, w)`` with multiplicities.

    Parameters
    ----------
    window : float
        Half-width ``w``; defaults to :func:`default_window`.
    scan_step : float
        Initial spacing of the λ scan (default ``min(γ, π/L_tot)/8``).  The
        counts are exact for any spacing; finer scans only save refinement
        rounds.
    bisect_tol : float
        Width below which a bracket that still holds several roots is
        reported as one multiple root.
    """
    if window is None:
        window = default_window(problem)
    w = float(window)
    if not w > 0:
        raise ValueError("window must be positive")
    L = problem.total_length
    if scan_step is None:
        scan_step = min(problem.spectral.gamma, np.pi / L) / 8
    cells_n = max(2, int(math.ceil(2 * w / scan_step)))
    inner = -w + 2 * w * (np.arange(cells_n - 1) + _OFFSET) / (cells_n - 1)
    lams = np.concatenate([[-w], inner, [w]])
    notes = []
    phi, ssum = _count_data(problem, lams)
    counts, frac = _counts(phi, ssum)
    if frac > 0.05:
        notes.append(f"non-integral eigenvalue count (deviation {frac:.3f})")
    if np.any(counts < 0):
        notes.append("negative eigenvalue count; phase monotonicity violated")
    cells = [
        (lams[i], lams[i + 1], int(counts[i]), phi[i], ssum[i], phi[i + 1], ssum[i + 1])
        for i in range(counts.size)
        if counts[i] > 0
    ]
    roots: list[tuple[float, int]] = []
    rounds = 0
    while cells:
        rounds += 1
        if rounds > 200:
            notes.append("root isolation did not terminate")
            break
        # brackets with a single root: test for a usable sign change
        singles = [c for c in cells if c[2] == 1]
        ready = set()
        if singles:
            ends = np.array([[c[0], c[1]] for c in singles]).reshape(-1)
            g = _signed_phase(problem, ends).reshape(-1, 2)
            for c, (ga, gb) in zip(singles, g):
                if ga < 0 < gb:
                    roots.append((_brent(problem, c[0], c[1], ga, gb), 1))
                    ready.add(id(c))
        todo = []
        for c in cells:
            if id(c) in ready:
                continue
            a, b = c[0], c[1]
            tiny = max(bisect_tol, 8 * np.spacing(max(abs(a), abs(b))))
            if b - a <= tiny:
                ga, gb = _signed_phase(problem, [a, b])
                x = _brent(problem, a, b, ga, gb) if ga < 0 < gb else 0.5 * (a + b)
                roots.append((x, c[2]))
            else:
                todo.append(c)
        if not todo:
            break
        pts = []
        for c in todo:
            a, b = c[0], c[1]
            frac_pts = (np.arange(1, _SUBDIVISIONS) - 0.5 + _OFFSET) / _SUBDIVISIONS
            pts.append(a + (b - a) * frac_pts)
        flat = np.concatenate(pts)
        p_new, s_new = _count_data(problem, flat)
        k = _SUBDIVISIONS - 1
        new_cells = []
        for j, c in enumerate(todo):
            xs = np.concatenate([[c[0]], pts[j], [c[1]]])
            ph = np.concatenate([[c[3]], p_new[j * k:(j + 1) * k], [c[5]]])
            ss = np.concatenate([[c[4]], s_new[j * k:(j + 1) * k], [c[6]]])
            sub, fr = _counts(ph, ss)
            if fr > 0.05:
                notes.append(f"non-integral count while refining near {c[0]:.6g}")
            if sub.sum() != c[2]:
                notes.append(f"inconsistent counts while refining near {c[0]:.6g}")
            for i in range(sub.size):
                if sub[i] > 0:
                    new_cells.append((xs[i], xs[i + 1], int(sub[i]), ph[i], ss[i], ph[i + 1], ss[i + 1]))
        cells = new_cells

    roots.sort()
    merged: list[list] = []
    for x, mult in roots:
        if merged and abs(x - merged[-1][0]) <= 2 * bisect_tol:
            merged[-1][1] += mult
        else:
            merged.append([x, mult])
    keep = [(x, m) for x, m in merged if abs(x) < w * (1 - 1e-9)]
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    values = np.array([x for x, _ in keep], dtype=float)
    mults = np.array([m for _, m in keep], dtype=int)
    return EigenResult(values, mults, w, warnings=tuple(notes))


# ---------------------------------------------------------------------------
# eigenvectors and residuals


def _breakpoints(problem: GluedProblem) -> np.ndarray:
    """Glued grid indices where the potential may be discontinuous."""
    x = problem.grid
    marks = [0, x.size - 1]
    cuts = []
    if problem.T_c1 > 0:
        cuts.append(problem.T_c1)
    if problem.T_c2 > 0:
        cuts.append(problem.total_length - problem.T_c2)
    for end, sign, origin in (
        (problem.end1, 1.0, problem.T_c1),
        (problem.end2, -1.0, problem.total_length - problem.T_c2),
    ):
        for tau in end.cap_breakpoints():
            cuts.append(origin + sign * tau)
    for c in cuts:
        marks.append(int(np.argmin(np.abs(x - c))))
    return np.unique(marks)


def apply_operator(problem: GluedProblem, values) -> np.ndarray:
    """``𝔻_r u = J u' + H(x) u`` with spline derivatives on smooth segments."""
    v = np.asarray(values, dtype=complex)
    x = problem.grid
    if v.shape[0] != x.size:
        raise ValueError("values must be sampled on the glued grid")
    du = np.empty_like(v)
    marks = _breakpoints(problem)
    for lo, hi in zip(marks[:-1], marks[1:]):
        seg = slice(lo, hi + 1)
        if hi - lo >= 3:
            du[seg] = CubicSpline(x[seg], v[seg], axis=0)(x[seg], 1)
        else:
            du[seg] = np.gradient(v[seg], x[seg], axis=0)
    H = problem.hamiltonian(x)
    J = problem.boundary.J
    if v.ndim == 2:
        return du @ J.T + np.einsum("kij,kj->ki", H, v)
    return np.einsum("ij,kjp->kip", J, du) + np.einsum("kij,kjp->kip", H, v)


def l2_norm(problem: GluedProblem, values) -> np.ndarray:
    w = trapezoid_weights(problem.grid)
    v = np.asarray(values)
    if v.ndim == 2:
        return float(np.sqrt(np.sum(w[:, None] * np.abs(v) ** 2)))
    return np.sqrt(np.einsum("k,knp->p", w, np.abs(v) ** 2))


def l2_gram(problem: GluedProblem, a, b) -> np.ndarray:
    w = trapezoid_weights(problem.grid)
    return np.einsum("k,kni,knj->ij", w, np.conj(a), b)


def l2_orthonormalize(problem: GluedProblem, values, rank_tol: float = 1e-9) -> np.ndarray:
    """Orthonormalize (N, n, p) samples in the trapezoid L² product.

    Uses the symmetric (Löwdin) transform ``V G^{-1/2}``, which keeps each
    column as close as possible to the input column.  Directions with Gram
    eigenvalue below ``rank_tol`` times the largest are dropped.
    """
    v = np.asarray(values, dtype=complex)
    if v.shape[2] == 0:
        return v
    g = l2_gram(problem, v, v)
    g = 0.5 * (g + g.conj().T)
    e, y = np.linalg.eigh(g)
    keep = e > rank_tol * e[-1]
    if np.all(keep):
        t = (y / np.sqrt(e)) @ y.conj().T
    else:
        t = y[:, keep] / np.sqrt(e[keep])
    return v @ t


def eigenvector(
    problem: GluedProblem,
    lam: float,
    multiplicity: int | None = None,
    rank_tol: float = 1e-9,
    resid_tol: float = DEFAULT_RESID_TOL,
) -> tuple[GluedSection, float]:
    """Eigenvector(s) at ``lam``, L²-orthonormal, with the max residual.

    The left and right boundary frames are propagated to the midpoint; the
    null vectors of ``[Q_L | -Q_R]`` give the coefficients, which are carried
    back along the stored renormalization factors.
    """
    sys = problem.system
    mid = problem.mid_index
    left = prop.track_frames(sys, lam, problem.lambda_left.columns, True, mid)
    right = prop.track_frames(sys, lam, problem.lambda_right.columns, False, mid)
    ql, qr = left.frames[-1], right.frames[0]
    mat = np.hstack([ql, -qr])
    _, s, vh = np.linalg.svd(mat)
    if multiplicity is None:
        multiplicity = max(1, int(np.sum(s < max(rank_tol, 1e-6))))
    if s[-multiplicity] > 1e-4:
        raise ValueError(f"lambda = {lam!r} is not an eigenvalue (sigma_min = {s[-1]:.3e})")
    null = vh.conj().T[:, -multiplicity:]
    m = ql.shape[1]
    a, b = null[:m], null[m:]
    vl = left.section(a)
    vr = right.section(b)
    values = np.concatenate([vl[:-1], 0.5 * (vl[-1:] + vr[:1]), vr[1:]], axis=0)
    values = l2_orthonormalize(problem, values)
    resid = apply_operator(problem, values) - lam * values
    r = float(np.max(l2_norm(problem, resid))) if values.shape[2] else 0.0
    if r > resid_tol * (1 + abs(lam)):
        warnings.warn(
            f"eigenvector residual {r:.3e} at lambda = {lam:.6g} exceeds tolerance",
            RuntimeWarning,
            stacklevel=2,
        )
    return GluedSection(problem.grid, values), r


def with_eigenvectors(problem: GluedProblem, result: EigenResult, resid_tol: float = DEFAULT_RESID_TOL) -> EigenResult:
    vecs = []
    res = []
    for lam, mult in zip(result.eigenvalues, result.multiplicities):
        sec, r = eigenvector(problem, float(lam), int(mult), resid_tol=resid_tol)
        vecs.append(sec)
        res.append(r)
    return EigenResult(
        result.eigenvalues,
        result.multiplicities,
        result.window,
        vecs,
        np.array(res),
        result.warnings,
    )


@dataclass(frozen=True)
class KTilde:
    """Span of the eigenvectors with ``|λ| <= c``."""

    c: float
    eigen: EigenResult
    values: np.ndarray  # (N, n, dim), L²-orthonormal
    lambdas: np.ndarray  # eigenvalue of each column
    warnings: tuple

    @property
    def dim(self) -> int:
        return self.values.shape[2]


def ktilde(
    problem: GluedProblem,
    c: float,
    window: float | None = None,
    scan_step: float | None = None,
    bisect_tol: float = DEFAULT_BISECT_TOL,
    rank_tol: float = 1e-9,
    resid_tol: float = DEFAULT_RESID_TOL,
    spectrum: EigenResult | None = None,
) -> KTilde:
    """Eigenpairs with ``|λ| <= c`` and the orthonormal basis of their span."""
    if window is None:
        window = default_window(problem, c)
    if window < c:
        raise ValueError("window must contain the threshold c")
    if spectrum is None:
        spectrum = find_eigenvalues(problem, window, scan_step, bisect_tol, rank_tol)
    notes = list(spectrum.warnings)
    close = np.abs(np.abs(spectrum.eigenvalues) - c) <= 10 * bisect_tol * max(1.0, c)
    if np.any(close):
        notes.append("an eigenvalue lies at the threshold; count may be unstable")
    sel = np.abs(spectrum.eigenvalues) <= c
    small = EigenResult(
        spectrum.eigenvalues[sel], spectrum.multiplicities[sel], spectrum.window
    )
    small = with_eigenvectors(problem, small, resid_tol)
    full = EigenResult(
        spectrum.eigenvalues,
        spectrum.multiplicities,
        spectrum.window,
        [],
        np.zeros(0),
        tuple(notes),
    )
    values = small.vectors()
    if values.size == 0:
        values = np.zeros((problem.grid.size, problem.n, 0), dtype=complex)
    else:
        # distinct eigenvalues give orthogonal vectors only up to quadrature error
        values = l2_orthonormalize(problem, values, rank_tol)
    lambdas = np.repeat(small.eigenvalues, small.multiplicities)
    for note in notes[len(spectrum.warnings):]:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return KTilde(float(c), EigenResult(
        full.eigenvalues, full.multiplicities, full.window, small.eigenvectors,
        small.residuals, full.warnings,
    ), values, lambdas, tuple(notes))


# ---------------------------------------------------------------------------
# finite-difference oracle


def fd_grid(problem: GluedProblem, h: float) -> np.ndarray:
    """Glued grid with spacing at most ``h``.

    The cap ends and cap breakpoints are nodes; each interval between them
    is divided uniformly, so halving ``h`` halves every cell when the
    interval lengths are multiples of ``h``.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    L = problem.total_length
    marks = [0.0, problem.T_c1, L - problem.T_c2, L]
    marks += list(problem.T_c1 + problem.end1.cap_breakpoints())
    marks += list(L - problem.T_c2 - problem.end2.cap_breakpoints())
    return subdivide(np.unique(np.round(marks, 12)), h)


def fd_matrices(problem: GluedProblem, h: float, reduced: bool = True):
    """Box-scheme matrices ``(A, B)`` with ``A y = λ B y``.

    Cell ``k`` contributes ``J (u_{k+1} - u_k)/h_k + H_k (u_{k+1} + u_k)/2``
    to ``A`` and ``(u_{k+1} + u_k)/2`` to ``B``, with ``H_k`` sampled at the
    cell midpoint.  With ``reduced`` the end values are parametrized by the
    boundary lagrangian frames, giving square matrices; otherwise the full
    (K n) x ((K+1) n) cell operators are returned.
    """
    x = fd_grid(problem, h)
    K = x.size - 1
    n = problem.n
    J = problem.boundary.J
    hk = np.diff(x)
    Hm = problem.hamiltonian(0.5 * (x[:-1] + x[1:]))
    real = not np.any(np.imag(J)) and not np.any(np.imag(Hm))
    dtype = float if real else complex
    A = np.zeros((K * n, (K + 1) * n), dtype=dtype)
    B = np.zeros_like(A)
    half = 0.5 * np.eye(n)
    for k in range(K):
        rows = slice(k * n, (k + 1) * n)
        left = -J / hk[k] + 0.5 * Hm[k]
        right = J / hk[k] + 0.5 * Hm[k]
        A[rows, k * n:(k + 1) * n] = left.real if real else left
        A[rows, (k + 1) * n:(k + 2) * n] = right.real if real else right
        B[rows, k * n:(k + 1) * n] = half
        B[rows, (k + 1) * n:(k + 2) * n] = half
    if not reduced:
        return A, B
    ql = problem.lambda_left.columns
    qr = problem.lambda_right.columns
    if real and (np.any(np.imag(ql)) or np.any(np.imag(qr))):
        A, B = A.astype(complex), B.astype(complex)
        real = False
    m = ql.shape[1]
    cols = [
        A[:, :n] @ (ql.real if real else ql),
        A[:, n:K * n],
        A[:, K * n:] @ (qr.real if real else qr),
    ]
    bcols = [
        B[:, :n] @ (ql.real if real else ql),
        B[:, n:K * n],
        B[:, K * n:] @ (qr.real if real else qr),
    ]
    assert cols[0].shape[1] == m
    return np.hstack(cols), np.hstack(bcols)


def fd_oracle(
    problem: GluedProblem, h: float, window: float, max_unknowns: int = 4000
) -> np.ndarray:
    """Eigenvalues in ``(-w, w)`` of the box-scheme discretization.

    ``B`` is singular (the cell average annihilates alternating vectors),
    so the pencil is reduced to the dense standard problem
    ``(A - σB)^{-1} B y = y / (λ - σ)`` with a shift ``σ`` inside the
    window; infinite eigenvalues map to 0 and are dropped.
    """
    if not window > 0:
        raise ValueError("window must be positive")
    unknowns = problem.n * (len(fd_grid(problem, h)) - 1)
    if unknowns > max_unknowns:
        raise ValueError(f"{unknowns} unknowns exceed the dense budget of {max_unknowns}")
    A, B = fd_matrices(problem, h)
    for frac in (_OFFSET / 50, -_OFFSET / 37, _OFFSET / 11):
        sigma = frac * window
        shifted = A - sigma * B
        try:
            lu = scipy.linalg.lu_factor(shifted, check_finite=False)
        except (ValueError, np.linalg.LinAlgError):
            continue
        if np.min(np.abs(np.diag(lu[0]))) > 1e-13 * np.max(np.abs(np.diag(lu[0]))):
            break
    else:
        raise FloatingPointError("no regular shift found for the box-scheme pencil")
    mu = np.linalg.eigvals(scipy.linalg.lu_solve(lu, B, check_finite=False))
    scale = np.max(np.abs(mu)) if mu.size else 0.0
    mu = mu[np.abs(mu) > 1e-10 * max(scale, 1.0 / window)]
    lam = sigma + 1.0 / mu
    real = np.abs(lam.imag) <= 1e-8 * np.maximum(1.0, np.abs(lam.real))
    lam = np.sort(lam[real].real)
    return lam[np.abs(lam) < window]
