"""Neck-stretching sweeps: dimension ledgers, exactness gaps and decay fits.

For every neck parameter ``r`` a sweep assembles the glued problem, finds
the eigenvectors with ``|λ| <= c(r)`` (the space ``𝒦̃_r``), computes the
extended kernels ``K_1, K_2`` of the two ends and the space ``𝒦_∞`` of
pairs with a common trace, and compares the split eigenvectors with
``𝒦_∞`` in the extended inner product.  Gluing ``𝒦_∞`` back gives the
residual series.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import eigen
from .boundary import graded_split, is_lagrangian, spectral_decompose
from .ends import (
    DEFAULT_STEP,
    EndKernel,
    EndModel,
    _extended_gram,
    default_cut,
    difference_kernel,
    extended_kernel,
)
from .glue import (
    GluedProblem,
    assemble,
    glue_map,
    glued_kernel_nodes,
    split_gram,
    split_inner,
    split_map,
)
from .subspaces import Frame, gap, gap_directed, orthonormalize, subspace_sum

# ---------------------------------------------------------------------------
# threshold schedule


@dataclass(frozen=True)
class ThresholdSchedule:
    """``c(r) = c0 min(1, r^-2)`` with the exponential floor rate ``δ``.

    ``delta = inf`` means the floor ``e^{-δ r}`` is identically 0.
    """

    c0: float
    delta: float

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError("c0 must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    def c(self, r: float) -> float:
        return self.c0 * min(1.0, float(r) ** -2)

    def floor(self, r: float) -> float:
        return 0.0 if math.isinf(self.delta) else math.exp(-self.delta * r)

    def r_min(self, r_max: float = 200.0, step: float = 0.25) -> float:
        """Smallest sampled ``r >= 1`` from which ``c(r) >= e^{-δ r}`` holds up to ``r_max``."""
        rs = np.arange(1.0, r_max + step / 2, step)
        ok = np.array([self.c(r) >= self.floor(r) for r in rs])
        if ok.all():
            return 1.0
        bad = np.nonzero(~ok)[0]
        if bad[-1] == rs.size - 1:
            return math.inf
        return float(rs[bad[-1] + 1])


def bulk_estimate(end1: EndModel, end2: EndModel, r: float) -> float:
    """``π / (2 L_tot(r))``, the lowest nonzero level of a free neck with
    transverse boundary lagrangians."""
    total = end1.cap_length + 2 * r + 3 + end2.cap_length
    return math.pi / (2 * total)


def auto_schedule(
    end1: EndModel, end2: EndModel, c0="auto", delta="auto", r_ref: float = 2.0
) -> ThresholdSchedule:
    """Default schedule.

    ``c0 = min(1, γ/4, λ/4, r_ref² b/4)`` where ``b`` is
    :func:`bulk_estimate` at ``r_ref``, so that ``c(r_ref) <= b/4``;
    ``δ = 0.9 min(γ, λ)``.
    """
    gamma = eigen_gamma(end1)
    lam = min(end1.decay_lambda, end2.decay_lambda)
    rate = min(gamma, lam)
    if c0 == "auto":
        bulk = bulk_estimate(end1, end2, r_ref) * max(1.0, r_ref) ** 2
        c0 = min(1.0, gamma / 4, lam / 4, bulk / 4)
    if delta == "auto":
        delta = 0.9 * rate
    return ThresholdSchedule(float(c0), float(delta))


def eigen_gamma(end: EndModel) -> float:
    return spectral_decompose(end.boundary).gamma


# ---------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class DecayFit:
    rate: float
    amplitude: float
    fit_residual: float


def fit_decay(series) -> DecayFit:
    """Least-squares fit ``log y = log A - rate x``; residual is the RMS log misfit."""
    data = np.asarray(series, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("series must be a list of (x, y) pairs")
    if data.shape[0] < 3:
        raise ValueError("at least three points are required")
    x, y = data[:, 0], data[:, 1]
    if np.any(~(y > 0)):
        raise ValueError("values must be positive")
    design = np.column_stack([np.ones_like(x), -x])
    coef, *_ = np.linalg.lstsq(design, np.log(y), rcond=None)
    misfit = np.log(y) - design @ coef
    return DecayFit(float(coef[1]), float(np.exp(coef[0])), float(np.sqrt(np.mean(misfit**2))))


# ---------------------------------------------------------------------------
# per-r computation


@dataclass
class Tolerances:
    step: float = DEFAULT_STEP
    scan_step: float | None = None
    bisect_tol: float = eigen.DEFAULT_BISECT_TOL
    rank_tol: float = 1e-9
    resid_tol: float = eigen.DEFAULT_RESID_TOL
    convention: str = "frozen"
    split_window: float | None = None


@dataclass
class SweepRow:
    """Results at one neck parameter ``r``."""

    r: float
    total_length: float = math.nan
    c: float = math.nan
    dim_ktilde: int = -1
    kappa1: int = -1
    kappa2: int = -1
    dim_H: int = -1
    dim_Lsum: int = -1
    dim_Lcap: int = -1
    dim_K_inf: int = -1
    lambda_min_abs: float = math.nan
    small_eigenvalues: list = field(default_factory=list)
    exactness_gap: float = math.nan
    gap_split_to_kinf: float = math.nan
    gap_kinf_to_split: float = math.nan
    coefficient_gap: float = math.nan
    glue_residual_max: float = math.nan
    inverse_defect: float = math.nan
    lagrangian_defects: list = field(default_factory=list)
    graded: dict | None = None
    warnings: list = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RowData:
    """Intermediate objects of one row (kept for diagnostics and tests)."""

    problem: GluedProblem
    ktilde: eigen.KTilde
    K1: EndKernel
    K2: EndKernel
    K_inf: np.ndarray  # (κ1+κ2, dim) orthonormal coefficients
    split_coeffs: np.ndarray  # (κ1+κ2, p)
    split_residual: np.ndarray  # (q, p) coordinates orthogonal to K1 ⊕ K2
    glued: np.ndarray  # (N, n, dim) Ψ_r on the 𝒦_∞ basis
    residual: np.ndarray  # (N, n, dim) 𝔻_r Ψ_r on the 𝒦_∞ basis


def row_kernels(problem: GluedProblem, tol: Tolerances) -> tuple[EndKernel, EndKernel]:
    """End kernels on grids that share their nodes with the glued grid."""
    extra = 1.5
    if tol.convention == "window":
        w = tol.split_window
        if w is None:
            g = problem.spectral.gamma
            w = 10.0 / max(g if np.isfinite(g) else 1.0, 1.0)
        extra = max(extra, w + 0.25)
    out = []
    for side, end in ((1, problem.end1), (2, problem.end2)):
        t_cut = default_cut(end, tol.rank_tol, problem.r + extra)
        nodes = glued_kernel_nodes(problem, side, t_cut)
        out.append(extended_kernel(end, rank_tol=tol.rank_tol, scheme=problem.scheme, nodes=nodes))
    return out[0], out[1]


def _psd_sqrt_rows(m: np.ndarray, rank_tol: float) -> np.ndarray:
    """Rows ``R`` with ``R^H R = m`` for a PSD matrix ``m`` (rank-revealing)."""
    m = 0.5 * (m + m.conj().T)
    w, y = np.linalg.eigh(m)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    keep = w > rank_tol * scale
    return (np.sqrt(w[keep])[:, None] * y[:, keep].conj().T)


def split_coordinates(problem: GluedProblem, values, K1: EndKernel, K2: EndKernel, tol: Tolerances):
    """Coordinates of the split sections in ``(K1 ⊕ K2) ⊕ (K1 ⊕ K2)^⊥``.

    Returns ``(coeffs, residual_rows)`` with ``coeffs`` the extended inner
    products with the orthonormal kernel bases and ``residual_rows`` a
    factor of the Gram matrix of the components orthogonal to the kernels.
    """
    s1, s2 = split_map(problem, values, tol.convention, tol.split_window)
    c = np.vstack([split_inner(s1, K1), split_inner(s2, K2)])
    g = split_gram(s1, s1) + split_gram(s2, s2)
    rest = _psd_sqrt_rows(g - c.conj().T @ c, 1e-14)
    return c, rest


def exactness_gap(coeffs, rest, k_inf: np.ndarray, rank_tol: float = 1e-9) -> dict:
    """Gaps between ``span S_r(𝒦̃_r)`` and ``𝒦_∞``.

    Returns the symmetric gap, both directed gaps and the gap between the
    kernel components alone.  Two zero spaces have gap 0.
    """
    total = coeffs.shape[0]
    p = coeffs.shape[1]
    d = k_inf.shape[1]
    if p == 0 and d == 0:
        return {"gap": 0.0, "split_to_kinf": 0.0, "kinf_to_split": 0.0, "coefficient": 0.0}
    q = rest.shape[0]
    ambient = total + q
    full = np.vstack([coeffs, rest]) if q else coeffs
    u = orthonormalize(full, rank_tol) if p else Frame.zero(ambient)
    pad = np.vstack([k_inf, np.zeros((q, d))]) if q else k_inf
    v = Frame(pad) if d else Frame.zero(ambient)
    uc = orthonormalize(coeffs, rank_tol) if p else Frame.zero(total)
    vc = Frame(k_inf) if d else Frame.zero(total)
    return {
        "gap": gap(u, v),
        "split_to_kinf": gap_directed(u, v),
        "kinf_to_split": gap_directed(v, u),
        "coefficient": gap(uc, vc),
    }


def inverse_defect(a1: np.ndarray, a2: np.ndarray) -> float:
    """``|A1 A2 - I| + |A2 A1 - I|`` (spectral norms; 0 for empty spaces)."""
    out = 0.0
    if a1.shape[0]:
        out += float(np.linalg.norm(a1 @ a2 - np.eye(a1.shape[0]), 2))
    if a2.shape[0]:
        out += float(np.linalg.norm(a2 @ a1 - np.eye(a2.shape[0]), 2))
    return out


def _kernel_operator(k: EndKernel, M: np.ndarray) -> np.ndarray:
    """Matrix ``<k_i, M k_j>`` in the extended inner product."""
    nodes = k.grid
    cap = nodes <= 0 if k.side == "right_infinite" else nodes >= 0
    neck = nodes >= 0 if k.side == "right_infinite" else nodes <= 0
    mv = np.einsum("ab,kbj->kaj", M, k.values)
    return _extended_gram(
        nodes, cap, neck, k.values, k.u_inf, mv, M @ k.u_inf, k.tail_gram(k.tail, M @ k.tail)
    )


def _parity_dims(m: np.ndarray) -> tuple[tuple[int, int], float]:
    """Even/odd dimensions of a space from the matrix of C on an orthonormal basis.

    The defect is the directed gap of ``C·span`` from the span.
    """
    if m.shape[0] == 0:
        return (0, 0), 0.0
    s = np.linalg.svd(m, compute_uv=False)
    defect = float(np.sqrt(max(0.0, 1.0 - float(np.min(s)) ** 2)))
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    return (int(np.sum(w > 0)), int(np.sum(w <= 0))), defect


def graded_report(data: RowData, spectrum: eigen.EigenResult | None = None) -> dict:
    """Even/odd dimensions, chirality defects and the ``±λ`` pairing.

    The eigenvectors with ``|λ| <= c`` and the kernels are expressed in
    their orthonormal bases; the chirality acts pointwise on sections.
    """
    problem = data.problem
    C = problem.boundary.C
    if C is None:
        raise ValueError("problem has no grading")
    kt = data.ktilde
    cv = np.einsum("ab,kbj->kaj", C, kt.values)
    m_kt = eigen.l2_gram(problem, kt.values, cv)
    kt_dims, _ = _parity_dims(m_kt)
    kt_defect = l2_gap_directed(problem, cv, kt.values)
    m1 = _kernel_operator(data.K1, C)
    m2 = _kernel_operator(data.K2, C)
    k1_dims, k1_defect = _parity_dims(m1)
    k2_dims, k2_defect = _parity_dims(m2)
    k1, k2 = data.K1.kappa, data.K2.kappa
    block = np.zeros((k1 + k2, k1 + k2), dtype=complex)
    block[:k1, :k1] = m1
    block[k1:, k1:] = m2
    ki = data.K_inf
    kinf_dims, kinf_defect = _parity_dims(ki.conj().T @ block @ ki)
    l_dims = []
    for k in (data.K1, data.K2):
        e, o = graded_split(k.traces, C)
        l_dims.append((e.dim, o.dim))
    h_even, h_odd = graded_split(problem.spectral.kernel, C)
    lsum = subspace_sum(data.K1.traces, data.K2.traces)
    ls_even, ls_odd = graded_split(lsum, C)
    ledger = {}
    for name, idx in (("even", 0), ("odd", 1)):
        expected = (k1_dims[idx] + k2_dims[idx]) - (ls_even.dim if idx == 0 else ls_odd.dim)
        ledger[name] = {
            "dim_ktilde": kt_dims[idx],
            "dim_K_inf": kinf_dims[idx],
            "expected": expected,
            "balanced": kt_dims[idx] == expected == kinf_dims[idx],
        }
    pairing = pairing_defect(problem, kt)
    return {
        "ktilde_dims": kt_dims,
        "ktilde_defect": kt_defect,
        "K1_dims": k1_dims,
        "K2_dims": k2_dims,
        "K_defects": (k1_defect, k2_defect),
        "L1_dims": l_dims[0],
        "L2_dims": l_dims[1],
        "H_dims": (h_even.dim, h_odd.dim),
        "K_inf_dims": kinf_dims,
        "K_inf_defect": kinf_defect,
        "ledger": ledger,
        "pairing_defect": pairing,
    }


def pairing_defect(problem: GluedProblem, kt: eigen.KTilde) -> float:
    """Largest gap between ``C·E_λ`` and ``E_{-λ}`` over the eigenvalues of ``kt``.

    Returns ``inf`` when some ``-λ`` is missing.
    """
    C = problem.boundary.C
    lams = kt.lambdas
    if lams.size == 0:
        return 0.0
    distinct = np.unique(lams)
    worst = 0.0
    for lam in distinct:
        partner = distinct[np.argmin(np.abs(distinct + lam))]
        if abs(partner + lam) > 1e-6 * abs(lam) + 1e-13:
            return math.inf
        a = kt.values[:, :, lams == lam]
        b = kt.values[:, :, lams == partner]
        if b.shape[2] != a.shape[2]:
            return math.inf
        ca = np.einsum("ab,kbj->kaj", C, a)
        worst = max(worst, l2_gap_directed(problem, ca, b))
    return worst


def l2_gap_directed(problem: GluedProblem, a, b) -> float:
    """Directed gap from ``span a`` to ``span b`` (both L²-orthonormal families).

    Evaluated from the residual ``a - b (b^H a)`` to avoid the cancellation
    in ``1 - σ_min²``.
    """
    if a.shape[2] == 0:
        return 0.0
    if b.shape[2] == 0:
        return 1.0
    res = a - b @ eigen.l2_gram(problem, b, a)
    g = eigen.l2_gram(problem, res, res)
    return float(np.sqrt(max(0.0, float(np.max(np.linalg.eigvalsh(0.5 * (g + g.conj().T)))))))


def compute_row(
    end1: EndModel,
    end2: EndModel,
    r: float,
    schedule: ThresholdSchedule,
    tol: Tolerances | None = None,
    keep: bool = False,
):
    """One sweep row.  Returns ``SweepRow`` or ``(SweepRow, RowData)`` with ``keep``."""
    tol = tol or Tolerances()
    row = SweepRow(r=float(r))
    data = None
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            data = _fill_row(row, end1, end2, r, schedule, tol)
        row.warnings.extend(sorted({str(c.message) for c in caught}))
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return (row, data) if keep else row


def smallest_magnitude(problem, spectrum: eigen.EigenResult, tol: Tolerances, widen: int = 4) -> float:
    """Smallest ``|λ|``, widening the search window when it holds no eigenvalue."""
    window = spectrum.window
    for _ in range(widen + 1):
        if spectrum.eigenvalues.size:
            return float(np.min(np.abs(spectrum.eigenvalues)))
        window *= 2
        spectrum = eigen.find_eigenvalues(
            problem, window, tol.scan_step, tol.bisect_tol, tol.rank_tol
        )
    return math.nan


def _fill_row(row, end1, end2, r, schedule, tol) -> RowData:
    problem = assemble(end1, end2, r, tol.step)
    row.total_length = problem.total_length
    c = schedule.c(r)
    row.c = c
    window = eigen.default_window(problem, c)
    spectrum = eigen.find_eigenvalues(problem, window, tol.scan_step, tol.bisect_tol, tol.rank_tol)
    kt = eigen.ktilde(
        problem, c, window, tol.scan_step, tol.bisect_tol, tol.rank_tol, tol.resid_tol,
        spectrum=spectrum,
    )
    row.dim_ktilde = kt.dim
    row.small_eigenvalues = [float(x) for x in kt.lambdas]
    row.lambda_min_abs = smallest_magnitude(problem, spectrum, tol)

    K1, K2 = row_kernels(problem, tol)
    row.kappa1, row.kappa2 = K1.kappa, K2.kappa
    spectral = problem.spectral
    row.dim_H = spectral.kernel.dim
    dk = difference_kernel(K1, K2, spectral, tol.rank_tol)
    row.dim_Lsum = dk.L_sum.dim
    row.dim_Lcap = dk.L_cap.dim
    row.dim_K_inf = dk.dim_K_inf
    total = K1.kappa + K2.kappa
    if dk.K_inf_frame is None:
        k_inf = np.zeros((total, 0), dtype=complex)
    else:
        k_inf = dk.K_inf_frame.columns
    for k in (K1, K2):
        if spectral.kernel.dim:
            row.lagrangian_defects.append(
                is_lagrangian(k.traces, spectral.kernel, problem.boundary).defect
            )

    coeffs, rest = split_coordinates(problem, kt.values, K1, K2, tol)
    gaps = exactness_gap(coeffs, rest, k_inf, tol.rank_tol)
    row.exactness_gap = gaps["gap"]
    row.gap_split_to_kinf = gaps["split_to_kinf"]
    row.gap_kinf_to_split = gaps["kinf_to_split"]
    row.coefficient_gap = gaps["coefficient"]

    n, N = problem.n, problem.grid.size
    glued = np.zeros((N, n, k_inf.shape[1]), dtype=complex)
    resid = np.zeros_like(glued)
    if k_inf.shape[1]:
        sec, res = glue_map(problem, K1, K2, k_inf)
        glued, resid = sec.values, res.values
        g = eigen.l2_gram(problem, resid, resid)
        row.glue_residual_max = float(np.sqrt(max(0.0, np.max(np.linalg.eigvalsh(g)))))
        # P_∞ S_r on 𝒦̃ (coefficients of the 𝒦_∞ basis) and P_r Ψ_r on 𝒦_∞
        a1 = k_inf.conj().T @ coeffs
        a2 = eigen.l2_gram(problem, kt.values, glued)
        row.inverse_defect = inverse_defect(a1, a2)
    else:
        row.glue_residual_max = 0.0
        row.inverse_defect = inverse_defect(np.zeros((0, kt.dim)), np.zeros((kt.dim, 0)))
    data = RowData(problem, kt, K1, K2, k_inf, coeffs, rest, glued, resid)
    if problem.boundary.graded:
        row.graded = graded_report(data)
    return data


# ---------------------------------------------------------------------------
# sweep and verdicts


def dimension_ledger(row: SweepRow) -> dict:
    """Dimension identities of one row."""
    expected = row.kappa1 + row.kappa2 - row.dim_Lsum
    return {
        "dim_ktilde": row.dim_ktilde,
        "expected": expected,
        "euler": row.dim_ktilde == expected,
        "kernel": row.dim_K_inf == expected,
        "lagrangian_pair": row.dim_H - row.dim_Lsum == row.dim_Lcap,
        "pass": row.dim_ktilde == expected
        and row.dim_K_inf == expected
        and row.dim_H - row.dim_Lsum == row.dim_Lcap,
    }


def spectral_lower_bound(rows: list[SweepRow]) -> dict:
    """Lower bound of ``|λ|_min · L(r)`` when ``𝒦_∞ = 0``.

    The verdict passes when every product is positive and their fitted
    exponential decay rate across ``r`` is at most 0.05 (no vanishing trend).
    """
    good = [row for row in rows if row.ok]
    if not good or any(row.dim_K_inf != 0 for row in good):
        return {"applicable": False, "verdict": "not applicable"}
    prod = [(row.r, row.lambda_min_abs * row.total_length) for row in good]
    values = np.array([p for _, p in prod])
    if np.any(~(values > 0)):
        return {"applicable": True, "min_product": float(np.nanmin(values)), "verdict": "fail"}
    rate = fit_decay(prod).rate if len(prod) >= 3 else 0.0
    return {
        "applicable": True,
        "min_product": float(values.min()),
        "products": [float(v) for v in values],
        "trend_rate": rate,
        "verdict": "pass" if rate <= 0.05 else "fail",
    }


def first_stable_index(flags) -> int | None:
    """Smallest index from which every flag is true (``None`` if the last is false)."""
    flags = list(flags)
    if not flags or not flags[-1]:
        return None
    i = len(flags) - 1
    while i > 0 and flags[i - 1]:
        i -= 1
    return i


@dataclass
class SweepReport:
    rows: list
    schedule: ThresholdSchedule
    r_min: float
    fits: dict
    verdicts: dict
    r0: dict
    warnings: list

    def as_dict(self) -> dict:
        return {
            "rows": [row.as_dict() for row in self.rows],
            "schedule": {"c0": self.schedule.c0, "delta": self.schedule.delta},
            "r_min": self.r_min,
            "fits": self.fits,
            "verdicts": self.verdicts,
            "r0": self.r0,
            "warnings": self.warnings,
        }


def _row_job(args):
    end1, end2, r, schedule, tol = args
    return compute_row(end1, end2, r, schedule, tol)


def run_sweep(
    end1: EndModel,
    end2: EndModel,
    schedule: ThresholdSchedule | None = None,
    r_list=(2, 4, 6, 8, 10),
    tol: Tolerances | None = None,
    jobs: int = 1,
) -> SweepReport:
    """Rows for every ``r`` plus fitted rates and ledger verdicts."""
    r_list = [float(r) for r in r_list]
    if not r_list:
        raise ValueError("r_list is empty")
    if any(b <= a for a, b in zip(r_list[:-1], r_list[1:])):
        raise ValueError("r_list must be increasing")
    if r_list[0] < 1:
        raise ValueError("r must be at least 1")
    schedule = schedule or auto_schedule(end1, end2, r_ref=r_list[0])
    tol = tol or Tolerances()
    args = [(end1, end2, r, schedule, tol) for r in r_list]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_row_job, args))
    else:
        rows = [_row_job(a) for a in args]
    return summarize(rows, schedule)


def summarize(rows: list[SweepRow], schedule: ThresholdSchedule) -> SweepReport:
    good = [row for row in rows if row.ok]
    notes = [f"r = {row.r:g}: {row.error}" for row in rows if not row.ok]
    fits = {}
    for key, x_attr in (("lambda_min_abs", "total_length"), ("glue_residual_max", "r"),
                        ("exactness_gap", "r")):
        pts = [(getattr(row, x_attr), getattr(row, key)) for row in good]
        pts = [(x, y) for x, y in pts if np.isfinite(y) and y > 0]
        if len(pts) >= 3:
            fits[key] = asdict(fit_decay(pts))
    verdicts = {}
    r0 = {}
    if good:
        ledgers = [dimension_ledger(row) for row in good]
        verdicts["dimension_ledger"] = "pass" if ledgers[-1]["pass"] else "fail"
        idx = first_stable_index(lg["pass"] for lg in ledgers)
        r0["dimension_ledger"] = good[idx].r if idx is not None else None
        gaps = [row.exactness_gap for row in good]
        dec = [True] + [b < a or b <= 1e-12 for a, b in zip(gaps[:-1], gaps[1:])]
        idx = first_stable_index(dec)
        r0["exactness_monotone"] = good[idx].r if idx is not None else None
        verdicts["spectral_lower_bound"] = spectral_lower_bound(good)["verdict"]
        lag = [d for row in good for d in row.lagrangian_defects]
        verdicts["lagrangian"] = "pass" if all(d < 1e-6 for d in lag) else "fail"
        if good[-1].graded is not None:
            bal = all(v["balanced"] for v in good[-1].graded["ledger"].values())
            verdicts["graded_ledger"] = "pass" if bal else "fail"
    return SweepReport(rows, schedule, schedule.r_min(), fits, verdicts, r0, notes)
