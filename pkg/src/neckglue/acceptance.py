"""Executable acceptance suite on the built-in regression models.

Each ``criterion_k`` function runs one check end to end and returns a
:class:`CriterionResult`; ``run_all`` runs them in order.  The ``check``
subcommand and the acceptance tests share these functions.
"""
from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np

from . import eigen, models
from .analysis import Tolerances, auto_schedule, compute_row, fit_decay, run_sweep
from .boundary import is_lagrangian, spectral_decompose
from .ends import extended_kernel
from .glue import assemble
from .necks import CylinderSection, scalar_ode_bounds
from .subspaces import (
    Frame,
    asymptotic_projection_defect,
    gap_directed,
    orthonormalize,
    projection_bound,
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} [{status}] {self.name}: {self.detail} ({self.seconds:.1f} s)"


def _timed(number: int, name: str, budget: float | None = None):
    def wrap(fn):
        def run(*args, **kwargs) -> CriterionResult:
            start = time.perf_counter()
            passed, detail, data = fn(*args, **kwargs)
            seconds = time.perf_counter() - start
            if budget is not None and seconds >= budget:
                passed = False
                detail += f"; runtime {seconds:.1f} s exceeds {budget:g} s"
            return CriterionResult(number, name, bool(passed), detail, seconds, data)

        return functools.wraps(fn)(run)

    return wrap


@lru_cache(maxsize=None)
def _sweep(name: str, r_list: tuple):
    end1, end2 = models.REGRESSION_MODELS[name]()
    return run_sweep(end1, end2, r_list=r_list)


def exponential_root(total_length: float, gamma: float = 1.0) -> float:
    """Positive root of ``tanh(ν L) = ν/γ`` with ``ν = sqrt(γ² - λ²)`` (50 digits).

    Solved in the overflow-free form ``λ² (e^{2νL} + 1) = 2γ (γ + ν)``,
    starting from ``2γ e^{-γL}``.
    """
    with mpmath.workdps(50):
        g = mpmath.mpf(gamma)
        L = mpmath.mpf(total_length)

        def f(x):
            nu = mpmath.sqrt(g**2 - x**2)
            return x**2 * (mpmath.exp(2 * nu * L) + 1) - 2 * g * (g + nu)

        return float(mpmath.findroot(f, 2 * g * mpmath.exp(-g * L)))


# ---------------------------------------------------------------------------
# criteria


@_timed(1, "rotation spectrum and exactness", budget=5.0)
def criterion_1():
    """Rotation model: eigenvalues ``kπ/L``, ``dim 𝒦̃ = 1`` and zero exactness gap."""
    end1, end2 = models.rotation()
    worst = 0.0
    for r in (2, 4, 8):
        p = assemble(end1, end2, r)
        L = p.total_length
        res = eigen.find_eigenvalues(p, window=3.5 * np.pi / L)
        expected = np.arange(-3, 4) * np.pi / L
        if res.eigenvalues.size != expected.size or np.any(res.multiplicities != 1):
            return False, f"r = {r}: found {res.eigenvalues.size} eigenvalues, expected 7", {}
        worst = max(worst, float(np.max(np.abs(res.eigenvalues - expected))))
    rep = _sweep("rotation", tuple(range(3, 11)))
    dims = [row.dim_ktilde for row in rep.rows]
    gaps = [row.exactness_gap for row in rep.rows]
    ok = worst < 1e-8 and all(d == 1 for d in dims) and max(gaps) < 1e-8
    detail = f"max |λ - kπ/L| = {worst:.2e}; dim 𝒦̃ = {sorted(set(dims))}; max gap = {max(gaps):.2e}"
    return ok, detail, {"eigen_error": worst, "dims": dims, "gaps": gaps}


@_timed(2, "sharp lower bound on |λ| (transverse lagrangians)", budget=10.0)
def criterion_2():
    """Rotation model with orthogonal lagrangians: ``|λ|_min L = π/2``, ``dim 𝒦̃ = 0``."""
    rep = _sweep("rotation_orthogonal", tuple(range(2, 11)))
    prods = [row.lambda_min_abs * row.total_length for row in rep.rows]
    err = max(abs(x - np.pi / 2) for x in prods)
    dims = [row.dim_ktilde for row in rep.rows]
    ok = err < 1e-6 and all(d == 0 for d in dims)
    return ok, f"max ||λ|_min L - π/2| = {err:.2e}; dim 𝒦̃ = {sorted(set(dims))}", {
        "products": prods,
        "dims": dims,
    }


@_timed(3, "exponential splitting", budget=20.0)
def criterion_3():
    """Exponential model: split pair matches the transcendental root; decay rate ``γ``."""
    rep = _sweep("exponential", tuple(range(2, 9)))
    rel = []
    series = []
    ledger = True
    for row in rep.rows:
        small = np.array(row.small_eigenvalues)
        ref = exponential_root(row.total_length)
        if small.size != 2:
            return False, f"r = {row.r:g}: {small.size} small eigenvalues", {}
        rel.append(float(np.max(np.abs(np.abs(small) - ref)) / ref))
        series.append((row.total_length, row.lambda_min_abs))
        ledger &= row.dim_ktilde == 2 == row.kappa1 + row.kappa2 - row.dim_Lsum
    fit = fit_decay(series)
    ok = max(rel) < 1e-9 and abs(fit.rate - 1.0) < 0.05 and ledger
    detail = f"max rel error = {max(rel):.2e}; rate vs L = {fit.rate:.4f}; ledger {'ok' if ledger else 'broken'}"
    return ok, detail, {"relative_errors": rel, "rate": fit.rate}


@_timed(4, "gluing residual decay")
def criterion_4():
    """Residual of the glued 𝒦_∞ basis decays at least at 0.9 min(γ, λ)."""
    out = {}
    ok = True
    parts = []
    for name in ("exponential", "perturbed_rotation"):
        rep = _sweep(name, tuple(range(2, 11)))
        end1, end2 = models.REGRESSION_MODELS[name]()
        rate_bound = min(spectral_decompose(end1.boundary).gamma, end1.decay_lambda, end2.decay_lambda)
        fit = fit_decay([(row.r, row.glue_residual_max) for row in rep.rows])
        good = fit.rate >= 0.9 * rate_bound and fit.fit_residual < 0.1
        ok &= good
        out[name] = {"rate": fit.rate, "fit_residual": fit.fit_residual}
        parts.append(f"{name}: rate {fit.rate:.3f} (need >= {0.9 * rate_bound:.2f}), log misfit {fit.fit_residual:.1e}")
    return ok, "; ".join(parts), out


@_timed(5, "exactness trend (perturbed rotation)")
def criterion_5():
    """Exactness gap decreases for ``r >= 4`` and is below 0.02 at ``r = 10``."""
    rep = _sweep("perturbed_rotation", tuple(range(2, 11)))
    rows = [row for row in rep.rows if row.r >= 4]
    gaps = [row.exactness_gap for row in rows]
    mono = all(b < a for a, b in zip(gaps[:-1], gaps[1:]))
    last = rep.rows[-1]
    ledger = last.dim_ktilde == last.kappa1 + last.kappa2 - last.dim_Lsum
    ok = mono and gaps[-1] < 0.02 and ledger
    detail = f"monotone = {mono}; gap(10) = {gaps[-1]:.2e}; ledger {'ok' if ledger else 'broken'}"
    return ok, detail, {"gaps": gaps}


FD_STEPS = (0.1, 0.05, 0.025)


@_timed(6, "shooting vs box-scheme oracle")
def criterion_6(r: float = 6.0, window: float = 0.25):
    """Richardson slope ``2 ± 0.3`` and agreement ``< 1e-6`` at the finest step."""
    worst_abs = 0.0
    slopes = []
    for name in ("rotation", "rotation_orthogonal", "exponential"):
        end1, end2 = models.REGRESSION_MODELS[name]()
        p = assemble(end1, end2, r)
        ref = eigen.find_eigenvalues(p, window=window).spectrum
        errs = []
        for h in FD_STEPS:
            fd = eigen.fd_oracle(p, h, window)
            if fd.size != ref.size:
                return False, f"{name}: fd found {fd.size} eigenvalues, shooting {ref.size}", {}
            errs.append(np.abs(fd - ref))
        errs = np.array(errs)
        worst_abs = max(worst_abs, float(np.max(errs[-1])))
        logh = np.log(FD_STEPS)
        for j in range(ref.size):
            e = errs[:, j]
            if np.max(e) < 1e-13:  # exact in both discretizations
                continue
            slopes.append(float(np.polyfit(logh, np.log(e), 1)[0]))
    ok = worst_abs < 1e-6 and bool(slopes) and all(abs(s - 2.0) <= 0.3 for s in slopes)
    detail = f"slopes in [{min(slopes):.3f}, {max(slopes):.3f}]; finest |Δλ| = {worst_abs:.2e}"
    return ok, detail, {"slopes": slopes, "finest": worst_abs}


@_timed(7, "lagrangian trace spaces")
def criterion_7(seed: int = 7, count: int = 20):
    """Trace spaces of regression ends and random admissible ends are lagrangian."""
    ends = []
    for name in ("rotation", "rotation_orthogonal", "exponential"):
        ends.extend(models.REGRESSION_MODELS[name]())
    rng = np.random.default_rng(seed)
    for i in range(count):
        n = 2 if i % 2 == 0 else 4
        boundary = models.random_boundary(n, rng, kernel_dim=2)
        side = "right_infinite" if i % 4 < 2 else "left_infinite"
        ends.append(models.random_end(n, side, rng, boundary=boundary))
    worst = 0.0
    for end in ends:
        k = extended_kernel(end)
        sd = spectral_decompose(end.boundary)
        if sd.kernel.dim:
            worst = max(worst, is_lagrangian(k.traces, sd.kernel, end.boundary).defect)
    return worst < 1e-6, f"{len(ends)} ends; max lagrangian defect = {worst:.2e}", {"defect": worst}


def _scalar_instance(rng: np.random.Generator, length: float = 8.0, step: float = 0.005):
    """Random ``(μ, u, f)`` with ``u' = μ u + f`` in closed form."""
    mu = 0.0 if rng.random() < 0.25 else float(rng.uniform(-2.0, 2.0))
    grid = np.linspace(0.0, length, int(round(length / step)) + 1)
    f = np.zeros_like(grid)
    u = float(rng.normal()) * np.exp(mu * grid)
    for _ in range(3):
        while True:
            z = complex(rng.uniform(-1.5, 0.5), rng.uniform(0.0, 3.0))
            if abs(z - mu) > 0.1:
                break
        a = complex(rng.normal(), rng.normal())
        e = a * np.exp(z * grid)
        f += e.real
        u += (e / (z - mu)).real
    return mu, grid, u, f


@_timed(8, "scalar ODE and subspace lemmas")
def criterion_8(seed: int = 8, instances: int = 1000):
    """Scalar-ODE chains, the projection lower bound and the vanishing defect."""
    rng = np.random.default_rng(seed)
    worst_margin = math.inf
    for _ in range(instances):
        mu, grid, u, f = _scalar_instance(rng)
        t = float(rng.uniform(0.0, 2.0))
        n = int(rng.integers(1, 5))
        checks = scalar_ode_bounds(
            mu, CylinderSection(grid, u[:, None]), CylinderSection(grid, f[:, None]), t, n
        )
        for c in checks.values():
            worst_margin = min(worst_margin, c.margin)
    # projection bound on random pairs
    worst_bound = math.inf
    for _ in range(200):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n + 1))
        m = int(rng.integers(k, n + 1))
        u = orthonormalize(rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k)))
        v = orthonormalize(rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m)))
        d = gap_directed(u, v)
        if d >= 1:
            continue
        a = math.sqrt(max(0.0, 1 - d * d))
        worst_bound = min(worst_bound, projection_bound(u, v).sigma_min - a)
    # vanishing defect along rotated pairs θ_r = 1/r in a random unitary frame
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    defects = []
    exact_err = 0.0
    for r in range(1, 41):
        th = 1.0 / r
        u = Frame(q[:, :1])
        v = Frame(np.cos(th) * q[:, :1] + np.sin(th) * q[:, 1:2])
        dsum = asymptotic_projection_defect(u, v) + asymptotic_projection_defect(v, u)
        defects.append(dsum)
        exact_err = max(exact_err, abs(dsum - 2 * math.sin(th) ** 2))
    mono = all(b < a for a, b in zip(defects[:-1], defects[1:]))
    ok = worst_margin >= -1e-6 and worst_bound >= -1e-10 and exact_err < 1e-10 and mono
    detail = (
        f"min ODE margin = {worst_margin:.2e}; min σ_min - a = {worst_bound:.2e}; "
        f"defect error = {exact_err:.1e}, defect(40) = {defects[-1]:.1e}"
    )
    return ok, detail, {"ode_margin": worst_margin, "bound": worst_bound, "defects": defects}


@_timed(9, "graded refinement")
def criterion_9(r: float = 6.0):
    """Graded dimensions, chirality invariance and ``±λ`` pairing."""
    msgs = []
    ok = True
    e1, e2 = models.exponential(graded=True)
    row = compute_row(e1, e2, r, auto_schedule(e1, e2))
    g = row.graded
    if g is None:
        return False, f"graded exponential failed: {row.error}", {}
    good = (
        g["ktilde_dims"] == (1, 1)
        and g["K1_dims"] == (0, 1)
        and g["K2_dims"] == (1, 0)
        and g["ktilde_defect"] < 1e-6
        and g["pairing_defect"] < 1e-6
        and all(v["balanced"] for v in g["ledger"].values())
    )
    ok &= good
    msgs.append(
        f"exponential 𝒦̃ dims {g['ktilde_dims']}, C-defect {g['ktilde_defect']:.1e}, "
        f"pairing {g['pairing_defect']:.1e}"
    )
    e1, e2 = models.rotation(graded=True)
    row = compute_row(e1, e2, r, auto_schedule(e1, e2))
    g = row.graded
    if g is None:
        return False, f"graded rotation failed: {row.error}", {}
    good = (
        g["ktilde_dims"] == (1, 0)
        and g["K_inf_dims"] == (1, 0)
        and all(v["balanced"] for v in g["ledger"].values())
    )
    ok &= good
    msgs.append(f"rotation 𝒦̃ dims {g['ktilde_dims']}, 𝒦_∞ dims {g['K_inf_dims']}")
    # the discrete operator anti-commutes with the chirality
    p = assemble(*models.exponential(graded=True), r)
    A, B = eigen.fd_matrices(p, 0.1, reduced=False)
    C = p.boundary.C.real
    K = A.shape[0] // p.n
    cr = np.kron(np.eye(K), C)
    cc = np.kron(np.eye(K + 1), C)
    defect = float(np.max(np.abs(A @ cc + cr @ A)) + np.max(np.abs(B @ cc - cr @ B)))
    ok &= defect < 1e-12
    msgs.append(f"discrete anti-commutation defect {defect:.1e}")
    return ok, "; ".join(msgs), {"fd_defect": defect}


CRITERIA = (
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
)


def run_all(echo=None) -> list[CriterionResult]:
    """Run criteria 1 to 9 in order; ``echo`` receives each result line."""
    out = []
    for fn in CRITERIA:
        res = fn()
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out
