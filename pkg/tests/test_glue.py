from __future__ import annotations

import numpy as np
import pytest

from neckglue.analysis import Tolerances, exactness_gap, fit_decay, row_kernels, split_coordinates
from neckglue.boundary import BoundaryModel
from neckglue.eigen import apply_operator
from neckglue.ends import EndModel, difference_kernel
from neckglue.glue import assemble, freeze_index, glue_map, split_gram, split_inner, split_map
from neckglue.models import CHIRALITY, J_STD, exponential, line, perturbed_rotation, rotation
from neckglue.necks import eval_cutoff

TOL = Tolerances()


def glued_pair(model, r, step=0.02):
    e1, e2 = model
    problem = assemble(e1, e2, r, step)
    K1, K2 = row_kernels(problem, TOL)
    d = difference_kernel(K1, K2)
    return problem, K1, K2, d


def test_total_length_and_charts():
    problem = assemble(*rotation(cap_length=1.0), r=2)
    assert problem.total_length == 9.0
    assert problem.grid[0] == 0.0 and problem.grid[-1] == pytest.approx(9.0, abs=1e-14)
    x_mid = 1.0 + 2 + 1.5
    assert problem.to_t(x_mid) == pytest.approx(3.5)
    assert problem.to_s(x_mid) == pytest.approx(-3.5)
    assert problem.grid[problem.mid_index] == pytest.approx(x_mid, abs=1e-14)


def test_potential_vanishes_on_the_overlap_band():
    problem = assemble(*perturbed_rotation(), r=3)
    x = problem.T_c1 + np.linspace(4.0, 5.0, 21)  # t in [r + 1, r + 2]
    assert np.max(np.abs(problem.potential(x))) == 0.0
    b = problem.potential(problem.grid)
    assert np.max(np.abs(b - np.conj(np.swapaxes(b, 1, 2)))) < 1e-15
    assert np.max(np.abs(b[1])) > 0  # the neck perturbation is present near the caps


def test_assemble_rejects_bad_input():
    e1, e2 = rotation()
    with pytest.raises(ValueError, match="at least 1"):
        assemble(e1, e2, 0.5)
    with pytest.raises(ValueError):
        assemble(e2, e1, 2)
    other = BoundaryModel(np.diag([1.0, -1.0]), J_STD)
    with pytest.raises(ValueError, match="different boundary"):
        assemble(e1, EndModel(other, "left_infinite", line([1.0, 0.0])), 2)


def test_graded_potential_anticommutes_with_chirality():
    # B = -J A with A commuting with C and J anti-commuting with C
    problem = assemble(*perturbed_rotation(graded=True), r=2)
    v = problem.potential(problem.grid)
    assert np.max(np.abs(v)) > 0
    assert np.max(np.abs(v @ CHIRALITY + CHIRALITY @ v)) < 1e-15


def test_glue_constant_pair_in_rotation_model():
    problem, K1, K2, d = glued_pair(rotation(), 3)
    assert d.dim_K_inf == 1
    sec, res = glue_map(problem, K1, K2, d.K_inf_frame.columns[:, 0])
    u = sec.values
    assert np.max(np.abs(u - u[0])) < 1e-13
    assert gap_to_e1(u[0]) < 1e-13
    assert res.norm() < 1e-13


def gap_to_e1(v) -> float:
    v = np.asarray(v) / np.linalg.norm(v)
    return float(np.sqrt(max(0.0, 1 - abs(v[0]) ** 2)))


def test_glue_exponential_pair_is_cut_off_modes():
    r = 4
    problem, K1, K2, d = glued_pair(exponential(), r)
    assert d.dim_K_inf == 2
    coeffs = np.array([1.0, 0.0])  # the side-1 mode e^{-t} e2
    sec, _ = glue_map(problem, K1, K2, coeffs)
    t = problem.to_t(problem.grid)
    side1 = t <= r + 1.5
    eta = eval_cutoff(r, t[side1])
    expected = eta[:, None, None] * K1.values[: side1.sum()]
    assert np.max(np.abs(sec.values[side1] - expected[..., 0])) < 1e-14
    band = (t >= r + 1) & (t <= r + 2)
    assert np.max(np.abs(sec.values[band])) == 0.0


def test_glue_residual_matches_operator_applied_to_output():
    problem, K1, K2, d = glued_pair(perturbed_rotation(), 4, step=0.01)
    sec, res = glue_map(problem, K1, K2, d.K_inf_frame.columns[:, 0])
    direct = apply_operator(problem, sec.values)
    w = np.linalg.norm(direct - res.values, axis=1)
    assert np.max(w) < 1e-5 * max(1.0, np.max(np.abs(sec.values)))


def test_glue_residual_decays_at_the_spectral_gap_rate():
    rs = (2, 4, 6, 8, 10)
    sizes = []
    for r in rs:
        problem, K1, K2, d = glued_pair(exponential(), r)
        _, res = glue_map(problem, K1, K2, d.K_inf_frame.columns)
        sizes.append(float(np.max(np.linalg.norm(res.values, axis=(0, 1)))))
    fit = fit_decay(list(zip(rs, sizes)))
    assert fit.rate >= 0.9 * 1.0
    assert fit.fit_residual < 0.1


def test_glue_rejects_trace_mismatch():
    problem, K1, K2, _ = glued_pair(rotation(), 2)
    with pytest.raises(ValueError, match="traces differ"):
        glue_map(problem, K1, K2, np.array([1.0, 0.0]))
    with pytest.raises(ValueError, match="wrong length"):
        glue_map(problem, K1, K2, np.array([1.0]))


def test_glue_is_linear():
    problem, K1, K2, _ = glued_pair(exponential(), 3)
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal(2) + 1j * rng.standard_normal(2), rng.standard_normal(2)
    a, b = 0.3 - 1.1j, 2.0
    lhs = glue_map(problem, K1, K2, a * x + b * y)[0].values
    rhs = a * glue_map(problem, K1, K2, x)[0].values + b * glue_map(problem, K1, K2, y)[0].values
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_split_of_constant_section_is_frozen_constant():
    problem = assemble(*rotation(cap_length=0.5), r=3)
    v = np.array([0.6, 0.8j])
    psi = np.tile(v, (problem.grid.size, 1))
    s1, s2 = split_map(problem, psi)
    for s in (s1, s2):
        assert np.allclose(s.frozen, v) and np.allclose(s.u_inf, v)
        assert s.tau[-1] == pytest.approx(3.0, abs=1e-14)
        # extended norm: cap integral plus |u_inf|²
        assert s.norm == pytest.approx(np.sqrt(0.5 + 1.0), rel=1e-12)


def test_split_window_convention_keeps_only_kernel_component_at_infinity():
    problem = assemble(*exponential(), r=3)
    v = np.array([1.0, 2.0])
    psi = np.tile(v, (problem.grid.size, 1))
    s1, _ = split_map(problem, psi, convention="window")
    assert np.allclose(s1.u_inf, 0.0)  # ker D = 0 in the exponential model
    assert s1.window == pytest.approx(10.0)
    with pytest.raises(ValueError):
        split_map(problem, psi, convention="other")


def test_split_freezes_at_slice():
    problem = assemble(*perturbed_rotation(), r=4)
    rng = np.random.default_rng(2)
    psi = rng.standard_normal((problem.grid.size, 2))
    s1, s2 = split_map(problem, psi)
    k = freeze_index(problem.side1_tau, 4)
    assert np.array_equal(s1.frozen, psi[k])
    assert np.array_equal(s2.frozen, psi[problem.side2_indices()[freeze_index(problem.side2_tau, 4)]])


def test_split_is_linear_and_commutes_with_chirality():
    problem = assemble(*rotation(graded=True), r=2)
    rng = np.random.default_rng(3)
    a = rng.standard_normal((problem.grid.size, 2)) + 1j * rng.standard_normal((problem.grid.size, 2))
    b = rng.standard_normal((problem.grid.size, 2))
    s_sum = split_map(problem, a + 2 * b)[0]
    s_a, s_b = split_map(problem, a)[0], split_map(problem, b)[0]
    assert np.max(np.abs(s_sum.values - (s_a.values + 2 * s_b.values))) < 1e-12
    s_c = split_map(problem, a @ CHIRALITY.T)[0]
    assert np.max(np.abs(s_c.values - s_a.values @ CHIRALITY.T)) < 1e-15


def test_split_of_rotation_zero_mode_recovers_difference_kernel():
    problem, K1, K2, d = glued_pair(rotation(), 3)
    psi = np.tile([1.0, 0.0], (problem.grid.size, 1))[..., None]
    c, rest = split_coordinates(problem, psi, K1, K2, TOL)
    out = exactness_gap(c, rest, d.K_inf_frame.columns)
    assert out["gap"] < 1e-12


def test_glue_then_split_is_close_to_identity_on_exponential_model():
    problem, K1, K2, d = glued_pair(exponential(), 6)
    sec, _ = glue_map(problem, K1, K2, d.K_inf_frame.columns)
    c, rest = split_coordinates(problem, sec.values, K1, K2, TOL)
    assert exactness_gap(c, rest, d.K_inf_frame.columns)["gap"] < 0.1


def test_split_inner_and_gram_agree_for_kernel_sections():
    problem, K1, K2, d = glued_pair(perturbed_rotation(), 4)
    sec, _ = glue_map(problem, K1, K2, d.K_inf_frame.columns)
    s1, _ = split_map(problem, sec.values)
    g = split_gram(s1, s1)
    assert np.allclose(g, g.conj().T, atol=1e-14)
    ip = split_inner(s1, K1)
    # Bessel: the kernel component never exceeds the full norm
    assert np.all(np.sum(np.abs(ip) ** 2, axis=0) <= np.real(np.diag(g)) * (1 + 1e-12))
