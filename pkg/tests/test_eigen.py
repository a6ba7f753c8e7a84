from __future__ import annotations

import numpy as np
import pytest

from neckglue.eigen import (
    apply_operator,
    count_eigenvalues,
    eigenvector,
    fd_matrices,
    fd_oracle,
    find_eigenvalues,
    ktilde,
    l2_gram,
    l2_norm,
    matching_sigma,
)
from neckglue.glue import assemble
from neckglue.models import CHIRALITY, exponential, rotation

# Positive root of tanh(ν L) = ν with ν = sqrt(1 - λ²), computed once with
# mpmath at 40 digits directly on the tanh form.
EXPONENTIAL_ROOT = {9.0: 2.468196720773812e-04, 11.0: 3.340340177616454e-05}


def test_matching_sigma_rotation():
    problem = assemble(*rotation(), r=3)
    L = problem.total_length
    assert matching_sigma(problem, np.pi / L).sigma_min < 1e-10
    off = matching_sigma(problem, np.pi / (2 * L))
    assert off.sigma_min > 0.5
    assert off.singular_values.shape == (2,)


def test_matching_sigma_exponential_generic_lagrangian():
    problem = assemble(*exponential(mismatched=True), r=3)
    assert matching_sigma(problem, 0.0).sigma_min > 1e-3


def test_rotation_spectrum_is_k_pi_over_length():
    problem = assemble(*rotation(), r=3)
    L = problem.total_length
    res = find_eigenvalues(problem, 2 * np.pi / L)
    expected = np.array([-1, 0, 1]) * np.pi / L
    assert res.eigenvalues == pytest.approx(expected, abs=1e-9)
    assert list(res.multiplicities) == [1, 1, 1]


def test_orthogonal_rotation_spectrum_is_shifted():
    problem = assemble(*rotation(orthogonal=True), r=3)
    L = problem.total_length
    res = find_eigenvalues(problem, 2 * np.pi / L)
    expected = np.array([-1.5, -0.5, 0.5, 1.5]) * np.pi / L
    assert res.eigenvalues == pytest.approx(expected, abs=1e-9)


def test_count_matches_closed_form():
    problem = assemble(*rotation(), r=4)
    L = problem.total_length
    assert count_eigenvalues(problem, -2.5 * np.pi / L, 2.5 * np.pi / L) == 5
    assert count_eigenvalues(problem, 0.5 * np.pi / L, 1.5 * np.pi / L) == 1


@pytest.mark.parametrize("r,L", [(3, 9.0), (4, 11.0)])
def test_exponential_pair_matches_transcendental_root(r, L):
    problem = assemble(*exponential(), r=r)
    assert problem.total_length == L
    res = find_eigenvalues(problem, 0.1)
    small = res.eigenvalues[np.abs(res.eigenvalues) < 0.01]
    root = EXPONENTIAL_ROOT[L]
    assert small == pytest.approx([-root, root], rel=1e-9)
    assert root == pytest.approx(2 * np.exp(-L), rel=0.02)


def test_rotation_zero_mode_eigenvector_is_constant():
    problem = assemble(*rotation(), r=3)
    L = problem.total_length
    sec, resid = eigenvector(problem, 0.0)
    mag = np.linalg.norm(sec.values[..., 0], axis=1)
    assert np.max(np.abs(mag - 1 / np.sqrt(L))) < 1e-12
    assert resid < 1e-8


def test_rotation_first_mode_rotates_uniformly():
    problem = assemble(*rotation(), r=3)
    L = problem.total_length
    lam = find_eigenvalues(problem, 1.5 * np.pi / L).eigenvalues[-1]
    sec, resid = eigenvector(problem, lam)
    v = sec.values[..., 0]
    assert np.max(np.abs(np.linalg.norm(v, axis=1) - 1 / np.sqrt(L))) < 1e-8
    # u(x) = exp(-λ x J) u(0) is a rotation by angle λ x
    x = problem.grid
    cos = np.real(np.sum(np.conj(v[0]) * v, axis=1)) / np.sum(np.abs(v[0]) ** 2)
    assert np.max(np.abs(np.abs(cos) - np.abs(np.cos(lam * x)))) < 1e-8
    assert resid < 1e-7


def test_eigenvector_rejects_non_eigenvalue():
    problem = assemble(*rotation(), r=3)
    with pytest.raises(ValueError, match="not an eigenvalue"):
        eigenvector(problem, 0.1)


def test_ktilde_dimensions():
    for model, dim in ((rotation(), 1), (rotation(orthogonal=True), 0), (exponential(), 2)):
        problem = assemble(*model, r=3)
        kt = ktilde(problem, 1 / 9)
        assert kt.dim == dim
        if dim:
            g = l2_gram(problem, kt.values, kt.values)
            assert np.max(np.abs(g - np.eye(dim))) < 1e-10


def test_distance_to_small_eigenspace_for_nearly_harmonic_section():
    r = 4
    c = 1 / r**2
    problem = assemble(*rotation(), r=r)
    kt = ktilde(problem, c)
    x = problem.grid
    L = problem.total_length
    eps = 1e-3
    u = np.stack([np.ones_like(x), eps * np.sin(np.pi * x / L)], axis=1).astype(complex)[..., None]
    du = l2_norm(problem, apply_operator(problem, u))[0]
    nu = l2_norm(problem, u)[0]
    assert du < 0.5 * c * nu
    coeff = l2_gram(problem, kt.values, u)
    dist = l2_norm(problem, u - kt.values @ coeff)[0]
    assert dist < 0.5 * nu


def test_graded_spectrum_is_symmetric():
    problem = assemble(*exponential(graded=True), r=3)
    w = find_eigenvalues(problem, 0.5).eigenvalues
    assert w == pytest.approx(-w[::-1], abs=1e-12)


@pytest.mark.parametrize("graded_model", [rotation(graded=True), exponential(graded=True)])
def test_box_scheme_anticommutes_with_chirality(graded_model):
    problem = assemble(*graded_model, r=2)
    A, B = fd_matrices(problem, 0.1, reduced=False)
    K = A.shape[0] // 2
    c_rows = np.kron(np.eye(K), CHIRALITY)
    c_cols = np.kron(np.eye(K + 1), CHIRALITY)
    assert np.max(np.abs(A @ c_cols + c_rows @ A)) < 1e-12
    assert np.max(np.abs(B @ c_cols - c_rows @ B)) < 1e-15


def test_box_scheme_converges_at_second_order_on_rotation():
    problem = assemble(*rotation(), r=3)
    L = problem.total_length
    steps = (0.1, 0.05, 0.025)
    errs = []
    for h in steps:
        lam = fd_oracle(problem, h, 1.5 * np.pi / L)
        errs.append(abs(lam[lam > 0.1 / L][0] - np.pi / L))
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)


def test_box_scheme_agrees_with_shooting_on_exponential_model():
    problem = assemble(*exponential(), r=3)
    shoot = find_eigenvalues(problem, 0.5).eigenvalues
    fd = fd_oracle(problem, 0.01, 0.5)
    assert fd.size == shoot.size
    assert np.max(np.abs(fd - shoot)) < 1e-6


def test_box_scheme_budget_and_window_checks():
    problem = assemble(*rotation(), r=3)
    with pytest.raises(ValueError, match="budget"):
        fd_oracle(problem, 0.001, 1.0)
    with pytest.raises(ValueError):
        fd_oracle(problem, 0.1, 0.0)
