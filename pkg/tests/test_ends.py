from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from neckglue.boundary import BoundaryModel, graded_lagrangian_defect, is_lagrangian, spectral_decompose
from neckglue.ends import (
    CapPotential,
    EndModel,
    difference_kernel,
    extended_kernel,
    kernel_gram,
    neck_nodes,
    subdivide,
    validate_end,
)
from neckglue.models import (
    J_STD,
    exponential,
    line,
    perturbed_rotation,
    random_boundary,
    random_end,
    rotation,
)
from neckglue.subspaces import gap, gap_directed


def _perturbed_trace_size() -> float:
    """|u_inf| of the normalized perturbed-rotation kernel, from the closed form.

    With ``D = 0`` and ``A = 0.5 e^{-t} diag(1, -1)`` the solution through
    ``e1`` is ``exp(0.5 (1 - e^{-t})) e1``; the extended norm is
    ``∫ |u - u_inf|² dt + |u_inf|²``.
    """
    u_inf = np.exp(0.5)
    tail, _ = quad(lambda t: (np.exp(0.5 * (1 - np.exp(-t))) - u_inf) ** 2, 0, np.inf, epsabs=1e-14)
    return u_inf / np.sqrt(tail + u_inf**2)


def test_subdivide_keeps_breakpoints():
    g = subdivide([0.0, 0.3, 1.0], 0.1)
    assert 0.3 in g and g[0] == 0.0 and g[-1] == 1.0
    assert np.max(np.diff(g)) <= 0.1 + 1e-15


def test_neck_nodes_contain_quarter_points_after_anchor():
    g = neck_nodes(2.0, 0.1, 4.0)
    for x in (2.0, 2.25, 3.5, 4.0):
        assert np.min(np.abs(g - x)) < 1e-14
    assert np.all(np.diff(g) > 0)
    with pytest.raises(ValueError):
        neck_nodes(-1.0, 0.1, 2.0)


def test_cap_potential_interpolates_and_checks_hermiticity():
    cap = CapPotential([-1.0, 0.0], [np.zeros((2, 2)), np.diag([2.0, 4.0])])
    assert cap(-0.5) == pytest.approx(np.diag([1.0, 2.0]))
    assert cap(-3.0) == pytest.approx(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        CapPotential([0.0], [np.array([[0.0, 1.0], [0.0, 0.0]])])


def test_validate_end_reports_non_lagrangian_boundary_condition():
    b = BoundaryModel(np.zeros((2, 2)), J_STD)
    end = EndModel(b, "right_infinite", line([1.0, 1j]))
    assert any("not lagrangian" in p for p in validate_end(end))
    with pytest.raises(ValueError):
        extended_kernel(end)
    with pytest.raises(ValueError):
        EndModel(b, "sideways", line([1.0, 0.0]))


def test_rotation_kernel_is_constant_line():
    end, _ = rotation(cap_length=1.0)
    k = extended_kernel(end)
    assert k.kappa == 1
    assert gap(k.traces, line([1.0, 0.0])) < 1e-12
    v = k.values[:, :, 0]
    assert np.max(np.abs(v - v[0])) < 1e-13
    # extended norm: cap integral T_c |c|² plus |u_inf|²
    assert abs(v[0, 0]) == pytest.approx(1 / np.sqrt(2), rel=1e-12)
    assert np.max(np.abs(kernel_gram(k) - np.eye(1))) < 1e-12


def test_exponential_decaying_mode():
    end, _ = exponential()  # right end with Λ = span(e2)
    k = extended_kernel(end)
    assert k.kappa == 1 and k.traces.dim == 0
    neck = k.grid >= 0
    v = k.values[neck, :, 0]
    t = k.grid[neck]
    assert np.max(np.abs(v[:, 0])) < 1e-12
    # ∫ e^{-2t} = 1/2, so the normalized mode is sqrt(2) e^{-t}
    assert np.max(np.abs(np.abs(v[:, 1]) - np.sqrt(2) * np.exp(-t))) < 1e-4


def test_exponential_growing_boundary_condition_has_no_kernel():
    b = BoundaryModel(np.diag([1.0, -1.0]), J_STD)
    k = extended_kernel(EndModel(b, "right_infinite", line([1.0, 0.0])))
    assert k.kappa == 0 and k.traces.dim == 0


def test_left_end_grid_is_ascending():
    _, end = exponential()  # left end with Λ = span(e1)
    k = extended_kernel(end)
    assert k.kappa == 1
    assert np.all(np.diff(k.grid) > 0) and k.grid[-1] == 0.0


def test_perturbed_rotation_trace_matches_closed_form():
    end, _ = perturbed_rotation()
    k = extended_kernel(end, step=0.01)
    assert k.kappa == 1
    chk = is_lagrangian(k.traces, k.spectral.kernel, end.boundary)
    assert chk.lagrangian and chk.defect < 1e-7
    assert np.linalg.norm(k.u_inf) == pytest.approx(_perturbed_trace_size(), rel=1e-4)


def test_perturbed_rotation_step_halving_is_second_order():
    end, _ = perturbed_rotation()
    exact = _perturbed_trace_size()
    steps = (0.04, 0.02, 0.01)
    errs = [abs(np.linalg.norm(extended_kernel(end, step=h, scheme="midpoint").u_inf) - exact) for h in steps]
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.3)


def test_doubling_the_cut_stays_within_trace_error_bound():
    end, _ = perturbed_rotation()
    near = extended_kernel(end, T_cut=7.0)
    far = extended_kernel(end, T_cut=14.0)
    assert near.trace_error_bound > far.trace_error_bound > 0
    diff = np.linalg.norm(near.u_inf - far.u_inf)
    assert diff <= near.trace_error_bound


def test_cut_too_close_is_rejected():
    end, _ = perturbed_rotation()
    with pytest.raises(ValueError, match="too small"):
        extended_kernel(end, T_cut=2.0)


def test_difference_kernel_examples():
    e1, e2 = rotation()
    d = difference_kernel(extended_kernel(e1), extended_kernel(e2))
    assert (d.dim_K_inf, d.L_sum.dim, d.L_cap.dim) == (1, 1, 1)
    e1, e2 = rotation(orthogonal=True)
    d = difference_kernel(extended_kernel(e1), extended_kernel(e2))
    assert (d.dim_K_inf, d.L_sum.dim) == (0, 2)
    e1, e2 = exponential()
    d = difference_kernel(extended_kernel(e1), extended_kernel(e2))
    assert d.dim_K_inf == 2 and d.L_sum.dim == 0
    assert d.consistent


def test_difference_kernel_rejects_mismatched_dimensions():
    k2 = extended_kernel(rotation()[0])
    b4 = random_boundary(4, np.random.default_rng(0), kernel_dim=2)
    k4 = extended_kernel(random_end(4, "right_infinite", np.random.default_rng(1), boundary=b4))
    with pytest.raises(ValueError):
        difference_kernel(k2, k4)


def test_graded_rotation_trace_satisfies_graded_relation():
    end, _ = rotation(graded=True)
    k = extended_kernel(end)
    assert graded_lagrangian_defect(k.traces, k.spectral.kernel, end.boundary) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4]), st.sampled_from(["right_infinite", "left_infinite"]))
def test_random_end_traces_are_lagrangian(seed, n, side):
    rng = np.random.default_rng(seed)
    if n == 2:
        b = BoundaryModel(np.zeros((2, 2)), J_STD)
    else:
        b = random_boundary(4, rng, kernel_dim=2)
    end = random_end(n, side, rng, boundary=b)
    k = extended_kernel(end)
    sd = spectral_decompose(b)
    assert k.traces.dim <= k.kappa <= n // 2
    assert gap_directed(k.traces, sd.kernel) < 1e-8
    assert is_lagrangian(k.traces, sd.kernel, b).defect < 1e-6
    assert np.max(np.abs(kernel_gram(k) - np.eye(k.kappa))) < 1e-10
