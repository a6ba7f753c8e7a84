from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from neckglue.models import J_STD
from neckglue.propagation import (
    build_system,
    chunk_products,
    frame_phase_factor,
    souriau,
    step_exponentials,
    track_frames,
    transfer_matrix,
)

J = J_STD.astype(complex)


def constant(H):
    H = np.asarray(H, dtype=complex)
    return lambda x: np.broadcast_to(H, np.shape(x) + H.shape)


def smooth_hamiltonian(x):
    # H = -J D + B(x) with D = diag(0.5, -0.5) and a smooth Hermitian B
    x = np.asarray(x, dtype=float)
    D = np.diag([0.5, -0.5])
    b = np.array([[np.cos(x), 0.3 * np.sin(2 * x)], [0.3 * np.sin(2 * x), -np.cos(x)]])
    b = np.moveaxis(b, (0, 1), (-2, -1))
    return -J @ D + b


def reference_transfer(hamiltonian, a, b, lam):
    def rhs(x, y):
        F = y.reshape(2, 2)
        return (J @ (hamiltonian(x) - lam * np.eye(2)) @ F).reshape(-1)

    sol = solve_ivp(rhs, (a, b), np.eye(2, dtype=complex).reshape(-1), method="DOP853", rtol=1e-13, atol=1e-13)
    return sol.y[:, -1].reshape(2, 2)


def test_zero_operator_gives_identity():
    sys = build_system(np.linspace(0, 3, 31), J, constant(np.zeros((2, 2))))
    assert np.allclose(transfer_matrix(sys, 0.0), np.eye(2), atol=1e-15)


def test_constant_diagonal_operator_gives_exponentials():
    g, ell = 0.8, 2.5
    D = np.diag([g, -g])
    sys = build_system(np.linspace(0, ell, 26), J, constant(-J @ D))
    F = transfer_matrix(sys, 0.0)
    assert np.allclose(F, np.diag([np.exp(g * ell), np.exp(-g * ell)]), rtol=1e-13, atol=1e-14)


def test_zero_operator_with_eigenvalue_is_rotation():
    lam, ell = 0.7, 4.0
    sys = build_system(np.linspace(0, ell, 41), J, constant(np.zeros((2, 2))))
    F = transfer_matrix(sys, lam)
    exact = np.cos(lam * ell) * np.eye(2) - np.sin(lam * ell) * J
    assert np.max(np.abs(F - exact)) < 1e-12


@pytest.mark.parametrize("scheme,order", [("magnus4", 4), ("midpoint", 2)])
def test_convergence_order(scheme, order):
    ref = reference_transfer(smooth_hamiltonian, 0.0, 2.0, 0.4)
    errs = []
    steps = (0.1, 0.05, 0.025)
    for h in steps:
        grid = np.linspace(0, 2, int(round(2 / h)) + 1)
        sys = build_system(grid, J, smooth_hamiltonian, scheme)
        errs.append(np.max(np.abs(transfer_matrix(sys, 0.4) - ref)))
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert slope == pytest.approx(order, abs=0.3)


def test_unknown_scheme_rejected():
    with pytest.raises(ValueError):
        build_system(np.linspace(0, 1, 3), J, constant(np.zeros((2, 2))), scheme="euler")


def test_repeated_steps_are_deduplicated():
    sys = build_system(np.linspace(0, 5, 51), J, constant(np.diag([1.0, 2.0])))
    # spacings of linspace differ only by rounding, so a handful of generators remain
    assert sys.unique_index.size <= 3
    assert sys.inverse.size == 50
    E = step_exponentials(sys, [0.3, 0.5])
    assert E.shape == (2, 50, 2, 2)


def test_chunk_products_compose_to_transfer_matrix():
    grid = np.linspace(0, 2, 41)
    sys = build_system(grid, J, smooth_hamiltonian)
    E = step_exponentials(sys, [0.2])
    chunks = chunk_products(E, 7)[0]
    F = np.eye(2, dtype=complex)
    for c in chunks:
        F = c @ F
    assert np.max(np.abs(F - transfer_matrix(sys, 0.2))) < 1e-13


def test_track_frames_section_solves_the_system():
    grid = np.linspace(0, 2, 81)
    sys = build_system(grid, J, smooth_hamiltonian)
    q0 = np.array([[1.0], [0.0]], dtype=complex)
    track = track_frames(sys, 0.3, q0, forward=True)
    # the solution starting at e1: its coefficient at the end is R-accumulated
    F = transfer_matrix(sys, 0.3)
    end_value = F @ q0
    coeff = track.frames[-1].conj().T @ end_value
    values = track.section(coeff)
    assert np.max(np.abs(values[0] - q0)) < 1e-12
    assert np.max(np.abs(values[-1] - end_value)) < 1e-12


def test_backward_track_matches_forward_values():
    grid = np.linspace(0, 2, 81)
    sys = build_system(grid, J, smooth_hamiltonian)
    q_end = np.array([[0.6], [0.8]], dtype=complex)
    back = track_frames(sys, -0.2, q_end, forward=False)
    values = back.section(back.frames[0].conj().T @ (np.linalg.solve(transfer_matrix(sys, -0.2), q_end)))
    assert np.max(np.abs(values[-1] - q_end)) < 1e-12


def test_renormalized_tracking_survives_long_growth():
    g = 5.0
    grid = np.linspace(0, 300, 3001)
    sys = build_system(grid, J, constant(-J @ np.diag([g, -g])))
    with pytest.raises(FloatingPointError):
        transfer_matrix(sys, 0.0)
    q0 = np.array([[1.0], [1.0]], dtype=complex) / np.sqrt(2)
    track = track_frames(sys, 0.0, q0)
    assert np.all(np.isfinite(track.frames))
    assert abs(abs(track.frames[-1][0, 0]) - 1.0) < 1e-12  # aligned with the growing mode


def test_phase_factor_is_invariant_under_positive_rescaling():
    sys = build_system(np.linspace(0, 1, 3), J, constant(np.zeros((2, 2))))
    q = np.array([[1.0], [0.3]], dtype=complex)
    a = frame_phase_factor(sys, q)
    b = frame_phase_factor(sys, 2.5 * q)
    assert np.angle(a) == pytest.approx(np.angle(b), abs=1e-14)


@pytest.mark.parametrize("theta", [0.0, 0.4, 1.3, 2.9])
def test_souriau_map_of_real_lines_is_unitary(theta):
    sys = build_system(np.linspace(0, 1, 3), J, constant(np.zeros((2, 2))))
    q = np.array([[np.cos(theta)], [np.sin(theta)]], dtype=complex)
    u = souriau(sys, q)
    assert abs(abs(u[0, 0]) - 1) < 1e-14
    # phase of det U equals the phase factor of the frame
    assert np.angle(u[0, 0]) == pytest.approx(np.angle(frame_phase_factor(sys, q)), abs=1e-12)
