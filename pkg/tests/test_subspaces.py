from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neckglue.subspaces import (
    Frame,
    asymptotic_projection_defect,
    gap,
    gap_directed,
    orthonormalize,
    principal_cosines,
    projection_bound,
    subspace_intersection,
    subspace_sum,
)

E = np.eye(3, dtype=complex)


def line(*v) -> Frame:
    v = np.asarray(v, dtype=complex).reshape(-1, 1)
    return Frame(v / np.linalg.norm(v))


def rotated_line(theta: float) -> Frame:
    return line(np.cos(theta), np.sin(theta))


def random_frame(rng, n, k) -> Frame:
    return orthonormalize(rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k)))


def gram_schmidt(m: np.ndarray) -> np.ndarray:
    """Classical Gram-Schmidt with re-orthogonalization (independent oracle)."""
    cols = []
    for v in m.T:
        w = v.astype(complex)
        for _ in range(2):
            for q in cols:
                w = w - (q.conj() @ w) * q
        cols.append(w / np.linalg.norm(w))
    return np.array(cols).T


@st.composite
def frame_pairs(draw, same_dim=False):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    n = draw(st.integers(2, 6))
    k = draw(st.integers(1, n))
    m = k if same_dim else draw(st.integers(1, n))
    return random_frame(rng, n, k), random_frame(rng, n, m)


def test_frame_rejects_non_orthonormal_columns():
    with pytest.raises(ValueError):
        Frame(np.array([[1.0], [1.0]]))


def test_frame_zero_and_full():
    assert Frame.zero(3).dim == 0
    assert Frame.full(3).dim == 3
    assert Frame.zero(3).ambient_dim == 3


def test_orthonormalize_identity_columns():
    q = orthonormalize(E)
    assert q.dim == 3
    assert gap(q, Frame(E)) < 1e-15


def test_orthonormalize_drops_repeated_column():
    m = np.array([[1.0, 1.0], [2.0, 2.0], [0.0, 0.0]])
    assert orthonormalize(m).dim == 1


def test_orthonormalize_zero_matrix_gives_empty_frame():
    assert orthonormalize(np.zeros((3, 2))).dim == 0


def test_orthonormalize_matches_gram_schmidt():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    q = orthonormalize(m)
    assert np.linalg.norm(q.columns.conj().T @ q.columns - np.eye(2)) < 1e-12
    oracle = Frame(gram_schmidt(m))
    assert gap(q, oracle) < 1e-12


def test_gap_directed_examples():
    assert gap_directed(line(1, 0), line(1, 0)) == pytest.approx(0.0, abs=1e-15)
    assert gap_directed(line(1, 0), line(0, 1)) == pytest.approx(1.0)
    assert gap_directed(line(1, 0), rotated_line(np.pi / 6)) == pytest.approx(0.5, abs=1e-15)


def test_gap_directed_of_empty_frame_is_zero():
    assert gap_directed(Frame.zero(2), line(1, 0)) == 0.0


def test_gap_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        gap(line(1, 0), line(1, 0, 0))


def test_gap_strict_inclusion_is_one():
    u = Frame(E[:, :1])
    v = Frame(E[:, :2])
    assert gap_directed(u, v) == pytest.approx(0.0, abs=1e-15)
    assert gap(u, v) == pytest.approx(1.0)


def test_gap_rotated_lines_both_ways():
    th = 0.3
    u, v = line(1, 0), rotated_line(th)
    assert gap(u, v) == pytest.approx(np.sin(th), abs=1e-15)
    assert gap_directed(v, u) == pytest.approx(np.sin(th), abs=1e-15)


def test_projection_bound_examples():
    pb = projection_bound(line(1, 0), line(1, 0))
    assert pb.sigma_min == pytest.approx(1.0) and pb.isomorphism
    pb = projection_bound(line(1, 0), rotated_line(np.pi / 3))
    assert pb.sigma_min == pytest.approx(0.5, abs=1e-15) and pb.isomorphism
    pb = projection_bound(line(1, 0), line(0, 1))
    assert not pb.injective and not pb.isomorphism


def test_projection_bound_against_sampled_sphere():
    rng = np.random.default_rng(3)
    u = random_frame(rng, 4, 2)
    v = random_frame(rng, 4, 2)
    d = gap_directed(u, v)
    a = np.sqrt(1 - d**2)
    coeff = rng.standard_normal((2, 10_000)) + 1j * rng.standard_normal((2, 10_000))
    coeff /= np.linalg.norm(coeff, axis=0)
    x = u.columns @ coeff
    sampled = np.min(np.linalg.norm(v.columns.conj().T @ x, axis=0))
    pb = projection_bound(u, v)
    assert pb.sigma_min >= a - 1e-10
    assert sampled >= pb.sigma_min - 1e-12
    assert sampled - pb.sigma_min < 1e-2  # the sampled minimum approaches the bound


def test_sum_and_intersection_examples():
    e1 = line(1, 0)
    assert subspace_sum(e1, e1).dim == 1
    assert subspace_intersection(e1, e1).dim == 1
    assert subspace_sum(e1, line(0, 1)).dim == 2
    assert subspace_intersection(e1, line(0, 1)).dim == 0
    tilt = rotated_line(0.01)
    assert subspace_intersection(e1, tilt, 1e-8).dim == 0
    assert subspace_sum(e1, tilt, 1e-8).dim == 2


def test_asymptotic_projection_defect_examples():
    th = 0.4
    u, v = line(1, 0), rotated_line(th)
    assert asymptotic_projection_defect(u, u) == pytest.approx(0.0, abs=1e-15)
    assert asymptotic_projection_defect(line(1, 0), line(0, 1)) == pytest.approx(1.0)
    # explicit 2x2 oracle: (I - P_U P_V) restricted to U = e1
    pu = np.diag([1.0, 0.0])
    vv = np.array([np.cos(th), np.sin(th)])
    m = np.eye(2) - pu @ np.outer(vv, vv)
    oracle = abs(m[0, 0])
    assert asymptotic_projection_defect(u, v) == pytest.approx(oracle, abs=1e-15)
    assert oracle == pytest.approx(np.sin(th) ** 2, abs=1e-15)


def test_principal_cosines_of_rotated_lines():
    assert principal_cosines(line(1, 0), rotated_line(0.2)) == pytest.approx([np.cos(0.2)], abs=1e-15)
    e = np.eye(3)
    cos = principal_cosines(Frame(e[:, :2]), Frame(e[:, 1:]))
    assert cos == pytest.approx([1.0, 0.0], abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(frame_pairs())
def test_gap_symmetric_and_bounded(pair):
    u, v = pair
    g = gap(u, v)
    assert g == pytest.approx(gap(v, u), abs=1e-14)
    assert -1e-15 <= g <= 1 + 1e-12
    assert gap_directed(u, v) <= g + 1e-14
    assert gap(u, u) < 1e-7


@settings(max_examples=60, deadline=None)
@given(frame_pairs(same_dim=True))
def test_directed_gap_symmetric_for_equal_dimensions(pair):
    u, v = pair
    d1, d2 = gap_directed(u, v), gap_directed(v, u)
    if max(d1, d2) < 1 - 1e-6:  # for δ̂ = 1 both sides are 1 up to rounding
        assert d1 == pytest.approx(d2, abs=1e-10)


@settings(max_examples=80, deadline=None)
@given(frame_pairs())
def test_projection_bound_lower_bound(pair):
    u, v = pair
    d = gap_directed(u, v)
    if d < 1:
        a = np.sqrt(max(0.0, 1 - d * d))
        assert projection_bound(u, v).sigma_min >= a - 1e-10


@settings(max_examples=60, deadline=None)
@given(frame_pairs())
def test_grassmann_dimension_identity(pair):
    u, v = pair
    cosines = principal_cosines(u, v)
    # only pairs whose principal angles are well separated from 0
    if np.any((cosines > 1 - 1e-3) & (cosines < 1 - 1e-12)):
        return
    total = subspace_sum(u, v).dim + subspace_intersection(u, v).dim
    assert total == u.dim + v.dim


def test_projection_defect_vanishes_along_converging_lines():
    rng = np.random.default_rng(5)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    values = []
    for r in range(1, 30):
        th = 1.0 / r
        u = Frame(q[:, :1])
        v = Frame(np.cos(th) * q[:, :1] + np.sin(th) * q[:, 1:2])
        s = asymptotic_projection_defect(u, v) + asymptotic_projection_defect(v, u)
        assert s == pytest.approx(2 * np.sin(th) ** 2, abs=1e-10)
        values.append(s)
    assert all(b < a for a, b in zip(values[:-1], values[1:]))
    assert values[-1] < 3e-3
