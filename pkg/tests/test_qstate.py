import numpy as np
import pytest
from hypothesis import given, strategies as st

from qid import qstate
from qid.errors import DimensionMismatch, DimensionOverflow, EffectOutOfRange, NotHermitian, NotPSD, TraceNotOne
from qid.qstate import (
    HermitianOperator,
    basis_state,
    born_probability,
    make_density,
    maximally_mixed,
    operator_leq,
    partial_trace,
    pure,
    spectrum,
    tensor,
    trace_distance,
)

from conftest import random_density

seeds = st.integers(0, 2**32 - 1)


def test_make_density_accepts_mixed_and_pure():
    assert make_density(np.eye(2) / 2).dim == 2
    r = make_density(np.diag([1.0, 0.0]))
    assert np.allclose(r.eigenvalues(), [0, 1]) or np.allclose(sorted(r.eigenvalues()), [0, 1])


def test_make_density_errors_name_the_invariant():
    with pytest.raises(TraceNotOne, match="1.2"):
        make_density(np.diag([0.6, 0.6]))
    with pytest.raises(NotHermitian):
        make_density(np.array([[0.5, 0.3], [0.0, 0.5]]))
    with pytest.raises(NotPSD):
        make_density(np.diag([1.5, -0.5]))


def test_state_is_read_only():
    r = maximally_mixed(2)
    with pytest.raises(ValueError):
        r.matrix[0, 0] = 1


def test_tensor_examples():
    t = tensor(basis_state(0, 2), basis_state(1, 2))
    expect = np.zeros((4, 4))
    expect[1, 1] = 1
    assert np.allclose(t.matrix, expect)
    assert np.allclose(tensor(maximally_mixed(2), maximally_mixed(2)).matrix, np.eye(4) / 4)


def test_tensor_cap():
    with pytest.raises(DimensionOverflow):
        tensor(maximally_mixed(4), maximally_mixed(4), cap=8)


def test_partial_trace_of_bell_state_is_mixed():
    phi = pure([1, 0, 0, 1])
    assert np.allclose(partial_trace(phi, (2, 2), "A").matrix, np.eye(2) / 2)
    assert np.allclose(partial_trace(phi, (2, 2), "B").matrix, np.eye(2) / 2)


def test_partial_trace_dim_mismatch():
    with pytest.raises(DimensionMismatch):
        partial_trace(maximally_mixed(4), (3, 2))


def _pt_loops(m, da, db, keep):
    # element-wise summation oracle
    if keep == "A":
        out = np.zeros((da, da), dtype=complex)
        for i in range(da):
            for k in range(da):
                out[i, k] = sum(m[i * db + j, k * db + j] for j in range(db))
    else:
        out = np.zeros((db, db), dtype=complex)
        for j in range(db):
            for l in range(db):
                out[j, l] = sum(m[i * db + j, i * db + l] for i in range(da))
    return out


@given(seeds, st.sampled_from([(2, 2), (2, 3), (3, 2)]), st.sampled_from(["A", "B"]))
def test_partial_trace_matches_loop_oracle(seed, dims, keep):
    m = random_density(np.random.default_rng(seed), dims[0] * dims[1])
    red = partial_trace(make_density(m), dims, keep)
    assert np.allclose(red.matrix, _pt_loops(m, *dims, keep), atol=1e-12)
    assert abs(np.trace(red.matrix) - 1) < 1e-10
    assert np.linalg.eigvalsh(red.matrix).min() >= -1e-10


@given(seeds)
def test_partial_trace_inverts_tensor(seed):
    rng = np.random.default_rng(seed)
    a, b = make_density(random_density(rng, 2)), make_density(random_density(rng, 3))
    ab = tensor(a, b)
    assert np.allclose(partial_trace(ab, (2, 3), "A").matrix, a.matrix, atol=1e-10)
    assert np.allclose(partial_trace(ab, (2, 3), "B").matrix, b.matrix, atol=1e-10)


def test_trace_distance_examples():
    assert trace_distance(basis_state(0, 2), basis_state(1, 2)) == pytest.approx(2)
    assert trace_distance(maximally_mixed(2), maximally_mixed(2)) == pytest.approx(0, abs=1e-15)
    assert trace_distance(basis_state(0, 2), maximally_mixed(2)) == pytest.approx(1)


@given(seeds)
def test_trace_distance_triangle(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (make_density(random_density(rng, 3)) for _ in range(3))
    assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-9
    assert trace_distance(a, b) == pytest.approx(trace_distance(b, a), abs=1e-12)


def test_born_probability_examples():
    rho = make_density(random_density(np.random.default_rng(0), 3))
    assert born_probability(HermitianOperator(np.eye(3)), rho) == pytest.approx(1)
    assert born_probability(HermitianOperator(np.diag([1.0, 0])), maximally_mixed(2)) == pytest.approx(0.5)
    proj = HermitianOperator(np.diag([1.0, 1, 0, 0, 1]))
    assert born_probability(proj, maximally_mixed(5)) == pytest.approx(3 / 5)


def test_born_probability_rejects_bad_effect():
    with pytest.raises(EffectOutOfRange):
        born_probability(HermitianOperator(2 * np.eye(2)), maximally_mixed(2))
    with pytest.raises(DimensionMismatch):
        born_probability(HermitianOperator(np.eye(3)), maximally_mixed(2))


@given(seeds, st.floats(0, 1))
def test_born_probability_linear_in_state(seed, alpha):
    rng = np.random.default_rng(seed)
    a, b = random_density(rng, 3), random_density(rng, 3)
    g = random_density(rng, 3)
    eff = HermitianOperator(g / np.linalg.eigvalsh(g).max())
    mix = make_density(alpha * a + (1 - alpha) * b)
    lhs = born_probability(eff, mix)
    rhs = alpha * born_probability(eff, make_density(a)) + (1 - alpha) * born_probability(eff, make_density(b))
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_operator_leq_examples():
    rho = random_density(np.random.default_rng(1), 3)
    assert operator_leq(np.zeros((3, 3)), rho)
    assert not operator_leq(np.eye(2), np.eye(2) / 2)
    assert operator_leq(rho, rho + 1e-12 * np.eye(3), tol=1e-10)
    assert operator_leq(np.array([0.1, 0.2]), np.array([0.1, 0.3]))
    with pytest.raises(DimensionMismatch):
        operator_leq(np.eye(2), np.eye(3))


@given(seeds)
def test_spectrum_reconstructs(seed):
    m = random_density(np.random.default_rng(seed), 4)
    s = spectrum(make_density(m))
    assert np.all(np.diff(s.eigenvalues) <= 1e-15)
    assert np.max(np.abs(s.reconstruct() - m)) <= 1e-9
    assert abs(s.eigenvalues.sum() - 1) < 1e-9 and s.eigenvalues.min() >= -1e-10


def test_dim_cap_constant():
    assert qstate.DIM_CAP == 2**16
