import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qid.channels import CqChannel, erasure_bc, marginal
from qid.entropic import (
    InputDistribution,
    binary_entropy,
    holevo_information,
    mutual_information_cq,
    thermal_entropy_g,
    von_neumann_entropy,
)
from qid.errors import NegativeInput, ParamOutOfRange, SizeMismatch
from qid.qstate import basis_state, diagonal_state, make_density, maximally_mixed, pure, tensor

from conftest import random_density

seeds = st.integers(0, 2**32 - 1)


def _h(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def test_von_neumann_examples():
    assert von_neumann_entropy(pure([1, 1j])) == pytest.approx(0, abs=1e-12)
    assert von_neumann_entropy(maximally_mixed(2)) == pytest.approx(1)
    assert von_neumann_entropy(diagonal_state([0.7, 0.3])) == pytest.approx(0.881291, abs=1e-6)
    assert von_neumann_entropy(diagonal_state([0.7, 0.3])) == pytest.approx(_h(0.3), abs=1e-12)


@given(seeds)
def test_entropy_bounds_and_additivity(seed):
    rng = np.random.default_rng(seed)
    a, b = make_density(random_density(rng, 2)), make_density(random_density(rng, 3))
    ha, hb = von_neumann_entropy(a), von_neumann_entropy(b)
    assert 0 <= ha <= 1 + 1e-12
    assert von_neumann_entropy(tensor(a, b)) == pytest.approx(ha + hb, abs=1e-9)


def test_holevo_examples():
    orth = CqChannel((basis_state(0, 2), basis_state(1, 2)))
    assert holevo_information([0.5, 0.5], orth) == pytest.approx(1)
    same = CqChannel((maximally_mixed(2), maximally_mixed(2)))
    assert holevo_information([0.3, 0.7], same) == pytest.approx(0, abs=1e-12)
    assert holevo_information([0.5, 0.5], marginal(erasure_bc(0.3), 1)) == pytest.approx(0.7, abs=1e-12)


def test_holevo_size_mismatch():
    with pytest.raises(SizeMismatch):
        holevo_information([1.0], CqChannel((basis_state(0, 2), basis_state(1, 2))))


def test_input_distribution_validation():
    with pytest.raises(ParamOutOfRange):
        InputDistribution([0.5, 0.6])
    with pytest.raises(ParamOutOfRange):
        InputDistribution([1.2, -0.2])
    assert np.allclose(InputDistribution.uniform(4).pmf, 0.25)


def _random_channel(rng, k=3, d=2):
    return CqChannel(tuple(make_density(random_density(rng, d)) for _ in range(k)))


@given(seeds)
def test_mutual_information_agrees_with_holevo(seed):
    rng = np.random.default_rng(seed)
    ch = _random_channel(rng)
    p = rng.dirichlet(np.ones(3))
    assert mutual_information_cq(p, ch) == pytest.approx(holevo_information(p, ch), abs=1e-9)


def test_mutual_information_examples():
    orth = CqChannel((basis_state(0, 2), basis_state(1, 2)))
    assert mutual_information_cq([0.5, 0.5], orth) == pytest.approx(1)
    assert mutual_information_cq([1.0, 0.0], orth) == pytest.approx(0, abs=1e-12)


@given(seeds, st.floats(0, 1))
def test_holevo_concave(seed, alpha):
    rng = np.random.default_rng(seed)
    ch = _random_channel(rng)
    p, q = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
    mix = alpha * p + (1 - alpha) * q
    mix = mix / mix.sum()
    lhs = holevo_information(mix, ch)
    assert lhs >= alpha * holevo_information(p, ch) + (1 - alpha) * holevo_information(q, ch) - 1e-9


def test_g_values():
    assert thermal_entropy_g(0) == 0
    assert thermal_entropy_g(8) == pytest.approx(4.529325, abs=1e-6)
    assert thermal_entropy_g(2) == pytest.approx(2.754888, abs=1e-6)
    # independent form: g(x) = log2(x+1) + x log2(1 + 1/x)
    for x in (0.3, 1.0, 8.0, 50.0):
        assert thermal_entropy_g(x) == pytest.approx(math.log2(x + 1) + x * math.log2(1 + 1 / x), rel=1e-12)
    with pytest.raises(NegativeInput):
        thermal_entropy_g(-1)


@given(st.floats(0, 1e3), st.floats(0, 1e3))
def test_g_monotone_and_above_log(x, y):
    lo, hi = sorted((x, y))
    assert thermal_entropy_g(lo) <= thermal_entropy_g(hi) + 1e-12
    assert thermal_entropy_g(x) >= math.log2(x + 1) - 1e-12


def test_g_concave_and_asymptote():
    xs = np.linspace(0, 20, 41)
    g = np.array([thermal_entropy_g(x) for x in xs])
    assert np.all(np.diff(g, 2) <= 1e-12)
    assert thermal_entropy_g(1e3) - math.log2(1e3 + 1) == pytest.approx(math.log2(math.e), abs=0.01)


def test_binary_entropy_symmetric():
    assert binary_entropy(0.11) == pytest.approx(binary_entropy(0.89))
    assert binary_entropy(0.0) == 0
