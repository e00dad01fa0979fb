from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from padic_kinetics.exceptions import UsageError
from padic_kinetics.padic import (
    BallSpec,
    RadialProfile,
    TreeAddress,
    WaveletIndex,
    ball_mask,
    ball_volume,
    basin_wavelets,
    eval_wavelet,
    leaf_address,
    leaf_index,
    padic_distance,
    radial_tail_integral,
    wavelet_values,
)

import oracles

PRIMES = st.sampled_from([2, 3, 5])


@st.composite
def leaf_triples(draw):
    p = draw(PRIMES)
    n = draw(st.integers(1, 5))
    digit = st.integers(0, p - 1)
    addr = st.lists(digit, min_size=n, max_size=n).map(lambda d: TreeAddress(0, tuple(d)))
    return p, draw(addr), draw(addr), draw(addr)


def test_distance_examples():
    assert padic_distance(TreeAddress(0, (1, 2, 0)), TreeAddress(0, (1, 0, 0)), 3) == Fraction(1, 3)
    assert padic_distance(TreeAddress(0, (0, 1)), TreeAddress(0, (1, 1)), 2) == 1
    assert padic_distance(TreeAddress(0, (2, 2)), TreeAddress(0, (2, 2)), 3) == 0


def test_distance_rejects_mixed_basins_and_depths():
    with pytest.raises(UsageError):
        padic_distance(TreeAddress(0, (1,)), TreeAddress(1, (1,)), 2)
    with pytest.raises(UsageError):
        padic_distance(TreeAddress(0, (1,)), TreeAddress(0, (1, 0)), 2)


@given(leaf_triples())
def test_strong_triangle_inequality(case):
    p, x, y, z = case
    assert padic_distance(x, z, p) <= max(padic_distance(x, y, p), padic_distance(y, z, p))


@given(leaf_triples())
def test_distance_symmetric_and_matches_prefix_rule(case):
    p, x, y, _ = case
    d = padic_distance(x, y, p)
    assert d == padic_distance(y, x, p)
    k = oracles.prefix(x.digits, y.digits)
    assert d == (0 if k == x.depth else Fraction(1, p**k))


@pytest.mark.parametrize("p,r", [(2, 0), (2, -3), (3, -1), (5, -2)])
def test_ball_volume(p, r):
    ball = BallSpec(0, (0,) * (-r), r)
    assert ball_volume(ball, p) == oracles.exact_ball_volume(p, r)
    # on a deep enough tree the leaf count agrees
    n = -r + 2
    assert ball_mask(ball, p, n, 1).sum() * Fraction(1, p**n) == ball_volume(ball, p)


def test_ball_validation():
    with pytest.raises(UsageError):
        BallSpec(0, (1,), -2)
    with pytest.raises(UsageError):
        BallSpec(0, (), 1)
    with pytest.raises(UsageError):
        ball_mask(BallSpec(0, (1, 1), -2), 3, 1, 1)


def test_leaf_index_roundtrip():
    for i in range(2 * 27):
        assert leaf_index(leaf_address(i, 3, 3), 3) == i


@pytest.mark.parametrize("p,n", [(2, 3), (3, 2), (3, 3), (5, 2)])
def test_wavelets_orthonormal_and_zero_mean(p, n):
    waves = list(basin_wavelets(p, n, 0))
    assert len(waves) == p**n - 1
    V = np.array([wavelet_values(w, p, n, 1) for w in waves])
    gram = V.conj() @ V.T * p ** (-n)
    assert np.allclose(gram, np.eye(len(waves)), atol=1e-12)
    assert np.allclose(V.sum(axis=1), 0.0, atol=1e-12)


@given(
    p=st.sampled_from([2, 3]),
    n=st.integers(1, 3),
    data=st.data(),
)
@settings(max_examples=40)
def test_eval_wavelet_matches_oracle(p, n, data):
    d = data.draw(st.integers(0, n - 1))
    j = data.draw(st.integers(1, p - 1))
    offset = tuple(data.draw(st.lists(st.integers(0, p - 1), min_size=d, max_size=d)))
    x = tuple(data.draw(st.lists(st.integers(0, p - 1), min_size=n, max_size=n)))
    w = WaveletIndex(0, -d, j, offset)
    got = eval_wavelet(w, TreeAddress(0, x), p)
    assert abs(got - oracles.kozyrev(p, -d, j, offset, x)) < 1e-12
    assert abs(got - wavelet_values(w, p, n, 1)[leaf_index(TreeAddress(0, x), p)]) < 1e-12


def test_wavelet_needs_resolving_depth():
    with pytest.raises(UsageError):
        eval_wavelet(WaveletIndex(0, -1, 1, (0,)), TreeAddress(0, (0,)), 3)
    with pytest.raises(UsageError):
        eval_wavelet(WaveletIndex(0, 0, 3, ()), TreeAddress(0, (0,)), 3)
    with pytest.raises(UsageError):
        WaveletIndex(0, -1, 1, ())


def test_radial_profile_tail_rules():
    prof = RadialProfile(3, [6.0, 3.0])
    assert prof.value(5, 0.0) == 3.0
    assert RadialProfile(3, [6.0, 3.0], tail="zero").value(4, 1.0) == 0.0
    with pytest.raises(UsageError):
        RadialProfile(3, [6.0], tail="strict").value(1, 0.0)
    with pytest.raises(UsageError):
        RadialProfile(4, [1.0])


def test_radial_tail_integral_is_shell_weighted_sum():
    prof = RadialProfile(3, [6.0, 3.0])
    # (1 - 1/3) 6 + (1/3 - 1/9) 3
    assert radial_tail_integral(prof, 1, 0.0) == pytest.approx(4.0 + 2.0 / 3.0, rel=1e-14)
