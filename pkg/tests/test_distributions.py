import numpy as np
import pytest
from fractions import Fraction

from auction_dynamics import BidGrid, DiscreteDistribution, PreconditionError, is_regular, myerson_reserve, virtual_values
from auction_dynamics.distributions import UndefinedVirtualValue, distribution_from_spec


def exact_phi(pmf, delta):
    """Virtual values in rational arithmetic."""
    pmf = [Fraction(p).limit_denominator(10 ** 9) for p in pmf]
    out = {}
    for k, p in enumerate(pmf):
        if p > 0:
            out[k] = Fraction(k, delta) - Fraction(1, delta) * sum(pmf[k + 1:]) / p
    return out


def test_uniform_phi_is_two_v_minus_one(g10):
    vv = virtual_values(DiscreteDistribution.uniform(g10))
    assert vv.phi == pytest.approx(2 * g10.values - 1, abs=1e-12)
    assert vv[3] == pytest.approx(-0.4, abs=1e-12)
    assert vv[10] == 1.0


@pytest.mark.parametrize("k", [0, 3, 10])
def test_point_mass(g10, k):
    f = DiscreteDistribution.point_mass(g10, k)
    vv = virtual_values(f)
    assert vv[k] == pytest.approx(k / 10)
    with pytest.raises(UndefinedVirtualValue):
        vv[(k + 1) % 11]
    assert is_regular(f)
    assert myerson_reserve(f) == k


def test_reserve_examples():
    assert myerson_reserve(DiscreteDistribution.uniform(BidGrid(10))) == 5
    assert myerson_reserve(DiscreteDistribution.uniform(BidGrid(4))) == 2


def test_skewed_pmf_by_brute_force(g10):
    w = np.zeros(11)
    w[0], w[1], w[10] = 0.9, 0.05, 0.05
    f = DiscreteDistribution.from_weights(g10, w)
    ref = exact_phi(f.pmf, 10)
    vv = virtual_values(f)
    for k, phi in ref.items():
        assert vv[k] == pytest.approx(float(phi), abs=1e-12)
    defined = [float(ref[k]) for k in sorted(ref)]
    expected_regular = all(b >= a for a, b in zip(defined, defined[1:]))
    assert is_regular(f) == expected_regular
    if not expected_regular:
        with pytest.raises(PreconditionError):
            myerson_reserve(f)


def test_irregular_rejected(g10):
    w = np.ones(11)
    w[5] = 40
    f = DiscreteDistribution.from_weights(g10, w)
    assert not is_regular(f)
    with pytest.raises(PreconditionError):
        myerson_reserve(f)


def test_random_pmfs_match_rational_oracle():
    rng = np.random.default_rng(1)
    for _ in range(30):
        delta = int(rng.integers(1, 12))
        g = BidGrid(delta)
        w = rng.random(delta + 1) * (rng.random(delta + 1) > 0.2)
        if w.sum() == 0:
            continue
        f = DiscreteDistribution.from_weights(g, w)
        ref = exact_phi(f.pmf, delta)
        vv = virtual_values(f)
        assert set(np.flatnonzero(vv.defined)) == set(ref)
        for k, phi in ref.items():
            assert vv[k] == pytest.approx(float(phi), abs=1e-9)


def test_pmf_validation(g10):
    with pytest.raises(ValueError):
        DiscreteDistribution(g10, np.ones(11))
    with pytest.raises(ValueError):
        DiscreteDistribution.from_weights(g10, np.zeros(11))
    with pytest.raises(ValueError):
        DiscreteDistribution.from_weights(g10, np.ones(5))


def test_spec_and_sampling(g10):
    f = distribution_from_spec({"kind": "uniform"}, g10)
    s = f.sample(20000, np.random.default_rng(0))
    assert s.min() == 0 and s.max() == 10
    assert np.bincount(s, minlength=11) / 20000 == pytest.approx(np.full(11, 1 / 11), abs=0.01)
