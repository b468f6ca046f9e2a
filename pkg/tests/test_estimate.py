import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hmmtails.errors import DegenerateOrderStats, NoSamples, ThinTail
from hmmtails.estimate import (
    empirical_tail,
    hill,
    k_constant_estimate,
    quantile_window,
    symmetry_check,
    tail_estimate,
)
from hmmtails.model import TwoSidedPareto

positive_samples = hnp.arrays(
    float, st.integers(50, 400), elements=st.floats(1e-3, 1e6, allow_subnormal=False)
)


def _pareto(alpha, q_plus, q_minus, n, seed, t0=1.0):
    return TwoSidedPareto(alpha, t0, q_plus, q_minus).sample(np.random.default_rng(seed), n)


# -- empirical tail -------------------------------------------------------

def test_empirical_tail_counting():
    x = [1.0, 3.0, 5.0]
    assert empirical_tail(x, 2.0, states=[0, 0, 0], state=0) == pytest.approx(2 / 3)
    assert empirical_tail(x, 10.0) == 0.0
    assert empirical_tail(x, 0.5, sign=-1) == 0.0


def test_empirical_tail_errors():
    with pytest.raises(NoSamples):
        empirical_tail([1.0, 2.0], 1.0, states=["a", "a"], state="b")
    with pytest.raises(ValueError):
        empirical_tail([1.0], 0.0)


@given(positive_samples, st.floats(1e-3, 1e6), st.floats(1.0, 100.0))
def test_empirical_tail_monotone(x, t, factor):
    assert empirical_tail(x, t * factor) <= empirical_tail(x, t)


# -- Hill -----------------------------------------------------------------

def test_hill_hand_example():
    est = hill([8.0, 4.0, 2.0, 1.0], k=3)
    assert est.alpha_hat == pytest.approx(3 / (6 * math.log(2)), rel=1e-14)
    assert est.std_err == pytest.approx(est.alpha_hat / math.sqrt(3), rel=1e-14)
    assert est.k == 3


def test_hill_exact_pareto():
    x = _pareto(2.0, 1.0, 0.0, 1_000_000, seed=17)
    est = hill(x, k=10_000)
    assert 1.9 <= est.alpha_hat <= 2.1


def test_hill_ties():
    with pytest.raises(DegenerateOrderStats):
        hill(np.full(100, 3.0))


def test_hill_bad_k():
    with pytest.raises(ValueError):
        hill([1.0, 2.0, 3.0], k=3)


def test_hill_default_k():
    x = _pareto(1.0, 1.0, 0.0, 8000, seed=1)
    assert hill(x).k == int(math.floor(8000 ** (2 / 3)))


@given(positive_samples, st.integers(-20, 20))
def test_hill_scale_invariant_powers_of_two(x, e):
    k = len(x) // 3
    try:
        base = hill(x, k).alpha_hat
    except DegenerateOrderStats:
        return
    assert hill(np.ldexp(x, e), k).alpha_hat == base


@given(positive_samples, st.floats(1e-3, 1e3))
def test_hill_scale_invariant(x, lam):
    k = len(x) // 3
    try:
        base = hill(x, k).alpha_hat
    except DegenerateOrderStats:
        return
    assert hill(lam * x, k).alpha_hat == pytest.approx(base, rel=1e-12)


# -- tail constants -------------------------------------------------------

def test_k_hat_exact_pareto():
    # P(R > t) = 2 t^-1.5 beyond the threshold
    law = TwoSidedPareto(1.5, 2.0 ** (1 / 1.5), 2.0, 0.0)
    x = law.sample(np.random.default_rng(5), 1_000_000)
    window = (2 * law.threshold, float(np.quantile(x, 0.999)))
    est = k_constant_estimate(x, 1.5, window)["all"]
    assert est.value == pytest.approx(2.0, rel=0.10)
    assert est.n == x.size and est.exceedances > 1000 and est.spread >= 0


def test_k_hat_per_state_keys():
    x = _pareto(1.0, 1.0, 0.0, 200_000, seed=6)
    states = np.where(np.arange(x.size) % 2 == 0, "a", "b")
    est = k_constant_estimate(x, 1.0, states=states, per_state=True)
    assert set(est) == {"a", "b"}
    assert est["a"].value == pytest.approx(1.0, rel=0.15)


def test_negative_side_of_positive_sample():
    x = _pareto(1.2, 1.0, 0.0, 200_000, seed=7)
    est = k_constant_estimate(x, 1.2, sign=-1)["all"]
    assert est.value == 0.0


def test_thin_tail():
    x = _pareto(1.0, 1.0, 0.0, 5_000, seed=8)
    with pytest.raises(ThinTail):
        k_constant_estimate(x, 1.0)
    with pytest.raises(ThinTail):
        k_constant_estimate(np.zeros(100_000), 1.0)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 20.0), st.floats(0.6, 2.5))
def test_k_hat_scale_equivariant(seed, lam, alpha):
    x = _pareto(1.3, 0.8, 0.4, 50_000, seed)
    window = quantile_window(x)
    base = k_constant_estimate(x, alpha, window)["all"].value
    scaled = k_constant_estimate(lam * x, alpha, (lam * window[0], lam * window[1]))["all"].value
    assert scaled == pytest.approx(lam**alpha * base, rel=1e-9)


def test_window_is_on_absolute_values():
    x = np.concatenate([-np.arange(1, 1001.0), np.arange(1, 1001.0)])
    lo, hi = quantile_window(x, (0.5, 0.9))
    assert lo == pytest.approx(np.quantile(np.abs(x), 0.5))
    assert hi == pytest.approx(np.quantile(np.abs(x), 0.9))


# -- symmetry -------------------------------------------------------------

def test_symmetry_one_sided():
    x = _pareto(1.0, 1.0, 0.0, 1_000_000, seed=9)
    chk = symmetry_check(x, 1.0)
    assert chk.k_minus == 0.0 and chk.z > 10


def test_symmetry_symmetric_input():
    x = _pareto(1.0, 0.5, 0.5, 1_000_000, seed=10)
    chk = symmetry_check(x, 1.0)
    assert abs(chk.z) < 4
    assert chk.k_plus == pytest.approx(0.5, rel=0.1)


def test_symmetry_exactly_mirrored():
    x = _pareto(1.0, 1.0, 0.0, 100_000, seed=11)
    chk = symmetry_check(np.concatenate([x, -x]), 1.0)
    assert abs(chk.z) < 1e-12 and chk.k_plus == chk.k_minus


# -- combined -------------------------------------------------------------

def test_tail_estimate_fields():
    x = _pareto(1.5, 1.0, 0.5, 400_000, seed=12)
    states = np.zeros(x.size, dtype=int)
    est = tail_estimate(x, states, alpha=1.5, per_state=True)
    assert est.t_window[0] < est.t_window[1]
    assert est.k_used < est.n_samples == x.size
    assert set(est.K_hat) == {(0, 1), (0, -1)}
    assert all(v.value >= 0 for v in est.K_hat.values())
    assert est.K_hat[(0, 1)].value == pytest.approx(1.0, rel=0.15)
    assert est.K_hat[(0, -1)].value == pytest.approx(0.5, rel=0.15)
    auto = tail_estimate(x)
    assert auto.alpha_used == auto.alpha_hat and ("all", 1) in auto.K_hat
