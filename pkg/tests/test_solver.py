import math

import numpy as np
import pytest

from vldht.errors import DomainError
from vldht.info import JointSource, binary_entropy, dsbs, entropy, mutual_information
from vldht.solver import (Dmc, ExponentQuery, binary_example_exponent, blahut_arimoto, capacity,
                          gaussian_example_exponent, solve_dmc_exponent, solve_fl_exponent,
                          solve_vl_exponent)


def random_source(rng, shape=(3, 3)):
    return JointSource(rng.dirichlet(np.ones(shape[0] * shape[1])).reshape(shape))


# -- query and result contracts -------------------------------------------

def test_query_defaults_and_validation():
    q = ExponentQuery(dsbs(0.1), 0.5, 0.2)
    assert q.u_size == 3
    assert q.budget == pytest.approx(0.5 / 0.8)
    with pytest.raises(DomainError):
        ExponentQuery(dsbs(0.1), -0.1, 0.0)
    with pytest.raises(DomainError):
        ExponentQuery(dsbs(0.1), 0.5, 1.0)
    with pytest.raises(DomainError):
        ExponentQuery(dsbs(0.1), 0.5, 0.0, u_cardinality=0)


def test_result_invariants():
    rng = np.random.default_rng(0)
    for _ in range(5):
        src = random_source(rng)
        r, eps = float(rng.uniform(0.1, 1.0)), 0.25
        res = solve_vl_exponent(src, r, eps)
        assert res.theta == pytest.approx(res.iuy, abs=1e-9)
        assert (1 - eps) * res.iux <= r + 1e-6
        # recompute the measures from the returned channel
        assert mutual_information(res.optimizer.joint_uy(src)) == pytest.approx(res.iuy, abs=1e-9)
        assert mutual_information(res.optimizer.joint_ux(src)) == pytest.approx(res.iux, abs=1e-9)


# -- examples --------------------------------------------------------------

def test_epsilon_zero_is_fixed_length():
    src = random_source(np.random.default_rng(1))
    a = solve_vl_exponent(src, 0.4, 0.0).theta
    b = solve_fl_exponent(src, 0.4).theta
    assert a == b


def test_full_rate_gives_ixy():
    src = random_source(np.random.default_rng(2))
    eps = 0.1
    r = (1 - eps) * entropy(src.x_marginal)
    assert solve_vl_exponent(src, r, eps).theta == pytest.approx(mutual_information(src), abs=1e-12)


def test_zero_rate_gives_zero():
    assert solve_fl_exponent(dsbs(0.2), 0.0).theta == 0.0
    assert solve_vl_exponent(random_source(np.random.default_rng(3)), 0.0, 0.3).theta == 0.0


def test_dsbs_matches_closed_form():
    assert solve_vl_exponent(dsbs(0.1), 0.8, 0.1).theta == pytest.approx(
        binary_example_exponent(0.1, 0.8, 0.1), abs=2e-3)
    assert solve_fl_exponent(dsbs(0.2), 0.5).theta == pytest.approx(
        binary_example_exponent(0.2, 0.5, 0.0), abs=2e-3)


def test_monotone_in_rate_and_epsilon():
    src = random_source(np.random.default_rng(4))
    rates = [0.1, 0.3, 0.5, 0.7]
    for eps in (0.0, 0.2):
        th = [solve_vl_exponent(src, r, eps).theta for r in rates]
        assert all(b >= a - 1e-6 for a, b in zip(th, th[1:]))
    th = [solve_vl_exponent(src, 0.3, e).theta for e in (0.0, 0.1, 0.3, 0.5)]
    assert all(b >= a - 1e-6 for a, b in zip(th, th[1:]))


def test_dominance_over_fixed_length():
    rng = np.random.default_rng(5)
    for _ in range(4):
        src = random_source(rng)
        fl = solve_fl_exponent(src, 0.3).theta
        for eps in (0.1, 0.4):
            assert solve_vl_exponent(src, 0.3, eps).theta >= fl - 1e-9


def test_deterministic_given_seed():
    src = random_source(np.random.default_rng(6))
    a = solve_vl_exponent(src, 0.4, 0.1, seed=3)
    b = solve_vl_exponent(src, 0.4, 0.1, seed=3)
    assert a.theta == b.theta
    np.testing.assert_array_equal(a.optimizer.rows, b.optimizer.rows)


# -- closed forms ----------------------------------------------------------

def test_binary_closed_form_examples():
    assert binary_example_exponent(0.0, 0.45, 0.1) == pytest.approx(0.5, abs=1e-9)
    assert binary_example_exponent(0.499999, 0.5, 0.1) < 1e-9
    # saturation once R/(1-eps) exceeds 1
    assert binary_example_exponent(0.1, 0.95, 0.1) == pytest.approx(1 - binary_entropy(0.1), abs=1e-12)
    with pytest.raises(DomainError):
        binary_example_exponent(0.5, 0.5, 0.1)


def test_gaussian_closed_form_examples():
    assert gaussian_example_exponent(0.0, 0.7, 0.2) == 0.0
    assert gaussian_example_exponent(1.0, 0.9, 0.1) == pytest.approx(1.0, abs=1e-12)
    v = gaussian_example_exponent(0.8, 0.8, 0.1)
    # hand arithmetic: 1 - 0.64 + 0.64 * 2^(-16/9)
    assert v == pytest.approx(0.5 * math.log2(1 / (0.36 + 0.64 * 2 ** (-16 / 9))), abs=1e-15)
    with pytest.raises(DomainError):
        gaussian_example_exponent(1.2, 0.5, 0.1)


# -- capacity and the channel exponent ------------------------------------

def test_capacity_examples():
    assert capacity(Dmc.identity(5)) == pytest.approx(math.log2(5), abs=1e-9)
    assert capacity(Dmc.bsc(0.1)) == pytest.approx(1 - binary_entropy(0.1), abs=1e-9)
    assert capacity(Dmc.bec(0.3)) == pytest.approx(0.7, abs=1e-9)


def test_blahut_arimoto_input_law():
    _, p = blahut_arimoto(Dmc.bsc(0.2).transition)
    np.testing.assert_allclose(p, [0.5, 0.5], atol=1e-6)
    # Z channel: capacity-achieving input is not uniform
    z = [[1.0, 0.0], [0.5, 0.5]]
    cz = capacity(z)
    assert cz == pytest.approx(math.log2(1.25), abs=1e-9)


def test_dmc_noiseless_reduction():
    src = random_source(np.random.default_rng(7))
    a = solve_dmc_exponent(src, Dmc.identity(2), 0.6, 0.2).theta
    b = solve_vl_exponent(src, 0.6, 0.2).theta
    assert a == pytest.approx(b, abs=1e-9)


def test_dmc_bsc_example():
    c = 1 - binary_entropy(0.1)
    th = solve_dmc_exponent(dsbs(0.1), Dmc.bsc(0.1), 1.0, 0.1).theta
    assert th == pytest.approx(binary_example_exponent(0.1, c, 0.1), abs=2e-3)


def test_dmc_rejects_bad_kappa():
    with pytest.raises(DomainError):
        solve_dmc_exponent(dsbs(0.1), Dmc.bsc(0.1), 0.0, 0.1)
