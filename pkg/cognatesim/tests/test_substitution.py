import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.linalg import expm

from cognatesim.substitution import (
    ModelKind,
    RateConfig,
    check_rate_matrix,
    covarion_evolve,
    covarion_rate_matrix,
    draw_hidden_states,
    evolve_branch,
    gtr_evolve_events,
    gtr_evolve_matrix,
    gtr_rate_matrix,
    sd_evolve,
    sd_stationary_sequence,
    simulate_sites,
    transition_matrix,
)
from cognatesim.traits import (
    INVARIANT,
    VARIANT,
    EventLog,
    MissingDataError,
    TraitRegistry,
    TraitSequence,
)
from cognatesim.tree import INFINITE_DISTANCE


def test_rate_config_constructors():
    cfg = RateConfig.gtr(0.5, borrow_rate=0.1, local_z=0)
    assert cfg.model is ModelKind.GTR
    assert cfg.q01 == cfg.q10 == cfg.mu == 0.5
    assert cfg.local_z == INFINITE_DISTANCE
    assert not cfg.is_local
    assert RateConfig.gtr(0.5, local_z=100).is_local
    sd = RateConfig.stochastic_dollo(0.5, 0.25)
    assert sd.model is ModelKind.SD
    assert sd.mu == 0.25
    cov = RateConfig.covarion(0.5, 0.5, 0.2, 0.5)
    assert cov.rate_matrix().shape == (4, 4)
    assert RateConfig("gtr", q01=1, q10=1).model is ModelKind.GTR


@pytest.mark.parametrize(
    ("value", "expected"),
    [
        (None, None),
        (False, None),
        ("false", None),
        (True, "language"),
        ("true", "language"),
        ("meaningClass", "meaning_class"),
        ("meaning_class", "meaning_class"),
    ],
)
def test_rate_config_no_empty_aliases(value, expected):
    assert RateConfig.gtr(0.5, no_empty_trait=value).no_empty_trait == expected


@pytest.mark.parametrize(
    ("kwargs", "match"),
    [
        ({"model": "bogus"}, "Unknown model"),
        ({"q01": -1}, "non-negative"),
        ({"borrow_rate": -0.5}, "non-negative"),
        ({"no_empty_trait": "sometimes"}, "no_empty_trait"),
        ({"method": "fast"}, "method"),
    ],
)
def test_rate_config_errors(kwargs, match):
    with pytest.raises(ValueError, match=match):
        RateConfig(**kwargs)


def test_rate_config_gtr_arguments():
    with pytest.raises(ValueError, match="not both"):
        RateConfig.gtr(0.5, q01=0.1)
    with pytest.raises(ValueError, match="requires"):
        RateConfig.gtr(q01=0.1)
    with pytest.raises(ValueError, match="symmetric"):
        _ = RateConfig.gtr(q01=0.1, q10=0.2).mu
    with pytest.raises(ValueError, match="finite rate matrix"):
        RateConfig.stochastic_dollo(1, 1).rate_matrix()


def test_check_rate_matrix():
    assert_array_equal(check_rate_matrix([[-1, 1], [2, -2]]), [[-1, 1], [2, -2]])
    with pytest.raises(ValueError, match="square"):
        check_rate_matrix([[0, 0, 0]])
    with pytest.raises(ValueError, match="negative"):
        check_rate_matrix([[1, -1], [0, 0]])
    with pytest.raises(ValueError, match="sum to zero"):
        check_rate_matrix([[-1, 2], [1, -1]])
    with pytest.raises(ValueError, match="non-negative"):
        gtr_rate_matrix(-1, 0)


@pytest.mark.parametrize("t", [0.0, 0.01, 1.0, 7.5, 100.0])
@pytest.mark.parametrize(("q01", "q10"), [(0.5, 0.5), (0.1, 0.3), (0.0, 0.2)])
def test_transition_matrix_two_state(q01, q10, t):
    Q = gtr_rate_matrix(q01, q10)
    P = transition_matrix(Q, t)
    assert_allclose(P, expm(Q * t), atol=1e-12)
    assert_allclose(P.sum(axis=1), 1)


@pytest.mark.parametrize("t", [0.5, 3.0, 50.0])
def test_transition_matrix_covarion(t):
    Q = covarion_rate_matrix(0.5, 0.3, 0.2, 0.5)
    P = transition_matrix(Q, t)
    assert_allclose(P, expm(Q * t), atol=1e-10)
    assert_allclose(P.sum(axis=1), 1)
    assert (P >= 0).all()


def test_transition_matrix_stationary_limit():
    P = transition_matrix(gtr_rate_matrix(0.1, 0.3), 1000)
    assert_allclose(P, [[0.75, 0.25], [0.75, 0.25]])
    with pytest.raises(ValueError, match="t must be non-negative"):
        transition_matrix(gtr_rate_matrix(0.1, 0.3), -1)


def test_simulate_sites_records_jumps():
    rng = np.random.default_rng(0)
    Q = gtr_rate_matrix(0.5, 0.5)
    final, times, sites, old, new = simulate_sites(np.zeros(50), Q, 10.0, rng)
    assert len(times) > 0
    assert (np.diff(times) >= 0).all()
    assert (times < 10.0).all()
    assert (old != new).all()
    replay = np.zeros(50, dtype=int)
    for site, state in zip(sites, new):
        replay[site] = state
    assert_array_equal(replay, final)
    final, times, *_ = simulate_sites(np.zeros(5), Q, 10.0, rng, record=False)
    assert len(times) == 0


def test_simulate_sites_absorbing_state():
    Q = gtr_rate_matrix(0.0, 1.0)
    final, times, *_ = simulate_sites(np.ones(10), Q, 100.0, np.random.default_rng(1))
    assert_array_equal(final, 0)
    assert len(times) == 10


@pytest.mark.parametrize("kernel", ["matrix", "events"])
@pytest.mark.parametrize("T", [1.0, 100.0])
def test_gtr_kernels_match_transition_probability(kernel, T):
    rng = np.random.default_rng(42)
    Q = gtr_rate_matrix(0.5, 0.5)
    n = 20000
    seq = TraitSequence(np.ones(n, dtype=np.int8))
    if kernel == "matrix":
        gtr_evolve_matrix(seq, Q, T, rng)
    else:
        gtr_evolve_events(seq, Q, T, rng)
    expected = transition_matrix(Q, T)[1, 1]
    assert seq.alive_count / n == pytest.approx(expected, abs=0.015)
    seq.audit()


def test_gtr_asymmetric_stationary():
    rng = np.random.default_rng(3)
    seq = TraitSequence(np.zeros(20000, dtype=np.int8))
    gtr_evolve_events(seq, gtr_rate_matrix(0.1, 0.3), 200.0, rng)
    assert seq.alive_count / len(seq) == pytest.approx(0.25, abs=0.015)


def test_gtr_events_log_replays_to_final_state():
    rng = np.random.default_rng(5)
    start = TraitSequence("0101010101" * 3)
    seq = start.copy()
    log = EventLog()
    gtr_evolve_events(seq, gtr_rate_matrix(0.5, 0.5), 4.0, rng, log, language=7)
    assert len(log) > 0
    assert log.is_time_ordered()
    ages = [event.age for event in log]
    assert min(ages) > 0
    assert max(ages) <= 4.0
    assert {event.language for event in log} == {7}
    assert log.replay(start, 7) == seq


def test_gtr_kernels_zero_time_and_empty():
    Q = gtr_rate_matrix(0.5, 0.5)
    seq = TraitSequence("0110")
    assert str(gtr_evolve_matrix(seq, Q, 0.0, 0)) == "0110"
    assert str(gtr_evolve_events(seq, Q, 0.0, 0)) == "0110"
    assert len(gtr_evolve_events(TraitSequence(), Q, 5.0, 0)) == 0


def test_kernels_reject_missing_data():
    seq = TraitSequence("0?1")
    Q = gtr_rate_matrix(0.5, 0.5)
    with pytest.raises(MissingDataError):
        gtr_evolve_matrix(seq, Q, 1.0)
    with pytest.raises(MissingDataError):
        gtr_evolve_events(seq, Q, 1.0)
    with pytest.raises(MissingDataError):
        sd_evolve(seq, 1.0, 1.0, 1.0)


def test_covarion_rate_matrix_is_valid():
    Q = covarion_rate_matrix(0.5, 0.3, 0.2, 0.5)
    check_rate_matrix(Q)
    # invariant states never change their observable value
    assert Q[2, 3] == Q[3, 2] == 0
    with pytest.raises(ValueError, match="kappa"):
        covarion_rate_matrix(0.5, 0.5, 0.2, -1)


def test_draw_hidden_states():
    rng = np.random.default_rng(0)
    hidden = draw_hidden_states(30000, 0.5, rng)
    assert np.mean(hidden == VARIANT) == pytest.approx(1 / 3, abs=0.015)
    assert_array_equal(draw_hidden_states(10, math.inf, rng), VARIANT)


def test_covarion_invariant_sites_are_frozen():
    cfg = RateConfig.covarion(0.5, 0.5, 0.2, 0.0)
    seq = TraitSequence("0110", hidden=[INVARIANT] * 4)
    covarion_evolve(seq, cfg, 50.0, np.random.default_rng(0))
    assert str(seq) == "0110"
    assert seq.hidden.tolist() == [INVARIANT] * 4


def test_covarion_requires_hidden_states():
    with pytest.raises(ValueError, match="hidden states"):
        covarion_evolve(TraitSequence("01"), RateConfig.covarion(1, 1, 1, 1), 1.0)


@pytest.mark.parametrize("method", ["matrix", "events"])
def test_covarion_hidden_stationary(method):
    rng = np.random.default_rng(11)
    cfg = RateConfig.covarion(0.5, 0.5, 0.2, 0.5, method=method)
    n = 20000
    seq = TraitSequence(np.ones(n, dtype=np.int8), hidden=np.zeros(n, dtype=np.int8))
    covarion_evolve(seq, cfg, 100.0, rng)
    assert np.mean(seq.hidden == VARIANT) == pytest.approx(1 / 3, abs=0.015)
    assert seq.alive_count / n == pytest.approx(0.5, abs=0.015)


def test_covarion_events_log_hidden_switches():
    cfg = RateConfig.covarion(0.5, 0.5, 0.5, 1.0, method="events")
    seq = TraitSequence("01" * 20, hidden=[VARIANT] * 40)
    log = EventLog()
    covarion_evolve(seq, cfg, 10.0, np.random.default_rng(2), log)
    counts = log.counts()
    assert counts["hidden-switch"] > 0
    assert counts["mutation01"] + counts["mutation10"] > 0


def test_sd_evolve_death_only():
    seq = sd_evolve(TraitSequence("11111"), 0.0, 1.0, 100.0, rng=0)
    assert seq.alive_count == 0
    assert len(seq) == 5


def test_sd_evolve_births_allocate_columns():
    registry = TraitRegistry.from_root(2)
    seq = TraitSequence("00")
    log = EventLog()
    sd_evolve(seq, 2.0, 0.0, 5.0, np.random.default_rng(0), registry, log)
    births = log.counts()["birth"]
    assert births > 0
    assert len(seq) == registry.n_columns == 2 + births
    assert seq.alive_count == births
    assert log.is_time_ordered()


def test_sd_evolve_stationary_mean():
    rng = np.random.default_rng(8)
    counts = []
    for _ in range(2000):
        seq = sd_stationary_sequence(0.5, 0.5, rng)
        counts.append(sd_evolve(seq, 0.5, 0.5, 10.0, rng).alive_count)
    assert np.mean(counts) == pytest.approx(1.0, abs=0.1)
    assert np.var(counts) == pytest.approx(1.0, abs=0.15)


def test_sd_stationary_sequence():
    seq = sd_stationary_sequence(2.0, 0.5, 0)
    assert seq.alive_count == len(seq)
    with pytest.raises(ValueError, match="death_rate"):
        sd_stationary_sequence(1.0, 0.0)


def test_sd_evolve_no_empty_language():
    log = EventLog()
    seq = sd_evolve(
        TraitSequence("111"),
        0.0,
        1.0,
        100.0,
        np.random.default_rng(0),
        log=log,
        no_empty_trait="language",
    )
    assert seq.alive_count == 1
    assert log.counts()["death"] == 2
    assert log.counts()["veto"] > 0


def test_sd_evolve_no_empty_meaning_class():
    registry = TraitRegistry.from_root(4, [0, 0, 1, 1])
    seq = sd_evolve(
        TraitSequence("1111"),
        0.0,
        1.0,
        100.0,
        np.random.default_rng(0),
        registry=registry,
        no_empty_trait="meaning_class",
    )
    states = seq.states.tolist()
    assert sum(states[:2]) == 1
    assert sum(states[2:]) == 1


@pytest.mark.parametrize(
    "config",
    [
        RateConfig.gtr(0.5),
        RateConfig.gtr(0.5, method="events"),
        RateConfig.stochastic_dollo(0.5, 0.5),
    ],
)
def test_evolve_branch_dispatch(config):
    seq = TraitSequence("1" * 10)
    out = evolve_branch(seq, config, 2.0, np.random.default_rng(0), log=EventLog())
    assert out is seq
    seq.audit()


def test_evolve_branch_covarion():
    cfg = RateConfig.covarion(0.5, 0.5, 0.2, 0.5)
    seq = TraitSequence("1" * 10, hidden=[VARIANT] * 10)
    assert evolve_branch(seq, cfg, 2.0, 0) is seq


@pytest.mark.parametrize(
    "Q",
    [
        gtr_rate_matrix(0.5, 0.5),
        gtr_rate_matrix(0.1, 0.7),
        covarion_rate_matrix(0.5, 0.5, 0.1, 2.0),
        covarion_rate_matrix(0.2, 0.6, 1.5, 0.3),
    ],
)
@pytest.mark.parametrize(("s", "t"), [(0.3, 1.1), (2.0, 0.0), (5.0, 7.5)])
def test_transition_matrix_chapman_kolmogorov(Q, s, t):
    assert_allclose(
        transition_matrix(Q, s + t),
        transition_matrix(Q, s) @ transition_matrix(Q, t),
        atol=1e-12,
    )


def test_sd_evolve_jump_probabilities():
    birth_rate, death_rate = 0.6, 0.4
    rng = np.random.default_rng(11)
    births = {}
    totals = {}
    for _ in range(400):
        log = EventLog()
        sd_evolve(TraitSequence("111"), birth_rate, death_rate, 20.0, rng=rng, log=log)
        k = 3
        for event in log:
            totals[k] = totals.get(k, 0) + 1
            if event.kind == "birth":
                births[k] = births.get(k, 0) + 1
                k += 1
            else:
                assert event.kind == "death"
                k -= 1
    assert births.get(0, 0) == totals.get(0, 0)
    for k in (1, 2, 3):
        n = totals[k]
        p = birth_rate / (birth_rate + k * death_rate)
        assert n > 200
        assert abs(births.get(k, 0) - n * p) <= 4 * math.sqrt(n * p * (1 - p))


@pytest.mark.parametrize("T", [0.5, 2.0, 6.0])
def test_sd_evolve_mean_follows_closed_form(T):
    # E[k(T)] = b/d + (k0 - b/d) exp(-d T)
    birth_rate, death_rate, k0 = 1.0, 0.5, 20
    rng = np.random.default_rng(12)
    counts = [
        sd_evolve(
            TraitSequence("1" * k0), birth_rate, death_rate, T, rng=rng
        ).alive_count
        for _ in range(3000)
    ]
    ratio = birth_rate / death_rate
    expected = ratio + (k0 - ratio) * math.exp(-death_rate * T)
    assert np.mean(counts) == pytest.approx(expected, abs=0.2)
