import math

import numpy as np
import pytest
from scipy import stats

from gfvi.exact import enumerate_space, rate_matrix, transition_probs
from gfvi.flows import (
    EventLog,
    absorption_time,
    backward_state,
    backward_trajectory,
    forward_state,
    forward_trajectory,
    sample_fixation_time,
    simulate_events,
    window_partition,
)
from gfvi.measures import CoagulationMeasure
from gfvi.partitions import (
    DistinguishedPartition,
    MassPartition,
    coag,
    restrict,
    singletons,
)
from helpers import random_measure

KI = CoagulationMeasure(1.0, 1.0)
MIXED = CoagulationMeasure(0.6, 0.8, ((0.7, MassPartition(0.25, (0.3, 0.15))),))


def chi_square_vs_probs(samples, support, probs, floor=5.0):
    """p-value of observed category counts against given probabilities."""
    reps = len(samples)
    counts = {}
    for x in samples:
        counts[x] = counts.get(x, 0) + 1
    live = [(s, p) for s, p in zip(support, probs) if p > 0]
    assert set(counts) <= {s for s, _ in live}
    expected = np.array([p for _, p in live]) * reps
    observed = np.array([counts.get(s, 0) for s, _ in live], dtype=float)
    keep = expected >= floor
    obs, exp = observed[keep], expected[keep]
    if (~keep).any():
        obs = np.append(obs, observed[~keep].sum())
        exp = np.append(exp, expected[~keep].sum())
    exp *= obs.sum() / exp.sum()
    stat, _ = stats.chisquare(obs, exp)
    return float(stats.chi2.sf(stat, len(obs) - 1))


class TestEventLog:
    def test_empty_measure_empty_log(self):
        log = simulate_events(CoagulationMeasure(0.0, 0.0), 3, 5.0, np.random.default_rng(0))
        assert len(log) == 0

    def test_event_count_poisson(self):
        rng = np.random.default_rng(1)
        horizon = 2.0
        counts = np.array(
            [len(simulate_events(CoagulationMeasure(1.0, 0.0), 1, horizon, rng)) for _ in range(10 ** 4)]
        )
        lam = horizon  # rate c0 * 1
        se_mean = math.sqrt(lam / counts.size)
        assert abs(counts.mean() - lam) <= 4 * se_mean
        se_var = math.sqrt(2.0 / counts.size) * lam  # rough
        assert abs(counts.var() - lam) <= 6 * se_var

    def test_times_sorted_validation(self):
        pi = DistinguishedPartition((0, 0))
        with pytest.raises(ValueError):
            EventLog(1, 1.0, (0.5, 0.4), (pi, pi))
        with pytest.raises(ValueError):
            EventLog(1, 1.0, (1.5,), (pi,))

    def test_restricted_drops_trivial(self):
        pi = DistinguishedPartition((0, 1, 2, 0))  # only touches 3
        log = EventLog(3, 1.0, (0.5,), (pi,))
        assert len(log.restricted(2)) == 0
        assert len(log.restricted(3)) == 1


class TestFolds:
    def test_no_events_is_singletons(self):
        log = EventLog(3, 1.0, (), ())
        assert backward_state(log, 0.7) == singletons(3)
        assert forward_state(log, 0.7) == singletons(3)

    def test_single_event(self):
        pi = DistinguishedPartition((0, 0, 1))
        log = EventLog(2, 1.0, (0.3,), (pi,))
        assert backward_state(log, 0.5) == pi
        assert forward_state(log, 0.5) == pi
        assert backward_state(log, 0.2) == singletons(2)

    def test_two_events_forward_order(self):
        a = DistinguishedPartition((0, 0, 1, 2))
        b = DistinguishedPartition((0, 1, 1, 2))
        log = EventLog(3, 1.0, (0.2, 0.6), (a, b))
        assert forward_state(log, 1.0) == coag(b, a)
        assert backward_state(log, 1.0) == coag(a, b)

    def test_window_endpoints(self):
        rng = np.random.default_rng(2)
        log = simulate_events(MIXED, 4, 2.0, rng)
        for s in (0.0, 0.5, 2.0):
            assert window_partition(log, s, s) == singletons(4)

    def test_pathwise_flow_property(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            log = simulate_events(MIXED, 4, 2.0, rng)
            cuts = np.sort(rng.random(3) * 2.0)
            s, t, u = float(cuts[0]), float(cuts[1]), float(cuts[2])
            back = coag(window_partition(log, s, t), window_partition(log, t, u))
            assert back == window_partition(log, s, u)
            fwd = coag(
                window_partition(log, t, u, "forward"),
                window_partition(log, s, t, "forward"),
            )
            assert fwd == window_partition(log, s, u, "forward")

    def test_block_counts_non_increasing(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            log = simulate_events(MIXED, 5, 1.5, rng)
            for traj in (backward_trajectory(log), forward_trajectory(log)):
                counts = traj.block_counts()
                assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_restriction_commutes_pathwise(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            log = simulate_events(MIXED, 5, 1.0, rng)
            sub = log.restricted(2)
            for t in (0.3, 0.8, 1.0):
                assert restrict(forward_state(log, t), 2) == forward_state(sub, t)
                assert restrict(backward_state(log, t), 2) == backward_state(sub, t)


class TestLaws:
    def test_forward_matches_backward_in_law(self):
        rng = np.random.default_rng(6)
        space = enumerate_space(2)
        reps = 10 ** 4
        t = 0.8
        fwd, back = [], []
        for _ in range(reps):
            log = simulate_events(KI, 2, t, rng)
            fwd.append(forward_state(log, t))
            back.append(backward_state(log, t))
        probs = transition_probs(rate_matrix(KI, space), t)[space.singletons_index]
        assert chi_square_vs_probs(fwd, space.parts, probs) > 0.001
        assert chi_square_vs_probs(back, space.parts, probs) > 0.001

    def test_restriction_consistent_in_law(self):
        rng = np.random.default_rng(7)
        space = enumerate_space(2)
        reps = 10 ** 4
        t = 0.6
        states = []
        for _ in range(reps):
            log = simulate_events(MIXED, 4, t, rng)
            states.append(restrict(forward_state(log, t), 2))
        probs = transition_probs(rate_matrix(MIXED, space), t)[space.singletons_index]
        assert chi_square_vs_probs(states, space.parts, probs) > 0.001

    def test_blockcount_law_small_n(self):
        # classical pairwise-merge chain: block counts vs exact semigroup
        rng = np.random.default_rng(8)
        kingman = CoagulationMeasure(0.0, 1.0)
        space = enumerate_space(3)
        t = 0.5
        probs = transition_probs(rate_matrix(kingman, space), t)[space.singletons_index]
        count_probs: dict[int, float] = {}
        for pi, p in zip(space.parts, probs):
            count_probs[pi.num_blocks] = count_probs.get(pi.num_blocks, 0.0) + p
        reps = 10 ** 4
        samples = [
            backward_state(simulate_events(kingman, 3, t, rng), t).num_blocks
            for _ in range(reps)
        ]
        support = sorted(count_probs)
        assert chi_square_vs_probs(samples, support, [count_probs[b] for b in support]) > 0.001


class TestAbsorption:
    def test_exponential_time_n1(self):
        rng = np.random.default_rng(9)
        m = CoagulationMeasure(1.0, 0.0)
        times = []
        censored = 0
        for _ in range(5000):
            log = simulate_events(m, 1, 20.0, rng)
            t = absorption_time(log)
            if t is None:
                censored += 1
            else:
                times.append(t)
        arr = np.asarray(times)
        assert censored < 5
        assert abs(arr.mean() - 1.0) <= 4 * arr.std() / math.sqrt(arr.size)

    def test_never_absorbed_without_immigration(self):
        rng = np.random.default_rng(10)
        m = CoagulationMeasure(0.0, 1.0, ((0.5, MassPartition(0.0, (0.4,))),))
        for _ in range(50):
            log = simulate_events(m, 3, 5.0, rng)
            assert absorption_time(log) is None
            assert absorption_time(log, "forward") is None

    def test_fixation_sampler_matches_log_absorption(self):
        rng = np.random.default_rng(11)
        m = CoagulationMeasure(1.0, 0.0)
        direct = np.array([sample_fixation_time(m, 1, rng) for _ in range(5000)])
        assert abs(direct.mean() - 1.0) <= 4 * direct.std() / math.sqrt(direct.size)

    def test_fixation_sampler_law_matches_full_fold(self):
        rng = np.random.default_rng(12)
        lumped = np.array([sample_fixation_time(KI, 4, rng) for _ in range(3000)])
        full = []
        for _ in range(3000):
            log = simulate_events(KI, 4, 12.0, rng)
            full.append(absorption_time(log))
        full = np.array([t for t in full if t is not None])
        assert full.size >= 2990
        _, p = stats.ks_2samp(lumped, full)
        assert p > 0.001

    def test_fixation_bound_small_resolutions(self):
        rng = np.random.default_rng(13)
        for n in (1, 2, 4, 8, 16):
            times = np.array([sample_fixation_time(KI, n, rng) for _ in range(2000)])
            se = times.std(ddof=1) / math.sqrt(times.size)
            assert times.mean() <= 2.0 + 3 * se

    def test_never_absorbing_measure_returns_none(self):
        rng = np.random.default_rng(14)
        m = CoagulationMeasure(0.0, 1.0)
        # the distinguished singleton never merges: the count chain stalls at 2
        assert sample_fixation_time(m, 1, rng, time_cap=10.0) is None


def test_random_measure_simulation_smoke():
    rng = np.random.default_rng(15)
    for _ in range(10):
        m = random_measure(rng)
        log = simulate_events(m, 4, 1.0, rng)
        forward_state(log, 1.0)
        backward_state(log, 1.0)
