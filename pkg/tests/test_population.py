import math

import numpy as np
import pytest
from scipy import stats

from gfvi.exact import enumerate_space, phi_functional, rate_matrix, transition_probs
from gfvi.flows import EventLog, backward_trajectory, simulate_events
from gfvi.functionals import DiscreteLaw, MomentFunctional
from gfvi.measures import CoagulationMeasure
from gfvi.partitions import (
    DistinguishedPartition,
    MassPartition,
    paintbox_sample,
    singletons,
)
from gfvi.population import (
    EmpiricalMeasure,
    assign_types,
    block_frequencies,
    empirical_block_moment,
    empirical_moment,
    forward_ancestor_map,
    ks_distance,
    predicted_type_mixture,
    simulate_type_vector,
    types_at,
)


class TestAssignTypes:
    def test_distinct_labels(self):
        types = assign_types(3, "distinct", np.random.default_rng(0))
        assert types.values == (0.0, 0.25, 0.5, 0.75)

    def test_point_mass(self):
        law = DiscreteLaw.point(1.0)
        types = assign_types(5, law, np.random.default_rng(1))
        assert types.values == (0.0, 1.0, 1.0, 1.0, 1.0, 1.0)

    def test_uniform_ks(self):
        types = assign_types(10 ** 4, "uniform", np.random.default_rng(2))
        stat, p = stats.kstest(np.asarray(types.values[1:]), "uniform")
        assert p > 0.001

    def test_zero_reserved(self):
        with pytest.raises(ValueError):
            DiscreteLaw((0.0,), (1.0,))
        with pytest.raises(ValueError):
            assign_types(2, DiscreteLaw((1.2,), (1.0,)), np.random.default_rng(3))


class TestTypesAt:
    def test_before_first_event(self):
        log = EventLog(3, 1.0, (0.5,), (DistinguishedPartition((0, 1, 0, 2)),))
        types = assign_types(3, "distinct", np.random.default_rng(4))
        np.testing.assert_allclose(types_at(log, types, 0.2), [0.25, 0.5, 0.75])

    def test_single_forward_event(self):
        log = EventLog(3, 1.0, (0.5,), (DistinguishedPartition((0, 1, 0, 2)),))
        types = assign_types(3, "distinct", np.random.default_rng(5))
        v = types_at(log, types, 0.9)
        np.testing.assert_allclose(v, [0.25, 0.0, 0.5])
        assert v[1] == 0.0  # individual 2 descends from the immigrant

    def test_all_absorbed(self):
        log = EventLog(2, 1.0, (0.5,), (DistinguishedPartition((0, 0, 0)),))
        types = assign_types(2, "uniform", np.random.default_rng(6))
        np.testing.assert_allclose(types_at(log, types, 1.0), [0.0, 0.0])

    def test_zero_iff_immigrant_descendant(self):
        rng = np.random.default_rng(7)
        m = CoagulationMeasure(0.8, 0.5, ((0.6, MassPartition(0.3, (0.2,))),))
        log = simulate_events(m, 6, 1.0, rng)
        types = assign_types(6, "uniform", rng)
        from gfvi.flows import forward_state

        for t in (0.3, 0.7, 1.0):
            v = types_at(log, types, t)
            state = forward_state(log, t)
            for k in range(1, 7):
                assert (v[k - 1] == 0.0) == (state.assignment[k] == 0)


class TestEmpiricalMoments:
    def test_constant_one(self):
        v = np.array([0.0, 0.5, 1.0])
        assert empirical_moment(v, MomentFunctional.constant_one(2)) == 1.0

    def test_all_zero_types(self):
        v = np.zeros(4)
        assert empirical_moment(v, MomentFunctional.monomial((1,))) == 0.0

    def test_exact_matches_direct_average(self):
        v = np.array([0.2, 0.2, 0.8, 1.0])
        f = MomentFunctional.monomial((1, 2))
        want = np.mean(v) * np.mean(v ** 2)
        assert empirical_moment(v, f) == pytest.approx(want)

    def test_mc_matches_exact(self):
        rng = np.random.default_rng(8)
        v = rng.random(50)
        f = MomentFunctional.monomial((2, 1))
        exact = empirical_moment(v, f)
        mc = empirical_moment(v, f, rng=rng, samples=200000)
        assert mc == pytest.approx(exact, abs=0.01)

    def test_block_moment_pins_distinguished_to_zero(self):
        v = np.array([0.5, 1.0])
        pi = DistinguishedPartition((0, 0))  # coordinate 1 reads x0 = 0
        f = MomentFunctional.monomial((1,))
        assert empirical_block_moment(v, pi, f) == 0.0

    def test_block_moment_mc_matches_exact(self):
        rng = np.random.default_rng(9)
        v = rng.random(40)
        pi = DistinguishedPartition((0, 1, 1, 0))
        f = MomentFunctional.monomial((1, 1, 2))
        exact = empirical_block_moment(v, pi, f)
        mc = empirical_block_moment(v, pi, f, rng=rng, samples=200000)
        assert mc == pytest.approx(exact, abs=0.01)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(10)
        v = rng.random(30)
        f = MomentFunctional.monomial((1, 2))
        shuffled = v.copy()
        rng.shuffle(shuffled)
        assert empirical_moment(v, f) == pytest.approx(
            empirical_moment(shuffled, f), abs=1e-12
        )

    def test_empirical_measure_validation(self):
        with pytest.raises(ValueError):
            EmpiricalMeasure((0.5,), (0.7,))


class TestImmigrantMass:
    def test_backward_immigrant_block_grows_pathwise(self):
        rng = np.random.default_rng(11)
        m = CoagulationMeasure(1.0, 1.0, ((0.5, MassPartition(0.3, (0.3,))),))
        for _ in range(20):
            log = simulate_events(m, 5, 2.0, rng)
            traj = backward_trajectory(log)
            prev: set = set()
            for state in (traj.initial,) + traj.states:
                block0 = set(state.blocks()[0])
                assert prev <= block0
                prev = block0

    def test_forward_mass_monotone_in_mean(self):
        rng = np.random.default_rng(12)
        m = CoagulationMeasure(1.0, 1.0)
        reps = 4000
        t_grid = (0.3, 0.9)
        masses = np.zeros((reps, len(t_grid)))
        for r in range(reps):
            log = simulate_events(m, 4, max(t_grid), rng)
            types = assign_types(4, "uniform", rng)
            for j, t in enumerate(t_grid):
                masses[r, j] = (types_at(log, types, t) == 0.0).mean()
        gap = masses[:, 1] - masses[:, 0]
        se = gap.std(ddof=1) / math.sqrt(reps)
        assert gap.mean() >= -4 * se


class TestComposedTypeMixture:
    def test_lemma_oracle_ks(self):
        s = MassPartition(0.2, (0.3, 0.1))
        passes = 0
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            pi = paintbox_sample(s, 10 ** 4, rng)
            types = assign_types(10 ** 4, "uniform", rng)
            a = np.fromiter(pi.assignment, dtype=np.int64)
            v = types.as_array()[a[1:]]
            mixture = predicted_type_mixture(pi, types, "uniform")
            passes += ks_distance(v, mixture) <= 0.05
        assert passes >= 4

    def test_block_frequencies_sum_to_one(self):
        rng = np.random.default_rng(13)
        pi = paintbox_sample(MassPartition(0.4, (0.2,)), 500, rng)
        assert block_frequencies(pi).sum() == pytest.approx(1.0)

    def test_mixture_cdf_range(self):
        rng = np.random.default_rng(14)
        pi = paintbox_sample(MassPartition(0.3, (0.4,)), 200, rng)
        types = assign_types(200, "uniform", rng)
        mix = predicted_type_mixture(pi, types, "uniform")
        grid = np.linspace(-0.5, 1.5, 50)
        cdf = mix.cdf(grid)
        assert np.all(np.diff(cdf) >= -1e-12)
        assert cdf[0] == 0.0 and cdf[-1] == pytest.approx(1.0)


class TestFastForwardPath:
    def test_matches_exact_law_small_n(self):
        rng = np.random.default_rng(15)
        m = CoagulationMeasure(1.0, 1.0)
        space = enumerate_space(2)
        t = 0.7
        reps = 10 ** 4
        counts: dict = {}
        for _ in range(reps):
            comp = forward_ancestor_map(m, 2, t, rng)
            pi = DistinguishedPartition(tuple(int(x) for x in comp))
            counts[pi] = counts.get(pi, 0) + 1
        probs = transition_probs(rate_matrix(m, space), t)[space.singletons_index]
        expected = probs * reps
        observed = np.array([counts.get(pi, 0) for pi in space.parts], dtype=float)
        keep = expected >= 5
        obs, exp = observed[keep], expected[keep]
        if (~keep).any():
            obs = np.append(obs, observed[~keep].sum())
            exp = np.append(exp, expected[~keep].sum())
        exp *= obs.sum() / exp.sum()
        stat, _ = stats.chisquare(obs, exp)
        assert stats.chi2.sf(stat, len(obs) - 1) > 0.001

    def test_paintbox_events_respected(self):
        rng = np.random.default_rng(16)
        m = CoagulationMeasure(0.0, 0.0, ((2.0, MassPartition(0.5, (0.4,))),))
        comp = forward_ancestor_map(m, 50, 3.0, rng)
        assert comp.shape == (51,)
        assert comp[0] == 0
        assert np.all(comp <= np.arange(51))  # lookdown: ancestors sit below

    def test_type_vector_mean_matches_dual(self):
        rng = np.random.default_rng(17)
        m = CoagulationMeasure(1.0, 0.0)
        t = 1.0
        n = 200
        reps = 2000
        means = np.empty(reps)
        for r in range(reps):
            v = simulate_type_vector(m, n, t, DiscreteLaw.point(1.0), rng)
            means[r] = v.mean()
        se = means.std(ddof=1) / math.sqrt(reps)
        assert abs(means.mean() - math.exp(-t)) <= 3 * se + 2.0 / n
