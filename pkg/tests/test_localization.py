"""Mixture localization tests, including the hand-computed conditioned
variance oracle and the law-of-total-variance identity."""

import numpy as np
import pytest

from coactivity import (ActivityInstance, Configuration, GpHyperParams, GpsObservation,
                        TimeGrid, build_gp, condition_on_activity, localize,
                        uncertainty_report)
from coactivity.sampler import ChainSamples, ConfigSample

HYPER = GpHyperParams()
GRID = TimeGrid(0.0, 600.0, 31)


def _posteriors(seed=0, actors=("a", "b", "c")):
    rng = np.random.default_rng(seed)
    posts = {}
    for a in actors:
        obs = [GpsObservation(a, float(t), float(rng.normal(0, 40)),
                              float(rng.normal(0, 40)), 15.0)
               for t in np.arange(0.0, 601.0, 60.0)]
        posts[a] = build_gp(obs, HYPER, GRID, actor_id=a)
    return posts


def _chains(configs, seed=0):
    samples = tuple(ConfigSample(c, -1.0, i + 1) for i, c in enumerate(configs))
    acceptance = ()
    return ChainSamples(samples=samples, acceptance=acceptance, seed=seed, burn_in=0,
                        n_iters=len(configs))


def _inst(participants=("a", "b"), t_start=200.0, span=200.0):
    return ActivityInstance("meet", (0.0, 0.0), 30.0, t_start, span,
                            frozenset(participants))


class TestLocalize:
    def test_all_empty_samples_equal_unconditioned(self):
        posts = _posteriors()
        chains = _chains([Configuration()] * 20)
        loc = localize(chains, posts, "a", thin=1)
        base = posts["a"]
        assert np.array_equal(loc.mean, np.asarray(base.mean))
        assert np.allclose(loc.std, base.marginal_std()[:, None] * np.ones((1, 2)))
        assert len(loc.components) == 1
        assert loc.components[0][1] is base

    def test_single_sample_single_activity_matches_direct_conditioning(self):
        posts = _posteriors(1)
        inst = _inst()
        chains = _chains([Configuration((inst,))])
        loc = localize(chains, posts, "a", thin=1, sigma_aux=3.0)
        direct = condition_on_activity(posts, inst, "static", sigma_aux=3.0).marginal("a")
        assert np.allclose(loc.mean, direct.mean)
        assert np.allclose(loc.std, direct.marginal_std()[:, None], atol=1e-10)

    def test_non_participant_untouched_in_every_sample(self):
        posts = _posteriors(2)
        chains = _chains([Configuration((_inst(),))] * 7)
        loc = localize(chains, posts, "c", thin=1)
        base = posts["c"]
        assert np.array_equal(loc.mean, np.asarray(base.mean))
        assert np.array_equal(loc.std[:, 0], base.marginal_std())

    def test_component_variance_never_exceeds_base(self):
        posts = _posteriors(3)
        configs = [Configuration((_inst(),)), Configuration(),
                   Configuration((_inst(("a", "c"), 100.0, 150.0),))]
        loc = localize(_chains(configs), posts, "a", thin=1, sigma_aux=2.0)
        base_var = posts["a"].marginal_variance()
        for _, comp in loc.components:
            assert np.all(comp.marginal_variance() <= base_var + 1e-8)

    def test_law_of_total_variance_identity(self):
        posts = _posteriors(4)
        configs = [Configuration((_inst(),))] * 3 + [Configuration()] * 2
        loc = localize(_chains(configs), posts, "a", thin=1, sigma_aux=2.0)
        weights = np.array([w for w, _ in loc.components])
        means = np.stack([np.asarray(c.mean) for _, c in loc.components])
        variances = np.stack([c.marginal_variance() for _, c in loc.components])
        mean = np.einsum("k,knc->nc", weights, means)
        var = (np.einsum("k,kn->n", weights, variances)[:, None]
               + np.einsum("k,knc->nc", weights, means**2) - mean**2)
        assert np.allclose(loc.mean, mean)
        assert np.allclose(loc.std**2, np.clip(var, 0, None), atol=1e-10)

    def test_thinning_and_weights(self):
        posts = _posteriors(5)
        configs = [Configuration((_inst(),)), Configuration(), Configuration(),
                   Configuration((_inst(),)), Configuration()]
        loc = localize(_chains(configs), posts, "a", thin=2)
        # thinned samples: indices 0, 2, 4 -> one conditioned, two empty
        weights = sorted(w for w, _ in loc.components)
        assert weights == [pytest.approx(1 / 3), pytest.approx(2 / 3)]


class TestUncertaintyReport:
    def test_window_without_activities_changes_nothing(self):
        posts = _posteriors(6)
        # activities exist but never contain the queried actor
        chains = _chains([Configuration((_inst(participants=("b", "c")),))] * 4)
        loc = localize(chains, posts, "a", thin=1)
        before, after = uncertainty_report(loc, (0.0, 200.0))
        assert after == before

    def test_single_point_window(self):
        posts = _posteriors(7)
        loc = localize(_chains([Configuration()]), posts, "a", thin=1)
        t = GRID.times[10]
        before, after = uncertainty_report(loc, (t, t))
        assert before[0] == pytest.approx(posts["a"].marginal_std()[10])
        assert after == before

    def test_empty_window_is_error(self):
        posts = _posteriors(8)
        loc = localize(_chains([Configuration()]), posts, "a", thin=1)
        with pytest.raises(ValueError):
            uncertainty_report(loc, (10.0, 10.5))  # no grid point inside

    def test_hand_computed_conditioned_variance(self):
        # tiny analytic case: 2 actors, 3-point grid, dynamic constraint on
        # the middle point only; conditioned covariance worked out by direct
        # matrix algebra on the stacked system
        from coactivity.gp import GpPosterior, condition_on_activities

        grid = TimeGrid(0.0, 2.0, 3)
        cov = np.diag([4.0, 9.0, 1.0])
        posts = {
            "a": GpPosterior(("a",), grid, np.zeros((3, 2)), cov.copy()),
            "b": GpPosterior(("b",), grid, np.full((3, 2), 2.0), cov.copy()),
        }
        inst = ActivityInstance("meet", (0.0, 0.0), 5.0, 0.9, 0.2,
                                frozenset(("a", "b")))  # spans only t=1
        sigma = 0.5
        joint = condition_on_activities(posts, [inst], "dynamic", sigma)
        # oracle: x_a(1) - x_b(1) ~ N(0, sigma^2); prior var 9 each
        h = np.zeros(6)
        h[1], h[4] = 1.0, -1.0
        big_cov = np.zeros((6, 6))
        big_cov[:3, :3] = cov
        big_cov[3:, 3:] = cov
        s = h @ big_cov @ h + sigma**2
        k = big_cov @ h / s
        mean0 = np.array([0.0, 0.0, 0.0, 2.0, 2.0, 2.0])
        expected_mean = mean0 - k * (h @ mean0)
        expected_cov = big_cov - np.outer(k, h @ big_cov)
        assert np.max(np.abs(joint.mean[:, 0] - expected_mean)) <= 1e-8
        assert np.max(np.abs(joint.cov - expected_cov)) <= 1e-8
