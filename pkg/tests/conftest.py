"""Shared fixtures: the quantized enumerable toy problem used by both the
sampler tests and the acceptance suite."""

import itertools

import numpy as np

from coactivity import (ActivityInstance, ActivityType, Configuration, DiscreteInstanceSpace,
                        GpsObservation, ModelData, ModelParams, OverlapMatrix, SamplerConfig,
                        TimeGrid, config_log_prob)
from coactivity.sampler import MoveKind, derive_domain


class ToyProblem:
    """Two actors, two co-location windows, a 2x2 quantized instance grid.

    Ensembles are fixed so the chain's stationary distribution is exactly
    exp(config_log_prob) over the 15 enumerable configurations.
    """

    def __init__(self):
        self.actors = ("a", "b")
        obs = []
        for t in (25, 35, 45, 55):
            obs.append(GpsObservation("a", float(t), 0.0, 0.0, 5.0))
            obs.append(GpsObservation("b", float(t), 5.0, 0.0, 5.0))
        for t in (65, 75, 85, 95):
            obs.append(GpsObservation("a", float(t), 80.0, 0.0, 5.0))
            obs.append(GpsObservation("b", float(t), 76.0, 0.0, 5.0))
        self.data = ModelData(actors=self.actors, observations=tuple(obs))
        self.type = ActivityType(type_id="meet", span_median_s=40.0, span_log_std=0.3,
                                 radius_median_m=25.0, radius_log_std=0.3,
                                 excursion_rate_per_s=0.01)
        self.params = ModelParams(coverage_penalty=1.6, background_mean=(),
                                  background_var=())
        self.space = DiscreteInstanceSpace(
            centers=((0.0, 0.0), (80.0, 0.0)),
            starts=(20.0, 60.0),
            spans=(40.0,),
            radii=(25.0,),
            participant_sets=(frozenset(self.actors),),
            max_instances=2,
        )
        self.grid = TimeGrid(0.0, 120.0, 13)
        rng = np.random.default_rng(7)
        t = self.grid.times
        x = np.interp(t, [0, 25, 55, 65, 95, 120], [0, 0, 0, 80, 80, 80])
        path = np.stack([x, np.zeros_like(x)], axis=1)
        self.ensembles = {a: np.stack([path + rng.normal(0, 3, (13, 2)) for _ in range(2)])
                          for a in self.actors}
        self.overlap = OverlapMatrix()
        self.domain = derive_domain(self.data, (self.type,), self.params, self.space)

    def sampler_config(self, n_iters, burn_in=2_000):
        weights = ((MoveKind.BIRTH, 0.25), (MoveKind.DEATH, 0.25),
                   (MoveKind.SPLIT, 0.0), (MoveKind.MERGE, 0.0),
                   (MoveKind.TYPE, 0.05), (MoveKind.CENTER, 0.15),
                   (MoveKind.RADIUS, 0.05), (MoveKind.SPAN, 0.05),
                   (MoveKind.START_TIME, 0.15), (MoveKind.PARTICIPANTS, 0.05))
        return SamplerConfig(n_iters=n_iters, burn_in=burn_in, ensemble_refresh=10**9,
                             n_grid=13, n_draws=2, discrete=self.space,
                             move_weights=weights)

    def all_configurations(self):
        insts = [ActivityInstance("meet", c, r, s, sp, ps)
                 for c in self.space.centers for s in self.space.starts
                 for sp in self.space.spans for r in self.space.radii
                 for ps in self.space.participant_sets]
        configs = [Configuration(())]
        configs += [Configuration((i,)) for i in insts]
        configs += [Configuration(t) for t in itertools.combinations_with_replacement(insts, 2)]
        return configs

    def enumerated_posterior(self):
        configs = self.all_configurations()
        scores = np.array([config_log_prob(c, self.data, self.ensembles, self.grid.times,
                                           (self.type,), self.overlap, self.params,
                                           self.domain)
                           for c in configs])
        pi = np.exp(scores - scores.max())
        pi /= pi.sum()
        return configs, pi

    def empirical_tv(self, chains):
        from collections import Counter
        configs, pi = self.enumerated_posterior()
        counts = Counter(s.config.key() for s in chains.samples)
        emp = np.array([counts.get(c.key(), 0) for c in configs], float)
        emp /= emp.sum()
        return float(0.5 * np.abs(emp - pi).sum())
