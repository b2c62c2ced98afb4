"""Factored-score tests: closed forms, refined-integration oracles, and an
independent monolithic re-implementation of the whole score."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coactivity import (ActivityInstance, ActivityType, Configuration, FaceDetection,
                        FrameRecord, GpsObservation, InstanceDomain, ModelData, ModelParams,
                        OverlapMatrix, check_overlap, config_log_prob, coverage_log_factor,
                        face_count_log_factor, face_identity_posterior,
                        instance_domain_log_prior, log_mean_exp, lognormal_logpdf,
                        participant_count_log_pmf, presence_log_factor, scene_log_factor,
                        span_radius_log_prior)
from coactivity.model import DISJOINT, CONTAINS, clamped_count_log_pmf

ACTORS = ("a", "b")
TYPE = ActivityType(type_id="meet", span_median_s=60.0, span_log_std=0.2,
                    radius_median_m=30.0, radius_log_std=0.2,
                    feature_mean=(1.0, -1.0), feature_var=(1.0, 2.0),
                    excursion_rate_per_s=1.0)
TYPES = {"meet": TYPE}
PARAMS = ModelParams(coverage_penalty=0.5, background_mean=(0.0, 0.0),
                     background_var=(1.0, 1.0))
GRID = np.linspace(0.0, 100.0, 26)   # dt = 4 s
DOMAIN = InstanceDomain(t_min=0.0, t_max=100.0, x_min=-500.0, x_max=500.0,
                        y_min=-500.0, y_max=500.0, n_types=1, n_actors=2)


def _inst(center=(0.0, 0.0), radius=30.0, t_start=20.0, span=50.0, participants=ACTORS):
    return ActivityInstance("meet", center, radius, t_start, span, frozenset(participants))


def _static_paths(pos_a=(0.0, 0.0), pos_b=(0.0, 0.0)):
    g = len(GRID)
    return {"a": np.tile(pos_a, (g, 1)).astype(float),
            "b": np.tile(pos_b, (g, 1)).astype(float)}


def _obs(actor, ts, x=0.0, y=0.0):
    return [GpsObservation(actor, float(t), x, y, 5.0) for t in ts]


class TestCoverage:
    def test_everything_covered_is_zero(self):
        config = Configuration((_inst(),))
        obs = _obs("a", [25, 40, 60]) + _obs("b", [30, 50])
        val = coverage_log_factor(config, obs, _static_paths(), GRID, 0.5)
        assert val == 0.0

    def test_empty_configuration_pays_full_penalty(self):
        obs = _obs("a", [10, 20, 30]) + _obs("b", [40, 50])
        val = coverage_log_factor(Configuration(), obs, _static_paths(), GRID, 0.5)
        assert val == pytest.approx(-0.5 * 5)

    def test_matches_point_in_cylinder_oracle(self):
        rng = np.random.default_rng(0)
        g = len(GRID)
        paths = {a: rng.normal(0, 40, size=(g, 2)) for a in ACTORS}
        obs = _obs("a", rng.uniform(0, 100, 10)) + _obs("b", rng.uniform(0, 100, 10))
        config = Configuration((_inst(radius=45.0),))
        # exhaustive oracle: plain loops over observations and instances
        uncovered = 0
        for o in obs:
            x = np.interp(o.t, GRID, paths[o.actor_id][:, 0])
            y = np.interp(o.t, GRID, paths[o.actor_id][:, 1])
            hit = any(o.actor_id in i.participants and i.t_start <= o.t <= i.t_end
                      and (x - i.center[0])**2 + (y - i.center[1])**2 <= i.radius**2
                      for i in config.instances)
            uncovered += 0 if hit else 1
        val = coverage_log_factor(config, obs, paths, GRID, 0.5)
        assert val == pytest.approx(-0.5 * uncovered)

    def test_new_covering_instance_raises_score_by_penalty_times_count(self):
        obs = _obs("a", [25, 40]) + _obs("b", [30])
        empty = coverage_log_factor(Configuration(), obs, _static_paths(), GRID, 0.7)
        one = coverage_log_factor(Configuration((_inst(),)), obs, _static_paths(), GRID, 0.7)
        assert one - empty == pytest.approx(0.7 * 3)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_coverage_and_presence_never_positive(self, seed):
        rng = np.random.default_rng(seed)
        g = len(GRID)
        paths = {a: rng.normal(0, 50, size=(g, 2)) for a in ACTORS}
        ens = {a: rng.normal(0, 50, size=(2, g, 2)) for a in ACTORS}
        obs = _obs("a", rng.uniform(0, 100, 4))
        inst = _inst(t_start=float(rng.uniform(0, 50)), span=float(rng.uniform(5, 50)))
        config = Configuration((inst,))
        assert coverage_log_factor(config, obs, paths, GRID, 0.5) <= 0.0
        assert presence_log_factor(inst, 1.0, ens, GRID) <= 0.0


class TestPresence:
    def test_inside_for_whole_span_is_zero(self):
        ens = {a: np.zeros((3, len(GRID), 2)) for a in ACTORS}
        assert presence_log_factor(_inst(), 1.0, ens, GRID) == 0.0

    def test_outside_for_whole_span_pays_span(self):
        ens = {"a": np.zeros((1, len(GRID), 2)),
               "b": np.full((1, len(GRID), 2), 500.0)}
        inst = _inst(t_start=20.0, span=50.0)
        assert presence_log_factor(inst, 1.0, ens, GRID) == pytest.approx(-50.0)

    def test_boundary_crossing_matches_refined_integration(self):
        # actor b sweeps across the disc boundary mid-span; a 1 s grid keeps
        # the cell quantization within the oracle tolerance
        grid = np.linspace(0.0, 100.0, 101)
        g = len(grid)
        xs = np.linspace(-90, 90, g)
        path_b = np.stack([xs, np.zeros(g)], axis=1)
        ens = {"a": np.zeros((1, g, 2)), "b": path_b[None, :, :]}
        inst = _inst(t_start=10.0, span=80.0)
        val = presence_log_factor(inst, 1.0, ens, grid)
        # oracle: 10x finer Riemann sum on the linearly interpolated path
        fine = np.linspace(grid[0], grid[-1], (g - 1) * 10 + 1)
        dt = fine[1] - fine[0]
        in_span = (fine >= inst.t_start) & (fine <= inst.t_end)
        bx = np.interp(fine, grid, path_b[:, 0])
        outside_b = (bx**2 > inst.radius**2) & in_span
        expected = -(outside_b.sum() * dt)
        assert val == pytest.approx(expected, rel=0.02)

    def test_span_outside_grid_is_error(self):
        ens = {a: np.zeros((1, len(GRID), 2)) for a in ACTORS}
        with pytest.raises(ValueError):
            presence_log_factor(_inst(t_start=500.0), 1.0, ens, GRID)


class TestSpanRadiusPrior:
    def test_median_values_match_closed_form(self):
        inst = _inst(span=60.0, radius=30.0)
        val = span_radius_log_prior(inst, TYPE)
        # independent closed-form lognormal density at the median:
        # -log(v * s * sqrt(2 pi)); plus the renormalized count pmf at 2
        def lognorm_at_median(v, s):
            return -math.log(v * s * math.sqrt(2 * math.pi))
        def phi(z):
            return 0.5 * (1 + math.erf(z / math.sqrt(2)))
        def count_pmf(k):
            z = lambda v: (math.log(v) - math.log(2.0)) / 0.5
            mass = phi(z(k + 0.5)) - phi(z(k - 0.5))
            return mass / (1 - phi(z(1.5)))
        expected = (lognorm_at_median(60.0, 0.2) + lognorm_at_median(30.0, 0.2)
                    + math.log(count_pmf(2)))
        assert val == pytest.approx(expected, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1.05, 8.0))
    def test_moving_span_away_from_mode_decreases_value(self, factor):
        # the log-normal mode sits below the median; scaling the span UP from
        # the median strictly decreases the density, and scaling further
        # decreases it more
        base = span_radius_log_prior(_inst(span=60.0), TYPE)
        up = span_radius_log_prior(_inst(span=60.0 * factor), TYPE)
        further = span_radius_log_prior(_inst(span=60.0 * factor * 1.2), TYPE)
        assert up < base
        assert further < up

    def test_zero_span_is_error(self):
        with pytest.raises(ValueError):
            ActivityInstance("meet", (0, 0), 30.0, 0.0, 0.0, frozenset(ACTORS))
        with pytest.raises(ValueError):
            lognormal_logpdf(0.0, 60.0, 0.2)

    def test_count_pmf_normalizes(self):
        total = sum(math.exp(participant_count_log_pmf(k, 2.0, 0.5)) for k in range(2, 60))
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_clamped_pmf_normalizes(self):
        total = sum(math.exp(clamped_count_log_pmf(k, 2.0, 0.5)) for k in range(2, 60))
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_translation_invariance_in_center_and_start(self):
        a = span_radius_log_prior(_inst(center=(0.0, 0.0), t_start=10.0), TYPE)
        b = span_radius_log_prior(_inst(center=(999.0, -40.0), t_start=55.0), TYPE)
        assert a == b


class TestScene:
    def test_frame_at_type_mean_unit_variance_closed_form(self):
        ty = ActivityType(type_id="meet", feature_mean=(1.0, 2.0, 3.0), feature_var=(1.0, 1.0, 1.0))
        frame = FrameRecord("a", 30.0, (1.0, 2.0, 3.0))
        params = ModelParams(background_mean=(0.0,) * 3, background_var=(1.0,) * 3)
        config = Configuration((_inst(),))
        val = scene_log_factor([frame], config, {"meet": ty}, params)
        assert val == pytest.approx(-1.5 * math.log(2 * math.pi), abs=1e-12)

    def test_empty_configuration_scores_background(self):
        rng = np.random.default_rng(1)
        frames = [FrameRecord("a", float(t), tuple(rng.normal(0, 1, 2))) for t in range(5)]
        val = scene_log_factor(frames, Configuration(), TYPES, PARAMS)
        expected = 0.0
        for f in frames:
            for v, m, s2 in zip(f.features, PARAMS.background_mean, PARAMS.background_var):
                expected += -0.5 * (math.log(2 * math.pi * s2) + (v - m)**2 / s2)
        assert val == pytest.approx(expected, abs=1e-10)

    def test_matches_per_frame_assignment_oracle(self):
        ty2 = ActivityType(type_id="chat", span_median_s=40.0, span_log_std=0.3,
                           feature_mean=(-2.0, 0.5), feature_var=(2.0, 0.5))
        types = {"meet": TYPE, "chat": ty2}
        rng = np.random.default_rng(2)
        frames = [FrameRecord(a, float(t), tuple(rng.normal(0, 2, 2)))
                  for a in ACTORS for t in (15.0, 45.0, 80.0)]
        i1 = _inst(t_start=10.0, span=50.0)
        i2 = ActivityInstance("chat", (10.0, 10.0), 20.0, 40.0, 50.0, frozenset(["a", "b"]))
        config = Configuration((i1, i2))
        val = scene_log_factor(frames, config, types, PARAMS)

        def normal_lp(x, mean, var):
            return sum(-0.5 * (math.log(2 * math.pi * v) + (xi - m)**2 / v)
                       for xi, m, v in zip(x, mean, var))

        expected = 0.0
        for f in frames:
            best = None
            for order, inst in enumerate(config.instances):
                if f.actor_id in inst.participants and inst.t_start <= f.t <= inst.t_end:
                    depth = min(f.t - inst.t_start, inst.t_end - f.t)
                    key = (-depth, inst.t_start, order)
                    if best is None or key < best[0]:
                        best = (key, inst)
            if best is None:
                expected += normal_lp(f.features, PARAMS.background_mean, PARAMS.background_var)
            else:
                ty = types[best[1].type_id]
                expected += normal_lp(f.features, ty.feature_mean, ty.feature_var)
        assert val == pytest.approx(expected, abs=1e-10)

    def test_feature_dimension_mismatch_is_error(self):
        frames = [FrameRecord("a", 1.0, (1.0, 2.0, 3.0))]
        with pytest.raises(ValueError):
            scene_log_factor(frames, Configuration(), TYPES, PARAMS)

    def test_spatial_association_prefers_nearest_center(self):
        # two co-temporal covering instances at different places; the frame's
        # actor sits at the second place, so the second type must score it
        ty_far = ActivityType(type_id="meet", feature_mean=(5.0, 5.0), feature_var=(1.0, 1.0))
        ty_near = ActivityType(type_id="chat", feature_mean=(0.0, 0.0), feature_var=(1.0, 1.0))
        types = {"meet": ty_far, "chat": ty_near}
        far = ActivityInstance("meet", (0.0, 0.0), 30.0, 10.0, 60.0, frozenset(ACTORS))
        near = ActivityInstance("chat", (200.0, 0.0), 30.0, 12.0, 60.0, frozenset(ACTORS))
        frame = FrameRecord("a", 40.0, (0.0, 0.0))
        g = len(GRID)
        ens = {"a": np.tile((200.0, 0.0), (1, g, 1)), "b": np.zeros((1, g, 2))}
        val = scene_log_factor([frame], Configuration((far, near)), types, PARAMS,
                               ensembles=ens, grid_times=GRID)
        expected = -0.5 * 2 * math.log(2 * math.pi)  # frame at ty_near's mean
        assert val == pytest.approx(expected, abs=1e-12)
        # without paths the deeper embedding (far, depth 30 vs 28) wins
        val_depth = scene_log_factor([frame], Configuration((far, near)), types, PARAMS)
        lp_far = -0.5 * sum(math.log(2 * math.pi) + (0 - 5.0)**2 for _ in range(2))
        assert val_depth == pytest.approx(lp_far, abs=1e-12)


class TestFaceFactor:
    def test_zero_counts_for_participant(self):
        inst = _inst(span=120.0)  # 2 minutes
        val = face_count_log_factor([], Configuration((inst,)), TYPES, ACTORS)
        lam_p = TYPE.face_rate_participant_per_min * 2.0
        assert val == pytest.approx(-2 * lam_p)  # both actors participate

    def test_count_k_matches_poisson_closed_form(self):
        inst = _inst(span=60.0)
        k = 4
        dets = [FaceDetection("b", 30.0 + i * 0.1, "a") for i in range(k)]
        val = face_count_log_factor(dets, Configuration((inst,)), TYPES, ACTORS)
        lam = TYPE.face_rate_participant_per_min * 1.0
        expected_a = k * math.log(lam) - lam - math.log(math.factorial(k))
        expected_b = -lam  # zero detections of b
        assert val == pytest.approx(expected_a + expected_b, abs=1e-10)

    def test_label_swap_decreases_value_beyond_crossover(self):
        # crossover count: smallest k with participant pmf above non-participant
        actors = ("a", "b", "c")
        inst = ActivityInstance("meet", (0, 0), 30.0, 20.0, 60.0, frozenset(["a", "b"]))
        lam_p = TYPE.face_rate_participant_per_min
        lam_n = TYPE.face_rate_nonparticipant_per_min
        crossover = math.ceil((lam_p - lam_n) / math.log(lam_p / lam_n))
        k = crossover + 3
        dets = [FaceDetection("a", 25.0 + i * 0.01, "c") for i in range(k)]
        as_nonpart = face_count_log_factor(dets, Configuration((inst,)), TYPES, actors)
        swapped = ActivityInstance("meet", (0, 0), 30.0, 20.0, 60.0, frozenset(["a", "c"]))
        as_part = face_count_log_factor(dets, Configuration((swapped,)), TYPES, actors)
        assert as_part > as_nonpart

    def test_observer_outside_participants_not_counted(self):
        actors = ("a", "b", "c")
        inst = ActivityInstance("meet", (0, 0), 30.0, 20.0, 60.0, frozenset(["a", "b"]))
        by_non_participant = [FaceDetection("c", 30.0, "a")]
        val = face_count_log_factor(by_non_participant, Configuration((inst,)), TYPES, actors)
        val0 = face_count_log_factor([], Configuration((inst,)), TYPES, actors)
        assert val == pytest.approx(val0)


class TestOverlap:
    def test_disjoint_violation(self):
        om = OverlapMatrix((("meet", "meet", DISJOINT),))
        a = _inst(t_start=10.0, span=30.0)
        b = _inst(t_start=20.0, span=30.0, center=(10.0, 0.0))
        assert not check_overlap(Configuration((a, b)), om)
        far = _inst(t_start=20.0, span=30.0, center=(100.0, 0.0))
        assert check_overlap(Configuration((a, far)), om)
        later = _inst(t_start=41.0, span=30.0, center=(10.0, 0.0))
        assert check_overlap(Configuration((a, later)), om)

    def test_contains_requires_nesting(self):
        om = OverlapMatrix((("meet", "chat", CONTAINS),))
        outer = _inst(t_start=10.0, span=60.0)
        nested = ActivityInstance("chat", (0, 0), 10.0, 20.0, 20.0, frozenset(ACTORS))
        sticking_out = ActivityInstance("chat", (0, 0), 10.0, 60.0, 30.0, frozenset(ACTORS))
        assert check_overlap(Configuration((outer, nested)), om)
        assert not check_overlap(Configuration((outer, sticking_out)), om)


class TestDomainPrior:
    def test_inside_is_constant_outside_is_minus_inf(self):
        inside = instance_domain_log_prior(_inst(), DOMAIN)
        expected = -(math.log(100.0) + math.log(1000.0 * 1000.0) + math.log(1)
                     + math.log(math.comb(2, 2)))
        assert inside == pytest.approx(expected)
        assert instance_domain_log_prior(_inst(center=(900.0, 0.0)), DOMAIN) == -math.inf
        assert instance_domain_log_prior(_inst(t_start=-5.0), DOMAIN) == -math.inf


# ---------------------------------------------------------------------------
# the full score against a from-scratch monolithic oracle
# ---------------------------------------------------------------------------

def monolithic_score_oracle(config, data, ensembles, grid, types, overlap, params, domain):
    """Plain-loop re-implementation of the whole configuration score."""
    insts = config.instances
    # overlap
    for i in range(len(insts)):
        for j in range(i + 1, len(insts)):
            a, b = insts[i], insts[j]
            t_ov = min(a.t_end, b.t_end) - max(a.t_start, b.t_start) > 0
            for x, y in ((a, b), (b, a)):
                rel = overlap.relation(x.type_id, y.type_id)
                if rel == "disjoint" and t_ov:
                    if math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]) \
                            < a.radius + b.radius:
                        return -math.inf
                if rel == "contains" and t_ov:
                    if not (y.t_start >= x.t_start and y.t_end <= x.t_end):
                        return -math.inf

    n_draws = next(iter(ensembles.values())).shape[0]
    dt = grid[1] - grid[0]

    def pos(actor, d, t):
        arr = ensembles[actor][d]
        return (np.interp(t, grid, arr[:, 0]), np.interp(t, grid, arr[:, 1]))

    # coverage, log-mean-exp over draws
    per_draw = []
    for d in range(n_draws):
        uncovered = 0
        for o in data.observations:
            hit = False
            for inst in insts:
                if o.actor_id in inst.participants and inst.t_start <= o.t <= inst.t_end:
                    x, y = pos(o.actor_id, d, o.t)
                    if (x - inst.center[0])**2 + (y - inst.center[1])**2 <= inst.radius**2:
                        hit = True
                        break
            uncovered += 0 if hit else 1
        per_draw.append(-params.coverage_penalty * uncovered)
    m = max(per_draw)
    total = m + math.log(sum(math.exp(v - m) for v in per_draw) / n_draws)

    # per-instance terms
    for inst in insts:
        ty = types[inst.type_id]
        exps = []
        for d in range(n_draws):
            out_t = 0.0
            for p in sorted(inst.participants):
                for k, t in enumerate(grid):
                    w = max(0.0, min(t + dt / 2, inst.t_end) - max(t - dt / 2, inst.t_start))
                    if w <= 0:
                        continue
                    arr = ensembles[p][d]
                    if (arr[k, 0] - inst.center[0])**2 + (arr[k, 1] - inst.center[1])**2 \
                            > inst.radius**2:
                        out_t += w
            exps.append(-ty.excursion_rate_per_s * out_t)
        mm = max(exps)
        total += mm + math.log(sum(math.exp(v - mm) for v in exps) / n_draws)

        for v, med, s in ((inst.span, ty.span_median_s, ty.span_log_std),
                          (inst.radius, ty.radius_median_m, ty.radius_log_std)):
            z = (math.log(v) - math.log(med)) / s
            total += -math.log(v * s) - 0.5 * (math.log(2 * math.pi) + z * z)
        k = len(inst.participants)
        phi = lambda z: 0.5 * (1 + math.erf(z / math.sqrt(2)))
        zf = lambda v: (math.log(v) - math.log(ty.participants_median)) / ty.participants_log_std
        total += math.log((phi(zf(k + 0.5)) - phi(zf(k - 0.5))) / (1 - phi(zf(1.5))))
        total += domain.log_prior(inst)

        # faces
        minutes = inst.span / 60.0
        for ai, actor in enumerate(data.actors):
            lam = (ty.face_rate_participant_per_min if actor in inst.participants
                   else ty.face_rate_nonparticipant_per_min) * minutes
            count = sum(1 for det in data.faces
                        if det.detected_id == actor and det.observer in inst.participants
                        and inst.t_start <= det.t <= inst.t_end)
            total += count * math.log(lam) - lam - math.log(math.factorial(count))

    # scene: a frame is claimable when the actor's mean position lies within
    # radius + 2 sigma + 10 m of the center; the nearest claimant wins
    for f in data.frames:
        arr = ensembles[f.actor_id]
        mean_path = arr.mean(axis=0)
        fx = np.interp(f.t, grid, mean_path[:, 0])
        fy = np.interp(f.t, grid, mean_path[:, 1])
        var_path = arr.var(axis=0).mean(axis=1)
        sig = math.sqrt(np.interp(f.t, grid, var_path))
        best = None
        for order, inst in enumerate(insts):
            if f.actor_id in inst.participants and inst.t_start <= f.t <= inst.t_end:
                d2 = (fx - inst.center[0])**2 + (fy - inst.center[1])**2
                gate = inst.radius + 2.0 * sig + 10.0
                if d2 > gate * gate:
                    continue
                key = (d2, inst.t_start, order)
                if best is None or key < best[0]:
                    best = (key, inst)
        if best is None:
            mean, var = params.background_mean, params.background_var
        else:
            ty = types[best[1].type_id]
            mean, var = ty.feature_mean, ty.feature_var
        for xi, mu, s2 in zip(f.features, mean, var):
            total += -0.5 * (math.log(2 * math.pi * s2) + (xi - mu)**2 / s2)
    return total


def _random_problem(seed):
    rng = np.random.default_rng(seed)
    g = len(GRID)
    ens = {a: rng.normal(0, 60, size=(3, g, 2)) for a in ACTORS}
    obs = _obs("a", rng.uniform(0, 100, 6)) + _obs("b", rng.uniform(0, 100, 5))
    frames = tuple(FrameRecord(a, float(t), tuple(rng.normal(0, 1.5, 2)))
                   for a in ACTORS for t in rng.uniform(0, 100, 4))
    faces = tuple(FaceDetection(rng.choice(ACTORS), float(rng.uniform(0, 100)),
                                str(rng.choice(ACTORS)))
                  for _ in range(6))
    data = ModelData(actors=ACTORS, observations=tuple(obs), frames=frames, faces=faces)
    n_inst = int(rng.integers(0, 4))
    insts = []
    for _ in range(n_inst):
        t0 = float(rng.uniform(0, 80))
        insts.append(ActivityInstance(
            "meet", (float(rng.uniform(-80, 80)), float(rng.uniform(-80, 80))),
            float(rng.uniform(15, 60)), t0, float(rng.uniform(10, 100.0 - t0 + 5)),
            frozenset(ACTORS)))
    return data, ens, Configuration(tuple(insts))


class TestConfigLogProb:
    def test_decomposition_identity(self):
        data, ens, config = _random_problem(11)
        total = config_log_prob(config, data, ens, GRID, TYPES, OverlapMatrix(), PARAMS, DOMAIN)
        # sum of the individual public factor operations on the same inputs
        parts = 0.0
        per_draw = [coverage_log_factor(config, data.observations,
                                        {a: ens[a][d] for a in ACTORS}, GRID,
                                        PARAMS.coverage_penalty)
                    for d in range(3)]
        parts += log_mean_exp(np.array(per_draw))
        for inst in config.instances:
            parts += presence_log_factor(inst, TYPE.excursion_rate_per_s, ens, GRID)
            parts += span_radius_log_prior(inst, TYPE)
            parts += instance_domain_log_prior(inst, DOMAIN)
        parts += scene_log_factor(data.frames, config, TYPES, PARAMS,
                                  ensembles=ens, grid_times=GRID)
        parts += face_count_log_factor(data.faces, config, TYPES, ACTORS)
        assert total == pytest.approx(parts, abs=1e-10)

    def test_empty_config_only_coverage_survives(self):
        data, ens, _ = _random_problem(12)
        data = ModelData(actors=ACTORS, observations=data.observations)
        total = config_log_prob(Configuration(), data, ens, GRID, TYPES, OverlapMatrix(),
                                PARAMS, DOMAIN)
        assert total == pytest.approx(-PARAMS.coverage_penalty * len(data.observations))

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_monolithic_oracle(self, seed):
        data, ens, config = _random_problem(100 + seed)
        total = config_log_prob(config, data, ens, GRID, TYPES, OverlapMatrix(), PARAMS, DOMAIN)
        oracle = monolithic_score_oracle(config, data, ens, GRID, TYPES, OverlapMatrix(),
                                         PARAMS, DOMAIN)
        assert total == pytest.approx(oracle, abs=1e-9)

    def test_overlap_violation_is_minus_inf(self):
        data, ens, _ = _random_problem(13)
        om = OverlapMatrix((("meet", "meet", DISJOINT),))
        a = _inst(t_start=10.0, span=30.0)
        b = _inst(t_start=15.0, span=30.0, center=(5.0, 5.0))
        total = config_log_prob(Configuration((a, b)), data, ens, GRID, TYPES, om, PARAMS, DOMAIN)
        assert total == -math.inf


class TestFacePosterior:
    ACTORS3 = ("a", "b", "c")

    def test_no_covering_activity_returns_normalized_scores(self):
        det = FaceDetection("a", 50.0, None, (2.0, 0.0, -1.0))
        post = face_identity_posterior(det, [Configuration()], self.ACTORS3)
        exp = np.exp([2.0, 0.0, -1.0])
        assert np.allclose(post, exp / exp.sum())

    def test_epsilon_zero_restricts_support(self):
        inst = _inst(t_start=40.0, span=20.0, participants=("a", "b"))
        det = FaceDetection("a", 50.0, None, (0.0, 0.0, 0.0))
        post = face_identity_posterior(det, [Configuration((inst,))], self.ACTORS3,
                                       epsilon=0.0)
        assert np.allclose(post, [0.5, 0.5, 0.0])

    def test_flip_margin_matches_bayes_oracle(self):
        # classifier favors non-participant c over participant b by margin m;
        # the posterior flips to b exactly when log((1/2)/eps) > m
        inst = _inst(t_start=40.0, span=20.0, participants=("a", "b"))
        eps = 0.01
        for margin in (2.0, 3.5, 4.5, 6.0):
            det = FaceDetection("a", 50.0, None, (0.0, 0.0, margin))
            post = face_identity_posterior(det, [Configuration((inst,))], self.ACTORS3,
                                           epsilon=eps)
            flips = math.log((0.5) / eps) > margin
            assert (post[1] > post[2]) == flips
            # direct Bayes computation
            prior = np.array([0.5, 0.5, eps])
            lik = np.exp(np.array([0.0, 0.0, margin]))
            manual = prior * lik
            manual /= manual.sum()
            assert np.allclose(post, manual)

    def test_averages_over_samples(self):
        inst = _inst(t_start=40.0, span=20.0, participants=("a", "b"))
        det = FaceDetection("a", 50.0, None, (0.0, 0.0, 0.0))
        post = face_identity_posterior(det, [Configuration((inst,)), Configuration()],
                                       self.ACTORS3, epsilon=0.0)
        flat = np.full(3, 1 / 3)
        restricted = np.array([0.5, 0.5, 0.0])
        assert np.allclose(post, (flat + restricted) / 2)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
    def test_posterior_is_a_distribution(self, s1, s2, s3):
        inst = _inst(t_start=40.0, span=20.0, participants=("a", "b"))
        det = FaceDetection("b", 45.0, None, (s1, s2, s3))
        post = face_identity_posterior(det, [Configuration((inst,))], self.ACTORS3)
        assert post.sum() == pytest.approx(1.0)
        assert np.all(post >= 0) and np.all(post <= 1)

    def test_missing_scores_is_error(self):
        det = FaceDetection("a", 50.0, "b", None)
        with pytest.raises(ValueError):
            face_identity_posterior(det, [Configuration()], self.ACTORS3)
