"""Collaborative activity inference from multi-actor GPS and egocentric
feature streams: GP trajectory regression, RJ-MCMC over activity
configurations, activity-conditioned localization, identity correction and
activity-aware summarization."""

__version__ = "0.1.0"

from .errors import ConfigurationError, DataError, NumericalError
from .gp import (AuxObservationSet, GpHyperParams, GpPosterior, GpsObservation, TimeGrid,
                 TrajectoryEnsemble, build_aux_constraints, build_gp, condition_on_activities,
                 condition_on_activity, kernel_matrix, log_density, sample_trajectories,
                 stack_posteriors)
from .model import (ActivityInstance, ActivityType, Configuration, DiscreteInstanceSpace,
                    FaceDetection, FactorEngine, FrameRecord, InstanceDomain, ModelData,
                    ModelParams, OverlapMatrix, check_overlap, clamped_count_log_pmf,
                    config_log_prob, coverage_log_factor, face_count_log_factor,
                    face_identity_posterior, instance_domain_log_prior, log_mean_exp,
                    lognormal_logpdf, participant_count_log_pmf, presence_log_factor,
                    scene_log_factor, span_radius_log_prior)
from .sampler import (ChainSamples, ConfigSample, MoveKind, Proposal, SamplerConfig, accept,
                      propose, run_chain)
from .localization import LocalizationPosterior, localize, uncertainty_report
from .synthetic import (EvalReport, ScenarioConfig, SweepCell, SweepCurve, SyntheticDataset,
                        cylinder_iou, evaluate, generate, greedy_match, inject_denial,
                        sweep_location_std, thread_budget)
from .summarize import (FrameDistanceWeights, MapPlacement, Summary, SummaryFrame,
                        TrellisContext, TrellisWeights, activity_votes, build_trellis_context,
                        edge_cost, frame_distance, frame_distance_matrix, map_summary,
                        node_cost, select_keyframes, summarize_video)
