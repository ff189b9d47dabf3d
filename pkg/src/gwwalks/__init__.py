"""Biased, once-reinforced and vertex-reinforced walks on Galton-Watson trees."""

__version__ = "0.1.0"

from .episode import EpisodeRecord, Outcome, StopCondition
from .gwtree import ROOT, OffspringDistribution, TreeSampler, VertexId, extinction_probability, offspring_mean
from .mc import Caps, Estimate, TrialSpec, estimate_embedded_offspring, estimate_escape_probability, estimate_return_time, sweep
from .vrjp import VrjpEvent, VrjpState, jump_rates, next_event, run_vrjp_episode
from .walks import BiasedParams, OrrwParams, OrrwState, WalkState, advance, biased_transition, orrw_transition, run_episode

__all__ = [
    "BiasedParams",
    "Caps",
    "EpisodeRecord",
    "Estimate",
    "OffspringDistribution",
    "OrrwParams",
    "OrrwState",
    "Outcome",
    "ROOT",
    "StopCondition",
    "TreeSampler",
    "TrialSpec",
    "VertexId",
    "VrjpEvent",
    "VrjpState",
    "WalkState",
    "advance",
    "biased_transition",
    "estimate_embedded_offspring",
    "estimate_escape_probability",
    "estimate_return_time",
    "extinction_probability",
    "jump_rates",
    "next_event",
    "offspring_mean",
    "orrw_transition",
    "run_episode",
    "run_vrjp_episode",
    "sweep",
]
