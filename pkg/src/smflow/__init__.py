"""Coupled semi-Markov flows driven by a shared Poisson random measure."""

from .analytics import (
    AgeGrid,
    MeetScenario,
    MergeScenario,
    QuadratureConfig,
    markov_meet_prob,
    meet_next_prob,
    merge_inf_bound,
    merge_prob,
    merge_prob_limit_y0,
    moment_bound,
    never_meet_bound,
    not_meet_prob,
)
from .flow import ChainState, run_until_meeting, run_until_merge, simulate_pair, simulate_single
from .prm import PointEvent, ScriptedStream, SeededStream, substream
from .rates import A4Grid, Constant, PiecewiseConstant, RateMatrix, Saturating, validate

__version__ = "0.1.0"
