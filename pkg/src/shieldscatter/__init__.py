"""Backscatter-assisted authentication of wireless IoT messages.

A handful of backscatter tags near the access point modulate the user's
signal with an alternating bit pattern. Two messages from the same
location carry near-identical tag imprints, so comparing the imprints of a
reference and a suspect message (via chunked DTW) and feeding the result
to a one-class SVM separates the legitimate user from a distant attacker.
"""

__version__ = "0.1.0"

from .channel import SceneConfig, Source, TagSchedule, Trace, synthesize_trace
from .errors import (
    ConfigError,
    DomainError,
    NoBackscatterDetected,
    ScenarioError,
    SegmentTooShort,
    ShieldScatterError,
    SolverError,
)
from .features import FeatureSet, extract_features
from .guard import Scenario, ScenarioConfig, evaluate_batch, run_scenario
from .ocsvm import OcsvmConfig, OcsvmModel, decide, train
from .profile import PROFILE_SIZE, ProfileVector, build_profile, chunked_dtw, dtw_distance
from .segmenter import Segment, SegmenterConfig, segment

__all__ = [
    "SceneConfig", "Source", "TagSchedule", "Trace", "synthesize_trace",
    "ConfigError", "DomainError", "NoBackscatterDetected", "ScenarioError",
    "SegmentTooShort", "ShieldScatterError", "SolverError",
    "FeatureSet", "extract_features",
    "Scenario", "ScenarioConfig", "evaluate_batch", "run_scenario",
    "OcsvmConfig", "OcsvmModel", "decide", "train",
    "PROFILE_SIZE", "ProfileVector", "build_profile", "chunked_dtw", "dtw_distance",
    "Segment", "SegmenterConfig", "segment",
]
