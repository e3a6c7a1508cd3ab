"""Linear transceiver design for multi-user two-way MIMO relaying."""

from .model import (ChannelSet, ModelError, StreamId, SystemConfig, TransceiverSet, DL, UL,
                    min_weighted_sinr, sample_channels, sinr_vectors, sum_rate)
from .stage_one import StageOneResult, stage_one_search
from .stage_two import BisectionConfig, StageTwoResult, alternating_optimization, design_transceivers
from .baselines import BaselineKind, baseline_channel_inversion, baseline_sdma

__version__ = "0.1.0"

__all__ = [
    "ChannelSet", "ModelError", "StreamId", "SystemConfig", "TransceiverSet", "DL", "UL",
    "min_weighted_sinr", "sample_channels", "sinr_vectors", "sum_rate",
    "StageOneResult", "stage_one_search",
    "BisectionConfig", "StageTwoResult", "alternating_optimization", "design_transceivers",
    "BaselineKind", "baseline_channel_inversion", "baseline_sdma",
]
