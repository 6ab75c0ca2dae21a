"""Structured compressive-sensing channel estimation for FDD massive MIMO."""

from .channel_model import (
    ChannelBlock,
    ChannelSpec,
    PowerDelayProfile,
    doppler_from_speed,
    generate_channel,
)
from .errors import ConfigError, InvalidArgumentError, InvalidSpecError, SingularSystemError
from .harness import ExperimentConfig, ResultRecord, emit_csv, load_config, p_th_for_snr, run
from .link_sim import GroupConfig, LinkConfig, ber_eval, estimate_grouped, measure
from .pilots import PilotConfig, SensingMatrix, assemble_sensing, coherence_stats, srip_probe
from .recovery import RecoveryResult, StopConfig, Termination, asp, assp, oracle_assp, oracle_ls

__all__ = [
    "ChannelBlock", "ChannelSpec", "PowerDelayProfile", "doppler_from_speed", "generate_channel",
    "ConfigError", "InvalidArgumentError", "InvalidSpecError", "SingularSystemError",
    "ExperimentConfig", "ResultRecord", "emit_csv", "load_config", "p_th_for_snr", "run",
    "GroupConfig", "LinkConfig", "ber_eval", "estimate_grouped", "measure",
    "PilotConfig", "SensingMatrix", "assemble_sensing", "coherence_stats", "srip_probe",
    "RecoveryResult", "StopConfig", "Termination", "asp", "assp", "oracle_assp", "oracle_ls",
]
__version__ = "0.1.0"
