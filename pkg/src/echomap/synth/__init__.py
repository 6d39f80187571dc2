"""Synthetic surveys and brute-force reference implementations."""

from .oracles import brute_force_backproject_oracle, naive_dft_oracle
from .scenario import (
    GroundTruth,
    PipeSegment,
    ScenarioConfig,
    generate_scenario,
    paper_mirror_config,
    pipe_geometry,
    preset_config,
    point_segment_distance,
    read_ground_truth_csv,
    write_ground_truth_csv,
)
from .waves import WaveConfig, generate_impact_wave, wave_pair

__all__ = [
    "GroundTruth",
    "PipeSegment",
    "ScenarioConfig",
    "WaveConfig",
    "brute_force_backproject_oracle",
    "generate_impact_wave",
    "generate_scenario",
    "naive_dft_oracle",
    "paper_mirror_config",
    "pipe_geometry",
    "point_segment_distance",
    "preset_config",
    "read_ground_truth_csv",
    "wave_pair",
    "write_ground_truth_csv",
]
