"""Simulation of the classical post-processing stack."""

from .bits import BitString, generator, sample_bsc_pair
from .distill import ADStats, L1Region, PEResult, advantage_distill, advantage_distill_block, parameter_estimate
from .hashing import HashFunction, PAResult, apply_hash, pa_distance_exhaustive, privacy_amplify, sample_hash
from .pipeline import PipelineConfig, PipelineWarning, admissible_length, report_json, run_pipeline
from .reconciliation import (
    ExtendedHammingCode,
    IRTranscript,
    ReconciliationAbort,
    RepetitionCode,
    ball_radius,
    ball_size,
    hash_failure_bound,
    hash_length,
    ir_code_decode,
    ir_code_encode,
    ir_hash_decode,
    ir_hash_encode,
    make_code,
)

__all__ = [
    "ADStats",
    "BitString",
    "ExtendedHammingCode",
    "HashFunction",
    "IRTranscript",
    "L1Region",
    "PAResult",
    "PEResult",
    "PipelineConfig",
    "PipelineWarning",
    "ReconciliationAbort",
    "RepetitionCode",
    "admissible_length",
    "advantage_distill",
    "advantage_distill_block",
    "apply_hash",
    "ball_radius",
    "ball_size",
    "generator",
    "hash_failure_bound",
    "hash_length",
    "ir_code_decode",
    "ir_code_encode",
    "ir_hash_decode",
    "ir_hash_encode",
    "make_code",
    "pa_distance_exhaustive",
    "parameter_estimate",
    "privacy_amplify",
    "report_json",
    "run_pipeline",
    "sample_bsc_pair",
    "sample_hash",
]
