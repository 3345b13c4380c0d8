"""Python access to the ensim machine model, reference simulator and analysis."""

import json

from ._core import (
    HardwareError,
    IoError,
    KineticsError,
    Network,
    NeuronParams,
    SchedulingError,
    SpecError,
    build_network,
    canonical_model,
    energy_per_event_uj,
    lif_step,
    manifest,
    max_sync_skew_us,
    run_manifest,
    scale_energy_kwh,
    simulate_hardware,
    simulate_oracle,
)
from ._core import firing_stats_json as _firing_stats_json


def firing_stats(trace_text, discard_ms=0.0, bin_ms=2.0, sample=200, seed=1):
    """Rates, CV-ISI and binned correlations of a trace as a dict."""
    return json.loads(_firing_stats_json(trace_text, discard_ms, bin_ms, sample, seed))


__all__ = [
    "HardwareError",
    "IoError",
    "KineticsError",
    "Network",
    "NeuronParams",
    "SchedulingError",
    "SpecError",
    "build_network",
    "canonical_model",
    "energy_per_event_uj",
    "firing_stats",
    "lif_step",
    "manifest",
    "max_sync_skew_us",
    "run_manifest",
    "scale_energy_kwh",
    "simulate_hardware",
    "simulate_oracle",
]
