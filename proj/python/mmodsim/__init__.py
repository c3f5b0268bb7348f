"""Dual-layer orbital-debris impact sensor simulator.

Thin wrapper around the C++ core. The heavy lifting (waveform synthesis,
the acquisition chain, multilateration, the campaign loop) all lives in
the `_core` extension; this package just re-exports it.
"""

from ._core import (  # noqa: F401
    crc32,
    default_config_json,
    energy_arrival_time,
    enob_from_sinad,
    mix_seed,
    multilaterate,
    regress_loglinear,
    run_campaign,
    single_tone_metrics,
    solve_impact,
    subgrid_resistance,
    traces_intersected,
)

__all__ = [
    "crc32",
    "default_config_json",
    "energy_arrival_time",
    "enob_from_sinad",
    "mix_seed",
    "multilaterate",
    "regress_loglinear",
    "run_campaign",
    "single_tone_metrics",
    "solve_impact",
    "subgrid_resistance",
    "traces_intersected",
]
