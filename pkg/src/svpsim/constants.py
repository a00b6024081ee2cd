"""Instrument reference constants, loaded from a key=value table.

The numbers live in data/instrument_constants.txt rather than in code so the
calibration table can be diffed and swapped without touching the library.
`CONSTANTS` is the module-level singleton everyone imports.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from . import config
from .errors import ConfigError

_DEFAULT_PATH = Path(__file__).parent / "data" / "instrument_constants.txt"


@dataclass(frozen=True)
class InstrumentConstants:
    pure_water_coefficients: tuple[float, ...]  # polynomial k_i, ascending powers of T
    pure_water_t_range: tuple[float, float]     # deg C, domain of the polynomial
    sensor_sound_speed_range: tuple[float, float]  # m/s, design span of the channel
    valid_sound_speed_range: tuple[float, float]   # m/s, record validation bounds
    valid_temperature_range: tuple[float, float]   # deg C
    valid_pressure_range: tuple[float, float]      # kPa
    base_length_m: float
    carrier_frequency_hz: float
    cycle_rate_hz: float
    sound_speed_static_error: float  # m/s
    comparator_threshold_max_mv: int
    v_cal_mv: float


def load_constants(path: str | os.PathLike | None = None) -> InstrumentConstants:
    cfg = config.parse_kv_file(path if path is not None else _DEFAULT_PATH)
    coeffs = tuple(
        config.get_float(cfg, f"pure_water_c{i}") for i in range(6)
    )
    consts = InstrumentConstants(
        pure_water_coefficients=coeffs,
        pure_water_t_range=(
            config.get_float(cfg, "pure_water_t_min"),
            config.get_float(cfg, "pure_water_t_max"),
        ),
        sensor_sound_speed_range=(
            config.get_float(cfg, "sensor_sound_speed_min"),
            config.get_float(cfg, "sensor_sound_speed_max"),
        ),
        valid_sound_speed_range=(
            config.get_float(cfg, "valid_sound_speed_min"),
            config.get_float(cfg, "valid_sound_speed_max"),
        ),
        valid_temperature_range=(
            config.get_float(cfg, "valid_temperature_min"),
            config.get_float(cfg, "valid_temperature_max"),
        ),
        valid_pressure_range=(
            config.get_float(cfg, "valid_pressure_min"),
            config.get_float(cfg, "valid_pressure_max"),
        ),
        base_length_m=config.get_float(cfg, "base_length_m"),
        carrier_frequency_hz=config.get_float(cfg, "carrier_frequency_hz"),
        cycle_rate_hz=config.get_float(cfg, "cycle_rate_hz"),
        sound_speed_static_error=config.get_float(cfg, "sound_speed_static_error"),
        comparator_threshold_max_mv=config.get_int(cfg, "comparator_threshold_max_mv"),
        v_cal_mv=config.get_float(cfg, "v_cal_mv"),
    )
    for lo, hi, name in (
        (*consts.pure_water_t_range, "pure_water_t"),
        (*consts.sensor_sound_speed_range, "sensor_sound_speed"),
        (*consts.valid_sound_speed_range, "valid_sound_speed"),
        (*consts.valid_temperature_range, "valid_temperature"),
        (*consts.valid_pressure_range, "valid_pressure"),
    ):
        if not lo < hi:
            raise ConfigError(f"{name} range is empty: [{lo}, {hi}]")
    return consts


CONSTANTS = load_constants()
