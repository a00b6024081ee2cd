"""Acoustic relations for a two-reflector pulse-echo sensing channel.

The sensor fires a short ultrasonic burst along a base of known length
terminated by two reflectors.  The first reflector is semitransparent: part
of the burst reflects back (near echo), the rest continues to the second
reflector and returns (far echo).  Sound speed comes from the round-trip
time difference between the echoes; the attenuation coefficient comes from
their amplitude ratio after compensating the first reflector's transmission.

All functions are scalar and unit-explicit: SI units unless stated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import CONSTANTS
from .errors import DomainError

#: multiply an amplitude attenuation coefficient in Np/m by this to get dB/m
NEPER_TO_DB = 20.0 / math.log(10.0)


@dataclass(frozen=True)
class ReflectorMaterial:
    """Bulk properties of a reflector used for impedance calculations."""

    name: str
    density: float      # kg/m^3
    sound_speed: float  # m/s


#: default reflector stock used in the sensor head
STAINLESS_STEEL = ReflectorMaterial("stainless steel", 7900.0, 5790.0)


@dataclass(frozen=True)
class MediumState:
    """State of the water column the sensor is immersed in.

    `sound_speed` is optional: synthesis scenarios must provide it, while a
    record produced by the instrument carries the measured value instead.
    """

    temperature: float            # deg C
    pressure: float               # kPa, absolute
    density: float                # kg/m^3
    sound_speed: float | None = None  # m/s

    def __post_init__(self):
        if not self.density > 0.0:
            raise DomainError(f"density must be positive, got {self.density}")
        if self.sound_speed is not None and not self.sound_speed > 0.0:
            raise DomainError(f"sound speed must be positive, got {self.sound_speed}")


@dataclass(frozen=True)
class RangeBounds:
    """Validation bounds applied to measured records (not to inputs)."""

    sound_speed_min: float = CONSTANTS.valid_sound_speed_range[0]
    sound_speed_max: float = CONSTANTS.valid_sound_speed_range[1]
    temperature_min: float = CONSTANTS.valid_temperature_range[0]
    temperature_max: float = CONSTANTS.valid_temperature_range[1]
    pressure_min: float = CONSTANTS.valid_pressure_range[0]
    pressure_max: float = CONSTANTS.valid_pressure_range[1]

    def __post_init__(self):
        for low, high in (
            (self.sound_speed_min, self.sound_speed_max),
            (self.temperature_min, self.temperature_max),
            (self.pressure_min, self.pressure_max),
        ):
            if not low < high:
                raise DomainError(f"empty validation range [{low}, {high}]")


DEFAULT_BOUNDS = RangeBounds()


@dataclass(frozen=True)
class ValidityReport:
    """Outcome of range-checking one record against `RangeBounds`."""

    sound_speed_ok: bool
    temperature_ok: bool
    pressure_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.sound_speed_ok and self.temperature_ok and self.pressure_ok


def acoustic_impedance(density: float, sound_speed: float) -> float:
    """Characteristic acoustic impedance z = rho * c.

    Parameters
    ----------
    density : kg/m^3, must be > 0
    sound_speed : m/s, must be > 0

    Returns
    -------
    impedance : Pa*s/m (rayl)
    """
    if not density > 0.0:
        raise DomainError(f"density must be positive, got {density}")
    if not sound_speed > 0.0:
        raise DomainError(f"sound speed must be positive, got {sound_speed}")
    return density * sound_speed


def reflection_coefficient(z_medium: float, z_reflector: float) -> float:
    """Pressure reflection coefficient at normal incidence, seen from the medium.

    k = (z_medium - z_reflector) / (z_medium + z_reflector); the sign carries
    the phase inversion when reflecting off the stiffer material.  |k| < 1
    whenever both impedances are positive.
    """
    if not z_medium > 0.0 or not z_reflector > 0.0:
        raise DomainError(
            f"impedances must be positive, got {z_medium}, {z_reflector}"
        )
    return (z_medium - z_reflector) / (z_medium + z_reflector)


def reflection_magnitude(z_medium: float, z_reflector: float) -> float:
    """|k| of `reflection_coefficient`; what amplitude budgets actually use."""
    return abs(reflection_coefficient(z_medium, z_reflector))


def sound_speed_from_tof(delta_t: float, base_length: float) -> float:
    """Sound speed from the echo-pair time difference over the sensor base.

    The near and far echoes both traverse the offset to the first reflector,
    so their time difference is the round trip of the base alone:
    c = 2 * base_length / delta_t.

    Parameters
    ----------
    delta_t : s, far-echo time minus near-echo time, must be > 0
    base_length : m, first-to-second reflector spacing, must be > 0
    """
    if not delta_t > 0.0:
        raise DomainError(f"delta_t must be positive, got {delta_t}")
    if not base_length > 0.0:
        raise DomainError(f"base_length must be positive, got {base_length}")
    return 2.0 * base_length / delta_t


def time_of_flight(sound_speed: float, path_length: float) -> float:
    """Round-trip time 2 * path_length / c for a reflector at `path_length`."""
    if not sound_speed > 0.0:
        raise DomainError(f"sound speed must be positive, got {sound_speed}")
    if not path_length >= 0.0:
        raise DomainError(f"path_length must be >= 0, got {path_length}")
    return 2.0 * path_length / sound_speed


def attenuation_coefficient(u_near: float, u_far: float, base_length: float) -> float:
    """Amplitude attenuation coefficient from the corrected echo amplitudes.

    The far echo travels one extra round trip of the base relative to the
    near echo, so with u_near already corrected for the first reflector's
    transmission, alpha = ln(u_near / u_far) / (2 * base_length) in Np/m.
    Positive alpha means decay; equal amplitudes give exactly 0.

    Parameters
    ----------
    u_near : linear amplitude units (any, must match u_far), > 0
    u_far : same units as u_near, > 0
    base_length : m, > 0
    """
    if not u_near > 0.0 or not u_far > 0.0:
        raise DomainError(f"amplitudes must be positive, got {u_near}, {u_far}")
    if not base_length > 0.0:
        raise DomainError(f"base_length must be positive, got {base_length}")
    return math.log(u_near / u_far) / (2.0 * base_length)


def neper_to_db(alpha_np: float) -> float:
    """Convert an amplitude attenuation coefficient from Np/m to dB/m."""
    return alpha_np * NEPER_TO_DB


def pure_water_sound_speed(temperature: float) -> float:
    """Reference sound speed of pure water at atmospheric pressure.

    Fifth-degree polynomial in temperature; used as the calibration
    reference for the instrument.  Valid on the table's stated domain
    (0..95 deg C); outside it the polynomial is meaningless and we refuse.

    Parameters
    ----------
    temperature : deg C

    Returns
    -------
    sound_speed : m/s
    """
    t_min, t_max = CONSTANTS.pure_water_t_range
    if not t_min <= temperature <= t_max:
        raise DomainError(
            f"temperature {temperature} outside polynomial domain [{t_min}, {t_max}]"
        )
    # Horner evaluation, highest power first.
    acc = 0.0
    for coeff in reversed(CONSTANTS.pure_water_coefficients):
        acc = acc * temperature + coeff
    return acc


def validate_record(record, bounds: RangeBounds | None = None) -> ValidityReport:
    """Range-check a measured record; out-of-range values are flagged, not rejected.

    `record` is anything with sound_speed, temperature and pressure
    attributes.  NaNs compare false and therefore flag as out of range.
    """
    b = bounds if bounds is not None else DEFAULT_BOUNDS
    return ValidityReport(
        sound_speed_ok=bool(b.sound_speed_min <= record.sound_speed <= b.sound_speed_max),
        temperature_ok=bool(b.temperature_min <= record.temperature <= b.temperature_max),
        pressure_ok=bool(b.pressure_min <= record.pressure <= b.pressure_max),
    )
