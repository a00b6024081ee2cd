"""Echo waveform synthesis and the plain-text waveform file format.

A synthesized record contains two tone bursts on a noise floor: the near
echo off the semitransparent first reflector and the far echo off the
second reflector.  Timing and amplitudes follow the scenario's physics, so
the generated array doubles as ground truth for the measurement chain.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import acoustics
from .acoustics import MediumState, ReflectorMaterial, STAINLESS_STEEL
from .errors import DomainError, ScenarioError, WaveformParseError

#: minimum oversampling of the carrier accepted by `synthesize`
MIN_SAMPLES_PER_PERIOD = 20

#: quiet tail appended after the far echo, in carrier periods
TAIL_CYCLES = 16


@dataclass(frozen=True)
class SensorGeometry:
    """Fixed geometry and electro-acoustic constants of the sensor head."""

    base_length: float = 0.06              # m, first-to-second reflector spacing
    first_reflector_offset: float = 0.01   # m, transducer-to-first-reflector spacing
    carrier_frequency: float = 2.0e6       # Hz
    first_reflector_transmission: float = 0.5  # one-way amplitude transmission, (0, 1]
    reflector_material: ReflectorMaterial = STAINLESS_STEEL

    def __post_init__(self):
        if not self.base_length > 0.0:
            raise DomainError(f"base_length must be positive, got {self.base_length}")
        if not self.first_reflector_offset >= 0.0:
            raise DomainError(
                f"first_reflector_offset must be >= 0, got {self.first_reflector_offset}"
            )
        if not self.carrier_frequency > 0.0:
            raise DomainError(
                f"carrier_frequency must be positive, got {self.carrier_frequency}"
            )
        if not 0.0 < self.first_reflector_transmission <= 1.0:
            raise DomainError(
                "first_reflector_transmission must be in (0, 1], got "
                f"{self.first_reflector_transmission}"
            )


class Waveform:
    """Uniformly sampled voltage trace.  samples: mV, sample_rate: Hz, t0: s."""

    __slots__ = ("samples", "sample_rate", "t0")

    def __init__(self, samples, sample_rate: float, t0: float = 0.0):
        arr = np.asarray(samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise DomainError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(arr)):
            raise DomainError("samples must be finite")
        if not sample_rate > 0.0:
            raise DomainError(f"sample_rate must be positive, got {sample_rate}")
        self.samples = arr
        self.sample_rate = float(sample_rate)
        self.t0 = float(t0)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def time_axis(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.sample_rate


@dataclass(frozen=True)
class GroundTruth:
    """What the synthesizer actually put into the array, for later comparison."""

    t_near: float      # s, arrival of the near-echo burst leading edge
    t_far: float       # s, arrival of the far-echo burst leading edge
    a_near: float      # mV, near-echo peak amplitude
    a_far: float       # mV, far-echo peak amplitude
    sound_speed: float  # m/s
    attenuation: float  # Np/m


@dataclass(frozen=True)
class SynthesisScenario:
    """Everything needed to synthesize one deterministic echo record."""

    geometry: SensorGeometry = field(default_factory=SensorGeometry)
    medium: MediumState = MediumState(
        temperature=20.0, pressure=101.325, density=998.2, sound_speed=1482.3433
    )
    attenuation: float = 0.0       # Np/m, amplitude attenuation of the water
    emit_amplitude: float = 700.0  # mV, burst amplitude at the transducer
    burst_cycles: int = 8          # carrier periods under the envelope
    noise_rms: float = 0.0         # mV, additive white noise level
    seed: int = 0                  # RNG seed for the noise
    sample_rate: float = 100.0e6   # Hz

    def __post_init__(self):
        if not self.emit_amplitude > 0.0:
            raise ScenarioError(f"emit_amplitude must be positive, got {self.emit_amplitude}")
        if self.burst_cycles < 1:
            raise ScenarioError(f"burst_cycles must be >= 1, got {self.burst_cycles}")
        if not self.noise_rms >= 0.0:
            raise ScenarioError(f"noise_rms must be >= 0, got {self.noise_rms}")
        if not self.attenuation >= 0.0:
            raise ScenarioError(f"attenuation must be >= 0, got {self.attenuation}")


def _burst(t: np.ndarray, amplitude: float, t_on: float, frequency: float,
           cycles: int) -> np.ndarray:
    """Raised-cosine-enveloped tone burst starting at t_on.

    The carrier is a cosine under a sin^2 envelope: with an integer number
    of cycles the envelope maximum lands on a carrier extremum, so the peak
    array value equals `amplitude` up to sampling-grid error.
    """
    duration = cycles / frequency
    tau = t - t_on
    active = (tau >= 0.0) & (tau <= duration)
    out = np.zeros_like(t)
    tau_a = tau[active]
    envelope = np.sin(math.pi * tau_a / duration) ** 2
    out[active] = amplitude * envelope * np.cos(2.0 * math.pi * frequency * tau_a)
    return out


def synthesize(scenario: SynthesisScenario) -> tuple[Waveform, GroundTruth]:
    """Render a two-echo record plus its ground truth.

    Echo amplitudes follow the physics of the path: the near echo reflects
    off the first reflector (|k| of the water/reflector interface), the far
    echo additionally passes the first reflector twice (transmission^2) and
    travels an extra base round trip of attenuating water.

    Raises ScenarioError if the medium lacks a sound speed, the sample rate
    undersamples the carrier, or the echoes would overlap in time.
    """
    geo = scenario.geometry
    medium = scenario.medium
    if medium.sound_speed is None:
        raise ScenarioError("scenario medium must specify a sound speed")
    frequency = geo.carrier_frequency
    if scenario.sample_rate < MIN_SAMPLES_PER_PERIOD * frequency:
        raise ScenarioError(
            f"sample_rate {scenario.sample_rate:g} Hz undersamples the "
            f"{frequency:g} Hz carrier (need >= {MIN_SAMPLES_PER_PERIOD}x)"
        )

    c = medium.sound_speed
    path_near = geo.first_reflector_offset
    path_far = geo.first_reflector_offset + geo.base_length
    t_near = acoustics.time_of_flight(c, path_near)
    t_far = acoustics.time_of_flight(c, path_far)
    burst_duration = scenario.burst_cycles / frequency
    if t_far - t_near < burst_duration:
        raise ScenarioError(
            f"echoes overlap: spacing {t_far - t_near:g} s < burst {burst_duration:g} s"
        )

    z_medium = acoustics.acoustic_impedance(medium.density, c)
    z_reflector = acoustics.acoustic_impedance(
        geo.reflector_material.density, geo.reflector_material.sound_speed
    )
    k_mag = acoustics.reflection_magnitude(z_medium, z_reflector)
    alpha = scenario.attenuation
    transmission = geo.first_reflector_transmission
    a_near = scenario.emit_amplitude * k_mag * math.exp(-alpha * 2.0 * path_near)
    a_far = (
        scenario.emit_amplitude
        * transmission ** 2
        * k_mag
        * math.exp(-alpha * 2.0 * path_far)
    )

    n = math.ceil((t_far + burst_duration + TAIL_CYCLES / frequency) * scenario.sample_rate)
    t = np.arange(n) / scenario.sample_rate
    samples = _burst(t, a_near, t_near, frequency, scenario.burst_cycles)
    samples += _burst(t, a_far, t_far, frequency, scenario.burst_cycles)
    if scenario.noise_rms > 0.0:
        rng = np.random.default_rng(scenario.seed)
        samples += rng.normal(0.0, scenario.noise_rms, size=n)

    truth = GroundTruth(
        t_near=t_near,
        t_far=t_far,
        a_near=a_near,
        a_far=a_far,
        sound_speed=c,
        attenuation=alpha,
    )
    return Waveform(samples, scenario.sample_rate), truth


# --- waveform file format ---------------------------------------------------
#
#   # svpsim waveform v1
#   sample_rate = <Hz>
#   t0 = <s>
#   count = <N>
#   <sample 0>
#   ...
#   <sample N-1>

_MAGIC = "# svpsim waveform v1"


def write_waveform(wave: Waveform, path: str | os.PathLike) -> None:
    """Write a waveform as plain text; floats use repr so reads are lossless."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_MAGIC + "\n")
        fh.write(f"sample_rate = {wave.sample_rate!r}\n")
        fh.write(f"t0 = {wave.t0!r}\n")
        fh.write(f"count = {wave.samples.size}\n")
        fh.write("\n".join(repr(v) for v in wave.samples.tolist()))
        fh.write("\n")


def read_waveform(path: str | os.PathLike) -> Waveform:
    """Parse a waveform file, raising WaveformParseError with a line number."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != _MAGIC:
        raise WaveformParseError(f"missing magic header {_MAGIC!r}", line=1)

    header: dict[str, str] = {}
    for lineno in (2, 3, 4):
        if lineno - 1 >= len(lines):
            raise WaveformParseError("truncated header", line=lineno)
        line = lines[lineno - 1]
        if "=" not in line:
            raise WaveformParseError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        header[key] = value
    for key in ("sample_rate", "t0", "count"):
        if key not in header:
            raise WaveformParseError(f"missing header key {key!r}", line=4)

    try:
        sample_rate = float(header["sample_rate"])
        t0 = float(header["t0"])
        count = int(header["count"])
    except ValueError as exc:
        raise WaveformParseError(f"bad header value: {exc}", line=4) from exc

    values = np.empty(count, dtype=np.float64)
    for i in range(count):
        lineno = 5 + i
        if lineno - 1 >= len(lines):
            raise WaveformParseError(
                f"expected {count} samples, file ends after {i}", line=lineno
            )
        try:
            values[i] = float(lines[lineno - 1])
        except ValueError as exc:
            raise WaveformParseError(
                f"bad sample value {lines[lineno - 1]!r}", line=lineno
            ) from exc
        if not math.isfinite(values[i]):
            raise WaveformParseError(
                f"non-finite sample {lines[lineno - 1]!r}", line=lineno
            )
    extra = [ln for ln in lines[4 + count:] if ln.strip()]
    if extra:
        raise WaveformParseError(
            f"trailing data after {count} samples", line=5 + count
        )
    try:
        return Waveform(values, sample_rate, t0)
    except DomainError as exc:
        raise WaveformParseError(str(exc)) from exc
