"""Behavioral model of the time/amplitude measurement front end.

Models the parts of the metering chain that shape the numbers the firmware
sees: a voltage comparator with a DAC-programmable threshold, a time-to-
digital converter that timestamps threshold crossings with a fixed LSB, a
first-wave-width discriminator, and a peak-hold amplitude channel read out
through a timed capacitor discharge.

Crossing times are recovered from the sampled trace by linear interpolation
between the bracketing samples, then quantized to the TDC LSB.  lsb=0 turns
quantization off (ideal converter), which the oracle tests rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import CONSTANTS
from .errors import (
    CalibrationError,
    DomainError,
    MeasurementError,
    NoTriggerError,
)
from .waveform import SensorGeometry, Waveform

#: TDC quantization step, s
DEFAULT_TDC_LSB = 90.0e-12

#: the amplitude readout starts its timed ramp once the peak-hold capacitor
#: has discharged to this fraction of the held peak
DISCHARGE_SETTLE_FRACTION = 0.7

#: crossings closer than this many carrier periods belong to the same echo
ECHO_GAP_PERIODS = 3.0


@dataclass(frozen=True)
class ComparatorConfig:
    """Trigger threshold, mV.  The DAC steps in integer millivolts."""

    threshold: int = 20

    def __post_init__(self):
        if not isinstance(self.threshold, int):
            raise DomainError(f"threshold must be an integer, got {self.threshold!r}")
        if not 0 <= self.threshold <= CONSTANTS.comparator_threshold_max_mv:
            raise DomainError(
                f"threshold must be in [0, {CONSTANTS.comparator_threshold_max_mv}] mV, "
                f"got {self.threshold}"
            )


@dataclass(frozen=True)
class Crossing:
    """One comparator edge: time in s, rising=True for a low-to-high edge."""

    time: float
    rising: bool


@dataclass(frozen=True)
class TdcMeasurement:
    """First-wave discriminator output for one trigger."""

    first_halfwave_width: float      # s, threshold-to-threshold width of the first wave
    reference_halfwave_width: float  # s, zero-crossing width one period later
    first_wave_ratio: float          # dimensionless, clamped to [0, 1]
    echo_times: tuple[float, ...]    # s, threshold-crossing trigger timestamps
    quantization: float              # s, TDC LSB in effect


@dataclass(frozen=True)
class AmplitudeCalibration:
    """Two-point calibration of the discharge-time amplitude channel.

    amc_h_ns and amc_l_ns are the discharge times measured against the
    reference voltage at the high and low calibration points; v_cal_mv is
    that reference.  Gradient/offset follow the two-point line fit.
    """

    amc_h_ns: float
    amc_l_ns: float
    v_cal_mv: float = CONSTANTS.v_cal_mv

    def __post_init__(self):
        if not self.amc_l_ns > 0.0:
            raise CalibrationError(f"amc_l_ns must be positive, got {self.amc_l_ns}")
        if not self.amc_h_ns > self.amc_l_ns:
            raise CalibrationError(
                f"amc_h_ns must exceed amc_l_ns, got {self.amc_h_ns} <= {self.amc_l_ns}"
            )
        if not self.v_cal_mv > 0.0:
            raise CalibrationError(f"v_cal_mv must be positive, got {self.v_cal_mv}")

    @property
    def gradient(self) -> float:
        """mV per ns of discharge time."""
        return self.v_cal_mv / (self.amc_h_ns - self.amc_l_ns)

    @property
    def offset(self) -> float:
        """mV; amplitude = gradient * discharge_ns - offset."""
        return (2.0 * self.amc_l_ns - self.amc_h_ns) * self.gradient


@dataclass(frozen=True)
class AmplitudeMeasurement:
    """Peak-hold readout of one echo window, both polarities."""

    am_up_ns: float    # discharge time for the positive peak
    am_down_ns: float  # discharge time for the negative peak
    v_up_mv: float     # calibrated positive peak
    v_down_mv: float   # calibrated negative peak


@dataclass(frozen=True)
class EchoPairMeasurement:
    """Joint timing/amplitude measurement of the near and far echoes."""

    delta_t: float                    # s, far mark minus near mark
    u_near: float                     # mV, raw near-echo positive peak
    u_far: float                      # mV, raw far-echo positive peak
    trigger_times: tuple[float, float]  # s, first rising crossing per echo
    mark_times: tuple[float, float]     # s, matched-phase timing marks
    amplitude_near: AmplitudeMeasurement
    amplitude_far: AmplitudeMeasurement


def amplitude_from_discharge(am_ns: float, cal: AmplitudeCalibration) -> float:
    """Convert a discharge time in ns to a peak amplitude in mV.

    V = gradient * AM - offset, the exact affine map fixed by the two-point
    calibration.  Pure arithmetic: no quantization, no domain clipping.
    """
    return cal.gradient * am_ns - cal.offset


def discharge_from_amplitude(v_mv: float, cal: AmplitudeCalibration) -> float:
    """Inverse of `amplitude_from_discharge`: AM = V/gradient + 2*AMC_L - AMC_H."""
    return v_mv / cal.gradient + 2.0 * cal.amc_l_ns - cal.amc_h_ns


def _quantize(value: float, lsb: float) -> float:
    return value if lsb <= 0.0 else round(value / lsb) * lsb


def detect_crossings(
    wave: Waveform,
    cfg: ComparatorConfig,
    arm_time: float = 0.0,
    lsb: float = DEFAULT_TDC_LSB,
) -> list[Crossing]:
    """All comparator edges at cfg.threshold from arm_time on, time-ordered.

    The comparator output is the predicate sample > threshold; an edge is a
    state change of that predicate between adjacent samples, so rising and
    falling edges alternate by construction.  Crossing times are linearly
    interpolated between the bracketing samples and quantized to `lsb`.
    Raises NoTriggerError when no edge exists after arm_time.
    """
    th = float(cfg.threshold)
    x = wave.samples
    dt = 1.0 / wave.sample_rate

    above = x > th
    idx = np.nonzero(above[:-1] != above[1:])[0]
    if idx.size == 0:
        raise NoTriggerError(f"no crossing of {cfg.threshold} mV")
    frac = (th - x[idx]) / (x[idx + 1] - x[idx])
    times = wave.t0 + (idx + frac) * dt
    rising = above[idx + 1]

    events = [
        Crossing(_quantize(t, lsb), bool(r))
        for t, r in zip(times.tolist(), rising.tolist())
        if t >= arm_time
    ]
    if not events:
        raise NoTriggerError(
            f"no crossing of {cfg.threshold} mV after t={arm_time:g} s"
        )
    return events


def _zero_crossings_after(
    wave: Waveform, start: float, lsb: float, periods: float = 9.0,
    frequency: float | None = None,
) -> list[Crossing]:
    """Zero crossings in a bounded window after `start` (bounded to dodge
    tail-noise chatter; `periods` is in carrier periods when known, else the
    whole record)."""
    if frequency is not None:
        span = periods / frequency
        i0 = max(0, int((start - wave.t0) * wave.sample_rate))
        i1 = min(len(wave), int((start - wave.t0 + span) * wave.sample_rate) + 2)
        if i1 - i0 < 2:
            raise MeasurementError("record ends before timing crossings complete")
        sub = Waveform(wave.samples[i0:i1], wave.sample_rate,
                       wave.t0 + i0 / wave.sample_rate)
    else:
        sub = wave
    try:
        return [c for c in detect_crossings(sub, ComparatorConfig(0), start, lsb)
                if c.time > start]
    except NoTriggerError as exc:
        raise MeasurementError("no zero crossings after trigger") from exc


def first_wave_ratio(
    wave: Waveform,
    cfg: ComparatorConfig,
    arm_time: float = 0.0,
    lsb: float = DEFAULT_TDC_LSB,
) -> TdcMeasurement:
    """Width of the triggering half-wave relative to a settled reference.

    The comparator fires on the first rising crossing; the measured width
    runs to the matching falling crossing.  The reference is the width of
    the positive half-wave exactly one carrier period after the triggering
    one, taken at zero threshold so it spans a full half period.  On a
    rising envelope the triggering half-wave is weaker than the reference,
    so the ratio drops below the steady-tone value; it is clamped to [0, 1].
    """
    events = detect_crossings(wave, cfg, arm_time, lsb)
    trigger = next((c for c in events if c.rising), None)
    if trigger is None:
        raise NoTriggerError("threshold crossed falling only; no rising trigger")
    fall = next((c for c in events if not c.rising and c.time > trigger.time), None)
    if fall is None:
        raise MeasurementError("record ends inside the first half-wave")
    width = fall.time - trigger.time

    zeros = _zero_crossings_after(wave, fall.time, lsb)
    rise0 = next((c for c in zeros if c.rising), None)
    if rise0 is None:
        raise MeasurementError("no reference half-wave after trigger")
    fall0 = next((c for c in zeros if not c.rising and c.time > rise0.time), None)
    if fall0 is None:
        raise MeasurementError("record ends inside the reference half-wave")
    reference = fall0.time - rise0.time
    if reference <= 0.0:
        raise MeasurementError("degenerate reference half-wave")

    ratio = min(1.0, max(0.0, width / reference))
    return TdcMeasurement(
        first_halfwave_width=width,
        reference_halfwave_width=reference,
        first_wave_ratio=ratio,
        echo_times=(trigger.time,),
        quantization=lsb,
    )


def measure_amplitude(
    wave: Waveform,
    cal: AmplitudeCalibration,
    window: tuple[float, float],
    lsb: float = DEFAULT_TDC_LSB,
) -> AmplitudeMeasurement:
    """Peak-hold both polarities over a time window and read out via discharge.

    The hold capacitor keeps the extreme sample value in the window; the
    readout converts it to a discharge interval (settle to 70% of the peak,
    then the calibrated ramp), which the TDC quantizes like any other time.
    The calibrated amplitude is then the affine map of that interval, so
    with lsb=0 the round trip is exact.
    """
    t_start, t_end = window
    if not t_end > t_start:
        raise DomainError(f"empty window [{t_start}, {t_end}]")
    i0 = max(0, math.ceil((t_start - wave.t0) * wave.sample_rate))
    i1 = min(len(wave), math.floor((t_end - wave.t0) * wave.sample_rate) + 1)
    if i1 <= i0:
        raise DomainError(f"window [{t_start}, {t_end}] contains no samples")
    segment = wave.samples[i0:i1]
    v_peak_up = float(segment.max())
    v_peak_down = float(-segment.min())

    measurements = []
    for v_peak in (v_peak_up, v_peak_down):
        am_ns = discharge_from_amplitude(v_peak, cal)
        am_ns = _quantize(am_ns * 1e-9, lsb) * 1e9
        measurements.append((am_ns, amplitude_from_discharge(am_ns, cal)))
    (am_up, v_up), (am_down, v_down) = measurements
    return AmplitudeMeasurement(
        am_up_ns=am_up, am_down_ns=am_down, v_up_mv=v_up, v_down_mv=v_down
    )


def _cluster_crossings(
    events: list[Crossing], gap: float
) -> list[list[Crossing]]:
    """Split time-ordered crossings into echo clusters at gaps > `gap` seconds."""
    clusters: list[list[Crossing]] = [[events[0]]]
    for event in events[1:]:
        if event.time - clusters[-1][-1].time > gap:
            clusters.append([event])
        else:
            clusters[-1].append(event)
    return clusters


def measure_echo_pair(
    wave: Waveform,
    geometry: SensorGeometry,
    cfg: ComparatorConfig,
    cal: AmplitudeCalibration,
    arm_time: float = 0.0,
    lsb: float = DEFAULT_TDC_LSB,
    zero_cross_index: int = 2,
) -> EchoPairMeasurement:
    """Measure timing and raw amplitudes of the first two echoes in a record.

    Crossings are grouped into echoes by time gaps longer than
    ECHO_GAP_PERIODS carrier periods.  Each echo's timing mark is the
    zero_cross_index-th rising zero crossing after its trigger: both echoes
    carry the same burst shape, and zero crossings sit on the carrier's
    period grid regardless of amplitude, so the marks are phase-matched and
    delta_t is immune to the amplitude difference between the echoes.

    Returned amplitudes are the raw window peaks; compensation of the first
    reflector's transmission belongs to the attenuation computation, not to
    the measurement.
    """
    if zero_cross_index < 1:
        raise DomainError(f"zero_cross_index must be >= 1, got {zero_cross_index}")
    period = 1.0 / geometry.carrier_frequency
    events = detect_crossings(wave, cfg, arm_time, lsb)
    clusters = _cluster_crossings(events, ECHO_GAP_PERIODS * period)
    if len(clusters) < 2:
        raise MeasurementError(
            f"expected two echoes, found {len(clusters)} crossing cluster(s)"
        )

    triggers: list[float] = []
    marks: list[float] = []
    windows: list[tuple[float, float]] = []
    for cluster in clusters[:2]:
        trigger = next((c for c in cluster if c.rising), None)
        if trigger is None:
            raise MeasurementError("echo cluster has no rising crossing")
        zeros = _zero_crossings_after(
            wave, trigger.time, lsb, frequency=geometry.carrier_frequency
        )
        rising_zeros = [c for c in zeros if c.rising]
        if len(rising_zeros) < zero_cross_index:
            raise MeasurementError(
                f"only {len(rising_zeros)} rising zero crossings after trigger, "
                f"need {zero_cross_index}"
            )
        triggers.append(trigger.time)
        marks.append(rising_zeros[zero_cross_index - 1].time)
        windows.append((cluster[0].time - period, cluster[-1].time + 2.0 * period))

    if windows[0][1] > windows[1][0]:
        raise MeasurementError("echo amplitude windows overlap")
    delta_t = marks[1] - marks[0]
    if delta_t <= 0.0:
        raise MeasurementError(f"non-positive echo spacing {delta_t:g} s")

    amp_near = measure_amplitude(wave, cal, windows[0], lsb)
    amp_far = measure_amplitude(wave, cal, windows[1], lsb)
    return EchoPairMeasurement(
        delta_t=delta_t,
        u_near=amp_near.v_up_mv,
        u_far=amp_far.v_up_mv,
        trigger_times=(triggers[0], triggers[1]),
        mark_times=(marks[0], marks[1]),
        amplitude_near=amp_near,
        amplitude_far=amp_far,
    )
