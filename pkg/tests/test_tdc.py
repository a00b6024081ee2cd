"""Measurement front-end tests: comparator crossings, first-wave ratio,
amplitude channel arithmetic, and the joint echo-pair measurement."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from svpsim.acoustics import MediumState, attenuation_coefficient, sound_speed_from_tof
from svpsim.errors import (
    CalibrationError,
    DomainError,
    MeasurementError,
    NoTriggerError,
)
from svpsim.tdc import (
    DEFAULT_TDC_LSB,
    AmplitudeCalibration,
    ComparatorConfig,
    amplitude_from_discharge,
    detect_crossings,
    discharge_from_amplitude,
    first_wave_ratio,
    measure_amplitude,
    measure_echo_pair,
)
from svpsim.waveform import SensorGeometry, SynthesisScenario, Waveform, synthesize

FS = 100e6
F_CARRIER = 2e6
CAL = AmplitudeCalibration(amc_h_ns=200.0, amc_l_ns=100.0)


def sine(amplitude=10.0, frequency=F_CARRIER, duration=8e-6, fs=FS, phase=0.0):
    t = np.arange(int(duration * fs)) / fs
    return Waveform(amplitude * np.sin(2.0 * math.pi * frequency * t + phase), fs)


def echo_scenario(**kw):
    defaults = dict(
        geometry=SensorGeometry(first_reflector_transmission=1.0),
        medium=MediumState(20.0, 101.325, 998.2, sound_speed=1500.0),
        attenuation=0.0,
        emit_amplitude=550.0,
    )
    defaults.update(kw)
    return SynthesisScenario(**defaults)


# --- comparator configuration ---------------------------------------------------

def test_comparator_range():
    ComparatorConfig(0)
    ComparatorConfig(35)
    with pytest.raises(DomainError):
        ComparatorConfig(36)
    with pytest.raises(DomainError):
        ComparatorConfig(-1)
    with pytest.raises(DomainError):
        ComparatorConfig(20.5)


# --- crossing detection -----------------------------------------------------------

def test_rising_crossings_spaced_one_period():
    events = detect_crossings(sine(), ComparatorConfig(0))
    rising = [c.time for c in events if c.rising]
    spacings = np.diff(rising)
    assert np.all(np.abs(spacings - 1.0 / F_CARRIER) <= DEFAULT_TDC_LSB)


def test_no_trigger_when_threshold_above_amplitude():
    with pytest.raises(NoTriggerError):
        detect_crossings(sine(amplitude=10.0), ComparatorConfig(20))


def test_first_halfwave_width_closed_form():
    # A=10, th=5: width = (pi - 2*asin(0.5)) / (2*pi*f) = (2/3) * 250 ns
    events = detect_crossings(sine(), ComparatorConfig(5), lsb=0.0)
    rise = next(c for c in events if c.rising)
    fall = next(c for c in events if not c.rising and c.time > rise.time)
    width = fall.time - rise.time
    expected = (math.pi - 2.0 * math.asin(0.5)) / (2.0 * math.pi * F_CARRIER)
    assert expected == pytest.approx(166.67e-9, abs=0.01e-9)
    # interpolation tolerance: one fiftieth of the sample period
    assert abs(width - expected) <= (1.0 / FS) / 50.0


@pytest.mark.parametrize("ratio_th", [0.1, 0.25, 0.5, 0.75])
def test_halfwave_width_closed_form_sweep(ratio_th):
    # oversample beyond 50/period so the stated budget holds across levels
    fs = 400e6
    amplitude = 20.0
    threshold = int(round(ratio_th * amplitude))
    events = detect_crossings(sine(amplitude=amplitude, fs=fs),
                              ComparatorConfig(threshold), lsb=0.0)
    rise = next(c for c in events if c.rising)
    fall = next(c for c in events if not c.rising and c.time > rise.time)
    expected = (math.pi - 2.0 * math.asin(threshold / amplitude)) / (
        2.0 * math.pi * F_CARRIER)
    assert abs((fall.time - rise.time) - expected) <= (1.0 / fs) / 50.0


def test_crossing_times_quantized_to_lsb():
    events = detect_crossings(sine(), ComparatorConfig(5))
    for crossing in events:
        steps = crossing.time / DEFAULT_TDC_LSB
        assert abs(steps - round(steps)) < 1e-6


def test_arm_time_filters_early_crossings():
    # arming gates the comparator in real time; the reported timestamp is
    # quantized afterwards, so it may land up to one LSB before the gate
    events = detect_crossings(sine(), ComparatorConfig(0), arm_time=1e-6)
    assert all(c.time >= 1e-6 - DEFAULT_TDC_LSB for c in events)
    events = detect_crossings(sine(), ComparatorConfig(0), arm_time=1e-6, lsb=0.0)
    assert all(c.time >= 1e-6 for c in events)
    with pytest.raises(NoTriggerError):
        detect_crossings(sine(duration=2e-6), ComparatorConfig(0), arm_time=1.0)


@given(
    samples=st.lists(
        st.floats(min_value=-100.0, max_value=100.0,
                  allow_nan=False, allow_infinity=False),
        min_size=4, max_size=120,
    ),
    threshold=st.integers(min_value=0, max_value=35),
)
@settings(max_examples=200, deadline=None)
def test_crossings_alternate_and_are_ordered(samples, threshold):
    wave = Waveform(np.asarray(samples), 50e6)
    try:
        events = detect_crossings(wave, ComparatorConfig(threshold))
    except NoTriggerError:
        return
    times = [c.time for c in events]
    assert times == sorted(times)
    for previous, current in zip(events, events[1:]):
        assert previous.rising != current.rising
    for crossing in events:
        steps = crossing.time / DEFAULT_TDC_LSB
        assert abs(steps - round(steps)) < 1e-6


# --- first-wave ratio ----------------------------------------------------------------

def test_constant_sine_zero_threshold_ratio_is_one():
    m = first_wave_ratio(sine(), ComparatorConfig(0), lsb=0.0)
    assert m.first_wave_ratio == pytest.approx(1.0, abs=1e-9)


def test_constant_sine_half_amplitude_ratio():
    m = first_wave_ratio(sine(), ComparatorConfig(5), lsb=0.0)
    assert m.first_wave_ratio == pytest.approx(2.0 / 3.0, abs=1e-3)
    assert m.first_halfwave_width == pytest.approx(166.67e-9, rel=1e-3)
    assert m.reference_halfwave_width == pytest.approx(250e-9, rel=1e-3)
    assert m.echo_times[0] > 0.0
    assert m.quantization == 0.0


def test_rising_envelope_lowers_ratio():
    # on a rising envelope the triggering half-wave is weaker than the
    # settled reference, so the ratio must drop below the steady-tone value
    # at the same threshold-to-triggering-peak ratio
    wave, _ = synthesize(echo_scenario())
    threshold = 30
    m = first_wave_ratio(wave, ComparatorConfig(threshold), lsb=0.0)
    trigger = m.echo_times[0]
    j0 = int(trigger * wave.sample_rate)
    j1 = int((trigger + m.first_halfwave_width) * wave.sample_rate) + 2
    peak_first = wave.samples[j0:j1].max()
    steady = 1.0 - (2.0 / math.pi) * math.asin(threshold / peak_first)
    assert 0.0 < m.first_wave_ratio < steady


def test_ratio_clamped_at_one_for_shrinking_halfwaves():
    # a decaying DC offset makes the triggering half-wave wider than the
    # reference one period later; the raw ratio exceeds 1 and must clamp
    fs = FS
    t = np.arange(int(5e-6 * fs)) / fs
    ramp = 8.0 - 3.2e6 * t
    wave = Waveform(10.0 * np.sin(2.0 * math.pi * F_CARRIER * t) + ramp, fs)
    m = first_wave_ratio(wave, ComparatorConfig(0), lsb=0.0)
    assert m.first_halfwave_width > m.reference_halfwave_width
    assert m.first_wave_ratio == 1.0


def test_ratio_errors():
    with pytest.raises(NoTriggerError):
        first_wave_ratio(sine(amplitude=5.0), ComparatorConfig(20))
    # record ends inside the reference half-wave
    with pytest.raises(MeasurementError):
        first_wave_ratio(sine(duration=0.6e-6), ComparatorConfig(5))


@given(
    samples=st.lists(
        st.floats(min_value=-100.0, max_value=100.0,
                  allow_nan=False, allow_infinity=False),
        min_size=4, max_size=120,
    ),
    threshold=st.integers(min_value=0, max_value=35),
)
@settings(max_examples=200, deadline=None)
def test_ratio_always_in_unit_interval(samples, threshold):
    wave = Waveform(np.asarray(samples), 50e6)
    try:
        m = first_wave_ratio(wave, ComparatorConfig(threshold))
    except (NoTriggerError, MeasurementError):
        return
    assert 0.0 <= m.first_wave_ratio <= 1.0
    assert m.first_halfwave_width > 0.0
    assert m.reference_halfwave_width > 0.0


# --- amplitude channel ------------------------------------------------------------------

def test_amc_gradient_offset_and_formulas():
    assert CAL.gradient == pytest.approx(3.5, rel=1e-12)
    assert CAL.offset == pytest.approx(0.0, abs=1e-12)
    assert amplitude_from_discharge(150.0, CAL) == pytest.approx(525.0, rel=1e-12)
    # calibration fixed point: discharge time AMC_L reads exactly V_CAL
    assert amplitude_from_discharge(100.0, CAL) == pytest.approx(350.0, rel=1e-12)


def test_amc_formulas_with_nonzero_offset():
    cal = AmplitudeCalibration(amc_h_ns=260.0, amc_l_ns=140.0, v_cal_mv=350.0)
    gradient = 350.0 / 120.0
    offset = (2 * 140.0 - 260.0) * gradient
    assert cal.gradient == pytest.approx(gradient, rel=1e-12)
    assert cal.offset == pytest.approx(offset, rel=1e-12)
    assert amplitude_from_discharge(200.0, cal) == pytest.approx(
        gradient * 200.0 - offset, rel=1e-12)


@given(st.floats(min_value=0.0, max_value=1e4, allow_nan=False))
def test_discharge_round_trip(v):
    assert amplitude_from_discharge(discharge_from_amplitude(v, CAL), CAL) == \
        pytest.approx(v, rel=1e-12, abs=1e-12)


def test_degenerate_calibration_rejected():
    with pytest.raises(CalibrationError):
        AmplitudeCalibration(amc_h_ns=100.0, amc_l_ns=100.0)
    with pytest.raises(CalibrationError):
        AmplitudeCalibration(amc_h_ns=90.0, amc_l_ns=100.0)
    with pytest.raises(CalibrationError):
        AmplitudeCalibration(amc_h_ns=100.0, amc_l_ns=0.0)
    with pytest.raises(CalibrationError):
        AmplitudeCalibration(amc_h_ns=200.0, amc_l_ns=100.0, v_cal_mv=0.0)


def test_measure_amplitude_recovers_sine_peak():
    wave = sine(amplitude=10.0)
    m = measure_amplitude(wave, CAL, (0.0, 5e-6), lsb=0.0)
    grid_loss = 10.0 * (math.pi * F_CARRIER / FS) ** 2 / 2.0
    assert abs(m.v_up_mv - 10.0) <= grid_loss + 1e-9
    assert abs(m.v_down_mv - 10.0) <= grid_loss + 1e-9
    # with quantization on, the error budget grows by one gradient LSB step
    mq = measure_amplitude(wave, CAL, (0.0, 5e-6))
    assert abs(mq.v_up_mv - 10.0) <= grid_loss + CAL.gradient * DEFAULT_TDC_LSB * 1e9


def test_measure_amplitude_readout_is_consistent():
    wave = sine(amplitude=10.0)
    m = measure_amplitude(wave, CAL, (0.0, 5e-6), lsb=0.0)
    assert amplitude_from_discharge(m.am_up_ns, CAL) == pytest.approx(
        m.v_up_mv, rel=1e-12)
    assert m.am_up_ns > 0.0


def test_measure_amplitude_window_errors():
    wave = sine()
    with pytest.raises(DomainError):
        measure_amplitude(wave, CAL, (2e-6, 2e-6))
    with pytest.raises(DomainError):
        measure_amplitude(wave, CAL, (3e-6, 1e-6))
    with pytest.raises(DomainError):
        measure_amplitude(wave, CAL, (1.0, 2.0))  # beyond the record


# --- echo pair -----------------------------------------------------------------------

def test_echo_pair_closed_loop_timing_and_transmission():
    geo = SensorGeometry(first_reflector_transmission=0.5)
    wave, _ = synthesize(echo_scenario(geometry=geo, emit_amplitude=700.0))
    pair = measure_echo_pair(wave, geo, ComparatorConfig(20), CAL)
    assert abs(pair.delta_t - 80e-6) <= DEFAULT_TDC_LSB + 1e-12
    assert pair.u_far / pair.u_near == pytest.approx(0.25, rel=5e-3)
    # ideal converter: the amplitude ratio carries no quantization error
    pair0 = measure_echo_pair(wave, geo, ComparatorConfig(20), CAL, lsb=0.0)
    assert pair0.u_far / pair0.u_near == pytest.approx(0.25, rel=1e-6)
    assert pair.trigger_times[0] < pair.mark_times[0] < pair.trigger_times[1]
    assert pair.mark_times[1] - pair.mark_times[0] == pair.delta_t


def test_echo_pair_recovers_attenuation_within_two_percent():
    alpha = 5.776226504666211
    wave, _ = synthesize(echo_scenario(attenuation=alpha))
    pair = measure_echo_pair(
        wave, SensorGeometry(first_reflector_transmission=1.0),
        ComparatorConfig(30), CAL)
    recovered = attenuation_coefficient(pair.u_near, pair.u_far, 0.06)
    assert recovered == pytest.approx(alpha, rel=0.02)


def test_echo_pair_recovers_sound_speed():
    for c in (1425.0, 1500.0, 1575.0):
        wave, _ = synthesize(echo_scenario(
            medium=MediumState(20.0, 101.325, 998.2, sound_speed=c),
            attenuation=1.0))
        pair = measure_echo_pair(
            wave, SensorGeometry(first_reflector_transmission=1.0),
            ComparatorConfig(30), CAL)
        assert sound_speed_from_tof(pair.delta_t, 0.06) == pytest.approx(c, abs=0.02)


def test_echo_pair_requires_two_echoes():
    wave, truth = synthesize(echo_scenario())
    cut = int((truth.t_far - 2e-6) * wave.sample_rate)
    single = Waveform(wave.samples[:cut], wave.sample_rate)
    with pytest.raises(MeasurementError, match="two echoes"):
        measure_echo_pair(single, SensorGeometry(first_reflector_transmission=1.0),
                          ComparatorConfig(30), CAL)


def test_echo_pair_no_signal():
    flat = Waveform(np.zeros(4096), FS)
    with pytest.raises(NoTriggerError):
        measure_echo_pair(flat, SensorGeometry(), ComparatorConfig(10), CAL)


def test_echo_pair_truncated_marks():
    # cut the record a hair after the far echo's trigger so the timing
    # zero crossings cannot complete
    wave, truth = synthesize(echo_scenario())
    cut = int((truth.t_far + 0.6e-6) * wave.sample_rate)
    chopped = Waveform(wave.samples[:cut], wave.sample_rate)
    with pytest.raises(MeasurementError):
        measure_echo_pair(chopped, SensorGeometry(first_reflector_transmission=1.0),
                          ComparatorConfig(30), CAL)


def test_echo_pair_mark_times_are_quantized():
    wave, _ = synthesize(echo_scenario())
    pair = measure_echo_pair(wave, SensorGeometry(first_reflector_transmission=1.0),
                             ComparatorConfig(30), CAL)
    for t in (*pair.trigger_times, *pair.mark_times):
        steps = t / DEFAULT_TDC_LSB
        assert abs(steps - round(steps)) < 1e-6


def test_echo_pair_rejects_bad_zero_cross_index():
    wave, _ = synthesize(echo_scenario())
    with pytest.raises(DomainError):
        measure_echo_pair(wave, SensorGeometry(first_reflector_transmission=1.0),
                          ComparatorConfig(30), CAL, zero_cross_index=0)
