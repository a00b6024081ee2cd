"""Behavioral simulator for a two-reflector pulse-echo sound speed /
attenuation instrument: physics relations, waveform synthesis, the timing
and amplitude measurement front end, the device state machine, and host
tools for its framed link."""

from .acoustics import (
    DEFAULT_BOUNDS,
    STAINLESS_STEEL,
    MediumState,
    RangeBounds,
    ReflectorMaterial,
    ValidityReport,
    acoustic_impedance,
    attenuation_coefficient,
    neper_to_db,
    pure_water_sound_speed,
    reflection_coefficient,
    reflection_magnitude,
    sound_speed_from_tof,
    time_of_flight,
    validate_record,
)
from .constants import CONSTANTS, InstrumentConstants, load_constants
from .device import (
    CycleInput,
    Device,
    DeviceMode,
    DeviceRecord,
    DeviceSettings,
    pack_settings_store,
    unpack_settings_store,
)
from .protocol import Frame, FrameParser, NakCode, Opcode, crc16_ccitt_false, iter_frames
from .tdc import (
    AmplitudeCalibration,
    AmplitudeMeasurement,
    ComparatorConfig,
    Crossing,
    EchoPairMeasurement,
    TdcMeasurement,
    amplitude_from_discharge,
    detect_crossings,
    discharge_from_amplitude,
    first_wave_ratio,
    measure_amplitude,
    measure_echo_pair,
)
from .waveform import (
    GroundTruth,
    SensorGeometry,
    SynthesisScenario,
    Waveform,
    read_waveform,
    synthesize,
    write_waveform,
)

__version__ = "0.1.0"
