"""Operating-mode state machine of the instrument.

The device powers on into the autonomous mode and free-runs measurement
cycles at the configured cadence, logging records to a ring memory.  Mode
changes and data transfers happen over the framed link (`protocol`):

* Autonomous  - measure and store to internal memory
* Telemetric  - measure and emit each record as a frame, nothing stored
* Memory      - no measurement; memory readout and formatting are allowed
* Settings    - no measurement; settings may be written

A measurement cycle runs in two phases: if the first attempt fails to
trigger or to resolve both echoes, the comparator threshold is stepped down
1 mV (not below 0) and the measurement retried once.  A cycle that still
fails produces an invalid-flagged record rather than an error, because a
logger that dies on weak signal is useless in the field.
"""

from __future__ import annotations

import math
import struct
from collections import deque
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Callable

from . import acoustics, tdc
from .acoustics import RangeBounds, ReflectorMaterial
from .constants import CONSTANTS
from .errors import (
    DomainError,
    FrameError,
    MeasurementError,
    NoTriggerError,
    WrongModeError,
)
from .protocol import Frame, NakCode, Opcode, crc16_ccitt_false
from .tdc import AmplitudeCalibration, ComparatorConfig
from .waveform import SensorGeometry, Waveform


class DeviceMode(IntEnum):
    AUTONOMOUS = 0
    TELEMETRIC = 1
    MEMORY = 2
    SETTINGS = 3


# record.flags bits
FLAG_SOUND_SPEED_RANGE = 0x0001   # sound speed outside validation bounds
FLAG_TEMPERATURE_RANGE = 0x0002
FLAG_PRESSURE_RANGE = 0x0004
FLAG_NO_SIGNAL = 0x0008           # both measurement phases failed
FLAG_THRESHOLD_ADAPTED = 0x0010   # phase 2 ran with a stepped-down threshold

# status bits reported by the STATUS command
STATUS_SETTINGS_CORRUPT = 0x01    # stored settings failed CRC at power-on

MEMORY_CAPACITY = 65536

_RECORD_STRUCT = struct.Struct("<IdddddddH")
_STATUS_STRUCT = struct.Struct("<BBIIII")
_READ_MEM_STRUCT = struct.Struct("<II")

SETTINGS_VERSION = 1
_SETTINGS_STRUCT = struct.Struct("<BB17d16sB")
_REFLECTOR_NAME_BYTES = 16


@dataclass(frozen=True)
class DeviceRecord:
    """One measurement cycle's output, as stored in memory or telemetered."""

    sequence: int        # strictly increasing, reset only by memory format
    timestamp: float     # s since power-on, sequence / cycle_rate
    sound_speed: float   # m/s, NaN when invalid
    attenuation: float   # Np/m, NaN when invalid
    u_near: float        # mV, raw near-echo amplitude, NaN when invalid
    u_far: float         # mV, raw far-echo amplitude, NaN when invalid
    temperature: float   # deg C, auxiliary channel
    pressure: float      # kPa, auxiliary channel
    flags: int

    def pack(self) -> bytes:
        return _RECORD_STRUCT.pack(
            self.sequence, self.timestamp, self.sound_speed, self.attenuation,
            self.u_near, self.u_far, self.temperature, self.pressure, self.flags,
        )

    @classmethod
    def unpack(cls, data: bytes) -> "DeviceRecord":
        if len(data) != _RECORD_STRUCT.size:
            raise DomainError(
                f"record must be {_RECORD_STRUCT.size} bytes, got {len(data)}"
            )
        return cls(*_RECORD_STRUCT.unpack(data))


RECORD_SIZE = _RECORD_STRUCT.size


@dataclass(frozen=True)
class DeviceSettings:
    """Persisted configuration: measurement front end, geometry, bounds."""

    comparator: ComparatorConfig = field(default_factory=ComparatorConfig)
    amplitude_cal: AmplitudeCalibration = AmplitudeCalibration(
        amc_h_ns=200.0, amc_l_ns=100.0
    )
    geometry: SensorGeometry = field(default_factory=SensorGeometry)
    bounds: RangeBounds = field(default_factory=RangeBounds)
    cycle_rate: float = CONSTANTS.cycle_rate_hz  # Hz
    tdc_lsb: float = tdc.DEFAULT_TDC_LSB         # s
    zero_cross_index: int = 2                    # timing mark selection

    def __post_init__(self):
        if not self.cycle_rate > 0.0:
            raise DomainError(f"cycle_rate must be positive, got {self.cycle_rate}")
        if not self.tdc_lsb >= 0.0:
            raise DomainError(f"tdc_lsb must be >= 0, got {self.tdc_lsb}")
        if self.zero_cross_index < 1:
            raise DomainError(
                f"zero_cross_index must be >= 1, got {self.zero_cross_index}"
            )
        name = self.geometry.reflector_material.name.encode("utf-8")
        if len(name) > _REFLECTOR_NAME_BYTES:
            raise DomainError(
                f"reflector material name exceeds {_REFLECTOR_NAME_BYTES} bytes"
            )

    def to_block(self) -> bytes:
        """Serialize to the fixed-size settings block (no CRC)."""
        geo = self.geometry
        cal = self.amplitude_cal
        b = self.bounds
        return _SETTINGS_STRUCT.pack(
            SETTINGS_VERSION,
            self.comparator.threshold,
            cal.amc_l_ns, cal.amc_h_ns, cal.v_cal_mv,
            geo.base_length, geo.first_reflector_offset, geo.carrier_frequency,
            geo.first_reflector_transmission,
            geo.reflector_material.density, geo.reflector_material.sound_speed,
            self.cycle_rate, self.tdc_lsb,
            b.sound_speed_min, b.sound_speed_max,
            b.temperature_min, b.temperature_max,
            b.pressure_min, b.pressure_max,
            geo.reflector_material.name.encode("utf-8"),
            self.zero_cross_index,
        )

    @classmethod
    def from_block(cls, data: bytes) -> "DeviceSettings":
        if len(data) != _SETTINGS_STRUCT.size:
            raise DomainError(
                f"settings block must be {_SETTINGS_STRUCT.size} bytes, got {len(data)}"
            )
        (version, threshold,
         amc_l, amc_h, v_cal,
         base_length, offset, carrier, transmission,
         refl_density, refl_speed,
         cycle_rate, tdc_lsb,
         c_min, c_max, t_min, t_max, p_min, p_max,
         name_raw, zero_cross_index) = _SETTINGS_STRUCT.unpack(data)
        if version != SETTINGS_VERSION:
            raise DomainError(f"unsupported settings version {version}")
        name = name_raw.rstrip(b"\x00").decode("utf-8")
        return cls(
            comparator=ComparatorConfig(threshold),
            amplitude_cal=AmplitudeCalibration(
                amc_h_ns=amc_h, amc_l_ns=amc_l, v_cal_mv=v_cal
            ),
            geometry=SensorGeometry(
                base_length=base_length,
                first_reflector_offset=offset,
                carrier_frequency=carrier,
                first_reflector_transmission=transmission,
                reflector_material=ReflectorMaterial(name, refl_density, refl_speed),
            ),
            bounds=RangeBounds(
                sound_speed_min=c_min, sound_speed_max=c_max,
                temperature_min=t_min, temperature_max=t_max,
                pressure_min=p_min, pressure_max=p_max,
            ),
            cycle_rate=cycle_rate,
            tdc_lsb=tdc_lsb,
            zero_cross_index=zero_cross_index,
        )


SETTINGS_BLOCK_SIZE = _SETTINGS_STRUCT.size


def pack_settings_store(settings: DeviceSettings) -> bytes:
    """Settings block plus its CRC trailer, as kept in nonvolatile store."""
    block = settings.to_block()
    return block + crc16_ccitt_false(block).to_bytes(2, "big")


def unpack_settings_store(blob: bytes) -> DeviceSettings:
    """Inverse of `pack_settings_store`; raises DomainError on any defect."""
    if len(blob) != SETTINGS_BLOCK_SIZE + 2:
        raise DomainError(
            f"settings store must be {SETTINGS_BLOCK_SIZE + 2} bytes, got {len(blob)}"
        )
    block, trailer = blob[:-2], blob[-2:]
    if crc16_ccitt_false(block) != int.from_bytes(trailer, "big"):
        raise DomainError("settings store CRC mismatch")
    return DeviceSettings.from_block(block)


@dataclass(frozen=True)
class CycleInput:
    """One cycle's stimulus: the echo trace plus the auxiliary channels."""

    waveform: Waveform
    temperature: float = 20.0  # deg C
    pressure: float = 101.325  # kPa


#: a waveform source is called once per cycle with the live settings
WaveformSource = Callable[[DeviceSettings], CycleInput]


class Device:
    """Behavioral model of the instrument's controller."""

    def __init__(self, settings: DeviceSettings | None = None,
                 memory_capacity: int = MEMORY_CAPACITY):
        if memory_capacity < 1:
            raise DomainError(f"memory_capacity must be >= 1, got {memory_capacity}")
        self.settings = settings if settings is not None else DeviceSettings()
        self.mode = DeviceMode.AUTONOMOUS
        self.memory: deque[DeviceRecord] = deque(maxlen=memory_capacity)
        self.telemetry: list[Frame] = []
        self.last_record: DeviceRecord | None = None
        self.cycle_count = 0
        self._next_sequence = 1
        self.frame_error_count = 0
        self.status_flags = 0

    # -- lifecycle -----------------------------------------------------------

    @classmethod
    def power_on(cls, settings_store: bytes | None = None,
                 memory_capacity: int = MEMORY_CAPACITY) -> "Device":
        """Boot from a nonvolatile settings blob; fall back to defaults.

        A corrupt or absent store must not brick the device: it boots with
        factory settings and raises the corrupt flag in STATUS instead.
        """
        device = cls(memory_capacity=memory_capacity)
        if settings_store:
            try:
                device.settings = unpack_settings_store(settings_store)
            except (DomainError, ValueError):
                device.status_flags |= STATUS_SETTINGS_CORRUPT
        return device

    def settings_store(self) -> bytes:
        """Current settings as a nonvolatile blob (block + CRC)."""
        return pack_settings_store(self.settings)

    # -- measurement ---------------------------------------------------------

    def _measure_once(self, wave: Waveform):
        settings = self.settings
        # The first-wave discriminator is the trigger-quality gate: it must
        # produce an in-range ratio before the echo pair is trusted.
        discriminator = tdc.first_wave_ratio(
            wave, settings.comparator, lsb=settings.tdc_lsb
        )
        if not 0.0 <= discriminator.first_wave_ratio <= 1.0:
            raise MeasurementError(
                f"first-wave ratio {discriminator.first_wave_ratio} out of [0, 1]"
            )
        return tdc.measure_echo_pair(
            wave,
            settings.geometry,
            settings.comparator,
            settings.amplitude_cal,
            lsb=settings.tdc_lsb,
            zero_cross_index=settings.zero_cross_index,
        )

    def _step_threshold_down(self) -> bool:
        threshold = self.settings.comparator.threshold
        if threshold <= 0:
            return False
        self.settings = replace(
            self.settings, comparator=ComparatorConfig(threshold - 1)
        )
        return True

    def run_cycle(self, source: WaveformSource) -> DeviceRecord:
        """Execute one measurement cycle; only meaningful in the running modes."""
        if self.mode not in (DeviceMode.AUTONOMOUS, DeviceMode.TELEMETRIC):
            raise WrongModeError(f"no measurement cycles in {self.mode.name} mode")
        cycle_input = source(self.settings)
        self.cycle_count += 1
        timestamp = self.cycle_count / self.settings.cycle_rate

        adapted = False
        pair = None
        try:
            pair = self._measure_once(cycle_input.waveform)
        except (NoTriggerError, MeasurementError):
            adapted = self._step_threshold_down()
            try:
                pair = self._measure_once(cycle_input.waveform)
            except (NoTriggerError, MeasurementError):
                pair = None

        nan = float("nan")
        flags = FLAG_THRESHOLD_ADAPTED if adapted else 0
        if pair is None:
            sound_speed = attenuation = u_near = u_far = nan
            flags |= FLAG_NO_SIGNAL
        else:
            geometry = self.settings.geometry
            sound_speed = acoustics.sound_speed_from_tof(
                pair.delta_t, geometry.base_length
            )
            u_near, u_far = pair.u_near, pair.u_far
            u_near_corrected = u_near * geometry.first_reflector_transmission ** 2
            try:
                attenuation = acoustics.attenuation_coefficient(
                    u_near_corrected, u_far, geometry.base_length
                )
            except DomainError:
                attenuation = nan

        record = DeviceRecord(
            sequence=self._next_sequence,
            timestamp=timestamp,
            sound_speed=sound_speed,
            attenuation=attenuation,
            u_near=u_near,
            u_far=u_far,
            temperature=cycle_input.temperature,
            pressure=cycle_input.pressure,
            flags=flags | self._range_flags(sound_speed, cycle_input),
        )
        self._next_sequence += 1
        self.last_record = record
        if self.mode is DeviceMode.AUTONOMOUS:
            self.memory.append(record)
        elif self.mode is DeviceMode.TELEMETRIC:
            self.telemetry.append(Frame(Opcode.RECORD_DATA, record.pack()))
        return record

    def _range_flags(self, sound_speed: float, cycle_input: CycleInput) -> int:
        report = acoustics.validate_record(
            _RangeProbe(sound_speed, cycle_input.temperature, cycle_input.pressure),
            self.settings.bounds,
        )
        flags = 0
        # a NaN sound speed is already covered by FLAG_NO_SIGNAL; the range
        # flag is reserved for actual out-of-range measurements
        if not report.sound_speed_ok and not math.isnan(sound_speed):
            flags |= FLAG_SOUND_SPEED_RANGE
        if not report.temperature_ok:
            flags |= FLAG_TEMPERATURE_RANGE
        if not report.pressure_ok:
            flags |= FLAG_PRESSURE_RANGE
        return flags

    # -- memory --------------------------------------------------------------

    def read_memory(self, start_sequence: int = 0, count: int = 0) -> list[DeviceRecord]:
        """Stored records with sequence >= start_sequence, oldest first.

        count == 0 means no limit.  Reading past the stored range returns
        an empty list, never an error.
        """
        selected = [r for r in self.memory if r.sequence >= start_sequence]
        if count > 0:
            selected = selected[:count]
        return selected

    def format_memory(self) -> None:
        """Erase the log and restart the sequence counter."""
        self.memory.clear()
        self._next_sequence = 1

    def dump_memory(self) -> bytes:
        """All stored records as back-to-back RECORD_DATA frames."""
        return b"".join(
            Frame(Opcode.RECORD_DATA, record.pack()).encode()
            for record in self.memory
        )

    # -- command link --------------------------------------------------------

    def handle_command(self, frame_bytes: bytes) -> list[Frame]:
        """Process one received frame; returns the response frames, in order.

        An undecodable frame (bad sync, truncation, CRC mismatch) is dropped
        silently per link policy; only the error counter records it.
        """
        try:
            frame = Frame.decode(bytes(frame_bytes))
        except FrameError:
            self.frame_error_count += 1
            return []
        return self._dispatch(frame)

    def _dispatch(self, frame: Frame) -> list[Frame]:
        handler = {
            Opcode.SET_MODE: self._cmd_set_mode,
            Opcode.READ_RECORD: self._cmd_read_record,
            Opcode.READ_MEM: self._cmd_read_mem,
            Opcode.FORMAT_MEM: self._cmd_format_mem,
            Opcode.WRITE_SETTINGS: self._cmd_write_settings,
            Opcode.READ_SETTINGS: self._cmd_read_settings,
            Opcode.STATUS: self._cmd_status,
        }.get(frame.opcode)
        if handler is None:
            return [self._nak(frame, NakCode.UNKNOWN_OPCODE)]
        return handler(frame)

    def _ack(self, frame: Frame) -> Frame:
        return Frame(Opcode.ACK, bytes([frame.opcode]))

    def _nak(self, frame: Frame, code: NakCode) -> Frame:
        return Frame(Opcode.NAK, bytes([frame.opcode & 0xFF, code]))

    def _cmd_set_mode(self, frame: Frame) -> list[Frame]:
        if len(frame.payload) != 1 or frame.payload[0] > max(DeviceMode):
            return [self._nak(frame, NakCode.BAD_PAYLOAD)]
        self.mode = DeviceMode(frame.payload[0])
        return [self._ack(frame)]

    def _cmd_read_record(self, frame: Frame) -> list[Frame]:
        if self.last_record is None:
            return [self._nak(frame, NakCode.NO_DATA)]
        return [Frame(Opcode.RECORD_DATA, self.last_record.pack())]

    def _cmd_read_mem(self, frame: Frame) -> list[Frame]:
        if self.mode is not DeviceMode.MEMORY:
            return [self._nak(frame, NakCode.WRONG_MODE)]
        if len(frame.payload) != _READ_MEM_STRUCT.size:
            return [self._nak(frame, NakCode.BAD_PAYLOAD)]
        start_sequence, count = _READ_MEM_STRUCT.unpack(frame.payload)
        responses = [
            Frame(Opcode.RECORD_DATA, record.pack())
            for record in self.read_memory(start_sequence, count)
        ]
        responses.append(self._ack(frame))
        return responses

    def _cmd_format_mem(self, frame: Frame) -> list[Frame]:
        if self.mode is not DeviceMode.MEMORY:
            return [self._nak(frame, NakCode.WRONG_MODE)]
        self.format_memory()
        return [self._ack(frame)]

    def _cmd_write_settings(self, frame: Frame) -> list[Frame]:
        if self.mode is not DeviceMode.SETTINGS:
            return [self._nak(frame, NakCode.WRONG_MODE)]
        try:
            self.settings = DeviceSettings.from_block(frame.payload)
        except (DomainError, ValueError):
            return [self._nak(frame, NakCode.BAD_PAYLOAD)]
        return [self._ack(frame)]

    def _cmd_read_settings(self, frame: Frame) -> list[Frame]:
        return [Frame(Opcode.SETTINGS_DATA, self.settings.to_block())]

    def _cmd_status(self, frame: Frame) -> list[Frame]:
        last_sequence = self.last_record.sequence if self.last_record else 0
        payload = _STATUS_STRUCT.pack(
            int(self.mode),
            self.status_flags,
            self.frame_error_count & 0xFFFFFFFF,
            self.cycle_count & 0xFFFFFFFF,
            last_sequence & 0xFFFFFFFF,
            len(self.memory),
        )
        return [Frame(Opcode.STATUS_DATA, payload)]


class _RangeProbe:
    """Adapter giving `validate_record` the three fields it looks at."""

    __slots__ = ("sound_speed", "temperature", "pressure")

    def __init__(self, sound_speed: float, temperature: float, pressure: float):
        self.sound_speed = sound_speed
        self.temperature = temperature
        self.pressure = pressure
