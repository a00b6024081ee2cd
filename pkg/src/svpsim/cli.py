"""Command line host tools: sweep simulation, dump decoding, calibration check.

Exit codes: 0 success, 1 usage/config error, 2 malformed input data,
3 calibration residual over budget.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import config, device, waveform
from .acoustics import (
    MediumState,
    RangeBounds,
    ReflectorMaterial,
    pure_water_sound_speed,
)
from .constants import CONSTANTS
from .device import CycleInput, Device, DeviceRecord, DeviceSettings
from .errors import ConfigError, DomainError, FrameError, ScenarioError, SvpsimError
from .protocol import Frame, Opcode, iter_frames
from .tdc import AmplitudeCalibration, ComparatorConfig
from .waveform import SensorGeometry, SynthesisScenario

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TOLERANCE = 3

SIMULATE_COLUMNS = (
    "seq", "time_s", "sound_speed_mps", "attenuation_np_m",
    "u_near_mv", "u_far_mv", "flags",
)
DECODE_COLUMNS = SIMULATE_COLUMNS[:-1] + (
    "temperature_c", "pressure_kpa", "flags",
    "flag_sound_speed_range", "flag_temperature_range", "flag_pressure_range",
    "flag_no_signal", "flag_threshold_adapted",
)
CALIBRATE_COLUMNS = ("temperature_c", "reference_mps", "measured_mps", "residual_mps")

_FLAG_COLUMNS = (
    device.FLAG_SOUND_SPEED_RANGE,
    device.FLAG_TEMPERATURE_RANGE,
    device.FLAG_PRESSURE_RANGE,
    device.FLAG_NO_SIGNAL,
    device.FLAG_THRESHOLD_ADAPTED,
)


def _fmt(value: float) -> str:
    return format(value, ".9g")


def _record_row(record: DeviceRecord) -> list[str]:
    return [
        str(record.sequence),
        _fmt(record.timestamp),
        _fmt(record.sound_speed),
        _fmt(record.attenuation),
        _fmt(record.u_near),
        _fmt(record.u_far),
        str(record.flags),
    ]


def _settings_from_manifest(cfg: dict[str, str]) -> DeviceSettings:
    material = ReflectorMaterial(
        name=config.get_str(cfg, "reflector_name", "stainless steel"),
        density=config.get_float(cfg, "reflector_density", 7900.0),
        sound_speed=config.get_float(cfg, "reflector_sound_speed", 5790.0),
    )
    geometry = SensorGeometry(
        base_length=config.get_float(cfg, "base_length_m", CONSTANTS.base_length_m),
        first_reflector_offset=config.get_float(cfg, "first_reflector_offset_m", 0.01),
        carrier_frequency=config.get_float(
            cfg, "carrier_frequency_hz", CONSTANTS.carrier_frequency_hz
        ),
        first_reflector_transmission=config.get_float(
            cfg, "first_reflector_transmission", 0.5
        ),
        reflector_material=material,
    )
    return DeviceSettings(
        comparator=ComparatorConfig(config.get_int(cfg, "threshold_mv", 20)),
        amplitude_cal=AmplitudeCalibration(
            amc_h_ns=config.get_float(cfg, "amc_h_ns", 200.0),
            amc_l_ns=config.get_float(cfg, "amc_l_ns", 100.0),
            v_cal_mv=config.get_float(cfg, "v_cal_mv", CONSTANTS.v_cal_mv),
        ),
        geometry=geometry,
        bounds=RangeBounds(),
        cycle_rate=config.get_float(cfg, "cycle_rate_hz", CONSTANTS.cycle_rate_hz),
        tdc_lsb=config.get_float(cfg, "tdc_lsb_s", 90e-12),
        zero_cross_index=config.get_int(cfg, "zero_cross_index", 2),
    )


def _sweep_points(cfg: dict[str, str]) -> list[tuple[float, float]]:
    """(temperature, sound_speed) sweep axis from the manifest."""
    has_c = "sweep_sound_speed" in cfg
    has_t = "sweep_temperature" in cfg
    if has_c == has_t:
        raise ConfigError(
            "manifest must set exactly one of sweep_sound_speed / sweep_temperature"
        )
    if has_c:
        fixed_t = config.get_float(cfg, "water_temperature_c", 20.0)
        return [(fixed_t, c) for c in config.get_float_list(cfg, "sweep_sound_speed")]
    points = []
    for t in config.get_float_list(cfg, "sweep_temperature"):
        points.append((t, pure_water_sound_speed(t)))
    return points


def cmd_simulate(args) -> int:
    try:
        cfg = config.parse_kv_file(args.manifest)
        settings = _settings_from_manifest(cfg)
        points = _sweep_points(cfg)
        attenuations = config.get_float_list(cfg, "sweep_attenuation", "0")
        records_per_point = config.get_int(cfg, "records_per_point", 1)
        if records_per_point < 1:
            raise ConfigError(
                f"records_per_point must be >= 1, got {records_per_point}"
            )
        base_seed = config.get_int(cfg, "seed", 1)
        noise_rms = config.get_float(cfg, "noise_rms_mv", 0.0)
        emit = config.get_float(cfg, "emit_amplitude_mv", 700.0)
        burst_cycles = config.get_int(cfg, "burst_cycles", 8)
        sample_rate = config.get_float(cfg, "sample_rate_hz", 100e6)
        density = config.get_float(cfg, "water_density", 998.2)
        pressure = config.get_float(cfg, "pressure_kpa", 101.325)
        csv_path = config.get_str(cfg, "csv")
        truth_path = cfg.get("truth")
        dump_path = cfg.get("dump")
        # fail early on scenario problems before any output file is created;
        # the first point is fully synthesized to catch rate/overlap issues
        probes = []
        for t, c in points:
            for alpha in attenuations:
                probes.append(SynthesisScenario(
                    geometry=settings.geometry,
                    medium=MediumState(t, pressure, density, c),
                    attenuation=alpha,
                    emit_amplitude=emit,
                    burst_cycles=burst_cycles,
                    noise_rms=noise_rms,
                    sample_rate=sample_rate,
                ))
        waveform.synthesize(probes[0])
    except (ConfigError, DomainError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    dev = Device(settings=settings)
    rows: list[list[str]] = []
    truth_lines: list[str] = []
    try:
        point_index = 0
        for t, c in points:
            for alpha in attenuations:
                medium = MediumState(t, pressure, density, c)
                seeds = [
                    base_seed + 10007 * point_index + rep
                    for rep in range(records_per_point)
                ]
                truth = None
                for seed in seeds:
                    scenario = SynthesisScenario(
                        geometry=dev.settings.geometry,
                        medium=medium,
                        attenuation=alpha,
                        emit_amplitude=emit,
                        burst_cycles=burst_cycles,
                        noise_rms=noise_rms,
                        seed=seed,
                        sample_rate=sample_rate,
                    )
                    wave, truth = waveform.synthesize(scenario)
                    record = dev.run_cycle(
                        lambda _settings, _w=wave: CycleInput(
                            _w, temperature=t, pressure=pressure
                        )
                    )
                    rows.append(_record_row(record))
                truth_lines.append(json.dumps({
                    "point": point_index,
                    "temperature_c": t,
                    "sound_speed_mps": truth.sound_speed,
                    "attenuation_np_m": truth.attenuation,
                    "t_near_s": truth.t_near,
                    "t_far_s": truth.t_far,
                    "a_near_mv": truth.a_near,
                    "a_far_mv": truth.a_far,
                    "seeds": seeds,
                }, sort_keys=True))
                point_index += 1
    except SvpsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA

    try:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(",".join(SIMULATE_COLUMNS) + "\n")
            fh.writelines(",".join(row) + "\n" for row in rows)
        if truth_path:
            with open(truth_path, "w", encoding="utf-8") as fh:
                fh.writelines(line + "\n" for line in truth_lines)
        if dump_path:
            with open(dump_path, "wb") as fh:
                fh.write(dev.dump_memory())
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"wrote {len(rows)} records over {point_index} sweep points to {csv_path}")
    return EXIT_OK


def cmd_decode(args) -> int:
    try:
        with open(args.dump, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    rows = []
    status = EXIT_OK
    try:
        for frame in iter_frames(blob):
            if frame.opcode != Opcode.RECORD_DATA:
                raise FrameError(f"unexpected opcode 0x{frame.opcode:02X} in dump")
            record = DeviceRecord.unpack(frame.payload)
            row = _record_row(record)[:-1] + [
                _fmt(record.temperature),
                _fmt(record.pressure),
                str(record.flags),
            ] + ["1" if record.flags & bit else "0" for bit in _FLAG_COLUMNS]
            rows.append(row)
    except (FrameError, DomainError) as exc:
        print(f"warning: dump truncated or corrupt: {exc}; "
              f"kept {len(rows)} record(s)", file=sys.stderr)
        status = EXIT_DATA

    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        out.write(",".join(DECODE_COLUMNS) + "\n")
        out.writelines(",".join(row) + "\n" for row in rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return status


def cmd_calibrate(args) -> int:
    t_min, t_max = CONSTANTS.pure_water_t_range
    for t in args.temperature:
        if not t_min <= t <= t_max:
            print(
                f"error: temperature {t:g} outside reference domain "
                f"[{t_min:g}, {t_max:g}]",
                file=sys.stderr,
            )
            return EXIT_USAGE

    settings = DeviceSettings(
        comparator=ComparatorConfig(args.threshold),
        geometry=SensorGeometry(first_reflector_transmission=args.transmission),
    )
    dev = Device(settings=settings)
    budget = CONSTANTS.sound_speed_static_error
    rows = []
    worst = 0.0
    for t in args.temperature:
        reference = pure_water_sound_speed(t)
        scenario = SynthesisScenario(
            geometry=settings.geometry,
            medium=MediumState(t, 101.325, args.density, reference),
            attenuation=0.0,
            emit_amplitude=args.emit,
        )

        def source(_settings, _scenario=scenario):
            wave, _ = waveform.synthesize(_scenario)
            return CycleInput(wave, temperature=t)

        record = dev.run_cycle(source)
        residual = record.sound_speed - reference
        if math.isnan(residual):
            print(f"error: no echo at T={t:g} C", file=sys.stderr)
            return EXIT_DATA
        worst = max(worst, abs(residual))
        rows.append([_fmt(t), _fmt(reference), _fmt(record.sound_speed), _fmt(residual)])

    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        out.write(",".join(CALIBRATE_COLUMNS) + "\n")
        out.writelines(",".join(row) + "\n" for row in rows)
    finally:
        if out is not sys.stdout:
            out.close()
    if worst > budget:
        print(
            f"error: residual {worst:.3g} m/s exceeds budget {budget:g} m/s",
            file=sys.stderr,
        )
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_protocol_send(args) -> int:
    frames_hex = list(args.frame)
    if args.file:
        try:
            with open(args.file, "r", encoding="utf-8") as fh:
                frames_hex.extend(
                    line.strip() for line in fh if line.strip()
                )
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    if not frames_hex:
        print("error: no frames given", file=sys.stderr)
        return EXIT_USAGE

    payloads = []
    for text in frames_hex:
        compact = "".join(text.split())
        try:
            payloads.append(bytes.fromhex(compact))
        except ValueError:
            print(f"error: not a hex string: {text!r}", file=sys.stderr)
            return EXIT_USAGE

    dev = Device.power_on()
    for data in payloads:
        for response in dev.handle_command(data):
            print(response.encode().hex().upper())
    if dev.frame_error_count:
        print(f"dropped {dev.frame_error_count} bad frame(s)", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svpsim",
        description="Simulate and decode the pulse-echo sound speed instrument.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a sweep described by a manifest")
    p_sim.add_argument("manifest", help="key=value manifest file")
    p_sim.set_defaults(func=cmd_simulate)

    p_dec = sub.add_parser("decode", help="decode a binary memory dump to CSV")
    p_dec.add_argument("dump", help="memory dump file")
    p_dec.add_argument("--out", help="CSV output path (default stdout)")
    p_dec.set_defaults(func=cmd_decode)

    p_cal = sub.add_parser(
        "calibrate", help="check the channel against the pure-water reference"
    )
    p_cal.add_argument("temperature", nargs="+", type=float, help="deg C")
    p_cal.add_argument("--density", type=float, default=998.2, help="kg/m^3")
    p_cal.add_argument("--threshold", type=int, default=20, help="comparator mV")
    p_cal.add_argument("--emit", type=float, default=700.0, help="burst amplitude mV")
    p_cal.add_argument(
        "--transmission", type=float, default=0.5,
        help="first reflector amplitude transmission",
    )
    p_cal.add_argument("--out", help="CSV output path (default stdout)")
    p_cal.set_defaults(func=cmd_calibrate)

    p_send = sub.add_parser(
        "protocol-send", help="feed hex frames to a fresh device, print responses"
    )
    p_send.add_argument("frame", nargs="*", help="hex-encoded frame")
    p_send.add_argument("--file", help="file with one hex frame per line")
    p_send.set_defaults(func=cmd_protocol_send)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; keep our usage code stable
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
