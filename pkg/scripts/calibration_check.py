#!/usr/bin/env python3
"""Closed-loop check against the pure-water sound speed reference.

For each temperature, water stillness is assumed and the true sound speed is
taken from the reference polynomial; the instrument measures it back through
the full synthesis -> comparator -> TDC chain.  Exits 1 when any residual
exceeds the 0.02 m/s static error budget.
"""

import argparse
import sys

from svpsim import (
    ComparatorConfig,
    CycleInput,
    Device,
    DeviceSettings,
    MediumState,
    SensorGeometry,
    SynthesisScenario,
    pure_water_sound_speed,
    synthesize,
)

BUDGET_MPS = 0.02


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--t-start", type=float, default=0.0)
    parser.add_argument("--t-stop", type=float, default=30.0)
    parser.add_argument("--t-step", type=float, default=5.0)
    args = parser.parse_args()

    geometry = SensorGeometry(first_reflector_transmission=1.0)
    device = Device(DeviceSettings(
        comparator=ComparatorConfig(30), geometry=geometry))

    print(f"{'T [C]':>6} {'reference [m/s]':>16} {'measured [m/s]':>15} "
          f"{'residual [m/s]':>15}")
    worst = 0.0
    t = args.t_start
    while t <= args.t_stop + 1e-9:
        reference = pure_water_sound_speed(t)
        scenario = SynthesisScenario(
            geometry=geometry,
            medium=MediumState(t, 101.325, 998.2, sound_speed=reference),
            attenuation=0.0,
            emit_amplitude=550.0,
        )
        wave, _ = synthesize(scenario)
        record = device.run_cycle(lambda _s, w=wave: CycleInput(w, temperature=t))
        residual = record.sound_speed - reference
        worst = max(worst, abs(residual))
        print(f"{t:6.1f} {reference:16.4f} {record.sound_speed:15.4f} "
              f"{residual:15.5f}")
        t += args.t_step

    print(f"\nworst |residual| = {worst:.5f} m/s "
          f"({'within' if worst <= BUDGET_MPS else 'OVER'} the "
          f"{BUDGET_MPS} m/s budget)")
    return 0 if worst <= BUDGET_MPS else 1


if __name__ == "__main__":
    sys.exit(main())
