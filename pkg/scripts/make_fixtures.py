"""
Regenerate the reconstructed calibration fixtures in src/nvres/data/.

None of these are measured data. The temperature curve uses a Barrett-type
permittivity law, eps ~ 1 / ((T1/2) coth(T1/2T) - T0), with f ~ eps^-1/2,
anchored at 2.700 GHz (4 K) and 2.967 GHz (17 K). The laser curve is a
saturating heater response spanning ~100 MHz of tuning.
"""
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from nvres.fields import ParametricB1, save_field_grid, synthetic_field_grid
from nvres.fitting import decaying_sinusoid
from nvres.resonator import ResonatorState, s11_response

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "nvres" / "data"
CONFIG_DATA = ROOT / "configs" / "data"
T1 = 56.0


def inv_eps(t, t0):
    return 0.5 * T1 / np.tanh(T1 / (2 * t)) - t0


def freq(t, t0):
    return 2.967 * np.sqrt(inv_eps(t, t0) / inv_eps(17.0, t0))


def main():
    t0 = brentq(lambda x: freq(4.0, x) - 2.700, 0.0, 27.0)
    temps = np.arange(4.0, 41.0, 1.0)
    with open(DATA / "freq_vs_temperature.csv", "w") as fh:
        fh.write("# reconstructed fixture: resonator frequency vs temperature\n")
        fh.write(f"# Barrett law T1={T1} K, T0={t0:.6f} K, anchored 2.700 GHz @ 4 K, 2.967 GHz @ 17 K\n")
        fh.write("temperature_k,frequency_ghz\n")
        for t in temps:
            fh.write(f"{t:.1f},{freq(t, t0):.9f}\n")

    powers = np.arange(0.0, 40.5, 2.0)
    with open(DATA / "freq_vs_laser_power.csv", "w") as fh:
        fh.write("# reconstructed fixture: resonator frequency vs tuning-laser power\n")
        fh.write("# f = 2.930 + 0.120 (1 - exp(-P / 25 mW)) GHz\n")
        fh.write("laser_power_mw,frequency_ghz\n")
        for p in powers:
            fh.write(f"{p:.1f},{2.930 + 0.120 * (1 - np.exp(-p / 25.0)):.9f}\n")

    grid = synthetic_field_grid(ParametricB1.calibrated())
    save_field_grid(grid, DATA / "b1_grid_reconstructed.json")

    # example data for the `fit` subcommand and configs/fit_s11.json
    CONFIG_DATA.mkdir(exist_ok=True)
    state = ResonatorState(2.7, 1275.0, 1328.0)
    f = np.linspace(2.7 - 0.012, 2.7 + 0.012, 241)
    g = s11_response(state, f)
    with open(CONFIG_DATA / "s11_trace.csv", "w") as fh:
        fh.write("# synthetic reflection trace: f0 2.7 GHz, internal Q 1275, external Q 1328\n")
        fh.write("freq_ghz,re,im\n")
        for a, z in zip(f, g):
            fh.write(f"{a:.9f},{z.real:.12g},{z.imag:.12g}\n")

    rng = np.random.default_rng(8)
    t = np.linspace(0.0, 1.0, 201)
    y = decaying_sinusoid(t, 8.0, 0.5, 1.5, 0.0, 0.5, 0.5) + rng.normal(0, 0.01, t.size)
    with open(CONFIG_DATA / "rabi_trace.csv", "w") as fh:
        fh.write("# synthetic damped Rabi trace: 8 MHz, tau 0.5 us, n 1.5, 1% noise (seed 8)\n")
        fh.write("t_us,population\n")
        for a, b in zip(t, y):
            fh.write(f"{a:.6f},{b:.9f}\n")


if __name__ == "__main__":
    main()
