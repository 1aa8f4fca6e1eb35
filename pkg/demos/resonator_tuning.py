"""
Resonator characterisation and frequency stabilisation
======================================================

A complex reflection fit separates internal from external loss, and a PD
loop on the tuning-laser power holds the resonance on the spin transition
after a step disturbance. The pulse-sequence helper keeps the average laser
heating constant by padding each sequence.
"""
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from nvres import (ControllerState, ResonatorState, ThermalPlant, duty_cycle_compensation,
                   fit_s11_resonance, s11_response, simulate_tuning_loop)

OUT = Path(__file__).with_suffix(".png")

# reflection trace with 0.3% complex noise
f = np.linspace(2.688, 2.712, 241)
rng = np.random.default_rng(0)
gamma = s11_response(ResonatorState(2.7, 1275, 1328), f)
gamma = gamma + 3e-3 * (rng.standard_normal(f.size) + 1j * rng.standard_normal(f.size))
fit = fit_s11_resonance(f, gamma)
for k in ("q_internal", "q_external", "q_loaded"):
    print(f"{k:11s} {fit[k]:8.1f} +- {fit.ci95[k]:.1f}")
print("coupling:", fit.flags[-1])

# +10 MHz step one second in
plant = ThermalPlant()
trace = simulate_tuning_loop(plant, ControllerState.for_plant(plant), 21.0,
                             disturbance=10e-3, disturbance_time=1.0)
print(f"settled after {trace.settling_time(0.5e-3, after=1.0) - 1.0:.2f} s, "
      f"final error {trace.error[-1] * 1e3:+.3f} MHz")

for t1 in (0.02, 4.0, 12.5):
    print(f"T1 = {t1:5.2f} us -> pad T2 = {duty_cycle_compensation(t1, 40.0):5.2f} us")

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
ax1.plot(gamma.real, gamma.imag, ".", ms=2)
ax1.set_aspect("equal")
ax1.set_xlabel("Re S11")
ax1.set_ylabel("Im S11")
ax2.plot(trace.t, trace.error * 1e3)
ax2.set_xlim(0, 5)
ax2.set_xlabel("t (s)")
ax2.set_ylabel("f0 error (MHz)")
fig.tight_layout()
fig.savefig(OUT, dpi=120)
print("wrote", OUT)
