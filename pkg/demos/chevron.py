"""
Chevron: Rabi frequency versus resonator detuning
=================================================

The drive stays on the spin line while the resonator is tuned across it.
Omega_R^2 traces the resonator's Lorentzian power response on top of a
non-resonant floor; its width gives the loaded Q and its height the on/off
enhancement.
"""
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from nvres import CHEVRON_RESONATOR, chevron_quality_factor, lorentzian, simulate_chevron

OUT = Path(__file__).with_suffix(".png")

detunings = np.arange(-60.0, 60.1, 5.0)  # MHz
res = simulate_chevron(detunings, CHEVRON_RESONATOR, power=0.2)
q, enhancement, fit = chevron_quality_factor(res, CHEVRON_RESONATOR.f0)
print(f"Q_L = {q:.1f} (configured {CHEVRON_RESONATOR.q_loaded:.1f}), enhancement {enhancement:.2f}")

fine = np.linspace(-60, 60, 400)
fig, ax = plt.subplots(figsize=(5, 3.5))
ax.plot(detunings, res.omega_r**2, "o")
ax.plot(fine, lorentzian(fine, fit["center"], fit["fwhm"], fit["amplitude"], fit["offset"]))
ax.set_xlabel("resonator detuning (MHz)")
ax.set_ylabel("Omega_R^2 (MHz^2)")
fig.tight_layout()
fig.savefig(OUT, dpi=120)
print("wrote", OUT)
