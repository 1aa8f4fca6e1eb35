"""
Rabi frequency across the sample
================================

The laser spot is stepped along x. At each position a fraction of the
microwave power is reflected at the antenna; the fitted Rabi frequency is
corrected for that loss so only the B1 profile remains.
"""
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from nvres import simulate_position_sweep

OUT = Path(__file__).with_suffix(".png")

x = np.linspace(-0.6, 0.6, 13)  # mm
s11 = np.full(x.size, -7.6)  # dB, measured reflection at each spot
res = simulate_position_sweep(x, s11)
centre = res.omega_r[np.argmin(np.abs(x))]
print(f"centre {centre:.2f} MHz, edge/centre at 0.5 mm "
      f"{np.interp(0.5, x, res.omega_r) / centre:.3f}")

fig, ax = plt.subplots(figsize=(5, 3.5))
ax.plot(x, res.extra["omega_measured_mhz"], "o", label="measured")
ax.plot(x, res.omega_r, "s", label="compensated")
ax.set_xlabel("x (mm)")
ax.set_ylabel("Rabi frequency (MHz)")
ax.legend()
fig.tight_layout()
fig.savefig(OUT, dpi=120)
print("wrote", OUT)
