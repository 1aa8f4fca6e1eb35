"""
Microwave power budget and B1 conversion
========================================

Net gain of the line from source to antenna, and the field per sqrt(W)
implied by a measured Rabi slope.
"""
from nvres import MEASURED_LOSS_CHAIN, chain_gain, conversion_pipeline, power_at_antenna

for label, gain in MEASURED_LOSS_CHAIN.stages:
    print(f"{label:28s} {gain:+7.2f} dB")
print(f"{'net':28s} {chain_gain(MEASURED_LOSS_CHAIN):+7.2f} dB")
print(f"1 W at the source delivers {power_at_antenna(1.0, MEASURED_LOSS_CHAIN):.3f} W")

conv = conversion_pipeline(211.6)
print(f"B1 total {conv.b1_total_mt_per_sqrtw:.3f} mT/sqrt(W), perpendicular "
      f"{conv.b1_perp_mt_per_sqrtw:.3f} mT/sqrt(W)")
print(f"Rabi slope for a field perpendicular to the NV axis: "
      f"{conv.theoretical_rabi_mhz_per_sqrtw:.1f} MHz/sqrt(W)")
