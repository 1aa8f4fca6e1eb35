"""
Microwave power bookkeeping and the power-to-field conversion factor.

A measured Rabi slope (MHz per sqrt(W)) is turned into field amplitudes via

    b1_perp  = sqrt(2) * slope / gamma_e
    b1_total = b1_perp / sin(alpha)

where alpha is the angle between B1 and the NV axes. The sqrt(2) undoes the
rotating-wave halving for a spin-1 transition, so the theoretical Rabi
conversion for a perpendicular field of the full amplitude is
gamma_e * b1_total / sqrt(2) = slope / sin(alpha).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .spin import GAMMA_E, TETRAHEDRAL_ANGLE


@dataclass(frozen=True)
class LossChain:
    stages: tuple  # ((label, gain_db), ...)
    reference_freq_ghz: float = 2.967

    def __post_init__(self):
        stages = tuple((str(label), float(gain)) for label, gain in self.stages)
        if not stages:
            raise ValueError("a loss chain needs at least one stage")
        if not all(np.isfinite(g) for _, g in stages):
            raise ValueError("stage gains must be finite")
        object.__setattr__(self, "stages", stages)

    def __add__(self, other: "LossChain") -> "LossChain":
        return LossChain(self.stages + other.stages, self.reference_freq_ghz)

    def without(self, label: str) -> "LossChain":
        return LossChain(tuple(s for s in self.stages if s[0] != label), self.reference_freq_ghz)

    def to_dict(self) -> dict:
        return {"reference_freq_ghz": self.reference_freq_ghz,
                "stages": [{"label": label, "gain_db": g} for label, g in self.stages]}

    @classmethod
    def from_dict(cls, d: dict) -> "LossChain":
        return cls(tuple((s["label"], s["gain_db"]) for s in d["stages"]),
                   d.get("reference_freq_ghz", 2.967))

    @classmethod
    def from_json(cls, path) -> "LossChain":
        return cls.from_dict(json.loads(Path(path).read_text()))


# measured line at 2.967 GHz
MEASURED_LOSS_CHAIN = LossChain((
    ("Attenuators", -31.25),
    ("Microwave power amplifier", +45.41),
    ("Microwave power combiner", -3.36),
    ("Fridge microwave line", -7.78),
    ("Microwave circulator", -0.60),
    ("Antenna reflection loss", -7.60),
))


def chain_gain(chain: LossChain) -> float:
    """Net gain in dB."""
    return float(sum(g for _, g in chain.stages))


def power_at_antenna(p_source: float, chain: LossChain) -> float:
    if not p_source > 0:
        raise ValueError("p_source must be positive")
    return p_source * 10 ** (chain_gain(chain) / 10)


@dataclass(frozen=True)
class ConversionResult:
    slope_mhz_per_sqrtw: float
    alpha_deg: float
    gamma_e: float
    b1_perp_mt_per_sqrtw: float
    b1_total_mt_per_sqrtw: float
    theoretical_rabi_mhz_per_sqrtw: float

    def to_dict(self) -> dict:
        return asdict(self)


def conversion_pipeline(slope: float, alpha: float = TETRAHEDRAL_ANGLE,
                        gamma_e: float = GAMMA_E) -> ConversionResult:
    """Convert a Rabi slope (MHz/sqrt(W)) into B1 conversion factors (mT/sqrt(W))."""
    if not slope > 0:
        raise ValueError("slope must be positive")
    if not 0 < alpha <= 90:
        raise ValueError("alpha must lie in (0, 90] degrees")
    sin_a = np.sin(np.radians(alpha))
    b1_perp = np.sqrt(2) * slope / gamma_e
    b1_total = b1_perp / sin_a
    return ConversionResult(float(slope), float(alpha), float(gamma_e), float(b1_perp),
                            float(b1_total), float(gamma_e * b1_total / np.sqrt(2)))
