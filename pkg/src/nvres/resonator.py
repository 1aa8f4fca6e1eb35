"""
Dielectric resonator: reflection response, field enhancement, thermal tuning.

Frequencies of the resonator are in GHz, detunings in MHz. The thermal
plant and calibration tables shipped with the package are reconstructed
fixtures with the right trends, not measured data.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import OutOfRangeError


@dataclass(frozen=True)
class ResonatorState:
    f0: float  # GHz
    q_internal: float
    q_external: float
    temperature: float = 17.0  # K
    material_epsilon_r: float = 4300.0

    def __post_init__(self):
        if not self.f0 > 0:
            raise ValueError("f0 must be positive")
        if not (self.q_internal > 0 and self.q_external > 0):
            raise ValueError("quality factors must be positive")

    @property
    def q_loaded(self) -> float:
        return loaded_q(self.q_internal, self.q_external)

    @property
    def coupling(self) -> float:
        """kappa = Q_I / Q_E; > 1 is overcoupled."""
        return self.q_internal / self.q_external

    @classmethod
    def from_loaded(cls, f0: float, q_loaded: float, q_internal: float, **kw) -> "ResonatorState":
        if not q_loaded < q_internal:
            raise ValueError("q_loaded must be below q_internal")
        return cls(f0, q_internal, 1.0 / (1.0 / q_loaded - 1.0 / q_internal), **kw)


def loaded_q(q_internal: float, q_external: float) -> float:
    """1/Q_L = 1/Q_I + 1/Q_E. An infinite Q drops out."""
    if not (q_internal > 0 and q_external > 0):
        raise ValueError("quality factors must be positive")
    return 1.0 / (1.0 / q_internal + 1.0 / q_external)


# Critical-coupling VNA fit and the resonator used for the detuning sweep.
CRITICAL_COUPLING = ResonatorState(2.7, 1275.0, 1328.0, temperature=4.0)
CHEVRON_RESONATOR = ResonatorState.from_loaded(2.967, 190.7, 752.0)
CHEVRON_ENHANCEMENT = 7.1


def s11_response(state: ResonatorState, f):
    """
    One-port reflection coefficient of the resonator seen through the loop.

    Gamma = (d - i x) / (1 + i x) with x = 2 Q_L (f - f0) / f0 and
    d = Q_L (1/Q_E - 1/Q_I) = (kappa - 1) / (kappa + 1). Far from
    resonance Gamma -> -1 (shorted loop).
    """
    f = np.asarray(f, dtype=float)
    ql = state.q_loaded
    x = 2 * ql * (f - state.f0) / state.f0
    d = ql * (1.0 / state.q_external - 1.0 / state.q_internal)
    g = np.asarray((d - 1j * x) / (1 + 1j * x))
    return g if g.ndim else complex(g)


def enhancement_factor(state: ResonatorState, delta, background: float, peak: float = 1.0):
    """
    B1 multiplier for a drive detuned by ``delta`` MHz from the resonator.

    m^2 = background^2 + peak^2 / (1 + (2 Q_L delta / f0)^2), i.e. the
    resonant power enhancement is Lorentzian with FWHM f0/Q_L on top of a
    non-resonant floor.
    """
    if background < 0:
        raise ValueError("background must be >= 0")
    delta_ghz = np.asarray(delta, dtype=float) * 1e-3
    x = 2 * state.q_loaded * delta_ghz / state.f0
    m = np.sqrt(background**2 + peak**2 / (1 + x**2))
    return m if m.ndim else float(m)


def background_for_enhancement(ratio: float, peak: float = 1.0) -> float:
    """Floor that gives m(0)/m(inf) = ``ratio``."""
    if not ratio > 1:
        raise ValueError("enhancement ratio must exceed 1")
    return peak / np.sqrt(ratio**2 - 1)


def compensated_gain(s11_db):
    """
    Fraction of incident power absorbed, in dB: 10 log10(1 - |S11|^2).

    Returns -inf for total reflection (0 dB) and 0 for S11 = -inf.
    """
    s = np.asarray(s11_db, dtype=float)
    if np.any(s > 0):
        raise ValueError("S11 above 0 dB is unphysical for a passive load")
    with np.errstate(divide="ignore"):
        g = 10 * np.log10(1 - 10 ** (s / 10))
    return g if g.ndim else float(g)


# --------------------------------------------------------------------------
# Thermal tuning
# --------------------------------------------------------------------------

def _read_table(path) -> tuple:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                continue  # header
    if not rows:
        raise ValueError(f"{path}: no rows")
    x, y = np.array(rows).T
    return x, y


@dataclass(frozen=True, eq=False)
class CalibrationTable:
    """Monotone lookup table with shape-preserving cubic interpolation."""

    x: np.ndarray
    y: np.ndarray
    name: str = ""

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ValueError("calibration table needs matching 1-D columns")
        if not np.all(np.diff(x) > 0):
            raise ValueError("calibration abscissa must be strictly increasing")
        dy = np.diff(y)
        if not (np.all(dy > 0) or np.all(dy < 0)):
            raise ValueError("calibration values must be strictly monotonic")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "_fwd", PchipInterpolator(x, y, extrapolate=False))

    @classmethod
    def from_csv(cls, path, name: str = "") -> "CalibrationTable":
        x, y = _read_table(path)
        return cls(x, y, name or Path(path).stem)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v < self.x[0]) or np.any(v > self.x[-1]):
            raise OutOfRangeError(f"{self.name}: {v} outside [{self.x[0]}, {self.x[-1]}]")
        out = self._fwd(v)
        return out if out.ndim else float(out)

    def inverse(self, value):
        """Abscissa where the interpolant equals ``value`` (root of the forward curve)."""
        value = np.asarray(value, dtype=float)
        lo, hi = min(self.y[0], self.y[-1]), max(self.y[0], self.y[-1])
        if np.any(value < lo) or np.any(value > hi):
            raise OutOfRangeError(f"{self.name}: {value} outside [{lo}, {hi}]")
        sign = 1.0 if self.y[-1] > self.y[0] else -1.0
        out = np.empty(value.shape)
        for idx, v in np.ndenumerate(value):
            k = int(np.clip(np.searchsorted(sign * self.y, sign * v), 1, self.x.size - 1))
            a, b = self.x[k - 1], self.x[k]
            out[idx] = brentq(lambda u: float(self._fwd(u)) - v, a, b, xtol=1e-14, rtol=1e-15)
        return out if out.ndim else float(out)


def _data_file(name: str):
    return resources.files("nvres") / "data" / name


def default_temperature_table() -> CalibrationTable:
    return CalibrationTable.from_csv(_data_file("freq_vs_temperature.csv"), "freq_vs_temperature")


def default_laser_table() -> CalibrationTable:
    return CalibrationTable.from_csv(_data_file("freq_vs_laser_power.csv"), "freq_vs_laser_power")


@dataclass(frozen=True)
class ThermalPlant:
    """
    Single-pole thermal lag between tuning-laser power and resonance frequency.

    The steady-state frequency for a laser power P is ``freq_vs_laser_power(P)``
    plus any external offset (a disturbance, GHz).
    """

    tau_thermal: float = 2.0  # s
    freq_vs_temp: CalibrationTable = None
    freq_vs_laser_power: CalibrationTable = None

    def __post_init__(self):
        if not self.tau_thermal > 0:
            raise ValueError("tau_thermal must be positive")
        if self.freq_vs_temp is None:
            object.__setattr__(self, "freq_vs_temp", default_temperature_table())
        if self.freq_vs_laser_power is None:
            object.__setattr__(self, "freq_vs_laser_power", default_laser_table())

    @property
    def max_laser_power(self) -> float:
        return float(self.freq_vs_laser_power.x[-1])

    def steady_state(self, laser_power: float, disturbance: float = 0.0) -> float:
        p = min(max(laser_power, self.freq_vs_laser_power.x[0]), self.max_laser_power)
        return self.freq_vs_laser_power(p) + disturbance

    def step(self, f_now: float, laser_power: float, dt: float, disturbance: float = 0.0) -> float:
        """Exact update of the first-order lag over ``dt`` seconds."""
        target = self.steady_state(laser_power, disturbance)
        return target + (f_now - target) * np.exp(-dt / self.tau_thermal)


def temperature_to_frequency(plant: ThermalPlant, temperature):
    """Resonance frequency (GHz) at a resonator temperature (K)."""
    return plant.freq_vs_temp(temperature)


@dataclass(frozen=True)
class ControllerState:
    """
    PD controller driving the tuning laser.

    output = bias + k_p * e + k_d * de/dt, clamped to [0, max_output], with
    e = setpoint - measured in GHz and the output in mW. There is no integral
    term, so a residual offset of roughly disturbance / (1 + loop gain) remains.
    """

    k_p: float = 1.0e4  # mW/GHz
    k_d: float = 1.0e2  # mW s/GHz
    setpoint: float = 2.967  # GHz
    last_error: float = 0.0  # GHz
    output: float = 0.0  # mW
    bias: float = 0.0  # mW
    max_output: float = 40.0  # mW

    def __post_init__(self):
        if not 0 <= self.output <= self.max_output:
            raise ValueError("output outside actuator bounds")

    @classmethod
    def for_plant(cls, plant: ThermalPlant, setpoint: float = 2.967, **kw) -> "ControllerState":
        """Controller biased at the laser power that holds ``setpoint`` undisturbed."""
        bias = float(plant.freq_vs_laser_power.inverse(setpoint))
        return cls(setpoint=setpoint, output=bias, bias=bias,
                   max_output=plant.max_laser_power, **kw)


def controller_step(ctrl: ControllerState, measured_f0: float, dt: float):
    """Advance the controller by one sample; returns (new_state, laser_power_mw)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    err = ctrl.setpoint - measured_f0
    u = ctrl.bias + ctrl.k_p * err + ctrl.k_d * (err - ctrl.last_error) / dt
    u = float(min(max(u, 0.0), ctrl.max_output))
    return replace(ctrl, last_error=err, output=u), u


@dataclass
class LoopTrace:
    t: np.ndarray
    f0: np.ndarray
    error: np.ndarray
    output: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "f0_ghz", "error_ghz", "laser_mw"])
            for row in zip(self.t, self.f0, self.error, self.output):
                w.writerow([f"{v:.12g}" for v in row])

    def settling_time(self, tol_ghz: float, after: float = 0.0) -> float:
        """First time after ``after`` from which |error| stays below ``tol_ghz``."""
        mask = self.t >= after
        bad = np.nonzero(mask & (np.abs(self.error) >= tol_ghz))[0]
        if bad.size == 0:
            return float(self.t[mask][0])
        if bad[-1] + 1 >= self.t.size:
            return float("inf")
        return float(self.t[bad[-1] + 1])


def simulate_tuning_loop(plant: ThermalPlant, ctrl: ControllerState, duration: float,
                         dt: float = 0.05, disturbance: float = 0.0,
                         disturbance_time: float = 0.0, f_initial: float | None = None) -> LoopTrace:
    """
    Closed-loop run: measure f0, update the controller, advance the plant.

    ``disturbance`` (GHz) is a step offset of the resonance frequency applied
    at ``disturbance_time``; it shifts f0 instantly and persists, so the
    controller has to pull the laser-heated part of f0 back by the same amount.
    """
    n = int(round(duration / dt)) + 1
    f_laser = ctrl.setpoint if f_initial is None else f_initial
    t = np.arange(n) * dt
    fs, errs, outs = np.empty(n), np.empty(n), np.empty(n)
    for k in range(n):
        f = f_laser + (disturbance if t[k] >= disturbance_time else 0.0)
        ctrl, u = controller_step(ctrl, f, dt)
        fs[k], errs[k], outs[k] = f, ctrl.last_error, u
        f_laser = plant.step(f_laser, u, dt)
    return LoopTrace(t, fs, errs, outs)


def duty_cycle_compensation(t1_mw: float, total: float) -> float:
    """Padding pulse length T2 (us) keeping T1 + T2 fixed."""
    if t1_mw < 0:
        raise ValueError("t1_mw must be non-negative")
    if t1_mw > total:
        raise ValueError(f"t1_mw={t1_mw} exceeds the fixed total {total}")
    return total - t1_mw
