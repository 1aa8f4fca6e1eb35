"""
Ensemble Rabi signals and the simulated experiments built on them.

The detected signal is the excitation-weighted average of the two-level
Rabi formula over

* the four NV orientations (each sees its own B1 projection and B0 shift),
* the three 14N hyperfine lines,
* a Gaussian spread of detunings (Gauss-Hermite nodes),
* the optical collection volume (tensor Gauss-Legendre quadrature weighted
  by the focused-beam intensity).

All orientations and hyperfine lines carry equal weight.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .fields import BeamModel, ParametricB1, b1_at, laser_intensity, spot_radius
from .fitting import FitResult, fit_decaying_sinusoid, fit_lorentzian
from .resonator import (CHEVRON_ENHANCEMENT, ResonatorState, background_for_enhancement,
                        compensated_gain, enhancement_factor)
from .spin import (NV_ORIENTATIONS, RabiTrace, SpinParams, effective_drive_frequency,
                   hamiltonian_eigenfrequencies, rabi_population)

TWO_PI = 2 * np.pi
B0_DEFAULT = (0.0, 0.0, 5.031)  # mT along [001]
DIAMOND_BOUNDS = ((-1.3, -1.3, -0.125), (1.3, 1.3, 0.125))  # mm


@dataclass(frozen=True)
class EnsembleParams:
    """
    Inhomogeneity and quadrature settings.

    ``detunings`` optionally replaces the Gauss-Hermite nodes with an explicit
    discrete distribution ((offset_mhz, weight), ...). ``orientations`` picks
    which of the four NV axes contribute.
    """

    broadening_sigma: float = 1.868  # MHz
    n_detuning_samples: int = 15
    volume_bounds: tuple = DIAMOND_BOUNDS
    quadrature_points: tuple = (8, 8, 6)
    rng_seed: int = 0
    orientations: tuple = (0, 1, 2, 3)
    detunings: tuple | None = None
    transverse_extent: float = 4.0  # in units of the local beam radius

    def __post_init__(self):
        if self.broadening_sigma < 0:
            raise ValueError("broadening_sigma must be >= 0")
        if self.n_detuning_samples < 1:
            raise ValueError("n_detuning_samples must be >= 1")
        if len(self.quadrature_points) != 3 or min(self.quadrature_points) < 2:
            raise ValueError("quadrature_points needs >= 2 nodes per axis")
        lo, hi = (np.asarray(b, dtype=float) for b in self.volume_bounds)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(hi <= lo):
            raise ValueError("volume_bounds must be ((xmin, ymin, zmin), (xmax, ymax, zmax))")
        if not self.orientations or any(o not in range(4) for o in self.orientations):
            raise ValueError("orientations must be a non-empty subset of 0..3")


def detuning_nodes(ens: EnsembleParams):
    """Offsets (MHz) and normalised weights for the spectral average."""
    if ens.detunings is not None:
        off, w = np.asarray(ens.detunings, dtype=float).T
        return off, w / w.sum()
    if ens.broadening_sigma == 0 or ens.n_detuning_samples == 1:
        return np.zeros(1), np.ones(1)
    x, w = np.polynomial.hermite.hermgauss(ens.n_detuning_samples)
    return np.sqrt(2) * ens.broadening_sigma * x, w / np.sqrt(np.pi)


def volume_nodes(beam: BeamModel, ens: EnsembleParams):
    """
    Quadrature points (N, 3) in mm and weights summing to 1.

    Axially the nodes span the volume bounds; transversely they cover
    +-transverse_extent * w(z) about the beam axis, clipped to the bounds.
    """
    (x0, y0, z0), (x1, y1, z1) = ens.volume_bounds
    nx, ny, nz = ens.quadrature_points
    gx, wx = np.polynomial.legendre.leggauss(nx)
    gy, wy = np.polynomial.legendre.leggauss(ny)
    gz, wz = np.polynomial.legendre.leggauss(nz)
    zs = 0.5 * (z1 - z0) * gz + 0.5 * (z1 + z0)
    wzs = 0.5 * (z1 - z0) * wz
    pts, wts = [], []
    for z, wzk in zip(zs, wzs):
        r = ens.transverse_extent * spot_radius(beam, z) * 1e-3
        xa, xb = max(beam.mu_x - r, x0), min(beam.mu_x + r, x1)
        ya, yb = max(beam.mu_y - r, y0), min(beam.mu_y + r, y1)
        if xb <= xa or yb <= ya:
            continue
        xs = 0.5 * (xb - xa) * gx + 0.5 * (xb + xa)
        ys = 0.5 * (yb - ya) * gy + 0.5 * (yb + ya)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        W = np.outer(0.5 * (xb - xa) * wx, 0.5 * (yb - ya) * wy) * wzk
        W = W * laser_intensity(beam, X, Y, z)
        pts.append(np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, z)]))
        wts.append(W.ravel())
    if not pts:
        raise ValueError("beam does not overlap the volume bounds")
    pts, wts = np.vstack(pts), np.concatenate(wts)
    return pts, wts / wts.sum()


def central_transition(b0=B0_DEFAULT, spin: SpinParams = SpinParams()) -> float:
    """ms=0 -> +1, m_i=0 frequency (GHz) averaged over the four orientations."""
    return float(np.mean([hamiltonian_eigenfrequencies(b0, o, 0, spin)[1] for o in NV_ORIENTATIONS]))


def default_field() -> ParametricB1:
    return ParametricB1.calibrated()


def total_rabi_signal(t_grid, b0=B0_DEFAULT, field=None, beam: BeamModel = BeamModel(),
                      ens: EnsembleParams = EnsembleParams(), spin: SpinParams = SpinParams(),
                      drive_freq: float | None = None, power: float = 1.0,
                      noise: float = 0.0) -> RabiTrace:
    """
    Ensemble- and volume-averaged ms=+1 population at times ``t_grid`` (us).

    ``field`` is any B1 source accepted by ``b1_at`` (defaults to the
    calibrated parametric model); ``power`` in W; ``drive_freq`` in GHz
    (defaults to the central transition). ``noise`` adds Gaussian noise of
    that standard deviation, seeded by ``ens.rng_seed``.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("t_grid must be a 1-D array with at least two points")
    dt = np.diff(t)
    if np.any(dt <= 0) or np.ptp(dt) > 1e-6 * dt.mean():
        raise ValueError("t_grid must be uniform and increasing")
    field = field if field is not None else default_field()
    drive_freq = central_transition(b0, spin) if drive_freq is None else drive_freq

    pts, wv = volume_nodes(beam, ens)
    b1 = b1_at(field, pts, power)
    offsets, wd = detuning_nodes(ens)
    n_or = len(ens.orientations)

    signal = np.zeros_like(t)
    for k in ens.orientations:
        ori = NV_ORIENTATIONS[k]
        n = ori.vector
        perp = b1 - np.outer(b1 @ n, n)
        omega1 = TWO_PI * spin.gamma_e * np.linalg.norm(perp, axis=1) / np.sqrt(2)  # rad/us
        for m_i in (-1, 0, 1):
            f_plus = hamiltonian_eigenfrequencies(b0, ori, m_i, spin)[1]
            delta = TWO_PI * ((f_plus - drive_freq) * 1e3 + offsets)  # rad/us
            # (detuning, volume) pairs share the time axis
            om = np.broadcast_to(omega1[None, :], (delta.size, omega1.size)).ravel()
            de = np.broadcast_to(delta[:, None], (delta.size, omega1.size)).ravel()
            w = (wd[:, None] * wv[None, :]).ravel()
            keep = w > 1e-14 * w.max()
            om, de, w = om[keep], de[keep], w[keep]
            signal += (w @ rabi_population(om[:, None], de[:, None], t[None, :])) / (3 * n_or)
    if noise > 0:
        rng = np.random.default_rng(ens.rng_seed)
        signal = np.clip(signal + rng.normal(0, noise, t.size), 0.0, 1.0)
    meta = {"power_w": float(power), "drive_freq_ghz": float(drive_freq),
            "b0_mt": [float(v) for v in b0], "beam_center_mm": [beam.mu_x, beam.mu_y]}
    return RabiTrace(t, signal, meta)


def center_rabi_estimate(field, power: float, beam: BeamModel = BeamModel(),
                         spin: SpinParams = SpinParams(), orientations=(0, 1, 2, 3)) -> float:
    """Orientation-averaged Rabi frequency (MHz) at the beam focus."""
    b1 = b1_at(field, np.array([beam.mu_x, beam.mu_y, 0.0]), power)
    return float(np.mean([effective_drive_frequency(b1, NV_ORIENTATIONS[k], spin) for k in orientations]))


def rabi_time_grid(omega_mhz: float, cycles: float = 10.0, n: int = 400,
                   t_min: float = 0.0) -> np.ndarray:
    """Uniform grid covering ``cycles`` periods of a Rabi frequency (MHz)."""
    t_max = max(cycles / max(omega_mhz, 1e-6), t_min)
    return np.linspace(0.0, t_max, n)


# --------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------

@dataclass
class SweepResult:
    axis_name: str
    axis: np.ndarray
    omega_r: np.ndarray
    decay_rate: np.ndarray
    stretch_n: np.ndarray
    converged: np.ndarray
    extra: dict = field(default_factory=dict)
    traces: list = field(default_factory=list)
    fits: list = field(default_factory=list)

    def columns(self) -> dict:
        cols = {self.axis_name: self.axis, "omega_r_mhz": self.omega_r,
                "decay_rate_per_us": self.decay_rate, "stretch_n": self.stretch_n}
        cols.update(self.extra)
        cols["converged"] = self.converged.astype(int)
        return cols

    def write_csv(self, path) -> None:
        cols = self.columns()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(cols))
            for row in zip(*cols.values()):
                w.writerow([f"{v:.10g}" if isinstance(v, (float, np.floating)) else v for v in row])

    def write_traces(self, path) -> None:
        """Long-format CSV: one row per (axis point, time sample)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([self.axis_name, "t_us", "population"])
            for a, tr in zip(self.axis, self.traces):
                for t, p in zip(tr.times, tr.population):
                    w.writerow([f"{a:.10g}", f"{t:.10g}", f"{p:.10g}"])


def _fit_traces(axis_name, axis, traces, budget, extra=None) -> SweepResult:
    fits = []
    for tr in traces:
        try:
            fits.append(fit_decaying_sinusoid(tr, budget=budget))
        except (ValueError, np.linalg.LinAlgError):
            fits.append(None)
    get = lambda name: np.array([f.parameters[name] if f else np.nan for f in fits])
    return SweepResult(axis_name, np.asarray(axis, dtype=float), get("omega_r"), 1.0 / get("tau"),
                       get("n"), np.array([bool(f and f.converged) for f in fits]),
                       extra or {}, list(traces), fits)


def simulate_power_sweep(powers: Sequence[float], *, b0=B0_DEFAULT, field=None,
                         beam: BeamModel = BeamModel(), ens: EnsembleParams = EnsembleParams(),
                         spin: SpinParams = SpinParams(), drive_freq: float | None = None,
                         cycles: float = 10.0, n_samples: int = 400, t_min: float = 0.0,
                         fit_budget: int = 3000) -> SweepResult:
    """
    Rabi traces at each power (W) and their damped-sinusoid fits.

    Each trace spans ``cycles`` periods of the expected Rabi frequency, so
    the fitted decay rate is sampled consistently across decades of power.
    Failed fits are reported per point via ``converged``.
    """
    powers = np.asarray(powers, dtype=float)
    if np.any(powers <= 0):
        raise ValueError("powers must be positive")
    field = field if field is not None else default_field()
    traces = []
    for p in powers:
        om = center_rabi_estimate(field, p, beam, spin, ens.orientations)
        t = rabi_time_grid(om, cycles, n_samples, t_min)
        traces.append(total_rabi_signal(t, b0, field, beam, ens, spin, drive_freq, p))
    return _fit_traces("power_w", powers, traces, fit_budget)


def simulate_chevron(detunings: Sequence[float], resonator: ResonatorState, *,
                     power: float = 0.2, background: float | None = None,
                     enhancement: float = CHEVRON_ENHANCEMENT, b0=B0_DEFAULT, field=None,
                     beam: BeamModel = BeamModel(), ens: EnsembleParams = EnsembleParams(),
                     spin: SpinParams = SpinParams(), cycles: float = 10.0,
                     n_samples: int = 400, fit_budget: int = 3000) -> SweepResult:
    """
    Rabi frequency versus resonator detuning (MHz) with the drive locked to
    the spins.

    ``field`` and ``power`` fix the on-resonance drive; off resonance B1 is
    scaled by m(delta)/m(0) from ``enhancement_factor``. The non-resonant
    floor defaults to the value giving an on/off ratio of ``enhancement``.
    """
    field = field if field is not None else default_field()
    bg = background_for_enhancement(enhancement) if background is None else background
    det = np.asarray(detunings, dtype=float)
    m0 = enhancement_factor(resonator, 0.0, bg)
    scale = np.atleast_1d(enhancement_factor(resonator, det, bg)) / m0
    traces = []
    for s in scale:
        p_eff = power * s**2
        om = center_rabi_estimate(field, p_eff, beam, spin, ens.orientations)
        t = rabi_time_grid(om, cycles, n_samples)
        traces.append(total_rabi_signal(t, b0, field, beam, ens, spin, None, p_eff))
    res = _fit_traces("detuning_mhz", det, traces, fit_budget, {"b1_scale": scale})
    res.extra["omega_r_squared"] = res.omega_r**2
    return res


def chevron_quality_factor(result: SweepResult, f0_ghz: float):
    """
    Lorentzian fit of Omega_R^2 versus detuning.

    Returns (q_loaded, on/off enhancement of Omega_R, FitResult). The
    enhancement is sqrt((amplitude + offset) / offset).
    """
    ok = np.isfinite(result.omega_r)
    fit = fit_lorentzian(result.axis[ok], result.omega_r[ok] ** 2)
    fwhm_ghz = fit["fwhm"] * 1e-3
    ratio = np.sqrt((fit["amplitude"] + fit["offset"]) / fit["offset"]) if fit["offset"] > 0 else np.inf
    return f0_ghz / fwhm_ghz, float(ratio), fit


def simulate_position_sweep(positions: Sequence[float], s11_per_position: Sequence[float], *,
                            axis: str = "x", power: float = 0.0015, b0=B0_DEFAULT, field=None,
                            beam: BeamModel = BeamModel(), ens: EnsembleParams = EnsembleParams(),
                            spin: SpinParams = SpinParams(), cycles: float = 10.0,
                            n_samples: int = 400, fit_budget: int = 3000) -> SweepResult:
    """
    Rabi frequency across the sample, corrected for antenna reflection.

    At each position only a fraction 10^(G_c/10) of ``power`` reaches the
    resonator, G_c = compensated_gain(S11). The fitted frequency is then
    divided by 10^(G_c/20) to undo that loss.
    """
    pos = np.asarray(positions, dtype=float)
    s11 = np.broadcast_to(np.asarray(s11_per_position, dtype=float), pos.shape)
    gains = np.atleast_1d(compensated_gain(s11))
    if np.any(~np.isfinite(gains)):
        raise ValueError("S11 = 0 dB: no power reaches the resonator")
    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y'")
    field = field if field is not None else default_field()
    traces = []
    for x, g in zip(pos, gains):
        b = beam.displaced(mu_x=x) if axis == "x" else beam.displaced(mu_y=x)
        p_eff = power * 10 ** (g / 10)
        om = center_rabi_estimate(field, p_eff, b, spin, ens.orientations)
        t = rabi_time_grid(om, cycles, n_samples)
        traces.append(total_rabi_signal(t, b0, field, b, ens, spin, None, p_eff))
    res = _fit_traces(f"position_{axis}_mm", pos, traces, fit_budget)
    comp = 10 ** (-gains / 20)
    res.extra["omega_measured_mhz"] = res.omega_r.copy()
    res.extra["compensated_gain_db"] = gains
    res.omega_r = res.omega_r * comp
    return res


# --------------------------------------------------------------------------
# Incoherent ODMR
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SaturationParams:
    """Steady-state saturation s = Omega^2 / (Omega^2 + s_sat^2)."""

    s_sat: float  # MHz
    contrast: float = 1.0

    def __post_init__(self):
        if not self.s_sat > 0:
            raise ValueError("s_sat must be positive")


def calibrate_saturation(target_ratio: float, enhancement: float, omega_off: float) -> SaturationParams:
    """
    Pick s_sat so that a Rabi enhancement ``enhancement`` (on/off) produces
    an incoherent signal ratio ``target_ratio`` for off-resonant drive
    ``omega_off`` (MHz).
    """
    e2, r = enhancement**2, target_ratio
    if not 1 < r < e2:
        raise ValueError("target_ratio must lie between 1 and enhancement^2")
    # e2 (x + 1) / (e2 x + 1) = r with x = (omega_off / s_sat)^2
    x = (e2 - r) / (e2 * (r - 1))
    return SaturationParams(float(omega_off / np.sqrt(x)))


@dataclass
class ODMRMap:
    b0_values: np.ndarray  # mT
    mw_freqs: np.ndarray  # GHz
    signal: np.ndarray  # (n_b0, n_f)

    @property
    def integrated(self) -> np.ndarray:
        """Signal summed over frequency (MHz-weighted)."""
        df = np.gradient(self.mw_freqs) * 1e3
        return self.signal @ df

    def enhancement_ratio(self) -> float:
        """Largest over smallest integrated signal across the B0 sweep."""
        s = self.integrated
        return float(s.max() / s.min())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["b0_mt", "mw_freq_ghz", "signal"])
            for i, b in enumerate(self.b0_values):
                for j, f in enumerate(self.mw_freqs):
                    w.writerow([f"{b:.10g}", f"{f:.10g}", f"{self.signal[i, j]:.10g}"])


def simulate_odmr_map(b0_values, mw_freqs, resonator: ResonatorState,
                      saturation: SaturationParams, *, omega_on: float = 1.0,
                      background: float | None = None,
                      enhancement: float = CHEVRON_ENHANCEMENT, b0_direction=(0.0, 0.0, 1.0),
                      ens: EnsembleParams = EnsembleParams(),
                      spin: SpinParams = SpinParams()) -> ODMRMap:
    """
    Incoherent ODMR signal over a (B0, microwave frequency) grid.

    Each of the 12 ms=0 -> +1 lines contributes a unit-area Gaussian of width
    ``ens.broadening_sigma`` scaled by the saturation factor at the local
    Rabi frequency, Omega(f) = omega_on * m(f - f_res) / m(0).
    """
    b0_values = np.asarray(b0_values, dtype=float)
    mw_freqs = np.asarray(mw_freqs, dtype=float)
    u = np.asarray(b0_direction, dtype=float)
    u = u / np.linalg.norm(u)
    bg = background_for_enhancement(enhancement) if background is None else background
    m = np.atleast_1d(enhancement_factor(resonator, (mw_freqs - resonator.f0) * 1e3, bg))
    omega = omega_on * m / enhancement_factor(resonator, 0.0, bg)
    sat = saturation.contrast * omega**2 / (omega**2 + saturation.s_sat**2)
    sigma = max(ens.broadening_sigma, 1e-6)
    signal = np.zeros((b0_values.size, mw_freqs.size))
    for i, b in enumerate(b0_values):
        for ori in NV_ORIENTATIONS:
            for m_i in (-1, 0, 1):
                f_line = hamiltonian_eigenfrequencies(b * u, ori, m_i, spin)[1]
                d = (mw_freqs - f_line) * 1e3
                signal[i] += np.exp(-0.5 * (d / sigma) ** 2) / (np.sqrt(TWO_PI) * sigma) / 12
    return ODMRMap(b0_values, mw_freqs, signal * sat[None, :])


def calibrate_odmr_saturation(target_ratio: float, b0_values, mw_freqs, resonator: ResonatorState,
                              *, omega_on: float = 1.0, contrast: float = 1.0,
                              **map_kwargs) -> SaturationParams:
    """
    Solve for the s_sat at which ``simulate_odmr_map`` on this grid gives an
    integrated on/off ratio of ``target_ratio``.

    Unlike ``calibrate_saturation`` this accounts for the finite linewidth of
    the spin lines and for the B0 range not reaching fully off resonance.
    """
    def ratio(log_s):
        sat = SaturationParams(float(np.exp(log_s)), contrast)
        return simulate_odmr_map(b0_values, mw_freqs, resonator, sat, omega_on=omega_on,
                                 **map_kwargs).enhancement_ratio()

    # ratio falls monotonically from its unsaturated maximum to 1 as s_sat -> 0
    lo, hi = np.log(omega_on) - 12, np.log(omega_on) + 12
    r_max = ratio(hi)
    if not 1 < target_ratio < r_max:
        raise ValueError(f"target_ratio must lie in (1, {r_max:.4g}) for this map")
    log_s = brentq(lambda v: ratio(v) - target_ratio, lo, hi, xtol=1e-12)
    return SaturationParams(float(np.exp(log_s)), contrast)
