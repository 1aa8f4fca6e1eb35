"""
NV- ground-state spin physics.

Transition frequencies come from an exact diagonalisation of the spin-1
Hamiltonian

    H = D Sz'^2 + gamma_e B0 . S

written in the frame of the NV axis. Drive strengths follow the rotating-wave
result for a linearly polarised field, Omega_R = gamma_e |B1_perp| / sqrt(2).

Units: fields in mT, frequencies in GHz (transitions) or MHz (Rabi), times in
microseconds unless a name says otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

GAMMA_E = 28.024  # MHz/mT
ZERO_FIELD_SPLITTING = 2.878  # GHz
HYPERFINE_14N = 2.15  # MHz
TETRAHEDRAL_ANGLE = np.degrees(np.arccos(1.0 / np.sqrt(3.0)))  # 54.7356 deg

SQRT2 = np.sqrt(2.0)

# spin-1 operators in the |+1>, |0>, |-1> basis
SX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / SQRT2
SY = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / SQRT2
SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)


@dataclass(frozen=True)
class SpinParams:
    d_z: float = ZERO_FIELD_SPLITTING
    hyperfine_a: float = HYPERFINE_14N
    gamma_e: float = GAMMA_E

    def __post_init__(self):
        if not self.d_z > 0:
            raise ValueError(f"d_z must be positive, got {self.d_z}")
        if not self.hyperfine_a >= 0:
            raise ValueError(f"hyperfine_a must be >= 0, got {self.hyperfine_a}")
        if not self.gamma_e > 0:
            raise ValueError(f"gamma_e must be positive, got {self.gamma_e}")


@dataclass(frozen=True)
class NVOrientation:
    """One of the four <111> symmetry axes of the NV centre."""

    axis: tuple

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float)
        if a.shape != (3,) or not np.all(np.isfinite(a)):
            raise ValueError(f"axis must be a finite 3-vector, got {self.axis!r}")
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValueError(f"axis must be a unit vector, |axis| = {np.linalg.norm(a)!r}")
        object.__setattr__(self, "axis", tuple(float(v) for v in a))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.axis)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return tuple(v / np.linalg.norm(v))


NV_ORIENTATIONS = (
    NVOrientation(_unit([1, 1, 1])),
    NVOrientation(_unit([1, -1, -1])),
    NVOrientation(_unit([-1, 1, -1])),
    NVOrientation(_unit([-1, -1, 1])),
)


@dataclass(frozen=True)
class Transition:
    orientation_index: int
    m_i: int
    frequency: float  # GHz
    branch: int  # +1 or -1 (target ms)
    rabi_mhz: float | None = None


@dataclass(frozen=True)
class TransitionTable:
    """Both ms=0 -> +-1 branches, each sorted by frequency."""

    plus: tuple
    minus: tuple
    b0: tuple = field(default=(0.0, 0.0, 0.0))

    def frequencies(self, branch: int = +1) -> np.ndarray:
        entries = self.plus if branch == +1 else self.minus
        return np.array([t.frequency for t in entries])

    def __iter__(self):
        yield from self.plus
        yield from self.minus

    def __len__(self):
        return len(self.plus) + len(self.minus)


def _nv_frame(axis: np.ndarray) -> np.ndarray:
    """Rows are (x', y', z') with z' along the NV axis."""
    z = axis / np.linalg.norm(axis)
    trial = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = trial - np.dot(trial, z) * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.vstack([x, y, z])


def _as_orientation(orientation) -> NVOrientation:
    if isinstance(orientation, NVOrientation):
        return orientation
    return NVOrientation(tuple(orientation))


def spin_hamiltonian(b0, orientation, params: SpinParams = SpinParams()) -> np.ndarray:
    """Static Hamiltonian in GHz, expressed in the NV frame basis |+1>, |0>, |-1>."""
    orientation = _as_orientation(orientation)
    b = _nv_frame(orientation.vector) @ np.asarray(b0, dtype=float)
    g = params.gamma_e * 1e-3  # GHz/mT
    return (params.d_z * SZ @ SZ
            + g * (b[0] * SX + b[1] * SY + b[2] * SZ))


def hamiltonian_eigenfrequencies(b0, orientation, m_i: int = 0,
                                 params: SpinParams = SpinParams()):
    """
    Return the (ms=0 -> -1, ms=0 -> +1) transition frequencies in GHz.

    The hyperfine interaction with the 14N nucleus is folded in as a
    +-A*m_i shift of the +1 and -1 transitions respectively.
    """
    if m_i not in (-1, 0, 1):
        raise ValueError(f"m_i must be -1, 0 or +1, got {m_i}")
    b0 = np.asarray(b0, dtype=float)
    if np.linalg.norm(b0) >= 100.0:
        raise ValueError("|b0| must stay below 100 mT")
    h = spin_hamiltonian(b0, orientation, params)
    e = np.linalg.eigvalsh(h)
    shift = params.hyperfine_a * 1e-3 * m_i
    return e[1] - e[0] - shift, e[2] - e[0] + shift


def effective_drive_frequency(b1, orientation, params: SpinParams = SpinParams()) -> float:
    """Rabi frequency (MHz) produced by a linearly polarised field ``b1`` (mT)."""
    orientation = _as_orientation(orientation)
    b1 = np.asarray(b1, dtype=float)
    n = orientation.vector
    perp = b1 - np.dot(b1, n) * n
    return params.gamma_e * np.linalg.norm(perp) / SQRT2


def transition_table(b0, params: SpinParams = SpinParams(), b1=None,
                     orientations: Sequence[NVOrientation] = NV_ORIENTATIONS) -> TransitionTable:
    plus, minus = [], []
    for k, ori in enumerate(orientations):
        drive = None if b1 is None else effective_drive_frequency(b1, ori, params)
        for m_i in (-1, 0, 1):
            f_minus, f_plus = hamiltonian_eigenfrequencies(b0, ori, m_i, params)
            plus.append(Transition(k, m_i, float(f_plus), +1, drive))
            minus.append(Transition(k, m_i, float(f_minus), -1, drive))
    key = lambda t: (t.frequency, t.orientation_index, t.m_i)
    return TransitionTable(tuple(sorted(plus, key=key)), tuple(sorted(minus, key=key)),
                           tuple(float(v) for v in np.asarray(b0, dtype=float)))


def rabi_population(omega_1, delta_omega, t):
    """
    Excited-state population of a driven two-level system in the rotating frame.

    Parameters
    ----------
    omega_1 : float or array_like
        Angular Rabi frequency (rad/us).
    delta_omega : float or array_like
        Angular detuning (rad/us).
    t : float or array_like
        Time (us), non-negative.

    Returns
    -------
    ndarray or float
        omega_1^2 / W^2 * sin^2(W t / 2) with W = sqrt(delta_omega^2 + omega_1^2).
        Zero where both omega_1 and delta_omega vanish.
    """
    omega_1 = np.asarray(omega_1, dtype=float)
    delta_omega = np.asarray(delta_omega, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    w2 = delta_omega**2 + omega_1**2
    with np.errstate(invalid="ignore", divide="ignore"):
        amp = np.where(w2 > 0, omega_1**2 / np.where(w2 > 0, w2, 1.0), 0.0)
    p = amp * np.sin(np.sqrt(w2) * t / 2) ** 2
    return p if p.ndim else float(p)


@dataclass
class RabiTrace:
    """Population sampled on a uniform time grid (times in us)."""

    times: np.ndarray
    population: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.population = np.asarray(self.population, dtype=float)
        if self.times.shape != self.population.shape or self.times.ndim != 1:
            raise ValueError("times and population must be 1-D arrays of equal length")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        eps = 1e-9
        if np.any(self.population < -eps) or np.any(self.population > 1 + eps):
            raise ValueError("population outside [0, 1]")


def evolve_numerical(b0, b1_amplitude, drive_freq: float, orientation,
                     params: SpinParams = SpinParams(), t_max: float = 1.0,
                     dt: float = 0.005, sample_every: int = 1) -> RabiTrace:
    """
    Lab-frame propagation under H(t) = H0 + gamma_e B1 . S cos(2 pi f t).

    Brute-force check on the rotating-wave formula. The carrier period is
    split into ``ceil(period / dt)`` exponential-midpoint steps; because
    H(t) is periodic, the one-period propagator is built once and applied
    repeatedly, so the returned trace is sampled stroboscopically at
    multiples of the carrier period (every ``sample_every`` periods).

    Parameters
    ----------
    b0, b1_amplitude : array_like
        Static field and drive amplitude (mT).
    drive_freq : float
        Carrier frequency (GHz).
    t_max : float
        Duration (us).
    dt : float
        Maximum step (ns); must satisfy dt <= 1 / (50 f).

    Returns
    -------
    RabiTrace
        Population of the upper (ms=+1 like) eigenstate of H0, starting from
        the ms=0 like ground state.
    """
    if drive_freq <= 0:
        raise ValueError("drive_freq must be positive")
    if dt <= 0 or dt > 1.0 / (50.0 * drive_freq):
        raise ValueError(f"dt={dt} ns does not resolve the {drive_freq} GHz carrier "
                         f"(need dt <= {1.0 / (50.0 * drive_freq):.4g} ns)")
    orientation = _as_orientation(orientation)
    h0 = spin_hamiltonian(b0, orientation, params)
    b1 = _nv_frame(orientation.vector) @ np.asarray(b1_amplitude, dtype=float)
    g = params.gamma_e * 1e-3
    h1 = g * (b1[0] * SX + b1[1] * SY + b1[2] * SZ)

    period = 1.0 / drive_freq  # ns
    n_sub = int(np.ceil(period / dt - 1e-9))
    h_step = period / n_sub
    t_mid = (np.arange(n_sub) + 0.5) * h_step
    hs = h0[None] + np.cos(2 * np.pi * drive_freq * t_mid)[:, None, None] * h1[None]
    evals, evecs = np.linalg.eigh(hs)
    phases = np.exp(-2j * np.pi * evals * h_step)
    steps = np.einsum("kij,kj,klj->kil", evecs, phases, evecs.conj())
    u_period = np.eye(3, dtype=complex)
    for u in steps:
        u_period = u @ u_period

    e0, v0 = np.linalg.eigh(h0)
    ground, upper = v0[:, 0], v0[:, 2]
    u_sample = np.linalg.matrix_power(u_period, sample_every)
    n_samples = int(np.floor(t_max * 1e3 / (period * sample_every))) + 1
    psi = ground.copy()
    pop = np.empty(n_samples)
    for k in range(n_samples):
        pop[k] = abs(np.vdot(upper, psi)) ** 2
        psi = u_sample @ psi
    times = np.arange(n_samples) * period * sample_every * 1e-3
    meta = {"drive_freq_ghz": drive_freq, "steps_per_period": n_sub,
            "b0_mt": list(map(float, np.asarray(b0, dtype=float))),
            "b1_mt": list(map(float, np.asarray(b1_amplitude, dtype=float)))}
    return RabiTrace(times, np.clip(pop, 0.0, 1.0), meta)
