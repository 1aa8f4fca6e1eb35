"""
Curve fitting: a two-stage driver and the models used for the spin and
resonator data.

The driver runs a coordinate pattern search (poll +-step along each axis,
expand x2 on success, contract x0.5 on failure) from a handful of seeded
starting points, then refines the best point with a bounded
Gauss-Newton/trust-region least-squares solve. Confidence intervals are the
usual linearised ones, t(0.975, m - p) * sqrt(diag((J^T J)^-1 s^2)).

Time axes are in us and frequencies in MHz for the spin models; any
consistent unit system works since all bounds are derived from the data.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, stats

from .resonator import ResonatorState, s11_response


@dataclass
class FitResult:
    parameters: dict
    ci95: dict
    residual_norm: float
    converged: bool
    iterations: int
    model: str = ""
    flags: list = field(default_factory=list)
    covariance: np.ndarray | None = None
    trajectory: list = field(default_factory=list)

    def __getitem__(self, name):
        return self.parameters[name]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "parameters": {k: float(v) for k, v in self.parameters.items()},
            "ci95": {k: float(v) for k, v in self.ci95.items()},
            "residual_norm": float(self.residual_norm),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "flags": list(self.flags),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# --------------------------------------------------------------------------
# Two-stage driver
# --------------------------------------------------------------------------

class _Counter:
    def __init__(self, fun, budget):
        self.fun, self.budget, self.n = fun, budget, 0

    def __call__(self, x):
        self.n += 1
        return self.fun(x)


def pattern_search(cost: Callable, x0, lower, upper, budget: int, mesh: float = 0.25,
                   tol: float = 1e-7, expansion: float = 2.0, contraction: float = 0.5,
                   log_scale=None):
    """
    Derivative-free coordinate pattern search inside a box.

    Steps are taken in coordinates normalised to [0, 1] per axis (log-spaced
    for axes flagged in ``log_scale``). Polling is opportunistic: the first
    improving point is accepted, which doubles the mesh; a failed poll halves
    it. Stops when the mesh drops below ``tol`` or ``budget`` evaluations are
    spent.

    Returns (x_best, f_best, n_evals, trajectory, mesh_converged).
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    p = lower.size
    log_scale = np.zeros(p, bool) if log_scale is None else np.asarray(log_scale, bool)
    lo = np.where(log_scale, np.log(np.where(log_scale, lower, 1.0)), lower)
    hi = np.where(log_scale, np.log(np.where(log_scale, upper, 1.0)), upper)
    width = hi - lo

    def to_x(u):
        v = lo + u * width
        return np.where(log_scale, np.exp(np.where(log_scale, v, 0.0)), v)

    def to_u(x):
        v = np.where(log_scale, np.log(np.where(log_scale, x, 1.0)), x)
        return np.clip((v - lo) / np.where(width > 0, width, 1.0), 0.0, 1.0)

    u = to_u(np.clip(np.asarray(x0, dtype=float), lower, upper))
    f = cost(to_x(u))
    n = 1
    traj = [to_x(u)]
    converged = False
    while n < budget:
        if mesh < tol:
            converged = True
            break
        improved = False
        for i in range(p):
            for sgn in (1.0, -1.0):
                trial = u.copy()
                trial[i] = min(max(trial[i] + sgn * mesh, 0.0), 1.0)
                if trial[i] == u[i]:
                    continue
                ft = cost(to_x(trial))
                n += 1
                if ft < f:
                    u, f, improved = trial, ft, True
                    break
                if n >= budget:
                    break
            if improved or n >= budget:
                break
        if improved:
            traj.append(to_x(u))
            mesh = min(mesh * expansion, 0.5)
        else:
            mesh *= contraction
    return to_x(u), f, n, traj, converged


def _linearised_ci(jac, resid, n_params):
    m = resid.size
    dof = m - n_params
    jtj = jac.T @ jac
    if dof <= 0:
        return np.full(n_params, np.inf), None
    s2 = float(resid @ resid) / dof
    try:
        cov = np.linalg.inv(jtj) * s2
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj) * s2
    diag = np.diag(cov)
    with np.errstate(invalid="ignore"):
        half = stats.t.ppf(0.975, dof) * np.sqrt(np.where(diag >= 0, diag, np.nan))
    half = np.where(np.isfinite(half), half, np.inf)
    return half, cov


def global_then_local(residuals: Callable, bounds, x0=None, budget: int = 4000, seed: int = 0,
                      names: Sequence[str] | None = None, n_samples: int | None = None,
                      n_starts: int = 8, periodic: dict | None = None, log_scale=None,
                      global_fraction: float = 0.6, mesh: float = 0.1,
                      mesh_tol: float = 1e-3) -> FitResult:
    """
    Minimise ||residuals(x)||^2 inside ``bounds`` = (lower, upper).

    Stage one scores ``n_samples`` seeded uniform points (plus ``x0``) and
    runs a pattern search from the ``n_starts`` best. Stage two refines the
    winner with ``scipy.optimize.least_squares``. ``periodic`` maps a
    parameter index to its period; those parameters are refined inside a
    window centred on the stage-one estimate and wrapped back into bounds.

    Same (residuals, bounds, x0, budget, seed) gives identical results.
    """
    lower = np.asarray(bounds[0], dtype=float)
    upper = np.asarray(bounds[1], dtype=float)
    if lower.shape != upper.shape or np.any(~np.isfinite(lower)) or np.any(~np.isfinite(upper)):
        raise ValueError("bounds must be finite and of matching shape")
    if np.any(upper <= lower):
        raise ValueError("every upper bound must exceed its lower bound")
    if budget <= 0:
        raise ValueError("budget must be positive")
    p = lower.size
    names = list(names) if names is not None else [f"x{i}" for i in range(p)]
    periodic = periodic or {}
    log_scale = np.zeros(p, bool) if log_scale is None else np.asarray(log_scale, bool)
    n_samples = 20 * p if n_samples is None else n_samples

    def cost(x):
        r = residuals(x)
        c = float(np.dot(r, r))
        return c if np.isfinite(c) else np.inf

    counted = _Counter(cost, budget)
    rng = np.random.default_rng(seed)
    candidates = []
    if x0 is not None:
        x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
        candidates.append((counted(x0), 0, x0))
    if n_samples > 0:
        u = rng.random((n_samples, p))
        lo = np.where(log_scale, np.log(np.where(log_scale, lower, 1.0)), lower)
        hi = np.where(log_scale, np.log(np.where(log_scale, upper, 1.0)), upper)
        v = lo + u * (hi - lo)
        pts = np.where(log_scale, np.exp(np.where(log_scale, v, 0.0)), v)
        for k, x in enumerate(pts, start=1):
            candidates.append((counted(x), k, x))
    if not candidates:
        candidates.append((counted((lower + upper) / 2), 0, (lower + upper) / 2))
    candidates.sort(key=lambda c: (c[0], c[1]))
    starts = [(c[0], c[2]) for c in candidates[:max(1, n_starts)]]

    global_budget = max(int(global_fraction * budget) - counted.n, 0)
    best_x, best_f = candidates[0][2], candidates[0][0]
    trajectory = [np.array(best_x)]
    share = global_budget // len(starts)
    for f, x in starts:
        # restart from each converged point with a fresh mesh until it stops improving
        used = 0
        while share - used >= 2:
            x_new, f_new, n, traj, _ = pattern_search(counted, x, lower, upper, share - used,
                                                      mesh=mesh, tol=mesh_tol, log_scale=log_scale)
            used += n
            trajectory.extend(traj)
            if not f_new < f - 1e-12 * max(abs(f), 1e-300):
                break
            x, f = x_new, f_new
        if f < best_f:
            best_x, best_f = x, f

    # local refinement
    lo_loc, hi_loc = lower.copy(), upper.copy()
    for i, period in periodic.items():
        lo_loc[i] = best_x[i] - period / 2
        hi_loc[i] = best_x[i] + period / 2
    remaining = budget - counted.n
    flags = []
    converged = False
    x_final = best_x
    n_local = 0
    if remaining > 0:
        resid_counted = _Counter(residuals, remaining)
        start = np.clip(best_x, lo_loc, hi_loc)
        # least_squares needs a strictly interior start
        span = hi_loc - lo_loc
        start = np.clip(start, lo_loc + 1e-12 * span, hi_loc - 1e-12 * span)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = optimize.least_squares(resid_counted, start, bounds=(lo_loc, hi_loc),
                                         method="trf", x_scale="jac", xtol=1e-15, ftol=1e-15,
                                         gtol=1e-15, max_nfev=remaining)
        n_local = resid_counted.n
        if float(2 * res.cost) <= best_f or not np.isfinite(best_f):
            x_final = res.x
        converged = res.status > 0 or (res.status == 0 and res.optimality < 1e-10)
        if res.status == 0 and not converged:
            flags.append("budget_exhausted")
    else:
        flags.append("budget_exhausted")

    for i, period in periodic.items():
        span = upper[i] - lower[i]
        if span >= period - 1e-12:
            x_final[i] = lower[i] + np.mod(x_final[i] - lower[i], period)

    r = np.asarray(residuals(x_final), dtype=float)
    jac = _numeric_jacobian(residuals, x_final, r)
    half, cov = _linearised_ci(jac, r, p)
    return FitResult(
        parameters={n: float(v) for n, v in zip(names, x_final)},
        ci95={n: float(h) for n, h in zip(names, half)},
        residual_norm=float(np.linalg.norm(r)),
        converged=bool(converged),
        iterations=counted.n + n_local,
        flags=flags,
        covariance=cov,
        trajectory=[np.array(t) for t in trajectory],
    )


def _numeric_jacobian(fun, x, f0):
    """Central differences with steps scaled to each parameter."""
    x = np.asarray(x, dtype=float)
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = 1e-6 * max(abs(x[i]), 1e-8)
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2 * h)
    return jac


# --------------------------------------------------------------------------
# Models
# --------------------------------------------------------------------------

def decaying_sinusoid(t, omega_r, tau, n, phase, offset, amplitude=1.0):
    """amplitude * exp(-(t/tau)^n) * sin(2 pi omega_r t + phase) + offset."""
    t = np.asarray(t, dtype=float)
    return amplitude * np.exp(-(t / tau) ** n) * np.sin(2 * np.pi * omega_r * t + phase) + offset


def hahn_echo(t, tau, n, a1, a2, omega, phase, offset):
    """exp(-(t/tau)^n) * (a1 + a2 sin^2(omega t / 2 + phase)) + offset."""
    t = np.asarray(t, dtype=float)
    return np.exp(-(t / tau) ** n) * (a1 + a2 * np.sin(0.5 * omega * t + phase) ** 2) + offset


def lorentzian(x, center, fwhm, amplitude, offset):
    x = np.asarray(x, dtype=float)
    return offset + amplitude / (1 + ((x - center) / (0.5 * fwhm)) ** 2)


def _check_xy(x, y, min_points):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("x and y must be 1-D arrays of equal length")
    if x.size < min_points:
        raise ValueError(f"need at least {min_points} points, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("data contain non-finite values")
    return x, y


def _spectral_peak(t, y):
    """Frequency (cycles per unit t) of the largest non-DC spectral peak."""
    dt = t[1] - t[0]
    yc = y - y.mean()
    nfft = 8 * int(2 ** np.ceil(np.log2(t.size)))
    spec = np.abs(np.fft.rfft(yc * np.hanning(t.size), nfft))
    freqs = np.fft.rfftfreq(nfft, dt)
    spec[freqs < 0.5 / (t[-1] - t[0])] = 0.0
    return float(freqs[int(np.argmax(spec))])


def fit_decaying_sinusoid(trace_or_t, y=None, *, fit_amplitude: bool = True, sigma=None,
                          budget: int = 3000, seed: int = 0) -> FitResult:
    """
    Fit a stretched-exponential damped sinusoid.

    Accepts a RabiTrace or (t, y). Parameters: omega_r (cycles per unit t),
    tau, n (bounded to [0.5, 3]), phase, offset and, unless
    ``fit_amplitude`` is False, amplitude (fixed to 1 otherwise).
    """
    if y is None:
        t, y = trace_or_t.times, trace_or_t.population
    else:
        t = trace_or_t
    t, y = _check_xy(t, y, 6)
    span = t[-1] - t[0]
    dt = np.min(np.diff(t))
    nyq = 0.5 / dt
    w = 1.0 if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    flags = []

    f0 = _spectral_peak(t, y)
    if f0 * span < 4:
        flags.append("few_periods")
    # scan tau with the amplitude/phase/offset subproblem solved linearly
    best = None
    for tau in np.geomspace(span / 30, span * 100, 40):
        env = np.exp(-t / tau)
        basis = np.column_stack([env * np.sin(2 * np.pi * f0 * t), env * np.cos(2 * np.pi * f0 * t),
                                 np.ones_like(t)])
        coef, *_ = np.linalg.lstsq(basis * np.atleast_1d(w)[:, None] if sigma is not None else basis,
                                   y * w, rcond=None)
        r = (basis @ coef - y) * w
        rss = float(r @ r)
        if best is None or rss < best[0]:
            best = (rss, tau, coef)
    _, tau0, (a, b, c0) = best
    amp0 = float(np.hypot(a, b))
    phase0 = float(np.arctan2(b, a))
    if not fit_amplitude:
        amp0 = 1.0

    names = ["omega_r", "tau", "n", "phase", "offset"] + (["amplitude"] if fit_amplitude else [])
    yr = np.ptp(y) if np.ptp(y) > 0 else 1.0
    lower = [max(f0 / 3, 0.1 / span), dt, 0.5, -np.pi, y.min() - yr]
    upper = [min(3 * f0, nyq), 1e4 * span, 3.0, np.pi, y.max() + yr]
    x0 = [f0, tau0, 1.0, phase0, c0]
    log_scale = [True, True, False, False, False]
    if fit_amplitude:
        lower.append(1e-6 * yr)
        upper.append(4 * yr)
        x0.append(max(amp0, 2e-6 * yr))
        log_scale.append(True)

    def resid(p):
        amp = p[5] if fit_amplitude else 1.0
        return (decaying_sinusoid(t, *p[:5], amplitude=amp) - y) * w

    res = global_then_local(resid, (lower, upper), x0=x0, budget=budget, seed=seed, names=names,
                            n_samples=0, n_starts=1, periodic={3: 2 * np.pi}, log_scale=log_scale,
                            mesh=0.05)
    res.model = "sinusoid"
    res.flags = flags + res.flags
    return res


def fit_hahn_echo(trace_or_t, y=None, *, sigma=None, budget: int = 4000, seed: int = 0) -> FitResult:
    """
    Fit exp(-(t/tau)^n) (a1 + a2 sin^2(omega t/2 + phase)) + offset.

    ``a2`` is constrained non-negative so that (a1, a2, phase) is unique
    (phase modulo pi). When the modulation is not significant the result is
    flagged ``omega_unidentifiable``.
    """
    if y is None:
        t, y = trace_or_t.times, trace_or_t.population
    else:
        t = trace_or_t
    t, y = _check_xy(t, y, 8)
    span = t[-1] - t[0]
    dt = np.min(np.diff(t))
    w = 1.0 if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    yr = np.ptp(y) if np.ptp(y) > 0 else 1.0

    # omega from the spectrum of the data with a smooth trend removed
    trend = np.polyval(np.polyfit(t, y, 3), t)
    om0 = 2 * np.pi * _spectral_peak(t, y - trend)

    best = None
    for om in (om0,):
        for tau in np.geomspace(span / 30, span * 30, 40):
            env = np.exp(-t / tau)
            basis = np.column_stack([env, env * np.cos(om * t), env * np.sin(om * t),
                                     np.ones_like(t)])
            coef, *_ = np.linalg.lstsq(basis * (np.atleast_1d(w)[:, None] if sigma is not None else 1.0),
                                       y * w, rcond=None)
            r = (basis @ coef - y) * w
            rss = float(r @ r)
            if best is None or rss < best[0]:
                best = (rss, tau, om, coef)
    _, tau0, om0, (b0, b1, b2, c0) = best
    half_a2 = float(np.hypot(b1, b2))
    a2_0 = 2 * half_a2
    phase0 = 0.5 * float(np.arctan2(b2, -b1))
    a1_0 = float(b0 - half_a2)

    names = ["tau", "n", "a1", "a2", "omega", "phase", "offset"]
    om_lo = 2 * np.pi * 0.5 / span
    lower = [dt, 0.5, -4 * yr, 0.0, om_lo, -np.pi / 2, y.min() - yr]
    upper = [1e3 * span, 4.0, 4 * yr, 4 * yr, np.pi / dt, np.pi / 2, y.max() + yr]
    x0 = [tau0, 1.0, a1_0, a2_0, min(max(om0, om_lo * 1.01), np.pi / dt * 0.99), phase0, c0]
    log_scale = [True, False, False, False, True, False, False]

    def resid(p):
        return (hahn_echo(t, *p) - y) * w

    res = global_then_local(resid, (lower, upper), x0=x0, budget=budget, seed=seed, names=names,
                            n_samples=0, n_starts=1, periodic={5: np.pi}, log_scale=log_scale,
                            mesh=0.05)
    res.model = "hahn"
    a2, a2_ci = res.parameters["a2"], res.ci95["a2"]
    if a2 <= 1e-9 * yr or not np.isfinite(a2_ci) or a2_ci >= abs(a2):
        res.flags.append("omega_unidentifiable")
    return res


def fit_lorentzian(x, y, *, sigma=None, budget: int = 3000, seed: int = 0) -> FitResult:
    """
    Fit offset + amplitude / (1 + ((x - center) / (fwhm/2))^2).

    Peaks and dips are both handled (amplitude may be negative). With fewer
    than five points the offset is pinned to zero and the result flagged
    ``offset_fixed``.
    """
    x, y = _check_xy(x, y, 3)
    order = np.argsort(x)
    x, y = x[order], y[order]
    w = 1.0 if sigma is None else 1.0 / np.asarray(sigma, dtype=float)[order]
    fixed_offset = x.size < 5
    span = x[-1] - x[0]
    yr = np.ptp(y) if np.ptp(y) > 0 else 1.0
    med = np.median(y)
    k_max, k_min = int(np.argmax(y)), int(np.argmin(y))
    if abs(y[k_max] - med) >= abs(y[k_min] - med):
        k, base = k_max, float(min(y[0], y[-1]))
    else:
        k, base = k_min, float(max(y[0], y[-1]))
    if fixed_offset:
        base = 0.0
    amp0 = float(y[k] - base) or yr
    half = base + amp0 / 2
    above = np.nonzero((y - half) * np.sign(amp0) > 0)[0]
    fwhm0 = float(x[above[-1]] - x[above[0]]) if above.size > 1 else span / 2
    fwhm0 = max(fwhm0, float(np.min(np.diff(x))))

    names = ["center", "fwhm", "amplitude"]
    lower = [x[0] - span, 1e-3 * fwhm0, -10 * yr]
    upper = [x[-1] + span, 100 * max(span, fwhm0), 10 * yr]
    x0 = [float(x[k]), fwhm0, amp0]
    if not fixed_offset:
        names.append("offset")
        lower.append(y.min() - 10 * yr)
        upper.append(y.max() + 10 * yr)
        x0.append(base)

    def resid(p):
        off = 0.0 if fixed_offset else p[3]
        return (lorentzian(x, p[0], p[1], p[2], off) - y) * w

    res = global_then_local(resid, (lower, upper), x0=x0, budget=budget, seed=seed, names=names,
                            n_samples=0, n_starts=1, log_scale=[False, True, False] + [False] * (not fixed_offset),
                            mesh=0.05)
    res.model = "lorentzian"
    if fixed_offset:
        res.parameters["offset"] = 0.0
        res.ci95["offset"] = 0.0
        res.flags.append("offset_fixed")
    return res


def fit_sqrt_power_line(powers, omegas, *, sigma=None, zero_intercept: bool = False) -> FitResult:
    """
    Straight-line fit of Rabi frequency against sqrt(power).

    Weighted least squares when ``sigma`` is given. Returns slope (units of
    omega per sqrt(power unit)) and intercept (0 when ``zero_intercept``).
    """
    p, om = _check_xy(powers, omegas, 3)
    if np.any(p <= 0):
        raise ValueError("powers must be positive")
    w = np.ones_like(om) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    s = np.sqrt(p)
    design = s[:, None] if zero_intercept else np.column_stack([s, np.ones_like(s)])
    a = design * w[:, None]
    coef, *_ = np.linalg.lstsq(a, om * w, rcond=None)
    r = a @ coef - om * w
    half, cov = _linearised_ci(a, r, design.shape[1])
    slope = float(coef[0])
    intercept = 0.0 if zero_intercept else float(coef[1])
    ci = {"slope": float(half[0]), "intercept": 0.0 if zero_intercept else float(half[1])}
    return FitResult({"slope": slope, "intercept": intercept}, ci, float(np.linalg.norm(r)),
                     True, 1, model="sqrtp", covariance=cov)


def _s11_model(f, f0, q_i, q_e, amp=1.0, phi=0.0):
    g = s11_response(ResonatorState(f0, q_i, q_e), f)
    return amp * np.exp(1j * phi) * g


def fit_s11_resonance(freqs, gamma, *, environment: bool = False, budget: int = 4000,
                      seed: int = 0) -> FitResult:
    """
    Complex fit of a reflection trace to the one-port resonator model.

    The fit is parametrised by (f0, q_internal, q_external) so that
    q_loaded, reported alongside, satisfies 1/Q_L = 1/Q_I + 1/Q_E exactly.
    Using the complex data rather than |Gamma| separates over- from
    undercoupling. With ``environment`` a complex scale a e^{i phi} is fitted
    as well.
    """
    f = np.asarray(freqs, dtype=float)
    g = np.asarray(gamma, dtype=complex)
    if f.ndim != 1 or f.shape != g.shape:
        raise ValueError("freqs and gamma must be 1-D arrays of equal length")
    if f.size < 6:
        raise ValueError(f"need at least 6 points, got {f.size}")
    order = np.argsort(f)
    f, g = f[order], g[order]
    flags = []

    # reference the trace to its off-resonant value (the model tends to -1)
    edge = np.concatenate([g[:3], g[-3:]]).mean()
    ref = -edge if abs(edge) > 0 else -1.0 + 0j
    gn = g / ref
    # the resonance is where the trace is farthest from the off-resonant point
    k = int(np.argmax(np.abs(gn + 1)))
    f0_0 = float(f[k])
    d0 = float(np.clip(gn[k].real, -0.999, 0.999))
    kappa0 = (1 + d0) / (1 - d0)
    # Lorentzian width of |Gamma + 1|^2 gives the loaded linewidth
    depth = np.abs(gn + 1) ** 2
    halfmax = depth[k] / 2
    above = np.nonzero(depth >= halfmax)[0]
    fwhm0 = float(f[above[-1]] - f[above[0]]) if above.size > 1 else float(f[-1] - f[0]) / 10
    fwhm0 = max(fwhm0, float(np.min(np.diff(f))))
    ql0 = f0_0 / fwhm0
    qi0 = ql0 * (1 + kappa0)
    qe0 = qi0 / kappa0
    if (f[-1] - f[0]) < 3 * fwhm0:
        flags.append("insufficient_span")

    names = ["f0", "q_internal", "q_external"]
    lower = [f[0], qi0 / 30, qe0 / 30]
    upper = [f[-1], qi0 * 30, qe0 * 30]
    x0 = [f0_0, qi0, qe0]
    log_scale = [False, True, True]
    periodic = {}
    if environment:
        names += ["amplitude", "phase"]
        amp0, phi0 = float(abs(ref)), float(np.angle(ref))
        lower += [amp0 / 10, phi0 - np.pi]
        upper += [amp0 * 10, phi0 + np.pi]
        x0 += [amp0, phi0]
        log_scale += [True, False]
        periodic = {4: 2 * np.pi}

    def resid(p):
        d = _s11_model(f, *p) - g
        return np.concatenate([d.real, d.imag])

    res = global_then_local(resid, (lower, upper), x0=x0, budget=budget, seed=seed, names=names,
                            n_samples=0, n_starts=1, periodic=periodic, log_scale=log_scale,
                            mesh=0.05)
    qi, qe = res.parameters["q_internal"], res.parameters["q_external"]
    ql = 1.0 / (1.0 / qi + 1.0 / qe)
    res.parameters["q_loaded"] = ql
    # delta method for Q_L
    if res.covariance is not None:
        grad = np.zeros(len(names))
        grad[1], grad[2] = (ql / qi) ** 2, (ql / qe) ** 2
        var = float(grad @ res.covariance @ grad)
        dof = 2 * f.size - len(names)
        res.ci95["q_loaded"] = float(stats.t.ppf(0.975, dof) * np.sqrt(max(var, 0.0)))
    else:
        res.ci95["q_loaded"] = float("inf")
    res.model = "s11"
    res.flags = flags + res.flags
    res.flags.append("overcoupled" if qi > qe else "undercoupled")
    return res
