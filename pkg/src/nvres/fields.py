"""
Spatial models: the focused excitation beam and the resonator's B1 field.

Lengths are in mm at the interface (positions, beam diameter, focal length)
and the beam radii are returned in um. B1 is in mT; sources are normalised to
1 W of delivered power and scale as sqrt(power).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import OutOfRangeError


@dataclass(frozen=True)
class BeamModel:
    """Gaussian beam focused by a single lens."""

    d_collimated: float = 2.2  # mm
    wavelength: float = 520.0  # nm
    focal_length: float = 15.29  # mm
    ellipticity_m: float = 1.0
    mu_x: float = 0.0  # mm
    mu_y: float = 0.0  # mm

    def __post_init__(self):
        for name in ("d_collimated", "wavelength", "focal_length"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.ellipticity_m >= 1:
            raise ValueError("ellipticity_m must be >= 1")

    def displaced(self, mu_x=None, mu_y=None) -> "BeamModel":
        return replace(self, mu_x=self.mu_x if mu_x is None else mu_x,
                       mu_y=self.mu_y if mu_y is None else mu_y)


def beam_waist(beam: BeamModel) -> float:
    """Focused waist radius w0 = 4 M^2 lambda f / (2 pi D), in um."""
    lam_um = beam.wavelength * 1e-3
    return 4 * beam.ellipticity_m**2 * lam_um * beam.focal_length / (2 * np.pi * beam.d_collimated)


def rayleigh_range(beam: BeamModel) -> float:
    """Rayleigh range in um."""
    w0 = beam_waist(beam)
    return np.pi * w0**2 / (beam.wavelength * 1e-3)


def spot_radius(beam: BeamModel, z):
    """Beam radius (um) at axial distance z (mm) from the focus."""
    w0 = beam_waist(beam)
    z_um = np.asarray(z, dtype=float) * 1e3
    w = w0 * np.sqrt(1 + (z_um * beam.wavelength * 1e-3 / (np.pi * w0**2)) ** 2)
    return w if w.ndim else float(w)


def laser_intensity(beam: BeamModel, x, y, z):
    """
    Relative excitation intensity at (x, y, z) in mm.

    Normalised to 1 at the focus; the transverse integral is the same in
    every plane.
    """
    w0 = beam_waist(beam)
    wz = np.asarray(spot_radius(beam, z))
    dx = (np.asarray(x, dtype=float) - beam.mu_x) * 1e3
    dy = (np.asarray(y, dtype=float) - beam.mu_y) * 1e3
    f = (w0 / wz) ** 2 * np.exp(-2 * (dx / wz) ** 2) * np.exp(-2 * (dy / wz) ** 2)
    return f if f.ndim else float(f)


# --------------------------------------------------------------------------
# B1 sources
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FieldGrid:
    """
    B1 vectors (mT per sqrt(W)) on a regular grid.

    ``vectors`` has shape (nx, ny, nz, 3); node (i, j, k) sits at
    origin + (i, j, k) * spacing.
    """

    origin: tuple
    spacing: tuple
    vectors: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim != 4 or v.shape[3] != 3:
            raise ValueError("vectors must have shape (nx, ny, nz, 3)")
        if min(v.shape[:3]) < 2:
            raise ValueError("each grid axis needs at least 2 nodes")
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise ValueError("spacing must be three positive numbers")
        if not np.all(np.isfinite(v)):
            raise ValueError("field vectors must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple:
        return tuple(self.vectors.shape[:3])

    def axes(self):
        return [o + s * np.arange(n) for o, s, n in zip(self.origin, self.spacing, self.dims)]

    @property
    def bounds(self) -> tuple:
        """((xmin, ymin, zmin), (xmax, ymax, zmax))."""
        lo = np.array(self.origin)
        hi = lo + np.array(self.spacing) * (np.array(self.dims) - 1)
        return tuple(lo), tuple(hi)

    def _interpolator(self):
        interp = self.__dict__.get("_interp")
        if interp is None:
            interp = RegularGridInterpolator(self.axes(), self.vectors, method="linear",
                                             bounds_error=False, fill_value=np.nan)
            object.__setattr__(self, "_interp", interp)
        return interp

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = self.bounds
        tol = 1e-12 * max(1.0, float(np.max(np.abs(hi))))
        if np.any(pts < np.array(lo) - tol) or np.any(pts > np.array(hi) + tol):
            raise OutOfRangeError("position outside the field grid")
        pts = np.clip(pts, lo, hi)
        return self._interpolator()(pts)


@dataclass(frozen=True)
class ParametricB1:
    """
    Analytic stand-in for a simulated resonator mode.

    The field points along an axis tilted by ``tilt`` degrees from [001]
    towards [100]. Its magnitude follows a raised-cosine radial profile in
    the x-y plane that reaches zero at ``falloff_scale`` mm; the default scale
    puts the profile at 0.625 of the centre value at r = 0.5 mm.
    """

    b1_center: float  # mT per sqrt(W)
    falloff_scale: float = 0.5 * np.pi / np.arccos(0.25)  # mm
    tilt: float = 3.723  # degrees

    def __post_init__(self):
        if not self.b1_center > 0:
            raise ValueError("b1_center must be positive")
        if not self.falloff_scale > 0:
            raise ValueError("falloff_scale must be positive")
        if not 0 <= self.tilt < 90:
            raise ValueError("tilt must lie in [0, 90) degrees")

    @classmethod
    def calibrated(cls, slope_mhz_per_sqrtw: float = 211.6, **kwargs) -> "ParametricB1":
        """Centre amplitude that reproduces a measured Rabi slope on a [001] sample."""
        from .budget import conversion_pipeline

        conv = conversion_pipeline(slope_mhz_per_sqrtw)
        return cls(b1_center=conv.b1_total_mt_per_sqrtw, **kwargs)

    @property
    def direction(self) -> np.ndarray:
        t = np.radians(self.tilt)
        return np.array([np.sin(t), 0.0, np.cos(t)])

    def profile(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        g = np.where(r < self.falloff_scale,
                     0.5 * (1 + np.cos(np.pi * np.minimum(r, self.falloff_scale) / self.falloff_scale)),
                     0.0)
        return g if g.ndim else float(g)

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.hypot(pts[:, 0], pts[:, 1])
        return self.b1_center * self.profile(r)[:, None] * self.direction[None, :]


def b1_at(source, position, power: float = 1.0) -> np.ndarray:
    """
    B1 vector (mT) at ``position`` (mm) for ``power`` watts delivered.

    ``position`` may be a single 3-vector or an (N, 3) array. Grid sources
    raise OutOfRangeError outside their bounds.
    """
    if power < 0:
        raise ValueError("power must be non-negative")
    pos = np.asarray(position, dtype=float)
    out = source(pos) * np.sqrt(power)
    return out[0] if pos.ndim == 1 else out


# --------------------------------------------------------------------------
# Grid file format: JSON header + CSV of node vectors, z index fastest
# --------------------------------------------------------------------------

def save_field_grid(grid: FieldGrid, header_path) -> None:
    header_path = Path(header_path)
    csv_path = header_path.with_suffix(".csv")
    header = {
        "origin_mm": list(grid.origin),
        "spacing_mm": list(grid.spacing),
        "dims": list(grid.dims),
        "units": "mT/sqrt(W)",
        "order": "row-major, z fastest",
        "data": csv_path.name,
        "label": grid.label,
    }
    header_path.write_text(json.dumps(header, indent=2) + "\n")
    flat = grid.vectors.reshape(-1, 3)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bx", "by", "bz"])
        for row in flat:
            w.writerow([f"{v:.10g}" for v in row])


def load_field_grid(header_path) -> FieldGrid:
    header_path = Path(header_path)
    header = json.loads(header_path.read_text())
    dims = tuple(int(n) for n in header["dims"])
    data = np.loadtxt(header_path.parent / header["data"], delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (int(np.prod(dims)), 3):
        raise ValueError(f"expected {int(np.prod(dims))} rows of 3 values, got {data.shape}")
    return FieldGrid(tuple(header["origin_mm"]), tuple(header["spacing_mm"]),
                     data.reshape(*dims, 3), header.get("label", ""))


def synthetic_field_grid(source: ParametricB1 | None = None,
                         half_width: float = 1.0, half_thickness: float = 0.125,
                         dims=(41, 41, 3)) -> FieldGrid:
    """Sample a parametric source on a grid covering the diamond plate."""
    source = source or ParametricB1.calibrated()
    axes = [np.linspace(-half_width, half_width, dims[0]),
            np.linspace(-half_width, half_width, dims[1]),
            np.linspace(-half_thickness, half_thickness, dims[2])]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    vec = source(pts).reshape(*dims, 3)
    spacing = (2 * half_width / (dims[0] - 1), 2 * half_width / (dims[1] - 1),
               2 * half_thickness / (dims[2] - 1))
    return FieldGrid((-half_width, -half_width, -half_thickness), spacing, vec,
                     label="reconstructed: sampled from the parametric B1 model")
