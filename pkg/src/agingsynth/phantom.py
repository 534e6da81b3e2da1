"""Deterministic synthetic "aging head" phantoms for end-to-end testing.

A phantom is an ellipsoidal head with an interior spherical cavity whose
radius grows linearly with synthetic age, mimicking ventricle expansion.
The linear-radius model makes the linear-progression assumption of the
generation pipeline hold exactly, so phantom families provide analytic
ground truth for stopping-point and age-assignment tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import DataError
from .volume import LabelVolume, Volume

BACKGROUND, TISSUE, CAVITY = 0, 1, 2


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int] = (64, 64, 64)
    semi_axes: tuple[float, float, float] = (26.0, 23.0, 24.0)
    center: tuple[float, float, float] | None = None
    cavity_center: tuple[float, float, float] | None = None
    cavity_radius: float = 5.0           # at base_age, voxels
    growth_per_year: float = 0.3         # voxels per synthetic year
    base_age: float = 60.0
    tissue_intensity: float = 0.75
    cavity_intensity: float = 0.15
    background_intensity: float = 0.02
    edge_sigma: float = 1.0
    texture_amplitude: float = 0.03
    texture_sigma: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if min(self.dims) < 8:
            raise DataError("phantom grid must be at least 8 voxels per axis")
        if self.cavity_radius <= 0:
            raise DataError("cavity_radius must be positive")
        for v in (self.tissue_intensity, self.cavity_intensity, self.background_intensity):
            if not (0.0 <= v <= 1.0):
                raise DataError("phantom intensities must lie in [0, 1]")
        if self.texture_amplitude < 0 or self.texture_amplitude > 0.05:
            raise DataError("texture_amplitude must lie in [0, 0.05]")

    def resolved_center(self) -> tuple[float, float, float]:
        if self.center is not None:
            return self.center
        return tuple((d - 1) / 2.0 for d in self.dims)

    def resolved_cavity_center(self) -> tuple[float, float, float]:
        if self.cavity_center is not None:
            return self.cavity_center
        return self.resolved_center()

    def cavity_radius_at(self, age: float) -> float:
        return self.cavity_radius + self.growth_per_year * (age - self.base_age)


def _check_cavity_inside(spec: PhantomSpec, r: float) -> None:
    if r <= 0:
        raise DataError(f"cavity radius {r:g} is not positive at this age")
    center = np.asarray(spec.resolved_center())
    cav = np.asarray(spec.resolved_cavity_center())
    axes = np.asarray(spec.semi_axes)
    # conservative: normalized center offset plus normalized radius < 1
    offset = math.sqrt(float(np.sum(((cav - center) / axes) ** 2)))
    if offset + r / float(axes.min()) >= 0.95:
        raise DataError(
            f"cavity of radius {r:g} would breach the ellipsoid "
            f"(semi-axes {tuple(spec.semi_axes)})"
        )


def make_phantom(spec: PhantomSpec, age: float) -> tuple[Volume, LabelVolume]:
    """Phantom image and labels at the given synthetic age.

    Labels: 0 background, 1 tissue, 2 cavity. The image has smoothed
    edges and a seeded low-amplitude texture so similarity curves are
    non-degenerate; identical spec+age always produces identical bytes.
    """
    r = spec.cavity_radius_at(age)
    _check_cavity_inside(spec, r)

    nx, ny, nz = spec.dims
    cx, cy, cz = spec.resolved_center()
    ax, ay, az = spec.semi_axes
    vx, vy, vz = spec.resolved_cavity_center()
    x = np.arange(nx, dtype=np.float64)[:, None, None]
    y = np.arange(ny, dtype=np.float64)[None, :, None]
    z = np.arange(nz, dtype=np.float64)[None, None, :]

    ellip = ((x - cx) / ax) ** 2 + ((y - cy) / ay) ** 2 + ((z - cz) / az) ** 2
    head = ellip <= 1.0
    cav_dist2 = (x - vx) ** 2 + (y - vy) ** 2 + (z - vz) ** 2
    cavity = cav_dist2 <= r * r

    labels = np.zeros(spec.dims, dtype=np.int32)
    labels[head] = TISSUE
    labels[np.logical_and(head, cavity)] = CAVITY

    img = np.full(spec.dims, spec.background_intensity, dtype=np.float64)
    img[labels == TISSUE] = spec.tissue_intensity
    img[labels == CAVITY] = spec.cavity_intensity
    if spec.edge_sigma > 0:
        img = gaussian_filter(img, sigma=spec.edge_sigma, mode="nearest")

    if spec.texture_amplitude > 0:
        rng = np.random.default_rng(spec.seed)
        noise = rng.standard_normal(spec.dims)
        noise = gaussian_filter(noise, sigma=spec.texture_sigma, mode="nearest")
        peak = float(np.abs(noise).max())
        if peak > 0:
            mask = gaussian_filter(head.astype(np.float64), sigma=spec.edge_sigma,
                                   mode="nearest")
            img = img + spec.texture_amplitude * (noise / peak) * mask

    img = np.clip(img, 0.0, 1.0)
    return Volume(img.astype(np.float32), dynamic_range=1.0), LabelVolume(labels)


def make_phantom_series(spec: PhantomSpec, ages) -> list[tuple[float, Volume, LabelVolume]]:
    """Phantoms at several ages, sharing the texture seed."""
    out = []
    for age in ages:
        vol, lab = make_phantom(spec, float(age))
        out.append((float(age), vol, lab))
    return out
