"""Stationary velocity field integration.

A velocity field v is exponentiated to the deformation phi(t) by
composing small Euler steps, phi(t+h) = (p + h v) ∘ phi(t), or — for
unit time — by scaling and squaring. Displacements are in voxel units
throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DataError
from .volume import DISPLACEMENT, VELOCITY, VectorField, zero_displacement

EULER = "euler"
SCALING_SQUARING = "scaling_squaring"


@dataclass(frozen=True)
class IntegrationParams:
    """Fixed-step integration settings.

    ``steps_per_unit`` controls the Euler step density (h <= 1/steps_per_unit).
    The scaling_squaring method requires the total step count to be a
    power of two.
    """

    steps_per_unit: int = 32
    method: str = EULER

    def __post_init__(self):
        if self.steps_per_unit < 1:
            raise DataError("steps_per_unit must be >= 1")
        if self.method not in (EULER, SCALING_SQUARING):
            raise DataError(f"unknown integration method {self.method!r}")


@dataclass(frozen=True)
class TimeGrid:
    """N regular integration times k·s/N for k = 1..N; the last one is s."""

    s: float
    N: int
    times: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if not (self.s > 0 and math.isfinite(self.s)):
            raise DataError("stopping point s must be positive and finite")
        if self.N < 1:
            raise DataError("frame count N must be >= 1")
        times = tuple(self.s * (k / self.N) for k in range(1, self.N + 1))
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DataError("time grid is not strictly increasing")
        object.__setattr__(self, "times", times)


def _require_velocity(v: VectorField) -> None:
    if v.kind != VELOCITY:
        raise DataError(f"expected a velocity field, got kind {v.kind!r}")


def _euler_steps(v_data: np.ndarray, u: np.ndarray, h: float, n: int) -> np.ndarray:
    """Advance displacement u by n Euler steps of size h."""
    step = (v_data.astype(np.float64) * h).astype(np.float32)
    for _ in range(n):
        u = _kernels.compose_disp(step, u)
    return u


def _squarings(u: np.ndarray, k: int) -> np.ndarray:
    for _ in range(k):
        u = _kernels.compose_disp(u, u)
    return u


def exp_field(v: VectorField, t: float, params: IntegrationParams | None = None) -> VectorField:
    """Displacement of phi(t), the flow of v integrated for time t.

    Inverse maps are obtained as exp_field(-v, t); negative t is an error.
    """
    _require_velocity(v)
    if not math.isfinite(t):
        raise DataError("integration time must be finite")
    if t < 0:
        raise DataError("integration time must be >= 0; exponentiate -v for the inverse map")
    if params is None:
        params = IntegrationParams()
    n = math.ceil(t * params.steps_per_unit)
    if n == 0:
        return zero_displacement(v.dims, v.spacing)
    if params.method == SCALING_SQUARING:
        k = n.bit_length() - 1
        if (1 << k) != n:
            raise DataError(
                f"scaling_squaring requires a power-of-two step count, got {n} "
                f"(t={t}, steps_per_unit={params.steps_per_unit})"
            )
        u0 = (v.data.astype(np.float64) * (t / n)).astype(np.float32)
        return VectorField(_squarings(u0, k), v.spacing, DISPLACEMENT)
    h = t / n
    u = zero_displacement(v.dims, v.spacing).data
    return VectorField(_euler_steps(v.data, u, h, n), v.spacing, DISPLACEMENT)


def exp_field_scaling_squaring(v: VectorField, K: int) -> VectorField:
    """Displacement of phi(1) by K halvings of v followed by K self-compositions."""
    _require_velocity(v)
    if K < 1:
        raise DataError("squaring count K must be >= 1")
    u0 = (v.data.astype(np.float64) / float(2**K)).astype(np.float32)
    return VectorField(_squarings(u0, K), v.spacing, DISPLACEMENT)


def integrate_sequence(
    v: VectorField, grid: TimeGrid, params: IntegrationParams | None = None
) -> list[VectorField]:
    """Displacements phi(t_k) at every grid time, computed in one pass.

    Each frame extends the previous one by composing further Euler steps,
    so the total cost is a single integration to time s. Within each
    inter-frame interval the step size is uniform; when dt·steps_per_unit
    is integral the schedule matches a from-scratch exp_field exactly.
    """
    _require_velocity(v)
    if params is None:
        params = IntegrationParams()
    if params.method != EULER:
        raise DataError("integrate_sequence supports only the euler method "
                        "(regular grid times are not powers of two)")
    dt = grid.s / grid.N
    m = math.ceil(dt * params.steps_per_unit)
    h = dt / m
    u = zero_displacement(v.dims, v.spacing).data
    frames = []
    for _ in range(grid.N):
        u = _euler_steps(v.data, u, h, m)
        frames.append(VectorField(u, v.spacing, DISPLACEMENT))
    return frames
