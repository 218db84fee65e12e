"""Phase-space maps over a (theta, phi) manifold chart and orbit traces."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .model import Manifold

DEFAULT_N_THETA = 101
DEFAULT_N_PHI = 201


def projection_grid(n_theta: int = DEFAULT_N_THETA, n_phi: int = DEFAULT_N_PHI):
    """Chart grid: theta in [0, pi] inclusive of the poles, phi in [0, 2pi)."""
    if n_theta < 2 or n_phi < 2:
        raise ValueError("grid needs at least 2 points per axis")
    thetas = np.linspace(0.0, math.pi, n_theta)
    phis = np.linspace(0.0, 2.0 * math.pi, n_phi, endpoint=False)
    return thetas, phis


@dataclass(frozen=True)
class ProjectionMap:
    """Scalar field Q(theta, phi) sampled on a manifold chart grid."""

    thetas: np.ndarray
    phis: np.ndarray
    values: np.ndarray
    manifold: Manifold

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.thetas), len(self.phis)):
            raise ValueError(
                f"values shape {values.shape} does not match grid "
                f"({len(self.thetas)}, {len(self.phis)})"
            )
        if values.size and (values.min() < -1e-12 or values.max() > 1.0 + 1e-9):
            raise ValueError("projection values must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    @property
    def maximum(self) -> float:
        return float(self.values.max())

    def argmax_point(self):
        """(theta, phi) of the grid maximum."""
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return float(self.thetas[i]), float(self.phis[j])

    def interpolate(self, theta, phi) -> np.ndarray:
        """Bilinear interpolation, periodic in phi."""
        return bilinear_on_chart(self.thetas, self.phis, self.values, theta, phi)

    def scaled(self, factor: float) -> "ProjectionMap":
        return ProjectionMap(self.thetas, self.phis, factor * self.values, self.manifold)


def bilinear_on_chart(thetas, phis, values, theta, phi) -> np.ndarray:
    """Interpolate a chart-grid field; phi wraps, theta is clamped to [0, pi]."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    n_theta, n_phi = len(thetas), len(phis)
    dtheta = thetas[1] - thetas[0]
    dphi = phis[1] - phis[0]

    x = np.clip(theta, 0.0, math.pi) / dtheta
    i0 = np.minimum(x.astype(int), n_theta - 2)
    fx = x - i0

    y = (phi % (2.0 * math.pi)) / dphi
    j0 = np.minimum(y.astype(int), n_phi - 1)
    fy = y - j0
    j1 = (j0 + 1) % n_phi

    v00 = values[i0, j0]
    v01 = values[i0, j1]
    v10 = values[i0 + 1, j0]
    v11 = values[i0 + 1, j1]
    return (
        v00 * (1 - fx) * (1 - fy)
        + v01 * (1 - fx) * fy
        + v10 * fx * (1 - fy)
        + v11 * fx * fy
    )


def chart_interpolation_matrix(thetas, phis, theta_pts, phi_pts) -> sparse.csr_matrix:
    """Sparse operator evaluating bilinear chart interpolation at fixed points.

    Applied to a flattened (n_theta * n_phi, ...) field it returns the field
    values at the sample points; phi wraps periodically.
    """
    theta_pts = np.asarray(theta_pts, dtype=float)
    phi_pts = np.asarray(phi_pts, dtype=float)
    n_theta, n_phi = len(thetas), len(phis)
    dtheta = thetas[1] - thetas[0]
    dphi = phis[1] - phis[0]

    x = np.clip(theta_pts, 0.0, math.pi) / dtheta
    i0 = np.minimum(x.astype(int), n_theta - 2)
    fx = x - i0
    y = (phi_pts % (2.0 * math.pi)) / dphi
    j0 = np.minimum(y.astype(int), n_phi - 1)
    fy = y - j0
    j1 = (j0 + 1) % n_phi

    n_pts = len(theta_pts)
    rows = np.repeat(np.arange(n_pts), 4)
    cols = np.stack(
        [i0 * n_phi + j0, i0 * n_phi + j1, (i0 + 1) * n_phi + j0, (i0 + 1) * n_phi + j1],
        axis=1,
    ).ravel()
    weights = np.stack(
        [(1 - fx) * (1 - fy), (1 - fx) * fy, fx * (1 - fy), fx * fy], axis=1
    ).ravel()
    return sparse.csr_matrix(
        (weights, (rows, cols)), shape=(n_pts, n_theta * n_phi)
    )


@dataclass(frozen=True)
class UpoTrace:
    """One classical orbit traced on the manifold chart."""

    thetas: np.ndarray
    phis: np.ndarray
    manifold: Manifold
    degenerate: bool = False

    def __post_init__(self):
        if len(self.thetas) != len(self.phis):
            raise ValueError("trace theta/phi lengths differ")

    def __len__(self) -> int:
        return len(self.thetas)


def chart_coordinates(vectors: np.ndarray):
    """(theta, phi) chart coordinates of unit vectors, phi in [0, 2pi)."""
    v = np.atleast_2d(vectors)
    theta = np.arccos(np.clip(v[:, 2], -1.0, 1.0))
    phi = np.arctan2(v[:, 1], v[:, 0]) % (2.0 * math.pi)
    return theta, phi
