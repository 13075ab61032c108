"""One-ring spatial covariance model around a uniform circular array.

Each user is surrounded by scatterers on a disc; every scatterer
contributes a plane wave whose azimuth is the base-station-to-scatterer
direction.  Averaging the steering-vector outer products over the
scatterers gives the user's spatial covariance, which is trace-normalized
to one and then truncated to the dominant eigenvalues.

Geometry is two-dimensional (azimuth only) and every ray carries equal
power; scatterers sit hundreds of meters from a meter-scale array, so the
far-field plane-wave phase model applies per ray.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import eigh_desc, hermitian_part

__all__ = [
    "SPEED_OF_LIGHT",
    "ArrayGeometry",
    "UserGeometry",
    "UserCovariance",
    "make_uca",
    "sample_user_geometry",
    "steering_vector",
    "covariance_from_rays",
    "truncate_covariance",
]

SPEED_OF_LIGHT = 299_792_458.0  # m/s


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna element positions (num_elements x 2, meters) and wavelength."""

    element_positions: np.ndarray
    carrier_wavelength: float

    @property
    def num_elements(self) -> int:
        return self.element_positions.shape[0]


@dataclass(frozen=True)
class UserGeometry:
    """A user position and its surrounding scatterers (meters, 2-D)."""

    user_position: np.ndarray
    scatterer_positions: np.ndarray


@dataclass(frozen=True)
class UserCovariance:
    """Truncated spatial covariance of one user.

    ``factor`` is the M x r thin square root built from the retained
    eigenpairs, so ``factor @ factor.conj().T`` reproduces the truncated
    model; ``eigenvalues`` holds the retained eigenvalues in descending
    order and ``captured_energy_fraction`` the share of the full trace
    they account for.
    """

    full_covariance: np.ndarray
    factor: np.ndarray
    eigenvalues: np.ndarray
    retained_rank: int
    captured_energy_fraction: float

    @property
    def num_antennas(self) -> int:
        return self.factor.shape[0]

    def truncated_covariance(self) -> np.ndarray:
        return self.factor @ self.factor.conj().T


def make_uca(num_elements: int, diameter: float, carrier_freq: float) -> ArrayGeometry:
    """Uniform circular array centered at the origin.

    Elements are equally spaced in angle starting at angle zero, on the
    circle of the given diameter; the wavelength is c / carrier_freq.
    """
    if num_elements < 1:
        raise ValueError("num_elements must be >= 1")
    if diameter <= 0 or carrier_freq <= 0:
        raise ValueError("diameter and carrier_freq must be positive")
    angles = 2.0 * np.pi * np.arange(num_elements) / num_elements
    radius = 0.5 * diameter
    positions = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return ArrayGeometry(positions, SPEED_OF_LIGHT / carrier_freq)


def sample_user_geometry(
    rng: np.random.Generator,
    min_dist: float,
    max_dist: float,
    num_scatterers: int,
    ring_radius: float,
) -> UserGeometry:
    """Draw one user with scatterers area-uniform on a disc around it.

    The user azimuth is uniform on [0, 2*pi), its distance from the origin
    uniform on [min_dist, max_dist].  Scatterer radii use the sqrt trick so
    the points are uniform in area, not in radius.  The draw order (user
    angle, user distance, scatterer angles, scatterer radii) is fixed, so a
    given generator state yields a reproducible geometry.
    """
    if not 0.0 < min_dist < max_dist:
        raise ValueError("need 0 < min_dist < max_dist")
    if num_scatterers < 1:
        raise ValueError("num_scatterers must be >= 1")
    if ring_radius < 0:
        raise ValueError("ring_radius must be nonnegative")
    theta = rng.uniform(0.0, 2.0 * np.pi)
    dist = rng.uniform(min_dist, max_dist)
    user = dist * np.array([np.cos(theta), np.sin(theta)])
    s_theta = rng.uniform(0.0, 2.0 * np.pi, size=num_scatterers)
    s_rad = ring_radius * np.sqrt(rng.uniform(0.0, 1.0, size=num_scatterers))
    scat = user + s_rad[:, None] * np.stack([np.cos(s_theta), np.sin(s_theta)], axis=1)
    return UserGeometry(user, scat)


def steering_vector(geom: ArrayGeometry, azimuth: float) -> np.ndarray:
    """Plane-wave array response: exp(i * 2*pi/lambda * <position, direction>)."""
    k = 2.0 * np.pi / geom.carrier_wavelength
    pos = geom.element_positions
    phase = k * (pos[:, 0] * np.cos(azimuth) + pos[:, 1] * np.sin(azimuth))
    return np.exp(1j * phase)


def _steering_matrix(geom: ArrayGeometry, azimuths: np.ndarray) -> np.ndarray:
    k = 2.0 * np.pi / geom.carrier_wavelength
    pos = geom.element_positions
    phase = k * (
        pos[None, :, 0] * np.cos(azimuths)[:, None]
        + pos[None, :, 1] * np.sin(azimuths)[:, None]
    )
    return np.exp(1j * phase)


def covariance_from_rays(geom: ArrayGeometry, user: UserGeometry) -> np.ndarray:
    """Average steering outer products over scatterer azimuths, trace one.

    Contributions are summed after sorting the azimuths, which makes the
    result bit-reproducible under permutations of the scatterer list.
    """
    scat = np.asarray(user.scatterer_positions, dtype=float)
    az = np.arctan2(scat[:, 1], scat[:, 0])
    az = np.sort(az, kind="stable")
    a = _steering_matrix(geom, az)  # (S, M)
    r = a.T @ a.conj() / az.size
    r = r / np.real(np.trace(r))
    return hermitian_part(r)


def truncate_covariance(r, energy_threshold: float = 0.99) -> UserCovariance:
    """Keep the smallest leading eigenvalue set reaching the energy threshold.

    The retained rank is the smallest k with
    ``sum(w[:k]) / sum(w) >= energy_threshold`` for the descending
    eigenvalues w; the factor is the corresponding thin PSD square root.
    """
    if not 0.0 < energy_threshold <= 1.0:
        raise ValueError("energy_threshold must lie in (0, 1]")
    w, v = eigh_desc(r)
    cum = np.cumsum(w)
    total = float(cum[-1])
    if total <= 0.0:
        raise ValueError("covariance has nonpositive trace")
    if w[-1] < -1e-10 * max(float(w[0]), 1e-300):
        raise ValueError(f"covariance is not PSD: eigenvalue {w[-1]:.3e}")
    cum = cum / total  # last entry exactly 1.0
    rank = int(np.searchsorted(cum, energy_threshold - 1e-15) + 1)
    rank = min(rank, w.size)
    kept = np.maximum(w[:rank], 0.0)
    factor = v[:, :rank] * np.sqrt(kept)
    return UserCovariance(
        full_covariance=hermitian_part(np.asarray(r, dtype=complex)),
        factor=factor,
        eigenvalues=kept,
        retained_rank=rank,
        captured_energy_fraction=float(cum[rank - 1]),
    )
