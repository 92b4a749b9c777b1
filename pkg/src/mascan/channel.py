"""Rician downlink channels as a function of candidate element positions.

Every candidate position sees the same propagation paths; only the
per-path phases change with element displacement.  A channel table holds
the per-position coefficients for all users, replicated per element so
that selecting positions is a single matrix product with the block
selection matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import PositionGrid


@dataclass(frozen=True, slots=True)
class PathSet:
    """Propagation geometry and gains for one user link.

    Angles are radians in [-pi/2, pi/2] (elevation theta, azimuth phi).
    ``ref_gain`` is the linear reference gain at 1 m; ``path_lengths``
    are per-path propagation distances in meters.
    """

    distance: float
    los_theta: float
    los_phi: float
    nlos_theta: np.ndarray = field(repr=False)
    nlos_phi: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    path_lengths: np.ndarray = field(repr=False)
    kappa: float
    alpha: float
    ref_gain: float

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError("user distance must be positive")
        if len(self.nlos_theta) < 1:
            raise ValueError("need at least one propagation path")
        for ang in (self.nlos_theta, self.nlos_phi, (self.los_theta, self.los_phi)):
            arr = np.asarray(ang, dtype=float)
            if (np.abs(arr) > np.pi / 2 + 1e-12).any():
                raise ValueError("angles must lie in [-pi/2, pi/2]")

    @property
    def n_paths(self) -> int:
        return len(self.nlos_theta)


def sample_user_paths(rng, distance, los_theta, los_phi, n_paths, kappa,
                      alpha, ref_gain) -> PathSet:
    """Draw scatter-path geometry and complex gains for one user.

    Angles follow the density cos(theta)/(2 pi) on the half-space square:
    azimuth uniform, elevation via inverse CDF arcsin(2u - 1).  Path gains
    are zero-mean complex Gaussian with variance ref_gain * length^-alpha;
    per-path lengths stretch the direct distance by Uniform(0, 0.5).
    """
    if n_paths < 1:
        raise ValueError("need at least one propagation path")
    if kappa < 0 or alpha <= 0 or ref_gain <= 0:
        raise ValueError("invalid fading parameters")
    theta = np.arcsin(2.0 * rng.uniform(size=n_paths) - 1.0)
    phi = rng.uniform(-np.pi / 2, np.pi / 2, size=n_paths)
    lengths = distance * (1.0 + rng.uniform(0.0, 0.5, size=n_paths))
    var = ref_gain * lengths ** (-alpha)
    scale = np.sqrt(var / 2.0)
    w = scale * (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths))
    return PathSet(
        distance=float(distance), los_theta=float(los_theta),
        los_phi=float(los_phi), nlos_theta=theta, nlos_phi=phi,
        weights=w, path_lengths=lengths, kappa=float(kappa),
        alpha=float(alpha), ref_gain=float(ref_gain),
    )


def path_phase(xy, ref_xy, theta, phi, wavelength):
    """Per-path phase of a displaced element relative to the reference."""
    dx = xy[0] - ref_xy[0]
    dy = xy[1] - ref_xy[1]
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return (2.0 * np.pi / wavelength) * (
        dx * np.cos(theta) * np.sin(phi) + dy * np.sin(theta)
    )


def transmit_frv(xy, ref_xy, theta, phi, wavelength) -> np.ndarray:
    """Unit-modulus field response e^{j rho} per path."""
    return np.exp(1j * path_phase(xy, ref_xy, theta, phi, wavelength))


def channel_coefficient(xy, ref_xy, paths: PathSet, wavelength) -> complex:
    """Rician coefficient from one candidate position to the user."""
    k = paths.kappa
    los_amp = np.sqrt(paths.ref_gain / paths.distance)
    los = los_amp * np.exp(
        1j * path_phase(xy, ref_xy, paths.los_theta, paths.los_phi, wavelength)
    )
    frv = transmit_frv(xy, ref_xy, paths.nlos_theta, paths.nlos_phi, wavelength)
    nlos = np.sum(paths.weights * frv)
    return complex(np.sqrt(k / (k + 1.0)) * los + np.sqrt(1.0 / (k + 1.0)) * nlos)


def position_channel_rows(grid: PositionGrid, paths: PathSet, wavelength):
    """Coefficients from every candidate position to one user, length M."""
    ref = grid.xy[0]
    k = paths.kappa
    los_amp = np.sqrt(paths.ref_gain / paths.distance)
    dx = grid.xy[:, 0] - ref[0]
    dy = grid.xy[:, 1] - ref[1]
    two_pi = 2.0 * np.pi / wavelength
    los_rho = two_pi * (
        dx * np.cos(paths.los_theta) * np.sin(paths.los_phi)
        + dy * np.sin(paths.los_theta)
    )
    los = los_amp * np.exp(1j * los_rho)
    # (M, L) phase table in one shot
    rho = two_pi * (
        dx[:, None] * (np.cos(paths.nlos_theta) * np.sin(paths.nlos_phi))[None, :]
        + dy[:, None] * np.sin(paths.nlos_theta)[None, :]
    )
    nlos = np.exp(1j * rho) @ paths.weights
    return np.sqrt(k / (k + 1.0)) * los + np.sqrt(1.0 / (k + 1.0)) * nlos


def build_channel_table(grid: PositionGrid, path_sets, n_elems,
                        wavelength) -> np.ndarray:
    """(K, M*N) table of per-position coefficients, replicated per element.

    The channel depends on position alone, so the N column blocks are
    identical; the layout matches the block selection matrix.
    """
    base = np.stack(
        [position_channel_rows(grid, p, wavelength) for p in path_sets]
    )
    return np.tile(base, (1, n_elems))


def effective_channel(table, bmat) -> np.ndarray:
    """Per-element channels of a placement: table @ B, shape (K, N)."""
    table = np.asarray(table)
    bmat = np.asarray(bmat)
    if table.shape[1] != bmat.shape[0]:
        raise ValueError("channel table and selection matrix do not conform")
    return table @ bmat


def sample_csi_error(rng, dim, radius, surface=False) -> np.ndarray:
    """Complex error vector inside (or on) the uncertainty ball.

    Ball samples are uniform in volume: Gaussian direction with radius
    mu * u^(1/(2 dim)); the real dimension of C^dim is 2 dim.
    """
    if radius < 0:
        raise ValueError("uncertainty radius must be nonnegative")
    if radius == 0:
        return np.zeros(dim, dtype=complex)
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    z /= np.linalg.norm(z)
    if surface:
        return radius * z
    r = radius * rng.uniform() ** (1.0 / (2.0 * dim))
    return r * z


def sinr(h_row, w_list, r_mat, noise_power) -> float:
    """Trace-form SINR of one user for given transmit covariances.

    Accepts effective (N) or lifted (MN) domain inputs as long as the
    channel row and covariances conform.  ``w_list`` holds all users'
    covariances with the intended user first.
    """
    h = np.asarray(h_row, dtype=complex).ravel()
    mats = [np.asarray(w, dtype=complex) for w in w_list]
    r = np.asarray(r_mat, dtype=complex) if r_mat is not None else None
    for m in mats + ([r] if r is not None else []):
        if m.shape != (h.size, h.size):
            raise ValueError("covariance shape does not match channel length")
        if np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] < -1e-9:
            raise ValueError("covariance is not positive semidefinite")
    signal = float(np.real(h @ mats[0] @ h.conj()))
    interference = sum(float(np.real(h @ m @ h.conj())) for m in mats[1:])
    if r is not None:
        interference += float(np.real(h @ r @ h.conj()))
    return signal / (interference + float(noise_power))
