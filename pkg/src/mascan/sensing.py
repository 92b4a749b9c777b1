"""Sector scanning geometry, beam patterns, and sensing performance.

One scanning period sweeps a W-degree azimuth sector in Q equal slices,
one slice per snapshot.  Detection quality is a radar SNR with an
exponentially distributed target cross section; the outage requirement
converts to a deterministic floor on the boresight beam gain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import PositionGrid

# conic solvers handle closed sets only; the floor is strict by this margin
STRICT_FLOOR_MARGIN = 1e-9


@dataclass(frozen=True, slots=True)
class SectorScanPlan:
    """Equal-slice azimuth scan of a W-degree sector.

    Boresights sit at slice centers with elevation zero.  ``half_el`` and
    ``half_az`` are the ideal-beam half-widths in radians; the angular
    evaluation grid has ``n_el`` x ``n_az`` points spanning [-pi/2, pi/2]
    inclusive on both axes.
    """

    width_deg: float
    n_snapshots: int
    phi_centers: np.ndarray = field(repr=False)
    half_el: float
    half_az: float
    n_el: int
    n_az: int
    t_total: float
    t_min: float
    t_max: float

    @property
    def theta_grid(self) -> np.ndarray:
        return np.linspace(-np.pi / 2, np.pi / 2, self.n_el)

    @property
    def phi_grid(self) -> np.ndarray:
        return np.linspace(-np.pi / 2, np.pi / 2, self.n_az)

    def mask(self, q) -> np.ndarray:
        """Flattened ideal-pattern indicator over the angular grid.

        Cell order is elevation-major: index l * n_az + j.
        """
        th = self.theta_grid
        ph = self.phi_grid
        on_el = np.abs(th - 0.0) <= self.half_el + 1e-12
        on_az = np.abs(ph - self.phi_centers[q]) <= self.half_az + 1e-12
        return (on_el[:, None] & on_az[None, :]).ravel().astype(float)

    def angle_cells(self):
        """(theta, phi) per flattened grid cell, matching mask order."""
        th = self.theta_grid
        ph = self.phi_grid
        tt, pp = np.meshgrid(th, ph, indexing="ij")
        return tt.ravel(), pp.ravel()


def build_scan_plan(width_deg, n_snapshots, t_total, t_min, t_max,
                    half_el=None, half_az=None, n_el=32, n_az=32) -> SectorScanPlan:
    """Partition the sector into equal slices and validate the time budget."""
    if width_deg <= 0 or width_deg > 360:
        raise ValueError("sector width must be in (0, 360] degrees")
    if n_snapshots < 1:
        raise ValueError("need at least one snapshot")
    if t_min <= 0 or t_min > t_max:
        raise ValueError("need 0 < t_min <= t_max")
    if n_snapshots * t_min > t_total + 1e-15:
        raise ValueError("minimum durations exceed the scanning period")
    slice_deg = width_deg / n_snapshots
    centers_deg = -width_deg / 2.0 + slice_deg * (np.arange(n_snapshots) + 0.5)
    default_half = np.pi * width_deg / (360.0 * n_snapshots)  # half slice, rad
    return SectorScanPlan(
        width_deg=float(width_deg),
        n_snapshots=int(n_snapshots),
        phi_centers=np.deg2rad(centers_deg),
        half_el=float(default_half if half_el is None else half_el),
        half_az=float(default_half if half_az is None else half_az),
        n_el=int(n_el),
        n_az=int(n_az),
        t_total=float(t_total),
        t_min=float(t_min),
        t_max=float(t_max),
    )


def steering_frv(grid: PositionGrid, n_elems, theta, phi, wavelength) -> np.ndarray:
    """Stacked unit-modulus steering entries over all element blocks, MN long."""
    ref = grid.xy[0]
    dx = grid.xy[:, 0] - ref[0]
    dy = grid.xy[:, 1] - ref[1]
    rho = (2.0 * np.pi / wavelength) * (
        dx * np.cos(theta) * np.sin(phi) + dy * np.sin(theta)
    )
    return np.tile(np.exp(1j * rho), n_elems)


@dataclass(frozen=True, slots=True)
class SteeringTable:
    """Precomputed FRVs for the angular grid and the snapshot boresights."""

    cells: np.ndarray = field(repr=False)       # (MN, n_el * n_az)
    boresights: np.ndarray = field(repr=False)  # (MN, Q)


def build_steering_table(grid: PositionGrid, n_elems, plan: SectorScanPlan,
                         wavelength) -> SteeringTable:
    theta, phi = plan.angle_cells()
    ref = grid.xy[0]
    dx = grid.xy[:, 0] - ref[0]
    dy = grid.xy[:, 1] - ref[1]
    two_pi = 2.0 * np.pi / wavelength
    rho = two_pi * (
        dx[:, None] * (np.cos(theta) * np.sin(phi))[None, :]
        + dy[:, None] * np.sin(theta)[None, :]
    )
    cells = np.tile(np.exp(1j * rho), (n_elems, 1))
    bores = np.stack(
        [
            steering_frv(grid, n_elems, 0.0, plan.phi_centers[q], wavelength)
            for q in range(plan.n_snapshots)
        ],
        axis=1,
    )
    return SteeringTable(cells=cells, boresights=bores)


def _check_psd(m, what):
    m = np.asarray(m, dtype=complex)
    if np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] < -1e-9:
        raise ValueError(f"{what} is not positive semidefinite")
    return m


def beam_gain(a_vec, bmat, rx) -> float:
    """Transmit gain a^H B Rx B^T a toward one direction."""
    rx = _check_psd(rx, "transmit covariance")
    a_sel = np.asarray(bmat).T @ np.asarray(a_vec, dtype=complex)
    return float(np.real(a_sel.conj() @ rx @ a_sel))


def beam_gains_many(cells, bmat, rx) -> np.ndarray:
    """beam_gain for every column of a steering-cell table (vectorized)."""
    a_sel = np.asarray(bmat).T @ np.asarray(cells, dtype=complex)
    return np.real(np.einsum("nc,nm,mc->c", a_sel.conj(), np.asarray(rx), a_sel))


def beam_mse(rho0, mask, cells, bmat, rx) -> float:
    """Mean squared mismatch between the scaled mask and realized gains."""
    if rho0 < 0:
        raise ValueError("pattern scale must be nonnegative")
    _check_psd(rx, "transmit covariance")
    gains = beam_gains_many(cells, bmat, rx)
    resid = rho0 * np.asarray(mask, dtype=float) - gains
    return float(np.mean(resid**2))


def radar_snr(t, t_total, omega, a_boresight, bmat, rx, noise_power, psi,
              ref_gain) -> float:
    """Detection SNR for one snapshot with steering-matched combining."""
    if t <= 0:
        raise ValueError("snapshot duration must be positive")
    if omega < 0:
        raise ValueError("cross section must be nonnegative")
    g = beam_gain(a_boresight, bmat, rx)
    return (t / t_total) * omega * ref_gain**2 * g / (16.0 * np.pi * psi**4 * noise_power)


def chance_gain_floor(nu, omega_av, t, gamma_th, psi, noise_power, ref_gain,
                      t_total) -> float:
    """Minimum boresight gain keeping Pr{SNR < threshold} at or below nu.

    Exponential cross sections give the closed form
    G* = T 16 pi Psi^4 sigma^2 Gamma_th / (t (-ln(1-nu)) Omega_av L0^2).
    """
    if not 0.0 < nu < 1.0:
        raise ValueError("outage tolerance must lie in (0, 1)")
    if t <= 0:
        raise ValueError("snapshot duration must be positive")
    num = t_total * 16.0 * np.pi * psi**4 * noise_power * gamma_th
    den = t * (-np.log1p(-nu)) * omega_av * ref_gain**2
    return float(num / den)


def empirical_outage(rng, samples, omega_av, t, t_total, gamma_th, gain,
                     noise_power, psi, ref_gain) -> float:
    """Fraction of exponential cross-section draws failing the threshold."""
    if samples < 1:
        raise ValueError("need at least one draw")
    omega = rng.exponential(scale=omega_av, size=samples)
    prefactor = (t / t_total) * ref_gain**2 * gain / (16.0 * np.pi * psi**4 * noise_power)
    return float(np.mean(prefactor * omega < gamma_th))
