"""Channel generation and SINR tests."""

from __future__ import annotations

import numpy as np
import pytest

from mascan.channel import (
    PathSet,
    build_channel_table,
    channel_coefficient,
    effective_channel,
    path_phase,
    sample_csi_error,
    sample_user_paths,
    sinr,
    transmit_frv,
)
from mascan.grid import SelectionState, build_grid

WAVELENGTH = 0.06


# ---- oracles -------------------------------------------------------------

def coefficient_oracle(xy, ref_xy, paths, lam):
    # term-by-term per-path accumulation, scalar arithmetic only
    k = paths.kappa
    d = paths.distance
    rho_los = (2 * np.pi / lam) * (
        (xy[0] - ref_xy[0]) * np.cos(paths.los_theta) * np.sin(paths.los_phi)
        + (xy[1] - ref_xy[1]) * np.sin(paths.los_theta)
    )
    h = np.sqrt(k / (k + 1)) * np.sqrt(paths.ref_gain / d) * np.exp(1j * rho_los)
    for p in range(paths.n_paths):
        rho = (2 * np.pi / lam) * (
            (xy[0] - ref_xy[0])
            * np.cos(paths.nlos_theta[p])
            * np.sin(paths.nlos_phi[p])
            + (xy[1] - ref_xy[1]) * np.sin(paths.nlos_theta[p])
        )
        h += np.sqrt(1 / (k + 1)) * paths.weights[p] * np.exp(1j * rho)
    return h


def make_paths(rng, distance=20.0, kappa=1.0, n_paths=4, ref_gain=1.0, alpha=2.2):
    return sample_user_paths(
        rng, distance, float(rng.uniform(-0.6, 0.6)), float(rng.uniform(-1.2, 1.2)),
        n_paths, kappa, alpha, ref_gain,
    )


# ---- path sampling -------------------------------------------------------

def test_paths_deterministic_and_valid():
    p1 = make_paths(np.random.default_rng(42))
    p2 = make_paths(np.random.default_rng(42))
    assert np.array_equal(p1.weights, p2.weights)
    assert np.array_equal(p1.nlos_theta, p2.nlos_theta)
    assert np.all(np.abs(p1.nlos_phi) <= np.pi / 2)
    assert np.all(p1.path_lengths >= p1.distance)
    assert np.all(p1.path_lengths <= 1.5 * p1.distance)


def test_paths_reject_bad_params():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_user_paths(rng, 10.0, 0.0, 0.0, 0, 1.0, 2.2, 1.0)
    with pytest.raises(ValueError):
        sample_user_paths(rng, 10.0, 0.0, 0.0, 4, -1.0, 2.2, 1.0)
    with pytest.raises(ValueError):
        PathSet(
            distance=-1.0, los_theta=0.0, los_phi=0.0,
            nlos_theta=np.zeros(1), nlos_phi=np.zeros(1),
            weights=np.ones(1, complex), path_lengths=np.ones(1),
            kappa=1.0, alpha=2.2, ref_gain=1.0,
        )


def test_elevation_density_symmetry():
    # cos-density elevations: E[sin(theta)] = 0; sin(theta) ~ Uniform(-1, 1)
    rng = np.random.default_rng(1)
    theta = np.arcsin(2.0 * rng.uniform(size=100_000) - 1.0)
    s = np.sin(theta)
    se = s.std() / np.sqrt(s.size)
    assert abs(s.mean()) < 3 * se
    assert s.std() == pytest.approx(np.sqrt(1 / 3), rel=0.02)


def test_nlos_mean_power_matches_pathloss_sum():
    # E|h_nlos|^2 = ref_gain * sum(length^-alpha), Monte-Carlo 3-sigma
    rng = np.random.default_rng(2)
    base = make_paths(rng, kappa=0.0)
    draws = []
    for _ in range(4000):
        w = np.sqrt(base.ref_gain * base.path_lengths ** -base.alpha / 2) * (
            rng.standard_normal(base.n_paths)
            + 1j * rng.standard_normal(base.n_paths)
        )
        draws.append(abs(w.sum()) ** 2)  # at the reference position FRV = 1
    draws = np.array(draws)
    want = base.ref_gain * np.sum(base.path_lengths ** -base.alpha)
    se = draws.std() / np.sqrt(draws.size)
    assert abs(draws.mean() - want) < 3 * se


# ---- field response ------------------------------------------------------

def test_frv_reference_position_is_ones():
    rng = np.random.default_rng(3)
    p = make_paths(rng)
    g = transmit_frv((0.0, 0.0), (0.0, 0.0), p.nlos_theta, p.nlos_phi, WAVELENGTH)
    assert np.allclose(g, 1.0)


def test_frv_zero_angles_is_ones_anywhere():
    g = transmit_frv((0.37, -0.21), (0.0, 0.0), np.zeros(3), np.zeros(3), WAVELENGTH)
    assert np.allclose(g, 1.0)


def test_frv_unit_modulus():
    rng = np.random.default_rng(4)
    p = make_paths(rng)
    g = transmit_frv((0.013, 0.027), (0.0, 0.0), p.nlos_theta, p.nlos_phi, WAVELENGTH)
    assert np.allclose(np.abs(g), 1.0, atol=1e-12)


def test_phase_formula_components():
    # displacement purely in y only engages sin(theta)
    rho = path_phase((0.0, 0.03), (0.0, 0.0), 0.5, 1.0, WAVELENGTH)
    assert rho == pytest.approx(2 * np.pi / WAVELENGTH * 0.03 * np.sin(0.5))


# ---- channel coefficient -------------------------------------------------

def test_coefficient_matches_per_path_oracle():
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = make_paths(rng, kappa=float(rng.uniform(0, 5)))
        xy = (float(rng.uniform(0, 0.06)), float(rng.uniform(0, 0.06)))
        got = channel_coefficient(xy, (0.0, 0.0), p, WAVELENGTH)
        want = coefficient_oracle(xy, (0.0, 0.0), p, WAVELENGTH)
        assert got == pytest.approx(want, abs=1e-12)


def test_coefficient_pure_nlos_at_kappa_zero():
    rng = np.random.default_rng(6)
    p = make_paths(rng, kappa=0.0)
    got = channel_coefficient((0.0, 0.0), (0.0, 0.0), p, WAVELENGTH)
    assert got == pytest.approx(p.weights.sum(), abs=1e-12)


def test_coefficient_single_unit_path():
    p = PathSet(
        distance=1.0, los_theta=0.0, los_phi=0.0,
        nlos_theta=np.zeros(1), nlos_phi=np.zeros(1),
        weights=np.ones(1, complex), path_lengths=np.ones(1),
        kappa=0.0, alpha=2.2, ref_gain=1.0,
    )
    assert channel_coefficient((0.0, 0.0), (0.0, 0.0), p, WAVELENGTH) == pytest.approx(1.0)


def test_coefficient_large_kappa_is_los():
    rng = np.random.default_rng(7)
    p = make_paths(rng, kappa=1e12, distance=25.0)
    got = channel_coefficient((0.01, 0.02), (0.0, 0.0), p, WAVELENGTH)
    want = coefficient_oracle((0.01, 0.02), (0.0, 0.0), p, WAVELENGTH)
    assert got == pytest.approx(want, abs=1e-12)
    assert abs(got) == pytest.approx(np.sqrt(p.ref_gain / p.distance), rel=1e-5)


# ---- channel table -------------------------------------------------------

def test_table_blocks_identical():
    rng = np.random.default_rng(8)
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    users = [make_paths(rng), make_paths(rng)]
    table = build_channel_table(grid, users, 2, WAVELENGTH)
    assert table.shape == (2, 18)
    assert np.allclose(table[:, :9], table[:, 9:], atol=1e-15)


def test_table_matches_scalar_coefficients():
    rng = np.random.default_rng(9)
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    users = [make_paths(rng)]
    table = build_channel_table(grid, users, 1, WAVELENGTH)
    for m in range(grid.m):
        want = channel_coefficient(grid.xy[m], grid.xy[0], users[0], WAVELENGTH)
        assert table[0, m] == pytest.approx(want, abs=1e-12)


def test_effective_channel_selection_semantics():
    rng = np.random.default_rng(10)
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    users = [make_paths(rng), make_paths(rng)]
    table = build_channel_table(grid, users, 2, WAVELENGTH)
    sel = SelectionState(m=9, indices=np.array([2, 7]))
    h = effective_channel(table, sel.matrix())
    assert h.shape == (2, 2)
    for k in range(2):
        assert h[k, 0] == pytest.approx(table[k, 2], abs=1e-15)
        assert h[k, 1] == pytest.approx(table[k, 9 + 7], abs=1e-15)


def test_effective_channel_random_product():
    rng = np.random.default_rng(11)
    table = rng.standard_normal((3, 8)) + 1j * rng.standard_normal((3, 8))
    bmat = rng.standard_normal((8, 2))
    assert np.allclose(effective_channel(table, bmat), table @ bmat)
    with pytest.raises(ValueError):
        effective_channel(table, np.eye(5))


# ---- CSI error sampling --------------------------------------------------

def test_csi_error_zero_radius():
    rng = np.random.default_rng(12)
    assert np.all(sample_csi_error(rng, 6, 0.0) == 0)


def test_csi_error_surface_norm_exact():
    rng = np.random.default_rng(13)
    for _ in range(100):
        e = sample_csi_error(rng, 8, 0.1, surface=True)
        assert np.linalg.norm(e) == pytest.approx(0.1, abs=1e-14)


def test_csi_error_ball_norms_bounded():
    rng = np.random.default_rng(14)
    norms = [np.linalg.norm(sample_csi_error(rng, 4, 0.25)) for _ in range(10_000)]
    norms = np.array(norms)
    assert np.all(norms <= 0.25 + 1e-14)
    # volume-uniform: P(r <= 0.25 * 0.9) = 0.9^(2*4)
    frac = np.mean(norms <= 0.25 * 0.9)
    assert frac == pytest.approx(0.9**8, abs=0.02)


# ---- SINR ----------------------------------------------------------------

def test_sinr_mrt_closed_form():
    rng = np.random.default_rng(15)
    h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    p = 2.7
    w = p * np.outer(h.conj(), h) / np.linalg.norm(h) ** 2
    got = sinr(h, [w], None, 1e-2)
    assert got == pytest.approx(p * np.linalg.norm(h) ** 2 / 1e-2, rel=1e-10)


def test_sinr_zero_signal():
    h = np.ones(3, complex)
    assert sinr(h, [np.zeros((3, 3))], np.eye(3), 1.0) == 0.0


def test_sinr_trace_equals_vector_form():
    rng = np.random.default_rng(16)
    for _ in range(30):
        k_users = 3
        h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        vecs = rng.standard_normal((k_users, 4)) + 1j * rng.standard_normal((k_users, 4))
        ws = [np.outer(v.conj(), v) for v in vecs]
        g = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        r = g @ g.conj().T
        noise = 0.3
        got = sinr(h, ws, r, noise)
        num = abs(h @ vecs[0].conj()) ** 2
        den = sum(abs(h @ v.conj()) ** 2 for v in vecs[1:])
        den += np.real(h @ r @ h.conj()) + noise
        assert got == pytest.approx(num / den, rel=1e-10)


def test_sinr_numerator_scaling():
    rng = np.random.default_rng(17)
    h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    w = np.outer(h.conj(), h)
    base = sinr(h, [w], None, 2.0)
    assert sinr(h, [3.0 * w], None, 2.0) == pytest.approx(3.0 * base, rel=1e-12)


def test_sinr_rejects_non_psd():
    h = np.ones(2, complex)
    bad = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
    with pytest.raises(ValueError):
        sinr(h, [bad], None, 1.0)
    with pytest.raises(ValueError):
        sinr(h, [np.eye(3, dtype=complex)], None, 1.0)
