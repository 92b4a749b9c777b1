"""Scan geometry, beam metrics, and chance-constraint tests."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mascan.grid import SelectionState, build_grid
from mascan.sensing import (
    beam_gain,
    beam_gains_many,
    beam_mse,
    build_scan_plan,
    build_steering_table,
    chance_gain_floor,
    empirical_outage,
    radar_snr,
    steering_frv,
)

WAVELENGTH = 0.06


def default_plan(q=4, **kw):
    args = dict(width_deg=120.0, n_snapshots=q, t_total=5e-3, t_min=1e-4,
                t_max=4e-3, n_el=16, n_az=16)
    args.update(kw)
    return build_scan_plan(**args)


# ---- oracles -------------------------------------------------------------

def beam_gain_oracle(a_vec, sel: SelectionState, rx):
    # explicit scalar accumulation over selected positions
    m = sel.m
    picked = [sel.indices[n] + n * m for n in range(sel.n)]
    total = 0.0 + 0.0j
    for ni, gi in enumerate(picked):
        for nj, gj in enumerate(picked):
            total += np.conj(a_vec[gi]) * rx[ni, nj] * a_vec[gj]
    return total.real


def general_combiner_snr(t, t_total, omega, a_eff, rx, noise, psi, ref_gain):
    # whole-array receive model with matched combining u = a/||a||
    eps = np.sqrt(omega / (4 * np.pi * psi**2))
    h_rt = (eps * ref_gain / (2 * psi)) * np.outer(a_eff, a_eff.conj())
    u = a_eff / np.linalg.norm(a_eff)
    num = (t / t_total) * np.real(u.conj() @ h_rt @ rx @ h_rt.conj().T @ u)
    return float(num / (noise * np.real(u.conj() @ u)))


# ---- scan plan -----------------------------------------------------------

def test_slice_centers_eight_way():
    plan = default_plan(q=8)
    want = np.deg2rad([-52.5, -37.5, -22.5, -7.5, 7.5, 22.5, 37.5, 52.5])
    assert np.allclose(plan.phi_centers, want, atol=1e-12)
    assert plan.half_az == pytest.approx(np.pi * 120 / (360 * 8))


def test_single_slice_centered():
    plan = default_plan(q=1)
    assert plan.phi_centers == pytest.approx([0.0])


def test_time_budget_rejected():
    with pytest.raises(ValueError):
        default_plan(q=4, t_min=2e-3)  # 4 * 2 ms > 5 ms
    with pytest.raises(ValueError):
        default_plan(t_min=5e-3, t_max=4e-3)
    with pytest.raises(ValueError):
        default_plan(width_deg=0.0)


def test_masks_partition_boresight_row():
    # with half-widths at half the slice, azimuth coverage tiles the sector
    plan = default_plan(q=4, n_el=64, n_az=64)
    cells_theta, cells_phi = plan.angle_cells()
    union = np.zeros(plan.n_el * plan.n_az)
    for q in range(4):
        m = plan.mask(q)
        center_idx = np.argmin(np.abs(plan.phi_grid - plan.phi_centers[q]))
        el_center = np.argmin(np.abs(plan.theta_grid))
        assert m[el_center * plan.n_az + center_idx] == 1.0
        union += m
    # no gaps inside the sector at elevation 0
    inside = (np.abs(cells_phi) <= np.deg2rad(60)) & (
        np.abs(cells_theta) <= plan.half_el
    )
    assert np.all(union[inside] >= 1.0)


def test_mask_rectangle_definition():
    plan = default_plan(q=4, n_el=8, n_az=8)
    q = 1
    m = plan.mask(q).reshape(plan.n_el, plan.n_az)
    th, ph = plan.theta_grid, plan.phi_grid
    for l in range(8):
        for j in range(8):
            want = (
                abs(th[l]) <= plan.half_el + 1e-12
                and abs(ph[j] - plan.phi_centers[q]) <= plan.half_az + 1e-12
            )
            assert m[l, j] == (1.0 if want else 0.0)


# ---- steering ------------------------------------------------------------

def test_steering_zero_angles_all_ones():
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    a = steering_frv(grid, 2, 0.0, 0.0, WAVELENGTH)
    assert a.shape == (18,)
    assert np.allclose(a, 1.0)


def test_steering_unit_modulus_and_selection_norm():
    grid = build_grid(1.0, WAVELENGTH, 0.01)
    a = steering_frv(grid, 4, 0.35, -0.8, WAVELENGTH)
    assert np.allclose(np.abs(a), 1.0, atol=1e-12)
    sel = SelectionState(m=grid.m, indices=np.array([0, 6, 42, 48]))
    a_eff = sel.matrix().T @ a
    assert np.linalg.norm(a_eff) ** 2 == pytest.approx(4.0, rel=1e-12)


def test_steering_table_matches_single_calls():
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    plan = default_plan(q=2, n_el=4, n_az=4)
    table = build_steering_table(grid, 2, plan, WAVELENGTH)
    theta, phi = plan.angle_cells()
    for c in [0, 5, 15]:
        want = steering_frv(grid, 2, theta[c], phi[c], WAVELENGTH)
        assert np.allclose(table.cells[:, c], want, atol=1e-12)
    for q in range(2):
        want = steering_frv(grid, 2, 0.0, plan.phi_centers[q], WAVELENGTH)
        assert np.allclose(table.boresights[:, q], want, atol=1e-12)


# ---- beam gain and MSE ---------------------------------------------------

def test_beam_gain_zero_and_identity():
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    sel = SelectionState(m=9, indices=np.array([0, 8]))
    a = steering_frv(grid, 2, 0.2, 0.4, WAVELENGTH)
    assert beam_gain(a, sel.matrix(), np.zeros((2, 2))) == 0.0
    assert beam_gain(a, sel.matrix(), np.eye(2)) == pytest.approx(2.0, rel=1e-12)


def test_beam_gain_matches_elementwise_oracle():
    rng = np.random.default_rng(21)
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    sel = SelectionState(m=9, indices=np.array([1, 7]))
    a = steering_frv(grid, 2, 0.3, -0.5, WAVELENGTH)
    g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    rx = g @ g.conj().T
    got = beam_gain(a, sel.matrix(), rx)
    assert got == pytest.approx(beam_gain_oracle(a, sel, rx), rel=1e-12)


def test_beam_gain_rejects_indefinite():
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    sel = SelectionState(m=9, indices=np.array([0, 8]))
    a = steering_frv(grid, 2, 0.0, 0.0, WAVELENGTH)
    with pytest.raises(ValueError):
        beam_gain(a, sel.matrix(), np.diag([1.0, -0.5]))


def test_beam_mse_trivial_cases_and_oracle():
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    plan = default_plan(q=2, n_el=8, n_az=8)
    table = build_steering_table(grid, 2, plan, WAVELENGTH)
    sel = SelectionState(m=9, indices=np.array([0, 8]))
    bmat = sel.matrix()
    mask = plan.mask(0)

    assert beam_mse(0.0, mask, table.cells, bmat, np.zeros((2, 2))) == 0.0
    want = mask.sum() / mask.size
    assert beam_mse(1.0, mask, table.cells, bmat, np.zeros((2, 2))) == pytest.approx(want)

    rng = np.random.default_rng(22)
    g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    rx = g @ g.conj().T
    got = beam_mse(0.7, mask, table.cells, bmat, rx)
    acc = 0.0
    for c in range(mask.size):
        gain = beam_gain(table.cells[:, c], bmat, rx)
        acc += (0.7 * mask[c] - gain) ** 2
    assert got == pytest.approx(acc / mask.size, rel=1e-10)


def test_beam_mse_midpoint_convexity_in_rx():
    rng = np.random.default_rng(23)
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    plan = default_plan(q=2, n_el=8, n_az=8)
    table = build_steering_table(grid, 2, plan, WAVELENGTH)
    bmat = SelectionState(m=9, indices=np.array([2, 6])).matrix()
    mask = plan.mask(1)
    for _ in range(10):
        g1 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        g2 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        r1, r2 = g1 @ g1.conj().T, g2 @ g2.conj().T
        mid = beam_mse(0.5, mask, table.cells, bmat, 0.5 * (r1 + r2))
        avg = 0.5 * (
            beam_mse(0.5, mask, table.cells, bmat, r1)
            + beam_mse(0.5, mask, table.cells, bmat, r2)
        )
        assert mid <= avg + 1e-12


# ---- radar SNR -----------------------------------------------------------

def test_radar_snr_zero_cross_section():
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    sel = SelectionState(m=9, indices=np.array([0, 8]))
    a = steering_frv(grid, 2, 0.0, 0.0, WAVELENGTH)
    got = radar_snr(1e-3, 5e-3, 0.0, a, sel.matrix(), np.eye(2), 1e-12, 50.0, 1.0)
    assert got == 0.0


def test_radar_snr_unit_prefactor_equals_gain():
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    sel = SelectionState(m=9, indices=np.array([0, 8]))
    a = steering_frv(grid, 2, 0.0, 0.3, WAVELENGTH)
    rx = np.array([[2.0, 0.3], [0.3, 1.0]], dtype=complex)
    psi = (1.0 / (16 * np.pi)) ** 0.25  # makes 16 pi psi^4 sigma^2 = 1
    got = radar_snr(5e-3, 5e-3, 1.0, a, sel.matrix(), rx, 1.0, psi, 1.0)
    assert got == pytest.approx(beam_gain(a, sel.matrix(), rx), rel=1e-12)


def test_radar_snr_linear_in_t_and_omega():
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    sel = SelectionState(m=9, indices=np.array([1, 5]))
    a = steering_frv(grid, 2, 0.0, -0.3, WAVELENGTH)
    rx = np.eye(2, dtype=complex)
    base = radar_snr(1e-3, 5e-3, 0.5, a, sel.matrix(), rx, 1e-12, 50.0, 1.0)
    assert radar_snr(2e-3, 5e-3, 0.5, a, sel.matrix(), rx, 1e-12, 50.0, 1.0) == pytest.approx(2 * base)
    assert radar_snr(1e-3, 5e-3, 1.5, a, sel.matrix(), rx, 1e-12, 50.0, 1.0) == pytest.approx(3 * base)


def test_matched_combiner_carries_array_gain_factor():
    # the specialized SNR uses the boresight gain alone; the whole-array
    # receive model with matched combining is exactly N times larger
    rng = np.random.default_rng(24)
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    for n, picks in [(2, [0, 8]), (3, [0, 2, 6])]:
        sel = SelectionState(m=9, indices=np.array(picks))
        a = steering_frv(grid, n, 0.0, 0.25, WAVELENGTH)
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        rx = g @ g.conj().T
        a_eff = sel.matrix().T @ a
        spec = radar_snr(1e-3, 5e-3, 0.8, a, sel.matrix(), rx, 1e-12, 50.0, 1.0)
        gen = general_combiner_snr(1e-3, 5e-3, 0.8, a_eff, rx, 1e-12, 50.0, 1.0)
        assert gen == pytest.approx(n * spec, rel=1e-9)


# ---- chance constraint ---------------------------------------------------

def test_floor_unit_log_factor():
    nu = 1.0 - np.exp(-1.0)
    got = chance_gain_floor(nu, 2.0, 1e-3, 10.0, 50.0, 1e-12, 1.0, 5e-3)
    want = 5e-3 * 16 * np.pi * 50.0**4 * 1e-12 * 10.0 / (1e-3 * 2.0)
    assert got == pytest.approx(want, rel=1e-12)


def test_floor_nu_multiplier():
    base = chance_gain_floor(1.0 - np.exp(-1.0), 1.0, 1e-3, 10.0, 50.0, 1e-12, 1.0, 5e-3)
    tight = chance_gain_floor(0.1, 1.0, 1e-3, 10.0, 50.0, 1e-12, 1.0, 5e-3)
    assert tight / base == pytest.approx(1.0 / -np.log(0.9), rel=1e-10)
    assert tight / base == pytest.approx(9.4912, abs=5e-4)


def test_floor_rejects_bad_nu():
    for nu in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            chance_gain_floor(nu, 1.0, 1e-3, 10.0, 50.0, 1e-12, 1.0, 5e-3)


def test_floor_blows_up_as_nu_vanishes():
    small = chance_gain_floor(1e-12, 1.0, 1e-3, 10.0, 50.0, 1e-12, 1.0, 5e-3)
    mild = chance_gain_floor(0.1, 1.0, 1e-3, 10.0, 50.0, 1e-12, 1.0, 5e-3)
    assert small > 1e10 * mild


@given(st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_floor_monotonicity(seed):
    rng = np.random.default_rng(seed)
    nu = float(rng.uniform(0.02, 0.5))
    om = float(rng.uniform(0.1, 5.0))
    t = float(rng.uniform(1e-4, 4e-3))
    gam = float(rng.uniform(1.0, 50.0))
    psi = float(rng.uniform(20.0, 80.0))
    args = dict(nu=nu, omega_av=om, t=t, gamma_th=gam, psi=psi,
                noise_power=1e-12, ref_gain=1.0, t_total=5e-3)
    base = chance_gain_floor(**args)
    assert chance_gain_floor(**{**args, "t": t * 1.3}) < base
    assert chance_gain_floor(**{**args, "gamma_th": gam * 1.3}) > base
    assert chance_gain_floor(**{**args, "psi": psi * 1.2}) == pytest.approx(
        base * 1.2**4, rel=1e-9
    )
    assert chance_gain_floor(**{**args, "omega_av": om * 2}) == pytest.approx(
        base / 2, rel=1e-9
    )
    assert chance_gain_floor(**{**args, "nu": min(0.9, nu * 1.5)}) < base


def test_outage_at_exact_floor():
    rng = np.random.default_rng(25)
    nu, om, t, gam, psi = 0.1, 0.7, 1.2e-3, 10.0, 50.0
    floor = chance_gain_floor(nu, om, t, gam, psi, 1e-12, 1.0, 5e-3)
    out = empirical_outage(rng, 100_000, om, t, 5e-3, gam, floor, 1e-12, 50.0, 1.0)
    assert 0.095 <= out <= 0.105


def test_outage_edge_cases():
    rng = np.random.default_rng(26)
    assert empirical_outage(rng, 1000, 1.0, 1e-3, 5e-3, 10.0, 0.0, 1e-12, 50.0, 1.0) == 1.0
    assert empirical_outage(rng, 1000, 1.0, 1e-3, 5e-3, 0.0, 5.0, 1e-12, 50.0, 1.0) == 0.0


def test_gains_many_matches_single():
    rng = np.random.default_rng(27)
    grid = build_grid(1 / 3, WAVELENGTH, 0.01)
    plan = default_plan(q=2, n_el=6, n_az=6)
    table = build_steering_table(grid, 2, plan, WAVELENGTH)
    bmat = SelectionState(m=9, indices=np.array([3, 5])).matrix()
    g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    rx = g @ g.conj().T
    many = beam_gains_many(table.cells, bmat, rx)
    for c in [0, 7, 20, 35]:
        assert many[c] == pytest.approx(beam_gain(table.cells[:, c], bmat, rx), rel=1e-12)
