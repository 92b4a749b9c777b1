"""Conic stage programs for the alternating transmit-design loops.

Three builders cover the block structure: covariances at fixed durations
and SINR floors, durations/floors at fixed covariances, and the relaxed
position-selection program at fixed covariances and durations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import (
    STATUS_ITERATIONS,
    STATUS_NUMERICAL,
    ConicProgram,
    DEFAULT_TOL,
    LinExpr,
    lin_sum,
)
from .grid import glover_constraints
from .sensing import STRICT_FLOOR_MARGIN, chance_gain_floor
from .transforms import (
    CMatAffine,
    binary_penalty,
    bordered_robust_lmi,
    cmat_combine,
    cmat_quad_form,
    gram_trace_tangent,
    product_bound_coeffs,
    rate_tangent,
    schur_product_lmi,
    xi_cap,
)

RATE_CUT_TOL = 1e-8
MAX_RATE_CUT_ROUNDS = 5
RETRY_TOLS = (1e-6, 1e-5)


def solve_with_retry(prog: ConicProgram, tol=DEFAULT_TOL):
    """Solve, relaxing the tolerance when the interior point stalls.

    Wide dynamic range (receiver noise in picowatts next to watt-scale
    sensing beams) can leave the backend short of the tightest gap at
    realistic sizes; a conclusive status at a looser gap is preferred to
    an inconclusive one at the tight gap.
    """
    sol = prog.solve(tol=tol)
    for looser in RETRY_TOLS:
        if sol.status not in (STATUS_ITERATIONS, STATUS_NUMERICAL):
            break
        if looser <= tol:
            continue
        sol = prog.solve(tol=looser)
    return sol


@dataclass(frozen=True)
class StageData:
    """Problem data at a fixed element placement, reduced to selected rows.

    Channels, steering cells, and boresights are already compressed to the
    selected positions, so stage programs work in the element domain.
    """

    bmat: np.ndarray        # (MN, N) one-hot selection columns
    h_eff: np.ndarray       # (K, N) nominal channel rows at the selection
    mu: np.ndarray          # (K,) CSI error radii
    noise: np.ndarray       # (K,) receiver noise powers
    cells: np.ndarray       # (N, C) steering columns over the angle grid
    bores: np.ndarray       # (N, Q) per-snapshot boresight steering
    masks: np.ndarray       # (Q, C) desired-pattern indicators
    omega_av: np.ndarray    # (Q,) mean target cross sections
    p_max: float
    rate_min: np.ndarray    # (K,)
    t_total: float
    t_min: float
    t_max: float
    nu: float
    gamma_th: float
    psi: float
    sense_noise: float
    ref_gain: float
    delta_d: float

    @property
    def n_elems(self) -> int:
        return self.h_eff.shape[1]

    @property
    def n_users(self) -> int:
        return self.h_eff.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.masks.shape[0]

    @property
    def n_cells(self) -> int:
        return self.masks.shape[1]

    def gain_floor(self, q, t) -> float:
        return chance_gain_floor(
            self.nu, self.omega_av[q], t, self.gamma_th, self.psi,
            self.sense_noise, self.ref_gain, self.t_total,
        )


def _pattern_soc(prog, data, q, rho_col, var_cols, gain_map):
    """Mean-square pattern mismatch as one compressed second-order cone.

    The residual over all cells is affine with matrix [mask | -gains]; a
    QR factor preserves its norm, shrinking the cone to the column count.
    """
    c_cells = data.n_cells
    stacked = np.concatenate(
        [np.asarray(data.masks[q], dtype=float)[:, None], -gain_map], axis=1
    )
    rmat = np.linalg.qr(stacked, mode="r")
    cols = [rho_col] + list(var_cols)
    parts = []
    for i in range(rmat.shape[0]):
        coeff = {
            cols[j]: float(rmat[i, j])
            for j in range(len(cols))
            if rmat[i, j] != 0.0
        }
        if coeff:
            parts.append(LinExpr(coeff))
    radius = float(np.sqrt(c_cells * data.delta_d))
    prog.add_soc(LinExpr({}, radius), parts, name=f"pattern-mse[{q}]")


def _nominal_sinr_row(g: CMatAffine, u, noise, lam_col=None, lam_fixed=None):
    """Zero-radius collapse of the robust constraint: u^H G u >= lam sigma^2."""
    expr = cmat_quad_form(g, u)
    if lam_col is not None:
        expr = expr.plus(LinExpr({lam_col: -noise}))
    else:
        expr = expr.plus(-lam_fixed * noise)
    return expr


def build_covariance_program(data: StageData, t, lam, name="covariance-stage"):
    """Covariances, rate slacks, and pattern scales at fixed (t, lam).

    Minimizes duration-weighted power under the power cap, the averaged
    rate requirement, robust-SINR certificates, the pattern-mismatch cone,
    and the sensing gain floor.
    """
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    kk, qq, nn = data.n_users, data.n_snapshots, data.n_elems
    if t.shape != (qq,) or lam.shape != (kk, qq):
        raise ValueError("fixed-value shapes do not match the stage data")

    prog = ConicProgram(name)
    w_vars = [[prog.add_hermitian(f"w[{q}][{k}]", nn) for k in range(kk)]
              for q in range(qq)]
    r_vars = [prog.add_hermitian(f"r[{q}]", nn) for q in range(qq)]
    xi = prog.add_vector("xi", kk * qq, nonneg=True)
    rho = prog.add_vector("rho", qq, nonneg=True)
    iota = prog.add_vector("iota", kk * qq, nonneg=True)

    obj = LinExpr()
    for q in range(qq):
        scale = t[q] / data.t_total
        for k in range(kk):
            obj = obj.plus(w_vars[q][k].trace().scaled(scale))
        obj = obj.plus(r_vars[q].trace().scaled(scale))
    prog.minimize(obj)

    for q in range(qq):
        power = lin_sum([w_vars[q][k].trace() for k in range(kk)]).plus(
            r_vars[q].trace()
        )
        prog.add_le(power, data.p_max, name=f"power-cap[{q}]")

    for k in range(kk):
        avg_rate = lin_sum(
            [xi.expr(k * qq + q).scaled(t[q] / data.t_total) for q in range(qq)]
        )
        prog.add_ge(avg_rate, float(data.rate_min[k]), name=f"rate[{k}]")
        for q in range(qq):
            prog.add_le(xi.expr(k * qq + q), xi_cap(lam[k, q]),
                        name=f"slack-cap[{k}][{q}]")

    for q in range(qq):
        for k in range(kk):
            terms = [(w_vars[q][k], 1.0)]
            terms += [(w_vars[q][i], -lam[k, q]) for i in range(kk) if i != k]
            terms.append((r_vars[q], -lam[k, q]))
            g = CMatAffine.from_vars(nn, terms)
            u = data.h_eff[k].conj()
            if data.mu[k] == 0.0:
                prog.add_ge(
                    _nominal_sinr_row(g, u, data.noise[k], lam_fixed=lam[k, q]),
                    0.0, name=f"sinr[{k}][{q}]",
                )
            else:
                prog.add_psd(
                    bordered_robust_lmi(
                        g, u, data.mu[k], data.noise[k],
                        iota.offset + k * qq + q, lam_fixed=lam[k, q],
                    ),
                    name=f"robust-sinr[{k}][{q}]",
                )

    cell_vecs = data.cells.T  # (C, N)
    n2 = nn * nn
    for q in range(qq):
        cov_vars = [*w_vars[q], r_vars[q]]
        gain_map = np.concatenate(
            [v.quad_rows(cell_vecs) for v in cov_vars], axis=1
        )
        var_cols = [v.offset + j for v in cov_vars for j in range(n2)]
        _pattern_soc(prog, data, q, rho.offset + q, var_cols, gain_map)

        bore = data.bores[:, q]
        bore_gain = LinExpr()
        for v in cov_vars:
            row = v.quad_rows(bore)[0]
            bore_gain = bore_gain.plus(
                LinExpr({v.offset + j: row[j] for j in range(n2) if row[j] != 0.0})
            )
        floor = data.gain_floor(q, t[q]) * (1.0 + STRICT_FLOOR_MARGIN)
        prog.add_ge(bore_gain, floor, name=f"gain-floor[{q}]")

    handles = {"w": w_vars, "r": r_vars, "xi": xi, "rho": rho, "iota": iota}
    return prog, handles


def solve_covariance_stage(data: StageData, t, lam, tol=DEFAULT_TOL):
    """Build and solve the covariance stage; unpack per-snapshot values.

    Returns (solution, parts) where parts is None unless optimal, else a
    dict with w (Q, K, N, N), r (Q, N, N), xi (K, Q), rho (Q,), iota (K, Q).
    """
    prog, handles = build_covariance_program(data, t, lam)
    sol = solve_with_retry(prog, tol=tol)
    if not sol.ok:
        return sol, None
    kk, qq, nn = data.n_users, data.n_snapshots, data.n_elems
    w = np.empty((qq, kk, nn, nn), dtype=complex)
    r = np.empty((qq, nn, nn), dtype=complex)
    for q in range(qq):
        for k in range(kk):
            w[q, k] = sol.primal[f"w[{q}][{k}]"]
        r[q] = sol.primal[f"r[{q}]"]
    parts = {
        "w": w,
        "r": r,
        "xi": sol.primal["xi"].reshape(kk, qq),
        "rho": sol.primal["rho"].copy(),
        "iota": sol.primal["iota"].reshape(kk, qq),
    }
    return sol, parts


def build_duration_program(data: StageData, w_vals, r_vals, t0, xi0,
                           cut_points, name="duration-stage"):
    """Durations, SINR floors, and rate slacks at fixed covariances.

    The duration-rate product is replaced by its concave minorant at
    (t0, xi0); the floor-vs-slack curve is enforced through the tangent
    cuts in ``cut_points[k][q]``.
    """
    w_vals = np.asarray(w_vals, dtype=complex)
    r_vals = np.asarray(r_vals, dtype=complex)
    t0 = np.asarray(t0, dtype=float)
    xi0 = np.asarray(xi0, dtype=float)
    kk, qq, nn = data.n_users, data.n_snapshots, data.n_elems

    prog = ConicProgram(name)
    t = prog.add_vector("t", qq)
    lam = prog.add_vector("lam", kk * qq, nonneg=True)
    xi = prog.add_vector("xi", kk * qq, nonneg=True)
    iota = prog.add_vector("iota", kk * qq, nonneg=True)
    z = prog.add_vector("z", kk * qq)

    powers = np.array(
        [
            sum(float(np.real(np.trace(w_vals[q, k]))) for k in range(kk))
            + float(np.real(np.trace(r_vals[q])))
            for q in range(qq)
        ]
    )
    prog.minimize(
        lin_sum([t.expr(q).scaled(powers[q] / data.t_total) for q in range(qq)])
    )

    for q in range(qq):
        prog.add_ge(t.expr(q), data.t_min, name=f"dwell-min[{q}]")
        prog.add_le(t.expr(q), data.t_max, name=f"dwell-max[{q}]")
    prog.add_le(lin_sum(t.exprs()), data.t_total, name="dwell-total")

    for k in range(kk):
        bound_terms = []
        for q in range(qq):
            idx = k * qq + q
            s0, offset = product_bound_coeffs(t0[q], xi0[k, q])
            bound = (
                t.expr(q).plus(xi.expr(idx)).scaled(s0)
                .plus(-offset)
                .plus(z.expr(idx).scaled(-0.5))
            )
            bound_terms.append(bound.scaled(1.0 / data.t_total))
            # z >= t^2 + xi^2 via the rotated-cone square trick
            prog.add_soc(
                z.expr(idx).scaled(0.5).plus(0.5),
                [t.expr(q), xi.expr(idx), z.expr(idx).scaled(0.5).plus(-0.5)],
                name=f"square[{k}][{q}]",
            )
        prog.add_ge(lin_sum(bound_terms), float(data.rate_min[k]),
                    name=f"rate[{k}]")

    for k in range(kk):
        for q in range(qq):
            idx = k * qq + q
            for point in cut_points[k][q]:
                slope, intercept = rate_tangent(point)
                prog.add_ge(
                    lam.expr(idx).minus(xi.expr(idx).scaled(slope)),
                    intercept, name=f"floor-cut[{k}][{q}]",
                )

    for q in range(qq):
        rx = r_vals[q] + w_vals[q].sum(axis=0)
        for k in range(kk):
            idx = k * qq + q
            interference = rx - w_vals[q, k]
            g = CMatAffine(nn, const=w_vals[q, k])
            g.add_coeff(lam.offset + idx, -interference)
            u = data.h_eff[k].conj()
            if data.mu[k] == 0.0:
                prog.add_ge(
                    _nominal_sinr_row(g, u, data.noise[k],
                                      lam_col=lam.offset + idx),
                    0.0, name=f"sinr[{k}][{q}]",
                )
            else:
                prog.add_psd(
                    bordered_robust_lmi(
                        g, u, data.mu[k], data.noise[k],
                        iota.offset + idx, lam_var=lam.offset + idx,
                    ),
                    name=f"robust-sinr[{k}][{q}]",
                )

        bore = data.bores[:, q]
        gain = float(np.real(bore.conj() @ rx @ bore))
        budget = data.gain_floor(q, 1.0) * (1.0 + STRICT_FLOOR_MARGIN)
        prog.add_ge(t.expr(q).scaled(gain), budget, name=f"gain-floor[{q}]")

    handles = {"t": t, "lam": lam, "xi": xi, "iota": iota, "z": z}
    return prog, handles


def solve_duration_stage(data: StageData, w_vals, r_vals, t0, xi0,
                         tol=DEFAULT_TOL):
    """Duration stage with tangent-cut refinement of the floor curve.

    Re-solves with added cuts until every (slack, floor) pair satisfies
    the exponential relation within 1e-8; the univariate convexity makes
    a handful of rounds sufficient.

    Returns (solution, parts, rounds); parts is None unless optimal.
    """
    kk, qq = data.n_users, data.n_snapshots
    xi0 = np.asarray(xi0, dtype=float)
    cut_points = [[[0.0, xi0[k, q]] for q in range(qq)] for k in range(kk)]
    sol = parts = None
    for round_idx in range(1 + MAX_RATE_CUT_ROUNDS):
        prog, _ = build_duration_program(data, w_vals, r_vals, t0, xi0,
                                         cut_points)
        sol = solve_with_retry(prog, tol=tol)
        if not sol.ok:
            return sol, None, round_idx
        xi_val = sol.primal["xi"].reshape(kk, qq)
        lam_val = sol.primal["lam"].reshape(kk, qq)
        worst = 0.0
        for k in range(kk):
            for q in range(qq):
                gap = (2.0 ** xi_val[k, q] - 1.0) - lam_val[k, q]
                if gap > RATE_CUT_TOL:
                    cut_points[k][q].append(xi_val[k, q])
                worst = max(worst, gap)
        if worst <= RATE_CUT_TOL:
            break
    parts = {
        "t": sol.primal["t"].copy(),
        "lam": sol.primal["lam"].reshape(kk, qq),
        "xi": sol.primal["xi"].reshape(kk, qq),
        "iota": sol.primal["iota"].reshape(kk, qq),
    }
    return sol, parts, round_idx


# ---- position-selection stage --------------------------------------------

@dataclass(frozen=True)
class SelectionData:
    """Full-grid data for the position-selection stage."""

    dist: np.ndarray        # (M, M) pairwise grid distances
    d_min: float
    n_elems: int
    h_rows: np.ndarray      # (K, MN) nominal channel table rows
    mu: np.ndarray
    noise: np.ndarray
    cells: np.ndarray       # (MN, C) full steering table
    bores: np.ndarray       # (MN, Q)
    masks: np.ndarray       # (Q, C)
    omega_av: np.ndarray
    rate_min: np.ndarray
    t_total: float
    nu: float
    gamma_th: float
    psi: float
    sense_noise: float
    ref_gain: float
    delta_d: float

    @property
    def n_positions(self) -> int:
        return self.dist.shape[0]

    @property
    def n_users(self) -> int:
        return self.h_rows.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.masks.shape[0]

    @property
    def n_cells(self) -> int:
        return self.masks.shape[1]

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(a, b) for a in range(self.n_elems)
                for b in range(a + 1, self.n_elems)]

    def gain_floor(self, q, t) -> float:
        return chance_gain_floor(
            self.nu, self.omega_av[q], t, self.gamma_th, self.psi,
            self.sense_noise, self.ref_gain, self.t_total,
        )


def selection_product_map(sel: SelectionData, cov, b_offset, phi_offset):
    """Affine stand-in for the lifted product B' cov B'^T over (b, phi).

    Exact whenever (b, phi) is binary and consistent: diagonal blocks use
    the selection entries directly, cross blocks the pair products.
    """
    m, ne = sel.n_positions, sel.n_elems
    mn = m * ne
    cov = np.asarray(cov, dtype=complex)
    out = CMatAffine(mn)
    for n in range(ne):
        dn = float(np.real(cov[n, n]))
        if dn == 0.0:
            continue
        for i in range(m):
            e = np.zeros((mn, mn), dtype=complex)
            e[n * m + i, n * m + i] = dn
            out.add_coeff(b_offset + n * m + i, e)
    for pos, (n, n2) in enumerate(sel.pairs):
        v = cov[n, n2]
        if v == 0.0:
            continue
        for i in range(m):
            for j in range(m):
                e = np.zeros((mn, mn), dtype=complex)
                e[n * m + i, n2 * m + j] = v
                e[n2 * m + j, n * m + i] = np.conj(v)
                out.add_coeff(phi_offset + (pos * m + i) * m + j, e)
    return out


def _selection_gain_map(sel: SelectionData, rx, vectors):
    """Per-direction gain coefficients over (b, phi) at fixed covariance.

    ``vectors`` is (MN, D); returns (D, MN + pairs*M^2) real coefficients.
    """
    m, ne = sel.n_positions, sel.n_elems
    rx = np.asarray(rx, dtype=complex)
    a = np.asarray(vectors, dtype=complex)
    d = a.shape[1]
    n_phi = len(sel.pairs) * m * m
    out = np.zeros((d, m * ne + n_phi))
    for n in range(ne):
        block = a[n * m : (n + 1) * m, :]
        out[:, n * m : (n + 1) * m] = (
            float(np.real(rx[n, n])) * np.abs(block.T) ** 2
        )
    for pos, (n, n2) in enumerate(sel.pairs):
        v = rx[n, n2]
        if v == 0.0:
            continue
        left = a[n * m : (n + 1) * m, :].conj()   # (m, D)
        right = a[n2 * m : (n2 + 1) * m, :]       # (m, D)
        base = m * ne + pos * m * m
        for i in range(m):
            cross = 2.0 * np.real(v * left[i][None, :].T * right.T)  # (D, m)
            out[:, base + i * m : base + (i + 1) * m] = cross
    return out


def _glover_rows(prog, sel, b_var, phi_var):
    sys = glover_constraints(sel.n_elems, sel.n_positions, sel.dist, sel.d_min)
    nb = sel.n_elems * sel.n_positions

    def col(j):
        return b_var.offset + j if j < nb else phi_var.offset + (j - nb)

    for row, rhs in zip(sys.g, sys.h):
        nz = np.nonzero(row)[0]
        prog.add_le(LinExpr({col(j): float(row[j]) for j in nz}), float(rhs))
    for row, rhs in zip(sys.a_ge, sys.lo):
        nz = np.nonzero(row)[0]
        prog.add_ge(LinExpr({col(j): float(row[j]) for j in nz}), float(rhs))
    return sys


def build_selection_program(sel: SelectionData, w_vals, r_vals, t, lam,
                            b0, phi0, tau_bin, tau_pair, mode="reduced",
                            tau_cov=None, name="selection-stage"):
    """Relaxed position selection at fixed covariances and durations.

    ``mode="reduced"`` substitutes the exact-at-binary product maps for
    the lifted covariances, leaving only (b, phi) and per-constraint
    auxiliaries.  ``mode="lifted"`` keeps free lifted covariances tied to
    the selection through Schur product blocks with trace penalties
    (weight ``tau_cov``).  Binary recovery is driven by the linearized
    penalties at expansion (b0, phi0) with weights tau_bin / tau_pair.
    """
    w_vals = np.asarray(w_vals, dtype=complex)
    r_vals = np.asarray(r_vals, dtype=complex)
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    b0 = np.asarray(b0, dtype=float).ravel()
    phi0 = np.asarray(phi0, dtype=float).ravel()
    m, ne = sel.n_positions, sel.n_elems
    mn = m * ne
    kk, qq = sel.n_users, sel.n_snapshots
    pairs = sel.pairs
    nb, nphi = mn, len(pairs) * m * m

    prog = ConicProgram(name)
    b = prog.add_vector("b", nb, nonneg=True)
    phi = prog.add_vector("phi", nphi, nonneg=True)
    rho = prog.add_vector("rho", qq, nonneg=True)
    iota = prog.add_vector("iota", kk * qq, nonneg=True)
    for j in range(nb):
        prog.add_le(b.expr(j), 1.0)
    for j in range(nphi):
        prog.add_le(phi.expr(j), 1.0)
    for n in range(ne):
        prog.add_eq(lin_sum([b.expr(n * m + i) for i in range(m)]), 1.0)
    _glover_rows(prog, sel, b, phi)

    fixed_power = sum(
        t[q]
        * (
            sum(float(np.real(np.trace(w_vals[q, k]))) for k in range(kk))
            + float(np.real(np.trace(r_vals[q])))
        )
        for q in range(qq)
    ) / sel.t_total

    b_cols = [b.offset + j for j in range(nb)]
    phi_cols = [phi.offset + j for j in range(nphi)]
    obj = LinExpr({}, fixed_power)
    obj = obj.plus(binary_penalty(b_cols, b0).scaled(tau_bin))
    if nphi:
        obj = obj.plus(binary_penalty(phi_cols, phi0).scaled(tau_pair))

    if mode == "reduced":
        f_maps = [
            [selection_product_map(sel, w_vals[q, k], b.offset, phi.offset)
             for k in range(kk)]
            for q in range(qq)
        ]
        y_maps = [
            selection_product_map(sel, r_vals[q], b.offset, phi.offset)
            for q in range(qq)
        ]
        for q in range(qq):
            for k in range(kk):
                prog.add_psd(f_maps[q][k].embedded(),
                             name=f"lifted-psd[{q}][{k}]")
            prog.add_psd(y_maps[q].embedded(), name=f"lifted-psd-sense[{q}]")
        gain_cols = b_cols + phi_cols

        def gain_matrix(q, vectors):
            rx = r_vals[q] + w_vals[q].sum(axis=0)
            return _selection_gain_map(sel, rx, vectors)

    elif mode == "lifted":
        if tau_cov is None:
            raise ValueError("lifted mode needs the covariance penalty weight")
        f_vars = [[prog.add_hermitian(f"f[{q}][{k}]", mn) for k in range(kk)]
                  for q in range(qq)]
        y_vars = [prog.add_hermitian(f"y[{q}]", mn) for q in range(qq)]
        s_vars = [[prog.add_hermitian(f"s[{q}][{k}]", mn, psd=False)
                   for k in range(kk)] for q in range(qq)]
        u_vars = [prog.add_hermitian(f"u[{q}]", mn, psd=False)
                  for q in range(qq)]
        t_glob = prog.add_hermitian("t-link", mn, psd=False)
        v_glob = prog.add_hermitian("v-link", mn, psd=False)
        b_offsets = [[b.offset + n * m + i for i in range(m)]
                     for n in range(ne)]
        for q in range(qq):
            for k in range(kk):
                prog.add_psd(
                    schur_product_lmi(s_vars[q][k], f_vars[q][k], t_glob,
                                      b_offsets, w_vals[q, k], m, ne),
                    name=f"product-link[{q}][{k}]",
                )
                obj = obj.plus(s_vars[q][k].trace().scaled(tau_cov))
                obj = obj.plus(
                    gram_trace_tangent(
                        w_vals[q, k], _b0_matrix(b0, m, ne), b_offsets, m, ne,
                    ).scaled(-tau_cov)
                )
            prog.add_psd(
                schur_product_lmi(u_vars[q], y_vars[q], v_glob, b_offsets,
                                  r_vals[q], m, ne),
                name=f"product-link-sense[{q}]",
            )
            obj = obj.plus(u_vars[q].trace().scaled(tau_cov))
            obj = obj.plus(
                gram_trace_tangent(
                    r_vals[q], _b0_matrix(b0, m, ne), b_offsets, m, ne,
                ).scaled(-tau_cov)
            )
        f_maps = [[CMatAffine.from_vars(mn, [(f_vars[q][k], 1.0)])
                   for k in range(kk)] for q in range(qq)]
        y_maps = [CMatAffine.from_vars(mn, [(y_vars[q], 1.0)])
                  for q in range(qq)]
        mn2 = mn * mn

        def gain_matrix(q, vectors):
            vecs = np.asarray(vectors, dtype=complex).T
            blocks = [f_vars[q][k].quad_rows(vecs) for k in range(kk)]
            blocks.append(y_vars[q].quad_rows(vecs))
            return np.concatenate(blocks, axis=1)

        gain_cols = None  # per-snapshot, set below
    else:
        raise ValueError(f"unknown mode {mode!r}")

    prog.minimize(obj)

    for q in range(qq):
        for k in range(kk):
            g = cmat_combine(
                mn,
                [(f_maps[q][k], 1.0)]
                + [(f_maps[q][i], -lam[k, q]) for i in range(kk) if i != k]
                + [(y_maps[q], -lam[k, q])],
            )
            u = sel.h_rows[k].conj()
            if sel.mu[k] == 0.0:
                prog.add_ge(
                    _nominal_sinr_row(g, u, sel.noise[k], lam_fixed=lam[k, q]),
                    0.0, name=f"sinr[{k}][{q}]",
                )
            else:
                prog.add_psd(
                    bordered_robust_lmi(
                        g, u, sel.mu[k], sel.noise[k],
                        iota.offset + k * qq + q, lam_fixed=lam[k, q],
                    ),
                    name=f"robust-sinr[{k}][{q}]",
                )

        if mode == "lifted":
            gain_cols = (
                [f_vars[q][k].offset + j for k in range(kk) for j in range(mn2)]
                + [y_vars[q].offset + j for j in range(mn2)]
            )
        gmap = gain_matrix(q, sel.cells)
        _pattern_soc(prog, sel, q, rho.offset + q, gain_cols, gmap)

        bore_row = gain_matrix(q, sel.bores[:, q : q + 1])[0]
        bore_gain = LinExpr(
            {gain_cols[j]: bore_row[j] for j in range(len(gain_cols))
             if bore_row[j] != 0.0}
        )
        floor = sel.gain_floor(q, t[q]) * (1.0 + STRICT_FLOOR_MARGIN)
        prog.add_ge(bore_gain, floor, name=f"gain-floor[{q}]")

    handles = {"b": b, "phi": phi, "rho": rho, "iota": iota,
               "fixed_power": fixed_power}
    return prog, handles


def _b0_matrix(b0, m, ne):
    out = np.zeros((m * ne, ne))
    for n in range(ne):
        out[n * m : (n + 1) * m, n] = b0[n * m : (n + 1) * m]
    return out


def consistent_pair_values(b0, m, pairs) -> np.ndarray:
    """Pair-product expansion values phi = b_n[i] * b_n'[j] from b."""
    b0 = np.asarray(b0, dtype=float).ravel()
    out = np.empty(len(pairs) * m * m)
    for pos, (n, n2) in enumerate(pairs):
        left = b0[n * m : (n + 1) * m]
        right = b0[n2 * m : (n2 + 1) * m]
        out[pos * m * m : (pos + 1) * m * m] = np.outer(left, right).ravel()
    return out
