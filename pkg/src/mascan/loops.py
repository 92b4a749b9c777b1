"""Block-coordinate and alternating loops over the three solve stages."""

from dataclasses import dataclass

import numpy as np

from .conic import DEFAULT_TOL, STATUS_OPTIMAL
from .decisions import SnapshotDecision
from .subproblems import (
    SelectionData,
    StageData,
    build_selection_program,
    consistent_pair_values,
    solve_covariance_stage,
    solve_duration_stage,
)

BCD_REL_TOL = 1e-4
BCD_MAX_ITERS = 30
OUTER_REL_TOL = 1e-3
OUTER_MAX_ITERS = 15
SCA_MAX_ROUNDS = 20
SCA_GAP_TOL = 1e-5
SCA_OBJ_TOL = 1e-4
SCA_SIZE_CAP = 24
SCORE_BUDGET = 40
IMPROVE_EPS = 1e-9
IMPROVE_REL = 1e-6


def _improves(candidate: float, incumbent: float) -> bool:
    """Accept a move only when it beats solver-precision noise."""
    margin = max(IMPROVE_EPS, IMPROVE_REL * abs(incumbent))
    return candidate < incumbent - margin


@dataclass(frozen=True)
class ProblemData:
    """Full placement-domain problem description.

    Channel rows, scan directions, and boresights are given per
    (element, position) pair with element blocks stacked row-major, so a
    one-hot placement matrix maps them into the active-element domain.
    """

    dist: np.ndarray
    d_min: float
    n_elems: int
    h_rows: np.ndarray
    mu: np.ndarray
    noise: np.ndarray
    cells: np.ndarray
    bores: np.ndarray
    masks: np.ndarray
    omega_av: np.ndarray
    p_max: float
    rate_min: np.ndarray
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
    def n_positions(self) -> int:
        return self.dist.shape[0]

    @property
    def n_users(self) -> int:
        return self.h_rows.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.bores.shape[1]

    def stage_data(self, bmat) -> StageData:
        bmat = np.asarray(bmat, dtype=float)
        return StageData(
            bmat=bmat,
            h_eff=self.h_rows @ bmat,
            mu=self.mu,
            noise=self.noise,
            cells=bmat.T @ self.cells,
            bores=bmat.T @ self.bores,
            masks=self.masks,
            omega_av=self.omega_av,
            p_max=self.p_max,
            rate_min=self.rate_min,
            t_total=self.t_total,
            t_min=self.t_min,
            t_max=self.t_max,
            nu=self.nu,
            gamma_th=self.gamma_th,
            psi=self.psi,
            sense_noise=self.sense_noise,
            ref_gain=self.ref_gain,
            delta_d=self.delta_d,
        )

    def selection_data(self) -> SelectionData:
        return SelectionData(
            dist=self.dist,
            d_min=self.d_min,
            n_elems=self.n_elems,
            h_rows=self.h_rows,
            mu=self.mu,
            noise=self.noise,
            cells=self.cells,
            bores=self.bores,
            masks=self.masks,
            omega_av=self.omega_av,
            rate_min=self.rate_min,
            t_total=self.t_total,
            nu=self.nu,
            gamma_th=self.gamma_th,
            psi=self.psi,
            sense_noise=self.sense_noise,
            ref_gain=self.ref_gain,
            delta_d=self.delta_d,
        )


def placement_matrix(positions, m, n_elems) -> np.ndarray:
    positions = [int(p) for p in positions]
    if len(positions) != n_elems:
        raise ValueError("one position per element required")
    out = np.zeros((m * n_elems, n_elems))
    for n, pos in enumerate(positions):
        if not 0 <= pos < m:
            raise ValueError(f"position {pos} outside the grid")
        out[n * m + pos, n] = 1.0
    return out


def selection_positions(bmat, m) -> list[int]:
    bmat = np.asarray(bmat)
    out = []
    for n in range(bmat.shape[1]):
        idx = int(np.argmax(bmat[:, n]))
        pos = idx - n * m
        if not 0 <= pos < m:
            raise ValueError("placement matrix is not block one-hot")
        out.append(pos)
    return out


def placement_feasible(positions, dist, d_min) -> bool:
    for a in range(len(positions)):
        for b in range(a + 1, len(positions)):
            if dist[positions[a], positions[b]] < d_min:
                return False
    return True


def spread_placement(dist, d_min, n_elems) -> list[int]:
    """Greedy farthest-point seed placement honoring the spacing floor."""
    m = dist.shape[0]
    chosen = [0]
    while len(chosen) < n_elems:
        best, best_score = None, -1.0
        for cand in range(m):
            if cand in chosen:
                continue
            gap = min(dist[cand, c] for c in chosen)
            if gap >= d_min and gap > best_score:
                best, best_score = cand, gap
        if best is None:
            raise ValueError("grid cannot host that many spaced elements")
        chosen.append(best)
    return chosen


@dataclass(frozen=True)
class BcdResult:
    status: str
    objective: float
    decisions: tuple[SnapshotDecision, ...] | None
    trace: tuple[float, ...]
    n_iters: int
    converged: bool

    @property
    def ok(self) -> bool:
        return self.decisions is not None


def initial_schedule(stage: StageData):
    """Even dwell split and the matching rate-driven floor targets."""
    qq, kk = stage.n_snapshots, stage.n_users
    t0 = float(np.clip(stage.t_total / qq, stage.t_min, stage.t_max))
    t = np.full(qq, t0)
    xi0 = stage.rate_min * stage.t_total / t.sum()
    lam = np.tile((2.0**xi0 - 1.0)[:, None], (1, qq))
    return t, lam


def bcd_loop(stage: StageData, t0=None, lam0=None, rel_tol=BCD_REL_TOL,
             max_iters=BCD_MAX_ITERS, solver_tol=DEFAULT_TOL) -> BcdResult:
    """Alternate covariance and duration stages until the power settles.

    Each stage keeps the other block's last iterate feasible, so the
    recorded objective trace never increases.
    """
    if t0 is None or lam0 is None:
        t_cur, lam_cur = initial_schedule(stage)
    else:
        t_cur = np.asarray(t0, dtype=float).copy()
        lam_cur = np.asarray(lam0, dtype=float).copy()

    trace: list[float] = []
    w = r = rho = xi_cur = iota_cur = None
    prev_obj = None
    converged = False
    status = STATUS_OPTIMAL
    n_iters = 0

    for n_iters in range(1, max_iters + 1):
        sol1, parts1 = solve_covariance_stage(stage, t_cur, lam_cur,
                                              tol=solver_tol)
        if parts1 is None:
            if w is None:
                return BcdResult(sol1.status, float("inf"), None, (), 0, False)
            status = sol1.status
            break
        trace.append(float(sol1.objective))
        w, r, rho = parts1["w"], parts1["r"], parts1["rho"]
        xi_cur, iota_cur = parts1["xi"], parts1["iota"]
        if prev_obj is not None:
            if prev_obj - sol1.objective <= rel_tol * max(1.0, abs(prev_obj)):
                converged = True
                break
        sol2, parts2, _ = solve_duration_stage(stage, w, r, t_cur, xi_cur,
                                               tol=solver_tol)
        if parts2 is None:
            converged = True  # durations cannot move; treat as settled
            break
        trace.append(float(sol2.objective))
        t_cur = parts2["t"]
        lam_cur = parts2["lam"]
        xi_cur = parts2["xi"]
        iota_cur = parts2["iota"]
        prev_obj = float(sol2.objective)

    decisions = tuple(
        SnapshotDecision(
            w=tuple(w[q, k] for k in range(stage.n_users)),
            r=r[q],
            t=float(t_cur[q]),
            rho0=float(rho[q]),
            xi=xi_cur[:, q].copy(),
            lam=lam_cur[:, q].copy(),
            iota=iota_cur[:, q].copy(),
        )
        for q in range(stage.n_snapshots)
    )
    return BcdResult(status, trace[-1], decisions, tuple(trace),
                     n_iters, converged)


def schedule_of(result: BcdResult):
    t = np.array([d.t for d in result.decisions])
    lam = np.stack([d.lam for d in result.decisions], axis=1)
    return t, lam


def score_selection(data: ProblemData, bmat, t, lam,
                    solver_tol=DEFAULT_TOL) -> float | None:
    """Average power of the covariance stage at a fixed schedule, or None
    when the placement cannot meet the constraints."""
    sol, parts = solve_covariance_stage(data.stage_data(bmat), t, lam,
                                        tol=solver_tol)
    if parts is None:
        return None
    return float(sol.objective)


@dataclass(frozen=True)
class PositionResult:
    bmat: np.ndarray
    objective: float
    moved: bool
    n_solves: int
    sca_used: bool


def sca_selection_step(data: ProblemData, bmat, w_vals, r_vals, t, lam,
                       max_rounds=SCA_MAX_ROUNDS, tau0=None,
                       solver_tol=DEFAULT_TOL):
    """Penalized continuous placement refinement; returns a candidate
    placement matrix or None when no clean rounding emerges."""
    sel = data.selection_data()
    m, ne = data.n_positions, data.n_elems
    b0 = _flatten(bmat)
    phi0 = consistent_pair_values(b0, m, sel.pairs)
    tau = 10.0 * data.p_max if tau0 is None else float(tau0)
    prev_obj = None
    b_sol, phi_sol = b0, phi0
    for _ in range(max_rounds):
        prog, handles = build_selection_program(
            sel, w_vals, r_vals, t, lam, b_sol, phi_sol,
            tau_bin=tau, tau_pair=tau,
        )
        sol = prog.solve(tol=solver_tol, max_iters=200)
        if sol.status != STATUS_OPTIMAL:
            return None
        b_new = sol.primal["b"]
        phi_new = sol.primal["phi"]
        gap = float(np.sum(b_new - b_new**2) + np.sum(phi_new - phi_new**2))
        stalled = (
            prev_obj is not None
            and abs(prev_obj - sol.objective)
            <= SCA_OBJ_TOL * max(1.0, abs(prev_obj))
        )
        b_sol, phi_sol = b_new, phi_new
        prev_obj = float(sol.objective)
        if gap <= SCA_GAP_TOL:
            break
        if stalled:
            tau *= 5.0
            if tau > 1e8:
                return None
    positions = []
    for n in range(ne):
        positions.append(int(np.argmax(b_sol[n * m : (n + 1) * m])))
    if not placement_feasible(positions, data.dist, data.d_min):
        return None
    return placement_matrix(positions, m, ne)


def _flatten(bmat) -> np.ndarray:
    bmat = np.asarray(bmat, dtype=float)
    mn, ne = bmat.shape
    m = mn // ne
    out = np.zeros(mn)
    for n in range(ne):
        out[n * m : (n + 1) * m] = bmat[n * m : (n + 1) * m, n]
    return out


def local_search_positions(data: ProblemData, bmat, t, lam, base_score, rng,
                           budget=SCORE_BUDGET, solver_tol=DEFAULT_TOL):
    """First-improvement single-element moves scored by the covariance
    stage; only strictly better placements are accepted."""
    m = data.n_positions
    positions = selection_positions(bmat, m)
    score = float(base_score)
    n_solves = 0
    moved = False
    for n in rng.permutation(data.n_elems):
        for cand in rng.permutation(m):
            cand = int(cand)
            if cand == positions[n]:
                continue
            trial = list(positions)
            trial[int(n)] = cand
            if not placement_feasible(trial, data.dist, data.d_min):
                continue
            if n_solves >= budget:
                return positions, score, n_solves, moved
            got = score_selection(
                data, placement_matrix(trial, m, data.n_elems), t, lam,
                solver_tol=solver_tol,
            )
            n_solves += 1
            if got is not None and _improves(got, score):
                positions, score, moved = trial, got, True
                break
    return positions, score, n_solves, moved


def position_step(data: ProblemData, bmat, result: BcdResult, rng,
                  sca_cap=SCA_SIZE_CAP, budget=SCORE_BUDGET,
                  solver_tol=DEFAULT_TOL) -> PositionResult:
    """One placement update: optional continuous refinement on small
    grids, then a budgeted local search.  Never accepts a placement that
    scores worse than the current one."""
    t, lam = schedule_of(result)
    base = float(result.objective)
    n_solves = 0
    sca_used = False
    best_b = np.asarray(bmat, dtype=float)
    best_score = base
    moved = False

    if data.n_positions * data.n_elems <= sca_cap:
        w_vals = np.array([[d.w[k] for k in range(data.n_users)]
                           for d in result.decisions])
        r_vals = np.array([d.r for d in result.decisions])
        cand = sca_selection_step(data, best_b, w_vals, r_vals, t, lam,
                                  solver_tol=solver_tol)
        sca_used = cand is not None
        if cand is not None and not np.array_equal(cand, best_b):
            got = score_selection(data, cand, t, lam, solver_tol=solver_tol)
            n_solves += 1
            if got is not None and _improves(got, best_score):
                best_b, best_score, moved = cand, got, True

    positions, score, used, ls_moved = local_search_positions(
        data, best_b, t, lam, best_score, rng,
        budget=max(0, budget - n_solves), solver_tol=solver_tol,
    )
    n_solves += used
    if ls_moved:
        best_b = placement_matrix(positions, data.n_positions, data.n_elems)
        best_score = score
        moved = True
    return PositionResult(best_b, best_score, moved, n_solves, sca_used)


@dataclass(frozen=True)
class AoResult:
    status: str
    bmat: np.ndarray
    positions: list[int]
    result: BcdResult
    trace: tuple[float, ...]
    n_outer: int
    converged: bool
    n_score_solves: int

    @property
    def ok(self) -> bool:
        return self.result.ok


def ao_loop(data: ProblemData, bmat0=None, rng=None,
            rel_tol=OUTER_REL_TOL, max_outer=OUTER_MAX_ITERS,
            bcd_rel_tol=BCD_REL_TOL, bcd_max_iters=BCD_MAX_ITERS,
            sca_cap=SCA_SIZE_CAP, budget=SCORE_BUDGET,
            solver_tol=DEFAULT_TOL) -> AoResult:
    """Alternate placement updates with schedule/covariance descent.

    The placement step only accepts strictly better scores and every
    outer round re-solves the inner loop at the current placement, so the
    outer objective trace is non-increasing.
    """
    if rng is None or not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    m = data.n_positions
    if bmat0 is None:
        bmat = placement_matrix(
            spread_placement(data.dist, data.d_min, data.n_elems),
            m, data.n_elems,
        )
    else:
        bmat = np.asarray(bmat0, dtype=float)
        if not placement_feasible(selection_positions(bmat, m),
                                  data.dist, data.d_min):
            raise ValueError("starting placement violates element spacing")

    res = bcd_loop(data.stage_data(bmat), rel_tol=bcd_rel_tol,
                   max_iters=bcd_max_iters, solver_tol=solver_tol)
    if not res.ok:
        return AoResult(res.status, bmat, selection_positions(bmat, m),
                        res, (), 0, False, 0)
    trace = [res.objective]
    converged = False
    n_outer = 0
    n_score = 0

    for n_outer in range(1, max_outer + 1):
        pos = position_step(data, bmat, res, rng, sca_cap=sca_cap,
                            budget=budget, solver_tol=solver_tol)
        n_score += pos.n_solves
        if not pos.moved:
            # The incumbent placement survived a full sweep; its inner
            # solution is still current, so re-solving would only add
            # solver jitter to the trace.
            converged = True
            break
        bmat = pos.bmat
        t_warm, lam_warm = schedule_of(res)
        nxt = bcd_loop(data.stage_data(bmat), t0=t_warm, lam0=lam_warm,
                       rel_tol=bcd_rel_tol, max_iters=bcd_max_iters,
                       solver_tol=solver_tol)
        if not nxt.ok:
            break  # keep the last consistent iterate
        drop = res.objective - nxt.objective
        res = nxt
        trace.append(res.objective)
        if drop <= rel_tol * max(1.0, abs(trace[-2])):
            converged = True
            break

    return AoResult(res.status, bmat, selection_positions(bmat, m), res,
                    tuple(trace), n_outer, converged, n_score)
