"""Comparison schemes and bounds for the placement-and-schedule problem."""

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .conic import DEFAULT_TOL
from .loops import (
    BcdResult,
    ProblemData,
    bcd_loop,
    initial_schedule,
    local_search_positions,
    placement_feasible,
    placement_matrix,
    schedule_of,
    score_selection,
    selection_positions,
)

MAX_ENUMERATED = 10_000
SCREEN_CAP = 256
SCREEN_KEEP = 8


@dataclass(frozen=True)
class BaselineResult:
    name: str
    positions: list[int] | None
    result: BcdResult | None
    objective: float
    n_evaluated: int

    @property
    def ok(self) -> bool:
        return self.result is not None and self.result.ok


def _feasible_combos(data: ProblemData):
    for combo in itertools.combinations(range(data.n_positions),
                                        data.n_elems):
        if placement_feasible(list(combo), data.dist, data.d_min):
            yield list(combo)


def fixed_placement_baseline(data: ProblemData, positions,
                             solver_tol=DEFAULT_TOL, **bcd_kwargs):
    """Inner descent at one frozen placement; no position search at all."""
    positions = [int(p) for p in positions]
    if not placement_feasible(positions, data.dist, data.d_min):
        raise ValueError("fixed placement violates element spacing")
    bmat = placement_matrix(positions, data.n_positions, data.n_elems)
    res = bcd_loop(data.stage_data(bmat), solver_tol=solver_tol,
                   **bcd_kwargs)
    obj = res.objective if res.ok else float("inf")
    return BaselineResult("fixed-placement", positions,
                          res if res.ok else None, obj, 1)


def random_placement_baseline(data: ProblemData, rng, tries=10_000,
                              solver_tol=DEFAULT_TOL, **bcd_kwargs):
    """One uniformly drawn spacing-feasible placement, then descent."""
    rng = rng if isinstance(rng, np.random.Generator) else (
        np.random.default_rng(rng)
    )
    for _ in range(tries):
        cand = sorted(
            rng.choice(data.n_positions, size=data.n_elems, replace=False)
        )
        cand = [int(c) for c in cand]
        if placement_feasible(cand, data.dist, data.d_min):
            out = fixed_placement_baseline(data, cand,
                                           solver_tol=solver_tol,
                                           **bcd_kwargs)
            return replace(out, name="random-placement")
    raise ValueError("no spacing-feasible placement found")


def antenna_selection_baseline(data: ProblemData, rng=None,
                               max_combos=SCREEN_CAP,
                               screen_keep=SCREEN_KEEP,
                               solver_tol=DEFAULT_TOL, **bcd_kwargs):
    """Exhaustive subset selection on a small fixed candidate set.

    All spacing-feasible element subsets are screened with one covariance
    solve at the starting schedule; the best few get the full descent.
    """
    combos = list(_feasible_combos(data))
    if not combos:
        raise ValueError("no spacing-feasible placement exists")
    if len(combos) > max_combos:
        rng = rng if isinstance(rng, np.random.Generator) else (
            np.random.default_rng(rng)
        )
        picks = rng.choice(len(combos), size=max_combos, replace=False)
        combos = [combos[int(i)] for i in picks]

    t0, lam0 = initial_schedule(
        data.stage_data(placement_matrix(combos[0], data.n_positions,
                                         data.n_elems))
    )
    scored = []
    for combo in combos:
        bmat = placement_matrix(combo, data.n_positions, data.n_elems)
        got = score_selection(data, bmat, t0, lam0, solver_tol=solver_tol)
        if got is not None:
            scored.append((got, combo))
    scored.sort(key=lambda item: item[0])

    best = None
    best_obj = float("inf")
    best_pos = None
    for _, combo in scored[:screen_keep]:
        bmat = placement_matrix(combo, data.n_positions, data.n_elems)
        res = bcd_loop(data.stage_data(bmat), solver_tol=solver_tol,
                       **bcd_kwargs)
        if res.ok and res.objective < best_obj:
            best, best_obj, best_pos = res, res.objective, combo
    return BaselineResult("antenna-selection", best_pos, best, best_obj,
                          len(combos))


def brute_force_positions(data: ProblemData, max_combos=MAX_ENUMERATED,
                          solver_tol=DEFAULT_TOL, **bcd_kwargs):
    """Full descent at every spacing-feasible placement; the reference
    optimum for small grids."""
    combos = list(_feasible_combos(data))
    if len(combos) > max_combos:
        raise ValueError(
            f"{len(combos)} placements exceed the enumeration cap"
        )
    best = None
    best_obj = float("inf")
    best_pos = None
    for combo in combos:
        bmat = placement_matrix(combo, data.n_positions, data.n_elems)
        res = bcd_loop(data.stage_data(bmat), solver_tol=solver_tol,
                       **bcd_kwargs)
        if res.ok and res.objective < best_obj:
            best, best_obj, best_pos = res, res.objective, combo
    return BaselineResult("brute-force", best_pos, best, best_obj,
                          len(combos))


def per_snapshot_bound(data: ProblemData, result: BcdResult, bmat,
                       rng=None, budget=20, solver_tol=DEFAULT_TOL):
    """Optimistic power bound that frees the placement per snapshot.

    Keeping the solved schedule and floors, each snapshot re-optimizes
    its own placement and covariances independently.  The solved
    placement stays admissible in every subproblem, so the recombined
    average can only come out at or below the reported objective.
    """
    rng = rng if isinstance(rng, np.random.Generator) else (
        np.random.default_rng(rng)
    )
    t, lam = schedule_of(result)
    xi_hat = np.stack([d.xi for d in result.decisions], axis=1)
    total = 0.0
    placements = []
    for q in range(data.n_snapshots):
        sliced = replace(
            data,
            bores=data.bores[:, q : q + 1],
            masks=data.masks[q : q + 1],
            omega_av=data.omega_av[q : q + 1],
            rate_min=float(t[q]) * xi_hat[:, q] / data.t_total,
        )
        t_q = np.array([t[q]])
        lam_q = lam[:, q : q + 1]
        base = score_selection(sliced, bmat, t_q, lam_q,
                               solver_tol=solver_tol)
        if base is None:
            raise ValueError("solved placement fails its own snapshot")
        positions, score, _, _ = local_search_positions(
            sliced, bmat, t_q, lam_q, base, rng, budget=budget,
            solver_tol=solver_tol,
        )
        placements.append(positions)
        # The sliced stage objective is already this snapshot's share of
        # the period average (duration-weighted over the full period).
        total += score
    return total, placements
