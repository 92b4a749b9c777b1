"""Parameter sweeps over schemes, with per-run validation records."""

import csv
import io
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import (
    antenna_selection_baseline,
    fixed_placement_baseline,
    per_snapshot_bound,
    random_placement_baseline,
)
from .grid import PositionGrid, distance_matrix
from .channel import build_channel_table, sample_user_paths
from .loops import ProblemData, ao_loop
from .scenario import (
    Scenario,
    ScenarioConfig,
    config_hash,
    sample_scenario,
)
from .sensing import build_scan_plan, build_steering_table
from .verify import verify_solution

SCHEMES = ("proposed", "fixed", "random", "selection", "bound")


@dataclass
class SweepSpec:
    axis: str
    values: tuple
    schemes: tuple[str, ...] = ("proposed",)
    seeds: tuple[int, ...] = (0,)
    config: ScenarioConfig = field(default_factory=ScenarioConfig)


def selection_candidate_problem(config: ScenarioConfig,
                                seed: int) -> ProblemData:
    """The subset-selection candidate set: a fixed two-row half-wavelength
    array with twice as many positions as elements, fed by the same drawn
    user geometry as the movable-array scenario."""
    step = config.wavelength / 2.0
    nn = config.n_elems
    xy = np.array([[i * step, j * step] for j in range(2) for i in range(nn)])
    grid = PositionGrid(step=step, mx=nn, my=2, xy=xy)
    plan = build_scan_plan(
        config.sector_width_deg, config.n_snapshots, config.t_total,
        config.t_min, config.t_max, n_el=config.n_el, n_az=config.n_az,
    )
    table = build_steering_table(grid, nn, plan, config.wavelength)

    root = np.random.SeedSequence(seed)
    path_sets = []
    for child in root.spawn(config.n_users):
        rng = np.random.default_rng(child)
        distance = rng.uniform(*config.user_range)
        theta = float(np.arcsin(2.0 * rng.uniform() - 1.0))
        phi = float(rng.uniform(-np.pi / 2, np.pi / 2))
        path_sets.append(
            sample_user_paths(rng, distance, theta, phi, config.n_paths,
                              config.kappa, config.alpha, config.ref_gain)
        )
    h_rows = build_channel_table(grid, path_sets, nn, config.wavelength)
    masks = np.stack([plan.mask(q) for q in range(config.n_snapshots)])
    return ProblemData(
        dist=distance_matrix(grid),
        d_min=config.d_min,
        n_elems=nn,
        h_rows=h_rows,
        mu=np.full(config.n_users, config.mu),
        noise=np.full(config.n_users, config.noise_power),
        cells=table.cells,
        bores=table.boresights,
        masks=masks,
        omega_av=np.asarray(config.omega_av, dtype=float),
        p_max=config.p_max,
        rate_min=np.full(config.n_users, config.rate_min),
        t_total=config.t_total,
        t_min=config.t_min,
        t_max=config.t_max,
        nu=config.nu,
        gamma_th=config.gamma_th,
        psi=config.psi,
        sense_noise=config.sense_noise,
        ref_gain=config.ref_gain,
        delta_d=config.delta_d,
    )


def _verified_fields(scenario: Scenario, bmat, result) -> dict:
    stage = scenario.data.stage_data(bmat)
    report = verify_solution(stage, result.decisions)
    return {
        "feasible": report.ok,
        "first_violation": report.first_violation,
        "avg_power": report.avg_power,
        "certified_rates": list(report.certified_rates),
        "rank_ratio_min": float(report.rank_ratios.min()),
    }


def run_scheme(scheme: str, scenario: Scenario, seed: int) -> dict:
    """Execute one scheme on one instance; returns a flat record."""
    start = time.perf_counter()
    record = {
        "scheme": scheme,
        "seed": seed,
        "config_hash": config_hash(scenario.config),
        "status": "ok",
    }
    data = scenario.data
    if scheme == "proposed":
        out = ao_loop(data, rng=seed)
        if not out.ok:
            record["status"] = "infeasible"
        else:
            record["objective"] = out.result.objective
            record["positions"] = out.positions
            record["trace"] = list(out.trace)
            record["n_outer"] = out.n_outer
            record.update(_verified_fields(scenario, out.bmat, out.result))
    elif scheme == "fixed":
        from .scenario import regular_subarray_positions

        pos = regular_subarray_positions(
            scenario.grid, data.n_elems, scenario.config.wavelength / 2.0
        )
        out = fixed_placement_baseline(data, pos)
        record["status"] = "ok" if out.ok else "infeasible"
        if out.ok:
            record["objective"] = out.objective
            record["positions"] = out.positions
    elif scheme == "random":
        out = random_placement_baseline(data, rng=seed)
        record["status"] = "ok" if out.ok else "infeasible"
        if out.ok:
            record["objective"] = out.objective
            record["positions"] = out.positions
    elif scheme == "selection":
        cand = selection_candidate_problem(scenario.config, seed)
        out = antenna_selection_baseline(cand, rng=seed)
        record["status"] = "ok" if out.ok else "infeasible"
        if out.ok:
            record["objective"] = out.objective
            record["positions"] = out.positions
        record["n_evaluated"] = out.n_evaluated
    elif scheme == "bound":
        out = ao_loop(data, rng=seed)
        if not out.ok:
            record["status"] = "infeasible"
        else:
            bound, placements = per_snapshot_bound(
                data, out.result, out.bmat, rng=seed
            )
            record["objective"] = bound
            record["reference_objective"] = out.result.objective
            record["positions"] = [list(p) for p in placements]
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    record["wall_time"] = time.perf_counter() - start
    return record


def _point_records(spec: SweepSpec, value, seed) -> list[dict]:
    """All scheme records for one (axis value, seed) sweep point."""
    config = replace(spec.config, **{spec.axis: value})
    try:
        scenario = sample_scenario(config, seed)
        failure = None
    except Exception as exc:
        scenario, failure = None, f"{type(exc).__name__}: {exc}"
    records = []
    for scheme in spec.schemes:
        if failure is not None:
            record = {
                "scheme": scheme,
                "seed": seed,
                "status": "error",
                "error": failure,
            }
        else:
            try:
                record = run_scheme(scheme, scenario, seed)
            except Exception as exc:  # keep sweeping, keep the trace
                record = {
                    "scheme": scheme,
                    "seed": seed,
                    "config_hash": config_hash(config),
                    "status": "error",
                    "error": f"{type(exc).__name__}: {exc}",
                }
        record["axis"] = spec.axis
        record["value"] = value
        records.append(record)
    return records


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[dict]:
    """Run every sweep point; record order is (value, seed, scheme) as
    listed in the spec regardless of the worker count."""
    points = [(value, seed) for value in spec.values for seed in spec.seeds]
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(
                pool.map(lambda p: _point_records(spec, *p), points)
            )
    else:
        chunks = [_point_records(spec, value, seed)
                  for value, seed in points]
    return [record for chunk in chunks for record in chunk]


def summarize(records) -> list[dict]:
    """Mean objective per (axis value, scheme), with failure counts."""
    groups: dict[tuple, list] = {}
    for rec in records:
        key = (rec.get("value"), rec["scheme"])
        groups.setdefault(key, []).append(rec)
    rows = []
    for (value, scheme), recs in sorted(
        groups.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])
    ):
        objs = [r["objective"] for r in recs
                if r["status"] == "ok" and "objective" in r]
        rows.append({
            "value": value,
            "scheme": scheme,
            "n_ok": len(objs),
            "n_fail": len(recs) - len(objs),
            "mean_objective": float(np.mean(objs)) if objs else None,
        })
    return rows


def summary_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf, fieldnames=["value", "scheme", "n_ok", "n_fail",
                         "mean_objective"]
    )
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()
