"""Command line front end: solve, sweep, baseline, verify, oracle."""

import argparse
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get("MASCAN_OUT_DIR", "runs"))


def _config_overrides(path) -> dict:
    """Key-value lines (``name = value``) mirroring scenario field names."""
    import ast

    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise SystemExit(f"bad config line (want key = value): {raw!r}")
        value = value.strip()
        try:
            out[key.strip()] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            out[key.strip()] = value
    return out


def _profile(args):
    from .scenario import PROFILES

    if args.profile not in PROFILES:
        raise SystemExit(f"unknown profile {args.profile!r}")
    overrides = (
        _config_overrides(args.config)
        if getattr(args, "config", None) else {}
    )
    try:
        return PROFILES[args.profile](**overrides)
    except TypeError as exc:
        raise SystemExit(f"bad config override: {exc}") from exc


def _print_table(rows, columns) -> None:
    print("\t".join(columns))
    for row in rows:
        print("\t".join(str(row.get(c, "")) for c in columns))


def _split_tokens(tokens, cast):
    """Flatten space- or comma-separated option tokens."""
    return tuple(cast(piece)
                 for token in tokens
                 for piece in str(token).split(",") if piece)


def cmd_solve(args) -> int:
    from .loops import ao_loop
    from .plots import save_figure, trace_figure
    from .records import append_record
    from .scenario import sample_scenario
    from .sweep import _verified_fields

    config = _profile(args)
    scenario = sample_scenario(config, args.seed)
    out = ao_loop(scenario.data, rng=args.seed)
    if not out.ok:
        print(f"infeasible\t{out.status}")
        return EXIT_INFEASIBLE
    fields = _verified_fields(scenario, out.bmat, out.result)
    rows = [{
        "instance": scenario.tag,
        "objective": f"{out.result.objective:.6g}",
        "positions": ",".join(map(str, out.positions)),
        "outer_rounds": out.n_outer,
        "converged": out.converged,
        "feasible": fields["feasible"],
        "first_violation": fields["first_violation"] or "-",
    }]
    _print_table(rows, ["instance", "objective", "positions",
                        "outer_rounds", "converged", "feasible",
                        "first_violation"])
    out_dir = _out_dir(args)
    append_record(out_dir / "solve.jsonl", {
        "kind": "solve", "seed": args.seed, "profile": args.profile,
        "objective": out.result.objective, "positions": out.positions,
        "trace": list(out.trace), **fields,
    })
    fig_path = save_figure(
        trace_figure(out.trace, title=f"instance {scenario.tag}"),
        out_dir / f"trace-{scenario.tag}.png",
    )
    print(f"# trace figure: {fig_path}")
    print(f"# records: {out_dir / 'solve.jsonl'}")
    return EXIT_OK if fields["feasible"] else EXIT_INFEASIBLE


def cmd_sweep(args) -> int:
    from .plots import save_figure, sweep_figure
    from .records import write_records
    from .sweep import SweepSpec, run_sweep, summarize, summary_csv

    config = _profile(args)
    spec = SweepSpec(
        axis=args.axis,
        values=_split_tokens(args.values, float),
        schemes=_split_tokens(args.schemes, str),
        seeds=_split_tokens(args.seeds, int),
        config=config,
    )
    records = run_sweep(spec, workers=max(1, args.workers))
    rows = summarize(records)
    out_dir = _out_dir(args)
    write_records(out_dir / f"sweep-{args.axis}.jsonl", records)
    csv_path = out_dir / f"sweep-{args.axis}.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(summary_csv(rows))
    fig_path = save_figure(
        sweep_figure(rows, axis_label=args.axis),
        out_dir / f"sweep-{args.axis}.png",
    )
    _print_table(rows, ["value", "scheme", "n_ok", "n_fail",
                        "mean_objective"])
    print(f"# summary: {csv_path}")
    print(f"# figure: {fig_path}")
    n_err = sum(1 for r in records if r["status"] == "error")
    return EXIT_ERROR if n_err else EXIT_OK


def cmd_baseline(args) -> int:
    from .records import append_record
    from .scenario import sample_scenario
    from .sweep import run_scheme

    config = _profile(args)
    scenario = sample_scenario(config, args.seed)
    record = run_scheme(args.scheme, scenario, args.seed)
    columns = ["scheme", "status", "objective", "positions"]
    _print_table([{
        "scheme": record["scheme"],
        "status": record["status"],
        "objective": record.get("objective", "-"),
        "positions": record.get("positions", "-"),
    }], columns)
    append_record(_out_dir(args) / "baseline.jsonl",
                  {"kind": "baseline", "profile": args.profile, **record})
    return EXIT_OK if record["status"] == "ok" else EXIT_INFEASIBLE


def cmd_verify(args) -> int:
    from .loops import ao_loop
    from .records import append_record
    from .scenario import sample_scenario
    from .verify import verify_solution

    config = _profile(args)
    scenario = sample_scenario(config, args.seed)
    out = ao_loop(scenario.data, rng=args.seed)
    if not out.ok:
        print(f"infeasible\t{out.status}")
        return EXIT_INFEASIBLE
    stage = scenario.data.stage_data(out.bmat)
    report = verify_solution(stage, out.result.decisions, rng=args.seed,
                             rate_samples=args.rate_samples,
                             outage_samples=args.outage_samples)
    rows = [{
        "check": "all", "ok": report.ok,
        "first_violation": report.first_violation or "-",
        "avg_power": f"{report.avg_power:.6g}",
        "min_certified_rate": f"{report.certified_rates.min():.6g}",
        "max_pattern_mse": f"{report.pattern_mse.max():.6g}",
    }]
    _print_table(rows, ["check", "ok", "first_violation", "avg_power",
                        "min_certified_rate", "max_pattern_mse"])
    append_record(_out_dir(args) / "verify.jsonl", {
        "kind": "verify", "seed": args.seed, "profile": args.profile,
        "ok": report.ok, "violations": list(report.violations),
        "avg_power": report.avg_power,
    })
    return EXIT_OK if report.ok else EXIT_INFEASIBLE


def cmd_oracle(args) -> int:
    from .baselines import brute_force_positions
    from .loops import ao_loop
    from .records import append_record
    from .scenario import oracle_profile, sample_scenario

    config = oracle_profile()
    rows = []
    worst = 0.0
    any_fail = False
    for seed in _split_tokens(args.seeds, int):
        scenario = sample_scenario(config, seed)
        brute = brute_force_positions(scenario.data)
        out = ao_loop(scenario.data, rng=seed)
        if not (brute.ok and out.ok):
            any_fail = True
            rows.append({"seed": seed, "status": "infeasible"})
            continue
        ratio = out.result.objective / brute.objective
        worst = max(worst, ratio)
        rows.append({
            "seed": seed, "status": "ok",
            "proposed": f"{out.result.objective:.6g}",
            "exhaustive": f"{brute.objective:.6g}",
            "ratio": f"{ratio:.4f}",
        })
    _print_table(rows, ["seed", "status", "proposed", "exhaustive",
                        "ratio"])
    print(f"# worst ratio: {worst:.4f}")
    append_record(_out_dir(args) / "oracle.jsonl", {
        "kind": "oracle", "seeds": list(_split_tokens(args.seeds, int)),
        "worst_ratio": worst,
    })
    return EXIT_INFEASIBLE if (any_fail or worst > 1.05) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mascan",
        description="Movable-array scanning and serving allocation tool",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--profile", default="desk",
                       choices=["desk", "full", "oracle"])
        p.add_argument("--config", default=None,
                       help="key = value file overriding scenario fields")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None,
                       help="output directory (default $MASCAN_OUT_DIR or runs/)")
        p.add_argument("--workers", type=int, default=1,
                       help="concurrent sweep points (other commands are serial)")

    p_solve = sub.add_parser("solve", help="run the full pipeline once")
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="sweep one config axis")
    common(p_sweep)
    p_sweep.add_argument("--axis", required=True)
    p_sweep.add_argument("--values", nargs="+", required=True)
    p_sweep.add_argument("--schemes", nargs="+", default=["proposed"])
    p_sweep.add_argument("--seeds", nargs="+", default=["0"])
    p_sweep.set_defaults(func=cmd_sweep)

    p_base = sub.add_parser("baseline", help="run one comparison scheme")
    common(p_base)
    p_base.add_argument("--scheme", required=True,
                        choices=["proposed", "fixed", "random",
                                 "selection", "bound"])
    p_base.set_defaults(func=cmd_baseline)

    p_verify = sub.add_parser("verify", help="solve then audit feasibility")
    common(p_verify)
    p_verify.add_argument("--rate-samples", type=int, default=200)
    p_verify.add_argument("--outage-samples", type=int, default=0)
    p_verify.set_defaults(func=cmd_verify)

    p_oracle = sub.add_parser(
        "oracle", help="compare against exhaustive placement, small profile"
    )
    common(p_oracle)
    p_oracle.add_argument("--seeds", nargs="+",
                          default=[str(s) for s in range(3)])
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
