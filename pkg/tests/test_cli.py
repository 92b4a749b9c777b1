import json

import pytest

from mascan.cli import EXIT_OK, main
from mascan.records import read_records


def test_solve_writes_records_and_trace_figure(tmp_path, capsys):
    code = main(["solve", "--profile", "oracle", "--seed", "0",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    header = out.splitlines()[0].split("\t")
    assert header[:2] == ["instance", "objective"]
    recs = read_records(tmp_path / "solve.jsonl")
    assert len(recs) == 1
    assert recs[0]["objective"] > 0
    assert recs[0]["feasible"] is True
    pngs = list(tmp_path.glob("trace-*.png"))
    assert len(pngs) == 1 and pngs[0].stat().st_size > 1000


def test_sweep_accepts_comma_lists_and_writes_all_artifacts(tmp_path):
    code = main([
        "sweep", "--profile", "oracle", "--axis", "gamma_th_db",
        "--values", "5,10", "--schemes", "proposed", "--seeds", "0",
        "--out", str(tmp_path),
    ])
    assert code == EXIT_OK
    recs = read_records(tmp_path / "sweep-gamma_th_db.jsonl")
    assert {r["value"] for r in recs} == {5.0, 10.0}
    csv_text = (tmp_path / "sweep-gamma_th_db.csv").read_text()
    assert csv_text.splitlines()[0] == "value,scheme,n_ok,n_fail,mean_objective"
    assert (tmp_path / "sweep-gamma_th_db.png").stat().st_size > 1000


def test_baseline_command_runs_one_scheme(tmp_path, capsys):
    code = main(["baseline", "--profile", "oracle", "--seed", "0",
                 "--scheme", "fixed", "--out", str(tmp_path)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("scheme\tstatus")
    recs = read_records(tmp_path / "baseline.jsonl")
    assert recs[-1]["scheme"] == "fixed"
    assert recs[-1]["status"] == "ok"


def test_verify_command_audits_the_solution(tmp_path, capsys):
    code = main(["verify", "--profile", "oracle", "--seed", "0",
                 "--rate-samples", "20", "--out", str(tmp_path)])
    assert code == EXIT_OK
    recs = read_records(tmp_path / "verify.jsonl")
    assert recs[-1]["ok"] is True
    assert recs[-1]["violations"] == []


def test_oracle_command_reports_ratio_to_exhaustive(tmp_path, capsys):
    code = main(["oracle", "--seeds", "0", "--out", str(tmp_path)])
    assert code == EXIT_OK
    recs = read_records(tmp_path / "oracle.jsonl")
    assert recs[-1]["worst_ratio"] <= 1.05
    out = capsys.readouterr().out
    assert "# worst ratio:" in out


def test_unknown_profile_is_rejected_at_parse_time(tmp_path):
    with pytest.raises(SystemExit):
        main(["solve", "--profile", "bogus", "--out", str(tmp_path)])


def test_records_are_valid_json_lines(tmp_path):
    main(["solve", "--profile", "oracle", "--seed", "1",
          "--out", str(tmp_path)])
    for line in (tmp_path / "solve.jsonl").read_text().splitlines():
        json.loads(line)


def test_config_file_overrides_scenario_fields(tmp_path, capsys):
    cfg = tmp_path / "overrides.cfg"
    cfg.write_text(
        "# tighter rate floor, shorter schedule\n"
        "rate_min = 0.4\n"
        "omega_av = (1.0, 0.2)\n"
    )
    code = main(["baseline", "--profile", "oracle", "--seed", "0",
                 "--scheme", "fixed", "--config", str(cfg),
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    plain = main(["baseline", "--profile", "oracle", "--seed", "0",
                  "--scheme", "fixed", "--out", str(tmp_path)])
    assert plain == EXIT_OK
    recs = read_records(tmp_path / "baseline.jsonl")
    assert recs[0]["config_hash"] != recs[1]["config_hash"]


def test_config_file_with_unknown_field_is_rejected(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("definitely_not_a_field = 3\n")
    with pytest.raises(SystemExit):
        main(["baseline", "--profile", "oracle", "--seed", "0",
              "--scheme", "fixed", "--config", str(cfg),
              "--out", str(tmp_path)])
