import csv
import io
import json
import math

import pytest

from banditmip.cli import (
    CSV_COLUMNS,
    EmptyInput,
    SchemaMismatch,
    apply_config,
    format_summary,
    main,
    shifted_geomean,
    summarize_runs,
)
from banditmip.bnb import SolverSettings

GOLDEN_COLUMNS = [
    "instance", "seed", "mode", "status", "time_s", "nodes", "objective",
    "incumbents_found_by_heuristics", "heuristic_calls",
    "heuristic_successes", "heurtime_s",
    "rens_pulls", "rens_successes", "rens_mean_reward", "rens_final_limit",
    "rins_pulls", "rins_successes", "rins_mean_reward", "rins_final_limit",
    "mutation_pulls", "mutation_successes", "mutation_mean_reward",
    "mutation_final_limit",
    "frac_dive_pulls", "frac_dive_successes", "frac_dive_mean_reward",
    "frac_dive_final_limit",
    "coef_dive_pulls", "coef_dive_successes", "coef_dive_mean_reward",
    "coef_dive_final_limit",
    "rand_dive_pulls", "rand_dive_successes", "rand_dive_mean_reward",
    "rand_dive_final_limit",
]


def test_csv_schema_is_stable():
    assert CSV_COLUMNS == GOLDEN_COLUMNS


# ---------------------------------------------------------------------------
# shifted geometric mean
# ---------------------------------------------------------------------------

def test_sgm_constant_list():
    assert shifted_geomean([5.0, 5.0, 5.0], 17.0) == pytest.approx(5.0)


def test_sgm_two_values():
    got = shifted_geomean([1.0, 100.0], 1.0)
    assert got == pytest.approx(math.sqrt(202.0) - 1.0, abs=1e-9)


def test_sgm_single_zero():
    assert shifted_geomean([0.0], 10.0) == pytest.approx(0.0)


def test_sgm_empty_raises():
    with pytest.raises(EmptyInput):
        shifted_geomean([], 1.0)


def test_sgm_requires_positive_shift():
    with pytest.raises(ValueError):
        shifted_geomean([1.0], 0.0)


# ---------------------------------------------------------------------------
# solve command
# ---------------------------------------------------------------------------

def test_solve_writes_jsonl_log(tmp_path):
    log = tmp_path / "calls.jsonl"
    rc = main(["solve", "gen:gap:n=24,m=4,seed=5", "--mode", "scheduler",
               "--seed", "3", "--log", str(log)])
    assert rc == 0
    records = [json.loads(line) for line in log.read_text().splitlines()]
    calls = [r for r in records if r["type"] == "call"]
    finals = [r for r in records if r["type"] == "run_stats"]
    assert len(finals) == 1 and calls
    for rec in calls:
        assert 0.0 <= rec["r_total"] <= 1.0
    assert finals[0]["status"] == "optimal"


def _oracle_reward(rec):
    """Reward recomputed from raw call data, coded separately from the package."""
    r_sol = 1.0 if rec["found_incumbent"] else 0.0
    if not rec["found_incumbent"]:
        r_gap = 0.0
    elif rec["is_first_incumbent"]:
        r_gap = 1.0
    else:
        impr = rec["obj_old"] - rec["obj_new"]
        den = rec["obj_old"] - rec["obj_lp"]
        if den <= 1e-9:
            r_gap = 1.0 if impr > 0 else 0.0
        else:
            r_gap = min(max(impr / den, 0.0), 1.0)
    r_eff = min(max(1.0 - rec["nodes_used"] / rec["n_max"], 0.0), 1.0)
    vmax = rec["v_max_before"]
    r_conf = 0.0 if vmax == 0 else min(rec["conflicts_found"] / vmax, 1.0)
    return (0.3 * r_sol, 0.3 * r_gap, 0.2 * r_eff, 0.2 * r_conf,
            0.3 * r_sol + 0.3 * r_gap + 0.2 * r_eff + 0.2 * r_conf)


def test_jsonl_log_replays_through_reward_oracle(tmp_path):
    log = tmp_path / "calls.jsonl"
    assert main(["solve", "gen:gap:n=24,m=4,seed=5", "--seed", "1",
                 "--log", str(log)]) == 0
    calls = [json.loads(line) for line in log.read_text().splitlines()
             if json.loads(line)["type"] == "call"]
    assert calls
    for rec in calls:
        _, _, _, _, total = _oracle_reward(rec)
        assert abs(total - rec["r_total"]) <= 1e-9


def test_solve_replay_log_is_deterministic(tmp_path):
    logs = []
    for name in ("a.jsonl", "b.jsonl"):
        path = tmp_path / name
        assert main(["solve", "gen:knapsack:n=10,m=1,seed=7",
                     "--mode", "scheduler", "--seed", "3",
                     "--log", str(path)]) == 0
        records = [json.loads(line) for line in path.read_text().splitlines()]
        for r in records:
            r.pop("time_s", None)
            r.pop("heurtime_s", None)
        logs.append(records)
    assert logs[0] == logs[1]


GOLDEN_CALL_KEYS = {
    "type", "t", "h", "klass", "warmstart",
    "r_sol", "r_gap", "r_eff", "r_conf", "r_total",
    "found_incumbent", "sub_mip_infeasible", "nodes_used", "conflicts_found",
    "fixed_count", "is_first_incumbent", "obj_old", "obj_new", "obj_lp",
    "v_max_before", "n_max", "limit_before", "limit_after",
    "n_fail", "skip_remaining",
}


def test_jsonl_call_record_schema_is_stable(tmp_path):
    log = tmp_path / "calls.jsonl"
    assert main(["solve", "gen:gap:n=24,m=4,seed=5", "--seed", "1",
                 "--log", str(log)]) == 0
    for line in log.read_text().splitlines():
        rec = json.loads(line)
        if rec["type"] == "call":
            assert set(rec) == GOLDEN_CALL_KEYS


def test_solve_missing_file_fails(tmp_path):
    assert main(["solve", str(tmp_path / "missing.mps")]) != 0


MAX_KNAPSACK = """\
NAME MAXKNAP
OBJSENSE
 MAX
ROWS
 N OBJ
 L CAP
COLUMNS
 MK0 'MARKER' 'INTORG'
 X1 OBJ 3.0 CAP 2.0
 X2 OBJ 5.0 CAP 4.0
 MK0 'MARKER' 'INTEND'
RHS
 RHS CAP 5.0
BOUNDS
 UP BND X1 1.0
 UP BND X2 1.0
ENDATA
"""


def test_maximize_objective_reported_unnegated(tmp_path):
    path = tmp_path / "max.mps"
    path.write_text(MAX_KNAPSACK)
    log = tmp_path / "log.jsonl"
    assert main(["solve", str(path), "--log", str(log)]) == 0
    final = [json.loads(line) for line in log.read_text().splitlines()][-1]
    # optimum picks item 2 (value 5); reported in the original MAX sense
    assert float(final["objective"]) == pytest.approx(5.0)


def test_solve_default_mode_logs_no_bandit_records(tmp_path):
    log = tmp_path / "calls.jsonl"
    assert main(["solve", "gen:gap:n=16,m=4,seed=2", "--mode", "default",
                 "--log", str(log)]) == 0
    records = [json.loads(line) for line in log.read_text().splitlines()]
    assert [r["type"] for r in records] == ["run_stats"]


# ---------------------------------------------------------------------------
# bench command
# ---------------------------------------------------------------------------

def _write_manifest(path, uris):
    path.write_text("".join(u + "\n" for u in uris))


def test_bench_cross_product(tmp_path):
    manifest = tmp_path / "suite.txt"
    _write_manifest(manifest, [
        "gen:knapsack:n=8,m=1,seed=0",
        "gen:set_cover:n=10,m=6,seed=1",
        "gen:gap:n=8,m=2,seed=2",
    ])
    out = tmp_path / "runs.csv"
    assert main(["bench", str(manifest), "--seeds", "1,2,3,4",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 24
    assert {r["mode"] for r in rows} == {"default", "scheduler"}
    assert all(r["status"] == "optimal" for r in rows)


def test_bench_empty_manifest(tmp_path):
    manifest = tmp_path / "empty.txt"
    manifest.write_text("# nothing here\n")
    out = tmp_path / "runs.csv"
    assert main(["bench", str(manifest), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1
    assert lines[0].split(",") == CSV_COLUMNS


def test_bench_bad_uri_becomes_error_row(tmp_path):
    manifest = tmp_path / "suite.txt"
    _write_manifest(manifest, ["gen:knapsack:n=6,m=1,seed=0", "nonsense.mps"])
    out = tmp_path / "runs.csv"
    assert main(["bench", str(manifest), "--seeds", "1", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4
    assert sum(1 for r in rows if r["status"] == "error") == 2


def test_bench_rerun_identical_modulo_time(tmp_path):
    manifest = tmp_path / "suite.txt"
    _write_manifest(manifest, [
        "gen:gap:n=12,m=3,seed=3",
        "gen:set_cover:n=12,m=7,seed=4",
    ])

    def run(name):
        out = tmp_path / name
        assert main(["bench", str(manifest), "--seeds", "1,2",
                     "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.open()))
        for r in rows:
            r.pop("time_s"), r.pop("heurtime_s")
        return rows

    assert run("a.csv") == run("b.csv")


# ---------------------------------------------------------------------------
# summarize
# ---------------------------------------------------------------------------

def _row(instance, seed, mode, status="optimal", time_s=1.0, nodes=100,
         heurtime=0.1):
    row = {c: "" for c in CSV_COLUMNS}
    row.update(
        instance=instance, seed=str(seed), mode=mode, status=status,
        time_s=repr(float(time_s)), nodes=str(nodes), objective="0.0",
        incumbents_found_by_heuristics="0", heuristic_calls="0",
        heuristic_successes="0", heurtime_s=repr(float(heurtime)),
    )
    return row


def _csv_text(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def test_summarize_identical_modes_relative_one():
    rows = []
    for i in range(3):
        for mode in ("default", "scheduler"):
            rows.append(_row(f"i{i}", 1, mode, time_s=2.0 + i, nodes=50 + i))
    table = summarize_runs(io.StringIO(_csv_text(rows)))
    allrow = table[0]
    assert allrow.count == 3
    assert allrow.rel_time == pytest.approx(1.0, abs=1e-9)
    assert allrow.rel_nodes == pytest.approx(1.0, abs=1e-9)


def test_summarize_relative_nodes_against_sgm_oracle():
    rows = [
        _row("a", 1, "default", nodes=100), _row("a", 1, "scheduler", nodes=90),
        _row("b", 1, "default", nodes=200), _row("b", 1, "scheduler", nodes=180),
    ]
    table = summarize_runs(io.StringIO(_csv_text(rows)))
    want = (shifted_geomean([90.0, 180.0], 100.0)
            / shifted_geomean([100.0, 200.0], 100.0))
    assert table[0].rel_nodes == pytest.approx(want, abs=1e-9)


def test_summarize_bracket_above_all_times_is_empty():
    rows = [
        _row("a", 1, "default", time_s=1.0), _row("a", 1, "scheduler", time_s=2.0),
    ]
    table = summarize_runs(io.StringIO(_csv_text(rows)), brackets=[50.0])
    bracket = [r for r in table if r.label.startswith("[50")]
    assert len(bracket) == 1 and bracket[0].count == 0
    assert bracket[0].time_default is None


def test_summarize_bracket_filters_by_max_time():
    rows = [
        _row("a", 1, "default", time_s=0.5), _row("a", 1, "scheduler", time_s=0.4),
        _row("b", 1, "default", time_s=9.0), _row("b", 1, "scheduler", time_s=0.2),
    ]
    table = summarize_runs(io.StringIO(_csv_text(rows)), brackets=[5.0])
    bracket = [r for r in table if r.label.startswith("[5")]
    assert bracket[0].count == 1  # only instance b took >= 5s in some mode


def test_summarize_all_optimal_requires_every_seed_solved():
    rows = [
        _row("a", 1, "default"), _row("a", 1, "scheduler"),
        _row("a", 2, "default", status="node_limit"), _row("a", 2, "scheduler"),
        _row("b", 1, "default"), _row("b", 1, "scheduler"),
    ]
    table = summarize_runs(io.StringIO(_csv_text(rows)))
    allopt = table[-1]
    assert allopt.label == "all-optimal"
    assert allopt.count == 1  # only instance b is solved everywhere


def test_summarize_schema_mismatch():
    with pytest.raises(SchemaMismatch):
        summarize_runs(io.StringIO("instance,seed\nx,1\n"))


def test_summarize_command_prints_table(tmp_path, capsys):
    rows = [
        _row("a", 1, "default"), _row("a", 1, "scheduler"),
    ]
    path = tmp_path / "runs.csv"
    path.write_text(_csv_text(rows))
    assert main(["summarize", str(path), "--brackets", "1,10"]) == 0
    out = capsys.readouterr().out
    assert "all" in out and "relative" in out


def test_format_summary_handles_empty_rows():
    table = summarize_runs(io.StringIO(_csv_text([])), brackets=[1.0])
    text = format_summary(table)
    assert "all-optimal" in text


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def test_config_overrides_settings():
    text = """
    # scheduler constants
    epsilon = 0.5
    lns_node_budget = 77
    bandit_mode = recency
    node_limit = 123
    shadow_lp_check = true
    """
    settings = apply_config(SolverSettings(), text)
    assert settings.epsilon == 0.5
    assert settings.lns_node_budget == 77
    assert settings.bandit_mode == "recency"
    assert settings.node_limit == 123
    assert settings.shadow_lp_check is True


def test_config_unknown_key_is_error():
    with pytest.raises(ValueError, match="unknown key"):
        apply_config(SolverSettings(), "no_such_knob = 3\n")


def test_config_file_flows_into_solve(tmp_path):
    cfg = tmp_path / "solver.cfg"
    cfg.write_text("node_limit = 1\n")
    log = tmp_path / "log.jsonl"
    assert main(["solve", "gen:gap:n=16,m=4,seed=2", "--config", str(cfg),
                 "--log", str(log)]) == 0
    final = [json.loads(line) for line in log.read_text().splitlines()][-1]
    assert final["type"] == "run_stats"
    assert int(final["nodes"]) <= 1


def test_config_bad_file_exits_nonzero(tmp_path):
    cfg = tmp_path / "solver.cfg"
    cfg.write_text("bogus = 1\n")
    assert main(["solve", "gen:gap:n=16,m=4,seed=2", "--config", str(cfg)]) != 0
