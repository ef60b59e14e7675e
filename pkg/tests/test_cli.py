import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from safeoco.cli import (
    AGG_SEED,
    HEADER,
    SchemaError,
    SweepConfig,
    emit_plot,
    main,
    parse_seeds,
    regret_from_trace,
    rows_to_csv,
    run_sweep,
    trace_path,
)

HEADER_LINE = "setting,algo,schedule,dim,seed,horizon,regret,avg_regret,max_g_value,min_gamma,max_iterate_gap,audit_pass,wall_ms"


def _parse(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_header_exact():
    assert ",".join(HEADER) == HEADER_LINE
    rows, _ = run_sweep(SweepConfig(horizons=[20], seeds=[0]))
    assert rows_to_csv(rows).splitlines()[0] == HEADER_LINE


def test_row_counts():
    config = SweepConfig(algorithms=["mp-rogd", "mp-ogd"], horizons=[10, 30, 60], seeds=range(10))
    rows, _ = run_sweep(config)
    assert len(rows) == 66
    assert sum(r["seed"] == AGG_SEED for r in rows) == 6
    # deterministic order: algo, horizon, then seeds with the aggregate last
    keys = [(r["algo"], int(r["horizon"])) for r in rows]
    assert keys == sorted(keys, key=lambda k: (["mp-rogd", "mp-ogd"].index(k[0]), k[1]))
    group = rows[:11]
    assert [r["seed"] for r in group] == [str(s) for s in range(10)] + [AGG_SEED]


def test_aggregate_population_std():
    rows, _ = run_sweep(SweepConfig(horizons=[25], seeds=[0, 1, 2]))
    vals = np.array([float(r["avg_regret"]) for r in rows[:3]])
    mean, std = rows[3]["avg_regret"].split(";")
    assert float(mean) == pytest.approx(vals.mean(), rel=1e-15)
    assert float(std) == pytest.approx(vals.std(ddof=0), rel=1e-12)
    assert ";" in rows[3]["regret"]


def test_zero_cost_override():
    rows, _ = run_sweep(SweepConfig(setting="quadratic", algorithms=["mp-rogd", "rogd", "mp-ogd"],
                                    horizons=[15], seeds=[0, 1], zero_cost=True))
    for r in rows:
        if r["seed"] == AGG_SEED:
            assert r["avg_regret"] == "0.0;0.0"
        else:
            assert float(r["regret"]) == 0.0 and float(r["avg_regret"]) == 0.0


def test_determinism_bytes(tmp_path):
    config = dict(setting="quadratic", algorithms=["mp-rogd", "rogd"], horizons=[20, 40], seeds=[0, 1], audit=True)
    a, _ = run_sweep(SweepConfig(**config))
    b, _ = run_sweep(SweepConfig(**config))
    assert rows_to_csv(a) == rows_to_csv(b)
    assert all(r["wall_ms"] == "" for r in a)


def test_parallel_matches_serial():
    config = dict(algorithms=["mp-rogd", "mp-ogd"], horizons=[20], seeds=[0, 1, 2])
    a, _ = run_sweep(SweepConfig(**config))
    b, _ = run_sweep(SweepConfig(**config, workers=2))
    assert rows_to_csv(a) == rows_to_csv(b)


def test_failed_run_recorded_and_sweep_continues():
    # the experiment schedule is undefined below T = 4; T = 2 fails, T = 20 runs
    rows, _ = run_sweep(SweepConfig(horizons=[2, 20], seeds=[0]))
    assert rows[0]["audit_pass"] == "error" and rows[0]["regret"] == ""
    assert rows[1]["audit_pass"] == "error"
    assert rows[2]["regret"] != ""


def test_traces_round_trip(tmp_path):
    config = SweepConfig(setting="linear", algorithms=["mp-rogd", "mp-ogd"], horizons=[30], seeds=[0, 3],
                         save_traces=str(tmp_path))
    rows, _ = run_sweep(config)
    for r in rows:
        if r["seed"] == AGG_SEED:
            continue
        path = trace_path(tmp_path, config, r["algo"], int(r["seed"]), 30)
        stored = regret_from_trace(path)
        fresh = regret_from_trace(path, config, int(r["seed"]))
        assert abs(stored - float(r["regret"])) <= 1e-12
        assert abs(fresh - float(r["regret"])) <= 1e-12


def test_prefix_checkpoints_mode():
    config = SweepConfig(horizons=[20, 50], seeds=[0], prefix_checkpoints=True)
    rows, _ = run_sweep(config)
    assert [r["horizon"] for r in rows] == ["20", "20", "50", "50"]
    full, _ = run_sweep(SweepConfig(horizons=[50], seeds=[0]))
    assert rows[2]["regret"] == full[0]["regret"]


def test_parse_seeds():
    assert parse_seeds("0..9") == list(range(10))
    assert parse_seeds("1,4,7") == [1, 4, 7]
    assert parse_seeds("0..2,5") == [0, 1, 2, 5]


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(setting="cubic")
    with pytest.raises(ValueError):
        SweepConfig(algorithms=["sgd"])
    with pytest.raises(ValueError):
        SweepConfig(horizons=[0])


# --- plotting --------------------------------------------------------------------


def test_plot_two_algorithms(tmp_path):
    rows, _ = run_sweep(SweepConfig(algorithms=["mp-rogd", "mp-ogd"], horizons=[10, 30], seeds=[0, 1]))
    csv_path = tmp_path / "r.csv"
    csv_path.write_text(rows_to_csv(rows))
    svg = emit_plot(csv_path, tmp_path / "f.svg")
    assert svg.count("<polyline") == 2
    assert svg.count("<polygon") == 2
    assert (tmp_path / "f.svg").read_text() == svg
    assert emit_plot(csv_path) == svg


def test_plot_single_point(tmp_path):
    rows, _ = run_sweep(SweepConfig(horizons=[10], seeds=[0]))
    csv_path = tmp_path / "r.csv"
    csv_path.write_text(rows_to_csv(rows[:1]))
    svg = emit_plot(csv_path)
    assert svg.count("<circle") == 1
    assert "<polyline" not in svg


def test_plot_faults(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(SchemaError):
        emit_plot(empty)
    header_only = tmp_path / "h.csv"
    header_only.write_text(HEADER_LINE + "\n")
    with pytest.raises(SchemaError):
        emit_plot(header_only)
    wrong = tmp_path / "w.csv"
    wrong.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        emit_plot(wrong)


# --- entry point ---------------------------------------------------------------------


def test_main_writes_outputs(tmp_path):
    out, fig = tmp_path / "r.csv", tmp_path / "f.svg"
    rc = main(["--setting", "linear", "--algos", "mp-rogd,mp-ogd", "--horizons", "20,40",
               "--seeds", "0..1", "--audit", "--out", str(out), "--plot", str(fig)])
    assert rc == 0
    rows = _parse(out.read_text())
    assert len(rows) == 2 * 2 * 3
    assert all(r["audit_pass"] == "1" for r in rows)
    assert fig.read_text().count("<polyline") == 2


def test_module_invocation(tmp_path):
    out = tmp_path / "r.csv"
    proc = subprocess.run([sys.executable, "-m", "safeoco", "--horizons", "10", "--seeds", "0",
                           "--zero-cost", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().startswith(HEADER_LINE)
