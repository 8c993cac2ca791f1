import csv
import json
import math

import pytest

from powerpost import cli
from powerpost.errors import SchemaMismatch
from powerpost.experiments import AlphaSample, write_alpha_samples, write_rows
from powerpost.plotting import gamma_label, render_plot
from powerpost.presets import PRESETS, get_preset
from powerpost.tuning import SIMULATION_GRIDS


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def fig2_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig2")
    assert cli.dispatch(["simulate", "--preset", "fig2", "--reps", "50", "--seed", "7",
                         "--out", str(out)]) == 0
    return out


def test_simulate_preset_row_accounting(fig2_run):
    rows = read_csv(fig2_run / "alpha_samples.csv")
    assert len(rows) == 2 * 3 * 50
    assert {r["method"] for r in rows} == {"bcv", "bcv-vi"}
    assert {r["n"] for r in rows} == {"100", "1000", "5000"}
    manifest = json.loads((fig2_run / "manifest.json").read_text())
    assert manifest["command"] == "simulate" and manifest["master_seed"] == 7
    assert len(manifest["config_digest"]) == 64
    assert (fig2_run / "alpha_histograms.svg").exists()


def test_rates_command(fig2_run, tmp_path):
    assert cli.dispatch(["rates", "--input", str(fig2_run / "alpha_samples.csv"),
                         "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "rates.csv")
    assert [(r["method"], r["spec"]) for r in rows] == [("bcv", "misspecified"),
                                                        ("bcv-vi", "misspecified")]
    assert rows == read_csv(fig2_run / "rates.csv")


def test_rerun_is_byte_identical(fig2_run, tmp_path):
    assert cli.dispatch(["simulate", "--preset", "fig2", "--reps", "50", "--seed", "7",
                         "--out", str(tmp_path)]) == 0
    for name in ("alpha_samples.csv", "rates.csv", "alpha_histograms.svg", "alpha_rates.svg"):
        assert (tmp_path / name).read_bytes() == (fig2_run / name).read_bytes(), name
    a = json.loads((tmp_path / "manifest.json").read_text())
    b = json.loads((fig2_run / "manifest.json").read_text())
    assert a["config_digest"] == b["config_digest"]


def test_table5_preset_uses_published_grids():
    p = get_preset("table5", "simulate")
    assert "grids" not in p  # the built-in simulation grids are the published ones
    g = SIMULATION_GRIDS["bcv"]
    assert (g.spacing, g.lower, g.upper, g.density) == ("logarithmic", 1e-12, 10.0, 200)
    assert p["source"]["grids"] == "published"
    assert all("source" in v for v in PRESETS.values())


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[run]\nseed = 3\nreps = 2\nn_grid = 20,40\nmethods = bcv\n"
                   "spec = misspecified\n")
    out = tmp_path / "o"
    assert cli.dispatch(["simulate", "--config", str(cfg), "--reps", "3", "--no-plots",
                         "--out", str(out)]) == 0
    rows = read_csv(out / "alpha_samples.csv")
    assert len(rows) == 2 * 3
    assert json.loads((out / "manifest.json").read_text())["master_seed"] == 3


def test_exit_codes(tmp_path):
    assert cli.dispatch(["simulate", "--reps", "0", "--out", str(tmp_path)]) == 2
    assert cli.dispatch(["simulate", "--preset", "nope", "--out", str(tmp_path)]) == 2
    assert cli.dispatch(["no-such-command"]) == 2
    assert cli.dispatch(["rates", "--input", str(tmp_path / "missing.csv"),
                         "--out", str(tmp_path)]) == 3
    assert cli.dispatch(["theorem3", "--n-grid", "2", "--out", str(tmp_path)]) == 4
    assert cli.dispatch(["metric", "--kind", "moment", "--a", "point:0", "--b", "normal:0,1",
                         "--out", str(tmp_path)]) == 2


def test_tune_command(tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("y,x1,x2\n" + "".join(f"{i % 7 - 3 + 0.1 * i},{i % 5},{(i * 3) % 11}\n"
                                          for i in range(40)))
    assert cli.dispatch(["tune", "--input", str(data), "--response", "y", "--method", "bcv",
                         "--sigma2", "estimate", "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "tuning.json").read_text())
    assert res["method"] == "bcv"
    assert cli.dispatch(["tune", "--input", str(data), "--response", "nope",
                         "--out", str(tmp_path)]) == 3


def test_metric_command(tmp_path):
    assert cli.dispatch(["metric", "--kind", "tv", "--a", "normal:0,1", "--b", "normal:1,1",
                         "--out", str(tmp_path)]) == 0
    row = read_csv(tmp_path / "metric.csv")[0]
    assert float(row["value"]) == pytest.approx(0.382925, abs=1e-5)
    assert cli.dispatch(["metric", "--kind", "w2", "--a", "mixture:0.5;point:0;point:1",
                         "--b", "point:0", "--out", str(tmp_path)]) == 0
    assert float(read_csv(tmp_path / "metric.csv")[0]["value"]) == pytest.approx(math.sqrt(0.5))


def test_conjugate_and_figure4_linear_commands(tmp_path):
    assert cli.dispatch(["conjugate", "--n-grid", "100,1000", "--reps", "5",
                         "--out", str(tmp_path / "c")]) == 0
    assert len(read_csv(tmp_path / "c" / "bvm.csv")) == 10
    assert cli.dispatch(["figure4", "--preset", "fig5", "--reps", "3", "--n-grid", "100,1000",
                         "--out", str(tmp_path / "f")]) == 0
    assert len(read_csv(tmp_path / "f" / "figure4.csv")) == 2 * 3
    assert (tmp_path / "f" / "figure4.svg").exists()


# --- plots ---------------------------------------------------------------------

def test_empty_csv_raises_and_writes_nothing(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("n,method,spec,rep,alpha_hat,is_corner,status\r\n")
    out = tmp_path / "x.svg"
    for kind in ("histogram_grid", "loglog_fit", "decay_curves"):
        with pytest.raises(SchemaMismatch):
            render_plot(empty, kind, out)
        assert not out.exists()
    assert cli.dispatch(["plot", "--input", str(empty), "--kind", "loglog_fit",
                         "--out", str(tmp_path)]) == 3
    assert not (tmp_path / "loglog_fit.svg").exists()


def test_loglog_annotation_and_determinism(tmp_path):
    samples = [AlphaSample(n, "bcv", r, 2.0 / n, False, "misspecified")
               for n in (100, 1000, 10_000) for r in range(3)]
    p = tmp_path / "a.csv"
    write_alpha_samples(p, samples)
    render_plot(p, "loglog_fit", tmp_path / "one.svg")
    render_plot(p, "loglog_fit", tmp_path / "two.svg")
    one = (tmp_path / "one.svg").read_bytes()
    assert one == (tmp_path / "two.svg").read_bytes()
    assert "γ̂=−1.00" in one.decode("utf-8")
    assert gamma_label(-0.984) == "γ̂=−0.98"


def test_decay_curves_schema(tmp_path):
    p = tmp_path / "d.csv"
    write_rows(p, ("n", "schedule", "mean_scaled_diff_mle"),
               [{"n": n, "schedule": s, "mean_scaled_diff_mle": v}
                for n, s, v in ((100, "a", 1.0), (1000, "a", 0.5), (100, "b", 2.0))])
    render_plot(p, "decay_curves", tmp_path / "d.svg")
    bad = tmp_path / "bad.csv"
    write_rows(bad, ("n", "other"), [{"n": 1, "other": 2}])
    with pytest.raises(SchemaMismatch):
        render_plot(bad, "decay_curves", tmp_path / "bad.svg")
