import io
import json
import subprocess
import sys

import pytest

from conftest import APP_FILE, INFRA_FILE, NO_EDGE_OVERLAY, SOLAR_OVERLAY, fixture_text
from greenplace import report
from greenplace.cli import main


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def files(fixture_paths):
    return fixture_paths


def test_validate_quiet(files):
    assert run("validate", *files) == (0, "", "")


def test_validate_reports_errors(tmp_path):
    bad = tmp_path / "bad.facts"
    bad.write_text(fixture_text().replace("(0.3, solar), (0.7, coal)", "(0.5, solar), (0.4, coal)"))
    code, out, _ = run("validate", str(bad))
    assert code == 1
    lines = out.splitlines()
    assert len(lines) == 1 and "mix sums to 0.9" in lines[0] and "bad.facts:" in lines[0]


def test_validate_warnings_keep_exit_zero(tmp_path):
    f = tmp_path / "warn.facts"
    f.write_text(fixture_text().replace("loglinear(0.1, 0.01)", "linear(0.2, -0.001)"))
    code, out, _ = run("validate", str(f))
    assert code == 0 and "warning" in out


def test_missing_file():
    code, _, err = run("validate", "does/not/exist.facts")
    assert code == 2 and "exist.facts" in err


def test_syntax_error_exit(tmp_path):
    f = tmp_path / "broken.facts"
    f.write_text("node(x, [a], 4 [b]).\n")
    code, _, err = run("validate", str(f))
    assert code == 2 and "broken.facts:1:16" in err


def test_place_table(files):
    code, out, _ = run("place", *files, "--app", "lightsApp")
    assert code == 0
    rows = out.splitlines()[2:]
    assert len(rows) == 2
    assert rows[0].startswith("P1") and "lightsDriver, edgenode" in rows[0]
    assert "0.29 kgCO2" in rows[0] and "0.0356 /h" in rows[0] and "0.60 kWh" in rows[0]
    assert "0.32 kgCO2" in rows[1] and "0.0316 /h" in rows[1]


def test_place_cost_first(files):
    code, out, _ = run("place", *files, "--app", "lightsApp", "--rank", "cost,energy,carbon")
    assert code == 0 and "accesspoint" in out.splitlines()[2]


def test_place_unknown_app(files):
    code, _, err = run("place", *files, "--app", "ghostApp")
    assert code == 2 and "unknown application" in err


def test_place_no_placement(tmp_path, files):
    f = tmp_path / "app.facts"
    f.write_text("application(big, [huge]).\nservice(huge, [ubuntu], 100000, []).\n")
    code, _, err = run("place", str(f), str(INFRA_FILE), "--app", "big")
    assert code == 1 and "no eligible placement" in err


def test_place_json_schema_and_stability(files):
    code, out, _ = run("place", *files, "--app", "lightsApp", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert list(doc) == ["application", "constants", "placements"]
    first = doc["placements"][0]
    assert list(first) == ["rank", "assignments", "carbon_kg", "cost", "energy_kwh",
                           "per_node", "network"]
    assert first["carbon_kg"] == 0.290302 and first["cost"] == 0.0356
    assert report.dumps(json.loads(out)) == out
    assert run("place", *files, "--app", "lightsApp", "--format", "json")[1] == out


def test_constants_flags_and_preset(files, monkeypatch):
    def network_energy(*extra):
        out = run("place", *files, "--app", "lightsApp", "--format", "json", *extra)[1]
        return json.loads(out)["placements"][0]["network"]["energy_kwh"]

    assert network_energy() == 0.594
    assert network_energy("--preset", "preliminaries") == pytest.approx(450 * 0.0023 * 16.5)
    assert network_energy("--preset", "preliminaries", "--kwh-per-mb", "0.0001") \
        == pytest.approx(450 * 0.0001 * 16.5)
    monkeypatch.setenv("GREENPLACE_PRESET", "preliminaries")
    assert network_energy() == pytest.approx(450 * 0.0023 * 16.5)
    assert network_energy("--preset", "default") == 0.594
    monkeypatch.setenv("GREENPLACE_PRESET", "bogus")
    assert run("place", *files, "--app", "lightsApp")[0] == 2


def test_thresholds_prune(files):
    # headroom of 5 units rules out the access point (4 free, 2 needed)
    code, out, _ = run("place", *files, "--app", "lightsApp", "--hw-th", "5")
    assert code == 0 and "accesspoint" not in out and "edgenode" in out


def test_explain_rank(files):
    code, out, _ = run("explain", *files, "--app", "lightsApp", "--rank-id", "1", "--format", "json")
    assert code == 0
    p = json.loads(out)["placement"]
    pc = next(n for n in p["per_node"] if n["node"] == "privateCloud")
    assert (round(pc["old_load"], 2), round(pc["new_load"], 2)) == (14.67, 25.33)
    assert pc["energy_kwh"] == pytest.approx(0.0104, abs=5e-5)
    assert pc["carbon_kg"] == pytest.approx(0.0082, abs=5e-5)
    assert [m["source"] for m in pc["mix"]] == ["solar", "coal"]
    assert p["network"] == {"total_bw_mbps": 16.5, "energy_kwh": 0.594, "carbon_kg": 0.28215}
    assert [t["cost"] for t in p["cost_terms"]] == [0.0256, 0.01]


def test_explain_text(files):
    code, out, _ = run("explain", *files, "--app", "lightsApp", "--rank-id", "1")
    assert code == 0
    assert "privateCloud: load 14.67% -> 25.33%" in out
    assert "16.5 Mbit/s" in out and "0.28215 kgCO2" in out


def test_explain_assign(files):
    code, out, _ = run("explain", *files, "--app", "lightsApp",
                       "--assign", "lightsDriver=accesspoint,mlOptimiser=privateCloud")
    assert code == 0 and out.startswith("P2:")
    code, _, err = run("explain", *files, "--app", "lightsApp",
                       "--assign", "lightsDriver=privateCloud,mlOptimiser=privateCloud")
    assert code == 1 and "not eligible" in err
    assert run("explain", *files, "--app", "lightsApp", "--assign", "lightsDriver")[0] == 2


def test_explain_colocated(tmp_path):
    f = tmp_path / "solo.facts"
    f.write_text(fixture_text().replace("node(edgenode, [ubuntu, python]", "node(edgenode, [ubuntu, python, mySQL]")
                 .replace("8, [gpu, lightshub", "20, [gpu, lightshub")
                 .replace("totHW(edgenode, 12)", "totHW(edgenode, 24)"))
    code, out, _ = run("explain", str(f), "--app", "lightsApp",
                       "--assign", "mlOptimiser=edgenode,lightsDriver=edgenode", "--format", "json")
    assert code == 0
    assert json.loads(out)["placement"]["network"] == {
        "total_bw_mbps": 0.0, "energy_kwh": 0.0, "carbon_kg": 0.0}


def test_explain_out_of_range(files):
    code, _, err = run("explain", *files, "--app", "lightsApp", "--rank-id", "99")
    assert code == 1


def test_whatif_solar(files):
    code, out, _ = run("whatif", *files, "--app", "lightsApp", "--overlay", str(SOLAR_OVERLAY),
                       "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["changed"] and not doc["appeared"] and not doc["disappeared"]
    for p in doc["placements"]:
        assert p["delta"]["carbon_kg"] < 0 and p["rank_before"] == p["rank_after"]


def test_whatif_empty(files, tmp_path):
    empty = tmp_path / "empty.overlay"
    empty.write_text("% nothing to change\n")
    assert run("whatif", *files, "--app", "lightsApp", "--overlay", str(empty)) == (0, "no changes\n", "")


def test_whatif_remove_node(files):
    code, out, _ = run("whatif", *files, "--app", "lightsApp", "--overlay", str(NO_EDGE_OVERLAY))
    assert code == 0
    assert "disappeared: on(mlOptimiser, privateCloud), on(lightsDriver, edgenode)" in out
    assert "rank 2 -> 1" in out


def test_whatif_bad_overlay(files, tmp_path):
    bad = tmp_path / "bad.overlay"
    bad.write_text("- node(ghost).\n")
    assert run("whatif", *files, "--app", "lightsApp", "--overlay", str(bad))[0] == 2
    bad.write_text("! energySourceMix(edgenode, [(0.5, solar)]).\n")
    assert run("whatif", *files, "--app", "lightsApp", "--overlay", str(bad))[0] == 2
    bad.write_text("? cost(a, 1).\n")
    assert run("whatif", *files, "--app", "lightsApp", "--overlay", str(bad))[0] == 2


def test_usage_errors_exit_two(files):
    assert run()[0] == 2
    assert run("place", *files)[0] == 2
    assert run("place", *files, "--app", "lightsApp", "--rank", "carbon")[0] == 2
    assert run("frobnicate")[0] == 2


def test_console_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "greenplace", "place", *files, "--app", "lightsApp"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "P1" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "greenplace", "place", "nope"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
