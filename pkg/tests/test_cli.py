import json

import pytest

from clockforge.circuits import cat_circuit
from clockforge.cli import main


@pytest.fixture
def cat3(tmp_path):
    path = tmp_path / "cat3.json"
    path.write_text(json.dumps(cat_circuit(3).to_json()))
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def checks(report):
    return {c["name"]: c for c in report["checks"]}


def test_build_unary_is_five_local(cat3, capsys):
    code, rep, _ = run(["build", "--circuit", cat3, "--clock-dim", "1"], capsys)
    assert code == 0 and rep["locality"] == 5 and rep["all_pass"]
    term = rep["terms"][0]
    assert len(term["matrix"]) == term["dim"] ** 2
    assert {t["tag"] for t in rep["terms"]} >= {"in", "prop", "out"}


def test_build_two_dim_clock(cat3, capsys):
    code, rep, _ = run(["build", "--circuit", cat3, "--clock-dim", "2"], capsys)
    assert code == 0 and rep["locality"] <= 7


def test_build_writes_output_file(cat3, tmp_path, capsys):
    out = tmp_path / "h.json"
    assert main(["build", "--circuit", cat3, "--output", str(out)]) == 0
    assert json.loads(out.read_text())["n_terms"] > 0


def test_malformed_json_is_a_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dims": [2, 2],\n "gates": [}')
    code, rep, err = run(["build", "--circuit", str(bad)], capsys)
    assert code == 2 and rep is None
    assert "line 2" in err and "column" in err


def test_missing_file_and_bad_gate(tmp_path, capsys):
    assert run(["build", "--circuit", str(tmp_path / "none.json")], capsys)[0] == 2
    bad = tmp_path / "gate.json"
    bad.write_text(json.dumps({"dims": [2], "gates": [{"label": "NOPE", "support": [0]}]}))
    code, _, err = run(["spectrum", "--circuit", str(bad)], capsys)
    assert code == 2 and "gate #0" in err


def test_unknown_flag_exits_two(capsys):
    assert main(["lngs", "--bogus"]) == 2
    assert main([]) == 2


def test_spectrum_and_lightcone(cat3, capsys):
    code, rep, _ = run(["spectrum", "--circuit", cat3, "--no-out"], capsys)
    assert code == 0 and rep["eigenvalues"][0] == pytest.approx(0, abs=1e-10)
    code, rep, _ = run(["lightcone", "--circuit", cat3, "--target", "0"], capsys)
    assert code == 0 and rep["analysis"]["shadow"] == [0, 1, 2]


def test_traceorder(cat3, capsys):
    code, rep, _ = run(["traceorder", "--circuit", cat3, "--traced", "2"], capsys)
    assert code == 0 and rep["all_pass"]


def test_reports_are_deterministic(cat3, capsys):
    argv = ["lngs", "--n", "5", "--eps", "0.01", "--delta", "0.01", "--trials", "6", "--seed", "3"]
    _, first, _ = run(argv, capsys)
    _, second, _ = run(argv, capsys)
    first.pop("wall_time_s")
    second.pop("wall_time_s")
    assert json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)
    _, threaded, _ = run(argv + ["--jobs", "3"], capsys)
    threaded.pop("wall_time_s")
    first.pop("command")
    threaded.pop("command")
    assert first == threaded


def test_lngs_clean_run_reports_exact_values(capsys):
    code, rep, _ = run(["lngs", "--n", "6", "--eps", "0", "--delta", "0", "--trials", "4"], capsys)
    c = checks(rep)
    assert c["certificate margin"]["value"] == pytest.approx(0.25)
    assert c["Tr(A_i B_j Psi) = (i+j+2)/(2(n+1)) (0-based)"]["pass"]
    assert c["ground state overlap with history state"]["pass"]
    # the zero-joint claim fails on the t = 0 snapshot, so the run reports a violated bound
    assert not c["Tr(A_i B_j Psi) = 0 for all i < j"]["pass"]
    assert code == 1


@pytest.mark.parametrize("flags", [["--eps", "0.05"], ["--eps", "0.0166", "--delta", "0.05"], ["--n", "40"]])
def test_lngs_rejects_out_of_range(flags, capsys):
    code, rep, err = run(["lngs", *flags], capsys)
    assert code == 2 and rep is None
    assert "outside" in err or "between" in err


def test_qlwc_rejects_over_budget_error(capsys):
    code, _, err = run(["qlwc", "--error", "erase:state:2,5"], capsys)
    assert code == 2 and "budget" in err
    assert run(["qlwc", "--error", "erase:state:9"], capsys)[0] == 2
    assert run(["qlwc", "--error", "melt:state:1"], capsys)[0] == 2
    assert run(["qlwc", "--message", "two"], capsys)[0] == 2


def test_qlwc_single_erasure(tmp_path, capsys):
    out = tmp_path / "q.json"
    code = main(["qlwc", "--error", "erase:state:3", "--message", "plus", "--report", str(out)])
    rep = json.loads(out.read_text())
    assert code == 0 and rep["all_pass"]
    assert rep["parameters"]["K"] == 180 and rep["parameters"]["w"] == 9
    assert rep["junk_weight"] <= 0.0625 + 1e-9
