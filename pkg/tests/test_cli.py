import json

import pytest

from thresholdgame.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


def test_curve_prints_all_scenarios(capsys):
    code, out = run(["curve", "--alpha", "1"], capsys)
    assert code == 0
    assert "RR (alpha=1):" in out and "AA (alpha=1):" in out
    assert "C >=  0: p = 0" in out
    assert "C >= 10: p = 0.8" in out


def test_curve_writes_artifact(tmp_path, capsys):
    out_file = tmp_path / "curves.json"
    code, _ = run(["curve", "--scenario", "RR", "--out", str(out_file)], capsys)
    assert code == 0
    lines = out_file.read_text().splitlines()
    assert lines[0].startswith("# tool=thresholdgame")
    payload = json.loads("\n".join(ln for ln in lines if not ln.startswith("#")))
    assert payload[0]["breakpoints"][1] == {"total": "5.00", "prob": "0.5"}


def test_solve_prints_benchmark_table(capsys):
    code, out = run(["solve", "--alpha", "1", "--rho", "1", "--mode", "paper"], capsys)
    assert code == 0
    lines = out.splitlines()
    table_start = next(i for i, ln in enumerate(lines)
                       if ln.startswith("Equilibrium/Treatment"))
    assert lines[table_start].split() == ["Equilibrium/Treatment", "RR", "RA", "AR", "AA"]
    assert lines[table_start + 3].split() == ["C=10", "Y", "Y", "Y", "Y"]


def test_solve_csv_artifact(tmp_path, capsys):
    out_file = tmp_path / "solve.csv"
    code, _ = run(["solve", "--alpha", "1", "--rho", "1", "--mode", "paper",
                   "--out", str(out_file)], capsys)
    assert code == 0
    body = [ln for ln in out_file.read_text().splitlines() if not ln.startswith("#")]
    assert body[0] == "treatment,total,kind,zero_payoff,dominated_textbook,condition,rho_threshold"
    assert any(ln.startswith("AA,10,strict") for ln in body)


def test_sweep_robust_table(capsys):
    code, out = run(["sweep", "--alpha", "1"], capsys)
    assert code == 0
    lines = [ln for ln in out.splitlines() if ln.startswith("C=")]
    assert lines[0].split() == ["C=0", "Y", "Y"]
    assert lines[2].split() == ["C=10", "Y"]


def test_hypotheses_report(capsys):
    code, out = run(["hypotheses", "--alpha", "1"], capsys)
    assert code == 0
    assert "H1" in out and "supported" in out


def test_simulate_requires_seed(tmp_path, capsys):
    code, _ = run(["simulate", "--n", "20", "--out", str(tmp_path / "x.csv")], capsys)
    assert code == 2


def test_simulate_deterministic_bytes(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["simulate", "--n", "100", "--seed", "7", "--out", str(a)], capsys)[0] == 0
    assert run(["simulate", "--n", "100", "--seed", "7", "--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0].startswith("# tool=thresholdgame")


def test_simulate_then_analyze(tmp_path, capsys):
    data = tmp_path / "exp.csv"
    assert run(["simulate", "--n", "500", "--seed", "3", "--out", str(data)], capsys)[0] == 0
    out_dir = tmp_path / "analysis"
    code, out = run(["analyze", "--data", str(data), "--out", str(out_dir)], capsys)
    assert code == 0
    assert "== balance" in out and "== ate" in out and "== pivotal_model" in out
    produced = {p.name for p in out_dir.iterdir()}
    assert {"balance.csv", "ate.csv", "contribution_model.csv", "beliefs_model.csv",
            "pivotal_model.csv", "polarization.csv", "histogram.csv"} <= produced


def test_analyze_missing_file_is_config_error(capsys):
    code, _ = run(["analyze", "--data", "/nonexistent.csv"], capsys)
    assert code == 2


def test_power_command(capsys):
    code, out = run(["power", "--arms", "4", "--n", "1500", "--sd", "1.39"], capsys)
    assert code == 0
    assert "0.2844" in out


def test_power_with_mc(capsys):
    code, out = run(["power", "--arms", "2", "--n", "750", "--sd", "1.39",
                     "--mc", "2000", "--seed", "1"], capsys)
    assert code == 0
    assert "Monte-Carlo rejection" in out


def test_config_file_with_flag_override(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"alpha": 0.0, "rho-min": 0.5}))
    code, out = run(["sweep", "--config", str(config)], capsys)
    assert code == 0
    assert "alpha=0" in out
    code, out = run(["sweep", "--config", str(config), "--alpha", "1"], capsys)
    assert code == 0
    assert "alpha=1" in out  # flag wins


def test_simulate_rule_from_config(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(
        {"rule": {"kind": "altruist-fixed", "fixed_contribution": "2.00"}}))
    out = tmp_path / "fixed.csv"
    code, _ = run(["simulate", "--n", "20", "--seed", "1",
                   "--config", str(config), "--out", str(out)], capsys)
    assert code == 0
    body = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
    contribution_col = body[0].split(",").index("contribution")
    assert all(ln.split(",")[contribution_col] == "2.00" for ln in body[1:])


def test_simulate_bad_rule_is_config_error(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"rule": {"kind": "altruist-fixed", "typo": 1}}))
    code, _ = run(["simulate", "--n", "20", "--seed", "1", "--config", str(config),
                   "--out", str(tmp_path / "x.csv")], capsys)
    assert code == 2


def test_out_dir_env_var(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("THRESHOLDGAME_OUT", str(tmp_path))
    code, _ = run(["simulate", "--n", "20", "--seed", "1", "--out", "sub/run.csv"], capsys)
    assert code == 0
    assert (tmp_path / "sub" / "run.csv").exists()


def test_bad_alpha_is_config_error(capsys):
    code, _ = run(["curve", "--alpha", "1.5"], capsys)
    assert code == 2


def test_fine_grid_cap_exit_code(tmp_path, capsys):
    # a 1-cent grid would need 501^5 profiles; solve stays symmetric so use
    # the solver cap through a direct call instead: the CLI surfaces code 4
    from thresholdgame.cli import main as cli_main
    import thresholdgame.cli as cli_mod
    import thresholdgame.solver as solver_mod

    def boom(*a, **k):
        raise solver_mod.EnumerationCapExceeded(10_000, 100)

    orig = cli_mod.enumerate_symmetric
    cli_mod.enumerate_symmetric = boom
    try:
        code = cli_main(["solve", "--alpha", "1"])
    finally:
        cli_mod.enumerate_symmetric = orig
    assert code == 4
