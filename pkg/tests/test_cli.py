import json
from fractions import Fraction as F

import pytest

from stochktsp.cli import main
from stochktsp.model import RewardDistribution, metric_instance, parse_instance, serialize_instance


@pytest.fixture
def star_file(tmp_path):
    d = RewardDistribution.from_pmf({0: F(1, 2), 4: F(1, 2)})
    inst = metric_instance([[0, 1, 1], [1, 0, 2], [1, 2, 0]], [RewardDistribution.point(0), d, d], 4)
    path = tmp_path / "star.json"
    path.write_text(serialize_instance(inst))
    return path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_example1(tmp_path, capsys):
    out = tmp_path / "e1.json"
    code, stdout, _ = run(["gen", "example1", "--l", 7, "--out", out], capsys)
    assert code == 0 and "k=128" in stdout
    inst = parse_instance(out.read_text())
    assert inst.n - 1 == 56 and inst.k == 128
    assert json.loads(out.read_text())["manifest"]["command"] == "gen example1"


def test_gen_gap_uses_lp_distribution(capsys):
    code, stdout, _ = run(["gen", "gap", "--n", 2], capsys)
    assert code == 0
    assert parse_instance(stdout).rewards[1].pmf() == {4: F(1, 2), 6: F(1, 2)}


def test_gen_random_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert run(["gen", "random", "--n", 6, "--k", 12, "--seed", 7, "--out", p], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_invalid_parameter(capsys):
    code, _, err = run(["gen", "gap", "--n", 2, "--p", "1/2,1/3"], capsys)
    assert code != 0 and "error" in err


def test_run_example1_cost(tmp_path, capsys):
    inst = tmp_path / "e1.json"
    run(["gen", "example1", "--l", 7, "--out", inst], capsys)
    code, stdout, _ = run(["run", inst, "--trials", 2, "--format", "json"], capsys)
    assert code == 0
    assert json.loads(stdout)["mean_length"] >= 112


def test_run_nonadaptive_star(star_file, capsys):
    code, stdout, _ = run(["run", star_file, "--policy", "nonadaptive", "--trials", 100,
                           "--format", "json"], capsys)
    assert code == 0
    assert json.loads(stdout)["expected_length_exact"] == "2"


def test_run_trials_zero_is_usage_error(star_file, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", str(star_file), "--trials", "0"])
    assert exc.value.code == 2


def test_run_oracle_mismatch(star_file, capsys):
    code, _, err = run(["run", star_file, "--oracle", "knapsack"], capsys)
    assert code != 0 and "knapsack" in err


def test_run_outputs_reproducible(star_file, tmp_path, capsys):
    outs = []
    for name in ("r1.csv", "r2.csv"):
        out, trace = tmp_path / name, tmp_path / (name + ".trace.json")
        run(["run", star_file, "--trials", 300, "--seed", 4, "--with-opt", "--out", out,
             "--trace-out", trace], capsys)
        outs.append((out.read_bytes(), trace.read_bytes()))
    assert outs[0] == outs[1]
    assert outs[0][0].startswith(b"# manifest:")
    assert b"phase,u_hat" in outs[0][0]


def test_opt_gap_instance(tmp_path, capsys):
    inst = tmp_path / "g.json"
    run(["gen", "gap", "--n", 2, "--out", inst], capsys)
    code, stdout, _ = run(["opt", inst, "--format", "json"], capsys)
    rep = json.loads(stdout)
    assert code == 0 and rep["adaptive"] == 1.5 and rep["nonadaptive"] == 2.0
    assert rep["profile_beyond"] == ["1/2", "0"]


def test_opt_size_gate_reports_size(tmp_path, capsys):
    inst = tmp_path / "e.json"
    run(["gen", "example1", "--l", 5, "--out", inst], capsys)
    code, _, err = run(["opt", inst], capsys)
    assert code != 0 and "31 vertices" in err


def test_orienteer(star_file, capsys):
    code, stdout, _ = run(["orienteer", star_file, "--budget", 1, "--profits", "0,3,5"], capsys)
    rep = json.loads(stdout)
    assert code == 0 and rep["walk"] == [0, 2] and rep["profit"] == "5"


def test_gaplp(capsys):
    code, stdout, _ = run(["gaplp", "--n", 2], capsys)
    assert code == 0 and "1.333333" in stdout and "4/3" in stdout
    code, stdout, _ = run(["gaplp", "--sweep", "1-5", "--format", "json"], capsys)
    assert [r["n"] for r in json.loads(stdout)["results"]] == [1, 2, 3, 4, 5]


def test_check_capped_sum(tmp_path, capsys):
    out = tmp_path / "check.json"
    code, _, _ = run(["check", "--suite", "capped-sum", "--cases", 500, "--out", out], capsys)
    assert code == 0
    assert json.loads(out.read_text())["suites"]["capped-sum"]["violations"] == 0


def test_tour_mode_override(star_file, capsys):
    code, stdout, _ = run(["run", star_file, "--policy", "nonadaptive", "--trials", 10,
                           "--tour-mode", "closed", "--format", "json"], capsys)
    assert json.loads(stdout)["expected_length_exact"] == "3"
