import json

import pytest

from moeadsps.cli import main
from moeadsps.landscape import load_instance


def test_gen_instance_deterministic(tmp_path):
    a, b = tmp_path / "a.nk", tmp_path / "b.nk"
    assert main(["gen-instance", "100", "2", "0", "42", str(a)]) == 0
    assert main(["gen-instance", "100", "2", "0", "42", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert load_instance(a.read_bytes()).spec.N == 100


def test_gen_instance_rejects_k_equal_n(tmp_path, capsys):
    assert main(["gen-instance", "10", "2", "10", "1", str(tmp_path / "x.nk")]) != 0
    assert "K must satisfy" in capsys.readouterr().err


def test_run_and_report(tmp_path, capsys):
    inst = tmp_path / "inst.nk"
    main(["gen-instance", "20", "2", "1", "3", str(inst)])
    cfg = {
        "schema_version": 1,
        "instances": [{"file": "inst.nk"}],
        "grid": {"mu": [10], "lambda": [10], "sps": ["all"]},
        "replications": 2,
        "budget": 5000,
        "output_dir": "ignored",
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["run", str(tmp_path / "cfg.json"), "-o", str(out), "-w", "1",
                 "--checkpoints", "10,100", "--budget", "200"]) == 0
    lines = (out / "trace.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2
    assert not (tmp_path / "ignored").exists()
    for mode in ("convergence", "ranks", "lambda-sweep"):
        assert main(["report", str(out), "--mode", mode]) == 0
        assert (out / f"report_{mode}.csv").exists()


def test_run_reports_config_errors(tmp_path, capsys):
    (tmp_path / "cfg.json").write_text(json.dumps({"schema_version": 1, "bogus": 1}))
    assert main(["run", str(tmp_path / "cfg.json")]) == 1
    assert "unknown keys ['bogus']" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.json")]) == 1


def test_report_without_traces(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


def test_weights_verb(capsys):
    assert main(["weights", "3", "2", "--method", "lattice"]) == 0
    assert capsys.readouterr().out.split() == ["1.0", "0.0", "0.5", "0.5", "0.0", "1.0"]


def test_bad_checkpoint_list():
    with pytest.raises(SystemExit):
        main(["run", "cfg.json", "--checkpoints", "10,5"])
