import json
import subprocess
import sys

import numpy as np
import pytest

from scenario_regret.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO, EXIT_OK, main
from scenario_regret.config import RunConfig
from scenario_regret.errors import ConfigError

BASE = {"system": {"builtin": "mass_spring_damper", "params": {"T": 6}}, "dataset": {"N": 6, "seed": 1}}


def _write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_config_defaults_and_overrides():
    cfg = RunConfig.from_dict(BASE)
    assert cfg.T == 6 and cfg.N == 6 and cfg.seed == 1
    assert cfg.structure == "full-causal" and cfg.objective == "regret"
    assert cfg.epsilon == 0.1 and cfg.lmi_form == "compact"
    over = cfg.with_overrides(N=9, seed=None, epsilon=0.2, structure="toeplitz")
    assert over.N == 9 and over.seed == 1 and over.epsilon == 0.2 and over.structure != cfg.structure
    sample = cfg.sampler()(np.random.default_rng(0))
    assert np.all(np.abs(sample.theta) <= 0.2)


def test_affine_config():
    data = {"system": {"affine": {"T": 3, "A0": [[1.0]], "B0": [[1.0]], "E0": [[1.0]], "A": [[[0.5]]]}},
            "dataset": {"N": 2, "distribution": {"kind": "uniform-timevarying", "low": [-1], "high": [1]}},
            "weights": {"Q": "identity", "R": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}}
    cfg = RunConfig.from_dict(data)
    assert cfg.system().d == 1
    assert cfg.sampler()(np.random.default_rng(0)).theta.shape == (3, 1)


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(extra=1),
    lambda d: d["dataset"].update(N=0),
    lambda d: d.update(certificate={"epsilon": 1.5}),
    lambda d: d.update(structure="banded"),
    lambda d: d.update(solver={"backend": "no-such-solver"}),
    lambda d: d.update(weights={"Q": [[1.0]]}),
    lambda d: d["dataset"].update(distribution={"kind": "uniform-constant", "low": [1, 1], "high": [0, 0]}),
])
def test_invalid_configs(mutate):
    data = json.loads(json.dumps(BASE))
    mutate(data)
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)


def test_affine_requires_distribution():
    data = {"system": {"affine": {"T": 3, "A0": [[1.0]], "B0": [[1.0]], "E0": [[1.0]]}}, "dataset": {"N": 2}}
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)


def test_certify_output(capsys):
    assert main(["certify", "--eps", "0.1", "--beta", "0.1", "--delta", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "exact N = 22" in out and "simple N = 67" in out
    assert main(["certify", "--eps", "0.1", "--beta", "0.1", "--delta", "39", "--scenarios", "500"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "simple N = 827" in out and "certified" in out


def test_certify_from_config(tmp_path, capsys):
    path = _write(tmp_path, {**BASE, "structure": "toeplitz"})
    assert main(["certify", "--eps", "0.1", "--beta", "0.1", "--config", path]) == EXIT_OK
    out = capsys.readouterr().out
    assert "delta=13" in out and "closed form: 11" in out


@pytest.mark.parametrize("argv", [
    ["certify", "--eps", "1.5", "--beta", "0.1", "--delta", "1"],
    ["certify", "--eps", "0.1", "--beta", "0.1"],
    ["certify", "--eps", "0.1", "--beta", "0.1", "--delta", "0"],
    ["frobnicate"],
    ["repro", "nope"],
    ["repro", "violation-curve", "--scale", "huge"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG


def test_missing_config_file_is_io_error(tmp_path):
    assert main(["synth", "--config", str(tmp_path / "missing.json")]) == EXIT_IO


def test_bad_config_writes_nothing(tmp_path):
    out = tmp_path / "out"
    path = _write(tmp_path, {**BASE, "objective": "minimax"})
    assert main(["synth", "--config", path, "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["synth", "--config", str(bad), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()


@pytest.fixture(scope="module")
def synthesized(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    path = _write(tmp, BASE)
    levels = {}
    for obj in ("regret", "hinf"):
        out = tmp / obj
        assert main(["synth", "--config", path, "--objective", obj, "--out", str(out)]) == EXIT_OK
        payload = json.loads((out / "result.json").read_text())
        levels[obj] = payload["result"]["gamma_star"]
        assert payload["certificate"]["N"] == 6
    return tmp, levels


def test_synth_levels(synthesized):
    _, levels = synthesized
    assert levels["hinf"] >= levels["regret"] - 1e-9


def test_validate_deterministic(synthesized):
    tmp, _ = synthesized
    result = str(tmp / "regret" / "result.json")
    for name in ("a", "b"):
        assert main(["validate", "--result", result, "--validate-samples", "50", "--seed", "3",
                     "--out", str(tmp / name)]) == EXIT_OK
    assert (tmp / "a" / "validation.json").read_bytes() == (tmp / "b" / "validation.json").read_bytes()
    assert main(["validate", "--result", result, "--validate-samples", "0", "--out", str(tmp / "c")]) == EXIT_CONFIG


def test_validate_training_replay(synthesized):
    tmp, _ = synthesized
    out = tmp / "train"
    assert main(["validate", "--result", str(tmp / "regret" / "result.json"), "--training",
                 "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "validation.json").read_text())["report"]
    assert report["n_any"] == 0 and report["n_validation"] == 6


def test_infeasible_exit_code(tmp_path):
    # |u_t| <= -1 has no solution
    data = {**BASE, "safety": {"H_x": [[0.0] * 12], "H_u": [[1.0] + [0.0] * 5], "h": [-1.0]}}
    assert main(["synth", "--config", _write(tmp_path, data), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "scenario_regret.cli", "certify", "--eps", "0.2", "--beta", "0.1",
                           "--delta", "1"], capture_output=True, text=True)
    assert proc.returncode == 0 and "exact N = 11" in proc.stdout
