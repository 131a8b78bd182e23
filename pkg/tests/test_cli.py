import csv
import json
import os

import pytest

from alpertlab.cli import (
    ConfigError,
    ExperimentConfig,
    _parse_eta_token,
    cmd_frame,
    cmd_inner_decay,
    cmd_marcin,
    cmd_verify_wavelets,
    config_from_pairs,
    fmt,
    load_config_file,
    main,
)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_eta_token_parsing():
    assert _parse_eta_token("2^-3") == 3
    assert _parse_eta_token("0.125") == 3
    assert _parse_eta_token(" 2^-6 ") == 6
    with pytest.raises(ConfigError):
        _parse_eta_token("0.3")
    with pytest.raises(ConfigError):
        _parse_eta_token("3^-2")
    with pytest.raises(ConfigError):
        _parse_eta_token("2^0")


def test_config_validation():
    cfg = config_from_pairs({"n": "1", "kappa": "3", "L": "4"})
    assert cfg.kappa == 3 and cfg.L == 4
    with pytest.raises(ConfigError):
        config_from_pairs({"kappa": "0"})
    with pytest.raises(ConfigError):
        config_from_pairs({"kappa": "7"})
    with pytest.raises(ConfigError):
        config_from_pairs({"n": "4"})
    with pytest.raises(ConfigError):
        config_from_pairs({"n": "2", "L": "5"})
    with pytest.raises(ConfigError):
        config_from_pairs({"bogus": "1"})
    with pytest.raises(ConfigError):
        config_from_pairs({"p": "1.0,2.0"})


def test_config_file_and_overrides(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("# comment\nn = 1\nkappa = 1\neta = 2^-3, 2^-4\n")
    pairs = load_config_file(str(cfgfile))
    assert pairs == {"n": "1", "kappa": "1", "eta": "2^-3, 2^-4"}
    cfg = config_from_pairs(pairs)
    assert cfg.betas == (3, 4)


def test_fmt_17_digits():
    assert fmt(1 / 3) == "0.33333333333333331"
    assert fmt(True) == "1"
    assert fmt(7) == "7"


def test_main_config_error_exit(tmp_path):
    assert main(["verify-wavelets", "--kappa", "0", "--out", str(tmp_path)]) == 64
    assert main(["verify-wavelets", "--oddflag"]) == 64
    assert main(["verify-wavelets", "notakey", "v"]) == 64


def test_verify_wavelets_default_passes(tmp_path):
    cfg = ExperimentConfig(L=2, out=str(tmp_path))
    assert cmd_verify_wavelets(cfg) == 0
    rows = read_rows(tmp_path / "verify_wavelets.csv")
    with open(tmp_path / "verify_wavelets.csv") as fh:
        assert fh.readline().strip() == "level,cube,index,check,value,bound,pass"
    assert all(r["pass"] == "1" for r in rows)
    checks = {r["check"] for r in rows}
    assert {"unit_norm", "support_eta", "norm_drift", "gradsup_slope_m0"} <= checks


def test_verify_wavelets_deterministic(tmp_path):
    cfg1 = ExperimentConfig(L=1, out=str(tmp_path / "a"))
    cfg2 = ExperimentConfig(L=1, out=str(tmp_path / "b"))
    cmd_verify_wavelets(cfg1)
    cmd_verify_wavelets(cfg2)
    a = (tmp_path / "a" / "verify_wavelets.csv").read_bytes()
    b = (tmp_path / "b" / "verify_wavelets.csv").read_bytes()
    assert a == b


def test_inner_decay_csv(tmp_path):
    cfg = ExperimentConfig(kappa=1, out=str(tmp_path))
    code = cmd_inner_decay(cfg)
    rows = read_rows(tmp_path / "inner_decay.csv")
    cases = {r["case"] for r in rows}
    assert cases == {"diagonal", "sibling", "carleson_small_i", "carleson_small_q",
                     "nested_tiny_q", "zero"}
    zero_rows = [r for r in rows if r["case"] == "zero"]
    assert all(float(r["value"]) == 0.0 for r in zero_rows)
    # the small-smoothed Carleson case fails its stated exponent by design
    assert code == 2
    carq = [r for r in rows if r["case"] == "carleson_small_q"]
    assert all(r["pass"] == "1" for r in carq)


def test_frame_cmd_outputs(tmp_path):
    cfg = ExperimentConfig(L=3, betas=(3, 5), ps=(2.0,), tol=1e-8,
                           test_set=("random_expansion",), out=str(tmp_path))
    assert cmd_frame(cfg) == 0
    summary = json.loads((tmp_path / "frame_summary.json").read_text())
    assert set(summary) == {"n", "kappa", "L", "m", "eta_list", "eta0_measured",
                            "deviations", "residuals"}
    devs = [float(v) for _, v in sorted(summary["deviations"].items())]
    assert devs[1] < devs[0]
    assert summary["eta0_measured"] is not None
    rows = read_rows(tmp_path / "frame.csv")
    metrics = {r["metric"] for r in rows}
    assert {"deviation", "deviation_transpose", "neumann_iters", "residual",
            "square_ratio"} <= metrics
    par = [r for r in rows if r["metric"] == "square_ratio" and r["p"] == "2"]
    assert all(abs(float(r["value"]) - 1.0) < 1e-8 for r in par)


def test_marcin_cmd(tmp_path):
    cfg = ExperimentConfig(kappa=1, L=3, betas=(2, 4), ps=(2.0, 3.0), out=str(tmp_path))
    code = cmd_marcin(cfg)
    rows = read_rows(tmp_path / "marcin.csv")
    p2 = [r for r in rows if r["p"] == "2"]
    assert all(r["pass"] in ("0", "1") for r in p2)
    p3 = [r for r in rows if r["p"] == "3"]
    assert all(r["pass"] == "" for r in p3)
    assert all(float(r["gamma_p"]) == 0.25 for r in p3)
    # the constant-free p=2 bound fails for the single-wavelet test function
    single = [r for r in p2 if r["f"] == "single_wavelet"]
    assert single and all(r["pass"] == "0" for r in single)
    assert code == 2


def test_marcin_empty_test_set(tmp_path):
    assert main(["marcin", "--test_set", "", "--out", str(tmp_path)]) == 64
    assert main(["marcin", "--test_set", "nonsense", "--out", str(tmp_path)]) == 64


def test_main_runs_verify(tmp_path):
    code = main(["verify-wavelets", "--L", "1", "--out", str(tmp_path)])
    assert code == 0
    assert os.path.exists(tmp_path / "verify_wavelets.csv")
