import json
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rssbounds.cli import (config_hash, ingest_measurements, load_config, main,
                           write_measurements)
from rssbounds.correlation import CorrelationKernel
from rssbounds.errors import ConfigError, CsvFormatError, DegenerateInputError
from rssbounds.geometry import SetupConfig
from rssbounds.noisegen import synthesize
from rssbounds.propagation import DEFAULT_PARAMS

COARSE = "spacing_m = 0.0625\n"  # 2 samples per wavelength -> 192 positions


def write_cfg(tmp_path, text=COARSE, name="cfg.txt"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_measurement_roundtrip(tmp_path):
    cfg = SetupConfig().with_density(1.0)
    meas = synthesize(cfg, DEFAULT_PARAMS, CorrelationKernel.independent(),
                      repeats=3, seed=77, temporal_std_db=0.3)
    path = tmp_path / "m.csv"
    write_measurements(meas, path)
    back = ingest_measurements(path)
    assert_allclose(back.positions, meas.positions, rtol=0)
    assert_allclose(back.powers, meas.powers, rtol=0)
    assert back.repeats == meas.repeats


def test_ingest_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("x_m,y_m,repeat,power_dbm\n")
    with pytest.raises(DegenerateInputError):
        ingest_measurements(path)


def test_ingest_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y,p\n1,2,3\n")
    with pytest.raises(CsvFormatError) as err:
        ingest_measurements(path)
    assert err.value.line == 1


def test_ingest_non_numeric_power_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x_m,y_m,repeat,power_dbm\n1.0,0.0,0,oops\n")
    with pytest.raises(CsvFormatError) as err:
        ingest_measurements(path)
    assert err.value.line == 2


def test_ingest_unit_sanity(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x_m,y_m,repeat,power_dbm\n1.0,0.0,0,-20.0\n2.0,0.0,0,350.0\n")
    with pytest.raises(CsvFormatError) as err:
        ingest_measurements(path)
    assert err.value.line == 3


def test_ingest_duplicate_cell(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text("x_m,y_m,repeat,power_dbm\n1.0,0.0,0,-20.0\n1.0,0.0,0,-21.0\n")
    with pytest.raises(CsvFormatError) as err:
        ingest_measurements(path)
    assert err.value.line == 3


def test_unknown_config_key_is_fatal(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("spacingm = 0.01\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_parsing_and_hash(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("# a comment\nspacing_m = 0.0625  # inline\nseed = 9\ncorrelation = exponential\n")
    cfg = load_config(path)
    assert cfg["spacing_m"] == 0.0625
    assert cfg["seed"] == 9
    assert cfg["correlation"] == "exponential"
    assert config_hash(cfg) == config_hash(dict(cfg))
    assert config_hash(cfg) != config_hash(load_config(None))


def test_mc_study_refuses_too_few_runs(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    code = main(["mc-study", "--config", cfg, "--runs", "50",
                 "--out", str(tmp_path / "out")])
    assert code != 0
    assert "100" in capsys.readouterr().err


def test_simulate_is_byte_deterministic(tmp_path):
    cfg = write_cfg(tmp_path)
    for out in ("a", "b"):
        assert main(["simulate", "--config", cfg, "--seed", "5",
                     "--out", str(tmp_path / out)]) == 0
    a = (tmp_path / "a" / "measurements.csv").read_bytes()
    b = (tmp_path / "b" / "measurements.csv").read_bytes()
    assert a == b


def test_simulate_density_flag_controls_count(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["simulate", "--config", cfg, "--density", "1", "--out",
                 str(tmp_path / "out")]) == 0
    lines = (tmp_path / "out" / "measurements.csv").read_text().splitlines()
    assert len(lines) == 1 + 96


def test_locate_and_calibrate_pipeline(tmp_path):
    cfg = write_cfg(tmp_path)
    sim = tmp_path / "sim"
    assert main(["simulate", "--config", cfg, "--seed", "3",
                 "--kernel", "independent", "--out", str(sim)]) == 0
    out = tmp_path / "loc"
    assert main(["locate", "--config", cfg, "--input",
                 str(sim / "measurements.csv"), "--out", str(out)]) == 0
    header, row = (out / "location.csv").read_text().splitlines()
    assert header == "x_mle_m,y_mle_m,p_r0_dbm,eta,objective,converged"
    fields = row.split(",")
    assert abs(float(fields[0])) < 0.2 and abs(float(fields[1])) < 0.2
    assert fields[5] == "true"

    cal = tmp_path / "cal"
    assert main(["calibrate", "--config", cfg, "--input",
                 str(sim / "measurements.csv"), "--out", str(cal)]) == 0
    header, row = (cal / "calibration.csv").read_text().splitlines()
    assert header == "p_r0_dbm,eta,sigma_db"
    p_r0, eta, sigma = map(float, row.split(","))
    assert p_r0 == pytest.approx(-16.7, abs=1.0)
    assert eta == pytest.approx(3.36, abs=0.3)
    assert sigma == pytest.approx(1.68, rel=0.2)


def test_crlb_curve_output(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "curve"
    assert main(["crlb-curve", "--config", cfg, "--densities", "0.5,2,25",
                 "--out", str(out)]) == 0
    lines = (out / "crlb_curve.csv").read_text().splitlines()
    assert lines[0] == "density_per_lambda,n,n_eff,rmse_indep_m,rmse_corr_m,rmse_bienayme_m,degenerate"
    final = lines[-1].split(",")
    # Plateau value validated against the Monte-Carlo-confirmed bound level.
    assert float(final[5]) == pytest.approx(0.0468, rel=0.05)
    # beyond-Nyquist diffraction sampling leaves no exact correlated bound
    assert final[4] == "" and final[6] == "true"
    assert (out / "crlb_curve.png").exists()


def test_manifest_lists_outputs(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "sim"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["schema_version"] == 1
    for path in manifest["outputs"]:
        assert Path(path).exists()
    names = {Path(p).name for p in manifest["outputs"]}
    assert names == {"measurements.csv", "measurements.png", "measurements.meta.json"}


def test_corr_analyze_and_spectrum_deterministic(tmp_path):
    cfg = write_cfg(tmp_path, text="spacing_m = 0.0625\nseed = 4\n")
    for out in ("c1", "c2"):
        assert main(["corr-analyze", "--config", cfg, "--sets", "4",
                     "--out", str(tmp_path / out)]) == 0
    a = (tmp_path / "c1" / "covariance.csv").read_bytes()
    assert a == (tmp_path / "c2" / "covariance.csv").read_bytes()
    header = a.decode().splitlines()[0]
    assert header == "sep_m,covariance_db2,correlation,count"

    spec_out = tmp_path / "spec"
    assert main(["spectrum", "--config", cfg, "--covariance",
                 str(tmp_path / "c1" / "covariance.csv"), "--out", str(spec_out)]) == 0
    lines = (spec_out / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "k_rad_per_m,power_norm"
    power = np.array([float(line.split(",")[1]) for line in lines[1:]])
    assert power.sum() == pytest.approx(1.0)


def test_mc_study_output(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "mc"
    assert main(["mc-study", "--config", cfg, "--runs", "100", "--density", "0.5",
                 "--kernel", "independent", "--per-run", "--out", str(out)]) == 0
    lines = (out / "mc_study.csv").read_text().splitlines()
    assert lines[0] == "runs,bias_m,rmse_m,efficiency_gap_m,crlb_m"
    runs, bias, rmse, gap, crlb = lines[1].split(",")
    assert runs == "100"
    assert float(rmse) == pytest.approx(float(crlb), rel=0.25)
    per_run = (out / "mc_runs.csv").read_text().splitlines()
    assert len(per_run) == 101


def test_unknown_kernel_flag_fails(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    with pytest.raises(SystemExit):
        main(["simulate", "--config", cfg, "--kernel", "gauss",
              "--out", str(tmp_path / "out")])
