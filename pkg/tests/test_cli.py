import json

import numpy as np
import pytest
from click.testing import CliRunner

from noonsim.cli import main
from noonsim.fock import StateVector
from noonsim.fringes import FringeData, FringeFit


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(main, [str(a) for a in args], catch_exceptions=False)


def test_build_target(runner):
    res = invoke(runner, "build", "--n", 3)
    assert res.exit_code == 0
    out = json.loads(res.output)
    target = StateVector.from_dict(out["target"])
    assert [abs(a) for _, a in target] == pytest.approx([2**-0.5, 2**-0.5])
    assert out["chain"]["fidelity"] == pytest.approx(1.0, abs=1e-12)
    assert out["chain"]["reference_success"] == pytest.approx(0.7249, abs=1e-4)


def test_build_other_n_has_no_chain(runner):
    out = json.loads(invoke(runner, "build", "--n", 2).output)
    assert "chain" not in out


@pytest.mark.parametrize("n", [7, 0])
def test_build_rejects_n(runner, n):
    res = invoke(runner, "build", "--n", n)
    assert res.exit_code == 2


def test_scan_fit_pipeline(runner, tmp_path):
    csv = tmp_path / "ideal.csv"
    assert invoke(runner, "scan", "--preset", "fig2c", "--out", csv).exit_code == 0
    fit = json.loads(invoke(runner, "fit", "--input", csv, "--k", 3).output)
    assert fit["fit"]["visibility"] == pytest.approx(1.0, abs=1e-10)

    rates = tmp_path / "rates.json"
    assert invoke(runner, "background", "--emit-rates", rates, "--out", tmp_path / "bg.json").exit_code == 0
    noisy = tmp_path / "noisy.csv"
    assert invoke(runner, "scan", "--preset", "fig2c", "--rates", rates, "--out", noisy).exit_code == 0
    fit = json.loads(invoke(runner, "fit", "--input", noisy).output)
    assert fit["fit"]["visibility"] < 1.0


def test_scan_deterministic(runner, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    invoke(runner, "--seed", 9, "scan", "--preset", "fig2c", "--out", a)
    invoke(runner, "scan", "--preset", "fig2c", "--seed", 9, "--out", b)
    assert a.read_bytes() == b.read_bytes()
    assert FringeData.from_csv(a.read_text()).sampled is not None


def test_scan_aliasing_exit_code(runner):
    assert invoke(runner, "scan", "--preset", "fig2c", "--count", 5).exit_code == 3


def test_scan_config_errors(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert invoke(runner, "scan", "--config", bad).exit_code == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"circuit": [{"kind": "mirror"}]}))
    assert invoke(runner, "scan", "--config", cfg).exit_code == 2
    assert invoke(runner, "scan", "--preset", "fig2a").exit_code == 2


def test_scan_from_config(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "analyzer": {"basis_deg": 45, "detectors": [3, 0]},
        "pattern": [3, 0],
        "scan": {"count": 12, "interval_s": 300},
        "circuit": [{"kind": "qwp", "theta_deg": 45}, {"kind": "phase_shift", "phi": "scan"}],
        "scale": 9.0,
    }))
    res = invoke(runner, "scan", "--config", cfg)
    data = FringeData.from_csv(res.output)
    # (1 + cos 3phi)/8 with the 2/9 three-detector fan-out
    np.testing.assert_allclose(data.mean, 9.0 * (1 + np.cos(3 * data.phi)) / 8 * 2 / 9, atol=1e-12)


def test_background_command(runner):
    out = json.loads(invoke(runner, "background").output)
    amps = {c["harmonic"]: c["amplitude"] for c in out["decomposition"]["components"]}
    assert amps[3] < amps[1] < amps[2]
    assert amps[0] == pytest.approx(22.0)


def test_reproduce_writes_bundle(runner, tmp_path):
    res = invoke(runner, "reproduce", "fig2d", "--seed", 1, "--out", tmp_path / "d")
    assert res.exit_code == 0
    files = {p.name for p in (tmp_path / "d").iterdir()}
    assert {"data.csv", "fit.json", "raw.csv", "background.csv", "metadata.json"} <= files
    data = FringeData.from_csv((tmp_path / "d" / "data.csv").read_text())
    assert data.sampled is not None and data.sampled.dtype == float
    FringeFit.from_dict(json.loads((tmp_path / "d" / "fit.json").read_text()))


def test_reproduce_fig3b_interval(runner, tmp_path):
    invoke(runner, "reproduce", "fig3b", "--out", tmp_path / "b")
    assert json.loads((tmp_path / "b" / "metadata.json").read_text())["interval_s"] == 300.0


def test_reproduce_unknown_preset(runner):
    res = invoke(runner, "reproduce", "figX")
    assert res.exit_code == 2
    assert "fig2a" in res.output and "fig3b" in res.output
