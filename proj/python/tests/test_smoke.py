import math
from pathlib import Path

import numpy as np
import pytest

import binfield as bf

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def test_sawtooth_coefficient():
    c = bf.true_coefficients(bf.FieldSpec.sawtooth(), bf.Basis.fourier(), 3)
    assert c[2] == pytest.approx(1j / (2 * math.pi), abs=1e-12)


def test_batch_and_estimate():
    field = bf.FieldSpec.staircase()
    batch = bf.simulate_batch(field, bf.DeploymentDensity.uniform(), bf.NoiseModel.uniform_sym(0.5), 200_000, 11)
    assert batch["x"].shape == (200_000,)
    assert set(np.unique(batch["b"])) <= {-1, 1}
    assert np.all(np.abs(batch["t"]) <= batch["c"])
    est = bf.estimate_coefficients(batch["x"], batch["b"], 5, batch["c"])
    truth = bf.true_coefficients(field, bf.Basis.fourier(), 5)
    assert max(abs(a - b) for a, b in zip(est, truth)) < 0.02


def test_bounds_and_schedules():
    assert bf.truncation_schedule(bf.Schedule.bv(), 10_000) == 100
    value, divergent = bf.basis_deployment_integral(bf.Basis.fourier(), bf.DeploymentDensity.affine_floor(0.5), 0)
    assert not divergent and value == pytest.approx(math.log(3), abs=1e-6)
    _, divergent = bf.basis_deployment_integral(bf.Basis.fourier(), bf.DeploymentDensity.linear2x(), 0)
    assert divergent
    report = bf.mse_upper_bound(bf.FieldSpec.sawtooth(), bf.Basis.fourier(), bf.DeploymentDensity.uniform(), 1000, 8, 1.0)
    assert report["total"] == pytest.approx(report["variance_term"] + report["bias_term"])


def test_monte_carlo_and_fit():
    rows = bf.monte_carlo_mse(bf.FieldSpec.zero(), bf.DeploymentDensity.uniform(), bf.NoiseModel.zero(),
                              bf.Schedule.fixed(1), [100, 400, 1600, 6400], 200, 3)
    slope, _, r2 = bf.rate_fit([r["n"] for r in rows], [r["mse_mean"] for r in rows])
    assert -1.2 < slope < -0.8 and r2 > 0.95


def test_run_config(tmp_path):
    res = bf.run_config(str(CONFIGS / "mismatch_linear2x.json"), out=str(tmp_path))
    assert res["status"] == "FAILED-PRECONDITION"
    assert res["passed"]
    assert (tmp_path / "mismatch_linear2x.csv").exists()


def test_bad_config_raises(tmp_path):
    bad = Path(__file__).resolve().parents[2] / "tests" / "data" / "bad_config.json"
    with pytest.raises(ValueError):
        bf.run_config(str(bad), out=str(tmp_path))
