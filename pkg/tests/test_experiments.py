import csv
import json

import numpy as np
import pytest
from scipy import integrate, stats

from voldens.experiments import (
    ExperimentConfig, default_config, exp_bias_expansion, exp_bound_diagnostics,
    exp_expectation_identity, exp_full_pipeline, run_suite, smoothed_density,
)
from voldens.kernels import default_kernel, kernel_w
from voldens.simmodel import make_model


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    meta = [l for l in lines if l.startswith("#")]
    rows = list(csv.reader(l for l in lines if not l.startswith("#")))
    return meta, rows[0], rows[1:]


def test_smoothed_density_against_quad():
    m = make_model("expou")
    spec = default_kernel()
    h, x = 0.5, 0.3
    ref, _ = integrate.quad(lambda u: kernel_w(spec, (x - u) / h) * stats.norm.pdf(u) / h,
                            -12, 12, limit=400, epsabs=1e-12)
    assert smoothed_density(m, spec, h, x)[0] == pytest.approx(ref, abs=1e-9)


def test_smoothed_density_point_mass():
    m = make_model("constant", sigma2=2.0)
    x = np.array([-1.0, 0.0, 2.0])
    expect = kernel_w(default_kernel(), (x - np.log(2.0)) / 0.8) / 0.8
    assert smoothed_density(m, default_kernel(), 0.8, x) == pytest.approx(expect, abs=1e-15)


@pytest.mark.parametrize("variant", ["ecf", "direct"])
def test_identity_suite_variants(variant):
    cfg = ExperimentConfig(n_schedule=(500,), h=0.8, replicates=40, grid=(-2, 2, 5),
                           variant=variant, seed=5)
    rep = exp_expectation_identity(cfg)
    assert rep.criteria["max_abs_z"]["passed"]
    assert len(rep.rows) == 5


def test_identity_point_mass():
    cfg = ExperimentConfig(model="constant", n_schedule=(500,), h=0.8, replicates=40,
                           grid=(-2, 2, 5), seed=6)
    rep = exp_expectation_identity(cfg)
    assert rep.criteria["max_abs_z"]["passed"]
    assert all(np.isnan(r["f_true"]) for r in rep.rows)


def test_bias_suite_structure():
    rep = exp_bias_expansion(default_config("bias"))
    assert {"ratio_band", "ratio_monotone", "inflection_x=1"} == set(rep.criteria)
    assert rep.criteria["ratio_monotone"]["passed"]
    assert len(rep.rows) == 8
    at0 = [r for r in rep.rows if r["x"] == 0.0]
    assert at0[0]["predicted"] == pytest.approx(3 * (-1 / np.sqrt(2 * np.pi)) * 0.36, rel=1e-5)


def test_bounds_suite():
    rep = exp_bound_diagnostics()
    assert rep.passed, rep.criteria
    with pytest.raises(ValueError):
        exp_bound_diagnostics(h_schedule=(0.5, 0.1))


def test_pipeline_small_and_deterministic():
    cfg = ExperimentConfig(n_schedule=(300, 1200), replicates=3, grid=(-2, 2, 9), seed=1)
    a = exp_full_pipeline(cfg)
    b = exp_full_pipeline(ExperimentConfig(n_schedule=(300, 1200), replicates=3,
                                           grid=(-2, 2, 9), seed=1, threads=0))
    assert a.mise == b.mise and a.records == b.records
    assert set(a.mise) == {300, 1200}
    assert a.records[0]["Delta"] == pytest.approx(300 ** -0.5)


def test_pipeline_point_mass_concentrates():
    cfg = ExperimentConfig(model="constant", n_schedule=(2000,), replicates=3, h=0.8,
                           grid=(-3, 3, 13), seed=2)
    res = exp_full_pipeline(cfg)
    assert res.mise == {}
    assert res.ise_smooth[2000] < 1e-3
    peak = max(res.records, key=lambda r: r["mean_fhat"])
    assert abs(peak["x"]) <= 0.5


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(replicates=1)
    with pytest.raises(ValueError):
        ExperimentConfig(n_schedule=(100, 50))
    with pytest.raises(ValueError):
        default_config("nope")


def test_run_suite_outputs(tmp_path):
    rep = run_suite("bounds", output_dir=tmp_path)
    meta, header, rows = read_csv(tmp_path / "bounds.csv")
    assert header == ["h", "gamma0_norm", "l2_norm", "sup_ratio"]
    assert meta[0].startswith("# voldens") and "# suite=bounds" in meta
    assert len(rows) == 3 and float(rows[0][0]) == 0.5
    summary = json.loads((tmp_path / "bounds_summary.json").read_text())
    assert summary["passed"] == rep.passed
    assert set(summary["criteria"]) == set(rep.criteria)
    first = (tmp_path / "bounds.csv").read_bytes()
    run_suite("bounds", output_dir=tmp_path)
    assert (tmp_path / "bounds.csv").read_bytes() == first
