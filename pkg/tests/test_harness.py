import json
import os
import re

import numpy as np
import pytest

from torusent.errors import ConfigError, ResourceCeilingError
from torusent.harness import (ExperimentConfig, VerifySuite, _reversed_conjugate, reference_ks_entropy,
                              run_entropy, run_freeness, run_fstats, run_verify)
from torusent.freeness import correlation_value
from torusent.measurement import build_partition
from torusent.torus_maps import build_unitary


def entropy_config(out, **kw):
    values = dict(experiment="entropy", map="cat", N=8, partitions=["equal:2", "sizes:2,6"], n_max=4, out=str(out))
    values.update(kw)
    return ExperimentConfig(**values)


def read(path):
    with open(path, "rb") as f:
        return f.read()


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"N": 8, "steps": 4})


def test_config_load_and_override(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"map": "shift", "N": 16, "partitions": ["equal:4"]}))
    config = ExperimentConfig.load(str(path)).updated(N=32, map=None, seed=3)
    assert config.map == "shift"
    assert config.N == 32
    assert config.seed == 3
    assert config.partitions == ["equal:4"]


def test_config_load_rejects_bad_json(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{N: 8")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(str(path))


@pytest.mark.parametrize("override", [
    {"N": 1}, {"map": "baker"}, {"variant": "R"}, {"partitions": []}, {"n_max": 0}, {"N": 8.0},
    {"centering": "symmetric"}, {"partitions": ["equal:3"]}, {"experiment": "plot"}, {"inject_fault": "drop"},
    {"seed": -1}, {"window": True},
])
def test_config_validation(override, tmp_path):
    with pytest.raises(ConfigError):
        entropy_config(tmp_path, **override).validate()


def test_provenance_excludes_output_directory(tmp_path):
    config = entropy_config(tmp_path)
    assert "out" not in config.provenance()
    assert str(tmp_path) not in config.to_json()


def test_reference_ks_entropy():
    assert reference_ks_entropy("cat") == pytest.approx(np.log(3 + 2 * np.sqrt(2)))
    assert reference_ks_entropy("elliptic") == 0
    assert reference_ks_entropy("shift") == 0
    assert reference_ks_entropy("haar") is None


def test_run_entropy_outputs(tmp_path):
    manifest = run_entropy(entropy_config(tmp_path))
    assert manifest.status == "ok"
    assert all(manifest.invariants.values())
    assert set(manifest.invariants) == {"entropy_bound[equal:2]", "entropy_monotonic[equal:2]",
                                        "entropy_bound[sizes:2,6]", "entropy_monotonic[sizes:2,6]"}
    for name in ["entropy_cat_N8_equal-2.csv", "entropy_cat_N8_equal-2_summary.json",
                 "plot_entropy_cat_N8_equal-2.py", "entropy_cat_N8_sizes-2-6.csv"]:
        assert name in manifest.artifacts
        assert os.path.exists(tmp_path / name)
    assert os.path.exists(tmp_path / "manifest.json")

    lines = (tmp_path / "entropy_cat_N8_equal-2.csv").read_text().splitlines()
    assert lines[0].startswith("# torusent ")
    assert "# units: nats" in lines
    assert lines[4] == "n,I_n,bound_lin,bound_sat,slope_window"
    assert len(lines) == 5 + 5
    assert float(lines[6].split(",")[1]) == pytest.approx(np.log(2))

    with open(tmp_path / "entropy_cat_N8_equal-2_summary.json") as f:
        summary = json.load(f)
    assert list(summary)[0] == "_header"
    assert list(summary)[1:] == sorted(list(summary)[1:])
    assert list(summary["_header"]) == sorted(summary["_header"])
    assert list(summary["regimes"]) == sorted(summary["regimes"])
    assert summary["_header"]["units"] == "nats"
    assert summary["K"] == 2
    assert summary["regimes"]["label"] in ("two-regime", "measurement-limited", "non-ergodic", "slow-approach")


def test_runs_are_byte_reproducible(tmp_path):
    first = run_entropy(entropy_config(tmp_path / "a", map="elliptic"))
    second = run_entropy(entropy_config(tmp_path / "b", map="elliptic"))
    assert first.artifacts == second.artifacts
    for name in first.artifacts:
        assert read(tmp_path / "a" / name) == read(tmp_path / "b" / name)


def test_plot_scripts_only_read_their_own_run(tmp_path):
    manifest = run_entropy(entropy_config(tmp_path))
    for name in manifest.artifacts:
        if name.endswith(".py"):
            text = (tmp_path / name).read_text()
            compile(text, name, "exec")
            for ref in re.findall(r"read_(?:csv|json)\('([^']+)'\)", text):
                assert ref in manifest.artifacts


def test_run_entropy_resource_ceiling(tmp_path):
    with pytest.raises(ResourceCeilingError):
        run_entropy(entropy_config(tmp_path, N=65, partitions=["equal:5"]))


def freeness_config(out, **kw):
    values = dict(experiment="freeness", map="cat", N=16, partitions=["equal:4", "equal:16"], n_max=9,
                  samples_per_n=4, out=str(out))
    values.update(kw)
    return ExperimentConfig(**values)


def test_run_freeness_outputs(tmp_path):
    manifest = run_freeness(freeness_config(tmp_path))
    assert all(manifest.invariants.values())
    for name in ["correlations_cat_N16_equal-4.csv", "decay_fit_cat_N16_equal-4.json",
                 "plot_correlations_cat_N16_equal-16.py", "rate_vs_entropy_cat_N16.json",
                 "plot_rate_vs_entropy_cat_N16.py"]:
        assert name in manifest.artifacts

    with open(tmp_path / "decay_fit_cat_N16_equal-4.json") as f:
        fit = json.load(f)
    assert fit["breaking_time"] == pytest.approx(4.0)
    assert len(fit["fit_window"]) >= 4
    assert np.isfinite(fit["A"])

    with open(tmp_path / "rate_vs_entropy_cat_N16.json") as f:
        assert json.load(f)["A"] is not None

    lines = [l for l in (tmp_path / "correlations_cat_N16_equal-4.csv").read_text().splitlines()
             if not l.startswith("#")]
    assert lines[0] == "n,sample_index,abs_C,sequence"
    assert len(lines) == 1 + 9 * 4


def test_run_freeness_parallel_matches_serial(tmp_path):
    run_freeness(freeness_config(tmp_path / "serial", partitions=["equal:4"]))
    run_freeness(freeness_config(tmp_path / "threads", partitions=["equal:4"], n_jobs=2))
    name = "correlations_cat_N16_equal-4.csv"
    serial = [l for l in read(tmp_path / "serial" / name).splitlines() if not l.startswith(b"# config")]
    threads = [l for l in read(tmp_path / "threads" / name).splitlines() if not l.startswith(b"# config")]
    assert serial == threads


@pytest.mark.parametrize("override", [{"n_max": 6}, {"partitions": ["equal:1"]}])
def test_run_freeness_rejects_short_runs(override, tmp_path):
    with pytest.raises(ConfigError):
        run_freeness(freeness_config(tmp_path, **override))


def test_run_fstats(tmp_path):
    config = ExperimentConfig(experiment="fstats", map="cat", N=16, partitions=["equal:4"], mmax=4, out=str(tmp_path))
    manifest = run_fstats(config)
    assert manifest.invariants == {"f_second_moment[equal:4]": True}
    with open(tmp_path / "fstats_cat_N16_equal-4_Q_summary.json") as f:
        summary = json.load(f)
    assert summary["count"] == 8 * 4
    assert summary["rms"] == pytest.approx(np.sqrt(0.1875))


def test_reversed_conjugate():
    qmap, P = build_unitary("cat", 16), build_partition(16, 4)
    seq = [(1, 2), (-2, 3), (2, 1)]
    c = correlation_value(qmap, P, seq).value
    assert abs(correlation_value(qmap, P, _reversed_conjugate(seq)).value - np.conj(c)) < 1e-12


@pytest.mark.slow
def test_verify_fast_suite_passes(tmp_path):
    config = ExperimentConfig(experiment="verify", out=str(tmp_path))
    suite, manifest = run_verify(config)
    assert suite.passed, suite.failing
    assert manifest.status == "ok"
    with open(tmp_path / "verify_report.json") as f:
        report = json.load(f)
    assert report["passed"]
    assert report["max_spectral_mismatch"] <= 1e-7
    assert "simplifying_conditions_cat_N64" in report["diagnostics"]
    assert report["open_deviations"] == {}


@pytest.mark.slow
def test_verify_detects_skipped_measurement():
    suite = VerifySuite(inject_fault="skip-measurement").run()
    assert not suite.passed
    assert "oracle_purity" in suite.failing


@pytest.fixture(scope="module")
def full_suite():
    return VerifySuite(suite="full").run()


def find_check(suite, name):
    return next(c for c in suite.checks if c.name == name)


@pytest.mark.slow
def test_full_suite_invariants_pass(full_suite):
    assert full_suite.passed, full_suite.failing


@pytest.mark.slow
@pytest.mark.parametrize("name", [
    "regime_two_regime_K8",
    "regime_measurement_limited_K4",
    "shift_saturation",
    "elliptic_slower",
    "decay_rate_N_independence",
    "ansatz_constant",
    "low_order_decreases_with_N",
    "haar_max_enpr_decreases_with_N",
])
def test_full_suite_reproduces(full_suite, name):
    check = find_check(full_suite, name)
    assert check.kind == "reproduction"
    assert check.passed, (check.value, check.threshold, check.detail)


@pytest.mark.slow
def test_full_suite_shift_limit_is_ln_N(full_suite):
    check = find_check(full_suite, "shift_saturation")
    assert check.threshold == pytest.approx(np.log(64))
    assert abs(check.value - np.log(64)) <= 0.05 * np.log(64)


@pytest.mark.slow
def test_full_suite_reports_open_deviations(full_suite):
    assert set(full_suite.open_deviations) == {"free_independence_signature", "f_variable_mean"}

    signature = find_check(full_suite, "free_independence_signature")
    assert not signature.passed
    assert signature.value < 0.8

    f_mean = find_check(full_suite, "f_variable_mean")
    assert not f_mean.passed
    assert f_mean.value < 0.1 * f_mean.threshold
    assert f_mean.detail["rms"] == pytest.approx(0.5)
