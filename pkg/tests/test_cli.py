import json
import os

import pytest

from torusent.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, EXIT_RESOURCE, build_parser, main, make_config


def test_parser_maps_flags_to_config_fields():
    args = build_parser().parse_args(["freeness", "--map", "elliptic", "--N", "32", "--partition", "equal:4",
                                      "--partition", "sizes:8,24", "--nmax", "12", "--samples", "5", "--rmax", "3"])
    config = make_config(args)
    assert config.experiment == "freeness"
    assert config.map == "elliptic"
    assert config.partitions == ["equal:4", "sizes:8,24"]
    assert (config.n_max, config.samples_per_n, config.r_max) == (12, 5, 3)


def test_entropy_command(tmp_path):
    code = main(["entropy", "--map", "shift", "--N", "8", "--partition", "equal:2", "--steps", "3",
                 "--out", str(tmp_path), "-q"])
    assert code == EXIT_OK
    assert os.path.exists(tmp_path / "entropy_shift_N8_equal-2.csv")
    with open(tmp_path / "manifest.json") as f:
        manifest = json.load(f)
    assert manifest["status"] == "ok"
    assert manifest["config"]["n_max"] == 3


def test_flags_override_config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"map": "shift", "N": 8, "partitions": ["equal:2"], "n_max": 3}))
    out = tmp_path / "out"
    assert main(["entropy", "--config", str(path), "--N", "16", "--out", str(out), "-q"]) == EXIT_OK
    assert os.path.exists(out / "entropy_shift_N16_equal-2.csv")


def test_fstats_command(tmp_path):
    code = main(["fstats", "--map", "cat", "--N", "16", "--partition", "equal:4", "--mmax", "3", "--variant", "P",
                 "--out", str(tmp_path), "-q"])
    assert code == EXIT_OK
    assert os.path.exists(tmp_path / "fstats_cat_N16_equal-4_P.csv")


def test_bad_partition_is_config_error(tmp_path):
    code = main(["entropy", "--N", "8", "--partition", "equal:3", "--out", str(tmp_path), "-q"])
    assert code == EXIT_CONFIG


def test_bad_config_file_is_config_error(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"N": 8, "colour": "red"}))
    assert main(["entropy", "--config", str(path), "--out", str(tmp_path), "-q"]) == EXIT_CONFIG


def test_large_entropy_run_hits_resource_ceiling(tmp_path):
    code = main(["entropy", "--N", "128", "--partition", "equal:4", "--out", str(tmp_path), "-q"])
    assert code == EXIT_RESOURCE


def test_unknown_map_is_rejected_by_parser():
    with pytest.raises(SystemExit):
        main(["entropy", "--map", "baker"])


@pytest.mark.slow
def test_injected_fault_fails_verify(tmp_path):
    code = main(["verify", "--inject-fault", "skip-measurement", "--out", str(tmp_path), "-q"])
    assert code == EXIT_INVARIANT
    with open(tmp_path / "verify_report.json") as f:
        report = json.load(f)
    assert not report["passed"]
    assert "oracle_purity" in report["failing"]
