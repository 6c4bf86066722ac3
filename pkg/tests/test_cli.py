from pathlib import Path

import pandas as pd
import pytest

from pyconformaltrain.cli import (
    build_parser,
    config_from_settings,
    main,
    read_config_file,
    resolve_settings,
)
from pyconformaltrain.exceptions import ConfigError
from pyconformaltrain.training import ParamGrid


def args(*argv):
    return vars(build_parser().parse_args(list(argv)))


def test_parser_only_returns_given_flags():
    assert args("--digits", "0,3", "--grid-points", "4") == {"digits": (0, 3), "grid_points": 4}


def test_parser_rejects_bad_lists():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["--n-sizes", "5,x"])


def test_read_config_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("# experiment\nseed = 5\nn-sizes=5,10  # two sizes\n\nout=runs/a\n")
    assert read_config_file(path) == {"seed": 5, "n_sizes": (5, 10), "out": Path("runs/a")}


@pytest.mark.parametrize("text", ["colour=blue\n", "seed\n", "seed=five\n", "log-level=verbose\n"])
def test_read_config_file_errors(tmp_path, text):
    path = tmp_path / "run.conf"
    path.write_text(text)
    with pytest.raises(ConfigError):
        read_config_file(path)


def test_flags_override_file_override_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PYCONFORMALTRAIN_WORKERS", "3")
    path = tmp_path / "run.conf"
    path.write_text("seed=5\nreplications=2\nworkers=2\n")
    settings = resolve_settings(args("--config", str(path), "--seed", "7"))
    assert settings == {"workers": 2, "seed": 7, "replications": 2}
    assert resolve_settings(args())["workers"] == 3


def test_bad_worker_environment(monkeypatch):
    monkeypatch.setenv("PYCONFORMALTRAIN_WORKERS", "many")
    with pytest.raises(ConfigError):
        resolve_settings(args())


def test_config_from_settings_builds_grid():
    config = config_from_settings({"grid_min": -2.0, "grid_points": 3, "log_level": "INFO"})
    assert config.grid == ParamGrid(min_exp=-2.0, max_exp=10.0, points=3)


def test_main_writes_outputs(tmp_path, mnist_files):
    images, labels = mnist_files
    out = tmp_path / "out"
    code = main(["--mnist-images", str(images), "--mnist-labels", str(labels), "--digits", "0",
                 "--n-sizes", "5", "--replications", "1", "--grid-points", "3",
                 "--out", str(out)])
    assert code == 0
    assert len(pd.read_csv(out / "scores.csv")) == 1
    assert len(pd.read_csv(out / "curves.csv")) == 24
    assert sorted(p.name for p in out.iterdir()) == [
        "consonance.csv", "curve_summary.csv", "curves.csv", "scores.csv", "summary.csv",
        "tables.csv"]


def test_main_reports_failed_cells(tmp_path, mnist_files):
    images, labels = mnist_files
    code = main(["--mnist-images", str(images), "--mnist-labels", str(labels), "--digits", "0",
                 "--n-sizes", "7", "--replications", "1", "--out", str(tmp_path)])
    assert code == 1


def test_main_rejects_invalid_configuration(tmp_path):
    assert main(["--n-sizes", "1", "--out", str(tmp_path)]) == 2


def test_main_rejects_missing_inputs(tmp_path):
    assert main(["--out", str(tmp_path)]) == 2
    missing = str(tmp_path / "nope.gz")
    assert main(["--mnist-images", missing, "--mnist-labels", missing,
                 "--out", str(tmp_path)]) == 2


def test_main_rejects_malformed_input(tmp_path, mnist_files):
    images, labels = mnist_files
    assert main(["--mnist-images", str(labels), "--mnist-labels", str(labels),
                 "--out", str(tmp_path)]) == 2


def test_config_file_log_level(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("log-level = debug\n")
    assert read_config_file(path) == {"log_level": "DEBUG"}


def test_main_rejects_unknown_log_level_in_config_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("log-level = verbose\n")
    assert main(["--config", str(path), "--out", str(tmp_path)]) == 2
