"""
Command-line entry point.

Settings are resolved as: flags, then the ``--config`` key=value file, then the
environment (PYCONFORMALTRAIN_WORKERS), then the ExperimentConfig defaults.
Exit code 0 when every cell succeeded, 1 when some cell failed, 2 on a
configuration or input error.
"""
import argparse
import logging
import sys
from pathlib import Path

from pyconformaltrain.exceptions import ConfigError, ConformalTrainError
from pyconformaltrain.experiment import (
    POOL_SPLITS,
    ExperimentConfig,
    default_workers,
    run_experiment,
)
from pyconformaltrain.training import OF_VARIANTS, ParamGrid

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(item) for item in text.split(",") if item.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _log_level(text: str) -> str:
    level = text.strip().upper()
    if level not in LOG_LEVELS:
        raise ValueError(f"log level must be one of {', '.join(LOG_LEVELS)}, got {text!r}")
    return level


_CONVERTERS = {
    "digits": _int_list,
    "n_sizes": _int_list,
    "replications": int,
    "seed": int,
    "grid_min": float,
    "grid_max": float,
    "grid_points": int,
    "mnist_images": Path,
    "mnist_labels": Path,
    "mnist_test_images": Path,
    "mnist_test_labels": Path,
    "pool_splits": str,
    "out": Path,
    "workers": int,
    "of_variant": str,
    "log_level": _log_level,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pyconformaltrain",
        description="Train kernel conformal predictors by OF or PE minimization on MNIST "
                    "one-vs-rest tasks and write scores, curves and summaries as CSV.",
        argument_default=argparse.SUPPRESS,
    )
    parser.add_argument("--config", type=Path, help="key=value file; flags override it")
    parser.add_argument("--digits", type=_int_list, help="digits to run, e.g. 0,1,2 (default all)")
    parser.add_argument("--n-sizes", type=_int_list, help="per-class dataset sizes (5,10,20,40)")
    parser.add_argument("--replications", type=int, help="replications per cell (10)")
    parser.add_argument("--seed", type=int, help="root seed, unsigned 64-bit (0)")
    parser.add_argument("--grid-min", type=float, help="smallest log rho (-5)")
    parser.add_argument("--grid-max", type=float, help="upper log rho bound, excluded (10)")
    parser.add_argument("--grid-points", type=int, help="number of grid points (10)")
    parser.add_argument("--mnist-images", type=Path, help="IDX image file, optionally .gz")
    parser.add_argument("--mnist-labels", type=Path, help="IDX label file, optionally .gz")
    parser.add_argument("--mnist-test-images", type=Path, help="IDX image file of the test split")
    parser.add_argument("--mnist-test-labels", type=Path, help="IDX label file of the test split")
    parser.add_argument("--pool-splits", choices=POOL_SPLITS,
                        help="MNIST splits to sample from (train)")
    parser.add_argument("--out", type=Path, help="output directory (results)")
    parser.add_argument("--workers", type=int,
                        help="parallel worker processes (PYCONFORMALTRAIN_WORKERS or 1)")
    parser.add_argument("--of-variant", choices=OF_VARIANTS,
                        help="OF training objective: leave-one-out or plain (loo)")
    parser.add_argument("--log-level", type=str.upper, choices=LOG_LEVELS, help="(INFO)")
    return parser


def read_config_file(path: Path) -> dict:
    """
    Parse a key=value config file.

    Keys are flag names without the leading dashes; ``#`` starts a comment.

    Raises:
        ConfigError: On a malformed line, an unknown key or a bad value.
    """
    settings = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    for number, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in _CONVERTERS:
            raise ConfigError(f"{path}:{number}: unknown key {key!r}")
        try:
            settings[key] = _CONVERTERS[key](value)
        except (ValueError, argparse.ArgumentTypeError) as e:
            raise ConfigError(f"{path}:{number}: bad value for {key}: {value!r}") from e
    return settings


def resolve_settings(args: dict) -> dict:
    """Merge flags over the config file over the environment."""
    settings = {"workers": default_workers()}
    config_path = args.pop("config", None)
    if config_path is not None:
        settings.update(read_config_file(config_path))
    settings.update(args)
    return settings


def config_from_settings(settings: dict) -> ExperimentConfig:
    settings = dict(settings)
    settings.pop("log_level", None)
    grid_fields = {"grid_min": "min_exp", "grid_max": "max_exp", "grid_points": "points"}
    grid_args = {field: settings.pop(key) for key, field in grid_fields.items() if key in settings}
    return ExperimentConfig(grid=ParamGrid(**grid_args), **settings)


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    try:
        settings = resolve_settings(args)
        logging.getLogger("pyconformaltrain").setLevel(settings.get("log_level", "INFO"))
        config = config_from_settings(settings)
    except ConformalTrainError as e:
        logger.error("invalid configuration: %s", e)
        return 2
    try:
        outcome = run_experiment(config)
    except (ConformalTrainError, OSError) as e:
        logger.error("experiment aborted: %s", e)
        return 2
    if not outcome.ok:
        logger.error("%d cell(s) failed", len(outcome.failed))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
