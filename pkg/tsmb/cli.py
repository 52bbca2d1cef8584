"""Command-line entry point: ``tsmb train|benchmark|compare|inspect``.

Exit codes: 0 success, 1 data or IO error, 2 usage or configuration error.
Settings come from flags, then ``--config`` (YAML or JSON), then ``TSMB_*``
environment variables (a ``.env`` file is honoured), then defaults.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from tsmb import __version__
from tsmb.analysis.report import compare_reports, write_comparison, write_reports
from tsmb.config import RunConfig
from tsmb.core.classifier import (
    TrainedClassifier,
    load_classifier,
    save_classifier,
    train_classifier,
)
from tsmb.core.entities import SchemeId
from tsmb.core.evaluator import cross_validate, run_benchmark
from tsmb.data.dataset import DataFormat, Dataset, load_dataset, load_ucr, read_series
from tsmb.exceptions import TsmbError
from tsmb.models.hmm import CovarianceType

logger = logging.getLogger("tsmb")

DEFAULT_TRAIN_SEED = 0


class UsageError(Exception):
    """Bad command-line usage detected after argument parsing."""


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------


def _run_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    data = common.add_argument_group("data")
    data.add_argument("--config", type=Path, help="YAML or JSON configuration file")
    data.add_argument("--train", dest="train_path", type=Path, help="training file")
    data.add_argument("--test", dest="test_path", type=Path, help="test file")
    data.add_argument("--format", choices=[f.value for f in DataFormat], help="file format")
    data.add_argument(
        "--data-dir", type=Path, help="archive root holding <name>/<name>_TRAIN.<ext>"
    )
    data.add_argument("--datasets", nargs="+", help="dataset names under --data-dir")
    data.add_argument("--znorm", action="store_true", default=None, help="z-normalise every series")

    run = common.add_argument_group("run")
    run.add_argument("--schemes", nargs="+", help="hmm-1c hmm-nn fcm-1c fcm-nn (default: all)")
    run.add_argument("--seed", type=int, help="master seed (falls back to TSMB_SEED)")
    run.add_argument("--folds", type=int, help="cross-validation folds (default 3)")
    run.add_argument("--jobs", type=int, help="parallel workers (default: all cores)")
    run.add_argument("--lenient-failures", action="store_true", default=None)
    run.add_argument("--reruns", type=int, help="repeat the final fit and test evaluation")
    run.add_argument("-o", "--output-dir", type=Path, help="where bundles and reports go")

    grid = common.add_argument_group("grid")
    grid.add_argument("--grid-states", nargs="+", type=int, metavar="N")
    grid.add_argument(
        "--grid-cov", nargs="+", choices=[c.value for c in CovarianceType], metavar="COV"
    )
    grid.add_argument("--grid-concepts", nargs="+", type=int, metavar="P")

    models = common.add_argument_group("models")
    models.add_argument("--hmm-delta", action="store_true", default=None)
    models.add_argument("--restarts", type=int, help="Baum-Welch restarts (default 10)")
    models.add_argument("--shared-centroids", action="store_true", default=None)
    models.add_argument("--tau", type=float, help="FCM sigmoid steepness (default 5)")
    models.add_argument("--fuzzy-m", type=float, help="fuzzification coefficient (default 2)")
    models.add_argument("--de-maxiter", type=int, help="DE generations (default 150)")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsmb",
        description="State-based time series classifiers: HMM and FCM model banks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only")

    common = _run_options()
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train one classifier bundle per scheme")
    sub.add_parser("benchmark", parents=[common], help="cross-validate, test and report")

    compare = sub.add_parser("compare", help="Spearman correlations between reports")
    compare.add_argument("reports", nargs="+", type=Path, help="report.json files")
    compare.add_argument("-o", "--output", type=Path, help="write the matrix as CSV")

    inspect = sub.add_parser("inspect", help="describe a classifier bundle")
    inspect.add_argument("bundle", type=Path)
    return parser


# ----------------------------------------------------------------------
# Configuration
# ----------------------------------------------------------------------


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Nested config values for the flags given on the command line."""
    flat = {
        ("train_path",): args.train_path,
        ("test_path",): args.test_path,
        ("format",): args.format,
        ("data_dir",): args.data_dir,
        ("datasets",): args.datasets,
        ("znorm",): args.znorm,
        ("schemes",): args.schemes,
        ("seed",): args.seed,
        ("folds",): args.folds,
        ("jobs",): args.jobs,
        ("lenient_failures",): args.lenient_failures,
        ("reruns",): args.reruns,
        ("output_dir",): args.output_dir,
        ("grid", "hmm_states"): args.grid_states,
        ("grid", "cov_types"): args.grid_cov,
        ("grid", "fcm_concepts"): args.grid_concepts,
        ("models", "hmm", "delta_observations"): args.hmm_delta,
        ("models", "hmm", "n_restarts"): args.restarts,
        ("models", "fuzzy", "shared_centroids"): args.shared_centroids,
        ("models", "fuzzy", "m"): args.fuzzy_m,
        ("models", "fcm", "tau"): args.tau,
        ("models", "fcm", "de", "max_iter"): args.de_maxiter,
    }
    nested: dict[str, Any] = {}
    for path, value in flat.items():
        if value is None:
            continue
        node = nested
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value
    return nested


def build_config(args: argparse.Namespace) -> RunConfig:
    overrides = _overrides(args)
    try:
        if args.config is not None:
            return RunConfig.from_file(args.config, **overrides)
        return RunConfig(**overrides)
    except (ValidationError, ValueError, yaml.YAMLError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def load_datasets(config: RunConfig, require_test: bool) -> list[Dataset]:
    if config.data_dir is not None and config.datasets:
        return [load_ucr(config.data_dir, name, config.format) for name in config.datasets]
    if config.train_path is None:
        raise UsageError("give --train (and --test) or --data-dir with --datasets")
    if config.test_path is not None:
        return [load_dataset(config.train_path, config.test_path, config.format)]
    if require_test:
        raise UsageError("benchmark needs a test file (--test)")
    stem = config.train_path.stem
    name = stem[: -len("_TRAIN")] if stem.upper().endswith("_TRAIN") else stem
    train = read_series(config.train_path, config.format)
    return [Dataset(name=name, train=tuple(train))]


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------


def cmd_train(config: RunConfig) -> int:
    seed = config.seed if config.seed is not None else DEFAULT_TRAIN_SEED
    for dataset in load_datasets(config, require_test=False):
        if config.znorm:
            dataset = dataset.znormalized()
        for scheme in config.scheme_ids:
            points = config.grid.points(scheme)
            if len(points) == 1:
                chosen = points[0]
            else:
                chosen = cross_validate(
                    scheme,
                    dataset.train,
                    points,
                    k=config.folds,
                    seed=seed,
                    config=config.models,
                    lenient=config.lenient_failures,
                    n_jobs=config.jobs,
                ).chosen
            classifier = train_classifier(
                scheme, dataset.train, chosen, seed, config.models, n_jobs=config.jobs
            )
            path = config.output_dir / f"{dataset.name}_{scheme}.json"
            save_classifier(classifier, path)
            logger.info(
                "Saved %s [%s] for %s to %s (%d failures)",
                scheme,
                chosen.label,
                dataset.name,
                path,
                len(classifier.failures),
            )
            print(path)
    return 0


def _report_config(config: RunConfig) -> dict[str, Any]:
    # worker count and output location do not change results
    return config.model_dump(mode="json", exclude={"jobs", "output_dir"})


def cmd_benchmark(config: RunConfig) -> int:
    if config.seed is None:
        raise UsageError("benchmark needs a seed: pass --seed or set TSMB_SEED")
    reports = []
    for dataset in load_datasets(config, require_test=True):
        reports.extend(run_benchmark(dataset, config, config.seed))
    write_reports(reports, config.output_dir, config=_report_config(config))

    for report in reports:
        title = SchemeId.parse(report.scheme).title
        accuracy = f"{report.test_accuracy:.4f}"
        if report.reruns > 1:
            accuracy += f" [{report.test_accuracy_min:.4f}, {report.test_accuracy_max:.4f}]"
        print(f"{report.dataset:<24} {title:<7} {accuracy:<26} {report.chosen_label}")
    return 0


def cmd_compare(paths: list[Path], output: Path | None) -> int:
    if len(paths) < 2:
        raise UsageError("compare needs at least two reports")
    matrix = compare_reports(paths)
    print(matrix.to_string(float_format=lambda v: f"{v:.4f}"))
    if output is not None:
        write_comparison(matrix, output)
        logger.info("Wrote correlation matrix to %s", output)
    return 0


def describe(classifier: TrainedClassifier) -> str:
    lines = [
        f"scheme:      {classifier.scheme} ({classifier.scheme.title})",
        f"hyperparams: {classifier.hyperparams.label}",
        f"classes:     {', '.join(classifier.classes)}",
        f"bank:        {len(classifier.bank)} models, {len(classifier.failures)} failures",
    ]
    for entry in classifier.entries:
        owner = f"#{entry.owner.index} {entry.owner.label!r}"
        if entry.model is None:
            lines.append(f"  {owner}: FAILED ({entry.reason})")
            continue
        data = entry.model.to_dict()
        if "n_states" in data:
            size = f"{data['n_states']} states, dim {data['dim']}, {data['cov_type']}"
        else:
            error = data["train_error"]
            mse = "n/a" if error is None else f"{error:.6g}"
            size = f"{data['P']} concepts, tau {data['tau']}, MSE {mse}"
        lines.append(f"  {owner}: {size}, {entry.iterations} iterations")
    return "\n".join(lines)


def cmd_inspect(path: Path) -> int:
    print(describe(load_classifier(path)))
    return 0


def _setup_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    # hmmlearn warns about small samples on every single-iteration fit
    logging.getLogger("hmmlearn").setLevel(logging.DEBUG if verbose else logging.ERROR)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    _setup_logging(args.verbose, args.quiet)
    load_dotenv()
    try:
        if args.command == "compare":
            return cmd_compare(args.reports, args.output)
        if args.command == "inspect":
            return cmd_inspect(args.bundle)
        config = build_config(args)
        if args.command == "train":
            return cmd_train(config)
        return cmd_benchmark(config)
    except UsageError as exc:
        logger.error("%s", exc)
        return 2
    except (TsmbError, OSError) as exc:
        logger.error("%s", exc)
        return 1


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
