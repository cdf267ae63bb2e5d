"""Command-line entry point for stochastic Keller-Segel simulations.

    python app.py convergence --config configs/test1.json --samples 50 --seed 7 --out out/
    python app.py selftest
"""
from pathlib import Path
from typing import List, Optional
import argparse
import logging
import sys
from logging.handlers import RotatingFileHandler

from joblib import cpu_count
from pydantic import ValidationError

from results import LOG_FILE, env_int, env_str, write_csv, write_json
from sks_api.experiments import (
    blowup_study,
    convergence_study,
    inverse_k_study,
    run_field_frame,
    run_frame,
    single_run,
)
from sks_api.models import CliConfig, ExperimentConfig
from sks_api.presets import get_preset, list_presets
from sks_api.scheme import StepFailure
from sks_api.selftest import run_selftest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

SUBCOMMAND_KIND = {
    "run": "run",
    "convergence": "convergence",
    "inverse-k": "inverse_k",
    "blowup": "blowup",
}


def configure_logging(verbosity: int = 0, log_file: Optional[str] = None):
    """File handler at DEBUG plus a console handler whose level follows -v / -q."""
    log_file = log_file or env_str("SKS_LOG_FILE") or LOG_FILE
    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    for handler in list(root.handlers):
        if getattr(handler, "_sks_handler", False):
            root.removeHandler(handler)
            handler.close()

    # File handler with rotation (10MB max, keep 3 backups)
    file_handler = RotatingFileHandler(log_file, maxBytes=10 * 1024 * 1024, backupCount=3)
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter(
        '%(asctime)s [%(levelname)8s] [%(name)s] %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    ))

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.DEBUG if verbosity > 0 else logging.WARNING if verbosity < 0 else logging.INFO)
    console_handler.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))

    for handler in (file_handler, console_handler):
        handler._sks_handler = True
        root.addHandler(handler)


class CliUsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliUsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", dest="config_path", help="JSON experiment config")
    common.add_argument("--preset", choices=list_presets(), help="Use a named preset instead of --config")
    common.add_argument("--samples", type=int, help="Monte Carlo sample count J")
    common.add_argument("--seed", type=int, help="Base seed (falls back to SKS_SEED)")
    common.add_argument("--out", help="Output directory (falls back to SKS_OUT_DIR)")
    common.add_argument("--threads", type=int, help="Parallel samples (default: available cores)")
    common.add_argument("--k0", type=float, help="Wiener path resolution, e.g. 0.00048828125")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("-q", "--quiet", action="count", default=0)

    parser = _ArgumentParser(prog="sks", description="Stochastic Keller-Segel finite element experiments")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("run", parents=[common], help="One realisation; writes run.csv and run_field.csv")
    sub.add_parser("convergence", parents=[common], help="Strong convergence study (Tests 1 and 3)")
    sub.add_parser("inverse-k", parents=[common], help="Error growth for k << h^2 (Test 2)")
    sub.add_parser("blowup", parents=[common], help="Blow-up of E[u] (Test 4)")
    sub.add_parser("selftest", parents=[common], help="Assembly oracle, mass conservation and heat reduction checks")
    return parser


def _cli_config(args: argparse.Namespace) -> CliConfig:
    return CliConfig(
        subcommand=args.subcommand,
        config_path=args.config_path,
        seed=args.seed if args.seed is not None else env_int("SKS_SEED"),
        samples=args.samples,
        out=args.out or env_str("SKS_OUT_DIR"),
        threads=args.threads if args.threads is not None else env_int("SKS_THREADS"),
        k0=args.k0,
        verbosity=args.verbose - args.quiet,
    )


def load_experiment(cli: CliConfig, preset: Optional[str] = None) -> ExperimentConfig:
    """File (or preset) values, then command-line and environment overrides.

    Raises:
        FileNotFoundError: If the config file does not exist
        ValueError: If neither a config nor a preset is given
        ValidationError: If the merged config is invalid
    """
    if cli.config_path:
        path = Path(cli.config_path)
        if not path.is_file():
            raise FileNotFoundError(f"Config file not found: {path}")
        base = ExperimentConfig.model_validate_json(path.read_text())
    elif preset:
        base = get_preset(preset)
    else:
        raise ValueError(f"'{cli.subcommand}' needs --config PATH or --preset NAME")

    updates = {"kind": SUBCOMMAND_KIND[cli.subcommand]}
    if cli.seed is not None:
        updates["base_seed"] = cli.seed
    if cli.samples is not None:
        updates["J"] = cli.samples
    if cli.out is not None:
        updates["out_dir"] = cli.out
    if cli.threads is not None:
        updates["threads"] = cli.threads
    if cli.k0 is not None:
        updates["k0"] = cli.k0
    merged = base.model_dump()
    merged.update(updates)
    return ExperimentConfig.model_validate(merged)


def _dispatch(cli: CliConfig, config: ExperimentConfig) -> int:
    threads = config.threads or cpu_count()
    out = config.out_dir

    if cli.subcommand == "run":
        mesh, result = single_run(config)
        write_csv(run_frame(result), out, "run.csv")
        write_csv(run_field_frame(mesh, result), out, "run_field.csv")
        return EXIT_OK

    if cli.subcommand in ("convergence", "inverse-k"):
        study = convergence_study if cli.subcommand == "convergence" else inverse_k_study
        report = study(config, threads=threads)
        write_csv(report.to_frame(), out, f"{config.kind}.csv")
        if report.all_excluded:
            logger.error(f"[RUN] A level has no usable samples ({report.excluded} excluded)")
            return EXIT_NUMERICAL
        return EXIT_OK

    report = blowup_study(config, threads=threads)
    write_csv(report.to_frame(), out, "blowup.csv")
    write_csv(report.series_frame(), out, "blowup_series.csv")
    for i, tM in enumerate(report.final_times):
        write_csv(report.field_frame(i), out, f"blowup_field_{tM:g}.csv")
    if report.control is not None:
        write_csv(report.control.to_frame(), out, "blowup_control.csv")
    if report.excluded >= report.J:
        logger.error("[BLOWUP] Every sample excluded")
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliUsageError as e:
        print(e, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_CONFIG

    try:
        cli = _cli_config(args)
    except (ValidationError, ValueError) as e:
        print(f"Invalid arguments: {e}", file=sys.stderr)
        return EXIT_CONFIG
    configure_logging(cli.verbosity)

    if cli.subcommand == "selftest":
        results = run_selftest()
        return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL

    try:
        config = load_experiment(cli, preset=args.preset)
    except FileNotFoundError as e:
        logger.error(f"[CONFIG] {e}")
        return EXIT_CONFIG
    except (ValidationError, ValueError) as e:
        logger.error(f"[CONFIG] Invalid configuration: {e}")
        return EXIT_CONFIG
    logger.info(f"[CONFIG] {cli.subcommand} '{config.test_id}': J={config.J}, seed={config.base_seed}, out={config.out_dir}")
    write_json(config, config.out_dir)

    try:
        return _dispatch(cli, config)
    except StepFailure as e:
        logger.error(f"[RUN] Numerical failure: {e}")
        return EXIT_NUMERICAL
    except ValueError as e:
        logger.error(f"[CONFIG] {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
