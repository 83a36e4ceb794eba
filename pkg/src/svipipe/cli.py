"""Command-line entry point: ``svipipe <command> --config FILE [--jobs N] [--out DIR]``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import DEFAULT_CONFIG_TEXT, ConfigError, PipelineConfig, load_config

COMMANDS = ("subsample", "orthorectify", "detect", "filter", "geocode", "aggregate", "analyze", "run",
            "export-figures")


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=Path, help="pipeline configuration file (TOML)")
    shared.add_argument("--jobs", type=int, help="worker processes for per-frame work")
    shared.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="svipipe", description=__doc__)
    parser.add_argument("--print-config", action="store_true", help="print the default configuration and exit")
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[shared])
        if name in ("analyze", "export-figures"):
            p.add_argument("observations", nargs="*", type=Path,
                           help="observation CSVs (default: observation_files, else <out>/observations.csv)")
    return parser


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    changes = {}
    if args.jobs is not None:
        changes["jobs"] = args.jobs
    if args.out is not None:
        changes["output_dir"] = args.out
    return dataclasses.replace(cfg, **changes)


def _observation_files(args, cfg: PipelineConfig) -> list[Path]:
    return list(args.observations or cfg.observation_files or [Path(cfg.output_dir) / pipeline.OBSERVATIONS_CSV])


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_config:
        sys.stdout.write(DEFAULT_CONFIG_TEXT)
        return 0
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _config(args)
        cmd = args.command
        if cmd == "run":
            m = pipeline.run_survey(cfg)
            print(m.to_json(), end="")
        elif cmd == "subsample":
            print(f"kept {len(pipeline.run_subsample(cfg))} frames")
        elif cmd == "orthorectify":
            print(f"wrote {pipeline.run_orthorectify(cfg)} views")
        elif cmd == "detect":
            print(f"{pipeline.run_detect(cfg)} raw detections")
        elif cmd == "filter":
            print(f"{pipeline.run_filter(cfg)} detections kept")
        elif cmd == "geocode":
            print(f"{pipeline.run_geocode(cfg)} detections geocoded")
        elif cmd == "aggregate":
            print(f"{len(pipeline.run_aggregate(cfg))} observations")
        elif cmd == "analyze":
            cfg.validate(("attributes_file",))
            res = pipeline.run_analysis(_observation_files(args, cfg), cfg.attributes_file, cfg.encoding,
                                        cfg.output_dir, cfg.reference_file)
            for column, model in res.models.items():
                print(f"{column}: n={model.n_observations} R2={model.r_squared:.3f} "
                      f"significant={sorted(model.significant())}")
            print(f"correlation: {res.correlation}")
        elif cmd == "export-figures":
            cfg.validate()
            series = pipeline.run_export_figures(_observation_files(args, cfg), cfg.output_dir,
                                                 cfg.reference_file, cfg.encoding.excluded_dates)
            print(f"{len(series)} surveys exported")
    except (ConfigError, pipeline.PipelineError, ValueError, OSError) as exc:
        print(f"svipipe: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
