"""Command line: ``planecal {simulate,calibrate,compare}``.

Exit status: 0 success, 1 input or configuration error, 2 numerical
non-convergence (or divergence).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import RunConfig, load_config, parse_config
from .errors import (CalibrationError, ConfigError, DegenerateGeometryError, GenerationError,
                     InvalidInputError)
from .fileio import read_samples, write_curve, write_json, write_samples
from .pipeline import calibrate, compare
from .simulate import generate

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NONCONVERGED = 2
# report flag: validation RMSE reduced by at least this fraction
TARGET_REDUCTION = 0.70

log = logging.getLogger("planecal")


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {k: v for k, v in (("seed", args.seed), ("method", args.method),
                                   ("samples", args.samples), ("out", args.out)) if v is not None}
    if overrides:
        data = cfg.to_dict()
        data.update(overrides)
        cfg = parse_config(data, args.config or "<overrides>")
    return cfg


def _samples_path(cfg: RunConfig) -> Path:
    if not cfg.samples:
        raise ConfigError("samples: no sample CSV given (use --samples or the config's samples field)")
    return Path(cfg.samples)


def cmd_simulate(cfg: RunConfig) -> int:
    scenario = cfg.scenario_obj()
    samples, truth = generate(scenario)
    out = Path(cfg.out)
    csv_path = Path(cfg.samples) if cfg.samples else out / "samples.csv"
    write_samples(csv_path, samples)
    gt_path = csv_path.with_name(csv_path.stem + "_truth.json")
    write_json(gt_path, {"ground_truth": truth.to_dict(), "run_config": cfg.to_dict()})
    print(f"simulate: {len(samples)} samples, sigma={scenario.noise_sigma} mm, seed={cfg.seed} "
          f"-> {csv_path}")
    return EXIT_OK


def _report_doc(report, cfg: RunConfig) -> dict:
    doc = report.to_dict()
    doc["rmse_reduction"] = report.reduction
    doc["meets_target_reduction"] = bool(report.reduction >= TARGET_REDUCTION)
    doc["run_config"] = cfg.to_dict()
    return doc


def cmd_calibrate(cfg: RunConfig) -> int:
    samples = read_samples(_samples_path(cfg))
    report = calibrate(samples, cfg.nominal_table(), cfg.method, cfg.pipeline_config())
    out = Path(cfg.out)
    write_json(out / f"report_{cfg.method}.json", _report_doc(report, cfg))
    write_curve(out / f"curve_{cfg.method}.csv", report.curve)
    key = "validation" if "validation_after" in report.metrics else "train"
    b, a = report.metrics[f"{key}_before"], report.metrics[f"{key}_after"]
    print(f"calibrate[{cfg.method}]: {key} RMSE {b.rmse:.6f} -> {a.rmse:.6f} mm "
          f"({100 * report.reduction:.1f}% reduction), converged={report.converged}")
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def cmd_compare(cfg: RunConfig) -> int:
    samples = read_samples(_samples_path(cfg))
    result = compare(samples, cfg.nominal_table(), cfg.methods, cfg.pipeline_config())
    out = Path(cfg.out)
    doc = result.to_dict()
    doc["reports"] = {m: _report_doc(r, cfg) for m, r in result.reports.items()}
    doc["run_config"] = cfg.to_dict()
    write_json(out / "comparison.json", doc)
    table = result.table()
    (out / "comparison.txt").write_text(table + "\n", encoding="utf-8")
    for m, r in result.reports.items():
        write_curve(out / f"curve_{m}.csv", r.curve)
    print(table)
    ok = not result.errors and all(r.converged for r in result.reports.values())
    return EXIT_OK if ok else EXIT_NONCONVERGED


COMMANDS = {"simulate": cmd_simulate, "calibrate": cmd_calibrate, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="planecal", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "generate synthetic dial samples and a ground-truth sidecar",
        "calibrate": "identify D-H corrections with one method",
        "compare": "run several methods on the same samples",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="YAML run config (defaults used when omitted)")
        p.add_argument("--seed", type=int)
        p.add_argument("--method", help="ekf, sckf, lm or sckf_lm")
        p.add_argument("--samples", help="sample CSV (output for simulate, input otherwise)")
        p.add_argument("--out", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, InvalidInputError, DegenerateGeometryError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CalibrationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
