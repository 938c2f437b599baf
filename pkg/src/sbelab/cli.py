"""Command-line front end: configuration, dispatch, persistence, figures.

Usage::

    sbelab run --experiment <name> [--config <file>] [--set key=value ...]
               [--out <dir>] [--seed <u64>]
    sbelab describe

Configuration is a flat ``key = value`` text file (blank lines and ``#``
comments ignored) holding SimConfig fields plus ``n_samples``; ``--set``
entries override the file, ``--seed`` overrides everything.  Each run
writes ``<experiment>-<seed>.json`` (the structured summary),
``<experiment>-<seed>.<table>.csv`` per table (header row, comma
separated, UTF-8, ``.`` decimal separator, full round-trip floats), and
``<experiment>-<seed>.png`` (a rendered overview figure).  Re-running the
same build with the same settings reproduces the files byte for byte.

Exit codes: 0 every gate passed, 1 a quantitative gate failed, 2
execution error (unknown experiment, malformed configuration, unwritable
output path).
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np
import scipy

from .experiments import (
    EXPERIMENT_NAMES,
    ExperimentResult,
    ExperimentSpec,
    default_settings,
    run_experiment,
)

__all__ = ["build_spec", "emit", "main", "parse_config_file"]


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read a flat key=value configuration file into a string map."""
    settings: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, _, value = body.partition("=")
        settings[key.strip()] = value.strip()
    return settings


def build_spec(args: argparse.Namespace) -> ExperimentSpec:
    """Merge config file, --set overrides, and --seed into one spec."""
    settings: dict[str, object] = {}
    if args.config is not None:
        settings.update(parse_config_file(args.config))
    for item in args.set:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        settings[key.strip()] = value.strip()
    if args.seed is not None:
        settings["seed"] = args.seed
    n_samples = settings.pop("n_samples", None)
    return ExperimentSpec(
        args.experiment, settings, n_samples=n_samples, out_dir=args.out
    )


def _write_table(path: Path, columns: tuple[str, ...], rows) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(repr(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit(result: ExperimentResult, out_dir: str | Path) -> list[Path]:
    """Write the summary document, one CSV per table, and the figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{result.experiment}-{result.config.seed}"
    written: list[Path] = []

    doc = {
        "experiment": result.experiment,
        "config": {f.name: getattr(result.config, f.name) for f in fields(result.config)},
        "n_samples": result.n_samples,
        "passed": result.passed,
        "scalars": [
            {
                "name": s.name,
                "value": s.value,
                "stderr": s.stderr,
                "target": s.target,
                "tolerance": s.tolerance,
                "mode": s.mode,
                "passed": s.passed,
            }
            for s in result.scalars
        ],
        "tables": {t.name: f"{stem}.{t.name}.csv" for t in result.tables},
        "build": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "machine": platform.machine(),
        },
    }
    summary = out / f"{stem}.json"
    summary.write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    written.append(summary)

    for table in result.tables:
        path = out / f"{stem}.{table.name}.csv"
        _write_table(path, table.columns, table.rows)
        written.append(path)

    figure = out / f"{stem}.png"
    _render_figure(result, figure)
    written.append(figure)
    return written


def _render_figure(result: ExperimentResult, path: Path) -> None:
    """One overview plot per experiment, rendered headless."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=110)
    name = result.experiment

    def rows_of(table_name: str) -> np.ndarray | None:
        try:
            table = result.table(table_name)
        except KeyError:
            return None
        return np.asarray(table.rows) if table.rows else None

    if name == "k-constant" and (rows := rows_of("constants")) is not None:
        ax.loglog(rows[:, 0], np.abs(rows[:, 2]), "o-", label="|value - 1/12|")
        ax.loglog(rows[:, 0], rows[:, 3], "k--", label="bound 4/(pi^2 L)")
        ax.set_xlabel("level L")
        ax.legend()
    elif name == "stationarity" and (rows := rows_of("variance-pvalues")) is not None:
        ax.semilogy(rows[:, 0], rows[:, 1], "o", ms=3, label="simulated")
        ax.semilogy(rows[:, 0], rows[:, 2], "s", ms=3, label="fresh noise")
        ax.axhline(0.01, color="k", ls="--", lw=0.8, label="alpha = 0.01")
        ax.set_xlabel("mode k")
        ax.set_ylabel("variance-test p-value")
        ax.legend()
    elif name == "cole-hopf-drift":
        for label, sign in (("gap-positive", 1.0), ("gap-negative", -1.0)):
            rows = rows_of(label)
            if rows is None:
                continue
            ax.errorbar(rows[:, 0], rows[:, 1], yerr=rows[:, 2], lw=1.0, label=label)
            target = result.scalar("slope-positive").target
            ax.plot(rows[:, 0], sign * target * rows[:, 0], "k--", lw=0.8)
        ax.set_xlabel("t")
        ax.set_ylabel("mean height - log-Z gap")
        ax.legend()
    elif name == "nonlinearity-rate" and (rows := rows_of("pair-differences")) is not None:
        ax.errorbar(rows[:, 0], rows[:, 1], yerr=rows[:, 2], fmt="o-")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("cutoff N")
        ax.set_ylabel("E[D_N^2]")
    elif name == "holder" and (rows := rows_of("moment-scaling")) is not None:
        for j, label in enumerate(
            ("drift m2", "drift m4", "control m2", "control m4"), start=1
        ):
            ax.loglog(rows[:, 0], rows[:, j], "o-", label=label)
        ax.set_xlabel("lag")
        ax.legend()
    elif name == "r-decay" and (rows := rows_of("remainder")) is not None:
        ax.errorbar(rows[:, 0], rows[:, 1], yerr=rows[:, 2], fmt="o-")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("pairing level L")
        ax.set_ylabel("E[sup |R|^2]")
    elif name == "qv-drift" and (rows := rows_of("qv-estimates")) is not None:
        ax.plot(rows[:, 0], rows[:, 1], "o-", label="drift QV")
        ax.plot(rows[:, 0], rows[:, 2], "s-", label="noise QV")
        target = result.scalar("noise-qv").target
        ax.axhline(target, color="k", ls="--", lw=0.8, label="2 T ||phi||^2")
        ax.set_xlabel("epsilon")
        ax.legend()
    elif name == "chaos-identities":
        zs = [s for s in result.scalars if s.name != "isometry-max-relative-error"]
        ax.bar(range(len(zs)), [s.value for s in zs])
        ax.axhline(3.0, color="k", ls="--", lw=0.8)
        ax.axhline(-3.0, color="k", ls="--", lw=0.8)
        ax.set_xticks(range(len(zs)))
        ax.set_xticklabels([s.name for s in zs], rotation=45, ha="right", fontsize=7)
        ax.set_ylabel("z-score")
    ax.set_title(f"{result.experiment} (seed {result.config.seed})")
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": "sbelab"})
    plt.close(fig)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbelab",
        description="Run a quantitative experiment of the coupled-triple laboratory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="execute one experiment and persist results")
    run_p.add_argument("--experiment", required=True, help="experiment name")
    run_p.add_argument("--config", default=None, help="flat key=value settings file")
    run_p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one setting (repeatable; beats the config file)",
    )
    run_p.add_argument("--out", default=".", help="output directory (default: .)")
    run_p.add_argument(
        "--seed", type=int, default=None, help="master seed (beats --set and file)"
    )
    sub.add_parser("describe", help="print every experiment's default settings")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "describe":
        for name in EXPERIMENT_NAMES:
            print(f"[{name}]")
            for key, value in default_settings(name).items():
                print(f"{key} = {value}")
            print()
        return 0

    try:
        spec = build_spec(args)
        result = run_experiment(spec)
        files = emit(result, spec.out_dir)
    except Exception as exc:  # the documented CLI boundary: any failure -> 2
        print(f"error: {exc}", file=sys.stderr)
        return 2

    for s in result.scalars:
        se = "" if s.stderr is None else f" +- {s.stderr:.4g}"
        verdict = "PASS" if s.passed else "FAIL"
        print(
            f"{s.name}: {s.value:.6g}{se}  target {s.target:.6g} "
            f"tol {s.tolerance:.4g} ({s.mode})  {verdict}"
        )
    for path in files:
        print(f"wrote {path}")
    print("result: " + ("PASS" if result.passed else "FAIL"))
    return 0 if result.passed else 1
