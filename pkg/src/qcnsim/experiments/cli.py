"""Command line: ``qcnsim <scenario> [--config FILE] [--out DIR] ...``.

Exit status is 0 on success. On failure a one-line JSON object with the
error category and message is written to stderr and the status is nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from dataclasses import replace

from ..errors import ConfigError, QcnError
from . import config as cfgmod
from .outputs import emit_outputs
from .scenarios import default_config, run

ENV_OUTPUT_DIR = "QCNSIM_OUTPUT_DIR"
COMMANDS = {"steady": "steady", "sweep2d": "sweep2d", "fig2": "fig2", "fig3": "fig3", "fig4": "fig4",
            "preset-rb87": "preset_rb87"}
EXIT_CODES = {"config": 2, "parameters": 3, "layout": 3, "output": 5}


def parse_truncation(text: str, base: cfgmod.Truncation) -> cfgmod.Truncation:
    """``auto`` or comma-separated cutoffs ``n_a,n_b[,n_d1[,n_d2]]``."""
    if text.strip().lower() == "auto":
        return replace(base, mode="auto")
    try:
        levels = [int(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"--truncation must be 'auto' or n_a,n_b[,n_d1[,n_d2]], got {text!r}") from None
    if not 2 <= len(levels) <= 4:
        raise ConfigError("--truncation needs two to four cutoffs")
    names = ("n_a", "n_b", "n_d1", "n_d2")
    return replace(base, mode="fixed", **dict(zip(names, levels)))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcnsim", description="V-emitter two-cavity cross-nonlinearity simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file (INI-style sections)")
    common.add_argument("--out", help=f"output directory (overrides ${ENV_OUTPUT_DIR} and the config)")
    common.add_argument("--rtol", type=float, help="relative tolerance of time integration")
    common.add_argument("--truncation", help="'auto' or fixed cutoffs n_a,n_b[,n_d1[,n_d2]]")
    common.add_argument("--jobs", type=int, help="worker processes for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args) -> cfgmod.RunConfig:
    scenario = COMMANDS[args.command]
    cfg = default_config(scenario)
    if args.config:
        cfg = cfgmod.load(args.config, cfg)
        if cfg.scenario != scenario:
            cfg = replace(cfg, scenario=scenario)
    changes = {}
    out = args.out or os.environ.get(ENV_OUTPUT_DIR)
    if out:
        changes["output_dir"] = out
    if args.rtol is not None:
        changes["rtol"] = args.rtol
    if args.jobs is not None:
        changes["jobs"] = args.jobs
    if args.truncation:
        changes["truncation"] = parse_truncation(args.truncation, cfg.truncation)
    return replace(cfg, **changes)


def _fail(category: str, message: str, code: int) -> int:
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            return 0
        return _fail("usage", "invalid command line", 2)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            result = run(cfg)
        written = emit_outputs(result, cfg.output_dir)
    except QcnError as exc:
        return _fail(exc.category, str(exc), EXIT_CODES.get(exc.category, 4))
    except MemoryError as exc:
        return _fail("memory", str(exc), 4)
    summary = {"scenario": cfg.scenario, "output_dir": str(cfg.output_dir),
               "files": sorted(p.name for p in written.values()), "report": result.report}
    print(json.dumps(summary, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
