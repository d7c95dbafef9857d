"""``snn-sense <gen|commuting|compare|image> --config PATH [--seed N] [--out DIR]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
Failures print one JSON error record on stderr and, when possible, write it to
``error.json`` in the output directory.
"""

import argparse
import json
import logging
import os
import sys

from . import experiments
from .config import EXPERIMENTS, load_config
from .errors import ConfigError, PgmError, SnnSenseError
from .records import dumps_record, write_manifest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

OUT_ENV = "SNN_SENSE_OUT"

log = logging.getLogger("snn_sense")


def build_parser():
    p = argparse.ArgumentParser(prog="snn-sense", description="Spectral neural network matrix-sensing experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="TOML experiment config")
    p.add_argument("--seed", type=int, default=None, help="override the run seed")
    p.add_argument("--out", default=None, help=f"output directory (beats ${OUT_ENV} and the config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_out(cli_out, cfg):
    return cli_out or os.environ.get(OUT_ENV) or cfg.output_dir


def _classify(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG, "config"
    if isinstance(exc, (OSError, PgmError)):
        return EXIT_IO, "io"
    if isinstance(exc, (SnnSenseError, ArithmeticError, ValueError)):
        return EXIT_NUMERIC, "numeric"
    raise exc


def _error_record(exc, kind):
    rec = {"status": "error", "error_kind": kind, "type": type(exc).__name__, "message": str(exc)}
    for attr in ("line", "field", "step"):
        if getattr(exc, attr, None) is not None:
            rec[attr] = getattr(exc, attr)
    return rec


def _report_failure(exc, out_dir):
    code, kind = _classify(exc)
    rec = _error_record(exc, kind)
    print(dumps_record(rec), file=sys.stderr)
    if out_dir:
        try:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, "error.json"), "w", encoding="utf-8") as fh:
                fh.write(dumps_record(rec) + "\n")
        except OSError:
            pass
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out_dir = None
    try:
        cfg = load_config(args.config)
        if cfg.experiment != args.experiment:
            raise ConfigError(
                f"config is for experiment {cfg.experiment!r}, not {args.experiment!r}", field="experiment"
            )
        if args.seed is not None:
            cfg = cfg.with_overrides(seed=args.seed, seeds=None)
        out_dir = resolve_out(args.out, cfg)
        cfg = cfg.with_overrides(output_dir=out_dir)
        log.info("running %s into %s", cfg.experiment, out_dir)
        res = experiments.run(cfg, out_dir)
        write_manifest(cfg, os.path.join(out_dir, "manifest.json"), res.files)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        return _report_failure(exc, out_dir)
    print(json.dumps({"status": "ok", "output_dir": out_dir, "files": len(res.files)}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
