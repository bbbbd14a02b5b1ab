"""The surpeval command line: surprisal, fit, meta, perplexity, plot, pipeline.

Exit codes: 0 on success, 1 on configuration or validation errors, 2 on
partial failure (some dataset or engine failed; the manifest lists the
failures and the remaining outputs are intact).
"""

import argparse
import json
import sys
import time

import matplotlib
import numpy
import scipy

from .. import __version__
from ..textio import sha256_file
from .config import ConfigFileError, load_config
from .plots import stage_plot
from .stages import (StageError, stage_fit, stage_meta, stage_perplexity,
                     stage_surprisal)

STAGES = {
    "surprisal": stage_surprisal,
    "fit": stage_fit,
    "perplexity": stage_perplexity,
    "meta": stage_meta,
    "plot": stage_plot,
}
PIPELINE_ORDER = ("surprisal", "fit", "perplexity", "meta", "plot")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surpeval",
        description="surprisal evaluation pipeline: engines, mixed-model "
                    "fits, meta-analyses, figures")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
            ("surprisal", "compute word surprisal for every dataset item"),
            ("fit", "fit the mixed-effects regressions and tabulate AIC"),
            ("meta", "run the architecture/scale meta-regressions"),
            ("perplexity", "compute word-level corpus perplexity per engine"),
            ("plot", "render the AIC figures as SVG"),
            ("pipeline", "run all stages in order")):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", required=True, help="JSON run config")
        cmd.add_argument("--out", default=None, help="output directory override")
        cmd.add_argument("--seed", type=int, default=None, help="seed override")
        cmd.add_argument("--workers", type=int, default=None,
                         help="worker count override")
    return parser


def _write_manifest(cfg, stage_records) -> None:
    manifest = {
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "versions": {
            "surpeval": __version__,
            "python": sys.version.split()[0],
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__,
        },
        "stages": stage_records,
    }
    path = cfg.out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, out_dir=args.out, seed=args.seed,
                          workers=args.workers)
    except (ConfigFileError, ValueError) as exc:
        print(f"surpeval: config error: {exc}", file=sys.stderr)
        return 1

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    if args.command == "pipeline":
        names = [n for n in PIPELINE_ORDER
                 if n != "perplexity" or cfg.perplexity_corpus is not None]
    else:
        names = [args.command]

    stage_records = {}
    partial = False
    for name in names:
        start = time.monotonic()
        try:
            result = STAGES[name](cfg)
        except (StageError, ConfigFileError, ValueError, OSError) as exc:
            print(f"surpeval: {name}: {exc}", file=sys.stderr)
            stage_records[name] = {"status": "error", "message": str(exc),
                                   "seconds": time.monotonic() - start}
            _write_manifest(cfg, stage_records)
            return 1
        elapsed = time.monotonic() - start
        record = {
            "status": "ok" if result.ok else "partial",
            "seconds": elapsed,
            "files": {str(p.relative_to(cfg.out_dir)): sha256_file(p)
                      for p in result.files},
        }
        if result.failures:
            record["failures"] = dict(sorted(result.failures.items()))
            partial = True
            for key, message in sorted(result.failures.items()):
                print(f"surpeval: {key}: {message}", file=sys.stderr)
        stage_records[name] = record
    _write_manifest(cfg, stage_records)
    return 2 if partial else 0


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
