"""Command-line entry point: ``bcowlab {solve,verify-bounds,autonomize,sweep}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, expand_axis, load_config
from .harness import run

OUTDIR_ENV = "BCOWLAB_OUTDIR"


def _axis(text: str) -> list:
    """``5..10`` or a comma list such as ``8,16,32``."""
    if ".." in text:
        return expand_axis(text)
    vals = []
    for tok in filter(None, (t.strip() for t in text.split(","))):
        try:
            vals.append(int(tok))
        except ValueError:
            vals.append(float(tok))
    return vals


def _sweep_spec(text: str) -> dict:
    """``k=5..8;m=1,2`` into an axis mapping."""
    out = {}
    for part in filter(None, (p.strip() for p in text.split(";"))):
        name, eq, val = part.partition("=")
        if not eq:
            raise argparse.ArgumentTypeError(f"sweep entry {part!r} is not name=values")
        out[name.strip()] = _axis(val)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment file; flags given here override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help=f"CSV path (default: ${OUTDIR_ENV}/<mode>.csv)")
    common.add_argument("--jobs", type=int)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--method", choices=["block_forward", "generic"])
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="bcowlab", description=__doc__)
    sub = ap.add_subparsers(dest="mode", required=True)

    s = sub.add_parser("solve", parents=[common], help="solve one constant-coefficient problem")
    s.add_argument("--problem", help="JSON file with A, b, x_in, T")

    v = sub.add_parser("verify-bounds", parents=[common], help="bound campaign over a matrix family")
    v.add_argument("--family", help="e.g. jordan_block:N=3,eigenvalue=-1")
    v.add_argument("--sweep", type=_sweep_spec, help="e.g. 'k=5..8;m=1,2,4'")
    v.add_argument("--n-samples", type=int, dest="n_samples")

    a = sub.add_parser("autonomize", parents=[common], help="time-dependent problem via dilation")
    a.add_argument("--problem", help="registry name, e.g. cosine_drive")
    a.add_argument("--Ns", type=int, help="single grid size")
    a.add_argument("--sweep-Ns", nargs="?", const="8,16,32", type=_axis, dest="sweep_Ns",
                   help="list of grid sizes (default 8,16,32)")
    a.add_argument("--T", type=float)

    w = sub.add_parser("sweep", parents=[common], help="seeded random problems over N, k, m")
    w.add_argument("--family", help="matrix family for the random problems (default random_sparse)")
    w.add_argument("--sweep", type=_sweep_spec, help="e.g. 'N=2,4;k=5..8;m=1..3'")
    return ap


def config_from_args(args) -> ExperimentConfig:
    data = {}
    if args.config:
        data = load_config(args.config).to_dict()
        if data["mode"] != args.mode:
            raise ConfigError(f"config is for {data['mode']!r} but subcommand is {args.mode!r}", "mode")
    data["mode"] = args.mode
    for key in ("seed", "out", "jobs", "epsilon", "method", "problem", "family", "n_samples", "T"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    sweep = dict(data.get("sweep") or {})
    if getattr(args, "sweep", None):
        sweep.update(args.sweep)
    if getattr(args, "Ns", None) is not None:
        sweep["Ns"] = [args.Ns]
    if getattr(args, "sweep_Ns", None):
        sweep["Ns"] = args.sweep_Ns
    data["sweep"] = sweep
    cfg = ExperimentConfig(**data)
    if cfg.out is None:
        cfg.out = str(Path(os.environ.get(OUTDIR_ENV, "results")) / f"{cfg.mode}.csv")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"bcowlab: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        record = run(cfg)
    except OSError as exc:
        print(f"bcowlab: cannot write results: {exc}", file=sys.stderr)
        return 2
    for row in record.rows:
        status = "ERROR" if row.get("error") else ("pass" if row.get("pass_all") else "FAIL")
        line = f"cell {row['cell']}: {status}"
        if row.get("error"):
            line += f" ({row['error']})"
        print(line)
    print(record.summary())
    print(f"wrote {cfg.out}")
    return record.exit_status


if __name__ == "__main__":
    sys.exit(main())
