"""Shared helpers for the experiment scripts: write a config and hand it to the CLI."""

import argparse
from pathlib import Path

from twopixel import cli


def parser(description, default_out):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default=default_out, help="output directory")
    p.add_argument("--seed", type=int, default=2024, help="master seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--paper-scale", action="store_true", help="full-length iteration budgets")
    p.add_argument("--force", action="store_true", help="rerun completed outputs")
    return p


def launch(command, spec, args, out=None):
    out = Path(out or args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = out / "config.json"
    config.write_text(spec.with_seed(args.seed).to_json() + "\n")
    argv = [command, "--config", str(config), "--out", str(out), "--jobs", str(args.jobs)]
    if args.paper_scale:
        argv.append("--paper-scale")
    if args.force:
        argv.append("--force")
    return cli.main(argv)
