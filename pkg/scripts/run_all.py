"""Run every config in configs/ (or a chosen subset) and print one line per run.

    python scripts/run_all.py                       # all configs, outputs under out/
    python scripts/run_all.py gluing coupling-sum --threads 2 --out-root /tmp/runs
"""
import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from percolab.cli import run_config
from percolab.config import load

ROOT = Path(__file__).resolve().parent.parent


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="config stems (default: all)")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out-root", default=str(ROOT / "out"))
    args = ap.parse_args(argv)
    paths = sorted((ROOT / "configs").glob("*.toml"))
    if args.names:
        paths = [p for p in paths if p.stem in args.names]
        missing = set(args.names) - {p.stem for p in paths}
        if missing:
            ap.error(f"unknown configs: {', '.join(sorted(missing))}")
    for path in paths:
        c = load(path)
        c = replace(c, threads=args.threads, out_dir=str(Path(args.out_root) / path.stem))
        t0 = time.perf_counter()
        summary = run_config(c)
        print(f"{path.stem:24s} {time.perf_counter() - t0:8.1f}s  {summary['rows'][-1]}", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
