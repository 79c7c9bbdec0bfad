"""Command line entry point: ``run <config>``, ``list`` and ``snap-quad``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

from . import config as cfgmod
from .arms import (CLOSED_ONE_ARM, FOUR_ARM, ONE_ARM, AnnulusSpec, annulus_lattice, boundary_three_arm,
                   estimate_arm_probability, snap_to_vertex)
from .connectivity import HORIZONTAL, Quad, snap_quad
from .experiments import (_write_csv, appendixB_experiment, coupling_sum_experiment,
                          finite_predictor_experiment, gluing_experiment)
from .quadalgebra import perturbation_stability
from .stats import fit_power_law
from .tiling import CurveSpec

log = logging.getLogger("percolab")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
OUT_DIR_ENV = "PERCOLAB_OUT_DIR"
_PATTERNS = {"one-arm": ONE_ARM, "closed-one-arm": CLOSED_ONE_ARM, "four-arm": FOUR_ARM}


def _curve(points):
    return CurveSpec(tuple((tuple(a), tuple(b)) for a, b in zip(points[:-1], points[1:])))


def _run_gluing(c, out):
    p = c.params
    res = gluing_experiment(c.lattice.kind, tuple(p["q0"]), _curve(p["curve"]), p["s"], p["meshes"],
                            p["eps"], p["n_outer"], p["n_inner"], c.seed, c.p, c.threads)
    res.to_csv(os.path.join(out, "gluing.csv"))
    return [dict(mesh=r.mesh, s=r.s, p_hat=r.estimate.p_hat, ci=[r.estimate.ci_lo, r.estimate.ci_hi],
                 mean_y=r.mean_y, flags=r.flags) for r in res.rows]


def _run_coupling(c, out):
    p = c.params
    res = coupling_sum_experiment(c.lattice.kind, tuple(p["q0"]), _curve(p["curve"]), p["s"], c.lattice.mesh,
                                  p["n"], c.seed, p.get("r"), c.p, c.threads, p.get("n_pi4"))
    res.to_csv(os.path.join(out, "coupling.csv"))
    return [dict(n_balls=len(res.centers), flip_sum=res.flip_sum, d=res.d, pi4=res.pi4.p_hat,
                 comparison=res.comparison, disagreement=res.disagreement.p_hat,
                 telescope_failures=res.telescope_failures, parity_failures=res.parity_failures)]


def _run_predictor(c, out):
    p = c.params
    res = finite_predictor_experiment(c.lattice.kind, tuple(p["q0"]), _curve(p["curve"]), p["family_sizes"],
                                      c.lattice.mesh, p["n_train"], p["n_test"], c.seed, c.p, c.threads)
    res.to_csv(os.path.join(out, "predictor.csv"))
    return [dict(size=r.size, error=r.error.p_hat, ci=[r.error.ci_lo, r.error.ci_hi],
                 fallback_rate=r.fallback_rate, n_patterns=r.n_patterns) for r in res.rows]


def _run_appendix_b(c, out):
    p = c.params
    if c.lattice.kind != "square-bond":
        raise cfgmod.ConfigError("lattice.kind: appendix-b needs the square-bond lattice")
    res = appendixB_experiment(p["R"], p["r"], p["delta"], p["n"], c.seed, c.p, c.threads)
    res.to_csv(os.path.join(out, "appendix_b.csv"))
    res.to_pairs_csv(os.path.join(out, "appendix_b_pairs.csv"))
    off = res.offdiag.copy()
    np.fill_diagonal(off, 0.0)
    return [dict(sum_xcy=res.sum_xcy, sum_c2y2=res.sum_c2y2, x_mean=res.x_mean,
                 max_abs_offdiag=float(np.abs(off).max()))]


def _run_arms(c, out):
    p = c.params
    center = tuple(p.get("center", (0.0, 0.0)))
    pairs = [tuple(a) for a in p["annuli"]] if "annuli" in p else [(p["r"], R) for R in p["R"]]
    annuli = []
    for r, R in pairs:
        ann = AnnulusSpec(center, r, R)
        if not ann.empty:
            lat = annulus_lattice(c.lattice.kind, c.lattice.mesh, ann)
            ann = AnnulusSpec(snap_to_vertex(lat, center), r, R)
        annuli.append(ann)
    table = estimate_arm_probability(c.lattice.kind, c.lattice.mesh, c.p, annuli, _PATTERNS[p["pattern"]],
                                     p["n"], c.seed, c.threads)
    table.to_csv(os.path.join(out, "arms.csv"))
    rows = [dict(r=row.r, R=row.R, p_hat=row.estimate.p_hat, flags=row.flags) for row in table.rows]
    if p.get("fit", False):
        slope, ci = fit_power_law([r / R for r, R in pairs], [row.estimate.p_hat for row in table.rows],
                                  hits=[row.estimate.hits for row in table.rows],
                                  ns=[row.estimate.n for row in table.rows], seed=c.seed)
        rows.append(dict(slope=slope, ci=list(ci)))
    return rows


def _run_stability(c, out):
    p = c.params
    rows = perturbation_stability(c.lattice.kind, c.lattice.mesh, c.p, tuple(p["rect"]), p["deltas"], p["n"],
                                  c.seed, c.threads)
    _write_csv(os.path.join(out, "stability.csv"), ("delta", "n", "p_hat", "ci_lo", "ci_hi", "d0", "d1", "d", "flags"),
               [(r.delta, r.estimate.n, r.estimate.p_hat, r.estimate.ci_lo, r.estimate.ci_hi, r.d0, r.d1, r.d,
                 r.flags) for r in rows])
    return [dict(delta=r.delta, p_hat=r.estimate.p_hat, flags=r.flags) for r in rows]


def _run_three_arm(c, out):
    p = c.params
    rows = boundary_three_arm(c.lattice.kind, c.lattice.mesh, c.p, Quad(tuple(p["rect"]), HORIZONTAL),
                              p["deltas"], p["n"], c.seed, c.threads)
    _write_csv(os.path.join(out, "three_arm.csv"), ("delta", "n", "p_hat", "ci_lo", "ci_hi", "flags"),
               [(d, e.n, e.p_hat, e.ci_lo, e.ci_hi, f) for d, e, f in rows])
    return [dict(delta=d, p_hat=e.p_hat, flags=f) for d, e, f in rows]


@dataclass(frozen=True)
class Entry:
    name: str
    run: object
    description: str


REGISTRY = {e.name: e for e in (
    Entry("gluing", _run_gluing, "P(eps < Y_s < 1-eps) for the conditional crossing probability near a curve"),
    Entry("coupling-sum", _run_coupling, "ball-by-ball resampling coupling and its four-arm comparison"),
    Entry("finite-predictor", _run_predictor, "held-out error of a lookup predictor on family crossing vectors"),
    Entry("appendix-b", _run_appendix_b, "circuit, interface and pivotal statistics of r-squares"),
    Entry("arm-probability", _run_arms, "arm event probabilities in square annuli with optional exponent fit"),
    Entry("perturbation-stability", _run_stability, "P(crossing of Q differs from crossing of Q^delta)"),
    Entry("boundary-three-arm", _run_three_arm, "boundary closed/open/closed arms from a short bottom arc"),
)}


def run_config(c: cfgmod.ExperimentConfig):
    """Run one experiment, write its CSV and ``summary.json`` into ``c.out_dir``."""
    os.makedirs(c.out_dir, exist_ok=True)
    t0 = time.perf_counter()
    rows = REGISTRY[c.experiment].run(c, c.out_dir)
    summary = dict(experiment=c.experiment, seed=c.seed,
                   params=dict(lattice=dict(kind=c.lattice.kind, mesh=c.lattice.mesh), p=c.p, **c.params),
                   rows=rows, wall_time=time.perf_counter() - t0)
    with open(os.path.join(c.out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _parser():
    ap = argparse.ArgumentParser(prog="percolab", description="critical percolation experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int)
    r.add_argument("--out-dir")
    sub.add_parser("list", help="list registered experiments")
    s = sub.add_parser("snap-quad", help="nearest conforming quad")
    s.add_argument("rect", type=float, nargs=4, metavar=("X0", "Y0", "X1", "Y1"))
    s.add_argument("--kind", default="triangular-site", choices=["triangular-site", "square-bond"])
    s.add_argument("--mesh", type=float, default=1.0)
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "list":
        for name, e in REGISTRY.items():
            req = cfgmod.PARAM_SCHEMAS[name]["required"]
            print(f"{name:24s} {e.description} (params: {', '.join(req)})")
        return EXIT_OK
    if args.command == "snap-quad":
        try:
            q = snap_quad(args.kind, args.mesh, tuple(args.rect))
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(" ".join(repr(v) for v in q.rect))
        return EXIT_OK
    try:
        c = cfgmod.load(args.config)
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise cfgmod.ConfigError(f"--threads must be at least 1, got {args.threads}")
            over["threads"] = args.threads
        out = args.out_dir or os.environ.get(OUT_DIR_ENV)
        if out:
            over["out_dir"] = out
        c = replace(c, **over)
    except (OSError, cfgmod.ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = run_config(c)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.exception("run failed")
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    log.info("wrote %s (%.1fs)", c.out_dir, summary["wall_time"])
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
