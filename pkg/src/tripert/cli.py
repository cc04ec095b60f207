"""Command-line front end: ``tripert <command> ...``.

Exit codes: 0 pass, 1 tolerance failure, 2 assumption or model error.
"""
from __future__ import annotations

import argparse
import os
import sys
import warnings

import numpy as np

from . import estimation, pipeline
from .asymptotics import decide_regime, goldie_constants, predicted_limits
from .config import load_config
from .cramer import spectral_report
from .errors import StageError, TripertError
from .estimation import SCHEMA, TailCurve, default_t_grid, fit_exponents, tail_curve
from .perpetuity import TARGETS, simulate_paths
from . import rng as rngmod

EXIT_PASS, EXIT_FAIL, EXIT_MODEL = 0, 1, 2


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (unsigned 64-bit)")
    p.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="worker threads")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output file or directory")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="tripert", description=__doc__, parents=[common])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="Cramer root, rho, s, K and assumption flags")
    p.add_argument("model")
    p.add_argument("--r", type=float, default=None, help="moment order for E|y|^r a^alpha (default: smallest the regime needs)")

    p = sub.add_parser("constants", parents=[common], help="Kesten-Goldie constants and predicted limits")
    p.add_argument("model")
    p.add_argument("--n", type=int, default=200_000)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--convention", choices=("paper", "corrected"), default="paper")

    p = sub.add_parser("simulate", parents=[common], help="stationary draws to CSV")
    p.add_argument("model")
    p.add_argument("--n", type=int, default=10_000)

    p = sub.add_parser("tail", parents=[common], help="importance-sampled tail curve")
    p.add_argument("model")
    p.add_argument("--target", choices=[t for t in TARGETS if t != "all"], default="x1")
    p.add_argument("--side", choices=estimation.SIDES, default="right")
    p.add_argument("--tmin", type=float, default=1e3)
    p.add_argument("--tmax", type=float, default=1e10)
    p.add_argument("--points", type=int, default=12)
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--D", type=float, default=None)
    p.add_argument("--v", type=float, nargs=2, default=(1.0, 0.0), metavar=("V1", "V2"))

    p = sub.add_parser("fit", parents=[common], help="fit log p = log C - alpha log t + alphatilde log log t")
    p.add_argument("curve")
    p.add_argument("--alpha-fixed", type=float, default=None)

    for name, hlp in (("verify", "full pipeline and verdict"), ("garch", "GARCH(1,1) volatility demo")):
        p = sub.add_parser(name, parents=[common], help=hlp)
        if name == "verify":
            p.add_argument("model")
        else:
            for k, v in pipeline.GARCH_DEFAULTS.items():
                p.add_argument(f"--{k.replace('_', '-')}", dest=k, type=float, default=v)
        p.add_argument("--reps", type=int, default=100_000)
        p.add_argument("--goldie-n", type=int, default=200_000)
        p.add_argument("--tmin", type=float, default=1e3)
        p.add_argument("--tmax", type=float, default=1e10)
        p.add_argument("--points", type=int, default=12)
        p.add_argument("--convention", choices=("paper", "corrected"), default="paper")
        p.add_argument("--timestamp", action="store_true", help="add a generated= header line")
    return ap


def _opts(ns):
    return {
        "seed": getattr(ns, "seed", 0),
        "workers": getattr(ns, "workers", 1),
        "out": getattr(ns, "out", None),
        "quiet": getattr(ns, "quiet", False),
    }


def _say(quiet, *lines):
    if not quiet:
        for line in lines:
            print(line)


def _aligned(d: dict) -> list[str]:
    w = max(len(k) for k in d)
    out = []
    for k, v in d.items():
        out.append(f"{k.ljust(w)}  {v!r}" if isinstance(v, float) else f"{k.ljust(w)}  {v}")
    return out


def cmd_analyze(ns, o):
    law = load_config(ns.model)
    rep = spectral_report(law, r=ns.r, strict=False)
    d = rep.as_dict()
    print("\n".join(_aligned(d)))
    outdir = o["out"] or "."
    os.makedirs(outdir, exist_ok=True)
    pipeline.write_cramer_json(os.path.join(outdir, "cramer.json"), rep)
    hard = ("root", "ass2", "ass3", "ass4", "ass5", "tilted_y2")
    return EXIT_PASS if all(rep.flags[k].ok for k in hard) else EXIT_MODEL


def cmd_constants(ns, o):
    law = load_config(ns.model)
    rep = spectral_report(law)
    src = pipeline.pure_constants_law(law) if decide_regime(rep) == "pure" else law
    c = goldie_constants(src, rep, ns.n, o["seed"], workers=o["workers"])
    pred = predicted_limits(rep, c, ns.convention)
    if ns.csv:
        print(SCHEMA)
        print("name,value,se,method")
        print(f"c_plus,{c.c_plus!r},{c.se_plus!r},{c.method}")
        print(f"c_minus,{c.c_minus!r},{c.se_minus!r},{c.method}")
        print(f"limit_right,{pred.limit_right!r},,{pred.convention}")
        print(f"limit_left,{pred.limit_left!r},,{pred.convention}")
        print(f"alphatilde,{pred.alphatilde!r},,{pred.regime}")
    else:
        print("\n".join(_aligned({"c_plus": c.c_plus, "se_plus": c.se_plus, "c_minus": c.c_minus,
                                  "se_minus": c.se_minus, "method": c.method,
                                  "positivity": c.positivity})))
        print()
        print("\n".join(_aligned(pred.as_dict())))
    return EXIT_PASS


def cmd_simulate(ns, o):
    law = load_config(ns.model)
    spectral_report(law, strict=False)
    seed = o["seed"]

    def chunk(g, size):
        p = simulate_paths(law, size, g)
        return np.column_stack([p["x1"], p["x2"], p["x1_prime"], p["x0"], p["truncation_n"]])

    parts = rngmod.run_chunked(chunk, ns.n, seed, (rngmod.STAGES["simulate"],), o["workers"])
    data = np.vstack(parts)
    path = o["out"] or "samples.csv"
    lines = [SCHEMA, f"# seed={seed}", "x1,x2,x1_prime,x0,truncation_n"]
    lines += [f"{r[0]!r},{r[1]!r},{r[2]!r},{r[3]!r},{int(r[4])}" for r in data.tolist()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    _say(o["quiet"], f"wrote {data.shape[0]} draws to {path}")
    return EXIT_PASS


def cmd_tail(ns, o):
    law = load_config(ns.model)
    rep = spectral_report(law)
    grid = default_t_grid(ns.points, ns.tmin, ns.tmax)
    curve = tail_curve(law, rep, grid, ns.target, ns.reps, o["seed"], side=ns.side, D=ns.D, v=tuple(ns.v),
                       workers=o["workers"])
    path = o["out"] or "curve.csv"
    curve.to_csv(path)
    _say(o["quiet"], *(f"t={t:.4g}  p={p:.6g}  se={s:.3g}  ess={e:.0f}"
                       for t, p, s, e in zip(curve.t_grid, curve.p_hat, curve.se, curve.ess)))
    return EXIT_PASS


def cmd_fit(ns, o):
    curve = TailCurve.from_csv(ns.curve)
    f = fit_exponents(curve, ns.alpha_fixed)
    print("\n".join(_aligned(f.as_dict())))
    return EXIT_PASS


def _plan(ns, o, **kw):
    grid = tuple(default_t_grid(ns.points, ns.tmin, ns.tmax))
    return pipeline.ExperimentPlan(
        seed=o["seed"], workers=o["workers"], output_dir=o["out"] or "out", n_reps=ns.reps,
        goldie_n=ns.goldie_n, t_grid=grid, convention=ns.convention, timestamp=ns.timestamp, **kw,
    )


def _print_verdict(rep, quiet):
    for r in rep.rows:
        _say(quiet, f"{r.status:4s}  {r.check:24s} value={r.value:.6g}  target={r.target:.6g}  tol={r.tolerance:g}")
    _say(quiet, "verdict: " + ("PASS" if rep.passed else "FAIL"))


def cmd_verify(ns, o):
    rep = pipeline.run_verify(_plan(ns, o, model_path=ns.model))
    _print_verdict(rep, o["quiet"])
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_garch(ns, o):
    params = {k: getattr(ns, k) for k in pipeline.GARCH_DEFAULTS}
    res = pipeline.run_garch_demo(params, _plan(ns, o))
    _print_verdict(res["verdict"], o["quiet"])
    _say(o["quiet"], "", res["text"])
    return EXIT_PASS if res["verdict"].passed else EXIT_FAIL


COMMANDS = {
    "analyze": cmd_analyze,
    "constants": cmd_constants,
    "simulate": cmd_simulate,
    "tail": cmd_tail,
    "fit": cmd_fit,
    "verify": cmd_verify,
    "garch": cmd_garch,
}


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    o = _opts(ns)
    if o["quiet"]:
        warnings.simplefilter("ignore")
    try:
        return COMMANDS[ns.command](ns, o)
    except StageError as exc:
        print(f"tripert: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except TripertError as exc:
        print(f"tripert: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"tripert: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
