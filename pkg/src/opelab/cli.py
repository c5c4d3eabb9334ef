"""Command line entry point ``ope-lab``.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .analysis import dominant_terms
from .errors import ConfigError, OpeLabError
from .harness import SweepConfig, aggregate, read_summary, run_sweep, summary_to_csv
from .mdp import NoiseSpec, Policy, TabularLinearMDP, dumps_mdp, population_covariances
from .plotting import emit_plots
from .synth import SynthConfig, build, parse_alpha

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def cmd_generate_mdp(args):
    try:
        cfg = SynthConfig(H=args.H, p=args.p, alpha=parse_alpha(args.alpha, args.H),
                          encoding_scale=args.scale,
                          noise=NoiseSpec("uniform", args.noise) if args.noise else NoiseSpec())
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    mdp, behavior, target, xi1 = build(cfg)
    text = dumps_mdp(mdp)
    if args.out == "-":
        sys.stdout.write(text + "\n")
    else:
        with open(args.out, "w") as f:
            f.write(text)
    if args.policies:
        with open(args.policies, "w") as f:
            json.dump({"behavior": behavior.probs.tolist(), "target": target.probs.tolist(),
                       "xi1": xi1.tolist()}, f)
    return 0


def cmd_run(args):
    try:
        with open(args.config) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {args.config}: {exc}") from exc
    cfg = SweepConfig.from_json(text)
    records = run_sweep(cfg, jobs=args.jobs)
    summary = aggregate(records)
    with open(os.path.join(cfg.output_dir, "summary.csv"), "w", newline="") as f:
        f.write(summary_to_csv(summary))
    emit_plots(summary, cfg.output_dir)
    return 0


def load_problem(doc, base_dir="."):
    """(mdp, behavior, target, xi1) from a dominant-terms config document."""
    if "instance" in doc:
        inst = dict(doc["instance"])
        try:
            H = int(inst["H"])
            cfg = SynthConfig(H=H, p=float(inst["p"]), alpha=parse_alpha(inst.get("alpha"), H),
                              encoding_scale=float(inst.get("encoding_scale", 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"field 'instance': {exc}") from exc
        return build(cfg)
    if "mdp" not in doc or "policies" not in doc:
        raise ConfigError("config needs either 'instance' or both 'mdp' and 'policies'")
    try:
        mdp = TabularLinearMDP.from_dict(_read_json(os.path.join(base_dir, doc["mdp"])))
        pol = _read_json(os.path.join(base_dir, doc["policies"]))
        return mdp, Policy(pol["behavior"]), Policy(pol["target"]), np.asarray(pol["xi1"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"field 'mdp'/'policies': {exc}") from exc


def cmd_dominant_terms(args):
    doc = _read_json(args.config)
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    mdp, behavior, target, xi1 = load_problem(doc, os.path.dirname(os.path.abspath(args.config)))
    try:
        K = int(doc.get("K", 1))
        eta = doc.get("eta", 1.0)
        sigma_r = float(doc.get("sigma_r", 1.0))
        restrict = bool(doc.get("restrict_to_span", True))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cov = population_covariances(mdp, behavior, target, xi1, eta=eta, sigma_r=sigma_r,
                                 restrict_to_span=restrict)
    terms = dominant_terms(cov, K)
    out = args.out or doc.get("out")
    stream = open(out, "w", newline="") if out and out != "-" else sys.stdout
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["h", "term_va", "term_fqi", "ratio"])
        for h, (va, fqi) in enumerate(terms.per_stage, start=1):
            writer.writerow([h, repr(float(va)), repr(float(fqi)), repr(float(fqi / va))])
        writer.writerow(["total", repr(terms.d_va), repr(terms.d_fqi), repr(terms.ratio)])
    finally:
        if stream is not sys.stdout:
            stream.close()
    return 0


def cmd_plot(args):
    summary = read_summary(args.summary)
    for path in emit_plots(summary, args.out):
        print(path)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="ope-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate-mdp", help="write the synthetic instance as MDP JSON")
    gen.add_argument("--H", type=int, required=True)
    gen.add_argument("--p", type=float, required=True)
    gen.add_argument("--alpha", help="bit string of length H (default all zeros)")
    gen.add_argument("--scale", type=float, default=1.0, help="action-encoding scale")
    gen.add_argument("--noise", type=float, default=0.0, help="uniform reward-noise half width")
    gen.add_argument("--out", default="-", help="output path ('-' for stdout)")
    gen.add_argument("--policies", help="also write behavior/target/xi1 JSON here")
    gen.set_defaults(func=cmd_generate_mdp)

    run = sub.add_parser("run", help="run a sweep from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--jobs", type=int, default=1)
    run.set_defaults(func=cmd_run)

    dom = sub.add_parser("dominant-terms", help="exact dominant error terms as CSV")
    dom.add_argument("--config", required=True)
    dom.add_argument("--out", help="output CSV path (default: config 'out' or stdout)")
    dom.set_defaults(func=cmd_dominant_terms)

    plot = sub.add_parser("plot", help="render SVG charts from a summary CSV")
    plot.add_argument("--summary", required=True)
    plot.add_argument("--out", required=True)
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OpeLabError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
