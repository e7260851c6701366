"""Command-line interface: ``tvnet {solve,stream,synth,eval,interpolate}``.

Exit codes: 0 success, 1 input/IO error, 2 solver hit ``--max-iter``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import io as tvio
from .admm import solve
from .data import (InputError, ParseError, Penalty, PenaltySpec, SolverConfig,
                   bucket_times, center_columns, empirical_covariances,
                   load_timeseries)
from .evaluation import (aic_select, f1_score, generate_scenario,
                         load_scenario, save_scenario, td_ratio,
                         temporal_deviation)
from .extensions import StreamState, interpolate_sequence, newest_deviation, stream_append

log = logging.getLogger("tvnet")

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2
PENALTY_CHOICES = [p.value for p in Penalty]
DEFAULT_EVAL_COLUMNS = ["static", "l1", "l2", "perturbed-node"]
DEFAULT_LAMBDA_GRID = [0.5, 1.0, 2.0, 4.0]
DEFAULT_BETA_GRID = [5.0, 20.0, 80.0]


def _solver_args(p):
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--eps-abs", type=float, default=1e-5)
    p.add_argument("--eps-rel", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (falls back to TVNET_THREADS, then 1)")


def _penalty_args(p, lam=0.1, beta=1.0):
    p.add_argument("--penalty", choices=PENALTY_CHOICES, default="l2")
    p.add_argument("--lambda", dest="lam", type=float, default=lam)
    p.add_argument("--beta", type=float, default=beta)
    p.add_argument("--asynchronous", action="store_true",
                   help="weight the temporal penalty by the gaps between timestamps")


def _input_args(p, center=True):
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--bucket", type=float, default=None, help="re-bin times to this width")
    if center:
        p.add_argument("--center", action="store_true", help="subtract the global column means")
    p.add_argument("--delimiter", default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="tvnet", description="Time-varying graphical lasso")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="infer networks from a time-series file")
    p.add_argument("--input", required=True)
    p.add_argument("--output-dir", required=True)
    _input_args(p)
    _penalty_args(p)
    _solver_args(p)
    p.add_argument("--edge-threshold", type=float, default=1e-4)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("stream", help="update estimates row by row from standard input")
    _input_args(p, center=False)
    _penalty_args(p)
    _solver_args(p)
    p.add_argument("--window", type=int, default=10)
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("synth", help="write a synthetic scenario bundle")
    p.add_argument("--kind", choices=["global", "local"], default="global")
    p.add_argument("--p", type=int, default=10)
    p.add_argument("--T", type=int, default=100)
    p.add_argument("--samples-per-t", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score penalties against a scenario's ground truth")
    p.add_argument("--input", required=True, help="scenario.json written by synth")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--columns", default=",".join(DEFAULT_EVAL_COLUMNS),
                   help="comma-separated: static and/or penalty names")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--lambda-grid", default=",".join(map(str, DEFAULT_LAMBDA_GRID)))
    p.add_argument("--beta-grid", default=",".join(map(str, DEFAULT_BETA_GRID)))
    p.add_argument("--seed", type=int, default=None,
                   help="seed of the AIC training scenario (default: bundle seed + 1)")
    _solver_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("interpolate", help="estimate the network at an unobserved time")
    p.add_argument("--input", required=True, help="networks.json written by solve")
    p.add_argument("--time", type=float, required=True)
    p.add_argument("--penalty", choices=PENALTY_CHOICES, default=None,
                   help="defaults to the penalty recorded in networks.json")
    p.add_argument("--output-dir", default=None, help="write interpolated.json here (default stdout)")
    p.set_defaults(func=cmd_interpolate)
    return parser


def _config(args):
    return SolverConfig.from_env(rho=args.rho, eps_abs=args.eps_abs, eps_rel=args.eps_rel,
                                 max_iter=args.max_iter, threads=args.threads)


def _meta(penalty):
    return {"penalty": penalty.kind.value, "lambda": tvio.num(penalty.lam),
            "beta": tvio.num(penalty.beta), "asynchronous": penalty.asynchronous}


def cmd_solve(args):
    obs = load_timeseries(args.input, delimiter=args.delimiter, has_header=args.has_header,
                          bucket=args.bucket)
    if args.center:
        obs = center_columns(obs)
    covs = empirical_covariances(obs)
    penalty = PenaltySpec(args.penalty, args.lam, args.beta, args.asynchronous)
    thetas, report, _ = solve(covs, penalty, _config(args), edge_threshold=args.edge_threshold)
    os.makedirs(args.output_dir, exist_ok=True)
    tvio.save_networks(os.path.join(args.output_dir, "networks.json"), thetas, _meta(penalty))
    tvio.save_deviation_csv(os.path.join(args.output_dir, "deviation.csv"),
                            thetas.timestamps, temporal_deviation(thetas))
    with open(os.path.join(args.output_dir, "report.json"), "w") as fh:
        fh.write(tvio.dumps({**report.to_dict(), **_meta(penalty), "T": covs.T, "p": covs.p}))
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _stream_rows(stream, delimiter, has_header, skipped):
    """Yield ``(time, vector)``; malformed lines are reported and skipped."""
    p = None
    for lineno, line in enumerate(stream, start=1):
        if has_header and lineno == 1:
            continue
        if not line.strip():
            continue
        cells = [c.strip() for c in line.strip().split(delimiter)]
        try:
            values = [float(c) for c in cells]
        except ValueError:
            log.warning("line %d: non-numeric value, skipped", lineno)
            skipped[0] += 1
            continue
        if len(values) < 2 or (p is not None and len(values) - 1 != p):
            log.warning("line %d: wrong number of columns, skipped", lineno)
            skipped[0] += 1
            continue
        p = len(values) - 1
        yield lineno, values[0], np.array(values[1:])


def cmd_stream(args, stdin=None, stdout=None):
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    penalty = PenaltySpec(args.penalty, args.lam, args.beta, args.asynchronous)
    cfg = _config(args)
    state = StreamState(window=args.window)
    skipped = [0]
    appended = 0
    not_converged = 0
    bucket_t, bucket = None, []
    last_t = None

    def flush():
        nonlocal appended, last_t, not_converged
        X = np.array(bucket)
        S = X.T @ X / len(X)
        gap = 0.0 if last_t is None else bucket_t - last_t
        _, delta = stream_append(state, S, len(X), gap, penalty, cfg, time=bucket_t)
        last_t = bucket_t
        appended += 1
        if not state.last_report.converged:
            not_converged += 1
        line = {
            "time": tvio.num(bucket_t),
            "index": appended - 1,
            "n": len(X),
            "deviation": None if newest_deviation(state) is None else tvio.num(newest_deviation(state)),
            "converged": state.last_report.converged,
            "window": [{"time": tvio.num(t), "matrix": tvio._matrix(M)}
                       for t, M in zip(delta.timestamps, delta.thetas)],
        }
        stdout.write(json.dumps(line) + "\n")
        stdout.flush()

    delim = args.delimiter or ","
    for lineno, t, x in _stream_rows(stdin, delim, args.has_header, skipped):
        if args.bucket is not None:
            t = float(bucket_times([t], args.bucket)[0])
        if bucket and len(x) != len(bucket[0]):
            log.warning("line %d: dimension changed, skipped", lineno)
            skipped[0] += 1
            continue
        if bucket_t is not None and t < bucket_t:
            log.warning("line %d: time %g arrives after %g, skipped", lineno, t, bucket_t)
            skipped[0] += 1
            continue
        if bucket_t is not None and t != bucket_t:
            flush()
            bucket = []
        bucket_t = t
        bucket.append(x)
    if bucket:
        flush()
    sys.stderr.write(json.dumps({"appended": appended, "skipped": skipped[0],
                                 "not_converged": not_converged}) + "\n")
    return EXIT_OK


def cmd_synth(args):
    scenario, obs = generate_scenario(args.kind, args.p, args.T, args.samples_per_t, args.seed)
    os.makedirs(args.output_dir, exist_ok=True)
    save_scenario(os.path.join(args.output_dir, "scenario.json"), scenario, obs)
    with open(os.path.join(args.output_dir, "observations.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        for t, X in zip(obs.timestamps, obs.samples):
            for x in X:
                w.writerow([repr(float(t))] + [repr(float(v)) for v in x])
    return EXIT_OK


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_eval(args):
    scenario, obs = load_scenario(args.input)
    if scenario is None:
        raise InputError(f"{args.input} carries no ground truth")
    cfg = _config(args)
    covs = empirical_covariances(obs)
    columns = [c.strip() for c in args.columns.split(",") if c.strip()]
    lam_grid, beta_grid = _floats(args.lambda_grid), _floats(args.beta_grid)
    train = None
    if args.lam is None or args.beta is None:
        train_seed = (scenario.seed or 0) + 1 if args.seed is None else args.seed
        _, train = generate_scenario(scenario.kind, scenario.p, scenario.T,
                                     scenario.samples_per_t, train_seed, scenario.shift_time)
    rows = []
    worst = EXIT_OK
    for col in columns:
        static = col == "static"
        kind = Penalty.L1 if static else Penalty(col)
        if args.lam is not None and args.beta is not None:
            lam, beta = args.lam, 0.0 if static else args.beta
        else:
            grid = [(l, 0.0) for l in lam_grid] if static else \
                [(l, b) for l in lam_grid for b in beta_grid]
            lam, beta = aic_select(train, grid, kind, cfg)
        thetas, report, _ = solve(covs, PenaltySpec(kind, lam, beta), cfg)
        if not report.converged:
            worst = EXIT_NOT_CONVERGED
        td = td_ratio(thetas, scenario.shift_time)
        rows.append({
            "method": col, "lambda": lam, "beta": beta,
            "f1": tvio.num(f1_score(thetas, scenario)),
            "td_ratio": tvio.num(td.ratio),
            "td_argmax_time": float(thetas.timestamps[td.argmax_index]),
            "converged": report.converged,
        })
    os.makedirs(args.output_dir, exist_ok=True)
    with open(os.path.join(args.output_dir, "results.json"), "w") as fh:
        fh.write(tvio.dumps({"shift": scenario.kind.value, "shift_time": scenario.shift_time,
                             "results": rows}))
    with open(os.path.join(args.output_dir, "results.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["score"] + [r["method"] for r in rows])
        w.writerow(["F1"] + [r["f1"] for r in rows])
        w.writerow(["TD ratio"] + [r["td_ratio"] for r in rows])
        w.writerow(["lambda"] + [r["lambda"] for r in rows])
        w.writerow(["beta"] + [r["beta"] for r in rows])
    return worst


def cmd_interpolate(args, stdout=None):
    thetas, meta = tvio.load_networks(args.input)
    kind = args.penalty or meta.get("penalty")
    if kind is None:
        raise InputError("no penalty given and none recorded in the networks file")
    M = interpolate_sequence(thetas, args.time, Penalty(kind))
    doc = {"time": tvio.num(args.time), "penalty": Penalty(kind).value, "matrix": tvio._matrix(M)}
    if args.output_dir:
        os.makedirs(args.output_dir, exist_ok=True)
        with open(os.path.join(args.output_dir, "interpolated.json"), "w") as fh:
            fh.write(tvio.dumps(doc))
    else:
        (stdout or sys.stdout).write(tvio.dumps(doc))
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParseError as exc:
        log.error("parse error: %s", exc)
        return EXIT_INPUT
    except (InputError, OSError, KeyError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
