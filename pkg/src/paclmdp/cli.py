"""Command-line front end.

Verbs:
  train       run a training experiment and write artifacts
  eval        evaluate a saved parameter snapshot
  ingest      reconstruct passive samples from a trajectory CSV
  oracle      solve a discretized domain by power iteration
  replay-gen  synthesize a merge trajectory CSV under a scripted controller

Exit code is 0 only when the requested run completed and all artifacts were
written.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields, replace

import numpy as np

from .actor import ActorState
from .baselines import discretize, estimate_sigma_residual, solve_principal_eigenpair
from .config import ExperimentConfig, _parse_value, defaults_for, load_config, resolve
from .core import SampleSet
from .critic import CriticState
from .domains import make_domain
from .harness import (
    evaluate_average_cost,
    evaluate_merge_success,
    make_policy,
    run_experiment,
    seed_streams,
)
from .ingest import (
    TrajectorySchema,
    generate_replay_dataset,
    kfold_split,
    load_trajectories,
    reconstruct_passive,
    save_fold_split,
    save_trajectories,
    scripted_merge_controller,
)


def _add_common(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paclmdp", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train", help="train and evaluate per a configuration")
    p.add_argument("--config", default=None, help="key=value configuration file")
    p.add_argument("--domain", default=None, choices=("car_on_hill", "pendulum", "merge"))
    p.add_argument("--method", default=None, choices=("pac", "zlearning"))
    p.add_argument("--approx", default=None, choices=("rbf", "mlp"))
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override any configuration key")
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate a snapshot written by train")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--starts", type=int, default=40)
    p.add_argument("--window", type=float, default=0.0, help="seconds; 0 = domain default")
    _add_common(p)

    p = sub.add_parser("ingest", help="trajectory CSV to passive samples")
    p.add_argument("--data", required=True)
    p.add_argument("--domain", required=True, choices=("car_on_hill", "pendulum", "merge"))
    p.add_argument("--cost-mode", default="clamp", choices=("clamp", "offset"))
    p.add_argument("--legacy-no-dt", action="store_true",
                   help="subtract B u without the dt factor")
    p.add_argument("--folds", type=int, default=0)
    _add_common(p)

    p = sub.add_parser("oracle", help="discretize a domain and solve for (z_avg, z)")
    p.add_argument("--domain", required=True, choices=("car_on_hill", "pendulum", "merge"))
    p.add_argument("--cost-mode", default="clamp", choices=("clamp", "offset"))
    p.add_argument("--counts", required=True, help="comma-separated grid sizes per dimension")
    p.add_argument("--box-scale", type=float, default=1.0)
    _add_common(p)

    p = sub.add_parser("replay-gen", help="scripted-controller merge trajectories")
    p.add_argument("--trajectories", type=int, default=40)
    p.add_argument("--steps", type=int, default=300)
    _add_common(p)
    return parser


def _cmd_train(args) -> int:
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = defaults_for(args.domain or "pendulum", args.method or "pac",
                           args.approx or "rbf")
    # Without --config the domain/method/approx flags already picked the
    # preset above; with --config they override the file.
    flag_keys = ("domain", "method", "approx") if args.config is not None else ()
    over = {}
    for key in (*flag_keys, "seed", "out"):
        val = getattr(args, key)
        if val is not None:
            over[key] = val
    kinds = {f.name: type(f.default) for f in fields(ExperimentConfig)}
    for pair in args.overrides:
        if "=" not in pair:
            raise ValueError(f"--set expects KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        key = key.strip()
        if key not in kinds:
            raise ValueError(f"unknown configuration key {key!r}")
        over[key] = _parse_value(key, kinds[key], raw)
    cfg = resolve(replace(cfg, **over))
    report = run_experiment(cfg)
    last = report.average_cost_curve[-1] if report.average_cost_curve else (0, float("nan"))
    line = f"train complete: domain={cfg.domain} method={cfg.method} final_cost={last[1]:.6g}"
    if report.success_rate is not None:
        line += f" success={report.success_rate:.3f}"
    print(line)
    return 0


def _cmd_eval(args) -> int:
    from .approximators import load_snapshot

    approx, extras = load_snapshot(args.snapshot)
    domain = extras["domain"]
    problem = make_domain(domain, cost_mode=extras.get("cost_mode", "clamp"))
    critic = CriticState(approx, alpha1=1.0, alpha2=1.0, z_avg=float(extras["z_avg"]))
    actor = ActorState(np.array(extras["s_hat"], dtype=float), beta=1.0)
    clamp = float(extras.get("action_clamp", 0.0)) or None
    counters: dict = {}
    policy = make_policy(critic, actor, problem.dynamics.input_gain, clamp, counters)

    window = args.window
    if window <= 0.0:
        window = 30.0 if domain == "merge" else 10.0
    seed = args.seed if args.seed is not None else 0
    eval_seq = seed_streams(seed)["eval"]
    children = eval_seq.spawn(args.starts)
    cost = evaluate_average_cost(policy, problem, actor.s_hat, window, children, counters)
    payload = {"snapshot": os.path.basename(args.snapshot), "domain": domain,
               "avg_cost": cost, "starts": args.starts, "window_s": window,
               "seed": seed, "counters": counters}
    if domain == "merge":
        payload["success_rate"] = evaluate_merge_success(
            policy, problem, eval_seq, n_starts=125, horizon_s=window, counters=counters)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "eval.json"), "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    line = f"eval: avg_cost={cost:.6g}"
    if "success_rate" in payload:
        line += f" success={payload['success_rate']:.3f}"
    print(line)
    return 0


def _cmd_ingest(args) -> int:
    problem = make_domain(args.domain, cost_mode=args.cost_mode)
    dyn = problem.dynamics
    schema = TrajectorySchema.for_dims(dyn.dim, dyn.action_dim)
    logs = load_trajectories(args.data, schema)
    parts = [reconstruct_passive(tl, problem, legacy_no_dt=args.legacy_no_dt)
             for tl in logs if len(tl) >= 2]
    if not parts:
        raise ValueError("no usable trajectories (all shorter than 2 rows)")
    samples = SampleSet.concatenate(parts)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)

    header = ([f"x{i}" for i in range(dyn.dim)]
              + [f"xn{i}" for i in range(dyn.dim)] + ["q"])
    lines = [",".join(header)]
    for k in range(len(samples)):
        row = list(samples.xs[k]) + list(samples.x_nexts[k]) + [samples.qs[k]]
        lines.append(",".join(repr(float(v)) for v in row))
    with open(os.path.join(out, "samples.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")

    summary = {
        "trajectories": len(logs),
        "samples": len(samples),
        "state_low": samples.xs.min(axis=0).tolist(),
        "state_high": samples.xs.max(axis=0).tolist(),
    }
    if len(samples) >= 1000:
        sigma = estimate_sigma_residual(samples, dyn.dt)
        summary["sigma_hat"] = sigma.tolist()
    if args.folds >= 2:
        rng = np.random.default_rng(seed_streams(args.seed or 0)["data"])
        split = kfold_split(logs, args.folds, rng)
        save_fold_split(os.path.join(out, "folds.csv"), split)
        summary["folds"] = args.folds
    with open(os.path.join(out, "ingest.json"), "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"ingest: {len(logs)} trajectories -> {len(samples)} samples")
    return 0


def _cmd_oracle(args) -> int:
    problem = make_domain(args.domain, cost_mode=args.cost_mode)
    counts = tuple(int(c) for c in args.counts.split(","))
    region = problem.init_region
    center = 0.5 * (region[:, 0] + region[:, 1])
    half = 0.5 * (region[:, 1] - region[:, 0]) * args.box_scale
    ranges = np.stack([center - half, center + half], axis=1)
    d = discretize(problem, ranges, counts)
    z_avg, z = solve_principal_eigenpair(d)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    lines = [",".join([f"x{i}" for i in range(d.states.shape[1])] + ["z"])]
    for k in range(d.n_states):
        lines.append(",".join(repr(float(v)) for v in (*d.states[k], z[k])))
    with open(os.path.join(out, "oracle_z.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(os.path.join(out, "oracle.json"), "w") as fh:
        json.dump({"domain": args.domain, "counts": list(counts),
                   "z_avg": z_avg, "v_avg": float(-np.log(z_avg))}, fh,
                  sort_keys=True, indent=2)
        fh.write("\n")
    print(f"oracle: z_avg={z_avg!r} over {d.n_states} states")
    return 0


def _cmd_replay_gen(args) -> int:
    problem = make_domain("merge")
    rng = np.random.default_rng(seed_streams(args.seed or 0)["data"])
    logs = generate_replay_dataset(problem, scripted_merge_controller,
                                   args.trajectories, args.steps, rng)
    out = args.out or "replay.csv"
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    dyn = problem.dynamics
    save_trajectories(out, logs, TrajectorySchema.for_dims(dyn.dim, dyn.action_dim))
    print(f"replay-gen: wrote {len(logs)} trajectories x {args.steps} steps to {out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ingest": _cmd_ingest,
    "oracle": _cmd_oracle,
    "replay-gen": _cmd_replay_gen,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except (ValueError, OSError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
