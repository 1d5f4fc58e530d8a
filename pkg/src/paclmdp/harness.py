"""Experiment driver: dataset generation, training loop, evaluation, artifacts.

Seeding: the run seed feeds a SeedSequence with four children driving dataset
generation, model initialization, training-loop sampling, and evaluation.
Evaluation spawns one grandchild per rollout, and the learning curve reuses
the same rollout children at every checkpoint, so curves compare policies on
identical start states and noise.  Every artifact is a pure function of
(config, seed): JSON uses sorted keys, CSV floats are written with repr.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .actor import ActorState, ZUnderflowError, act, actor_step
from .approximators import (
    UNDERFLOW_FLOOR,
    MlpZApproximator,
    build_rbf_grid,
    save_snapshot,
)
from .baselines import estimate_sigma_residual
from .config import ExperimentConfig, format_config, resolve
from .core import (
    LMDPProblem,
    SampleSet,
    step_controlled,
    step_passive,
    total_cost,
    true_control_cost_matrix,
)
from .critic import CriticState, critic_step
from .domains import make_domain, merge_success
from .ingest import (
    TrajectorySchema,
    kfold_split,
    load_trajectories,
    reconstruct_passive,
    resample_balanced,
)


class TrainingError(RuntimeError):
    """Aborted training run, carrying the failing iteration and sample."""

    def __init__(self, message, iteration=None, sample=None):
        super().__init__(message)
        self.iteration = iteration
        self.sample = sample


@dataclass
class EvalReport:
    average_cost_curve: list  # rows of (iteration, mean window cost)
    success_rate: float | None
    counters: dict
    fold_rates: list | None = None


def seed_streams(seed: int) -> dict:
    """The documented seed-splitting rule: one child per pipeline stage."""
    children = np.random.SeedSequence(seed).spawn(4)
    return dict(zip(("data", "init", "train", "eval"), children))


def generate_dataset(
    problem: LMDPProblem,
    count: int,
    rng: np.random.Generator,
    box_scale: float = 1.0,
    reset_steps: int = 200,
) -> SampleSet:
    """Passive transitions from restarted rollouts.

    Rollouts restart from the initial region whenever the state leaves the
    scaled initial box or after ``reset_steps`` steps.  The exiting transition
    itself is kept: dropping it would condition the recorded kernel on staying
    inside, and rim states would then only ever be seen drifting back toward
    the interior, which makes the rim look cheap and bends the learned value
    downhill exactly where it should keep rising.
    """
    dyn = problem.dynamics
    region = problem.init_region
    center = 0.5 * (region[:, 0] + region[:, 1])
    half = 0.5 * (region[:, 1] - region[:, 0]) * box_scale
    xs = np.empty((count, dyn.dim))
    x_nexts = np.empty((count, dyn.dim))
    qs = np.empty(count)
    x = problem.sample_init(rng)
    age = 0
    k = 0
    while k < count:
        x_next = step_passive(dyn, x, rng)
        age += 1
        xs[k] = x
        x_nexts[k] = x_next
        qs[k] = problem.cost(x) * dyn.dt
        k += 1
        if age >= reset_steps or np.any(np.abs(x_next - center) > half):
            x = problem.sample_init(rng)
            age = 0
        else:
            x = x_next
    return SampleSet(xs, x_nexts, qs)


def data_ranges(dataset: SampleSet) -> np.ndarray:
    """Per-dimension [low, high] covering states and next states."""
    lo = np.minimum(dataset.xs.min(axis=0), dataset.x_nexts.min(axis=0))
    hi = np.maximum(dataset.xs.max(axis=0), dataset.x_nexts.max(axis=0))
    flat = hi - lo <= 0.0
    lo[flat] -= 0.5
    hi[flat] += 0.5
    return np.stack([lo, hi], axis=1)


def build_approximator(config: ExperimentConfig, dataset: SampleSet, rng: np.random.Generator):
    """Approximator sized from the data; returns (approx, total_mass).

    With critic_c unset the weight budget C is 0.3 times the volume of the
    data bounding box, putting the mean Z estimate around 0.3 regardless of
    domain scale.  Mean Z near 1 would leave no headroom below the TD
    target's clamp at 1, which then binds on most samples and flattens the
    learned Z exactly where it peaks.
    """
    ranges = data_ranges(dataset)
    if config.approx == "rbf":
        c = config.critic_c
        if c <= 0.0:
            c = 0.3 * float(np.prod(ranges[:, 1] - ranges[:, 0]))
        approx = build_rbf_grid(ranges, config.rbf_counts, total_mass=c)
        return approx, c
    approx = MlpZApproximator.create(
        ranges, hidden=tuple(config.mlp_hidden), out_act=config.out_act, rng=rng
    )
    return approx, 1.0


def gradient_norm_scale(approx, dataset: SampleSet, probes: int = 1000) -> float:
    """Mean squared parameter-gradient norm over a leading slice of the data.

    Dividing alpha2 by this makes the first-order effect of one update on
    Z(x_k) about 2 alpha2 e z_avg across approximators and domains.
    """
    take = min(probes, len(dataset))
    total = 0.0
    for k in range(take):
        q = approx.query(dataset.xs[k])
        total += float(q.grad_params @ q.grad_params)
    return max(total / take, 1e-30)


def initial_z_avg(dataset: SampleSet) -> float:
    """Moment estimate exp(-mean q) from the training data.

    Starting z_avg at the Jensen bound of the eigenvalue instead of 1
    matters when per-step costs are large: the parameter updates scale with
    Z itself, so a z_avg far above the eigenvalue contracts Z toward zero
    faster than the z_avg update (also scaled by Z) can descend, and both
    stall.  For small per-step costs this is within a percent of 1.
    """
    return float(np.clip(np.exp(-np.mean(dataset.qs)), 1e-8, 1.0))


def train(config: ExperimentConfig, problem: LMDPProblem | None = None,
          dataset: SampleSet | None = None, checkpoint_hook=None):
    """Run the interleaved critic/actor loop over randomly drawn samples.

    Returns (critic, actor, counters).  The actor sees the critic exactly as
    the iteration started: its TD and update run before the critic's.  With
    method ``zlearning`` the actor holds the known-noise control-cost matrix
    and never updates.  ``checkpoint_hook(iteration, critic, actor)`` fires at
    the checkpoint cadence and at the final iteration.
    """
    cfg = resolve(config)
    streams = seed_streams(cfg.seed)
    if problem is None:
        problem = make_domain(cfg.domain, cost_mode=cfg.cost_mode)
    dyn = problem.dynamics
    if dataset is None:
        dataset = _load_dataset(cfg, problem, np.random.default_rng(streams["data"]))

    init_rng = np.random.default_rng(streams["init"])
    approx, total_mass = build_approximator(cfg, dataset, init_rng)
    alpha2 = cfg.alpha2
    if cfg.alpha2_normalize:
        alpha2 = alpha2 / gradient_norm_scale(approx, dataset)
    tau = cfg.decay_tau if cfg.decay_tau > 0.0 else None
    critic = CriticState(approx, alpha1=cfg.alpha1, alpha2=alpha2,
                         z_avg=initial_z_avg(dataset), total_mass=total_mass,
                         decay_tau=tau)
    if cfg.method == "pac":
        actor = ActorState(np.eye(dyn.action_dim), cfg.beta,
                           gradient_mode=cfg.gradient_mode, decay_tau=tau)
    else:
        actor = ActorState(true_control_cost_matrix(dyn.input_gain, dyn.noise), cfg.beta)

    gain = dyn.input_gain
    counters: dict = {"actor_skips": 0}
    train_rng = np.random.default_rng(streams["train"])
    marks = checkpoint_iterations(cfg.iterations, cfg.checkpoints)
    trace_rows = []
    for i in range(cfg.iterations):
        k = int(train_rng.integers(len(dataset)))
        x, x_next, q = dataset.xs[k], dataset.x_nexts[k], float(dataset.qs[k])
        try:
            query_k = critic.approx.query(x, need_input_grad=cfg.method == "pac")
            d_sq = 0.0
            if cfg.method == "pac":
                z = query_k.value
                if z <= UNDERFLOW_FLOOR:
                    counters["actor_skips"] += 1
                else:
                    try:
                        td_a = actor_step(actor, critic, x, x_next, q, gain, dyn.dt,
                                          v_k=-math.log(z), grad_v=-query_k.grad_input / z)
                        d_sq = td_a.d * td_a.d
                    except ZUnderflowError:
                        counters["actor_skips"] += 1
            td = critic_step(critic, x, x_next, q, query_k=query_k)
            if not math.isfinite(td.e):
                raise FloatingPointError(f"non-finite TD error {td.e!r}")
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            norms = _param_norms(critic, actor)
            raise TrainingError(
                f"aborted at iteration {i}: {exc} ({norms})", iteration=i, sample=(x, x_next, q)
            ) from exc
        if cfg.trace_interval > 0 and (i + 1) % cfg.trace_interval == 0:
            trace_rows.append((i + 1, td.e * td.e, critic.z_avg, d_sq,
                               *actor.s_hat.ravel()))
        if checkpoint_hook is not None and (i + 1) in marks:
            checkpoint_hook(i + 1, critic, actor)
    counters["trace"] = trace_rows
    return critic, actor, counters


def _param_norms(critic: CriticState, actor: ActorState) -> str:
    pn = float(np.linalg.norm(critic.approx.params))
    return f"|params|={pn:.3e} z_avg={critic.z_avg:.3e} |S|={float(np.abs(actor.s_hat).max()):.3e}"


def _load_dataset(cfg: ExperimentConfig, problem: LMDPProblem, rng: np.random.Generator,
                  exclude_fold=None, fold_split=None) -> SampleSet:
    if cfg.data == "simulator":
        return generate_dataset(problem, cfg.dataset_size, rng,
                                box_scale=cfg.sample_box_scale, reset_steps=cfg.reset_steps)
    dyn = problem.dynamics
    schema = TrajectorySchema.for_dims(dyn.dim, dyn.action_dim)
    logs = load_trajectories(cfg.data, schema)
    if exclude_fold is not None:
        keep = {tid for tid, f in fold_split.assignments.items() if f != exclude_fold}
        logs = [tl for tl in logs if tl.trajectory_id in keep]
    parts = [reconstruct_passive(tl, problem) for tl in logs if len(tl) >= 2]
    samples = SampleSet.concatenate(parts)
    return resample_balanced(samples, cfg.dataset_size, rng)


def checkpoint_iterations(n: int, k: int) -> set:
    """Checkpoint marks: k roughly even points ending exactly at n."""
    marks = {max(1, round(j * n / k)) for j in range(1, k + 1)}
    marks.add(n)
    return marks


def make_policy(critic: CriticState, actor: ActorState, input_gain, clamp=None, counters=None):
    holder_clamp = None if clamp in (None, 0.0) else clamp

    def policy(x):
        return act(actor, critic, x, input_gain, clamp=holder_clamp, counters=counters)

    return policy


def evaluate_average_cost(policy, problem: LMDPProblem, s_matrix, window_s: float,
                          rollout_seeds, counters=None) -> float:
    """Mean per-window total cost over rollouts from the initial region.

    One rollout per seed in ``rollout_seeds``; diverging rollouts (state norm
    above 1e6 or non-finite) are truncated, their cost scaled to the full
    window, and counted.  The control-cost term uses the caller's S estimate.
    """
    dyn = problem.dynamics
    steps = window_s / dyn.dt
    if abs(steps - round(steps)) > 1e-9:
        raise ValueError("window must be an integer number of steps")
    steps = int(round(steps))
    totals = np.empty(len(rollout_seeds))
    for r, child in enumerate(rollout_seeds):
        rng = np.random.default_rng(child)
        x = problem.sample_init(rng)
        total = 0.0
        done = 0
        for _ in range(steps):
            u = policy(x)
            total += total_cost(problem, x, u, s_matrix)
            x = step_controlled(dyn, x, u, rng)
            done += 1
            if not np.all(np.isfinite(x)) or float(np.abs(x).max()) > 1e6:
                if counters is not None:
                    counters["eval_truncated"] = counters.get("eval_truncated", 0) + 1
                total *= steps / done
                break
        totals[r] = total
    return float(totals.mean())


def evaluate_merge_success(policy, problem: LMDPProblem, seed_seq,
                           n_starts: int = 125, horizon_s: float = 30.0,
                           replay_logs=None, counters=None) -> float:
    """Fraction of rollouts that complete a merge within the time limit.

    A rollout counts as soon as the ego car is strictly between the ambient
    cars at any step inside the horizon.  Judging only the final state would
    mostly measure the ambient pair instead of the policy: under the ambient
    noise the rear car overruns the lead car within 30 s in a third of the
    rollouts, and no policy can score once that gap has collapsed.

    Simulator mode rolls the full model; replay mode integrates only the
    controlled dimensions and overwrites the ambient gap coordinates from the
    log each step (one case per log, scored over the logged window if it is
    shorter than the horizon, counted as ``replay_short``).
    """
    dyn = problem.dynamics
    horizon = int(round(horizon_s / dyn.dt))
    if replay_logs is None:
        children = seed_seq.spawn(n_starts)
        wins = 0
        for child in children:
            rng = np.random.default_rng(child)
            x = problem.sample_init(rng)
            merged = False
            for _ in range(horizon):
                x = step_controlled(dyn, x, policy(x), rng)
                if merge_success(x):
                    merged = True
                    break
            wins += merged
        return wins / n_starts

    children = seed_seq.spawn(len(replay_logs))
    wins = 0
    for tl, child in zip(replay_logs, children):
        rng = np.random.default_rng(child)
        steps = min(horizon, len(tl) - 1)
        if steps < horizon and counters is not None:
            counters["replay_short"] = counters.get("replay_short", 0) + 1
        x = tl.xs[0].copy()
        merged = False
        for k in range(steps):
            x = step_controlled(dyn, x, policy(x), rng)
            x[2] = tl.xs[k + 1][2]
            x[3] = tl.xs[k + 1][3]
            if merge_success(x):
                merged = True
                break
        wins += merged
    return wins / len(replay_logs)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def run_experiment(config: ExperimentConfig) -> EvalReport:
    """Train, evaluate at checkpoints, and write artifacts to config.out.

    Artifacts: config.txt (resolved configuration), curve.csv (iteration,
    average cost), report.json, snapshot_final.txt plus per-checkpoint
    snapshots, trace.csv when tracing is on.  With folds >= 2 and a
    trajectory data path, trains once per fold on the complement and reports
    per-fold replay success instead of a curve.  On an IO failure a partial
    manifest of files written so far is attempted before re-raising.
    """
    cfg = resolve(config)
    os.makedirs(cfg.out, exist_ok=True)
    written = []
    try:
        return _run_experiment_inner(cfg, written)
    except OSError:
        try:
            manifest = os.path.join(cfg.out, "MANIFEST.partial.json")
            with open(manifest, "w") as fh:
                json.dump({"complete": False, "written": written}, fh,
                          sort_keys=True, indent=2)
        except OSError:
            pass
        raise


def _write_text(out_dir, name, text, written):
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(text)
    written.append(name)
    return path


def _run_experiment_inner(cfg: ExperimentConfig, written: list) -> EvalReport:
    problem = make_domain(cfg.domain, cost_mode=cfg.cost_mode)
    dyn = problem.dynamics
    streams = seed_streams(cfg.seed)
    counters: dict = {}
    _write_text(cfg.out, "config.txt", format_config(cfg), written)

    if cfg.folds >= 2 and cfg.data != "simulator":
        rates = _run_folds(cfg, problem, streams, counters, written)
        mean = float(np.mean(rates))
        report = EvalReport([], mean, counters, fold_rates=rates)
        _write_report(cfg, report, {"fold_rates": rates,
                                    "fold_mean": mean,
                                    "fold_std": float(np.std(rates))}, written)
        return report

    data_rng = np.random.default_rng(streams["data"])
    dataset = _load_dataset(cfg, problem, data_rng)
    eval_seq = streams["eval"]
    curve_children = eval_seq.spawn(cfg.eval_starts)
    clamp = cfg.action_clamp if cfg.action_clamp > 0.0 else None

    curve = []
    curve_lines = ["iteration,avg_cost"]

    def evaluate_point(iteration, critic, actor):
        policy = make_policy(critic, actor, dyn.input_gain, clamp, counters)
        cost = evaluate_average_cost(policy, problem, actor.s_hat, cfg.eval_window_s,
                                     curve_children, counters)
        curve.append((iteration, cost))
        curve_lines.append(f"{iteration},{cost!r}")

    def hook(iteration, critic, actor):
        evaluate_point(iteration, critic, actor)
        _save_state(cfg, f"snapshot_{iteration:08d}.txt", critic, actor, iteration, written)

    # Checkpoint 0 evaluates the untrained initialization on the same rollouts.
    init_rng = np.random.default_rng(streams["init"])
    approx0, total_mass = build_approximator(cfg, dataset, init_rng)
    critic0 = CriticState(approx0, alpha1=cfg.alpha1, alpha2=cfg.alpha2,
                          z_avg=initial_z_avg(dataset), total_mass=total_mass)
    if cfg.method == "pac":
        actor0 = ActorState(np.eye(dyn.action_dim), cfg.beta)
    else:
        actor0 = ActorState(true_control_cost_matrix(dyn.input_gain, dyn.noise), cfg.beta)
    evaluate_point(0, critic0, actor0)

    critic, actor, train_counters = train(cfg, problem, dataset, checkpoint_hook=hook)
    trace_rows = train_counters.pop("trace")
    counters.update(train_counters)

    _write_text(cfg.out, "curve.csv", "\n".join(curve_lines) + "\n", written)
    if trace_rows:
        m = dyn.action_dim
        head = "iteration,e_sq,z_avg,d_sq," + ",".join(
            f"s{i}{j}" for i in range(m) for j in range(m))
        lines = [head] + [",".join([str(r[0])] + [repr(float(v)) for v in r[1:]])
                          for r in trace_rows]
        _write_text(cfg.out, "trace.csv", "\n".join(lines) + "\n", written)
    _save_state(cfg, "snapshot_final.txt", critic, actor, cfg.iterations, written)

    success = None
    if cfg.domain == "merge":
        policy = make_policy(critic, actor, dyn.input_gain, clamp, counters)
        success = evaluate_merge_success(policy, problem, eval_seq, horizon_s=cfg.eval_window_s,
                                         counters=counters)

    counters["cost_clamps"] = problem.counters.clamps
    report = EvalReport(curve, success, counters)
    extra = {"initial_cost": curve[0][1], "final_cost": curve[-1][1]}
    if success is not None:
        extra["success_rate"] = success
    _write_report(cfg, report, extra, written)
    return report


def _run_folds(cfg: ExperimentConfig, problem: LMDPProblem, streams, counters, written) -> list:
    dyn = problem.dynamics
    schema = TrajectorySchema.for_dims(dyn.dim, dyn.action_dim)
    logs = load_trajectories(cfg.data, schema)
    split_rng = np.random.default_rng(streams["data"])
    split = kfold_split(logs, cfg.folds, split_rng)
    fold_data_seqs = streams["data"].spawn(cfg.folds)
    rates = []
    clamp = cfg.action_clamp if cfg.action_clamp > 0.0 else None
    for fold in range(cfg.folds):
        dataset = _load_dataset(cfg, problem, np.random.default_rng(fold_data_seqs[fold]),
                                exclude_fold=fold, fold_split=split)
        critic, actor, tc = train(cfg, problem, dataset)
        tc.pop("trace")
        for key, val in tc.items():
            counters[key] = counters.get(key, 0) + val
        held = [tl for tl in logs if split.assignments[tl.trajectory_id] == fold]
        policy = make_policy(critic, actor, dyn.input_gain, clamp, counters)
        rate = evaluate_merge_success(policy, problem, streams["eval"].spawn(1)[0],
                                      horizon_s=cfg.eval_window_s, replay_logs=held,
                                      counters=counters)
        rates.append(rate)
        _save_state(cfg, f"snapshot_fold{fold}.txt", critic, actor, cfg.iterations, written)
    return rates


def _save_state(cfg: ExperimentConfig, name, critic: CriticState, actor: ActorState,
                iteration, written):
    extras = {
        "z_avg": critic.z_avg,
        "s_hat": actor.s_hat,
        "iteration": iteration,
        "domain": cfg.domain,
        "method": cfg.method,
        "cost_mode": cfg.cost_mode,
        "action_clamp": cfg.action_clamp,
    }
    save_snapshot(critic.approx, os.path.join(cfg.out, name), extras=extras)
    written.append(name)


def _write_report(cfg: ExperimentConfig, report: EvalReport, extra: dict, written):
    payload = {
        "domain": cfg.domain,
        "method": cfg.method,
        "approx": cfg.approx,
        "seed": cfg.seed,
        "iterations": cfg.iterations,
        "curve": [[it, cost] for it, cost in report.average_cost_curve],
        "counters": {k: v for k, v in report.counters.items() if k != "trace"},
    }
    payload.update(extra)
    text = json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"
    _write_text(cfg.out, "report.json", text, written)


def sigma_check(problem: LMDPProblem, count: int, seed: int, bins: int = 12) -> np.ndarray:
    """Noise-scale estimate from a fresh passive dataset (diagnostic helper)."""
    rng = np.random.default_rng(seed_streams(seed)["data"])
    samples = generate_dataset(problem, count, rng)
    return estimate_sigma_residual(samples, problem.dynamics.dt, bins=bins)
