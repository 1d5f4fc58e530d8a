"""Trajectory-log ingestion and replay-dataset generation.

Controlled logs become passive training data by subtracting the known control
effect from each next state.  To make that subtraction exact in floating
point, the replay generator snaps states and control increments to a lattice
of spacing 2^-26 (about 1.5e-8 in state units, far below sensor resolution):
sums and differences of lattice multiples below 2^26 in magnitude are exact,
so reconstruction recovers the generator's passive states bit for bit.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import LMDPProblem, SampleSet, step_passive

log = logging.getLogger(__name__)

LATTICE_QUANTUM = 2.0 ** -26


def quantize_lattice(x, quantum: float = LATTICE_QUANTUM) -> np.ndarray:
    """Round to the nearest lattice multiple.

    Scaling by a power of two is exact, so the only rounding is the rint.
    """
    return np.rint(np.asarray(x, dtype=float) / quantum) * quantum


@dataclass(frozen=True)
class TrajectorySchema:
    """Column names of a trajectory CSV: time, states, actions, trajectory id."""

    time_col: str = "t"
    state_cols: tuple = ("x0", "x1")
    action_cols: tuple = ("u0",)
    traj_col: str = "traj"

    @classmethod
    def for_dims(cls, n: int, m: int) -> "TrajectorySchema":
        return cls(
            state_cols=tuple(f"x{i}" for i in range(n)),
            action_cols=tuple(f"u{i}" for i in range(m)),
        )

    @property
    def columns(self) -> tuple:
        return (self.time_col, *self.state_cols, *self.action_cols, self.traj_col)


@dataclass
class TrajectoryLog:
    """One recorded trajectory: rows of (t, x, u) at fixed sampling period dt.

    The action of the last row is never consumed (transitions pair row k with
    row k+1 using u_k).
    """

    trajectory_id: str
    ts: np.ndarray  # (N,)
    xs: np.ndarray  # (N, n)
    us: np.ndarray  # (N, m)
    dt: float

    def __post_init__(self):
        self.ts = np.asarray(self.ts, dtype=float)
        self.xs = np.asarray(self.xs, dtype=float)
        self.us = np.asarray(self.us, dtype=float)
        n = self.ts.shape[0]
        if self.xs.ndim != 2 or self.us.ndim != 2:
            raise ValueError("states and actions must be 2-D row arrays")
        if self.xs.shape[0] != n or self.us.shape[0] != n:
            raise ValueError("row counts of t, x, u must match")
        if n >= 2:
            gaps = np.diff(self.ts)
            if np.any(gaps <= 0.0):
                raise ValueError(f"timestamps must increase (trajectory {self.trajectory_id})")
            worst = float(np.abs(gaps - self.dt).max())
            if worst > 1e-6:
                raise ValueError(
                    f"sampling period off by {worst:.2e} (trajectory {self.trajectory_id})"
                )

    def __len__(self) -> int:
        return self.ts.shape[0]


def load_trajectories(path, schema: TrajectorySchema, dt: float | None = None):
    """Parse a trajectory CSV into logs, one per trajectory id.

    Rows with non-finite entries are dropped (count logged); a drop inside a
    trajectory splits it at the gap so the fixed-period invariant holds, with
    continuation pieces suffixed ``#1``, ``#2``...  Missing columns and
    non-monotone timestamps raise with the offending name or row number.
    When ``dt`` is None it is inferred per trajectory from the first gap.
    """
    groups: dict = {}
    dropped = 0
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in schema.columns if c not in header]
        if missing:
            raise ValueError(f"missing columns: {', '.join(missing)}")
        for row_no, row in enumerate(reader, start=2):
            vals = [float(row[c]) for c in (schema.time_col, *schema.state_cols,
                                            *schema.action_cols)]
            if not all(np.isfinite(v) for v in vals):
                dropped += 1
                continue
            groups.setdefault(row[schema.traj_col], []).append((row_no, vals))
    if dropped:
        log.warning("dropped %d rows with non-finite entries from %s", dropped, path)

    n, m = len(schema.state_cols), len(schema.action_cols)
    logs = []
    for traj_id, rows in groups.items():
        ts = np.array([v[1][0] for v in rows])
        for i in range(1, ts.shape[0]):
            if ts[i] <= ts[i - 1]:
                raise ValueError(f"non-monotone time at row {rows[i][0]} (trajectory {traj_id})")
        data = np.array([v[1][1:] for v in rows])
        xs, us = data[:, :n], data[:, n:n + m]
        period = dt if dt is not None else (float(ts[1] - ts[0]) if ts.shape[0] >= 2 else 0.0)
        # Split where a dropped row left a too-large gap.
        breaks = np.flatnonzero(np.abs(np.diff(ts) - period) > 1e-6) + 1
        pieces = np.split(np.arange(ts.shape[0]), breaks)
        for pi, piece in enumerate(pieces):
            if piece.shape[0] < 2:
                dropped += piece.shape[0]
                continue
            pid = traj_id if pi == 0 else f"{traj_id}#{pi}"
            logs.append(TrajectoryLog(pid, ts[piece], xs[piece], us[piece], period))
    return logs


def save_trajectories(path, logs, schema: TrajectorySchema) -> None:
    """Write logs as CSV with full-precision floats (reloads bit-identically)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(schema.columns)
        for tl in logs:
            for k in range(len(tl)):
                writer.writerow(
                    [repr(float(tl.ts[k]))]
                    + [repr(float(v)) for v in tl.xs[k]]
                    + [repr(float(v)) for v in tl.us[k]]
                    + [tl.trajectory_id]
                )


def reconstruct_passive(
    log_: TrajectoryLog,
    problem: LMDPProblem,
    legacy_no_dt: bool = False,
    control_quantum: float | None = None,
) -> SampleSet:
    """Passive transitions from a controlled log: x_next = x_{k+1} - B u_k dt.

    ``legacy_no_dt`` subtracts B u without the dt factor, for logs whose
    recorded actions already absorb the step size.  ``control_quantum`` snaps
    the subtracted control increment to the given lattice, matching
    :func:`generate_replay_dataset`; leave None for plain arithmetic.
    Cost increments are the domain's state cost at the logged states times dt.
    """
    dyn = problem.dynamics
    if log_.xs.shape[1] != dyn.dim or log_.us.shape[1] != dyn.action_dim:
        raise ValueError(
            f"log dims ({log_.xs.shape[1]}, {log_.us.shape[1]}) do not match "
            f"dynamics ({dyn.dim}, {dyn.action_dim})"
        )
    count = len(log_) - 1
    x_nexts = np.empty((count, dyn.dim))
    qs = np.empty(count)
    for k in range(count):
        u = log_.us[k]
        c = dyn.input_gain @ u if legacy_no_dt else dyn.input_gain @ (u * dyn.dt)
        if control_quantum is not None:
            c = quantize_lattice(c, control_quantum)
        x_nexts[k] = log_.xs[k + 1] - c
        qs[k] = problem.cost(log_.xs[k]) * dyn.dt
    return SampleSet(log_.xs[:-1].copy(), x_nexts, qs)


def resample_balanced(samples: SampleSet, count: int, rng: np.random.Generator) -> SampleSet:
    """Even out state coverage by nearest-neighbor lookups from uniform draws.

    Draws ``count`` points uniformly in the data bounding box and returns for
    each the sample whose state is nearest (exact search; duplicates allowed).
    """
    if len(samples) == 0:
        raise ValueError("cannot resample an empty sample set")
    lo = samples.xs.min(axis=0)
    hi = samples.xs.max(axis=0)
    tree = cKDTree(samples.xs)
    draws = rng.uniform(lo, hi, (count, samples.dim))
    _, idx = tree.query(draws)
    return SampleSet(samples.xs[idx].copy(), samples.x_nexts[idx].copy(), samples.qs[idx].copy())


@dataclass(frozen=True)
class FoldSplit:
    """Assignment of trajectory ids to folds 0..k-1, sizes differing by <= 1."""

    assignments: dict
    k: int

    def fold_ids(self, fold: int) -> list:
        return [tid for tid, f in self.assignments.items() if f == fold]


def kfold_split(logs, k: int = 5, rng: np.random.Generator | None = None) -> FoldSplit:
    """Random balanced partition by trajectory (never by row)."""
    ids = [tl.trajectory_id for tl in logs]
    if len(set(ids)) != len(ids):
        raise ValueError("trajectory ids must be unique")
    if len(ids) < k:
        raise ValueError(f"need at least {k} trajectories, got {len(ids)}")
    rng = rng or np.random.default_rng()
    order = rng.permutation(len(ids))
    return FoldSplit({ids[j]: i % k for i, j in enumerate(order)}, k)


def save_fold_split(path, split: FoldSplit) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["traj", "fold"])
        for tid, fold in split.assignments.items():
            writer.writerow([tid, fold])


def scripted_merge_controller(x: np.ndarray) -> np.ndarray:
    """Hand-tuned PD rule steering car 1 toward the gap midpoint at matched speed."""
    dx12, dv12, dx02, dv02 = x
    u = 0.08 * (0.5 * dx02 - dx12) + 0.9 * (dv02 - dv12)
    return np.array([np.clip(u, -6.0, 6.0)])


def generate_replay_dataset(
    problem: LMDPProblem,
    controller,
    n_trajectories: int,
    steps: int,
    rng: np.random.Generator,
    quantum: float = LATTICE_QUANTUM,
):
    """Controlled rollouts with lattice-snapped states, ready for reconstruction.

    Each step stores x_{k+1} = snap(passive step) + snap(B u dt); both terms
    are lattice multiples, so the sum is exact and reconstruct_passive with
    the same quantum returns the snapped passive states bitwise.
    """
    dyn = problem.dynamics
    logs = []
    for traj in range(n_trajectories):
        x = quantize_lattice(problem.sample_init(rng), quantum)
        ts = np.empty(steps + 1)
        xs = np.empty((steps + 1, dyn.dim))
        us = np.zeros((steps + 1, dyn.action_dim))
        for k in range(steps):
            ts[k] = k * dyn.dt
            xs[k] = x
            u = np.asarray(controller(x), dtype=float)
            us[k] = u
            p = quantize_lattice(step_passive(dyn, x, rng), quantum)
            c = quantize_lattice(dyn.input_gain @ (u * dyn.dt), quantum)
            x = p + c
        ts[steps] = steps * dyn.dt
        xs[steps] = x
        logs.append(TrajectoryLog(f"traj{traj}", ts, xs, us, dyn.dt))
    return logs
