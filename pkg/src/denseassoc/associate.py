"""Object association and tracking: cost fusion, optimal bipartite matching,
gating, and trajectory bookkeeping.

Fused scores are higher-is-better: ``-lambda * dist01 + (1 - lambda) * sim``.
The matcher maximizes total fused score over a matching of size min(p, q);
gating then dissolves weak pairs so they spawn/terminate tracks instead.
Unmatched tracks terminate immediately (no coasting window).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import appearrep, localize, motionrep
from .iomodel import (
    ConfigError,
    FeatureSet,
    PipelineConfig,
    Point,
    SceneBundle,
    Trajectory,
)


@dataclass
class Matching:
    """Row/col pairs plus the leftovers; rows and cols each appear once."""

    pairs: list = field(default_factory=list)
    unmatched_rows: list = field(default_factory=list)
    unmatched_cols: list = field(default_factory=list)

    @classmethod
    def empty(cls, p: int, q: int) -> "Matching":
        return cls(pairs=[], unmatched_rows=list(range(p)),
                   unmatched_cols=list(range(q)))


@dataclass
class _ActiveTrack:
    trajectory: Trajectory
    last_frame: int
    last_point_index: int  # index into that frame's points/features


@dataclass
class TrackState:
    """Live tracking state; ``trajectories`` keeps terminated tracks too."""

    active: dict = field(default_factory=dict)      # id -> _ActiveTrack
    trajectories: dict = field(default_factory=dict)  # id -> Trajectory
    next_id: int = 0

    def active_ids(self) -> list:
        return sorted(self.active)


def fuse_cost(dist01: np.ndarray, sim: np.ndarray, lambda_: float) -> np.ndarray:
    """Weighted fusion of rescaled distances and similarities."""
    dist01 = np.asarray(dist01, dtype=np.float64)
    sim = np.asarray(sim, dtype=np.float64)
    if dist01.shape != sim.shape:
        raise ValueError(
            f"shape mismatch: dist {dist01.shape} vs sim {sim.shape}"
        )
    if not 0.0 <= lambda_ <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lambda_}")
    return -lambda_ * dist01 + (1.0 - lambda_) * sim


def _lex_normalize(pairs: list, cost: np.ndarray) -> list:
    """Swap exactly-tied column pairs toward lexicographically smaller order
    so degenerate (duplicated) cost structures produce canonical output."""
    pairs = sorted(pairs)
    changed = True
    while changed:
        changed = False
        for i in range(len(pairs)):
            for j in range(i + 1, len(pairs)):
                (r1, c1), (r2, c2) = pairs[i], pairs[j]
                if c2 < c1 and (
                    cost[r1, c1] + cost[r2, c2] == cost[r1, c2] + cost[r2, c1]
                ):
                    pairs[i], pairs[j] = (r1, c2), (r2, c1)
                    changed = True
    return pairs


def solve_assignment(cost: np.ndarray) -> Matching:
    """Maximize total fused score over a matching of size min(p, q)."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    if cost.size and not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    p, q = cost.shape
    rows, cols = linear_sum_assignment(cost, maximize=True)
    pairs = _lex_normalize(list(zip(rows.tolist(), cols.tolist())), cost)
    used_r = {r for r, _ in pairs}
    used_c = {c for _, c in pairs}
    return Matching(
        pairs=pairs,
        unmatched_rows=[r for r in range(p) if r not in used_r],
        unmatched_cols=[c for c in range(q) if c not in used_c],
    )


def greedy_assignment(cost: np.ndarray) -> Matching:
    """Ablation matcher: rows in ascending order each take their best unused
    column."""
    cost = np.asarray(cost, dtype=np.float64)
    p, q = cost.shape
    pairs = []
    used = np.zeros(q, dtype=bool)
    for r in range(p):
        if used.all():
            break
        masked = np.where(used, -np.inf, cost[r])
        c = int(np.argmax(masked))
        used[c] = True
        pairs.append((r, c))
    used_r = {r for r, _ in pairs}
    used_c = {c for _, c in pairs}
    return Matching(
        pairs=pairs,
        unmatched_rows=[r for r in range(p) if r not in used_r],
        unmatched_cols=[c for c in range(q) if c not in used_c],
    )


def gate(matching: Matching, cost: np.ndarray, gate_score: float) -> Matching:
    """Dissolve pairs whose fused score falls below ``gate_score``."""
    kept, dropped_r, dropped_c = [], [], []
    for r, c in matching.pairs:
        if cost[r, c] < gate_score:
            dropped_r.append(r)
            dropped_c.append(c)
        else:
            kept.append((r, c))
    return Matching(
        pairs=kept,
        unmatched_rows=sorted(matching.unmatched_rows + dropped_r),
        unmatched_cols=sorted(matching.unmatched_cols + dropped_c),
    )


def step_tracks(
    state: TrackState,
    matching: Matching,
    next_points: list,
    frame_index: int,
) -> TrackState:
    """Advance the state by one frame.

    Matching rows index the active trajectories in ascending-id order, cols
    index ``next_points``.  Matched tracks extend, unmatched cols spawn
    fresh ids, unmatched rows terminate (kept in history).
    """
    ids = state.active_ids()
    for r, c in matching.pairs:
        if not 0 <= r < len(ids):
            raise IndexError(f"matching row {r} out of range")
        if not 0 <= c < len(next_points):
            raise IndexError(f"matching col {c} out of range")

    for r, c in matching.pairs:
        tid = ids[r]
        entry = state.active[tid]
        entry.trajectory.observations.append((frame_index, next_points[c]))
        entry.last_frame = frame_index
        entry.last_point_index = c
    for r in matching.unmatched_rows:
        del state.active[ids[r]]
    for c in sorted(matching.unmatched_cols):
        tid = state.next_id
        state.next_id += 1
        traj = Trajectory(tid, [(frame_index, next_points[c])])
        state.trajectories[tid] = traj
        state.active[tid] = _ActiveTrack(traj, frame_index, c)
    return state


def _frame_points(bundle: SceneBundle, config: PipelineConfig) -> list:
    if bundle.points is not None:
        return bundle.points
    return [
        localize.extract_peaks(
            d,
            config.peak_window,
            config.peak_rel_threshold,
            config.peak_abs_threshold,
        )
        for d in bundle.density
    ]


def _similarity(
    config: PipelineConfig, f_prev: FeatureSet, f_next: FeatureSet
) -> np.ndarray:
    backend = config.retrieval_backend
    if backend == "cosine":
        return appearrep.similarity_cosine(f_prev, f_next)
    if backend == "euclidean":
        return appearrep.similarity_euclidean(f_prev, f_next)
    if backend == "diffusion":
        return appearrep.similarity_diffusion(
            f_prev, f_next, alpha=config.alpha, knn_k=config.knn_k,
            gamma=config.gamma,
        )
    raise ConfigError(f"unknown retrieval backend {backend!r}")


def track_sequence(bundle: SceneBundle, config: PipelineConfig) -> list:
    """Run the full per-pair pipeline and return all trajectories.

    Per frame pair: predict previous positions from the motion field, build
    the rescaled distance matrix and the similarity matrix, fuse, solve the
    assignment, gate, and update track state.  With lambda == 1 the
    similarity term vanishes, so the appearance backend (and features) are
    not required.
    """
    config.validate()
    n = bundle.frame_count
    if n == 0:
        return []
    points = _frame_points(bundle, config)
    needs_features = config.lambda_ < 1.0
    if needs_features and bundle.features is None:
        raise ConfigError(
            f"retrieval backend {config.retrieval_backend!r} needs feature "
            f"sets, but the bundle has none (use lambda=1 for motion-only)"
        )

    state = TrackState()
    step_tracks(state, Matching.empty(0, len(points[0])), points[0], 0)

    for i in range(n - 1):
        next_pts = points[i + 1]
        ids = state.active_ids()
        prev_pts = [state.active[t].trajectory.observations[-1][1] for t in ids]
        predicted = motionrep.predict_prev_positions(next_pts, bundle.motion[i])
        dist01 = motionrep.rescale01(motionrep.distance_matrix(prev_pts, predicted))

        if needs_features:
            prev_idx = [state.active[t].last_point_index for t in ids]
            f_prev = FeatureSet(bundle.features[i].vectors[prev_idx].reshape(
                len(prev_idx), bundle.features[i].dim))
            f_next = bundle.features[i + 1]
            sim = _similarity(config, f_prev, f_next)
        else:
            sim = np.zeros_like(dist01)

        fused = fuse_cost(dist01, sim, config.lambda_)
        if config.matcher == "greedy":
            matching = greedy_assignment(fused)
        else:
            matching = solve_assignment(fused)
        matching = gate(matching, fused, config.gate_score)
        step_tracks(state, matching, next_pts, i + 1)

    return [state.trajectories[tid] for tid in sorted(state.trajectories)]
