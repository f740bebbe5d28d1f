"""Evaluation suite: counting MAE/RMSE, point-localization average
precision (L-AP / L-mAP), and trajectory-level average precision
(T-AP / T-mAP) with a 25-pixel per-frame segment rule.

AP here is the area under the stepwise precision-recall curve taken
point-by-point in confidence order (no precision-envelope smoothing):
``AP = sum over TP ranks k of precision(k) / n_gt``.

L-AP matching: predictions are pooled over frames and processed in
descending score order; each matches the nearest unmatched ground-truth
point of the same frame within the pixel threshold, else counts as a false
positive.

T-AP matching: a prediction/ground-truth pair's match ratio is
``r = #(frames where both exist and distance <= px_threshold) /
#(frames where either exists)``, which penalizes early termination and
hallucinated extension alike.  Predictions are processed in descending
confidence (mean observation score); each consumes the unmatched
ground-truth track with the highest positive r and counts as a true
positive iff ``r >= ratio_threshold``.  The matching is therefore
independent of the ratio threshold, which makes T-AP provably
non-increasing as the threshold grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .iomodel import Trajectory

L_AP_THRESHOLDS = tuple(range(1, 26))          # pixels
T_AP_THRESHOLDS = (0.10, 0.15, 0.20)           # match ratios
PX_THRESHOLD = 25.0                            # per-frame segment rule


@dataclass
class MetricReport:
    mae: float
    rmse: float
    l_ap: dict          # pixel threshold -> AP
    l_map: float
    t_ap: dict          # ratio threshold -> AP
    t_map: float

    REPORT_L_THRESHOLDS = (10, 15, 20)

    def to_text(self) -> str:
        lines = [f"mae={self.mae!r}", f"rmse={self.rmse!r}"]
        for t in self.REPORT_L_THRESHOLDS:
            lines.append(f"l_ap_{t}={self.l_ap[t]!r}")
        lines.append(f"l_map={self.l_map!r}")
        for t in T_AP_THRESHOLDS:
            lines.append(f"t_ap_{t:.2f}={self.t_ap[t]!r}")
        lines.append(f"t_map={self.t_map!r}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def csv_header() -> str:
        cols = ["mae", "rmse"]
        cols += [f"l_ap_{t}" for t in MetricReport.REPORT_L_THRESHOLDS]
        cols.append("l_map")
        cols += [f"t_ap_{t:.2f}" for t in T_AP_THRESHOLDS]
        cols.append("t_map")
        return ",".join(cols)

    def csv_row(self) -> str:
        vals = [self.mae, self.rmse]
        vals += [self.l_ap[t] for t in self.REPORT_L_THRESHOLDS]
        vals.append(self.l_map)
        vals += [self.t_ap[t] for t in T_AP_THRESHOLDS]
        vals.append(self.t_map)
        return ",".join(repr(v) for v in vals)


def counting_errors(pred_counts: list, gt_counts: list) -> tuple:
    """Mean absolute error and root-mean-square error of per-frame counts."""
    if len(pred_counts) == 0 or len(pred_counts) != len(gt_counts):
        raise ValueError("count sequences must be non-empty and equal-length")
    diff = np.asarray(pred_counts, dtype=np.float64) - np.asarray(
        gt_counts, dtype=np.float64
    )
    mae = float(np.abs(diff).mean())
    rmse = float(math.sqrt((diff**2).mean()))
    return mae, rmse


def _ap_from_flags(flags: list, n_gt: int) -> float:
    """Stepwise PR area from an ordered TP/FP flag sequence."""
    if n_gt == 0:
        return 1.0 if not flags else 0.0
    tp = 0
    area = 0.0
    for k, is_tp in enumerate(flags, start=1):
        if is_tp:
            tp += 1
            area += tp / k
    return area / n_gt


def localization_ap(pred_frames: list, gt_frames: list, threshold: float) -> float:
    """Point-localization AP at one pixel-distance threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    n_gt = sum(len(g) for g in gt_frames)
    pool = [
        (-p.score, f, j, p)
        for f, pts in enumerate(pred_frames)
        for j, p in enumerate(pts)
    ]
    pool.sort(key=lambda e: e[:3])
    if n_gt == 0:
        return 1.0 if not pool else 0.0

    taken = [np.zeros(len(g), dtype=bool) for g in gt_frames]
    gt_xy = [
        np.array([[g.x, g.y] for g in pts], dtype=np.float64).reshape(-1, 2)
        for pts in gt_frames
    ]
    flags = []
    for _, f, _, p in pool:
        hit = False
        if f < len(gt_frames) and len(gt_frames[f]):
            d = np.hypot(gt_xy[f][:, 0] - p.x, gt_xy[f][:, 1] - p.y)
            d[taken[f]] = np.inf
            best = int(np.argmin(d))
            if d[best] <= threshold:
                taken[f][best] = True
                hit = True
        flags.append(hit)
    return _ap_from_flags(flags, n_gt)


def l_map(pred_frames: list, gt_frames: list,
          thresholds: tuple = L_AP_THRESHOLDS) -> float:
    """Mean of localization AP over the pixel thresholds (default 1..25)."""
    return float(
        np.mean([localization_ap(pred_frames, gt_frames, t) for t in thresholds])
    )


def _track_table(t: Trajectory) -> dict:
    return {f: (p.x, p.y) for f, p in t.observations}


def _match_ratio(pred: dict, gt: dict, px_threshold: float) -> float:
    either = set(pred) | set(gt)
    if not either:
        return 0.0
    both = 0
    for f in pred.keys() & gt.keys():
        px, py = pred[f]
        gx, gy = gt[f]
        if math.hypot(px - gx, py - gy) <= px_threshold:
            both += 1
    return both / len(either)


def _confidence(t: Trajectory) -> float:
    return float(np.mean([p.score for _, p in t.observations]))


def tracking_ap(
    pred_tracks: list,
    gt_tracks: list,
    ratio_threshold: float,
    px_threshold: float = PX_THRESHOLD,
) -> float:
    """Trajectory-level AP at one match-ratio threshold."""
    if not 0.0 < ratio_threshold <= 1.0:
        raise ValueError("ratio threshold must be in (0, 1]")
    for t in gt_tracks:
        if not t.observations:
            raise ValueError(f"ground-truth track {t.id} has no observations")
    if not gt_tracks:
        return 1.0 if not pred_tracks else 0.0

    gt_tabs = [_track_table(t) for t in gt_tracks]
    order = sorted(
        range(len(pred_tracks)),
        key=lambda i: (-_confidence(pred_tracks[i]), pred_tracks[i].id),
    )
    taken = np.zeros(len(gt_tracks), dtype=bool)
    flags = []
    for i in order:
        ptab = _track_table(pred_tracks[i])
        best_r, best_g = 0.0, -1
        for g, gtab in enumerate(gt_tabs):
            if taken[g]:
                continue
            r = _match_ratio(ptab, gtab, px_threshold)
            if r > best_r:
                best_r, best_g = r, g
        if best_g >= 0:
            taken[best_g] = True
        flags.append(best_r >= ratio_threshold)
    return _ap_from_flags(flags, len(gt_tracks))


def t_map(pred_tracks: list, gt_tracks: list,
          px_threshold: float = PX_THRESHOLD) -> float:
    """Mean of tracking AP over the ratio thresholds {0.10, 0.15, 0.20}."""
    return float(
        np.mean(
            [
                tracking_ap(pred_tracks, gt_tracks, rt, px_threshold)
                for rt in T_AP_THRESHOLDS
            ]
        )
    )


def _per_frame_points(tracks: list, frame_count: int) -> list:
    frames = [[] for _ in range(frame_count)]
    for t in tracks:
        for f, p in t.observations:
            if 0 <= f < frame_count:
                frames[f].append(p)
    return frames


def evaluate(pred_tracks: list, gt_tracks: list,
             frame_count: int | None = None) -> MetricReport:
    """Full report for a prediction/ground-truth trajectory pair."""
    if frame_count is None:
        last = [f for t in pred_tracks + gt_tracks for f, _ in t.observations]
        frame_count = (max(last) + 1) if last else 0
    if frame_count == 0:
        raise ValueError("cannot evaluate with zero frames")
    pred_frames = _per_frame_points(pred_tracks, frame_count)
    gt_frames = _per_frame_points(gt_tracks, frame_count)
    mae, rmse = counting_errors(
        [len(f) for f in pred_frames], [len(f) for f in gt_frames]
    )
    l_ap = {t: localization_ap(pred_frames, gt_frames, t) for t in L_AP_THRESHOLDS}
    t_ap = {t: tracking_ap(pred_tracks, gt_tracks, t) for t in T_AP_THRESHOLDS}
    return MetricReport(
        mae=mae,
        rmse=rmse,
        l_ap=l_ap,
        l_map=float(np.mean(list(l_ap.values()))),
        t_ap=t_ap,
        t_map=float(np.mean(list(t_ap.values()))),
    )
