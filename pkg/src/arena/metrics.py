"""Episode metrics (MSR, NRA) and detection metrics (COCO mAP, t-mAP).

Detection scoring follows the standard COCO recipe: per class and IoU
threshold, detections are greedily matched in descending score order
(ties keep input order) to the unmatched ground truth with the highest
IoU at or above the threshold; average precision is the 101-point
interpolated area under the precision/recall curve; mAP averages over
the classes present in the ground truth, then over the ten thresholds
0.50..0.95. At most 100 detections per image (by score) enter the
evaluation.

t-mAP thresholds detections at five score cuts and matches at six IoU
cuts; each of the 30 combinations contributes a precision value
(matched / kept detections; defined 1.0 when both the kept set and the
ground truth are empty, 0.0 when ground truth exists and nothing is
kept) and the metric is their mean.

Regions are axis-aligned boxes [x, y, w, h] or run-length encoded
bitmasks (column-major runs, starting with the zero run). Areas use
the region's own pixel count unless the record pins one. Area bands
are half-open: small [0, 1296), medium [1296, 9216), large
[9216, 90000) square pixels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyInput, KindMismatch, ParseError, ValidationError

COCO_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
TMAP_SCORE_THRESHOLDS = (0.05, 0.1, 0.3, 0.5, 0.7)
TMAP_IOU_THRESHOLDS = (0.1, 0.3, 0.4, 0.5, 0.75, 0.8)
MAX_DETECTIONS = 100
AREA_BANDS = {"small": (0, 1296), "medium": (1296, 9216), "large": (9216, 90000)}
RECALL_POINTS = np.linspace(0.0, 1.0, 101)


@dataclass
class Region:
    kind: str                      # "box" | "mask"
    xywh: tuple | None = None
    mask: np.ndarray | None = None

    def area(self) -> float:
        if self.kind == "box":
            return float(self.xywh[2] * self.xywh[3])
        return float(self.mask.sum())


@dataclass
class Annotation:
    class_name: str
    region: Region
    score: float = 1.0
    area: float | None = None

    def effective_area(self) -> float:
        return self.area if self.area is not None else self.region.area()


@dataclass
class ImageRecord:
    image_id: str
    annotations: list[Annotation] = field(default_factory=list)


@dataclass
class MetricsReport:
    msr: float
    nra: float
    n_episodes: int
    per_task_type: dict

    def to_json(self) -> dict:
        return {"msr": self.msr, "nra": self.nra, "n_episodes": self.n_episodes,
                "per_task_type": self.per_task_type}


# ---------------------------------------------------------------------------
# regions and IoU
# ---------------------------------------------------------------------------

def rle_encode(mask: np.ndarray) -> dict:
    """Column-major run lengths, first run counts zeros."""
    flat = np.asarray(mask, dtype=bool).flatten(order="F")
    counts = []
    current = False
    run = 0
    for v in flat:
        if v == current:
            run += 1
        else:
            counts.append(run)
            current = not current
            run = 1
    counts.append(run)
    return {"size": [int(mask.shape[0]), int(mask.shape[1])], "counts": counts}


def rle_decode(doc: dict) -> np.ndarray:
    h, w = doc["size"]
    counts = doc["counts"]
    total = sum(counts)
    if total != h * w:
        raise ValidationError(f"RLE counts sum {total} != {h}*{w}")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    val = False
    for c in counts:
        if val:
            flat[pos:pos + c] = True
        pos += c
        val = not val
    return flat.reshape((h, w), order="F")


def iou(a: Region, b: Region) -> float:
    """Intersection over union; defined 0.0 when the union is empty."""
    if a.kind != b.kind:
        raise KindMismatch(f"cannot compare {a.kind} with {b.kind}")
    if a.kind == "box":
        ax, ay, aw, ah = a.xywh
        bx, by, bw, bh = b.xywh
        ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
        iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
        inter = ix * iy
        union = aw * ah + bw * bh - inter
    else:
        if a.mask.shape != b.mask.shape:
            raise ValidationError(f"mask shapes differ: {a.mask.shape} vs {b.mask.shape}")
        inter = float(np.logical_and(a.mask, b.mask).sum())
        union = float(np.logical_or(a.mask, b.mask).sum())
    if union <= 0:
        return 0.0
    return float(inter / union)


# ---------------------------------------------------------------------------
# detection file I/O
# ---------------------------------------------------------------------------

def _annotation_from_json(doc: dict, with_score: bool) -> Annotation:
    if "box" in doc:
        region = Region("box", xywh=tuple(float(v) for v in doc["box"]))
    elif "mask" in doc:
        region = Region("mask", mask=rle_decode(doc["mask"]))
    else:
        raise ValidationError(f"annotation needs a box or mask: {doc}")
    score = float(doc.get("score", 1.0)) if with_score else 1.0
    if not (0.0 <= score <= 1.0):
        raise ValidationError(f"score {score} outside [0, 1]")
    area = doc.get("area")
    if area is not None and area < 0:
        raise ValidationError(f"negative area {area}")
    return Annotation(doc["class"], region, score, area)


def load_detection_file(path: str | Path, with_scores: bool) -> list[ImageRecord]:
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    images = []
    for img in doc.get("images", []):
        anns = [_annotation_from_json(a, with_scores) for a in img.get("annotations", [])]
        images.append(ImageRecord(img["image_id"], anns))
    return images


# ---------------------------------------------------------------------------
# matching
# ---------------------------------------------------------------------------

def _cap_detections(dets: list[Annotation], cap: int) -> list[Annotation]:
    if len(dets) <= cap:
        return list(dets)
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    keep = sorted(order[:cap])
    return [dets[i] for i in keep]


def _greedy_match_image(gts: list[Annotation], dets: list[Annotation],
                        thr: float) -> list[bool]:
    """Per detection (score-desc, stable), True when it claims a GT."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    taken = [False] * len(gts)
    hits = [False] * len(dets)
    for di in order:
        best_j, best_iou = -1, thr
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            v = iou(dets[di].region, gt.region)
            if v > best_iou or (v == best_iou and v >= thr and best_j < 0):
                best_j, best_iou = j, v
        if best_j >= 0:
            taken[best_j] = True
            hits[di] = True
    return hits


def _ap_101(scored_hits: list[tuple[float, int, int, bool]], n_gt: int) -> float:
    """101-point interpolated AP from (score, image order, input order, hit)."""
    if n_gt == 0:
        return 0.0
    ordered = sorted(scored_hits, key=lambda t: (-t[0], t[1], t[2]))
    tp = fp = 0
    precisions, recalls = [], []
    for _, _, _, hit in ordered:
        if hit:
            tp += 1
        else:
            fp += 1
        precisions.append(tp / (tp + fp))
        recalls.append(tp / n_gt)
    precisions = np.array(precisions)
    recalls = np.array(recalls)
    # precision envelope from the right
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])
    total = 0.0
    for r in RECALL_POINTS:
        idx = np.searchsorted(recalls, r, side="left")
        total += precisions[idx] if idx < len(precisions) else 0.0
    return total / len(RECALL_POINTS)


def _band_filter(images: list[ImageRecord], band: tuple[float, float] | None) -> list[ImageRecord]:
    if band is None:
        return images
    lo, hi = band
    out = []
    for img in images:
        anns = [a for a in img.annotations if lo <= a.effective_area() < hi]
        out.append(ImageRecord(img.image_id, anns))
    return out


def _classes_in(gt: list[ImageRecord]) -> list[str]:
    seen = set()
    for img in gt:
        for a in img.annotations:
            seen.add(a.class_name)
    return sorted(seen)


def _pair_images(gt: list[ImageRecord], det: list[ImageRecord]):
    det_by_id = {img.image_id: img for img in det}
    if len(det_by_id) != len(det):
        raise ValidationError("duplicate image_id in detections")
    pairs = []
    for i, img in enumerate(gt):
        pairs.append((i, img, det_by_id.get(img.image_id, ImageRecord(img.image_id))))
    return pairs


def _map_value(gt: list[ImageRecord], det: list[ImageRecord],
               iou_thresholds, cap: int) -> tuple[float, dict]:
    classes = _classes_in(gt)
    if not classes:
        return 0.0, {}
    pairs = _pair_images(gt, det)
    capped = [(order, g, _cap_detections(d.annotations, cap)) for order, g, d in pairs]
    per_class = {}
    for cls in classes:
        aps = []
        for thr in iou_thresholds:
            scored = []
            n_gt = 0
            for order, g, dets in capped:
                g_cls = [a for a in g.annotations if a.class_name == cls]
                d_cls = [a for a in dets if a.class_name == cls]
                n_gt += len(g_cls)
                hits = _greedy_match_image(g_cls, d_cls, thr)
                for k, d in enumerate(d_cls):
                    scored.append((d.score, order, k, hits[k]))
            aps.append(_ap_101(scored, n_gt))
        per_class[cls] = float(np.mean(aps))
    overall = float(np.mean([per_class[c] for c in classes]))
    return overall, per_class


def coco_map(gt: list[ImageRecord], det: list[ImageRecord],
             iou_thresholds=COCO_IOU_THRESHOLDS, cap: int = MAX_DETECTIONS) -> dict:
    """{overall, per_class, per_area_band} mean average precision."""
    overall, per_class = _map_value(gt, det, iou_thresholds, cap)
    bands = {}
    for name, band in AREA_BANDS.items():
        b_overall, _ = _map_value(_band_filter(gt, band), _band_filter(det, band),
                                  iou_thresholds, cap)
        bands[name] = b_overall
    return {"overall": overall, "per_class": per_class, "per_area_band": bands}


def t_map(gt: list[ImageRecord], det: list[ImageRecord],
          score_thresholds=TMAP_SCORE_THRESHOLDS,
          iou_thresholds=TMAP_IOU_THRESHOLDS, cap: int = MAX_DETECTIONS) -> float:
    """Mean precision over all (score, IoU) threshold combinations."""
    pairs = _pair_images(gt, det)
    capped = [(g, _cap_detections(d.annotations, cap)) for _, g, d in pairs]
    n_gt_total = sum(len(g.annotations) for g, _ in capped)
    values = []
    for s_thr in score_thresholds:
        kept_sets = [(g, [a for a in dets if a.score >= s_thr]) for g, dets in capped]
        n_kept = sum(len(k) for _, k in kept_sets)
        for i_thr in iou_thresholds:
            if n_kept == 0:
                values.append(1.0 if n_gt_total == 0 else 0.0)
                continue
            matched = 0
            for g, kept in kept_sets:
                classes = {a.class_name for a in kept} | {a.class_name for a in g.annotations}
                for cls in sorted(classes):
                    g_cls = [a for a in g.annotations if a.class_name == cls]
                    d_cls = [a for a in kept if a.class_name == cls]
                    matched += sum(_greedy_match_image(g_cls, d_cls, i_thr))
            values.append(matched / n_kept)
    assert len(values) == len(score_thresholds) * len(iou_thresholds)
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# episode metrics
# ---------------------------------------------------------------------------

@dataclass
class EpisodeSummary:
    m: int
    steps_used: int
    task_type: str | None = None


def summarize_log_lines(lines) -> EpisodeSummary:
    from .runtime import read_episode_log
    header, _, final = read_episode_log(lines)
    return EpisodeSummary(m=int(final["m"]), steps_used=int(final["steps_used"]),
                          task_type=header.get("task_type"))


def episode_metrics(episodes: list[EpisodeSummary]) -> MetricsReport:
    """MSR = mean mission success; NRA = mean actions over all episodes."""
    if not episodes:
        raise EmptyInput("no episodes")
    msr = float(np.mean([e.m for e in episodes]))
    nra = float(np.mean([e.steps_used for e in episodes]))
    per_task: dict[str, dict] = {}
    for e in episodes:
        key = e.task_type or "unknown"
        bucket = per_task.setdefault(key, {"n": 0, "m_sum": 0, "steps_sum": 0})
        bucket["n"] += 1
        bucket["m_sum"] += e.m
        bucket["steps_sum"] += e.steps_used
    breakdown = {
        task: {"n": b["n"], "msr": b["m_sum"] / b["n"], "nra": b["steps_sum"] / b["n"]}
        for task, b in sorted(per_task.items())
    }
    return MetricsReport(msr=msr, nra=nra, n_episodes=len(episodes),
                         per_task_type=breakdown)
