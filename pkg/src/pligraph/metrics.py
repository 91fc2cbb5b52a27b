"""Classification, regression, and pose-ranking metrics.

Metrics that are undefined on the given input (single-class sets, zero
variance) are reported as explicit None markers and serialized as the
string "undefined", never NaN.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .errors import DataError

UNDEFINED = "undefined"

PREDICTION_COLUMNS = ("sample_id", "target_id", "pose_rank", "score", "label", "rmsd")


@dataclass
class PredictionRecord:
    sample_id: str
    target_id: str = ""
    pose_rank: int = 0
    score: float = 0.0
    label: float = 0.0
    rmsd: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise DataError(f"score must be finite, got {self.score}")


@dataclass
class MetricReport:
    counts: dict = field(default_factory=dict)
    accuracy: float | None = None
    sensitivity: float | None = None
    specificity: float | None = None
    auroc: float | None = None
    rmse: float | None = None
    mae: float | None = None
    pearson: float | None = None
    spearman: float | None = None
    r2: float | None = None

    def rows(self, kind: str) -> list[tuple[str, object]]:
        names = (("accuracy", "sensitivity", "specificity", "auroc")
                 if kind == "classification"
                 else ("rmse", "mae", "pearson", "spearman", "r2"))
        out = [(n, getattr(self, n)) for n in names]
        out += sorted(self.counts.items())
        return out


def midranks(values: list[float]) -> list[float]:
    """Ascending 1-based ranks with mid-ranks for ties."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def _pearson(a: list[float], b: list[float]) -> float | None:
    n = len(a)
    ma = sum(a) / n
    mb = sum(b) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = sum((x - ma) ** 2 for x in a)
    vb = sum((y - mb) ** 2 for y in b)
    if va == 0.0 or vb == 0.0:
        return None
    return cov / math.sqrt(va * vb)


def classification_metrics(preds: list[PredictionRecord],
                           threshold: float = 0.5) -> MetricReport:
    """Accuracy / sensitivity / specificity at a threshold plus rank AUROC.

    AUROC uses the mid-rank statistic, which equals concordant-pair counting
    with half credit for ties."""
    if not preds:
        raise DataError("no predictions to evaluate")
    for p in preds:
        if p.label not in (0.0, 1.0):
            raise DataError(f"activity labels must be 0/1, got {p.label}")
    n_pos = sum(1 for p in preds if p.label == 1.0)
    n_neg = len(preds) - n_pos
    tp = sum(1 for p in preds if p.label == 1.0 and p.score >= threshold)
    tn = sum(1 for p in preds if p.label == 0.0 and p.score < threshold)
    report = MetricReport(counts={
        "n": len(preds), "n_pos": n_pos, "n_neg": n_neg,
        "tp": tp, "fn": n_pos - tp, "tn": tn, "fp": n_neg - tn,
    })
    report.accuracy = (tp + tn) / len(preds)
    report.sensitivity = tp / n_pos if n_pos else None
    report.specificity = tn / n_neg if n_neg else None
    if n_pos and n_neg:
        ranks = midranks([p.score for p in preds])
        rank_sum = sum(r for r, p in zip(ranks, preds) if p.label == 1.0)
        u = rank_sum - n_pos * (n_pos + 1) / 2.0
        report.auroc = u / (n_pos * n_neg)
    return report


def regression_metrics(preds: list[PredictionRecord]) -> MetricReport:
    if len(preds) < 2:
        raise DataError(f"need at least 2 predictions, got {len(preds)}")
    scores = [p.score for p in preds]
    labels = [p.label for p in preds]
    n = len(preds)
    sq = [(s - y) ** 2 for s, y in zip(scores, labels)]
    report = MetricReport(counts={"n": n})
    report.rmse = math.sqrt(sum(sq) / n)
    report.mae = sum(abs(s - y) for s, y in zip(scores, labels)) / n
    report.pearson = _pearson(scores, labels)
    report.spearman = _pearson(midranks(scores), midranks(labels))
    my = sum(labels) / n
    ss_tot = sum((y - my) ** 2 for y in labels)
    report.r2 = 1.0 - sum(sq) / ss_tot if ss_tot > 0.0 else None
    return report


def topn_pose_analysis(preds: list[PredictionRecord], n_values: list[int],
                       rmsd_good: float = 2.0,
                       rank_order: str = "desc") -> dict[int, float]:
    """Per-N percentage of complexes whose N best-scored poses include at
    least one pose with rmsd strictly below ``rmsd_good``.

    Poses group by sample_id. ``rank_order`` is "desc" for binding
    probabilities and "asc" for docking energies; score ties break on
    pose_rank for determinism."""
    if rank_order not in ("asc", "desc"):
        raise DataError(f"rank order must be asc or desc, got {rank_order!r}")
    if not preds:
        raise DataError("no predictions to rank")
    groups: dict[str, list[PredictionRecord]] = {}
    for p in preds:
        groups.setdefault(p.sample_id, []).append(p)
    for sid, poses in groups.items():
        if any(p.rmsd is None for p in poses):
            raise DataError(f"complex {sid!r} has poses without rmsd values")
        poses.sort(key=lambda p: (p.score if rank_order == "asc" else -p.score,
                                  p.pose_rank))
    out = {}
    for n in n_values:
        if n < 1:
            raise DataError(f"top-N ranks must be >= 1, got {n}")
        hit = sum(1 for poses in groups.values()
                  if any(p.rmsd < rmsd_good for p in poses[:n]))
        out[n] = 100.0 * hit / len(groups)
    return out


# ---------------------------------------------------------------------------
# prediction CSV

def write_predictions(path, preds: list[PredictionRecord],
                      warnings: dict[int, str] | None = None) -> None:
    """CSV with the standard columns; a warnings column is appended when any
    row carries one (keyed by row index)."""
    warnings = warnings or {}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = list(PREDICTION_COLUMNS)
        if warnings:
            header.append("warnings")
        writer.writerow(header)
        for i, p in enumerate(preds):
            row = [p.sample_id, p.target_id, p.pose_rank, repr(p.score),
                   repr(p.label), "" if p.rmsd is None else repr(p.rmsd)]
            if warnings:
                row.append(warnings.get(i, ""))
            writer.writerow(row)


def read_predictions(path) -> list[PredictionRecord]:
    preds = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(PREDICTION_COLUMNS) <= set(reader.fieldnames):
            raise DataError(
                f"prediction CSV must have columns {','.join(PREDICTION_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                preds.append(PredictionRecord(
                    sample_id=row["sample_id"],
                    target_id=row["target_id"],
                    pose_rank=int(row["pose_rank"]),
                    score=float(row["score"]),
                    label=float(row["label"]),
                    rmsd=float(row["rmsd"]) if row["rmsd"] else None,
                ))
            except (ValueError, KeyError) as exc:
                raise DataError(f"line {lineno}: bad prediction row ({exc})") from exc
    return preds


def write_metric_report(path, report: MetricReport, kind: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for name, value in report.rows(kind):
            writer.writerow([name, UNDEFINED if value is None else repr(value)])


def format_metric_report(report: MetricReport, kind: str) -> str:
    lines = [f"{name:>12s}  {UNDEFINED if value is None else value}"
             for name, value in report.rows(kind)]
    return "\n".join(lines)
