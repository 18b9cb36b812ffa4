"""Classifier metrics and multi-annotator agreement.

ROC points come from a threshold sweep over all distinct scores; the
area under the curve is the trapezoidal integral, which equals the
probability that a random positive outscores a random negative with
ties counted half.  Fleiss' kappa measures chance-corrected agreement
between a fixed number of raters.  No plotting happens here; figures
are rendered by the CLI report path.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class EvalReport:
    """ROC points plus point metrics at a fixed threshold."""

    roc_points: tuple[tuple[float, float], ...]
    auc: float
    accuracy: float
    precision: float
    recall: float
    f1: float
    threshold: float
    n_positive: int
    n_negative: int

    def metric_lines(self) -> list[str]:
        """One machine-parseable ``name<TAB>value`` line per metric."""
        return [
            f"auc\t{self.auc!r}",
            f"accuracy\t{self.accuracy!r}",
            f"precision\t{self.precision!r}",
            f"recall\t{self.recall!r}",
            f"f1\t{self.f1!r}",
            f"threshold\t{self.threshold!r}",
            f"n_positive\t{self.n_positive}",
            f"n_negative\t{self.n_negative}",
        ]


def _validate_scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or y.ndim != 1:
        raise DataError("scores and labels must be one-dimensional")
    if s.shape[0] != y.shape[0]:
        raise DataError(f"length mismatch: {s.shape[0]} scores vs {y.shape[0]} labels")
    if s.shape[0] == 0:
        raise DataError("scores and labels must be non-empty")
    if not np.all(np.isfinite(s)):
        raise DataError("scores must be finite")
    return s, y.astype(bool)


def roc_and_auc(scores, labels) -> tuple[tuple[tuple[float, float], ...], float]:
    """ROC points over all distinct score thresholds, and the AUC.

    The sweep starts above the highest score (point (0, 0)) and ends
    below the lowest (point (1, 1)); tied scores enter together, so the
    trapezoid rule gives ties half credit.  Single-class input has no
    defined AUC and raises.
    """
    s, y = _validate_scores_labels(scores, labels)
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC undefined: both classes must be present")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = s.size
    while i < n:
        j = i
        while j < n and s_sorted[j] == s_sorted[i]:
            j += 1
        tp += int(y_sorted[i:j].sum())
        fp += (j - i) - int(y_sorted[i:j].sum())
        points.append((fp / n_neg, tp / n_pos))
        i = j
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return tuple(points), float(auc)


def point_metrics(
    scores, labels, threshold: float = 0.5
) -> tuple[float, float, float, float]:
    """(accuracy, precision, recall, f1) at ``score >= threshold``.

    Degenerate ratios (no predicted positives, no true positives) are 0
    by convention, so the metrics are total.
    """
    s, y = _validate_scores_labels(scores, labels)
    pred = s >= threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    tn = int(np.sum(~pred & ~y))
    accuracy = (tp + tn) / s.size
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if (precision + recall) > 0.0
        else 0.0
    )
    return accuracy, precision, recall, f1


def build_report(scores, labels, threshold: float = 0.5) -> EvalReport:
    """Full evaluation: ROC/AUC plus point metrics at ``threshold``."""
    points, auc = roc_and_auc(scores, labels)
    accuracy, precision, recall, f1 = point_metrics(scores, labels, threshold)
    y = np.asarray(labels).astype(bool)
    return EvalReport(
        roc_points=points,
        auc=auc,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        threshold=threshold,
        n_positive=int(y.sum()),
        n_negative=int(y.size - y.sum()),
    )


def write_roc_table(points, path: str | Path) -> None:
    """Tab-delimited ROC points for external plotting."""
    lines = ["fpr\ttpr"]
    lines.extend(f"{x!r}\t{y!r}" for x, y in points)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class AnnotationMatrix:
    """Item-by-category rating counts with a constant rater count per item."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.counts)
        if arr.ndim != 2:
            raise DataError("annotation matrix must be two-dimensional")
        if arr.shape[0] < 1 or arr.shape[1] < 2:
            raise DataError("annotation matrix needs >= 1 item and >= 2 categories")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(arr == np.floor(arr)):
                raise DataError("annotation counts must be integers")
            arr = arr.astype(np.int64)
        if np.any(arr < 0):
            raise DataError("annotation counts must be non-negative")
        row_sums = arr.sum(axis=1)
        if not np.all(row_sums == row_sums[0]):
            raise DataError("every item must have the same number of ratings")
        if row_sums[0] < 2:
            raise DataError("need at least 2 raters per item")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @property
    def raters_per_item(self) -> int:
        return int(self.counts[0].sum())

    @property
    def n_items(self) -> int:
        return int(self.counts.shape[0])

    @property
    def n_categories(self) -> int:
        return int(self.counts.shape[1])


def fleiss_kappa(matrix: AnnotationMatrix) -> float:
    """Chance-corrected agreement for a fixed number of raters per item.

    Raises when chance agreement is 1 (all ratings in one category),
    where the statistic is undefined; returning 0 there would fake
    "no agreement" for degenerate data.
    """
    counts = matrix.counts.astype(np.float64)
    r = float(matrix.raters_per_item)
    per_item = (np.sum(counts * counts, axis=1) - r) / (r * (r - 1.0))
    p_observed = float(per_item.mean())
    category_share = counts.sum(axis=0) / counts.sum()
    p_expected = float(np.sum(category_share * category_share))
    if p_expected >= 1.0:
        raise DataError("kappa undefined: all ratings fall in a single category")
    return (p_observed - p_expected) / (1.0 - p_expected)


def read_annotation_matrix(path: str | Path) -> AnnotationMatrix:
    """Whitespace- or tab-delimited integer count rows."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            rows.append([int(tok) for tok in line.split()])
        except ValueError as exc:
            raise DataError(f"matrix line {lineno}: {exc}") from exc
    if not rows:
        raise DataError("annotation matrix file is empty")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DataError("annotation matrix rows have unequal lengths")
    return AnnotationMatrix(np.asarray(rows, dtype=np.int64))


@dataclass(frozen=True)
class HumanEvalReport:
    """Accuracy and agreement of a rater panel against item truth."""

    rater_accuracies: tuple[float, ...]
    mean_accuracy: float
    min_accuracy: float
    max_accuracy: float
    item_fraction_correct: tuple[float, ...]
    mean_fraction_positive_items: float | None
    mean_fraction_negative_items: float | None
    kappa: float | None

    def metric_lines(self) -> list[str]:
        lines = [
            f"raters\t{len(self.rater_accuracies)}",
            f"mean_accuracy\t{self.mean_accuracy!r}",
            f"min_accuracy\t{self.min_accuracy!r}",
            f"max_accuracy\t{self.max_accuracy!r}",
        ]
        if self.mean_fraction_positive_items is not None:
            lines.append(
                f"mean_fraction_correct_positive_items\t{self.mean_fraction_positive_items!r}"
            )
        if self.mean_fraction_negative_items is not None:
            lines.append(
                f"mean_fraction_correct_negative_items\t{self.mean_fraction_negative_items!r}"
            )
        if self.kappa is not None:
            lines.append(f"fleiss_kappa\t{self.kappa!r}")
        return lines


def human_eval_report(
    annotations: list[list[bool]], truth: list[bool]
) -> HumanEvalReport:
    """Panel report: per-rater accuracy, per-item agreement, and kappa.

    ``annotations`` holds one boolean list per rater.  Kappa is computed
    from the induced item-by-category vote matrix and is None for a
    single rater, where it has no meaning.
    """
    if not annotations:
        raise DataError("need at least one rater")
    truth_arr = np.asarray([bool(v) for v in truth])
    n_items = truth_arr.size
    if n_items == 0:
        raise DataError("need at least one item")
    votes = []
    for i, rater in enumerate(annotations):
        arr = np.asarray([bool(v) for v in rater])
        if arr.size != n_items:
            raise DataError(
                f"rater {i} rated {arr.size} items, expected {n_items}"
            )
        votes.append(arr)
    vote_matrix = np.stack(votes)  # raters x items

    rater_acc = (vote_matrix == truth_arr).mean(axis=1)
    item_fraction = (vote_matrix == truth_arr).mean(axis=0)

    def _mean_over(mask: np.ndarray) -> float | None:
        return float(item_fraction[mask].mean()) if mask.any() else None

    kappa = None
    if vote_matrix.shape[0] >= 2:
        counts = np.stack(
            [(~vote_matrix).sum(axis=0), vote_matrix.sum(axis=0)], axis=1
        )
        kappa = fleiss_kappa(AnnotationMatrix(counts))

    return HumanEvalReport(
        rater_accuracies=tuple(float(a) for a in rater_acc),
        mean_accuracy=float(rater_acc.mean()),
        min_accuracy=float(rater_acc.min()),
        max_accuracy=float(rater_acc.max()),
        item_fraction_correct=tuple(float(f) for f in item_fraction),
        mean_fraction_positive_items=_mean_over(truth_arr),
        mean_fraction_negative_items=_mean_over(~truth_arr),
        kappa=kappa,
    )
