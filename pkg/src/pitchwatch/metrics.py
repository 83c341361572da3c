"""Confusion accounting and the four evaluation measures.

Positive class is "injured". Zero-denominator cases (no predicted or no
actual positives) report 0 rather than NaN, matching how all-miss
transfer results are conventionally printed. Reports round to two
decimals; stored values keep full precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import AlignmentError, InsufficientDataError, InvalidInputError
from .net import Prediction
from .records import INJURED, LabeledPitch

COLUMNS = ("acc", "prec", "rec", "f1")
GROUPINGS = ("pitcher", "injury", "k", "cohort")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise InvalidInputError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsRow:
    acc: float
    prec: float
    rec: float
    f1: float
    context: dict = field(default_factory=dict)

    def value(self, column: str) -> float:
        return getattr(self, column)


def confusion(preds: Sequence[Prediction], labels) -> ConfusionCounts:
    """Count tp/fp/fn/tn; predictions and labels must cover the same ids."""
    if isinstance(labels, Mapping):
        truth = dict(labels)
    else:
        truth = {lp.record.pitch_id: lp.label for lp in labels}
    pred_ids = [p.pitch_id for p in preds]
    if len(set(pred_ids)) != len(pred_ids):
        raise AlignmentError("duplicate pitch ids in predictions")
    if set(pred_ids) != set(truth):
        missing = set(truth) - set(pred_ids)
        extra = set(pred_ids) - set(truth)
        raise AlignmentError(f"prediction/label id mismatch (missing={sorted(missing)[:3]}, "
                             f"extra={sorted(extra)[:3]})")
    tp = fp = fn = tn = 0
    for p in preds:
        actual_pos = truth[p.pitch_id] == INJURED
        if p.is_injured and actual_pos:
            tp += 1
        elif p.is_injured:
            fp += 1
        elif actual_pos:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def _ratio(num: int, den: int) -> float:
    return num / den if den > 0 else 0.0


def compute_metrics(c: ConfusionCounts, context: dict | None = None) -> MetricsRow:
    """Accuracy, precision, recall and their harmonic mean (F1)."""
    if c.total == 0:
        raise InsufficientDataError("cannot compute metrics over an empty evaluation set")
    prec = _ratio(c.tp, c.tp + c.fp)
    rec = _ratio(c.tp, c.tp + c.fn)
    f1 = 2.0 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
    return MetricsRow(
        acc=(c.tp + c.tn) / c.total,
        prec=prec,
        rec=rec,
        f1=f1,
        context=dict(context or {}),
    )


@dataclass
class Table:
    """Grouped metric rows plus an unweighted average row."""

    group_column: str
    rows: list[MetricsRow]
    average: MetricsRow

    def to_csv(self) -> str:
        header = f"{self.group_column.capitalize()},Acc,Prec,Rec,F1"
        lines = [header]
        for r in self.rows + [self.average]:
            key = r.context.get(self.group_column, "average")
            lines.append(f"{key},{r.acc:.10g},{r.prec:.10g},{r.rec:.10g},{r.f1:.10g}")
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        header = f"| {self.group_column.capitalize()} | Acc | Prec | Rec | F1 |"
        sep = "|---|---|---|---|---|"
        lines = [header, sep]
        for r in self.rows + [self.average]:
            key = r.context.get(self.group_column, "Average")
            lines.append(f"| {key} | {r.acc:.2f} | {r.prec:.2f} | {r.rec:.2f} | {r.f1:.2f} |")
        return "\n".join(lines) + "\n"


def _mean_row(rows: Sequence[MetricsRow], context: dict) -> MetricsRow:
    n = len(rows)
    return MetricsRow(
        acc=sum(r.acc for r in rows) / n,
        prec=sum(r.prec for r in rows) / n,
        rec=sum(r.rec for r in rows) / n,
        f1=sum(r.f1 for r in rows) / n,
        context=context,
    )


def tabulate(rows: Sequence[MetricsRow], grouping: str) -> Table:
    """Group rows by a context key and append the unweighted average."""
    if grouping not in GROUPINGS:
        raise InvalidInputError(f"grouping must be one of {GROUPINGS}, got {grouping!r}")
    if not rows:
        raise InsufficientDataError("no rows to tabulate")
    groups: dict[object, list[MetricsRow]] = {}
    for r in rows:
        if grouping not in r.context:
            raise InvalidInputError(f"row context {r.context} lacks the {grouping!r} key")
        groups.setdefault(r.context[grouping], []).append(r)

    def sort_key(k: object):
        return (0, k) if isinstance(k, (int, float)) else (1, str(k))

    grouped = [
        _mean_row(groups[key], {grouping: key}) if len(groups[key]) > 1 else
        MetricsRow(groups[key][0].acc, groups[key][0].prec, groups[key][0].rec,
                   groups[key][0].f1, {grouping: key})
        for key in sorted(groups, key=sort_key)
    ]
    return Table(grouping, grouped, _mean_row(grouped, {}))
