"""Evaluation harness: labeled pairs, confusion counts, and metric rows.

Labels live in {true, false, unknown}. Metrics binarize them: `true` is the
positive class, `false` and `unknown` together form the negative class, so
a prediction of `unknown` against a ground truth of `false` counts as a
true negative. Exact three-way agreement is reported alongside as a
clearly separate column. Precision and recall are defined as 0.0 whenever
their denominator is 0.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .schema import Schema

LABELS = ("true", "false", "unknown")


class MetricsError(Exception):
    pass


class AnnotationError(MetricsError):
    pass


class KeyMismatchError(MetricsError):
    def __init__(self, missing, extra):
        parts = []
        if missing:
            parts.append(f"missing from predictions: {sorted(missing)[:5]}")
        if extra:
            parts.append(f"unexpected in predictions: {sorted(extra)[:5]}")
        super().__init__("; ".join(parts))
        self.missing = frozenset(missing)
        self.extra = frozenset(extra)


@dataclass(frozen=True)
class LabeledPair:
    policy_id: str
    attribute: str
    label: str


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn,
            self.fp + other.fp, self.fn + other.fn,
        )


@dataclass(frozen=True)
class MetricRow:
    scope: str  # "overall", "policy:<id>", or "attribute:<name>"
    counts: ConfusionCounts
    accuracy: float
    precision: float
    recall: float
    exact_accuracy: float | None = None  # three-way label agreement

    @classmethod
    def from_counts(cls, scope: str, counts: ConfusionCounts,
                    exact_accuracy: float | None = None) -> "MetricRow":
        total = counts.total
        accuracy = (counts.tp + counts.tn) / total if total else 0.0
        denom_p = counts.tp + counts.fp
        denom_r = counts.tp + counts.fn
        precision = counts.tp / denom_p if denom_p else 0.0
        recall = counts.tp / denom_r if denom_r else 0.0
        return cls(scope, counts, accuracy, precision, recall, exact_accuracy)

    def rendered(self) -> tuple[str, str, str]:
        """accuracy/precision/recall at the 4-decimal reporting precision."""
        return (f"{self.accuracy:.4f}", f"{self.precision:.4f}", f"{self.recall:.4f}")


def binarize(gt: str, pred: str) -> str:
    """Map a (ground truth, prediction) label pair to TP/TN/FP/FN."""
    if gt not in LABELS or pred not in LABELS:
        raise MetricsError(f"labels must be one of {LABELS}: got ({gt!r}, {pred!r})")
    gt_pos = gt == "true"
    pred_pos = pred == "true"
    if gt_pos:
        return "TP" if pred_pos else "FN"
    return "FP" if pred_pos else "TN"


def _tally(pairs) -> tuple[ConfusionCounts, float]:
    counts = ConfusionCounts()
    exact = 0
    for gt_label, pred_label in pairs:
        outcome = binarize(gt_label, pred_label)
        counts = counts + ConfusionCounts(**{outcome.lower(): 1})
        if gt_label == pred_label:
            exact += 1
    exact_accuracy = exact / counts.total if counts.total else 0.0
    return counts, exact_accuracy


def compute_metrics(
    gt: list[LabeledPair],
    pred: list[LabeledPair],
    scope: str = "overall",
    schema: Schema | None = None,
) -> MetricRow | list[MetricRow]:
    """Tally binarized outcomes over identical (policy, attribute) keys.

    scope "overall" returns a single row; "per_policy" returns rows in
    lexicographic policy order; "per_attribute" returns rows in schema
    order (falling back to name order without a schema).
    """
    gt_map = {(p.policy_id, p.attribute): p.label for p in gt}
    pred_map = {(p.policy_id, p.attribute): p.label for p in pred}
    if gt_map.keys() != pred_map.keys():
        raise KeyMismatchError(
            missing=gt_map.keys() - pred_map.keys(),
            extra=pred_map.keys() - gt_map.keys(),
        )

    if scope == "overall":
        counts, exact = _tally(
            (gt_map[key], pred_map[key]) for key in sorted(gt_map)
        )
        return MetricRow.from_counts("overall", counts, exact)

    if scope == "per_policy":
        policies = sorted({policy for policy, _ in gt_map})
        rows = []
        for policy in policies:
            counts, exact = _tally(
                (gt_map[key], pred_map[key])
                for key in sorted(gt_map) if key[0] == policy
            )
            rows.append(MetricRow.from_counts(f"policy:{policy}", counts, exact))
        return rows

    if scope == "per_attribute":
        names = {attr for _, attr in gt_map}
        if schema is not None:
            order = [a.name for a in schema.base if a.name in names]
            order += sorted(names - set(order))
        else:
            order = sorted(names)
        rows = []
        for name in order:
            counts, exact = _tally(
                (gt_map[key], pred_map[key])
                for key in sorted(gt_map) if key[1] == name
            )
            rows.append(MetricRow.from_counts(f"attribute:{name}", counts, exact))
        return rows

    raise MetricsError(f"unknown scope {scope!r}")


# ---------------------------------------------------------------------------
# Annotation files
# ---------------------------------------------------------------------------

def load_annotations(text: str, schema: Schema) -> list[LabeledPair]:
    """Parse `policy_id,attribute,label` CSV, validated against the schema's
    base attributes."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return []
    if [h.strip() for h in header] != ["policy_id", "attribute", "label"]:
        raise AnnotationError(
            "expected header 'policy_id,attribute,label', "
            f"found {','.join(header)!r}"
        )
    base_names = {a.name for a in schema.base}
    pairs: list[LabeledPair] = []
    seen: set[tuple[str, str]] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise AnnotationError(f"line {lineno}: expected 3 fields, found {len(row)}")
        policy_id, attribute, label = (f.strip() for f in row)
        if attribute not in base_names:
            raise AnnotationError(
                f"line {lineno}: {attribute!r} is not a base attribute"
            )
        if label not in LABELS:
            raise AnnotationError(
                f"line {lineno}: label must be one of {LABELS}, found {label!r}"
            )
        key = (policy_id, attribute)
        if key in seen:
            raise AnnotationError(f"line {lineno}: duplicate pair {key}")
        seen.add(key)
        pairs.append(LabeledPair(policy_id, attribute, label))
    return pairs


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def render_table(rows: list[MetricRow], title: str = "") -> str:
    """Aligned plain-text table of metric rows."""
    header = ("Scope", "Total", "Acc", "Prec", "Rec", "Exact", "(TP,TN,FP,FN)")
    body = []
    for row in rows:
        acc, prec, rec = row.rendered()
        exact = f"{row.exact_accuracy:.4f}" if row.exact_accuracy is not None else "-"
        counts = row.counts
        body.append((
            row.scope, str(counts.total), acc, prec, rec, exact,
            f"({counts.tp},{counts.tn},{counts.fp},{counts.fn})",
        ))
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    lines = []
    if title:
        lines.append(title)
    for record in [header, *body]:
        lines.append("  ".join(field.ljust(width) for field, width in zip(record, widths)).rstrip())
    return "\n".join(lines) + "\n"


def to_records(rows: list[MetricRow]) -> list[dict]:
    """JSON-serializable mirror of MetricRow values."""
    records = []
    for row in rows:
        acc, prec, rec = row.rendered()
        records.append({
            "scope": row.scope,
            "total": row.counts.total,
            "tp": row.counts.tp,
            "tn": row.counts.tn,
            "fp": row.counts.fp,
            "fn": row.counts.fn,
            "accuracy": acc,
            "precision": prec,
            "recall": rec,
            "exact_accuracy": (
                f"{row.exact_accuracy:.4f}" if row.exact_accuracy is not None else None
            ),
        })
    return records
