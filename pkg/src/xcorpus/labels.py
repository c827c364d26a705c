"""Binary labels from raw self-reports.

Each corpus scheme has a fixed threshold at the midpoint of its instrument:
SUDS 50 (0-100), six-item STAI 15 (6-24), continuous arousal 5 (1-10, averaged
over the phase).  Scores at the threshold count as high unless the rule says
otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Empty, SchemeRangeViolation, ValidationError
from .signal_model import SCORE_RANGES, LabelScheme, RawReport


@dataclass(frozen=True)
class LabelRule:
    scheme: LabelScheme
    threshold: float
    inclusive: bool = True

    def __post_init__(self):
        scheme = LabelScheme(self.scheme)
        object.__setattr__(self, "scheme", scheme)
        lo, hi = SCORE_RANGES[scheme]
        if not lo <= self.threshold <= hi:
            raise ValidationError(f"threshold {self.threshold} outside the {scheme.value} range [{lo}, {hi}]")

    def apply(self, score: float) -> int:
        if self.inclusive:
            return int(score >= self.threshold)
        return int(score > self.threshold)


DEFAULT_RULES = {
    LabelScheme.SUDS: LabelRule(LabelScheme.SUDS, 50.0),
    LabelScheme.STAI6: LabelRule(LabelScheme.STAI6, 15.0),
    LabelScheme.AROUSAL_CONTINUOUS: LabelRule(LabelScheme.AROUSAL_CONTINUOUS, 5.0),
}


def report_score(report: RawReport) -> float:
    """Scalar score of a report; continuous series are averaged."""
    lo, hi = SCORE_RANGES[report.scheme]
    if report.series is not None:
        score = float(np.mean(report.series))
    else:
        score = float(report.scalar_score)
    if not lo <= score <= hi:
        raise SchemeRangeViolation(f"{report.scheme.value} score {score} outside [{lo}, {hi}]")
    return score


def label(report: RawReport, rule: LabelRule = None) -> int:
    """Map a self-report to 0 (low) or 1 (high)."""
    if rule is None:
        rule = DEFAULT_RULES[report.scheme]
    elif rule.scheme is not report.scheme:
        raise ValidationError(f"rule for {rule.scheme.value} applied to a {report.scheme.value} report")
    return rule.apply(report_score(report))


def class_balance(labels):
    """Return ``(n_pos, n_neg, minority_ratio)``.

    ``labels`` may be a sequence of 0/1 values or of objects with a ``label``
    attribute.
    """
    labels = [getattr(s, "label", s) for s in labels]
    if not labels:
        raise Empty("no labels")
    arr = np.asarray(labels, dtype=int)
    n_pos = int(np.sum(arr == 1))
    n_neg = int(np.sum(arr == 0))
    hi = max(n_pos, n_neg)
    return n_pos, n_neg, min(n_pos, n_neg) / hi
