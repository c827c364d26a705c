import numpy as np
import pytest

from xcorpus.errors import Empty, SchemeRangeViolation, ValidationError
from xcorpus.labels import DEFAULT_RULES, LabelRule, class_balance, label
from xcorpus.signal_model import LabelScheme, RawReport

S = LabelScheme


@pytest.mark.parametrize("scheme,score,expected", [
    (S.SUDS, 50, 1), (S.SUDS, 49.9, 0), (S.SUDS, 100, 1), (S.SUDS, 0, 0),
    (S.STAI6, 15, 1), (S.STAI6, 14, 0), (S.STAI6, 24, 1),
])
def test_scalar_thresholds(scheme, score, expected):
    assert label(RawReport(scheme, scalar_score=score)) == expected


def test_arousal_series_mean():
    assert label(RawReport(S.AROUSAL_CONTINUOUS, series=[4, 4, 8])) == 1
    assert label(RawReport(S.AROUSAL_CONTINUOUS, series=[4, 5, 5.9])) == 0


def test_constant_series_equals_scalar():
    for c in np.linspace(1, 10, 37):
        rule = DEFAULT_RULES[S.AROUSAL_CONTINUOUS]
        assert label(RawReport(S.AROUSAL_CONTINUOUS, series=[c] * 7)) == rule.apply(c)


def test_monotone_in_score():
    for scheme, (lo, hi) in ((S.SUDS, (0, 100)), (S.STAI6, (6, 24))):
        labels = [label(RawReport(scheme, scalar_score=s)) for s in np.linspace(lo, hi, 101)]
        assert all(a <= b for a, b in zip(labels, labels[1:]))


def test_exclusive_rule_flag():
    rule = LabelRule(S.STAI6, 15, inclusive=False)
    assert label(RawReport(S.STAI6, scalar_score=15), rule) == 0


def test_rule_threshold_in_range():
    with pytest.raises(ValidationError):
        LabelRule(S.SUDS, 150)


def test_series_out_of_range():
    with pytest.raises((SchemeRangeViolation, ValidationError)):
        label(RawReport(S.AROUSAL_CONTINUOUS, series=[11, 12]))


def test_class_balance():
    assert class_balance([1, 1, 0, 0]) == (2, 2, 1.0)
    assert class_balance([1, 0, 0, 0]) == (1, 3, 1 / 3)
    assert class_balance([1, 1, 1]) == (3, 0, 0.0)
    with pytest.raises(Empty):
        class_balance([])
