from __future__ import annotations

import random
from fractions import Fraction

import pytest

from phishcheck.errors import DegenerateClassBalance, MissingVerdict
from phishcheck.evaluate import (
    ConfusionMatrix,
    RocPoint,
    build_report,
    confusion,
    metrics,
    pairwise_auc,
    percent,
    roc_curve,
    round_half_up,
    youden_points,
)
from phishcheck.parse import ParseMode, TriState, Verdict
from phishcheck.snapshot import Label

from generators import random_scored

P, N = Label.PHISHING, Label.NON_PHISHING


def as_labels(scored):
    return [(P if a else N, s) for a, s in scored]


def test_confusion_examples():
    assert confusion([]) == ConfusionMatrix(0, 0, 0, 0)
    assert confusion([(P, P), (P, N), (N, P), (N, N)]) == ConfusionMatrix(1, 1, 1, 1)


def test_confusion_matches_recount():
    rng = random.Random(41)
    pairs = [(rng.choice([P, N]), rng.choice([P, N])) for _ in range(50)]
    cm = confusion(pairs)
    assert cm.tp == sum(1 for a, p in pairs if a == "phishing" and p == "phishing")
    assert cm.fn == sum(1 for a, p in pairs if a == "phishing" and p == "non_phishing")
    assert cm.fp == sum(1 for a, p in pairs if a == "non_phishing" and p == "phishing")
    assert cm.tn == sum(1 for a, p in pairs if a == "non_phishing" and p == "non_phishing")
    assert cm.total == 50


def _oracle(tp, fn, fp, tn):
    precision = Fraction(tp, tp + fp)
    recall = Fraction(tp, tp + fn)
    return precision, recall, Fraction(tp + tn, tp + fn + fp + tn), 2 * precision * recall / (precision + recall)


@pytest.mark.parametrize(
    "counts, expected, shown",
    [
        ((984, 16, 17, 983), (0.983, 0.984, 0.984, 0.984), ("98.3%", "98.4%", "98.4%", "98.4%")),
        ((867, 133, 15, 985), (0.983, 0.867, 0.926, 0.921), ("98.3%", "86.7%", "92.6%", "92.1%")),
    ],
)
def test_published_metrics(counts, expected, shown):
    m = metrics(ConfusionMatrix(*counts))
    got = (m.precision, m.recall, m.accuracy, m.f_measure)
    for value, exact in zip(got, _oracle(*counts)):
        assert value == pytest.approx(float(exact), abs=1e-12)
    assert tuple(round_half_up(v, 3) for v in got) == expected
    assert tuple(percent(v) for v in got) == shown
    assert not m.degenerate


def test_empty_metrics_degenerate():
    m = metrics(ConfusionMatrix())
    assert (m.precision, m.recall, m.accuracy, m.f_measure) == (0, 0, 0, 0)
    assert m.degenerate


def test_half_up_rounding():
    assert percent(0.9835) == "98.4%"
    assert percent(0.98349) == "98.3%"
    assert round_half_up(0.125, 2) == 0.13


def test_separable_example():
    roc = roc_curve([(P, 9), (P, 7), (N, 1)])
    assert roc.auc == 1.0
    assert roc.optimal_threshold == 2
    assert roc.optimal_j == 1.0


def test_uninformative_example():
    roc = roc_curve([(P, 5), (N, 5)])
    assert roc.auc == 0.5
    assert all(p.j == 0.0 for p in roc.points)
    assert roc.optimal_threshold == 0


def test_single_point_sanity():
    points = [RocPoint(t, 1.0, 1.0) for t in range(3)] + [RocPoint(3, 0.017, 0.984)]
    points += [RocPoint(t, 0.0, 0.0) for t in range(4, 12)]
    t, j = youden_points(points)
    assert t == 3
    assert j == pytest.approx(0.967, abs=1e-9)


def _youden_oracle(scored):
    """Exact-fraction J per threshold; smallest threshold among the maxima."""
    pos = [s for a, s in scored if a is P]
    neg = [s for a, s in scored if a is N]
    js = {}
    for t in range(12):
        tpr = Fraction(sum(1 for s in pos if s is not None and s >= t), len(pos))
        fpr = Fraction(sum(1 for s in neg if s is not None and s >= t), len(neg))
        js[t] = tpr - fpr
    best = max(js.values())
    return min(t for t, j in js.items() if j == best)


@pytest.mark.parametrize(
    "scored, expected",
    [
        ([(P, 3), (P, 8), (N, 1), (N, 5)], 2),
        ([(P, 10), (N, 0)], 1),
        ([(P, None), (N, None)], 0),
        ([(P, 6), (P, 6), (N, 2), (N, 9)], 3),
    ],
)
def test_youden_tie_cases(scored, expected):
    assert _youden_oracle(scored) == expected
    assert roc_curve(scored).optimal_threshold == expected


def test_auc_matches_pairwise_oracle():
    rng = random.Random(42)
    for _ in range(100):
        scored = as_labels(random_scored(rng, rng.randint(2, 50)))
        roc = roc_curve(scored)
        assert abs(roc.auc - pairwise_auc(scored)) <= 1e-9
        assert roc.optimal_threshold == _youden_oracle(scored)


def test_roc_monotone():
    rng = random.Random(43)
    for _ in range(50):
        roc = roc_curve(as_labels(random_scored(rng, rng.randint(2, 50))))
        for a, b in zip(roc.points, roc.points[1:]):
            assert b.tpr <= a.tpr and b.fpr <= a.fpr
        assert (roc.points[-1].fpr, roc.points[-1].tpr) == (0.0, 0.0)


def test_roc_needs_both_classes():
    with pytest.raises(DegenerateClassBalance):
        roc_curve([(P, 3)])
    with pytest.raises(DegenerateClassBalance):
        roc_curve([])


def _verdict(score, phishing=TriState.FALSE, suspicious=TriState.FALSE, mode=ParseMode.STRICT):
    return Verdict(score, None, phishing, suspicious, mode)


def test_report_partitions_and_counts():
    actuals = {"a": P, "b": P, "c": N, "d": N}
    verdicts = {
        "a": _verdict(9, TriState.TRUE, TriState.TRUE),
        "b": _verdict(None, TriState.UNKNOWN, TriState.UNKNOWN, ParseMode.HEURISTIC),
        "c": _verdict(1),
        "d": _verdict(4, TriState.FALSE, TriState.TRUE),
    }
    rep = build_report(actuals, verdicts, failed=["b"])
    assert rep["samples"] == 4
    for block in (rep["key_rule"], rep["score_rule"]):
        assert sum(block["confusion"].values()) == 4
    assert rep["key_rule"]["confusion"] == {"tp": 1, "fn": 1, "fp": 1, "tn": 1}
    assert rep["parse_modes"] == {"strict": 3, "lenient": 0, "heuristic": 1, "failed": 0}
    assert rep["unknowns"]["phishing"]["both_unknown"] == 1
    assert rep["unknowns"]["phishing"]["score_absent"] == 1
    assert rep["failed_samples"] == ["b"]
    assert rep["roc"]["auc"] == pytest.approx(pairwise_auc([(P, 9), (P, None), (N, 1), (N, 4)]))


def test_report_missing_verdict():
    with pytest.raises(MissingVerdict) as info:
        build_report({"x": P}, {})
    assert "x" in str(info.value)


def test_empty_manifest_reports_degenerate_balance():
    rep = build_report({}, {})
    assert rep["samples"] == 0
    assert rep["roc"]["error"].startswith("DegenerateClassBalance")
    assert rep["score_rule"] is None
    assert rep["key_rule"]["degenerate"]
