"""Detection-quality metrics: confusion matrix, precision/recall, ROC and Youden's J."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Sequence

from .errors import DegenerateClassBalance, MissingVerdict
from .parse import ParseMode, TriState, Verdict, classify, classify_by_score
from .snapshot import DatasetManifest, Label

THRESHOLDS = range(0, 12)
# J values equal as rationals can differ in the last float bit
J_TIE_EPS = 1e-12

P, N = Label.PHISHING, Label.NON_PHISHING


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fn: int = 0
    fp: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    accuracy: float
    f_measure: float
    degenerate: bool = False


@dataclass(frozen=True)
class RocPoint:
    threshold: int
    fpr: float
    tpr: float

    @property
    def j(self) -> float:
        return self.tpr + (1.0 - self.fpr) - 1.0


@dataclass(frozen=True)
class RocAnalysis:
    points: tuple[RocPoint, ...]
    auc: float
    optimal_threshold: int
    optimal_j: float


def confusion(pairs: Iterable[tuple[Label, Label]]) -> ConfusionMatrix:
    c = Counter((Label(a), Label(p)) for a, p in pairs)
    return ConfusionMatrix(tp=c[(P, P)], fn=c[(P, N)], fp=c[(N, P)], tn=c[(N, N)])


def _ratio(num: int, den: int) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def metrics(cm: ConfusionMatrix) -> Metrics:
    precision, d1 = _ratio(cm.tp, cm.tp + cm.fp)
    recall, d2 = _ratio(cm.tp, cm.tp + cm.fn)
    accuracy, d3 = _ratio(cm.tp + cm.tn, cm.total)
    if precision + recall == 0:
        f_measure, d4 = 0.0, True
    else:
        f_measure, d4 = 2 * precision * recall / (precision + recall), False
    return Metrics(precision, recall, accuracy, f_measure, degenerate=d1 or d2 or d3 or d4)


def round_half_up(value: float, places: int) -> float:
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


def percent(value: float) -> str:
    """One-decimal percentage, rounded half-up, e.g. ``98.4%``."""
    d = (Decimal(repr(value)) * 100).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    return f"{d}%"


def _trapezoid(points: Sequence[tuple[float, float]]) -> float:
    pts = sorted(points)
    area = 0.0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def roc_curve(scored: Sequence[tuple[Label, int | None]]) -> RocAnalysis:
    """ROC over integer score thresholds 0..11.

    A missing score never predicts phishing.  The curve is closed with
    (0, 0) and (1, 1) before integrating so that samples without a score
    rank below every scored sample.
    """
    labels = [Label(a) for a, _ in scored]
    n_pos = sum(1 for a in labels if a is P)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClassBalance(
            f"ROC needs both classes (phishing={n_pos}, non_phishing={n_neg})"
        )
    points = []
    for t in THRESHOLDS:
        tp = fp = 0
        for actual, score in scored:
            if classify_by_score(Verdict(phishing_score=score), t) is P:
                if Label(actual) is P:
                    tp += 1
                else:
                    fp += 1
        points.append(RocPoint(t, fp / n_neg, tp / n_pos))
    xy = {(p.fpr, p.tpr) for p in points} | {(0.0, 0.0), (1.0, 1.0)}
    auc = _trapezoid(sorted(xy))
    best_t, best_j = youden_points(points)
    return RocAnalysis(tuple(points), auc, best_t, best_j)


def youden_points(points: Sequence[RocPoint]) -> tuple[int, float]:
    best = None
    for p in sorted(points, key=lambda p: p.threshold):
        if best is None or p.j > best.j + J_TIE_EPS:
            best = p
    if best is None:
        raise ValueError("no ROC points")
    return best.threshold, best.j


def youden_optimal(roc: RocAnalysis) -> tuple[int, float]:
    return youden_points(roc.points)


def pairwise_auc(scored: Sequence[tuple[Label, int | None]]) -> float:
    """Probability a phishing sample outscores a non-phishing one, ties half.

    Missing scores rank below every present score.
    """
    pos = [(-1 if s is None else s) for a, s in scored if Label(a) is P]
    neg = [(-1 if s is None else s) for a, s in scored if Label(a) is N]
    if not pos or not neg:
        raise DegenerateClassBalance("pairwise AUC needs both classes")
    wins = 0.0
    for p in pos:
        for n in neg:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(pos) * len(neg))


# -- report ---------------------------------------------------------------------


def _metrics_block(cm: ConfusionMatrix) -> dict:
    m = metrics(cm)
    return {
        "confusion": asdict(cm),
        "metrics": {k: v for k, v in asdict(m).items() if k != "degenerate"},
        "display": {
            "precision": percent(m.precision),
            "recall": percent(m.recall),
            "accuracy": percent(m.accuracy),
            "f_measure": percent(m.f_measure),
        },
        "degenerate": m.degenerate,
    }


def build_report(
    actuals: Mapping[str, Label],
    verdicts: Mapping[str, Verdict],
    failed: Iterable[str] = (),
) -> dict:
    ids = list(actuals)
    for entry_id in ids:
        if entry_id not in verdicts:
            raise MissingVerdict(entry_id)

    key_pairs = [(actuals[i], classify(verdicts[i])) for i in ids]
    scored = [(actuals[i], verdicts[i].phishing_score) for i in ids]

    report: dict = {
        "samples": len(ids),
        "class_counts": {
            "phishing": sum(1 for i in ids if actuals[i] is P),
            "non_phishing": sum(1 for i in ids if actuals[i] is N),
        },
        "key_rule": _metrics_block(confusion(key_pairs)),
    }

    try:
        roc = roc_curve(scored)
    except DegenerateClassBalance as exc:
        report["score_rule"] = None
        report["roc"] = {"error": f"DegenerateClassBalance: {exc}"}
    else:
        t = roc.optimal_threshold
        score_pairs = [(actuals[i], classify_by_score(verdicts[i], t)) for i in ids]
        report["score_rule"] = {"threshold": t, **_metrics_block(confusion(score_pairs))}
        report["roc"] = {
            "auc": roc.auc,
            "auc_display": f"{round_half_up(roc.auc, 2):.2f}",
            "optimal_threshold": t,
            "optimal_j": roc.optimal_j,
            "points": [asdict(p) for p in roc.points],
        }

    modes = Counter(verdicts[i].parse_mode.value for i in ids)
    report["parse_modes"] = {m.value: modes.get(m.value, 0) for m in ParseMode}
    report["unknowns"] = _unknown_breakdown(ids, actuals, verdicts)
    report["failed_samples"] = sorted(set(failed))
    return report


def _unknown_breakdown(ids, actuals, verdicts) -> dict:
    out = {}
    for cls in (P, N):
        sub = [verdicts[i] for i in ids if actuals[i] is cls]
        out[cls.value] = {
            "phishing_unknown": sum(1 for v in sub if v.phishing is TriState.UNKNOWN),
            "suspicious_domain_unknown": sum(1 for v in sub if v.suspicious_domain is TriState.UNKNOWN),
            "both_unknown": sum(
                1 for v in sub if v.phishing is TriState.UNKNOWN and v.suspicious_domain is TriState.UNKNOWN
            ),
            "score_absent": sum(1 for v in sub if v.phishing_score is None),
        }
    return out


def report(manifest: DatasetManifest, verdicts: Mapping[str, Verdict], failed: Iterable[str] = ()) -> dict:
    actuals = {e.id: e.label for e in manifest.entries}
    return build_report(actuals, verdicts, failed)


def dumps_report(rep: dict) -> str:
    return json.dumps(rep, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def roc_points_tsv(rep: dict) -> str:
    lines = ["threshold\tfpr\ttpr"]
    for p in (rep.get("roc") or {}).get("points", []):
        lines.append(f"{p['threshold']}\t{p['fpr']:.6f}\t{p['tpr']:.6f}")
    return "\n".join(lines) + "\n"
