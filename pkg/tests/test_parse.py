from __future__ import annotations

import json
import random

import pytest

from phishcheck import parse
from phishcheck.parse import ParseMode, TriState, Verdict, classify, classify_by_score, parse_response
from phishcheck.snapshot import Label

from conftest import FIXTURES
from generators import mutate

RESPONSES = FIXTURES / "responses"
T, F, U = TriState.TRUE, TriState.FALSE, TriState.UNKNOWN

PROSE_UNKNOWN = (
    "I could not find enough information in the HTML or the text to decide.\n"
    "phishing: unknown\n"
    "suspicious_domain: unknown\n"
    "No brand could be identified."
)


def fields(v: Verdict):
    return (v.phishing_score, v.brands, v.phishing, v.suspicious_domain)


def single_quoted(text: str) -> str:
    return text.replace('"', "'")


@pytest.mark.parametrize(
    "name, expected",
    [("facebook.txt", (9, "Meta Facebook", T, T)), ("dhl.txt", (9, "DHL EXPRESS", T, T))],
)
def test_published_responses_parse_strictly(name, expected):
    raw = (RESPONSES / name).read_text(encoding="utf-8")
    v = parse_response(raw)
    assert fields(v) == expected
    assert v.parse_mode is ParseMode.STRICT


@pytest.mark.parametrize(
    "name, expected",
    [("facebook.txt", (9, "Meta Facebook", T, T)), ("dhl.txt", (9, "DHL EXPRESS", T, T))],
)
def test_single_quoted_objects_parse_leniently(name, expected):
    raw = single_quoted((RESPONSES / name).read_text(encoding="utf-8"))
    v = parse_response(raw)
    assert fields(v) == expected
    assert v.parse_mode is ParseMode.LENIENT


def test_prose_unknowns_parse_heuristically():
    v = parse_response(PROSE_UNKNOWN)
    assert fields(v) == (None, None, U, U)
    assert v.parse_mode is ParseMode.HEURISTIC


@pytest.mark.parametrize(
    "raw, expected, mode",
    [
        ('{"phishing_score": 3, "brands": "None", "phishing": false, "suspicious_domain": false}', (3, None, F, F), "strict"),
        ('{"phishing_score": 0, "brands": null, "phishing": "unknown", "suspicious_domain": "unknown"}', (0, None, U, U), "strict"),
        ("{'phishing_score': 7, 'brands': 'PayPal', 'phishing': True, 'suspicious_domain': False,}", (7, "PayPal", T, F), "lenient"),
        ('{"phishing_score": 5, "brands": "X", "phishing": unknown, "suspicious_domain": true}', (5, "X", U, T), "lenient"),
        ("phishing_score = 8\nbrands: Amazon\n**phishing**: true\nsuspicious_domain: no", (8, "Amazon", T, F), "heuristic"),
        ("The model refused to answer.", (None, None, U, U), "failed"),
        ("", (None, None, U, U), "failed"),
    ],
)
def test_ladder_table(raw, expected, mode):
    v = parse_response(raw)
    assert fields(v) == expected
    assert v.parse_mode.value == mode


def test_last_object_wins():
    raw = (
        'Draft: {"phishing_score": 2, "brands": "A", "phishing": false, "suspicious_domain": false}\n'
        'Final: {"phishing_score": 8, "brands": "B", "phishing": true, "suspicious_domain": true}'
    )
    assert fields(parse_response(raw)) == (8, "B", T, T)


def test_strict_short_circuits_ladder(monkeypatch):
    def boom(*a, **k):
        raise AssertionError("later rung consulted")

    monkeypatch.setattr(parse, "normalize_lenient", boom)
    monkeypatch.setattr(parse, "_heuristic", boom)
    raw = (RESPONSES / "facebook.txt").read_text(encoding="utf-8")
    assert parse_response(raw).parse_mode is ParseMode.STRICT


def test_out_of_range_score_is_absent():
    v = parse_response('{"phishing_score": 42, "brands": "x", "phishing": true, "suspicious_domain": true}')
    assert v.phishing_score is None


@pytest.mark.parametrize(
    "phishing, suspicious, label",
    [(T, F, Label.PHISHING), (F, T, Label.PHISHING), (T, T, Label.PHISHING), (F, F, Label.NON_PHISHING),
     (U, U, Label.NON_PHISHING), (U, F, Label.NON_PHISHING)],
)
def test_classify(phishing, suspicious, label):
    assert classify(Verdict(phishing=phishing, suspicious_domain=suspicious)) is label


@pytest.mark.parametrize(
    "score, threshold, label",
    [(9, 3, Label.PHISHING), (2, 3, Label.NON_PHISHING), (3, 3, Label.PHISHING), (None, 0, Label.NON_PHISHING),
     (None, 11, Label.NON_PHISHING), (10, 11, Label.NON_PHISHING), (0, 0, Label.PHISHING)],
)
def test_classify_by_score(score, threshold, label):
    assert classify_by_score(Verdict(phishing_score=score), threshold) is label


def test_classify_by_score_rejects_bad_threshold():
    with pytest.raises(ValueError):
        classify_by_score(Verdict(phishing_score=1), 12)


def test_classify_by_score_monotone_in_threshold():
    for score in [None, *range(11)]:
        labels = [classify_by_score(Verdict(phishing_score=score), t) for t in range(12)]
        flipped = [a is Label.NON_PHISHING and b is Label.PHISHING for a, b in zip(labels, labels[1:])]
        assert not any(flipped)


def test_round_trip_strict():
    rng = random.Random(31)
    for _ in range(200):
        v = Verdict(
            phishing_score=rng.choice([None, *range(11)]),
            brands=rng.choice([None, "PayPal", "Meta Facebook", 'O"Brien & Co', "日本郵便"]),
            phishing=rng.choice(list(TriState)),
            suspicious_domain=rng.choice(list(TriState)),
            parse_mode=ParseMode.STRICT,
        )
        back = parse_response("```json\n" + json.dumps(v.answer_dict()) + "\n```")
        assert back.parse_mode is ParseMode.STRICT
        assert fields(back) == fields(v)
        assert Verdict.from_dict(v.to_dict()) == v


def test_totality_under_mutation():
    rng = random.Random(32)
    seeds = [p.read_text(encoding="utf-8") for p in sorted(RESPONSES.glob("*.txt"))] + [PROSE_UNKNOWN]
    for _ in range(1500):
        raw = mutate(rng, rng.choice(seeds))
        # the inner ladder must not lean on the catch-all
        v = parse._parse(raw)
        assert isinstance(v, Verdict)
        assert v.phishing_score is None or 0 <= v.phishing_score <= 10
    assert parse_response(None).parse_mode is ParseMode.FAILED
