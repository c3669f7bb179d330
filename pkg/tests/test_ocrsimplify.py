from __future__ import annotations

import random

from phishcheck.ocrsimplify import simplify_ocr
from phishcheck.snapshot import OcrLine
from phishcheck.tokens import ByteQuarterCounter, WordCounter

from generators import random_line_counter, random_lines

WORDS = WordCounter()


def lines(*pairs):
    return [OcrLine(t, h) for t, h in pairs]


def test_small_font_line_dropped():
    out = simplify_ocr(lines(("WIN A PRIZE", 40), ("terms apply", 10)), 4, WORDS)
    assert out.text == "WIN A PRIZE"
    assert out.kept == (0,) and not out.truncated


def test_under_budget_is_noop():
    src = lines(("first", 10), ("second", 30), ("third", 5))
    out = simplify_ocr(src, 500, ByteQuarterCounter())
    assert out.text == "first\nsecond\nthird"
    assert out.kept == (0, 1, 2)


def test_tie_group_removed_together():
    src = lines(("aaa", 12), ("bbb", 12), ("ccc", 30))
    out = simplify_ocr(src, 2, WORDS)
    assert out.text == "ccc"
    assert out.kept == (2,)


def test_final_group_is_truncated_not_emptied():
    src = lines(("one two three four five", 20), ("tiny", 3))
    out = simplify_ocr(src, 3, WORDS)
    assert out.truncated
    assert out.text == "one two"
    assert out.tokens < 3


def test_empty_input():
    out = simplify_ocr([], 10, WORDS)
    assert out.text == "" and out.tokens == 0 and not out.truncated


def test_properties_random():
    rng = random.Random(21)
    for _ in range(400):
        src = random_lines(rng)
        counter = random_line_counter(rng)
        budget = rng.randint(0, 60)
        out = simplify_ocr(src, budget, counter)
        # budget or flag
        assert out.tokens < budget or out.truncated
        assert out.tokens == counter.count(out.text)
        # subsequence in original order
        assert list(out.kept) == sorted(out.kept)
        if not out.truncated:
            assert out.text == "\n".join(src[i].text for i in out.kept)
            removed = set(range(len(src))) - set(out.kept)
            if out.kept and removed:
                assert min(src[i].font_height for i in out.kept) >= max(src[i].font_height for i in removed)
        assert simplify_ocr(src, budget, counter) == out
