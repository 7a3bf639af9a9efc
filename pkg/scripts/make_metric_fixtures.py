"""Regenerate the frozen scoring fixtures.

Expected values come from the reference pipeline in
tests/denotation_reference.py, never from the production code, so the
fixture stays an independent oracle.
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from denotation_reference import ref_denotation, ref_exact  # noqa: E402

DENOTATION_CASES = [
    # identity and case
    ("Eric Wynalda", ["Eric Wynalda"]),
    ("eric wynalda", ["Eric Wynalda"]),
    ("ERIC WYNALDA", ["eric wynalda"]),
    ("Landon Donovan", ["Eric Wynalda"]),
    # whitespace
    ("  Eric   Wynalda  ", ["Eric Wynalda"]),
    ("Eric\tWynalda", ["Eric Wynalda"]),
    ("EricWynalda", ["Eric Wynalda"]),
    # quotes
    ('"Eric Wynalda"', ["Eric Wynalda"]),
    ("'5'", ["5"]),
    ("''quoted''", ["quoted"]),
    ('"mis"matched', ["mismatched"]),
    # unicode normalization
    ("５", ["5"]),
    ("ﬁnal", ["final"]),
    ("Eric Wynalda", ["Eric Wynalda"]),
    ("café", ["cafe"]),
    ("−3", ["-3"]),
    # numeric surface forms
    ("5.0", ["5"]),
    (".5", ["0.5"]),
    ("1e3", ["1000"]),
    ("+7", ["7"]),
    ("0005", ["5"]),
    ("5.", ["5"]),
    ("5,000", ["5000"]),
    ("50%", ["50"]),
    ("3.14159", ["3.14159"]),
    # tolerance boundary (1e-6, inclusive)
    ("1.0000005", ["1.0"]),
    ("1.000001", ["1.0"]),
    ("1.000002", ["1.0"]),
    ("0.9999995", ["1.0"]),
    # non-finite guards
    ("nan", ["nan"]),
    ("inf", ["infinity"]),
    # multi-value answers
    ("2|1", ["1", "2"]),
    ("2|2", ["1", "2"]),
    ("1|2|3", ["3", "1", "2"]),
    ("1|2", ["1", "2", "3"]),
    ("1|2|3", ["1", "2"]),
    ("a|b", ["b", "a"]),
    ("a|a", ["a", "a"]),
    ("a|a", ["a", "b"]),
    ("Tom|5", ["5", "Tom"]),
    ("5.0|six", ["six", "5"]),
    ("1|2", ["1|2"]),
    ("  1 |2.0 ", ["2", "1"]),
    # near-tolerance pairing needs a perfect matching, not a greedy one
    ("1.0|1.0000016", ["1.0000008", "0.9999992"]),
    # empty-ish
    ("", ["x"]),
    ("x", [""]),
    # mixed text quirks
    ("yes", ["yes"]),
    ("January 5, 2010", ["january 5, 2010"]),
    ("the  answer", ["The Answer"]),
    ("answer.", ["answer"]),
]

EXACT_CASES = [
    ("yes", "yes"),
    ("Yes ", "yes"),
    ("NO", "no"),
    ("no", "yes"),
    ("entailed", "yes"),
    ('"no"', "no"),
    ("  YES", "yes"),
    ("yes.", "yes"),
    ("refuted", "no"),
    ("No", "no"),
]


def main():
    out = ROOT / "tests" / "data"
    out.mkdir(parents=True, exist_ok=True)
    assert len(DENOTATION_CASES) == 50, len(DENOTATION_CASES)
    assert len(EXACT_CASES) == 10, len(EXACT_CASES)
    denotation = [
        {"predicted": p, "gold": g, "expected": ref_denotation(p, g)}
        for p, g in DENOTATION_CASES
    ]
    exact = [
        {"predicted": p, "gold": g, "expected": ref_exact(p, g)}
        for p, g in EXACT_CASES
    ]
    with open(out / "denotation_cases.json", "w", encoding="utf-8") as fh:
        json.dump(denotation, fh, ensure_ascii=False, indent=1)
        fh.write("\n")
    with open(out / "exact_cases.json", "w", encoding="utf-8") as fh:
        json.dump(exact, fh, ensure_ascii=False, indent=1)
        fh.write("\n")
    true_d = sum(c["expected"] for c in denotation)
    true_e = sum(c["expected"] for c in exact)
    print(f"denotation: {len(denotation)} cases, {true_d} true")
    print(f"exact: {len(exact)} cases, {true_e} true")


if __name__ == "__main__":
    main()
