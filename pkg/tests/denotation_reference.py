"""Independent reference for the answer-normalization pipeline.

Deliberately implemented with different mechanics than the production
code (regex normalization, permutation-based multiset matching) so the
two can cross-check each other. Kept beside the tests; not shipped.
"""

from __future__ import annotations

import itertools
import math
import re
import unicodedata

TOLERANCE = 1e-6
_QUOTED = re.compile(r"^(['\"])(.*)\1$", re.DOTALL)
_WS = re.compile(r"\s+")


def ref_normalize(text: str) -> str:
    s = unicodedata.normalize("NFKC", str(text))
    s = _WS.sub(" ", s).strip()
    s = s.lower()
    while True:
        m = _QUOTED.match(s)
        if not m:
            break
        s = m.group(2).strip()
    return _WS.sub(" ", s).strip()


def _number(s: str):
    try:
        v = float(s)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _pair_equal(a: str, b: str) -> bool:
    na, nb = _number(a), _number(b)
    if na is not None and nb is not None:
        return abs(na - nb) <= TOLERANCE
    return a == b


def ref_denotation(predicted: str, gold: list[str]) -> bool:
    pred = [ref_normalize(p) for p in str(predicted).split("|")]
    flat = [ref_normalize(g) for item in gold for g in str(item).split("|")]
    if len(pred) != len(flat):
        return False
    # exhaustive matching: a permutation of gold must pair up with pred
    for perm in itertools.permutations(flat):
        if all(_pair_equal(p, g) for p, g in zip(pred, perm)):
            return True
    return False


def ref_exact(predicted: str, gold: str) -> bool:
    p = ref_normalize(predicted)
    if p not in ("yes", "no"):
        return False
    return p == ref_normalize(gold)
