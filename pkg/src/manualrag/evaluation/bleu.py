"""Sentence-level BLEU-4 used to quantify answer degradation.

Uniform n-gram weights, the standard brevity penalty, and add-one smoothing
on the n>=2 precisions.  Unigram precision stays unsmoothed so disjoint
texts score 0, while identical texts score exactly 1; answers here are
short single procedures, and unsmoothed BLEU-4 would collapse to 0 far too
often for relative deltas to mean anything.
"""

from __future__ import annotations

import math
from collections import Counter

_MAX_N = 4


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, reference: str) -> float:
    """BLEU-4 of candidate against one reference, in [0, 1].

    Tokenization is whitespace splitting.  An empty candidate scores 0;
    zero unigram overlap scores 0.
    """
    cand = candidate.split()
    ref = reference.split()
    if not cand or not ref:
        return 0.0

    log_sum = 0.0
    for n in range(1, _MAX_N + 1):
        cand_counts = _ngram_counts(cand, n)
        ref_counts = _ngram_counts(ref, n)
        matches = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
        total = sum(cand_counts.values())
        if n == 1:
            if matches == 0:
                return 0.0
            precision = matches / total
        else:
            precision = (matches + 1) / (total + 1)
        log_sum += math.log(precision) / _MAX_N

    c, r = len(cand), len(ref)
    brevity = 1.0 if c > r else math.exp(1.0 - r / c)
    return brevity * math.exp(log_sum)
