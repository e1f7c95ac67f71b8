"""Correctness determination: loop detection over a path's rule strings.

A path is estimated incorrect when some stride-spaced subsequence of its
rule strings contains enough pairs of similar elements.  Similarity is
textual: the Levenshtein distance between two rules, compared against a
fraction of the first rule's length.  This catches the dominant failure
mode where a prover keeps solving near-identical goals whose only
differences are freshly numbered variables (``ni.1``, ``ni.2``, ...).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class LoopDetectorConfig:
    """Detector parameters.

    alpha: minimum path length before detection activates.
    beta:  similarity threshold, as a fraction of the first string's length.
    rho:   maximum stride-subsequence length examined.
    delta: number of similar pairs that constitutes a loop (inf disables).
    ordered_pairs: count (x, y) and (y, x) separately when True.
    """

    alpha: int = 20
    beta: float = 0.1
    rho: int = 20
    delta: float = 3
    ordered_pairs: bool = True

    def __post_init__(self) -> None:
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must be in (0, 1]")
        if self.rho < 2:
            raise ValueError("rho must be >= 2")
        if not (self.delta >= 1):
            raise ValueError("delta must be >= 1 (math.inf disables detection)")


def edit_distance(x: str, y: str) -> int:
    """Levenshtein distance: single-character insertions, deletions, substitutions."""
    if x == y:
        return 0
    if not x:
        return len(y)
    if not y:
        return len(x)
    if len(y) < len(x):
        x, y = y, x
    prev = list(range(len(y) + 1))
    for i, cx in enumerate(x, start=1):
        cur = [i] + [0] * len(y)
        for j, cy in enumerate(y, start=1):
            cost = 0 if cx == cy else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1]


def is_similar(x: str, y: str, beta: float) -> bool:
    """True iff edit_distance(x, y) / len(x) < beta.

    Asymmetric by construction: the distance is normalized by the length of
    the first argument.
    """
    if not x:
        raise ValueError("x must be non-empty")
    return edit_distance(x, y) / len(x) < beta


def _max_similar_distance(n: int, beta: float) -> int:
    """Largest integer d with d / n < beta (n > 0)."""
    d = int(beta * n)
    while d >= 0 and d / n >= beta:
        d -= 1
    while (d + 1) / n < beta:
        d += 1
    return d


def bitparallel_distance(x: str, y: str) -> int:
    """Levenshtein distance via Myers' bit-parallel recurrence.

    Exact for any lengths (Python integers are unbounded), and an order of
    magnitude faster than the DP on rule-sized strings.  ``edit_distance``
    keeps the two-row DP as the reference implementation; the two agree on
    every input, which the test suite checks exhaustively on small
    alphabets.
    """
    m = len(x)
    if m == 0:
        return len(y)
    if not y:
        return m
    peq: dict[str, int] = {}
    for i, c in enumerate(x):
        peq[c] = peq.get(c, 0) | (1 << i)
    mask = (1 << m) - 1
    high = 1 << (m - 1)
    pv = mask
    mv = 0
    score = m
    get = peq.get
    for c in y:
        eq = get(c, 0)
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = mv | (mask & ~(xh | pv))
        mh = pv & xh
        if ph & high:
            score += 1
        elif mh & high:
            score -= 1
        ph = ((ph << 1) | 1) & mask
        mh = (mh << 1) & mask
        pv = mh | (mask & ~(xv | ph))
        mv = ph & xv
    return score


class SimilarityCache:
    """Memoized similarity decisions for one beta value.

    Safe to share across every path examined in a run; rules recur heavily,
    so the cache turns most checks into a dict probe.
    """

    def __init__(self, beta: float):
        self.beta = beta
        self._hits: dict[tuple[str, str], bool] = {}

    def similar(self, x: str, y: str) -> bool:
        # an empty x is never similar: distance < beta * 0 is unsatisfiable
        if not x:
            return False
        if x == y:
            return True
        key = (x, y)
        cached = self._hits.get(key)
        if cached is None:
            dmax = _max_similar_distance(len(x), self.beta)
            if abs(len(x) - len(y)) > dmax:
                cached = False  # the length gap alone exceeds the budget
            else:
                cached = bitparallel_distance(x, y) <= dmax
            self._hits[key] = cached
        return cached


class LoopMonitor:
    """Incremental loop detector over a growing (or shrinking) path.

    ``append`` adds one rule and reports whether the path now contains a
    loop; ``pop`` retracts the last rule, which lets depth-first searches
    reuse one monitor across backtracking.
    """

    def __init__(self, cfg: LoopDetectorConfig, cache: SimilarityCache | None = None):
        self.cfg = cfg
        if cache is not None and cache.beta != cfg.beta:
            raise ValueError("cache beta does not match config beta")
        self.cache = cache if cache is not None else SimilarityCache(cfg.beta)
        self.rules: list[str] = []

    def append(self, rule: str) -> bool:
        self.rules.append(rule)
        return self.check()

    def pop(self) -> None:
        self.rules.pop()

    def check(self) -> bool:
        """Run the detection pass on the current path."""
        cfg = self.cfg
        rules = self.rules
        k = len(rules)
        if k < cfg.alpha or math.isinf(cfg.delta):
            return False
        similar = self.cache.similar
        delta = cfg.delta
        ordered = cfg.ordered_pairs
        last = k - 1
        for j in range(1, k):
            window = rules[last::-j][: cfg.rho]
            n = len(window)
            # a window of n elements yields at most n*(n-1) ordered pairs;
            # window sizes only shrink as the stride grows
            limit = n * (n - 1) if ordered else n * (n - 1) // 2
            if limit < delta:
                break
            count = 0
            for a in range(n):
                wa = window[a]
                b_start = 0 if ordered else a + 1
                for b in range(b_start, n):
                    if a == b:
                        continue
                    if similar(wa, window[b]):
                        count += 1
                        if count >= delta:
                            return True
        return False


def detect_loop(path_rules: Sequence[str], cfg: LoopDetectorConfig | None = None) -> bool:
    """Whether the rule sequence of a path contains a verification loop.

    Returns False outright for paths shorter than ``cfg.alpha``.  Otherwise,
    for each stride j in [1, k-1], the subsequence (s_k, s_{k-j}, s_{k-2j},
    ...) truncated to ``cfg.rho`` elements is scanned, counting
    position-distinct pairs (x, y) with edit_distance(x, y) < beta * len(x);
    the first stride whose count reaches ``cfg.delta`` decides.
    """
    if cfg is None:
        cfg = LoopDetectorConfig()
    monitor = LoopMonitor(cfg)
    monitor.rules = list(path_rules)
    return monitor.check()
