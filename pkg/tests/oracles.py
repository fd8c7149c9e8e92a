"""Independent reference implementations used only to check the engine.

Nothing here imports engine scoring code: F1 is recomputed with naive
list-removal overlap, Kendall with O(n^2) pair classification, and Student-t
tail mass by Simpson quadrature of the density.
"""

from __future__ import annotations

import math
import re
import string


def squad_normalize(text: str) -> list[str]:
    lowered = text.lower()
    no_punct = "".join(ch for ch in lowered if ch not in set(string.punctuation))
    no_articles = re.sub(r"\b(a|an|the)\b", " ", no_punct)
    return no_articles.split()


def f1_brute(a: str, b: str) -> float:
    """Multiset-overlap F1 via naive element removal."""
    a_tokens = squad_normalize(a)
    b_tokens = squad_normalize(b)
    if not a_tokens or not b_tokens:
        return 1.0 if a_tokens == b_tokens else 0.0
    remaining = list(b_tokens)
    overlap = 0
    for token in a_tokens:
        if token in remaining:
            remaining.remove(token)
            overlap += 1
    if overlap == 0:
        return 0.0
    precision = overlap / len(a_tokens)
    recall = overlap / len(b_tokens)
    return 2 * precision * recall / (precision + recall)


def kendall_brute(xs, ys) -> float:
    """Tau-b by classifying every pair."""
    n = len(xs)
    concordant = discordant = tied_x = tied_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = xs[i] - xs[j]
            dy = ys[i] - ys[j]
            if dx == 0:
                tied_x += 1
            if dy == 0:
                tied_y += 1
            if dx == 0 or dy == 0:
                continue
            if (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    return (concordant - discordant) / math.sqrt((n0 - tied_x) * (n0 - tied_y))


def t_density(u: float, df: int) -> float:
    log_c = (
        math.lgamma((df + 1) / 2.0)
        - math.lgamma(df / 2.0)
        - 0.5 * math.log(df * math.pi)
    )
    return math.exp(log_c - ((df + 1) / 2.0) * math.log1p(u * u / df))


def t_two_tailed_simpson(t: float, df: int, intervals: int = 20000) -> float:
    """P(|T| >= t) by composite Simpson over [0, |t|]; symmetry gives the rest."""
    t = abs(t)
    if t == 0.0:
        return 1.0
    h = t / intervals
    total = t_density(0.0, df) + t_density(t, df)
    for k in range(1, intervals):
        total += (4.0 if k % 2 else 2.0) * t_density(k * h, df)
    central = total * h / 3.0
    return max(0.0, 1.0 - 2.0 * central)
