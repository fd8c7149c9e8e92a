"""Benchmark ingestion and correlation statistics for metric meta-evaluation.

Kendall correlation is the tie-corrected tau-b, computed exactly from integer
pair counts (merge-sort inversion counting), so values match a brute-force
pair enumeration bit for bit. Significance follows the standard t-test for a
correlation coefficient; the Student-t tail mass is evaluated through the
regularized incomplete beta function (continued fraction, absolute error
well under 1e-8).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import (
    AlignmentError,
    DegenerateVariance,
    InsufficientSamples,
    RecordError,
    SchemaViolation,
)

SCHEMAS = ("generic", "composite", "flickr8k")


@dataclass(frozen=True)
class RatedPair:
    instance_id: str
    metric_score: float
    human_score: float


@dataclass(frozen=True)
class Pascal50sTriplet:
    triplet_id: str
    references: tuple[str, ...]
    candidate_b: str
    candidate_c: str
    human_choice: str

    def __post_init__(self):
        if self.human_choice not in ("B", "C"):
            raise ValueError(f"human_choice must be B or C, got {self.human_choice!r}")
        if not self.references:
            raise ValueError(f"triplet {self.triplet_id!r} has no references")


@dataclass(frozen=True)
class CorrelationResult:
    statistic_kind: str  # "kendall_tau_b" or "accuracy"
    value: float
    n: int
    t_statistic: float | None = None
    p_value: float | None = None
    p_exact: bool = False

    def to_json(self) -> dict:
        return {
            "statistic_kind": self.statistic_kind,
            "value": self.value,
            "n": self.n,
            "t_statistic": self.t_statistic,
            "p_value": self.p_value,
            "p_exact": self.p_exact,
        }


class SignificanceResult(NamedTuple):
    t_statistic: float
    p_value: float
    p_exact: bool = False


def _require_finite(value, what: str, where: str) -> float:
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise RecordError(f"{where}: {what} is not numeric: {value!r}")
    if not math.isfinite(number):
        raise RecordError(f"{where}: {what} is not finite: {value!r}")
    return number


def load_rated_dataset(
    path,
    schema: str = "generic",
    metric_scores: dict[str, float] | None = None,
) -> list[RatedPair]:
    """Parse a rated benchmark into (metric, human) score pairs.

    The generic schema carries metric_score inline; composite/flickr8k files
    carry only the human side, so ``metric_scores`` (instance_id -> score)
    must supply the metric side. Flickr8k judgment lists are mean-aggregated.
    """
    if schema not in SCHEMAS:
        raise ValueError(f"schema must be one of {SCHEMAS}, got {schema!r}")
    pairs: list[RatedPair] = []
    missing: list[str] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except ValueError as exc:
                raise SchemaViolation(f"invalid JSON ({exc})", line=lineno)
            if not isinstance(obj, dict) or "instance_id" not in obj:
                raise SchemaViolation("record must be an object with instance_id", line=lineno)
            instance_id = str(obj["instance_id"])
            where = f"line {lineno} ({instance_id})"

            if schema == "flickr8k":
                judgments = obj.get("judgments")
                if judgments is None and "human_score" in obj:
                    human = _require_finite(obj["human_score"], "human_score", where)
                elif not isinstance(judgments, list) or not judgments:
                    raise SchemaViolation("flickr8k record needs a judgments list", line=lineno)
                else:
                    values = [_require_finite(j, "judgment", where) for j in judgments]
                    human = sum(values) / len(values)
            else:
                if "human_score" not in obj:
                    raise SchemaViolation("record has no human_score", line=lineno)
                human = _require_finite(obj["human_score"], "human_score", where)

            if metric_scores is not None:
                if instance_id not in metric_scores:
                    missing.append(instance_id)
                    continue
                metric = _require_finite(metric_scores[instance_id], "metric_score", where)
            elif "metric_score" in obj:
                metric = _require_finite(obj["metric_score"], "metric_score", where)
            else:
                raise SchemaViolation(
                    "record has no metric_score and no score mapping was given", line=lineno
                )
            pairs.append(RatedPair(instance_id=instance_id, metric_score=metric, human_score=human))
    if missing:
        raise AlignmentError("benchmark ids missing from the score file", missing=missing)
    return pairs


def serialize_rated_dataset(pairs: Sequence[RatedPair]) -> str:
    """Inverse of the generic-schema loader (round-trip tested)."""
    lines = [
        json.dumps(
            {
                "instance_id": p.instance_id,
                "metric_score": p.metric_score,
                "human_score": p.human_score,
            },
            sort_keys=True,
        )
        for p in pairs
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def load_score_file(path) -> dict[str, float]:
    """Read {"instance_id", "score"} JSON-lines (``qace`` accepted as score key)."""
    scores: dict[str, float] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except ValueError as exc:
                raise SchemaViolation(f"invalid JSON ({exc})", line=lineno)
            if not isinstance(obj, dict):
                raise SchemaViolation("score record must be an object", line=lineno)
            if "_provenance" in obj:
                continue
            if "instance_id" not in obj:
                raise SchemaViolation("score record has no instance_id", line=lineno)
            instance_id = str(obj["instance_id"])
            raw = obj.get("score", obj.get("qace"))
            if raw is None:
                # Undefined engine scores count as 0.0 in batch statistics.
                raw = 0.0 if "qace" in obj else None
            if raw is None:
                raise SchemaViolation("score record has neither score nor qace", line=lineno)
            scores[instance_id] = _require_finite(raw, "score", f"line {lineno}")
    return scores


def load_pascal50s(path) -> list[Pascal50sTriplet]:
    triplets: list[Pascal50sTriplet] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                triplets.append(
                    Pascal50sTriplet(
                        triplet_id=str(obj["triplet_id"]),
                        references=tuple(obj["references"]),
                        candidate_b=obj["candidate_b"],
                        candidate_c=obj["candidate_c"],
                        human_choice=obj["human_choice"],
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise SchemaViolation(f"bad pascal50s record ({exc})", line=lineno)
    return triplets


def _merge_count_inversions(values: list[float]) -> int:
    """Number of strict inversions (i < j with v[i] > v[j]), via merge sort."""
    n = len(values)
    if n < 2:
        return 0
    work = list(values)
    buffer = [0.0] * n
    inversions = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if work[j] < work[i]:
                    inversions += mid - i
                    buffer[k] = work[j]
                    j += 1
                else:
                    buffer[k] = work[i]
                    i += 1
                k += 1
            buffer[k:hi] = work[i:mid] if i < mid else work[j:hi]
        work, buffer = buffer, work
        width *= 2
    return inversions


def _tie_pairs(values) -> int:
    return sum(c * (c - 1) // 2 for c in Counter(values).values())


def kendall_tau(xs: Sequence[float], ys: Sequence[float]) -> CorrelationResult:
    """Tie-corrected Kendall tau-b from exact integer pair counts."""
    n = len(xs)
    if n != len(ys):
        raise ValueError(f"length mismatch: {n} vs {len(ys)}")
    if n < 2:
        raise InsufficientSamples("kendall tau needs at least two samples")
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(xs)
    n2 = _tie_pairs(ys)
    if n0 == n1 or n0 == n2:
        raise DegenerateVariance("one side is entirely tied; tau-b undefined")
    n3 = _tie_pairs(list(zip(xs, ys)))
    order = sorted(range(n), key=lambda i: (xs[i], ys[i]))
    discordant = _merge_count_inversions([ys[i] for i in order])
    concordant = n0 - n1 - n2 + n3 - discordant
    tau = (concordant - discordant) / math.sqrt((n0 - n1) * (n0 - n2))
    return CorrelationResult(statistic_kind="kendall_tau_b", value=tau, n=n)


def pascal50s_accuracy(
    triplets: Sequence[Pascal50sTriplet],
    scores_b: dict[str, float],
    scores_c: dict[str, float],
    ties: str = "incorrect",
) -> CorrelationResult:
    """Fraction of triplets where the metric's argmax matches the human choice.

    Metric ties count as incorrect by default; ``ties="half"`` grants 0.5.
    """
    if ties not in ("incorrect", "half"):
        raise ValueError(f"ties must be incorrect/half, got {ties!r}")
    if not triplets:
        raise RecordError("no triplets given")
    missing = [
        t.triplet_id for t in triplets if t.triplet_id not in scores_b or t.triplet_id not in scores_c
    ]
    if missing:
        raise RecordError(f"missing metric scores for triplets: {', '.join(missing[:10])}")
    credit = 0.0
    for t in triplets:
        b, c = scores_b[t.triplet_id], scores_c[t.triplet_id]
        if b == c:
            credit += 0.5 if ties == "half" else 0.0
        elif (b > c) == (t.human_choice == "B"):
            credit += 1.0
    return CorrelationResult(
        statistic_kind="accuracy", value=credit / len(triplets), n=len(triplets)
    )


# -- Student-t significance -----------------------------------------------------

_BETACF_MAX_ITER = 300
_BETACF_EPS = 1e-16
_BETACF_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz scheme)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETACF_FPMIN:
        d = _BETACF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_FPMIN:
            d = _BETACF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETACF_FPMIN:
            c = _BETACF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_FPMIN:
            d = _BETACF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETACF_FPMIN:
            c = _BETACF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_tailed(t: float, df: int) -> float:
    """P(|T| >= t) for T ~ Student-t with df degrees of freedom."""
    if df < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def t_test_significance(r: float, n: int) -> SignificanceResult:
    """Null hypothesis of no association: t = r*sqrt((n-2)/(1-r^2))."""
    if n < 3:
        raise InsufficientSamples("t-test needs at least three samples")
    if not -1.0 <= r <= 1.0:
        raise ValueError(f"correlation must lie in [-1,1], got {r}")
    if abs(r) == 1.0:
        t = math.inf if r > 0 else -math.inf
        return SignificanceResult(t_statistic=t, p_value=0.0, p_exact=True)
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return SignificanceResult(t_statistic=t, p_value=student_t_two_tailed(t, n - 2))


def with_significance(result: CorrelationResult) -> CorrelationResult:
    """Attach t and p to a Kendall result (accuracy results pass through)."""
    if result.statistic_kind != "kendall_tau_b" or result.n < 3:
        return result
    sig = t_test_significance(result.value, result.n)
    return CorrelationResult(
        statistic_kind=result.statistic_kind,
        value=result.value,
        n=result.n,
        t_statistic=sig.t_statistic,
        p_value=sig.p_value,
        p_exact=sig.p_exact,
    )
