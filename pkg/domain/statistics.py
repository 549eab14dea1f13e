# domain/statistics.py
"""
[검정 / 상관 / 변동성]

Welch t 검정, Pearson 상관, 일별 log(고가/저가) 변동성 지표.
분포 함수(Student t)는 scipy를 쓰고, 평균과 제곱합은 math.fsum으로 더한다.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Dict, Iterable, List, Sequence, Tuple

from scipy import stats

from core.exceptions import DataError, DegenerateSampleError


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def _sum_sq(xs: Sequence[float], m: float) -> float:
    return math.fsum((x - m) * (x - m) for x in xs)


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p_two_sided: float
    cohen_d: float
    delta: float
    ci95: Tuple[float, float]
    n_a: int
    n_b: int
    mean_a: float
    mean_b: float


def welch_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> WelchResult:
    """
    두 표본 Welch t 검정.

    t     = (x̄_a − x̄_b) / √(s_a²/n_a + s_b²/n_b)
    df    = Welch–Satterthwaite
    delta = x̄_b − x̄_a, ci95는 delta의 95% 신뢰구간
    d     = (x̄_a − x̄_b) / 합동 표준편차
    """
    a, b = [float(x) for x in sample_a], [float(x) for x in sample_b]
    if len(a) < 2 or len(b) < 2:
        raise DegenerateSampleError(f"each sample needs >= 2 values, got {len(a)} and {len(b)}")
    na, nb = len(a), len(b)
    ma, mb = _mean(a), _mean(b)
    va, vb = _sum_sq(a, ma) / (na - 1), _sum_sq(b, mb) / (nb - 1)
    if va == 0.0 and vb == 0.0:
        raise DegenerateSampleError("both samples have zero variance")

    qa, qb = va / na, vb / nb
    se = math.sqrt(qa + qb)
    t = (ma - mb) / se
    df = (qa + qb) ** 2 / (qa * qa / (na - 1) + qb * qb / (nb - 1))
    p = float(min(1.0, 2.0 * stats.t.sf(abs(t), df)))

    pooled = math.sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2))
    d = (ma - mb) / pooled
    delta = mb - ma
    half = float(stats.t.ppf(0.975, df)) * se
    return WelchResult(
        t=t,
        df=df,
        p_two_sided=p,
        cohen_d=d,
        delta=delta,
        ci95=(delta - half, delta + half),
        n_a=na,
        n_b=nb,
        mean_a=ma,
        mean_b=mb,
    )


@dataclass(frozen=True)
class PearsonResult:
    r: float
    p: float
    n: int


def pearson(x: Sequence[float], y: Sequence[float]) -> PearsonResult:
    """Pearson r과 양측 p (t = r√((n−2)/(1−r²)), 자유도 n−2)"""
    xs, ys = [float(v) for v in x], [float(v) for v in y]
    if len(xs) != len(ys):
        raise DataError(f"x and y must have equal length, got {len(xs)} and {len(ys)}")
    n = len(xs)
    if n < 3:
        raise DegenerateSampleError(f"pearson needs >= 3 pairs, got {n}")
    mx, my = _mean(xs), _mean(ys)
    sxx, syy = _sum_sq(xs, mx), _sum_sq(ys, my)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateSampleError("zero variance")
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(xs, ys))
    r = max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))
    if abs(r) == 1.0:
        return PearsonResult(r, 0.0, n)
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return PearsonResult(r, float(min(1.0, 2.0 * stats.t.sf(abs(t), n - 2))), n)


def utc_date(timestamp: int) -> str:
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).strftime("%Y-%m-%d")


def daily_volatility(samples: Iterable[Tuple[int, float]]) -> Dict[str, float]:
    """(타임스탬프, 가격) → UTC 날짜별 ln(max/min). 표본이 없는 날은 결과에 없다."""
    days: Dict[str, List[float]] = defaultdict(list)
    for ts, price in samples:
        if not price > 0:
            raise DataError(f"prices must be > 0, got {price} at {ts}")
        days[utc_date(ts)].append(float(price))
    return {day: math.log(max(ps) / min(ps)) for day, ps in sorted(days.items())}
