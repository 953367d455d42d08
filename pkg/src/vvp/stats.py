"""Small-sample test statistics: Shapiro-Wilk, pooled t, Mann-Whitney U.

Everything here is pure Python. The Shapiro-Wilk W and its p-value follow
Royston's AS R94 approximation (Applied Statistics 44, 1995); the t-test
p-value comes from the regularized incomplete beta function; the U test uses
the normal approximation with tie correction and a continuity correction,
plus an exact enumeration mode for small pooled sizes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from statistics import NormalDist, mean, median


class StatsError(Exception):
    pass


class SampleTooSmall(StatsError):
    pass


class SampleTooLarge(StatsError):
    pass


class ConstantSample(StatsError):
    pass


class DegenerateVariance(StatsError):
    pass


class EmptySample(StatsError):
    pass


class TestKind(str, Enum):
    SHAPIRO_WILK = "ShapiroWilk"
    STUDENT_T = "StudentT"
    MANN_WHITNEY_U = "MannWhitneyU"


@dataclass(frozen=True)
class TestResult:
    test: TestKind
    statistic: float
    p_two_tailed: float
    df: float | None = None
    u: float | None = None
    z: float | None = None
    p_exact: float | None = None
    note: str | None = None


@dataclass(frozen=True)
class GroupSummary:
    metric_name: str
    n: int
    mean: float
    median: float
    sample_sd: float
    min: float
    max: float
    values: tuple[float, ...]
    degenerate_sd: bool = False


def aggregate_group(values: list[float], metric_name: str) -> GroupSummary:
    """Mean / median / sample sd (n-1) summary; n = 1 reports sd 0 as degenerate."""
    if not values:
        raise EmptySample(f"no values for metric {metric_name!r}")
    n = len(values)
    if n == 1:
        sd, degenerate = 0.0, True
    else:
        m = mean(values)
        sd = math.sqrt(sum((v - m) ** 2 for v in values) / (n - 1))
        degenerate = False
    return GroupSummary(
        metric_name=metric_name,
        n=n,
        mean=float(mean(values)),
        median=float(median(values)),
        sample_sd=sd,
        min=float(min(values)),
        max=float(max(values)),
        values=tuple(float(v) for v in values),
        degenerate_sd=degenerate,
    )


def _norm_sf(x: float) -> float:
    """Upper tail of the standard normal."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def _poly(coeffs: tuple[float, ...], x: float) -> float:
    """Evaluate a polynomial given coefficients in ascending-power order."""
    total = 0.0
    for c in reversed(coeffs):
        total = total * x + c
    return total


# AS R94 polynomial coefficients, constant term first.
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def shapiro_wilk_coefficients(n: int) -> list[float]:
    """Normalized lower-half weights used by the W statistic (AS R94)."""
    if n < 3:
        raise SampleTooSmall("Shapiro-Wilk needs at least 3 observations")
    if n == 3:
        return [math.sqrt(0.5)]
    nd = NormalDist()
    n2 = n // 2
    an25 = n + 0.25
    m = [nd.inv_cdf((i - 0.375) / an25) for i in range(1, n2 + 1)]
    summ2 = 2.0 * sum(v * v for v in m)
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a1 = _poly(_C1, rsn) - m[0] / ssumm2
    if n > 5:
        a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
        fac = math.sqrt(
            (summ2 - 2.0 * m[0] ** 2 - 2.0 * m[1] ** 2)
            / (1.0 - 2.0 * a1 ** 2 - 2.0 * a2 ** 2)
        )
        return [a1, a2] + [-v / fac for v in m[2:]]
    fac = math.sqrt((summ2 - 2.0 * m[0] ** 2) / (1.0 - 2.0 * a1 ** 2))
    return [a1] + [-v / fac for v in m[1:]]


def shapiro_wilk(sample: list[float]) -> TestResult:
    """W statistic and p-value for departure from normality (AS R94).

    Valid for 3 <= n <= 5000 on a non-constant sample. Small p-values mean
    the sample is unlikely to come from a normal distribution.
    """
    n = len(sample)
    if n < 3:
        raise SampleTooSmall(f"n = {n}, need at least 3")
    if n > 5000:
        raise SampleTooLarge(f"n = {n}, approximation is valid up to 5000")
    x = sorted(float(v) for v in sample)
    if x[-1] - x[0] < 1e-19:
        raise ConstantSample("all observations identical (or numerically so)")

    lower = shapiro_wilk_coefficients(n)
    n2 = n // 2
    xbar = math.fsum(x) / n
    ss = math.fsum((v - xbar) ** 2 for v in x)
    if ss <= 0.0:
        raise ConstantSample("zero variance after centering")
    b = math.fsum(lower[i] * (x[n - 1 - i] - x[i]) for i in range(n2))
    w = min(1.0, (b * b) / ss)

    if n == 3:
        # exact distribution for the smallest case
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return TestResult(TestKind.SHAPIRO_WILK, w, min(1.0, max(0.0, p)))

    w1 = 1.0 - w
    if w1 <= 1e-99:
        return TestResult(TestKind.SHAPIRO_WILK, w, 1.0)
    if n <= 11:
        gamma = _poly(_G, float(n))
        y = math.log(w1)
        if y >= gamma:
            return TestResult(TestKind.SHAPIRO_WILK, w, 1e-99)
        y = -math.log(gamma - y)
        mu = _poly(_C3, float(n))
        sigma = math.exp(_poly(_C4, float(n)))
    else:
        ln_n = math.log(n)
        y = math.log(w1)
        mu = _poly(_C5, ln_n)
        sigma = math.exp(_poly(_C6, ln_n))
    p = _norm_sf((y - mu) / sigma)
    return TestResult(TestKind.SHAPIRO_WILK, w, min(1.0, max(0.0, p)))


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    max_iter = 300
    eps = 3e-15
    fpmin = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise StatsError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_tailed_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with df degrees of freedom."""
    if df <= 0:
        raise StatsError("degrees of freedom must be positive")
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def students_t_test(a: list[float], b: list[float]) -> TestResult:
    """Two-sample pooled-variance t-test, two-tailed."""
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise SampleTooSmall("each sample needs at least 2 observations")
    ma = mean(a)
    mb = mean(b)
    ssa = math.fsum((v - ma) ** 2 for v in a)
    ssb = math.fsum((v - mb) ** 2 for v in b)
    df = na + nb - 2
    pooled_var = (ssa + ssb) / df
    if pooled_var <= 0.0:
        raise DegenerateVariance("pooled variance is zero")
    t = (ma - mb) / math.sqrt(pooled_var * (1.0 / na + 1.0 / nb))
    return TestResult(
        TestKind.STUDENT_T,
        statistic=t,
        p_two_tailed=t_two_tailed_p(t, df),
        df=float(df),
    )


def _average_ranks(pooled: list[float]) -> list[float]:
    n = len(pooled)
    order = sorted(range(n), key=pooled.__getitem__)
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _tie_term(ranks: list[float]) -> float:
    counts: dict[float, int] = {}
    for r in ranks:
        counts[r] = counts.get(r, 0) + 1
    return float(sum(t ** 3 - t for t in counts.values()))


EXACT_ENUMERATION_LIMIT = 20


def mann_whitney_exact_p(a: list[float], b: list[float]) -> float:
    """Two-tailed permutation p: share of labelings at least as extreme.

    Extremeness is measured by min(U_a, U_b); the labeling distribution is
    enumerated exhaustively, which is feasible for n_a + n_b <= 20.
    """
    na, nb = len(a), len(b)
    n = na + nb
    if n > EXACT_ENUMERATION_LIMIT:
        raise SampleTooLarge(f"exact enumeration limited to pooled n <= {EXACT_ENUMERATION_LIMIT}")
    pooled = [float(v) for v in a] + [float(v) for v in b]
    ranks = _average_ranks(pooled)
    offset = na * (na + 1) / 2.0
    u_a = sum(ranks[:na]) - offset
    u_obs = min(u_a, na * nb - u_a)
    hits = 0
    total = 0
    for combo in itertools.combinations(range(n), na):
        u = sum(ranks[i] for i in combo) - offset
        if min(u, na * nb - u) <= u_obs + 1e-9:
            hits += 1
        total += 1
    return hits / total


def mann_whitney_u(a: list[float], b: list[float]) -> TestResult:
    """Mann-Whitney U, two-tailed, normal approximation.

    U is min(U_a, U_b) with average ranks for ties; the z score uses the
    tie-corrected variance and a 0.5 continuity correction toward the mean.
    When the pooled size allows it, the exact enumeration p is attached as
    p_exact for comparison.
    """
    na, nb = len(a), len(b)
    if na < 1 or nb < 1:
        raise SampleTooSmall("each sample needs at least 1 observation")
    pooled = [float(v) for v in a] + [float(v) for v in b]
    ranks = _average_ranks(pooled)
    u_a = sum(ranks[:na]) - na * (na + 1) / 2.0
    u_b = na * nb - u_a
    u = min(u_a, u_b)
    n = na + nb
    mean_u = na * nb / 2.0
    tie_adjust = _tie_term(ranks) / (n * (n - 1)) if n > 1 else 0.0
    var = (na * nb / 12.0) * ((n + 1.0) - tie_adjust)
    note = None
    if var <= 0.0:
        z = 0.0
        p = 1.0
        note = "all pooled values tied; variance collapsed"
    else:
        z = min(0.0, (u + 0.5 - mean_u)) / math.sqrt(var)
        p = min(1.0, 2.0 * _norm_sf(abs(z)))
    p_exact = mann_whitney_exact_p(a, b) if n <= EXACT_ENUMERATION_LIMIT else None
    return TestResult(
        TestKind.MANN_WHITNEY_U,
        statistic=u,
        p_two_tailed=p,
        u=u,
        z=z,
        p_exact=p_exact,
        note=note,
    )
