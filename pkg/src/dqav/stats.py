"""Welch's two-sample t-test with an in-house t-distribution tail.

The two-sided p-value is computed through the regularized incomplete
beta function I_x(a, b), evaluated with the standard continued-fraction
expansion (modified Lentz iteration) in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import InsufficientData, ZeroVariance

_EPS = 1e-15
_FPMIN = 1e-300
_MAX_ITER = 500


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (Lentz's method)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for "
                          f"a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b) for x in [0, 1]."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # use the expansion on the side where the fraction converges fast
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t_stat: float, dof: float) -> float:
    """Two-sided tail probability of Student's t with real-valued dof."""
    if dof <= 0.0:
        raise ValueError("dof must be positive")
    if t_stat == 0.0:
        return 1.0
    x = dof / (dof + t_stat * t_stat)
    return betainc(dof / 2.0, 0.5, x)


@dataclass(frozen=True)
class TTestResult:
    t_stat: float
    dof: float
    p_value: float
    mean_a: float
    mean_b: float
    var_a: float
    var_b: float
    n_a: int
    n_b: int


def welch_ttest(group_a: Sequence[float], group_b: Sequence[float]) -> TTestResult:
    """Welch's unequal-variance t-test between two sample groups.

    Degrees of freedom come from the Welch-Satterthwaite approximation;
    the p-value is two-sided.  Raises :class:`InsufficientData` for
    groups smaller than 2 and :class:`ZeroVariance` when both groups
    are constant.
    """
    a = [float(v) for v in group_a]
    b = [float(v) for v in group_b]
    n_a, n_b = len(a), len(b)
    if n_a < 2 or n_b < 2:
        raise InsufficientData(f"need >= 2 samples per group, got {n_a} and {n_b}")
    mean_a = math.fsum(a) / n_a
    mean_b = math.fsum(b) / n_b
    var_a = math.fsum((v - mean_a) ** 2 for v in a) / (n_a - 1)
    var_b = math.fsum((v - mean_b) ** 2 for v in b) / (n_b - 1)
    if var_a == 0.0 and var_b == 0.0:
        raise ZeroVariance("both groups are constant")

    sa, sb = var_a / n_a, var_b / n_b
    se = math.sqrt(sa + sb)
    t_stat = (mean_a - mean_b) / se
    dof = (sa + sb) ** 2 / (sa ** 2 / (n_a - 1) + sb ** 2 / (n_b - 1))
    return TTestResult(t_stat=t_stat, dof=dof, p_value=t_two_sided_p(t_stat, dof),
                       mean_a=mean_a, mean_b=mean_b, var_a=var_a, var_b=var_b,
                       n_a=n_a, n_b=n_b)
