"""Mean-variance efficient frontier of optimally hedged profit."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .moments import HedgeSystem, hedged_moments
from .solver import TwoFundBasis, two_fund_basis


@dataclass(frozen=True)
class FrontierPoint:
    a: float
    mean: float
    variance: float

    @property
    def stdev(self) -> float:
        return math.sqrt(max(self.variance, 0.0))


def frontier_point(sys: HedgeSystem, basis: TwoFundBasis, a: float) -> FrontierPoint:
    """Mean and variance of profit hedged at risk aversion ``a``, from the fund
    decomposition alone (no claim vector is formed).

    With ``t = 1/(2a)`` the variance is
    ``sigma2_y - c'x_inf + t (-c'x_o + (d-b)'x_inf) + t^2 (d-b)'x_o``.
    The linear coefficient vanishes in exact arithmetic because
    ``M x_inf = c`` and ``M x_o = d - b``; it is kept so that round-off
    in the basis shows up consistently with direct evaluation.
    """
    if not a > 0:
        raise InvalidInputError(f"risk aversion must be positive, got {a}")
    t = 1.0 / (2.0 * a)
    d, c, gap = sys.d, sys.c, sys.d - sys.b
    mean = sys.mu_y + d @ basis.x_inf + t * (d @ basis.x_o)
    variance = (
        sys.sigma2_y
        - c @ basis.x_inf
        + t * (gap @ basis.x_inf - c @ basis.x_o)
        + t * t * (gap @ basis.x_o)
    )
    return FrontierPoint(a=float(a), mean=float(mean), variance=float(variance))


def _check_sweep(a_values: Sequence[float]) -> np.ndarray:
    a_values = np.asarray(a_values, dtype=float)
    if a_values.ndim != 1 or a_values.size == 0:
        raise InvalidInputError("need a non-empty vector of risk aversions")
    if np.any(a_values <= 0):
        raise InvalidInputError("risk aversions must be positive")
    if np.any(np.diff(a_values) <= 0):
        raise InvalidInputError("risk aversions must be strictly increasing")
    return a_values


def frontier_sweep(
    sys: HedgeSystem, a_values: Sequence[float], basis: Optional[TwoFundBasis] = None
) -> list[FrontierPoint]:
    """Frontier points for each ``a`` using one two-fund basis (one factorization)."""
    a_values = _check_sweep(a_values)
    basis = two_fund_basis(sys) if basis is None else basis
    return [frontier_point(sys, basis, a) for a in a_values]


def proxy_frontier_sweep(sys: HedgeSystem, a_values: Sequence[float]) -> list[FrontierPoint]:
    """Frontier traced by independence-proxy claims, evaluated under the true measure.

    The proxy claims come from the system with the price/weather
    cross-covariance zeroed; the closed-form frontier expressions do not
    apply to them, so moments are evaluated directly.
    """
    a_values = _check_sweep(a_values)
    basis = two_fund_basis(sys.independence_proxy())
    points = []
    for a in a_values:
        x = basis.claims(a)
        mean, var = hedged_moments(sys, x[: sys.n], x[sys.n :])
        points.append(FrontierPoint(a=float(a), mean=mean, variance=var))
    return points


def minimum_variance_point(sys: HedgeSystem, basis: TwoFundBasis) -> FrontierPoint:
    """Limit of the frontier as ``a`` grows without bound (the ``x_inf`` hedge)."""
    mean = sys.mu_y + sys.d @ basis.x_inf
    variance = sys.sigma2_y - sys.c @ basis.x_inf
    return FrontierPoint(a=math.inf, mean=float(mean), variance=float(variance))


def covering_sweep(
    sys: HedgeSystem, max_variance: float, points: int = 400, basis: Optional[TwoFundBasis] = None
) -> list[FrontierPoint]:
    """Frontier sampled from the minimum-variance point up to ``max_variance``.

    Variance grows as ``t^2 (d-b)'x_o`` in ``t = 1/(2a)``, so the required
    smallest ``a`` is found in closed form and ``t`` is spaced so that the
    samples are uniform in variance.
    """
    basis = two_fund_basis(sys) if basis is None else basis
    floor = minimum_variance_point(sys, basis)
    curvature = float((sys.d - sys.b) @ basis.x_o)
    if curvature <= 0 or max_variance <= floor.variance:
        return [floor]
    t_max = math.sqrt((max_variance - floor.variance) / curvature) * 1.01
    ts = t_max * np.sqrt(np.linspace(0.0, 1.0, points)[1:])
    a_values = (1.0 / (2.0 * ts))[::-1]
    return [floor] + frontier_sweep(sys, a_values, basis)[::-1]


@dataclass(frozen=True)
class DominanceResult:
    dominates: bool
    min_margin: float
    compared: int
    uncovered: int


def weakly_dominates(
    upper: Sequence[FrontierPoint], lower: Sequence[FrontierPoint], rtol: float = 1e-9
) -> DominanceResult:
    """Check that ``upper`` attains at least ``lower``'s mean at each of
    ``lower``'s variances.

    ``upper`` is sorted by variance and linearly interpolated; points of
    ``lower`` outside ``upper``'s variance range cannot be matched and count
    as ``uncovered`` (which makes the result negative).
    """
    if not upper or not lower:
        raise InvalidInputError("empty frontier")
    order = sorted(upper, key=lambda p: p.variance)
    uv = np.array([p.variance for p in order])
    um = np.array([p.mean for p in order])
    margins = []
    uncovered = 0
    for p in lower:
        if p.variance < uv[0] or p.variance > uv[-1]:
            uncovered += 1
            continue
        margins.append(np.interp(p.variance, uv, um) - p.mean)
    scale = max(1.0, float(np.abs(um).max()))
    min_margin = float(min(margins)) if margins else -math.inf
    ok = uncovered == 0 and min_margin >= -rtol * scale
    return DominanceResult(dominates=ok, min_margin=min_margin, compared=len(margins), uncovered=uncovered)


def general_dominates_proxy(sys: HedgeSystem, a_values: Sequence[float], rtol: float = 1e-9) -> DominanceResult:
    """Compare the proxy frontier at ``a_values`` with the true frontier sampled
    densely enough to cover every proxy variance."""
    proxy = proxy_frontier_sweep(sys, a_values)
    general = covering_sweep(sys, max(p.variance for p in proxy))
    return weakly_dominates(general, proxy, rtol)
