"""Hedged-profit distributions, quantile tables and parameter sweeps."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .distributions import (
    GaussianSpec,
    RealWorldMeasure,
    RiskNeutralMeasure,
    discretize_real_world,
    discretize_risk_neutral,
    with_sd,
)
from .errors import InvalidInputError
from .moments import HedgeSystem, assemble_system, profit, utility_value
from .solver import (
    PRICE,
    WEATHER,
    HedgeSolution,
    no_hedge,
    proxy_solution,
    solve_general,
    solve_restricted,
)

MERGE_RTOL = 1e-9


class Strategy(str, Enum):
    NO_HEDGE = "NoHedge"
    PRICE_ONLY = "PriceOnly"
    WEATHER_ONLY = "WeatherOnly"
    PRICE_AND_WEATHER = "PriceAndWeather"
    INDEPENDENCE_PROXY = "IndependenceProxy"


def solve_strategy(sys: HedgeSystem, a: float, strategy: Strategy) -> HedgeSolution:
    strategy = Strategy(strategy)
    if strategy is Strategy.NO_HEDGE:
        return no_hedge(sys, a)
    if strategy is Strategy.PRICE_ONLY:
        return solve_restricted(sys, a, PRICE)
    if strategy is Strategy.WEATHER_ONLY:
        return solve_restricted(sys, a, WEATHER)
    if strategy is Strategy.PRICE_AND_WEATHER:
        return solve_general(sys, a)
    return proxy_solution(sys, a)


@dataclass(frozen=True)
class Instance:
    psi: RealWorldMeasure
    phi: RiskNeutralMeasure
    system: HedgeSystem


def build_instance(psi_spec: GaussianSpec, phi_spec: GaussianSpec, r: float) -> Instance:
    """Discretize both specs (risk-neutral on the real-world grid) and assemble."""
    psi = discretize_real_world(psi_spec)
    phi = discretize_risk_neutral(phi_spec, psi.grid.prices, psi.grid.weather)
    return Instance(psi=psi, phi=phi, system=assemble_system(psi, phi, r))


@dataclass(frozen=True)
class ProfitDistribution:
    values: np.ndarray
    probs: np.ndarray
    label: str = Strategy.NO_HEDGE.value

    @property
    def mean(self) -> float:
        return float(self.probs @ self.values)

    @property
    def variance(self) -> float:
        return float(self.probs @ (self.values - self.mean) ** 2)


def _merge_equal(values: np.ndarray, probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(values, kind="stable")
    values, probs = values[order], probs[order]
    gaps = np.diff(values) > MERGE_RTOL * np.maximum(1.0, np.abs(values[1:]))
    group = np.concatenate([[0], np.cumsum(gaps)])
    starts = np.flatnonzero(np.concatenate([[True], gaps]))
    return values[starts], np.bincount(group, weights=probs)


def hedged_profit_distribution(
    psi: RealWorldMeasure,
    r: float,
    sol: Optional[HedgeSolution] = None,
    label: Optional[str] = None,
) -> ProfitDistribution:
    """Distribution of ``(r - p) q + x_P(p) + x_W(w)`` over every scenario."""
    n, ell, m = psi.grid.shape
    x_p = np.zeros(n) if sol is None else np.asarray(sol.x_p, float)
    x_w = np.zeros(m) if sol is None else np.asarray(sol.x_w, float)
    if x_p.shape != (n,) or x_w.shape != (m,):
        raise InvalidInputError("claim dimensions do not match the grid")
    y = profit(psi.grid.prices[:, None], psi.grid.quantities[None, :], r)
    total = y[:, :, None] + x_p[:, None, None] + x_w[None, None, :]
    values, probs = _merge_equal(total.ravel(), psi.probs.ravel())
    if label is None:
        label = Strategy.NO_HEDGE.value if sol is None else Strategy.PRICE_AND_WEATHER.value
    return ProfitDistribution(values=values, probs=probs, label=label)


def quantile(dist: ProfitDistribution, levels: Sequence[float]) -> np.ndarray:
    """Left-continuous inverse CDF: smallest value whose cumulative probability
    reaches the level."""
    if dist.values.size == 0:
        raise InvalidInputError("empty distribution")
    levels = np.asarray(levels, dtype=float)
    if np.any((levels <= 0) | (levels >= 1)):
        raise InvalidInputError("quantile levels must lie in (0, 1)")
    if np.any(np.diff(levels) <= 0):
        raise InvalidInputError("quantile levels must be strictly increasing")
    cum = np.cumsum(dist.probs)
    # absorb summation round-off so that an exact hit counts as reached
    idx = np.searchsorted(cum, levels - 1e-12, side="left")
    return dist.values[np.minimum(idx, dist.values.size - 1)]


def quantile_table(
    dists: Sequence[ProfitDistribution], levels: Sequence[float]
) -> dict[str, np.ndarray]:
    return {d.label: quantile(d, levels) for d in dists}


@dataclass(frozen=True)
class CorrelationRecord:
    rho: float
    system: HedgeSystem
    general: HedgeSolution
    proxy: HedgeSolution
    general_utility: float
    proxy_utility: float

    @property
    def utility_gap(self) -> float:
        return self.general_utility - self.proxy_utility


def correlation_sweep(
    psi_spec: GaussianSpec,
    phi_spec: GaussianSpec,
    rho_values: Sequence[float],
    a: float,
    r: float,
) -> list[CorrelationRecord]:
    """Re-solve with Cor(w, log p) = rho under both measures, for each rho."""
    records = []
    for rho in rho_values:
        if not abs(rho) < 1:
            raise InvalidInputError(f"correlation {rho} must satisfy |rho| < 1")
        inst = build_instance(replace(psi_spec, rho_wp=rho), replace(phi_spec, rho_wp=rho), r)
        sys = inst.system
        general = solve_general(sys, a)
        proxy = proxy_solution(sys, a)
        records.append(CorrelationRecord(
            rho=float(rho),
            system=sys,
            general=general,
            proxy=proxy,
            general_utility=utility_value(sys, general.x_p, general.x_w, a),
            proxy_utility=utility_value(sys, proxy.x_p, proxy.x_w, a),
        ))
    return records


@dataclass(frozen=True)
class VolatilityRecord:
    sigma: float
    axis: str
    system: HedgeSystem
    solution: HedgeSolution

    @property
    def payoff_range(self) -> float:
        claim = self.solution.x_p if self.axis == PRICE else self.solution.x_w
        return float(claim.max() - claim.min())


def volatility_sweep(
    psi_spec: GaussianSpec,
    phi_spec: GaussianSpec,
    sigma_values: Sequence[float],
    axis: str,
    a: float,
    r: float,
    rho: Optional[float] = 0.75,
) -> list[VolatilityRecord]:
    """Re-solve with the price (log) or weather standard deviation replaced.

    The replacement applies to both measures. ``rho`` fixes Cor(w, log p)
    for the whole sweep; pass ``None`` to keep the specs' own value.
    """
    if axis not in (PRICE, WEATHER):
        raise InvalidInputError(f"unknown axis {axis!r}; expected 'price' or 'weather'")
    if rho is not None:
        psi_spec = replace(psi_spec, rho_wp=rho)
        phi_spec = replace(phi_spec, rho_wp=rho)
    records = []
    for sigma in sigma_values:
        if not sigma > 0:
            raise InvalidInputError(f"volatility must be positive, got {sigma}")
        inst = build_instance(with_sd(psi_spec, axis, sigma), with_sd(phi_spec, axis, sigma), r)
        records.append(VolatilityRecord(
            sigma=float(sigma), axis=axis, system=inst.system, solution=solve_general(inst.system, a),
        ))
    return records
