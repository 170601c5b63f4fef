"""Discrete scenario supports, probability measures and Gaussian grid discretization.

A real-world measure is a probability table over price x quantity x weather
nodes; a risk-neutral measure carries the price and weather marginals used to
price claims. Both can be built from a :class:`GaussianSpec`, which describes a
normal distribution in (log price, log quantity, weather) coordinates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace
from functools import cached_property
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import InvalidInputError

CONSTRUCTION_TOL = 1e-12
USER_TOL = 1e-9


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be a 1-D vector")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScenarioGrid:
    """Ordered supports for price (currency/MWh), quantity (MWh) and weather index."""

    prices: np.ndarray
    quantities: np.ndarray
    weather: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            arr = _frozen(getattr(self, f.name), f.name)
            if arr.size < 2:
                raise InvalidInputError(f"{f.name} needs at least 2 levels, got {arr.size}")
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{f.name} contains non-finite values")
            if not np.all(np.diff(arr) > 0):
                raise InvalidInputError(f"{f.name} must be strictly increasing")
            object.__setattr__(self, f.name, arr)
        if self.prices[0] < 0 or self.quantities[0] < 0:
            raise InvalidInputError("prices and quantities must be nonnegative")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.prices.size, self.quantities.size, self.weather.size)


@dataclass(frozen=True)
class RealWorldMeasure:
    """Joint probability table indexed (price, quantity, weather).

    Marginals are computed lazily and cached; the table itself is read-only.
    """

    grid: ScenarioGrid
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim == 1 and probs.size == math.prod(self.grid.shape):
            probs = probs.reshape(self.grid.shape)
        if probs.shape != self.grid.shape:
            raise InvalidInputError(
                f"probability table shape {probs.shape} does not match grid {self.grid.shape}"
            )
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @cached_property
    def price_marginal(self) -> np.ndarray:
        return self.probs.sum(axis=(1, 2))

    @cached_property
    def quantity_marginal(self) -> np.ndarray:
        return self.probs.sum(axis=(0, 2))

    @cached_property
    def weather_marginal(self) -> np.ndarray:
        return self.probs.sum(axis=(0, 1))

    @cached_property
    def price_weather_marginal(self) -> np.ndarray:
        return self.probs.sum(axis=1)


@dataclass(frozen=True)
class RiskNeutralMeasure:
    """Pricing measure: marginals on the price and weather supports.

    ``joint`` keeps the (price, weather) table when the measure was
    discretized from a bivariate normal; it is not needed for hedging.
    """

    prices: np.ndarray
    weather: np.ndarray
    price_marginal: np.ndarray
    weather_marginal: np.ndarray
    joint: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("prices", "weather", "price_marginal", "weather_marginal"):
            object.__setattr__(self, name, _frozen(getattr(self, name), name))
        if self.prices.size != self.price_marginal.size:
            raise InvalidInputError("price support and price marginal differ in length")
        if self.weather.size != self.weather_marginal.size:
            raise InvalidInputError("weather support and weather marginal differ in length")
        if self.joint is not None:
            joint = np.array(self.joint, dtype=np.float64)
            joint.setflags(write=False)
            object.__setattr__(self, "joint", joint)


Measure = Union[RealWorldMeasure, RiskNeutralMeasure]


def _check_probability_vector(vec: np.ndarray, label: str, tol: float) -> list[str]:
    problems = []
    if not np.all(np.isfinite(vec)):
        problems.append(f"{label}: non-finite probability")
        return problems
    if np.any(vec < 0):
        problems.append(f"{label}: negative probability")
    total = float(vec.sum())
    if abs(total - 1.0) > tol:
        problems.append(f"{label}: total != 1 (sum = {total:.15g})")
    return problems


def validate_measure(measure: Measure, tol: float = USER_TOL) -> list[str]:
    """Return the list of violated invariants; empty means valid.

    On success every cached marginal of a real-world measure has been
    populated and checked.
    """
    if isinstance(measure, RealWorldMeasure):
        problems = _check_probability_vector(measure.probs.ravel(), "joint table", tol)
        if problems:
            return problems
        for label, vec in (
            ("price marginal", measure.price_marginal),
            ("quantity marginal", measure.quantity_marginal),
            ("weather marginal", measure.weather_marginal),
            ("price-weather marginal", measure.price_weather_marginal.ravel()),
        ):
            problems += _check_probability_vector(vec, label, tol)
        return problems
    if isinstance(measure, RiskNeutralMeasure):
        problems = _check_probability_vector(measure.price_marginal, "price marginal", tol)
        problems += _check_probability_vector(measure.weather_marginal, "weather marginal", tol)
        return problems
    raise TypeError(f"not a measure: {type(measure).__name__}")


def ensure_valid(measure: Measure, tol: float = USER_TOL) -> None:
    problems = validate_measure(measure, tol)
    if problems:
        raise InvalidInputError("invalid measure: " + "; ".join(problems))


# ---------------------------------------------------------------------------
# Gaussian discretization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianSpec:
    """Normal distribution in (log price, log quantity, weather) coordinates.

    Leave the quantity fields (and ``rho_pq``/``rho_wq``) unset for a
    risk-neutral spec on (log price, weather).
    """

    mean_log_price: float
    sd_log_price: float
    mean_weather: float
    sd_weather: float
    rho_wp: float = 0.0
    mean_log_quantity: Optional[float] = None
    sd_log_quantity: Optional[float] = None
    rho_pq: float = 0.0
    rho_wq: float = 0.0
    grid_points: int = 100

    def __post_init__(self):
        sds = [self.sd_log_price, self.sd_weather]
        if self.has_quantity:
            sds.append(self.sd_log_quantity)
        elif self.sd_log_quantity is not None or self.mean_log_quantity is not None:
            raise InvalidInputError("mean_log_quantity and sd_log_quantity must be given together")
        if any(not (sd > 0) for sd in sds):
            raise InvalidInputError("standard deviations must be positive")
        for rho in (self.rho_wp, self.rho_pq, self.rho_wq):
            if not abs(rho) <= 1:
                raise InvalidInputError(f"correlation {rho} outside [-1, 1]")
        if int(self.grid_points) != self.grid_points or self.grid_points < 2:
            raise InvalidInputError("grid_points must be an integer >= 2")

    @property
    def has_quantity(self) -> bool:
        return self.mean_log_quantity is not None and self.sd_log_quantity is not None

    def correlation_matrix(self) -> np.ndarray:
        """Correlations in axis order (log price, log quantity, weather), or
        (log price, weather) for a spec without quantity."""
        if self.has_quantity:
            return np.array([
                [1.0, self.rho_pq, self.rho_wp],
                [self.rho_pq, 1.0, self.rho_wq],
                [self.rho_wp, self.rho_wq, 1.0],
            ])
        return np.array([[1.0, self.rho_wp], [self.rho_wp, 1.0]])

    def axis_params(self) -> tuple[np.ndarray, np.ndarray]:
        if self.has_quantity:
            means = [self.mean_log_price, self.mean_log_quantity, self.mean_weather]
            sds = [self.sd_log_price, self.sd_log_quantity, self.sd_weather]
        else:
            means = [self.mean_log_price, self.mean_weather]
            sds = [self.sd_log_price, self.sd_weather]
        return np.array(means, dtype=float), np.array(sds, dtype=float)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown GaussianSpec fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidInputError(f"bad GaussianSpec: {exc}") from None


def case_study_specs(rho_wp: float = 0.0, grid_points: int = 100) -> tuple[GaussianSpec, GaussianSpec]:
    """Real-world and risk-neutral specs of the reference retailer study.

    ``rho_wp = 0`` gives the independence case, ``rho_wp = 0.33`` the general case.
    """
    psi = GaussianSpec(
        mean_log_price=4.15, sd_log_price=0.65,
        mean_log_quantity=7.99, sd_log_quantity=0.20,
        mean_weather=50.5, sd_weather=43.5,
        rho_pq=0.40, rho_wq=0.65, rho_wp=rho_wp,
        grid_points=grid_points,
    )
    phi = GaussianSpec(
        mean_log_price=4.40, sd_log_price=0.65,
        mean_weather=54.6, sd_weather=43.5,
        rho_wp=rho_wp,
        grid_points=grid_points,
    )
    return psi, phi


def axis_nodes(mean: float, sd: float, n: int) -> np.ndarray:
    """``n`` equally spaced nodes from mean - 3 sd to mean + 3 sd (endpoints exact)."""
    return np.linspace(mean - 3.0 * sd, mean + 3.0 * sd, n)


def _precision(corr: np.ndarray, sds: np.ndarray) -> np.ndarray:
    eig = np.linalg.eigvalsh(corr)
    if eig.min() <= 1e-12:
        raise InvalidInputError(
            f"invalid correlation structure (smallest eigenvalue {eig.min():.3g})"
        )
    cov = corr * np.outer(sds, sds)
    return np.linalg.inv(cov)


def _node_log_density(axes: list[np.ndarray], means: np.ndarray, precision: np.ndarray) -> np.ndarray:
    """Unnormalized Gaussian log-density on the tensor grid spanned by ``axes``."""
    centered = np.meshgrid(*[ax - mu for ax, mu in zip(axes, means)], indexing="ij")
    z = np.stack(centered, axis=-1)
    return -0.5 * np.einsum("...i,ij,...j->...", z, precision, z)


def _normalize_log(logw: np.ndarray, axis=None) -> np.ndarray:
    w = np.exp(logw - logw.max(axis=axis, keepdims=axis is not None))
    return w / w.sum(axis=axis, keepdims=axis is not None)


def discretize_real_world(spec: GaussianSpec) -> RealWorldMeasure:
    """Discretize a trivariate normal spec onto an n x n x n grid.

    The (log price, weather) plane carries the node-normalized bivariate
    density; each quantity slice carries the node-normalized conditional
    density of log quantity given (log price, weather). The joint thus has the
    pairwise correlations of the spec, and its price/weather 2-marginal is
    exactly the discretized bivariate normal (so ``rho_wp = 0`` yields an
    exactly factorized price/weather marginal).
    """
    if not spec.has_quantity:
        raise InvalidInputError("real-world spec needs log-quantity parameters")
    n = int(spec.grid_points)
    means, sds = spec.axis_params()
    corr = spec.correlation_matrix()
    _precision(corr, sds)  # full trivariate must be positive definite
    axes = [axis_nodes(mu, sd, n) for mu, sd in zip(means, sds)]
    grid = ScenarioGrid(prices=np.exp(axes[0]), quantities=np.exp(axes[1]), weather=axes[2])

    pw_idx = [0, 2]
    pw_precision = _precision(corr[np.ix_(pw_idx, pw_idx)], sds[pw_idx])
    pw_table = _normalize_log(_node_log_density([axes[0], axes[2]], means[pw_idx], pw_precision))

    # log q | (log p, w) ~ N(mean_q + beta . (x - mean_x), cond_var)
    cov = corr * np.outer(sds, sds)
    s_xx = cov[np.ix_(pw_idx, pw_idx)]
    s_qx = cov[1, pw_idx]
    beta = np.linalg.solve(s_xx, s_qx)
    cond_var = cov[1, 1] - s_qx @ beta
    cond_mean = (
        means[1]
        + beta[0] * (axes[0] - means[0])[:, None]
        + beta[1] * (axes[2] - means[2])[None, :]
    )
    logq = -0.5 * (axes[1][None, :, None] - cond_mean[:, None, :]) ** 2 / cond_var
    q_given_pw = _normalize_log(logq, axis=1)

    probs = pw_table[:, None, :] * q_given_pw
    probs /= probs.sum()
    measure = RealWorldMeasure(grid=grid, probs=probs)
    ensure_valid(measure, CONSTRUCTION_TOL)
    return measure


def discretize_risk_neutral(
    spec: GaussianSpec,
    prices: Optional[np.ndarray] = None,
    weather: Optional[np.ndarray] = None,
) -> RiskNeutralMeasure:
    """Discretize a bivariate (log price, weather) normal by node density.

    Without explicit supports the spec's own mean +/- 3 sd grid is used. Pass
    the real-world grid's ``prices``/``weather`` to obtain a measure on the
    same support, which is what hedging requires.
    """
    n = int(spec.grid_points)
    means, sds = spec.axis_params()
    if spec.has_quantity:
        keep = [0, 2]
        corr = spec.correlation_matrix()[np.ix_(keep, keep)]
        means, sds = means[keep], sds[keep]
    else:
        corr = spec.correlation_matrix()
    precision = _precision(corr, sds)
    if prices is None:
        prices = np.exp(axis_nodes(means[0], sds[0], n))
    if weather is None:
        weather = axis_nodes(means[1], sds[1], n)
    prices = np.asarray(prices, dtype=float)
    weather = np.asarray(weather, dtype=float)
    # reuse grid validation for both supports
    ScenarioGrid(prices=prices, quantities=[0.0, 1.0], weather=weather)
    table = _normalize_log(_node_log_density([np.log(prices), weather], means, precision))
    measure = RiskNeutralMeasure(
        prices=prices,
        weather=weather,
        price_marginal=table.sum(axis=1),
        weather_marginal=table.sum(axis=0),
        joint=table,
    )
    ensure_valid(measure, CONSTRUCTION_TOL)
    return measure


def with_sd(spec: GaussianSpec, axis: str, sd: float) -> GaussianSpec:
    """Copy of ``spec`` with the price or weather standard deviation replaced."""
    if axis == "price":
        return replace(spec, sd_log_price=sd)
    if axis == "weather":
        return replace(spec, sd_weather=sd)
    raise InvalidInputError(f"unknown axis {axis!r}; expected 'price' or 'weather'")


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def measure_to_dict(measure: Measure) -> dict:
    if isinstance(measure, RealWorldMeasure):
        g = measure.grid
        return {
            "grid": {
                "prices": g.prices.tolist(),
                "quantities": g.quantities.tolist(),
                "weather": g.weather.tolist(),
            },
            "probs": measure.probs.ravel(order="C").tolist(),
        }
    return {
        "grid": {"prices": measure.prices.tolist(), "weather": measure.weather.tolist()},
        "price_marginal": measure.price_marginal.tolist(),
        "weather_marginal": measure.weather_marginal.tolist(),
    }


def measure_from_dict(data: dict, tol: float = USER_TOL) -> Measure:
    """Parse either measure format and validate it at user-data tolerance."""
    try:
        grid = data["grid"]
        if "probs" in data:
            sg = ScenarioGrid(grid["prices"], grid["quantities"], grid["weather"])
            probs = np.asarray(data["probs"], dtype=float)
            if probs.size != math.prod(sg.shape):
                raise InvalidInputError(
                    f"probs has {probs.size} entries, expected {math.prod(sg.shape)}"
                )
            measure: Measure = RealWorldMeasure(grid=sg, probs=probs)
        else:
            measure = RiskNeutralMeasure(
                prices=grid["prices"],
                weather=grid["weather"],
                price_marginal=data["price_marginal"],
                weather_marginal=data["weather_marginal"],
            )
    except KeyError as exc:
        raise InvalidInputError(f"measure file missing field {exc}") from None
    ensure_valid(measure, tol)
    return measure


def save_measure(measure: Measure, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(measure_to_dict(measure)) + "\n", encoding="utf-8")


def load_measure(path: Union[str, Path]) -> Measure:
    return measure_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_spec(path: Union[str, Path]) -> GaussianSpec:
    return GaussianSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
