"""Moment assembly for the mean-variance hedging quadratic program.

With claims ``x = [x_P; x_W]`` paying ``x_P[i]`` at price level i and
``x_W[k]`` at weather level k, the utility of hedged profit is

    mu_y - a sigma2_y + (d + 2 a c)' x - a x' M x

where ``M`` is the covariance matrix of the price/weather indicator vectors,
``c`` the (negated) covariance of those indicators with unhedged profit and
``d`` the real-world marginals. Zero-cost constraints are ``B' x = 0`` with
``B = blockdiag(phi_p, phi_w)``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np
from scipy.linalg import block_diag

from .distributions import (
    RealWorldMeasure,
    RiskNeutralMeasure,
    ensure_valid,
)
from .errors import DegenerateMarginalError, IncompatibleSupportsError, InvalidInputError


def profit(p, q, r):
    """Unhedged retailer profit ``(r - p) q``; broadcasts over arrays."""
    if np.ndim(p) == 0 and np.ndim(q) == 0:
        return (r - p) * q
    return (r - np.asarray(p, dtype=float)) * np.asarray(q, dtype=float)


@dataclass(frozen=True)
class HedgeSystem:
    mu_y: float
    sigma2_y: float
    c_p: np.ndarray
    c_w: np.ndarray
    M_pp: np.ndarray
    M_ww: np.ndarray
    M_pw: np.ndarray
    b_p: np.ndarray
    b_w: np.ndarray
    d_p: np.ndarray
    d_w: np.ndarray
    retail_rate: float
    mu_y_given_p: np.ndarray
    mu_y_given_w: np.ndarray
    prices: np.ndarray
    weather: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, np.ndarray):
                value = value.copy()
                value.setflags(write=False)
                object.__setattr__(self, f.name, value)

    @property
    def n(self) -> int:
        return self.d_p.size

    @property
    def m(self) -> int:
        return self.d_w.size

    @property
    def M(self) -> np.ndarray:
        return np.block([[self.M_pp, self.M_pw], [self.M_pw.T, self.M_ww]])

    @property
    def c(self) -> np.ndarray:
        return np.concatenate([self.c_p, self.c_w])

    @property
    def d(self) -> np.ndarray:
        return np.concatenate([self.d_p, self.d_w])

    @property
    def b(self) -> np.ndarray:
        return np.concatenate([self.b_p, self.b_w])

    @property
    def B(self) -> np.ndarray:
        """(n+m) x 2 zero-cost constraint matrix."""
        return block_diag(self.b_p[:, None], self.b_w[:, None])

    def independence_proxy(self) -> "HedgeSystem":
        """Same system with the price/weather cross-covariance forced to zero."""
        return replace(self, M_pw=np.zeros_like(self.M_pw))


def assemble_system(psi: RealWorldMeasure, phi: RiskNeutralMeasure, r: float) -> HedgeSystem:
    """Build every moment the hedging program needs from the two measures."""
    ensure_valid(psi)
    ensure_valid(phi)
    grid = psi.grid
    if not (np.array_equal(phi.prices, grid.prices) and np.array_equal(phi.weather, grid.weather)):
        raise IncompatibleSupportsError(
            "incompatible supports: risk-neutral price/weather grid differs from the real-world grid"
        )
    psi_p = psi.price_marginal
    psi_w = psi.weather_marginal
    if np.any(psi_p <= 0):
        raise DegenerateMarginalError(
            f"degenerate marginal: zero probability at price levels {np.flatnonzero(psi_p <= 0).tolist()}"
        )
    if np.any(psi_w <= 0):
        raise DegenerateMarginalError(
            f"degenerate marginal: zero probability at weather levels {np.flatnonzero(psi_w <= 0).tolist()}"
        )

    y = profit(grid.prices[:, None], grid.quantities[None, :], r)  # (n, l)
    weighted = psi.probs * y[:, :, None]
    mu_y = float(weighted.sum())
    sigma2_y = float((psi.probs * ((y - mu_y) ** 2)[:, :, None]).sum())
    # E[delta_P y] and E[delta_W y]
    ey_p = weighted.sum(axis=(1, 2))
    ey_w = weighted.sum(axis=(0, 1))
    psi_pw = psi.price_weather_marginal
    # c = mu_y psi - E[delta y] = -E[delta (y - mu_y)]; the centered form
    # avoids cancelling two large numbers
    centered = psi.probs * (y - mu_y)[:, :, None]
    c_p = -centered.sum(axis=(1, 2))
    c_w = -centered.sum(axis=(0, 1))

    return HedgeSystem(
        mu_y=mu_y,
        sigma2_y=sigma2_y,
        c_p=c_p,
        c_w=c_w,
        M_pp=np.diag(psi_p) - np.outer(psi_p, psi_p),
        M_ww=np.diag(psi_w) - np.outer(psi_w, psi_w),
        M_pw=psi_pw - np.outer(psi_p, psi_w),
        b_p=phi.price_marginal,
        b_w=phi.weather_marginal,
        d_p=psi_p,
        d_w=psi_w,
        retail_rate=float(r),
        mu_y_given_p=ey_p / psi_p,
        mu_y_given_w=ey_w / psi_w,
        prices=grid.prices,
        weather=grid.weather,
    )


def _stack(sys: HedgeSystem, x_p, x_w) -> np.ndarray:
    x_p = np.asarray(x_p, dtype=float)
    x_w = np.asarray(x_w, dtype=float)
    if x_p.shape != (sys.n,) or x_w.shape != (sys.m,):
        raise InvalidInputError(
            f"claim shapes {x_p.shape}, {x_w.shape} do not match system ({sys.n},), ({sys.m},)"
        )
    return np.concatenate([x_p, x_w])


def hedged_moments(sys: HedgeSystem, x_p, x_w) -> tuple[float, float]:
    """Real-world mean and variance of profit plus both claims."""
    x = _stack(sys, x_p, x_w)
    mean = sys.mu_y + sys.d @ x
    var = sys.sigma2_y - 2.0 * sys.c @ x + x @ sys.M @ x
    return float(mean), float(var)


def utility_value(sys: HedgeSystem, x_p, x_w, a: float) -> float:
    x = _stack(sys, x_p, x_w)
    return float(sys.mu_y - a * sys.sigma2_y + (sys.d + 2.0 * a * sys.c) @ x - a * (x @ sys.M @ x))


def is_psd(matrix: np.ndarray, rel_floor: float = 1e-8) -> bool:
    """Eigenvalue floor test for symmetric, possibly rank-deficient matrices."""
    eig = np.linalg.eigvalsh(matrix)
    return bool(eig.min() >= -rel_floor * max(abs(eig.max()), np.finfo(float).tiny))
