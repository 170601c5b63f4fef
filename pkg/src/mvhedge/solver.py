"""Closed-form optimal zero-cost claims.

The optimality conditions of the hedging program reduce, after fixing both
multipliers at 1, to the square system

    [M_hat; B'] x = [c_hat + (d_hat - b_hat) / (2a); 0]

where the hatted quantities drop one price row and one weather row (each
block's rows sum to zero, so any one of them is redundant). Everything here is a
direct linear solve; no iterative QP is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, SingularSystemError
from .moments import HedgeSystem

SINGULAR_RTOL = 1e-12
INDEPENDENCE_TOL = 1e-10

BOTH = "both"
PRICE = "price"
WEATHER = "weather"


@dataclass(frozen=True)
class HedgeSolution:
    x_p: np.ndarray
    x_w: np.ndarray
    lambda_p: Optional[float]
    lambda_w: Optional[float]
    risk_aversion: float
    foc_residual: float
    cost_residual_p: float
    cost_residual_w: float
    blocks: str = BOTH

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.x_p, self.x_w])

    def to_dict(self) -> dict:
        return {
            "a": self.risk_aversion,
            "xP": self.x_p.tolist(),
            "xW": self.x_w.tolist(),
            "lambdaP": self.lambda_p,
            "lambdaW": self.lambda_w,
            "focResidual": self.foc_residual,
            "costResidualP": self.cost_residual_p,
            "costResidualW": self.cost_residual_w,
            "blocks": self.blocks,
        }


@dataclass(frozen=True)
class TwoFundBasis:
    """Profit-tilting fund ``x_o`` and risk-minimizing fund ``x_inf``.

    The optimal claim for risk aversion a is ``x_inf + x_o / (2a)``.
    """

    x_o: np.ndarray
    x_inf: np.ndarray
    n: int

    def claims(self, a: float) -> np.ndarray:
        _check_a(a)
        return self.x_inf + self.x_o / (2.0 * a)


@dataclass(frozen=True)
class FocReport:
    stationarity: float
    feasibility: float
    scale: float

    def passed(self, rtol: float = 1e-8, cost_tol: float = 1e-8) -> bool:
        return self.stationarity <= rtol * self.scale and self.feasibility <= cost_tol


def _check_a(a: float) -> None:
    if not (a > 0) or not np.isfinite(a):
        raise InvalidInputError(f"risk aversion must be positive, got {a}")


class _StackedSolver:
    """Pivoted-QR factorization of ``[M_hat; B']`` with a singularity guard."""

    def __init__(self, m_hat: np.ndarray, bt: np.ndarray):
        a = np.vstack([m_hat, bt])
        if a.shape[0] != a.shape[1]:
            raise InvalidInputError(f"stacked system is not square: {a.shape}")
        self.q, self.r, self.perm = scipy.linalg.qr(a, pivoting=True)
        diag = np.abs(np.diag(self.r))
        threshold = SINGULAR_RTOL * np.abs(a).max()
        if diag.min() <= threshold:
            raise SingularSystemError(
                "non-generic instance: stacked system singular "
                f"(smallest pivot {diag.min():.3e} <= {threshold:.3e})"
            )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        z = scipy.linalg.solve_triangular(self.r, self.q.T @ rhs)
        x = np.empty_like(z)
        x[self.perm] = z
        return x


def _kept(weights: np.ndarray) -> np.ndarray:
    """Row indices of one block with its redundant row removed.

    Any single row may go. Rounding leaves the stationarity rows slightly
    inconsistent and the whole mismatch lands on the dropped coordinate,
    divided by its probability, so the row with the most mass is dropped.
    """
    return np.delete(np.arange(weights.size), int(np.argmax(weights)))


def _kept_rows(sys: HedgeSystem) -> np.ndarray:
    return np.concatenate([_kept(sys.d_p), sys.n + _kept(sys.d_w)])


def _general_solver(sys: HedgeSystem, keep: np.ndarray) -> _StackedSolver:
    return _StackedSolver(sys.M[keep], sys.B.T)


def _multipliers(sys: HedgeSystem, x: np.ndarray, a: float, blocks: str) -> tuple[Optional[float], Optional[float]]:
    """Recover the multipliers by summing the stationarity rows of each block.

    Summing the price rows of ``2aMx + B lam = 2ac + d`` eliminates ``M``
    and ``c`` (their columns/entries sum to zero) and leaves ``lam_p``.
    """
    n = sys.n
    resid = 2.0 * a * sys.c + sys.d - 2.0 * a * (sys.M @ x)
    lam_p = float(resid[:n].sum() / sys.b_p.sum()) if blocks in (BOTH, PRICE) else None
    lam_w = float(resid[n:].sum() / sys.b_w.sum()) if blocks in (BOTH, WEATHER) else None
    return lam_p, lam_w


def _active_mask(sys: HedgeSystem, blocks: str) -> np.ndarray:
    mask = np.zeros(sys.n + sys.m, dtype=bool)
    if blocks in (BOTH, PRICE):
        mask[: sys.n] = True
    if blocks in (BOTH, WEATHER):
        mask[sys.n :] = True
    return mask


def verify_foc(sys: HedgeSystem, sol: HedgeSolution, a: Optional[float] = None) -> FocReport:
    """Residuals of the optimality conditions for ``sol``.

    Stationarity ``max|2aMx + B lam - (2ac + d)|`` is taken over the rows of
    the blocks the solution optimizes (both, price only or weather only);
    feasibility is ``max|B'x|``. Never raises on a bad solution.
    """
    a = sol.risk_aversion if a is None else a
    x = np.concatenate([np.asarray(sol.x_p, float), np.asarray(sol.x_w, float)])
    if x.size != sys.n + sys.m:
        raise InvalidInputError("solution dimensions do not match the system")
    lam = np.array([
        0.0 if sol.lambda_p is None else sol.lambda_p,
        0.0 if sol.lambda_w is None else sol.lambda_w,
    ])
    target = 2.0 * a * sys.c + sys.d
    stationarity = 2.0 * a * (sys.M @ x) + sys.B @ lam - target
    mask = _active_mask(sys, sol.blocks)
    feasibility = np.abs(sys.B.T @ x)
    return FocReport(
        stationarity=float(np.abs(stationarity[mask]).max()),
        feasibility=float(feasibility.max()),
        scale=max(1.0, float(np.abs(target).max())),
    )


def _package(sys: HedgeSystem, x: np.ndarray, a: float, blocks: str) -> HedgeSolution:
    x_p, x_w = x[: sys.n].copy(), x[sys.n :].copy()
    x_p.setflags(write=False)
    x_w.setflags(write=False)
    lam_p, lam_w = _multipliers(sys, x, a, blocks)
    draft = HedgeSolution(
        x_p=x_p, x_w=x_w, lambda_p=lam_p, lambda_w=lam_w, risk_aversion=float(a),
        foc_residual=np.nan, cost_residual_p=float(abs(sys.b_p @ x_p)),
        cost_residual_w=float(abs(sys.b_w @ x_w)), blocks=blocks,
    )
    report = verify_foc(sys, draft, a)
    return replace(draft, foc_residual=report.stationarity)


def solve_general(sys: HedgeSystem, a: float) -> HedgeSolution:
    """Optimal price and weather claims for risk aversion ``a > 0``."""
    _check_a(a)
    keep = _kept_rows(sys)
    rhs = np.concatenate([(sys.c + (sys.d - sys.b) / (2.0 * a))[keep], [0.0, 0.0]])
    x = _general_solver(sys, keep).solve(rhs)
    return _package(sys, x, a, BOTH)


def two_fund_basis(sys: HedgeSystem) -> TwoFundBasis:
    keep = _kept_rows(sys)
    solver = _general_solver(sys, keep)
    rhs = np.zeros((sys.n + sys.m, 2))
    rhs[: keep.size, 0] = (sys.d - sys.b)[keep]
    rhs[: keep.size, 1] = sys.c[keep]
    sol = solver.solve(rhs)
    return TwoFundBasis(x_o=sol[:, 0], x_inf=sol[:, 1], n=sys.n)


def _solve_block(M_block, c_block, d_block, phi, a) -> np.ndarray:
    keep = _kept(d_block)
    rhs = np.append((c_block + (d_block - phi) / (2.0 * a))[keep], 0.0)
    return _StackedSolver(M_block[keep], phi[None, :]).solve(rhs)


def solve_independent(sys: HedgeSystem, a: float) -> HedgeSolution:
    """Decoupled price and weather solves, valid when price and weather are
    independent under the real-world measure."""
    _check_a(a)
    cross = float(np.abs(sys.M_pw).max())
    if cross > INDEPENDENCE_TOL:
        raise InvalidInputError(f"measure not independent (max |M_pw| = {cross:.3e})")
    x_p = _solve_block(sys.M_pp, sys.c_p, sys.d_p, sys.b_p, a)
    x_w = _solve_block(sys.M_ww, sys.c_w, sys.d_w, sys.b_w, a)
    return _package(sys, np.concatenate([x_p, x_w]), a, BOTH)


def solve_restricted(sys: HedgeSystem, a: float, which: str) -> HedgeSolution:
    """Optimal single-instrument hedge; the other claim is fixed at zero.

    ``which`` is ``"price"`` or ``"weather"``.
    """
    _check_a(a)
    if which == PRICE:
        x_p = _solve_block(sys.M_pp, sys.c_p, sys.d_p, sys.b_p, a)
        x = np.concatenate([x_p, np.zeros(sys.m)])
    elif which == WEATHER:
        x_w = _solve_block(sys.M_ww, sys.c_w, sys.d_w, sys.b_w, a)
        x = np.concatenate([np.zeros(sys.n), x_w])
    else:
        raise InvalidInputError(f"unknown restriction {which!r}; expected 'price' or 'weather'")
    return _package(sys, x, a, which)


def no_hedge(sys: HedgeSystem, a: float = 1.0) -> HedgeSolution:
    """Zero claims packaged as a solution (multipliers fixed at 1)."""
    zeros_p, zeros_w = np.zeros(sys.n), np.zeros(sys.m)
    draft = HedgeSolution(
        x_p=zeros_p, x_w=zeros_w, lambda_p=1.0, lambda_w=1.0, risk_aversion=float(a),
        foc_residual=np.nan, cost_residual_p=0.0, cost_residual_w=0.0,
    )
    report = verify_foc(sys, draft, a)
    return replace(draft, foc_residual=report.stationarity)


def proxy_solution(sys: HedgeSystem, a: float) -> HedgeSolution:
    """Claims computed as if price and weather were independent.

    The multipliers and residuals are reported against the true system, so
    the FOC residual measures how far the proxy is from optimal.
    """
    proxy = solve_independent(sys.independence_proxy(), a)
    return _package(sys, proxy.x, a, BOTH)
