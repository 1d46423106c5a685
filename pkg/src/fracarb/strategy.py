"""Self-financing arbitrage position rules for persistent markets.

Two continuous-time constructions are implemented:

* the single-asset quadratic rule of Shiryaev (1998), long (S - s0) in the
  stock against a money-market leg, with value gamma * (S - s0)^2 / s0,
* the multi-asset power-mean rule of Salopek (1998), the scaled difference
  of two "hat" portfolios whose values are power means of the price vector,
  with value gamma * (M_beta(S) - M_alpha(S)).

Power orders are plain floats; +-inf select the max/min limits and a == 0.0
(exact, no epsilon window) selects the geometric mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class ShiryaevStrategy:
    """Quadratic single-asset rule, scaled by gamma."""

    gamma: float = 100.0

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")

    kind = "shiryaev"


@dataclass(frozen=True)
class SalopekStrategy:
    """Power-mean spread rule of orders (alpha, beta), scaled by gamma."""

    alpha: float = -30.0
    beta: float = 30.0
    gamma: float = 100.0

    def __post_init__(self):
        # nan fails the comparison and is rejected alongside alpha >= beta
        if not self.alpha < self.beta:
            raise ValueError(
                f"power orders must satisfy alpha < beta, got ({self.alpha}, {self.beta})"
            )
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")

    kind = "salopek"


StrategySpec = Union[ShiryaevStrategy, SalopekStrategy]


def _check_order(a: float) -> float:
    a = float(a)
    if np.isnan(a):
        raise ValueError("power order must not be nan")
    return a


def _check_prices(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("need at least one price")
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise ValueError("prices must be strictly positive and finite")
    return x


def _anchored_tail(x: np.ndarray, a: float, axis):
    """Split M_a(x) = anchor * exp(tail) with the anchor an extreme element.

    Anchoring at the max (a > 0) or min (a < 0) keeps every ratio power in
    (0, 1], so the mean cannot overflow, and the expm1/log1p route keeps
    relative accuracy when a is tiny and all the ratio powers sit near 1.
    """
    anchor = np.max(x, axis=axis, keepdims=True) if a > 0 else np.min(x, axis=axis, keepdims=True)
    z = a * np.log(x / anchor)
    t = np.mean(np.expm1(z), axis=axis, keepdims=True)
    return anchor, np.log1p(t) / a


def power_mean(x, a, axis=None):
    """Power mean M_a(x) of strictly positive entries.

    a = 0 is the geometric mean, a = +-inf the max/min; a = 1 recovers the
    arithmetic and a = -1 the harmonic mean.  Reduces over ``axis`` (all
    entries when None).
    """
    x = _check_prices(x)
    a = _check_order(a)
    if a == np.inf:
        return x.max(axis=axis)
    if a == -np.inf:
        return x.min(axis=axis)
    if a == 0.0:
        return np.exp(np.mean(np.log(x), axis=axis))
    anchor, tail = _anchored_tail(x, a, axis)
    out = np.squeeze(anchor * np.exp(tail), axis=axis) if axis is not None else (anchor * np.exp(tail)).reshape(())
    return out if np.ndim(out) else float(out)


def shiryaev_positions(initial_price, price, gamma):
    """Money-market and stock legs of the quadratic rule at price(s) S.

    psi0 = gamma * (s0^2 - S^2) / s0,  psi1 = 2 gamma * (S - s0) / s0.
    Broadcasts over array prices.
    """
    s0 = float(initial_price)
    if s0 <= 0:
        raise ValueError(f"initial price must be positive, got {s0}")
    s = np.asarray(price, dtype=float)
    psi0 = gamma * (s0 * s0 - s * s) / s0
    psi1 = 2.0 * gamma * (s - s0) / s0
    if psi0.ndim:
        return psi0, psi1
    return float(psi0), float(psi1)


def shiryaev_value_continuous(initial_price, price, gamma):
    """Frictionless wealth gamma * (S - s0)^2 / s0 of the quadratic rule."""
    s0 = float(initial_price)
    if s0 <= 0:
        raise ValueError(f"initial price must be positive, got {s0}")
    s = np.asarray(price, dtype=float)
    out = gamma * (s - s0) ** 2 / s0
    return out if out.ndim else float(out)


def salopek_hat_positions(prices, order, axis=-1):
    """Hat portfolio of one power order: (1/d) (S_i / M_a(S))^(a - 1).

    For a = +-inf the portfolio splits 1/m evenly over the m entries tied
    (by exact float equality) at the max/min.  Holds sum_i hat_i S_i = M_a.
    ``axis`` is the asset axis; the default suits both a price vector and a
    (paths, dates, assets) grid.
    """
    x = _check_prices(prices)
    a = _check_order(order)
    d = x.shape[axis] if x.ndim else x.size
    if d < 1:
        raise ValueError("need at least one asset")
    if a == np.inf or a == -np.inf:
        extreme = np.max(x, axis=axis, keepdims=True) if a > 0 else np.min(x, axis=axis, keepdims=True)
        mask = x == extreme
        return mask / np.sum(mask, axis=axis, keepdims=True)
    if a == 0.0:
        log_mean = np.mean(np.log(x), axis=axis, keepdims=True)
        return np.exp(-(np.log(x) - log_mean)) / d
    anchor, tail = _anchored_tail(x, a, axis)
    log_mean = np.log(anchor) + tail
    return np.exp((a - 1.0) * (np.log(x) - log_mean)) / d


def salopek_positions(prices, alpha, beta, gamma, axis=-1):
    """Risky legs of the power-mean spread rule.

    psi_i = gamma * (hat_i(beta) - hat_i(alpha)), requiring alpha < beta.
    The rule holds nothing in the risk-free asset.
    """
    alpha, beta = _check_order(alpha), _check_order(beta)
    if not alpha < beta:
        raise ValueError(f"need alpha < beta, got ({alpha}, {beta})")
    return gamma * (
        salopek_hat_positions(prices, beta, axis=axis)
        - salopek_hat_positions(prices, alpha, axis=axis)
    )


def salopek_value_continuous(prices, alpha, beta, gamma, axis=None):
    """Frictionless wealth gamma * (M_beta - M_alpha) of the spread rule."""
    alpha, beta = _check_order(alpha), _check_order(beta)
    if not alpha < beta:
        raise ValueError(f"need alpha < beta, got ({alpha}, {beta})")
    return gamma * (power_mean(prices, beta, axis=axis) - power_mean(prices, alpha, axis=axis))
