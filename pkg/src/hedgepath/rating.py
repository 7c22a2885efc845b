"""Two-player Bayesian skill updates and the draw-probability closeness measure.

The update is the classic TrueSkill win/loss factor update specialized to two
players: a single match is an exact moment-matching step, so the closed forms
below agree with numerical integration of the posterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

from .model import Rating

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_NORMAL = NormalDist()


class NonPositiveSigma(Exception):
    """A rating with sigma <= 0 cannot be updated or compared."""


@dataclass(frozen=True)
class RatingConfig:
    """Parameters of the rating engine.

    ``beta_sq`` is the per-match performance variance. The default 25/6 keeps
    the draw-probability formula's stated value; the common library convention
    beta = 25/6 (beta_sq = 625/36) is available by overriding this field.
    ``tau`` is the additive dynamics deviation applied before each update.
    """

    mu0: float = 25.0
    sigma0: float = 25.0 / 3.0
    beta_sq: float = 25.0 / 6.0
    tau: float = 25.0 / 3.0 / 100.0
    draw_probability: float = 0.10

    def __post_init__(self) -> None:
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if not self.beta_sq > 0:
            raise ValueError("beta_sq must be positive")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if not 0.0 <= self.draw_probability < 1.0:
            raise ValueError("draw_probability must lie in [0, 1)")

    @property
    def draw_margin(self) -> float:
        """Performance-difference margin below which a match would be a draw."""
        if self.draw_probability == 0.0:
            return 0.0
        return _NORMAL.inv_cdf((self.draw_probability + 1.0) / 2.0) * math.sqrt(
            2.0 * self.beta_sq
        )

    def initial_rating(self) -> Rating:
        return Rating(self.mu0, self.sigma0)


def _pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT_2PI


def _cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _v_win(x: float) -> float:
    """phi(x) / Phi(x), stable for large negative x.

    Direct evaluation is safe until phi and Phi underflow (x < -37); beyond
    that the Mills-ratio asymptotic expansion carries on, accurate to ~1e-13
    at the crossover and improving further into the tail.
    """
    if x > -37.0:
        denom = _cdf(x)
        if denom > 0.0:
            return _pdf(x) / denom
    u = 1.0 / (x * x)
    return -x * (1.0 + u * (1.0 + u * (-2.0 + u * (10.0 - 74.0 * u))))


def _w_win(x: float) -> float:
    v = _v_win(x)
    return v * (v + x)


def update(winner: Rating, loser: Rating, cfg: RatingConfig) -> tuple[Rating, Rating]:
    """Posterior ratings after ``winner`` beats ``loser``.

    Both priors get the dynamics variance tau^2 added, then the win/loss factor
    is moment-matched:

        c^2 = 2*beta_sq + sigma_w^2 + sigma_l^2
        x   = (mu_w - mu_l - eps) / c      (eps = draw margin)
        mu_w += sigma_w^2 / c * v(x),  mu_l -= sigma_l^2 / c * v(x)
        sigma^2 *= 1 - sigma^2 / c^2 * w(x)
    """
    if not winner.sigma > 0 or not loser.sigma > 0:
        raise NonPositiveSigma("ratings must have positive sigma")
    var_w = winner.sigma**2 + cfg.tau**2
    var_l = loser.sigma**2 + cfg.tau**2
    c_sq = 2.0 * cfg.beta_sq + var_w + var_l
    c = math.sqrt(c_sq)
    x = (winner.mu - loser.mu - cfg.draw_margin) / c
    v = _v_win(x)
    w = _w_win(x)
    new_winner = Rating(
        winner.mu + var_w / c * v,
        math.sqrt(var_w * (1.0 - var_w / c_sq * w)),
    )
    new_loser = Rating(
        loser.mu - var_l / c * v,
        math.sqrt(var_l * (1.0 - var_l / c_sq * w)),
    )
    return new_winner, new_loser


def draw_probability(a: Rating, b: Rating, cfg: RatingConfig) -> float:
    """Closeness of two ratings: exp(-(mu_a-mu_b)^2 / (2c^2)) * sqrt(2*beta_sq/c^2).

    Equals sqrt(2*beta_sq/c^2) when the means coincide and decays with the mean
    gap; used to pick the most informative opponent during fitting.
    """
    if not a.sigma > 0 or not b.sigma > 0:
        raise NonPositiveSigma("ratings must have positive sigma")
    c_sq = 2.0 * cfg.beta_sq + a.sigma**2 + b.sigma**2
    gap = a.mu - b.mu
    return math.exp(-(gap * gap) / (2.0 * c_sq)) * math.sqrt(2.0 * cfg.beta_sq / c_sq)
