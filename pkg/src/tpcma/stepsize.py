"""Step-size controllers.

Two controllers are provided:

* two-point adaptation: after the mean update, two extra points placed
  symmetrically along the realized mean shift are evaluated; whichever wins
  decides a raw up/down signal that is exponentially smoothed and applied
  multiplicatively to sigma.  A legacy variant of this scheme (asymmetric
  downward point, no smoothing, mean updated with the new sigma) is
  available through :func:`salomon_legacy_params`.
* cumulative adaptation (baseline): the classic whitened evolution path
  whose length is compared against its expectation under random selection.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .params import StrategyParams

__all__ = [
    "TpaState",
    "CsaState",
    "tpa_test_points",
    "tpa_update",
    "salomon_legacy_params",
    "csa_update",
    "csa_stall_indicator",
    "expected_normal_norm",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TpaState:
    """Smoothed step-size signal; starts at zero."""

    alpha_s: float = 0.0


@dataclass(frozen=True)
class CsaState:
    """Whitened evolution path of the cumulative controller; starts at zero."""

    p_sigma: np.ndarray


def tpa_test_points(
    m_new: np.ndarray,
    sigma: float,
    mean_step: np.ndarray,
    alpha_test: float,
    *,
    minus_width: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """The two step-size test points around the updated mean.

    Returns (m + a' sigma <y>, m - a' sigma <y>) where <y> is the mean step
    used in this generation's mean update and sigma is the step-size the
    population was sampled with.  ``minus_width`` replaces alpha_test on
    the downward point for the legacy asymmetric scheme.
    """
    m_new = np.asarray(m_new, dtype=float)
    shift = sigma * np.asarray(mean_step, dtype=float)
    if minus_width is None:
        minus_width = alpha_test
    return m_new + alpha_test * shift, m_new - minus_width * shift


def tpa_update(
    state: TpaState, f_plus: float, f_minus: float, params: StrategyParams
) -> tuple[TpaState, float]:
    """Smooth the win/lose signal and return the new state and sigma multiplier.

    The raw signal is -alpha_change + beta_bias when the downward point wins
    (strictly smaller fitness) and +alpha_change otherwise; ties take the
    increase branch.  If both test evaluations are non-finite the step is
    assumed too long and the decrease branch is taken, with a warning.
    The caller applies sigma <- sigma * multiplier.
    """
    if math.isnan(f_plus) or math.isnan(f_minus):
        raise ValueError("NaN test-point fitness; map failed evaluations to +inf")
    if math.isinf(f_plus) and math.isinf(f_minus):
        logger.warning("both step-size test points infeasible; decreasing sigma")
        alpha_act = -params.alpha_change + params.beta_bias
    elif f_minus < f_plus:
        alpha_act = -params.alpha_change + params.beta_bias
    else:
        alpha_act = params.alpha_change
    alpha_s = (1.0 - params.c_alpha) * state.alpha_s + params.c_alpha * alpha_act
    return TpaState(alpha_s=alpha_s), math.exp(alpha_s)


def salomon_legacy_params(base: StrategyParams) -> StrategyParams:
    """Constants reproducing the original two-point scheme of evolutionary
    gradient search: wider test steps, change factor ln 1.8, no smoothing,
    asymmetric downward point, and the mean update deferred until after the
    step-size update."""
    return replace(
        base,
        alpha_test=0.8,
        alpha_change=math.log(1.8),
        beta_bias=0.0,
        c_alpha=1.0,
        asymmetric_minus_point=True,
        mean_uses_new_sigma=True,
    )


def expected_normal_norm(n: int) -> float:
    """Expected length of an n-dimensional standard normal vector."""
    return math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))


def csa_update(
    state: CsaState,
    mean_step: np.ndarray,
    inv_sqrt: np.ndarray,
    params: StrategyParams,
) -> tuple[CsaState, float]:
    """Cumulative step-size update (baseline controller).

    ``inv_sqrt`` must be C^(-1/2) of the covariance the population was
    sampled from.  Returns the new path state and the sigma multiplier
    exp((c_sigma/d_sigma) (||p|| / E||N(0,I)|| - 1)).
    """
    cs = params.c_sigma
    p = (1.0 - cs) * state.p_sigma + math.sqrt(cs * (2.0 - cs) * params.mu_w) * (
        inv_sqrt @ np.asarray(mean_step, dtype=float)
    )
    ratio = float(np.linalg.norm(p)) / expected_normal_norm(params.n)
    multiplier = math.exp((cs / params.d_sigma) * (ratio - 1.0))
    return CsaState(p_sigma=p), multiplier


def csa_stall_indicator(p_sigma: np.ndarray, g: int, params: StrategyParams) -> int:
    """Gate for the covariance path in cumulative mode.

    Returns 0 (stall) when the normalized path length exceeds the usual
    (1.4 + 2/(n+1)) E||N(0,I)|| threshold, 1 otherwise.  ``g`` counts
    completed step-size updates, starting at 1.
    """
    if g < 1:
        raise ValueError(f"generation counter must be >= 1, got {g}")
    cs = params.c_sigma
    normalizer = math.sqrt(1.0 - (1.0 - cs) ** (2 * g))
    limit = (1.4 + 2.0 / (params.n + 1.0)) * expected_normal_norm(params.n)
    return 1 if float(np.linalg.norm(p_sigma)) / normalizer < limit else 0
