"""Asymptotic power and relative-efficiency calculators.

Notation: ``eps = D^{-1/2} (X - mu)`` is the standardized residual with ``D``
the diagonal of the scatter matrix, ``c0 = E ||eps||^{-1}`` its inverse radial
moment and ``m2 = E ||eps||^2`` its second radial moment.  The drift of the
spatial-sign test under a local alternative is

    c0^2 n p mu' D^{-1} mu / sqrt(2 tr(R^2))

and the asymptotic power is ``Phi(-z_alpha + drift)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Optional, Union

import numpy as np
from scipy.special import gammaln
from scipy.stats import norm

from .ellipgen import RngStream, ScatterSpec, ScenarioSpec, sample_scenario
from .errors import InvalidParameterError

Regime = Literal["tau1_dominant", "tau2_dominant"]

_MC_BATCH = 2000


@dataclass(frozen=True)
class PowerSpec:
    """Inputs to the power formulas.

    ``mu`` and ``d`` default to the two-block layout used for the WPL
    comparison: ``d = tau1_sq`` on the first half and ``tau2_sq`` on the second,
    ``mu = zeta`` on the first half and 0 elsewhere.  ``second_moment``
    defaults to ``p`` (the normal value of ``E ||eps||^2``).
    """

    n: int
    p: int
    alpha: float = 0.05
    c0: float = 1.0
    tr_r2: Optional[float] = None
    mu: Optional[np.ndarray] = None
    d: Optional[np.ndarray] = None
    tau1_sq: float = 1.0
    tau2_sq: float = 1.0
    zeta: float = 0.0
    second_moment: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n < 2 or self.p < 2:
            raise InvalidParameterError(f"need n >= 2 and p >= 2, got n={self.n}, p={self.p}")
        if not 0 < self.alpha < 1:
            raise InvalidParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.c0 > 0:
            raise InvalidParameterError(f"c0 must be positive, got {self.c0}")
        if not (self.tau1_sq > 0 and self.tau2_sq > 0):
            raise InvalidParameterError("tau1_sq and tau2_sq must be positive")
        half = self.p // 2
        if self.mu is None:
            mu = np.zeros(self.p)
            mu[:half] = self.zeta
            object.__setattr__(self, "mu", mu)
        if self.d is None:
            d = np.full(self.p, self.tau2_sq)
            d[:half] = self.tau1_sq
            object.__setattr__(self, "d", d)
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "d", np.asarray(self.d, dtype=float))
        if self.mu.shape != (self.p,) or self.d.shape != (self.p,):
            raise InvalidParameterError("mu and d must be p-vectors")
        if np.any(self.d <= 0):
            raise InvalidParameterError("d must be strictly positive")
        if self.tr_r2 is None:
            object.__setattr__(self, "tr_r2", float(self.p))
        if self.tr_r2 < self.p * (1 - 1e-12):
            raise InvalidParameterError(f"tr(R^2) must be >= p, got {self.tr_r2}")
        if self.second_moment is None:
            object.__setattr__(self, "second_moment", float(self.p))

    @property
    def mahalanobis_diag(self) -> float:
        """``mu' D^{-1} mu``."""
        return float(np.sum(self.mu**2 / self.d))


def _phi_shift(alpha: float, drift: float) -> float:
    return float(norm.cdf(-norm.isf(alpha) + drift))


def are_rn_pa_t(nu: float) -> float:
    """Closed-form efficiency relative to PA under multivariate t with ``nu`` df."""
    if not nu > 2:
        raise InvalidParameterError(f"nu must exceed 2 (finite variance), got {nu}")
    log_ratio = gammaln((nu + 1) / 2) - gammaln(nu / 2)
    return float(2.0 / (nu - 2) * math.exp(2.0 * log_ratio))


def _family_spec(family: Union[str, ScenarioSpec], p: int) -> ScenarioSpec:
    if isinstance(family, ScenarioSpec):
        if family.p != p:
            raise InvalidParameterError(f"family has p={family.p}, requested p={p}")
        return family
    aliases = {"normal": "normal", "mvt4": "mvt4", "t4": "mvt4", "mixture_normal": "mixture_normal"}
    if family not in aliases:
        raise InvalidParameterError(f"unknown family {family!r}")
    return ScenarioSpec(family=aliases[family], scatter=ScatterSpec(p=p, rho=0.0), n=1)


def _radial_draws(family: Union[str, ScenarioSpec], p: int, draws: int, rng: RngStream) -> np.ndarray:
    """Draw ``||D^{-1/2}(X - mu)||`` for ``draws`` observations, in fixed batches."""
    if draws < 1:
        raise InvalidParameterError(f"draws must be positive, got {draws}")
    spec = _family_spec(family, p)
    if spec.family == "mvt4" and spec.nu <= 2:
        raise InvalidParameterError("second moment needs nu > 2")
    null = replace(spec, mu_pattern="null", eta=0.0)
    radii = np.empty(draws)
    for b, start in enumerate(range(0, draws, _MC_BATCH)):
        m = min(_MC_BATCH, draws - start)
        sub = RngStream(rng.seed, rng.stream_id * 1_000_003 + b)
        X = sample_scenario(replace(null, n=m), sub)
        d2 = null.scatter.scales(sub)
        radii[start : start + m] = np.linalg.norm(X / np.sqrt(d2), axis=1)
    return radii


def estimate_c0(family: Union[str, ScenarioSpec], p: int, draws: int, rng: RngStream) -> float:
    """Monte Carlo ``E ||eps||^{-1}``."""
    r = _radial_draws(family, p, draws, rng)
    return float(np.mean(1.0 / r))


def are_rn_pa_mc(family: Union[str, ScenarioSpec], p: int, draws: int, rng: RngStream) -> float:
    """Monte Carlo ``E^2(||eps||^{-1}) E(||eps||^2)`` at finite ``p``.

    Differs from the ``p -> inf`` closed form by ``O(1/p)``.
    """
    r = _radial_draws(family, p, draws, rng)
    return float(np.mean(1.0 / r) ** 2 * np.mean(r * r))


def chi_inverse_moment(p: int) -> float:
    """``E ||Z||^{-1}`` for ``Z ~ N(0, I_p)``: ``Gamma((p-1)/2) / (sqrt(2) Gamma(p/2))``."""
    if p < 2:
        raise InvalidParameterError("inverse moment is infinite for p < 2")
    return float(math.exp(gammaln((p - 1) / 2) - gammaln(p / 2)) / math.sqrt(2))


def drift_ss(spec: PowerSpec) -> float:
    return spec.c0**2 * spec.n * spec.p * spec.mahalanobis_diag / math.sqrt(2 * spec.tr_r2)


def drift_pa(spec: PowerSpec) -> float:
    # covariance diagonal is (m2 / p) D and tr(R~^2) = tr(R^2)
    return spec.n * spec.p * spec.mahalanobis_diag / (spec.second_moment * math.sqrt(2 * spec.tr_r2))


def asymptotic_power_ss(spec: PowerSpec) -> float:
    return _phi_shift(spec.alpha, drift_ss(spec))


def asymptotic_power_pa(spec: PowerSpec) -> float:
    return _phi_shift(spec.alpha, drift_pa(spec))


def _block_scale(spec: PowerSpec) -> float:
    # the block formulas carry E^2(||eps||^{-1}) in units where it equals (p c0)^2,
    # which is what makes them agree with the general drift
    return (spec.p * spec.c0) ** 2


def asymptotic_power_ss_block(spec: PowerSpec) -> float:
    """Two-block form of the spatial-sign power (shift ``zeta`` on the ``tau1`` half, ``R = I``)."""
    drift = spec.n * _block_scale(spec) * spec.zeta**2 / (2 * math.sqrt(2 * spec.p) * spec.tau1_sq)
    return _phi_shift(spec.alpha, drift)


def asymptotic_power_wpl_special(spec: PowerSpec, regime: Regime) -> float:
    """Approximate WPL power when one block's variance dominates."""
    if regime == "tau1_dominant":
        tau_sq = spec.tau1_sq
    elif regime == "tau2_dominant":
        tau_sq = spec.tau2_sq
    else:
        raise InvalidParameterError(f"unknown regime {regime!r}")
    drift = spec.n * _block_scale(spec) * spec.zeta**2 / (2 * math.sqrt(spec.p) * tau_sq)
    return _phi_shift(spec.alpha, drift)


def are_rn_wpl(spec: PowerSpec, regime: Regime) -> float:
    if regime == "tau1_dominant":
        return 1 / math.sqrt(2)
    if regime == "tau2_dominant":
        return spec.tau2_sq / (math.sqrt(2) * spec.tau1_sq)
    raise InvalidParameterError(f"unknown regime {regime!r}")
