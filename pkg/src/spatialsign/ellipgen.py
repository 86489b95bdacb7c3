"""Elliptical scenario generators for the simulation study.

Five scenarios share an AR(1) correlation ``R = (rho^|i-j|)`` and differ in
the radial law and the per-coordinate scales:

=====  ===============  =====================================
label  family           scales ``d_j^2``
=====  ===============  =====================================
I      normal           1
II     normal           3 on the first half, 1 on the rest
III    t, 4 df          1
IV     t, 4 df          chi-square(4) draws, one set per replication
V      normal mixture   1  (0.9 N(0, R) + 0.1 N(0, 9R))
=====  ===============  =====================================

Randomness goes through :class:`RngStream`, a (seed, stream id) pair mapped to
an independent counter-based Philox generator, so replication ``r`` draws the
same numbers no matter which worker runs it or in what order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Literal, Optional

import numpy as np

from .errors import InvalidParameterError, NumericalFailureError

Family = Literal["normal", "mvt4", "mixture_normal"]
DScheme = Literal["identity", "half_three", "chisq4_random"]
Pattern = Literal["null", "dense", "sparse"]
Calibration = Literal["frobenius", "trace"]

SCENARIOS = ("I", "II", "III", "IV", "V")

# fraction of leading zero coordinates in the mean shift
_ZERO_FRACTION = {"dense": 0.5, "sparse": 0.95}

_DATA_SUBSTREAM = 0
_SCALE_SUBSTREAM = 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self, substream: int = _DATA_SUBSTREAM) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, substream))
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ScatterSpec:
    p: int
    rho: float = 0.5
    d_scheme: DScheme = "identity"

    def __post_init__(self) -> None:
        if self.p < 2:
            raise InvalidParameterError(f"p must be >= 2, got {self.p}")
        if not abs(self.rho) < 1:
            raise InvalidParameterError(f"|rho| must be < 1, got {self.rho}")
        if self.d_scheme not in ("identity", "half_three", "chisq4_random"):
            raise InvalidParameterError(f"unknown d_scheme {self.d_scheme!r}")

    def scales(self, rng: Optional[RngStream] = None) -> np.ndarray:
        """Diagonal ``d_j^2`` of the scale matrix (random schemes need ``rng``)."""
        if self.d_scheme == "identity":
            return np.ones(self.p)
        if self.d_scheme == "half_three":
            d2 = np.ones(self.p)
            d2[: self.p // 2] = 3.0
            return d2
        if rng is None:
            raise InvalidParameterError("chisq4_random scales need an RngStream")
        return rng.generator(_SCALE_SUBSTREAM).chisquare(4, self.p)

    def matrix(self, d2: Optional[np.ndarray] = None) -> np.ndarray:
        """Scatter ``D^{1/2} R D^{1/2}`` for the given (or deterministic) scales."""
        if d2 is None:
            d2 = self.scales()
        s = np.sqrt(d2)
        return s[:, None] * ar1_correlation(self.p, self.rho) * s[None, :]


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation design.

    ``eta`` sets the signal size as ``||mu||^2 = eta * c`` where ``c`` is
    ``sqrt(tr(Cov^2))`` for ``calibration="frobenius"`` (the default, which is
    the scaling under which the simulated powers line up with the published
    table) or ``tr(Cov)`` for ``calibration="trace"``.  ``Cov`` is the
    covariance of an observation, i.e. the scatter times 2 for ``t_4`` and
    times ``gamma + 9 (1 - gamma)`` for the mixture.
    """

    family: Family
    scatter: ScatterSpec
    n: int
    mu_pattern: Pattern = "null"
    eta: float = 0.0
    gamma: float = 0.9
    mixture_scale: float = 9.0
    nu: int = 4
    calibration: Calibration = "frobenius"
    label: str = ""

    def __post_init__(self) -> None:
        if self.family not in ("normal", "mvt4", "mixture_normal"):
            raise InvalidParameterError(f"unknown family {self.family!r}")
        if self.n < 1:
            raise InvalidParameterError(f"n must be positive, got {self.n}")
        if self.mu_pattern not in ("null", "dense", "sparse"):
            raise InvalidParameterError(f"unknown mu_pattern {self.mu_pattern!r}")
        if self.eta < 0:
            raise InvalidParameterError(f"eta must be non-negative, got {self.eta}")
        if (self.eta == 0) != (self.mu_pattern == "null"):
            raise InvalidParameterError("eta must be 0 exactly when mu_pattern is 'null'")
        if not 0 < self.gamma <= 1:
            raise InvalidParameterError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.mixture_scale <= 0:
            raise InvalidParameterError("mixture_scale must be positive")
        if self.family == "mvt4" and self.nu < 1:
            raise InvalidParameterError(f"nu must be positive, got {self.nu}")
        if self.calibration not in ("frobenius", "trace"):
            raise InvalidParameterError(f"unknown calibration {self.calibration!r}")

    @property
    def p(self) -> int:
        return self.scatter.p

    @property
    def covariance_factor(self) -> float:
        """Ratio of the covariance to the scatter matrix."""
        if self.family == "mvt4":
            if self.nu <= 2:
                return math.inf
            return self.nu / (self.nu - 2)
        if self.family == "mixture_normal":
            return self.gamma + (1 - self.gamma) * self.mixture_scale
        return 1.0


def scenario(
    label: str,
    n: int,
    p: int,
    pattern: Pattern = "null",
    eta: Optional[float] = None,
    rho: float = 0.5,
) -> ScenarioSpec:
    """Build one of the five named scenarios (``"I"`` .. ``"V"``)."""
    table = {
        "I": ("normal", "identity"),
        "II": ("normal", "half_three"),
        "III": ("mvt4", "identity"),
        "IV": ("mvt4", "chisq4_random"),
        "V": ("mixture_normal", "identity"),
    }
    if label not in table:
        raise InvalidParameterError(f"scenario must be one of {SCENARIOS}, got {label!r}")
    family, scheme = table[label]
    if eta is None:
        eta = 0.0 if pattern == "null" else 0.03
    return ScenarioSpec(
        family=family,
        scatter=ScatterSpec(p=p, rho=rho, d_scheme=scheme),
        n=n,
        mu_pattern=pattern,
        eta=eta,
        label=label,
    )


@lru_cache(maxsize=16)
def _ar1_cached(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    R = rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)
    R.setflags(write=False)
    return R


def ar1_correlation(p: int, rho: float) -> np.ndarray:
    if p < 2:
        raise InvalidParameterError(f"p must be >= 2, got {p}")
    if not abs(rho) < 1:
        raise InvalidParameterError(f"|rho| must be < 1, got {rho}")
    return _ar1_cached(int(p), float(rho)).copy()


def trace_r2_closed_form(p: int, rho: float) -> float:
    """``tr(R^2) = p + 2 sum_{k=1}^{p-1} (p - k) rho^{2k}`` for the AR(1) matrix."""
    if not abs(rho) < 1:
        raise InvalidParameterError(f"|rho| must be < 1, got {rho}")
    k = np.arange(1, p)
    return float(p + 2.0 * np.sum((p - k) * rho ** (2.0 * k)))


def trace_r4(p: int, rho: float) -> float:
    """``tr(R^4)`` by explicit matrix multiplication (``p <= 2000``)."""
    if p > 2000:
        raise InvalidParameterError(f"explicit tr(R^4) limited to p <= 2000, got {p}")
    R = _ar1_cached(int(p), float(rho))
    R2 = R @ R
    return float(np.sum(R2 * R2))


@lru_cache(maxsize=16)
def _ar1_cholesky(p: int, rho: float) -> Optional[np.ndarray]:
    if rho == 0:
        return None
    try:
        L = np.linalg.cholesky(_ar1_cached(p, rho))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"Cholesky failed for p={p}, rho={rho}") from exc
    L.setflags(write=False)
    return L


def _calibration_constant(spec: ScenarioSpec, d2: np.ndarray) -> float:
    kappa = spec.covariance_factor
    if spec.calibration == "trace":
        return kappa * float(np.sum(d2))
    # tr(Sigma^2) = sum_ij d_i d_j R_ij^2 for Sigma = D^{1/2} R D^{1/2}
    R = _ar1_cached(spec.p, float(spec.scatter.rho))
    return kappa * math.sqrt(float(d2 @ (R * R) @ d2))


def make_mu(spec: ScenarioSpec, d2: Optional[np.ndarray] = None) -> np.ndarray:
    """Mean vector: zeros, then a constant block on the trailing coordinates.

    ``d2`` is the realized scale vector; it is required for random scale
    schemes and defaults to the deterministic scales otherwise.
    """
    p = spec.p
    if spec.mu_pattern == "null":
        return np.zeros(p)
    if d2 is None:
        d2 = spec.scatter.scales()
    zeros = int(math.floor(_ZERO_FRACTION[spec.mu_pattern] * p))
    k = p - zeros
    if k <= 0:
        raise InvalidParameterError(f"no nonzero coordinates for p={p}, {spec.mu_pattern}")
    target = spec.eta * _calibration_constant(spec, np.asarray(d2, dtype=float))
    mu = np.zeros(p)
    mu[zeros:] = math.sqrt(target / k)
    return mu


def sample_scenario(spec: ScenarioSpec, rng: RngStream) -> np.ndarray:
    """Draw ``spec.n`` i.i.d. rows ``mu + radial * D^{1/2} L z``.

    ``L`` is the lower Cholesky factor of the AR(1) correlation, so the row
    scatter is ``D^{1/2} R D^{1/2}``; for the t family the scatter is not the
    covariance.  The draw order (normals, then the family's radial variables)
    is fixed, and random scales come from a separate substream.
    """
    p, n = spec.p, spec.n
    d2 = spec.scatter.scales(rng)
    L = _ar1_cholesky(p, float(spec.scatter.rho))
    gen = rng.generator(_DATA_SUBSTREAM)
    Z = gen.standard_normal((n, p))
    if L is not None:
        Z = Z @ L.T
    if spec.family == "mvt4":
        w = gen.chisquare(spec.nu, n)
        Z /= np.sqrt(w / spec.nu)[:, None]
    elif spec.family == "mixture_normal":
        wide = gen.random(n) >= spec.gamma
        Z[wide] *= math.sqrt(spec.mixture_scale)
    X = Z * np.sqrt(d2)[None, :]
    if spec.mu_pattern != "null":
        X += make_mu(spec, d2)
    return X


def with_n(spec: ScenarioSpec, n: int) -> ScenarioSpec:
    return replace(spec, n=n)
