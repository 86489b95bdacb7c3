"""Spatial-sign location test with diagonal (scalar-invariant) standardization.

The test of ``H0: theta = 0`` works on spatial signs of coordinate-wise
standardized observations.  The standardization is a diagonal scale ``D``
found jointly with a location ``theta`` as the fixed point of two estimating
equations: the mean spatial sign of the standardized residuals is zero, and
``p`` times the diagonal of their mean outer product is the identity.

Two estimation modes are offered:

``exact``
    Every pair ``(i, j)`` gets its own leave-two-out fit on the remaining
    ``n - 2`` rows.  ``O(n^2)`` fixed-point solves.
``plugin``
    One full-sample fit replaces all the leave-two-out fits.  The scale used
    for the statistic itself is fitted with ``theta`` held at zero, which keeps
    the statistic exactly centred under a sign-symmetric null.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Literal, Optional, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.stats import norm

from .errors import (
    DegenerateColumnError,
    InsufficientSampleError,
    InvalidInputError,
    InvalidParameterError,
    NumericalFailureError,
)

Mode = Literal["exact", "plugin"]

EXACT_MIN_N = 10
PLUGIN_MIN_N = 3


@dataclass(frozen=True)
class DataMatrix:
    """``n x p`` sample, one observation per row.

    The array is copied to float64 and made read-only.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = _validated(self.values, min_n=3)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class EstimationConfig:
    """Convergence control and mode selection.

    ``fix_theta_at_zero`` is tri-state.  ``None`` picks the mode default for
    the statistic's scale fit (joint in exact mode, null-constrained in plugin
    mode); ``True``/``False`` force the choice in both modes.  The trace
    estimator always uses the joint fit.  For a direct :func:`hr_estimate`
    call, ``None`` means joint.
    """

    tol: float = 1e-8
    max_iter: int = 200
    variance_floor: float = 1e-12
    mode: Mode = "exact"
    fix_theta_at_zero: Optional[bool] = None

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise InvalidParameterError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise InvalidParameterError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.variance_floor > 0:
            raise InvalidParameterError(
                f"variance_floor must be positive, got {self.variance_floor}"
            )
        if self.mode not in ("exact", "plugin"):
            raise InvalidParameterError(f"mode must be 'exact' or 'plugin', got {self.mode!r}")


@dataclass(frozen=True)
class HrFit:
    """Joint location / diagonal-scale estimate.

    ``d`` is only identified up to a common positive factor.
    ``residual_sign`` is the max-norm of the mean spatial sign (reported as 0
    when ``theta`` is held at zero, since that equation is then not imposed);
    ``residual_diag`` is the max-norm of ``p * diag(mean U U^T) - 1``.
    """

    theta: np.ndarray
    d: np.ndarray
    iterations: int
    converged: bool
    residual_sign: float
    residual_diag: float


@dataclass(frozen=True)
class TestOutcome:
    r_n: float
    tr_r2_hat: float
    sigma2_hat: float
    z: float
    p_value: float
    alpha: float
    reject: bool
    mode: Mode
    n: int
    p: int
    converged: bool = True

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return asdict(self)


def _validated(X: Union[ArrayLike, DataMatrix], min_n: int) -> np.ndarray:
    if isinstance(X, DataMatrix):
        arr = X.values
    else:
        arr = np.array(X, dtype=float)
    if arr.ndim != 2:
        raise InvalidInputError(f"data must be a 2-d array, got shape {arr.shape}")
    n, p = arr.shape
    if p < 2:
        raise InvalidInputError(f"need at least 2 variables, got p={p}")
    if n < min_n:
        raise InsufficientSampleError(f"need at least {min_n} observations, got n={n}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("data contains NaN or infinite entries")
    return arr


def _row_signs(E: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.sqrt(np.einsum("ij,ij->i", E, E))
    U = np.zeros_like(E)
    nz = norms > 0
    U[nz] = E[nz] / norms[nz, None]
    return U, norms


def spatial_sign(x: ArrayLike) -> np.ndarray:
    """Return ``x / ||x||``, or the zero vector when ``x == 0``."""
    v = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("spatial_sign requires finite input")
    r = np.linalg.norm(v)
    if r == 0:
        return np.zeros_like(v)
    return v / r


def hr_estimate(
    X: Union[ArrayLike, DataMatrix],
    cfg: Optional[EstimationConfig] = None,
    *,
    theta0: Optional[ArrayLike] = None,
    d0: Optional[ArrayLike] = None,
) -> HrFit:
    """Solve the location / diagonal-scale estimating equations.

    Starts from the sample mean and sample variances (second moments about 0
    when ``theta`` is held fixed) and repeats the three-step update

    1. ``eps_j = D^{-1/2} (x_j - theta)``
    2. ``theta += D^{1/2} sum_j U(eps_j) / sum_j ||eps_j||^{-1}``
    3. ``D = p D^{1/2} diag(mean_j U(eps_j) U(eps_j)^T) D^{1/2}``

    until both equation residuals are at most ``cfg.tol``.  Steps 2 and 3 use
    the residuals of step 1.  Two observations are enough for this routine;
    the test statistics impose their own sample-size minimums.

    ``theta0`` / ``d0`` override the starting values (``theta0`` is ignored
    when ``theta`` is held at zero).

    Raises:
        DegenerateColumnError: a column is constant.
        NumericalFailureError: an iterate becomes non-finite or non-positive.
    """
    cfg = cfg or EstimationConfig()
    X = _validated(X, min_n=2)
    n, p = X.shape
    fix = cfg.fix_theta_at_zero is True

    constant = np.ptp(X, axis=0) == 0
    if np.any(constant):
        cols = np.flatnonzero(constant).tolist()
        raise DegenerateColumnError(f"constant column(s) {cols[:10]}")

    if fix:
        theta = np.zeros(p)
        d = np.mean(X * X, axis=0)
    else:
        theta = X.mean(axis=0)
        d = X.var(axis=0, ddof=1)
    d = np.maximum(d, cfg.variance_floor * d.max())
    if theta0 is not None and not fix:
        theta = np.array(theta0, dtype=float).reshape(p)
    if d0 is not None:
        d = np.array(d0, dtype=float).reshape(p)
        if not (np.all(np.isfinite(d)) and np.all(d > 0)):
            raise InvalidParameterError("d0 must be finite and strictly positive")

    converged = False
    res_sign = res_diag = math.inf
    it = 0
    for it in range(cfg.max_iter + 1):
        sqrt_d = np.sqrt(d)
        U, norms = _row_signs((X - theta) / sqrt_d)
        diag = p * np.mean(U * U, axis=0)
        res_sign = 0.0 if fix else float(np.max(np.abs(U.mean(axis=0))))
        res_diag = float(np.max(np.abs(diag - 1.0)))
        if max(res_sign, res_diag) <= cfg.tol:
            converged = True
            break
        if it == cfg.max_iter:
            break
        if not fix:
            nz = norms > 0
            if not np.any(nz):
                raise NumericalFailureError("all residuals vanished")
            theta = theta + sqrt_d * U.sum(axis=0) / np.sum(1.0 / norms[nz])
        d = d * diag
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(d)) and np.all(d > 0)):
            raise NumericalFailureError(f"non-finite or non-positive iterate at step {it + 1}")

    return HrFit(
        theta=theta,
        d=d,
        iterations=it,
        converged=converged,
        residual_sign=res_sign,
        residual_diag=res_diag,
    )


def pairwise_sign_mean(X: ArrayLike, d: ArrayLike) -> float:
    """Average of ``U(D^{-1/2} x_i)^T U(D^{-1/2} x_j)`` over pairs, for a fixed scale ``d``."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise InsufficientSampleError("need at least 2 observations")
    V, _ = _row_signs(X / np.sqrt(np.asarray(d, dtype=float)))
    G = V @ V.T
    return float(2.0 * np.triu(G, 1).sum() / (n * (n - 1)))


def _statistic_fix(cfg: EstimationConfig) -> bool:
    if cfg.fix_theta_at_zero is None:
        return cfg.mode == "plugin"
    return cfg.fix_theta_at_zero


def _components(X: np.ndarray, cfg: EstimationConfig, want_rn: bool = True, want_tr: bool = True):
    """Return ``(r_n, tr_r2_hat, all_converged)``; unrequested parts are ``nan``."""
    n, p = X.shape
    fix = _statistic_fix(cfg)
    joint_cfg = replace(cfg, fix_theta_at_zero=False)
    fixed_cfg = replace(cfg, fix_theta_at_zero=True)
    need_joint = want_tr or (want_rn and not fix)
    need_fixed = want_rn and fix
    r_n = tr = math.nan

    if cfg.mode == "plugin":
        if n < PLUGIN_MIN_N:
            raise InsufficientSampleError(f"plugin mode needs n >= {PLUGIN_MIN_N}, got {n}")
        joint = hr_estimate(X, joint_cfg) if need_joint else None
        fixed = hr_estimate(X, fixed_cfg) if need_fixed else None
        converged = all(f.converged for f in (joint, fixed) if f is not None)
        if want_rn:
            r_n = pairwise_sign_mean(X, (fixed if fix else joint).d)
        if want_tr:
            W, _ = _row_signs((X - joint.theta) / np.sqrt(joint.d))
            H = W @ W.T
            np.fill_diagonal(H, 0.0)
            tr = float(p * p * np.sum(H * H) / (n * (n - 1)))
        return r_n, tr, converged

    if n < EXACT_MIN_N:
        raise InsufficientSampleError(f"exact mode needs n >= {EXACT_MIN_N}, got {n}")
    r_terms = []
    t_terms = []
    converged = True
    keep = np.ones(n, dtype=bool)
    for i in range(n - 1):
        for j in range(i + 1, n):
            keep[i] = keep[j] = False
            rest = X[keep]
            keep[i] = keep[j] = True
            joint = hr_estimate(rest, joint_cfg) if need_joint else None
            fixed = hr_estimate(rest, fixed_cfg) if need_fixed else None
            converged &= all(f.converged for f in (joint, fixed) if f is not None)
            if want_rn:
                s = np.sqrt((fixed if fix else joint).d)
                r_terms.append(float(spatial_sign(X[i] / s) @ spatial_sign(X[j] / s)))
            if want_tr:
                s = np.sqrt(joint.d)
                a = spatial_sign((X[i] - joint.theta) / s)
                b = spatial_sign((X[j] - joint.theta) / s)
                t_terms.append(float(a @ b) ** 2)
    pairs = n * (n - 1) / 2
    if want_rn:
        r_n = math.fsum(r_terms) / pairs
    if want_tr:
        # each unordered pair appears twice in the ordered double sum
        tr = p * p * math.fsum(t_terms) / pairs
    return r_n, tr, converged


def r_n_statistic(X: Union[ArrayLike, DataMatrix], cfg: Optional[EstimationConfig] = None) -> float:
    """U-statistic ``R_n``: mean inner product of standardized signs over pairs ``i < j``."""
    cfg = cfg or EstimationConfig()
    r_n, _, _ = _components(_validated(X, min_n=2), cfg, want_tr=False)
    return r_n


def trace_r2_hat(X: Union[ArrayLike, DataMatrix], cfg: Optional[EstimationConfig] = None) -> float:
    """Estimate ``tr(R^2)`` from squared inner products of centred signs."""
    cfg = cfg or EstimationConfig()
    _, tr, _ = _components(_validated(X, min_n=2), cfg, want_rn=False)
    return tr


def decision(z: float, alpha: float) -> tuple[float, bool]:
    """Upper-tail p-value and the rejection flag ``z > z_alpha``."""
    return float(norm.sf(z)), bool(z > norm.isf(alpha))


def ss_test(
    X: Union[ArrayLike, DataMatrix],
    alpha: float = 0.05,
    cfg: Optional[EstimationConfig] = None,
) -> TestOutcome:
    """One-sided spatial-sign test of ``theta = 0``; rejects when ``R_n / sigma_hat > z_alpha``."""
    if not 0 < alpha < 1:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha}")
    cfg = cfg or EstimationConfig()
    X = _validated(X, min_n=2)
    n, p = X.shape
    r_n, tr, converged = _components(X, cfg)
    if not (math.isfinite(tr) and tr > 0):
        raise NumericalFailureError(f"trace estimate is not positive: {tr}")
    sigma2 = 2.0 * tr / (n * (n - 1) * p * p)
    z = r_n / math.sqrt(sigma2)
    p_value, reject = decision(z, alpha)
    return TestOutcome(
        r_n=r_n,
        tr_r2_hat=tr,
        sigma2_hat=sigma2,
        z=z,
        p_value=p_value,
        alpha=alpha,
        reject=reject,
        mode=cfg.mode,
        n=n,
        p=p,
        converged=converged,
    )
