"""Normal-family models written in natural parametrization.

Every model bundles the sufficient statistic ``T``, the log-normalizer ``A``
with its gradient and Hessian, and the dual function

    H(y) = (inv A'(y))^T y - A(inv A'(y))

together with ``H'`` (which equals ``inv A'``) and ``H''`` (which equals
``A''(H'(y))^{-1}``). Moment points ``y`` are means of ``T``; natural
parameters ``theta`` live in the domain of ``A``.

Three models are supported:

``normal-mean``
    Univariate normal, unknown mean, known variance ``sigma2``.
    ``T(x) = x / sigma2``, ``theta = mu``, ``H(y) = sigma2 * y**2 / 2``.
``normal-meanvar``
    Univariate normal, unknown mean and variance.
    ``T(x) = (x, x**2)``, ``theta = (mu / s2, -1 / (2 s2))``,
    ``H(y) = -log(2 pi (y2 - y1**2)) / 2``.
``mvnormal-mean``
    Multivariate normal, unknown mean, known covariance ``cov``.
    ``T(x) = cov^{-1} x``, ``theta = mu``, ``H(y) = y^T cov y / 2``.

The ``normal-meanvar`` dual drops the additive constant ``-1/2`` of the
exact convex conjugate. Constants cancel in every log-likelihood ratio
because the segment weights sum to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy import linalg

from randcp.errors import DegenerateMomentError, InvalidInputError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

NORMAL_MEAN = "normal-mean"
NORMAL_MEANVAR = "normal-meanvar"
MVNORMAL_MEAN = "mvnormal-mean"
MODEL_KINDS = (NORMAL_MEAN, NORMAL_MEANVAR, MVNORMAL_MEAN)

# relative floor below which y2 - y1**2 is treated as a collapsed variance
DEGENERACY_EPS = 1e-12

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class ExpFamilyModel:
    """Descriptor of one supported exponential-family model.

    Use the constructors :meth:`normal_mean`, :meth:`normal_meanvar` and
    :meth:`mvnormal_mean` rather than calling the class directly.

    Attributes
    ----------
    kind : str
        One of ``"normal-mean"``, ``"normal-meanvar"``, ``"mvnormal-mean"``.
    sigma2 : float or None
        Known variance of the ``normal-mean`` model.
    cov : ndarray or None
        Known covariance of the ``mvnormal-mean`` model, shape ``(m, m)``.
    """

    kind: str
    sigma2: float | None = None
    cov: NDArray[np.float64] | None = None
    _cov_inv: NDArray[np.float64] | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise InvalidInputError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.kind == NORMAL_MEAN:
            if self.sigma2 is None or not np.isfinite(self.sigma2) or self.sigma2 <= 0:
                raise InvalidInputError(f"sigma2 must be a positive finite number, got {self.sigma2!r}")
            object.__setattr__(self, "sigma2", float(self.sigma2))
        elif self.kind == MVNORMAL_MEAN:
            cov = np.array(self.cov, dtype=float, copy=True)
            if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] < 1:
                raise InvalidInputError(f"cov must be a square matrix, got shape {cov.shape}")
            if not np.all(np.isfinite(cov)) or not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-14):
                raise InvalidInputError("cov must be finite and symmetric")
            try:
                factor = linalg.cho_factor(cov, lower=True)
            except linalg.LinAlgError as exc:
                raise InvalidInputError("cov must be positive definite") from exc
            cov_inv = linalg.cho_solve(factor, np.eye(cov.shape[0]))
            cov_inv = 0.5 * (cov_inv + cov_inv.T)
            cov.setflags(write=False)
            cov_inv.setflags(write=False)
            object.__setattr__(self, "cov", cov)
            object.__setattr__(self, "_cov_inv", cov_inv)

    # -- constructors -----------------------------------------------------

    @classmethod
    def normal_mean(cls, sigma2: float = 1.0) -> ExpFamilyModel:
        return cls(NORMAL_MEAN, sigma2=sigma2)

    @classmethod
    def normal_meanvar(cls) -> ExpFamilyModel:
        return cls(NORMAL_MEANVAR)

    @classmethod
    def mvnormal_mean(cls, cov: ArrayLike) -> ExpFamilyModel:
        return cls(MVNORMAL_MEAN, cov=np.asarray(cov, dtype=float))

    @classmethod
    def from_name(cls, name: str, *, sigma2: float = 1.0, cov: ArrayLike | None = None) -> ExpFamilyModel:
        """Build a model from its CLI name."""
        if name == NORMAL_MEAN:
            return cls.normal_mean(sigma2)
        if name == NORMAL_MEANVAR:
            return cls.normal_meanvar()
        if name == MVNORMAL_MEAN:
            if cov is None:
                raise InvalidInputError("mvnormal-mean requires a covariance matrix")
            return cls.mvnormal_mean(cov)
        raise InvalidInputError(f"unknown model {name!r}; expected one of {MODEL_KINDS}")

    # -- dimensions -------------------------------------------------------

    @property
    def m(self) -> int:
        """Observation dimension."""
        if self.kind == MVNORMAL_MEAN:
            return int(self.cov.shape[0])
        return 1

    @property
    def d(self) -> int:
        """Natural-parameter dimension."""
        if self.kind == NORMAL_MEANVAR:
            return 2
        return self.m

    def describe(self) -> dict:
        out: dict = {"kind": self.kind, "d": self.d, "m": self.m}
        if self.kind == NORMAL_MEAN:
            out["sigma2"] = self.sigma2
        elif self.kind == MVNORMAL_MEAN:
            out["cov"] = self.cov.tolist()
        return out

    # -- sufficient statistic ---------------------------------------------

    def as_observations(self, data: ArrayLike) -> NDArray[np.float64]:
        """Coerce ``data`` to a float array of shape ``(n, m)``."""
        arr = np.asarray(data, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1) if self.m == 1 else arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[1] != self.m:
            raise InvalidInputError(
                f"observations must have dimension m={self.m}, got array of shape {np.shape(data)}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("observations must be finite")
        return arr

    def suff_stat(self, x: ArrayLike) -> NDArray[np.float64]:
        """Sufficient statistic ``T(x)``.

        A single observation gives a vector of length ``d``; a batch of
        ``n`` observations (shape ``(n,)`` or ``(n, m)``) gives ``(n, d)``.
        """
        single = np.ndim(x) == 0 or (self.m > 1 and np.ndim(x) == 1)
        obs = self.as_observations(x)
        if self.kind == NORMAL_MEAN:
            t = obs / self.sigma2
        elif self.kind == NORMAL_MEANVAR:
            t = np.column_stack([obs[:, 0], obs[:, 0] ** 2])
        else:
            t = obs @ self._cov_inv
        return t[0] if single else t

    # -- moment space (dual function H) -----------------------------------

    def _moments(self, y: ArrayLike) -> NDArray[np.float64]:
        arr = np.asarray(y, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.shape[-1] != self.d:
            raise InvalidInputError(f"moment point must have length d={self.d}, got shape {arr.shape}")
        return arr

    def variance_proxy(self, y: ArrayLike) -> NDArray[np.float64]:
        """``y2 - y1**2`` for ``normal-meanvar`` moment points, NaN where degenerate."""
        arr = self._moments(y)
        v = arr[..., 1] - arr[..., 0] ** 2
        bad = ~(v > DEGENERACY_EPS * np.maximum(1.0, np.abs(arr[..., 1])))
        return np.where(bad, np.nan, v)

    def h_values(self, y: ArrayLike) -> NDArray[np.float64]:
        """Vectorized ``H`` over the last axis; NaN marks degenerate points."""
        arr = self._moments(y)
        if self.kind == NORMAL_MEAN:
            return 0.5 * self.sigma2 * arr[..., 0] ** 2
        if self.kind == NORMAL_MEANVAR:
            with np.errstate(invalid="ignore"):
                return -0.5 * (_LOG_2PI + np.log(self.variance_proxy(arr)))
        return 0.5 * np.einsum("...i,ij,...j->...", arr, self.cov, arr)

    def _check_admissible(self, y: ArrayLike) -> NDArray[np.float64]:
        arr = self._moments(y)
        if not np.all(np.isfinite(arr)):
            raise DegenerateMomentError("moment point has non-finite entries")
        if self.kind == NORMAL_MEANVAR and np.any(np.isnan(self.variance_proxy(arr))):
            raise DegenerateMomentError(
                "moment point has non-positive variance proxy y[1] - y[0]**2"
            )
        return arr

    def h_value(self, y: ArrayLike) -> float:
        """Dual function ``H(y)`` at a single admissible moment point."""
        arr = self._check_admissible(y)
        return float(self.h_values(arr))

    def h_grad(self, y: ArrayLike) -> NDArray[np.float64]:
        """``H'(y)``, which is the natural parameter whose mean of ``T`` is ``y``.

        Accepts a single point or a stack of points along leading axes.
        """
        arr = self._check_admissible(y)
        if self.kind == NORMAL_MEAN:
            return self.sigma2 * arr
        if self.kind == NORMAL_MEANVAR:
            v = arr[..., 1] - arr[..., 0] ** 2
            return np.stack([arr[..., 0] / v, -0.5 / v], axis=-1)
        return arr @ self.cov

    def h_hess(self, y: ArrayLike) -> NDArray[np.float64]:
        """``H''(y)`` as a symmetric positive-definite ``d x d`` matrix."""
        arr = self._check_admissible(y)
        if arr.ndim != 1:
            raise InvalidInputError("h_hess expects a single moment point")
        if self.kind == NORMAL_MEAN:
            return np.array([[self.sigma2]])
        if self.kind == NORMAL_MEANVAR:
            y1, y2 = arr
            w = (y1 * y1 - y2) ** 2
            return np.array([[(y1 * y1 + y2) / w, -y1 / w], [-y1 / w, 0.5 / w]])
        return np.array(self.cov, copy=True)

    # -- natural-parameter space (log-normalizer A) -----------------------

    def _check_theta(self, theta: ArrayLike) -> NDArray[np.float64]:
        arr = np.asarray(theta, dtype=float).reshape(-1)
        if arr.shape != (self.d,):
            raise InvalidInputError(f"natural parameter must have length d={self.d}, got shape {np.shape(theta)}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("natural parameter must be finite")
        if self.kind == NORMAL_MEANVAR and not arr[1] < 0:
            raise InvalidInputError(f"theta[1] must be negative for normal-meanvar, got {arr[1]!r}")
        return arr

    def a_value(self, theta: ArrayLike) -> float:
        th = self._check_theta(theta)
        if self.kind == NORMAL_MEAN:
            return float(th[0] ** 2 / (2.0 * self.sigma2))
        if self.kind == NORMAL_MEANVAR:
            t1, t2 = th
            return float(-t1 * t1 / (4.0 * t2) + 0.5 * np.log(-np.pi / t2))
        return float(0.5 * th @ self._cov_inv @ th)

    def a_grad(self, theta: ArrayLike) -> NDArray[np.float64]:
        """``A'(theta)``, the mean of ``T`` under ``theta``."""
        th = self._check_theta(theta)
        if self.kind == NORMAL_MEAN:
            return th / self.sigma2
        if self.kind == NORMAL_MEANVAR:
            t1, t2 = th
            return np.array([-t1 / (2.0 * t2), t1 * t1 / (4.0 * t2 * t2) - 1.0 / (2.0 * t2)])
        return self._cov_inv @ th

    def a_hess(self, theta: ArrayLike) -> NDArray[np.float64]:
        """``A''(theta)``, the covariance of ``T`` under ``theta``."""
        th = self._check_theta(theta)
        if self.kind == NORMAL_MEAN:
            return np.array([[1.0 / self.sigma2]])
        if self.kind == NORMAL_MEANVAR:
            t1, t2 = th
            off = t1 / (2.0 * t2 * t2)
            return np.array(
                [
                    [-1.0 / (2.0 * t2), off],
                    [off, -t1 * t1 / (2.0 * t2**3) + 1.0 / (2.0 * t2 * t2)],
                ]
            )
        return np.array(self._cov_inv, copy=True)

    def nat_param_from_moments(self, mean: ArrayLike, var: ArrayLike | None = None) -> NDArray[np.float64]:
        """Natural parameter of the normal law with the given mean and variance.

        For the known-variance models ``var`` is optional; when supplied it
        must match the model's fixed (co)variance.
        """
        if self.kind == NORMAL_MEANVAR:
            mu = float(np.asarray(mean, dtype=float).reshape(-1)[0])
            if var is None:
                raise InvalidInputError("normal-meanvar needs a variance")
            s2 = float(np.asarray(var, dtype=float).reshape(-1)[0])
            if not np.isfinite(s2) or s2 <= 0:
                raise InvalidInputError(f"variance must be positive, got {s2!r}")
            return np.array([mu / s2, -0.5 / s2])
        mu = np.asarray(mean, dtype=float).reshape(-1)
        if mu.shape != (self.m,):
            raise InvalidInputError(f"mean must have length m={self.m}")
        if var is not None:
            given = np.atleast_2d(np.asarray(var, dtype=float))
            if np.any(np.linalg.eigvalsh(0.5 * (given + given.T)) <= 0):
                raise InvalidInputError("variance must be positive definite")
            fixed = np.array([[self.sigma2]]) if self.kind == NORMAL_MEAN else self.cov
            if given.shape != fixed.shape or not np.allclose(given, fixed):
                raise InvalidInputError(f"{self.kind} has fixed variance {fixed.tolist()}")
        return mu.copy()

    def moments_of(self, mean: ArrayLike, var: ArrayLike | None = None) -> NDArray[np.float64]:
        """Mean of ``T`` under the normal law with the given mean/variance."""
        return self.a_grad(self.nat_param_from_moments(mean, var))
