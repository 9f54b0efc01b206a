"""Data containers and likelihood kernels for the cheating-detection models.

Four model variants share one parameter state:

``M1``       responses only, cheating drift ``delta`` on compromised cells.
``M1_NULL``  responses only, plain Rasch model (no drift).
``M2``       responses and log response times, drifts ``delta`` and ``gamma``.
``M2_NULL``  as ``M2`` but the response-time submodel has no ``gamma`` shift.

``kappa`` is the *variance* of the log-time distribution (sd is ``sqrt(kappa)``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace
from functools import cached_property

import numpy as np
from scipy.special import expit

from .rand_dist import LOG_2PI


class DataError(ValueError):
    """Invalid input data."""


class ConfigurationError(ValueError):
    """Incompatible model/data/configuration combination."""


class ModelSpec(str, enum.Enum):
    M1 = "M1"
    M1_NULL = "M1_null"
    M2 = "M2"
    M2_NULL = "M2_null"

    @classmethod
    def parse(cls, value) -> "ModelSpec":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for member in cls:
            base = member.value.lower()
            if key in (base, base.replace("_null", "0"), base.replace("_", "")):
                return member
        raise ConfigurationError(f"unknown model {value!r}; expected one of "
                                 f"{[m.value for m in cls]}")

    @property
    def uses_times(self) -> bool:
        return self in (ModelSpec.M2, ModelSpec.M2_NULL)

    @property
    def response_drift(self) -> bool:
        return self is not ModelSpec.M1_NULL

    @property
    def time_drift(self) -> bool:
        return self is ModelSpec.M2

    @property
    def null(self) -> "ModelSpec":
        return {ModelSpec.M1: ModelSpec.M1_NULL, ModelSpec.M2: ModelSpec.M2_NULL}.get(self, self)


@dataclass
class DataSet:
    """Binary response matrix with optional log response times.

    ``time_mask[i, j]`` is True where the time for cell ``(i, j)`` was observed;
    masked-out entries of ``log_times`` are stored as 0 and never read.
    """

    responses: np.ndarray
    log_times: np.ndarray | None = None
    time_mask: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.responses)
        if y.ndim != 2 or y.shape[0] < 1 or y.shape[1] < 1:
            raise DataError(f"responses must be a non-empty 2-D matrix, got shape {y.shape}")
        if not np.all((y == 0) | (y == 1)):
            i, j = np.argwhere((y != 0) & (y != 1))[0]
            raise DataError(f"non-binary response at row {i}, column {j}: {y[i, j]!r}")
        self.responses = y.astype(np.int8)
        if self.log_times is None:
            self.time_mask = None
            return
        lt = np.asarray(self.log_times, dtype=float)
        if lt.shape != y.shape:
            raise DataError(f"time matrix shape {lt.shape} does not match responses {y.shape}")
        mask = np.isfinite(lt) if self.time_mask is None else np.asarray(self.time_mask, dtype=bool)
        if mask.shape != y.shape:
            raise DataError("time_mask shape does not match responses")
        bad = mask & ~np.isfinite(lt)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise DataError(f"observed log time at row {i}, column {j} is not finite")
        self.log_times = np.where(mask, lt, 0.0)
        self.time_mask = mask

    @classmethod
    def from_arrays(cls, responses, times=None) -> "DataSet":
        """Build from raw times in seconds; NaN marks a missing time."""
        if times is None:
            return cls(responses)
        t = np.asarray(times, dtype=float)
        observed = ~np.isnan(t)
        if np.any(observed & ~(t > 0)):
            i, j = np.argwhere(observed & ~(t > 0))[0]
            raise DataError(f"response time at row {i}, column {j} must be positive, got {t[i, j]}")
        with np.errstate(divide="ignore", invalid="ignore"):
            lt = np.where(observed, np.log(np.where(observed, t, 1.0)), np.nan)
        return cls(responses, lt, observed)

    @cached_property
    def response_matrix(self) -> np.ndarray:
        """Responses as float64, for matrix products."""
        return self.responses.astype(np.float64)

    @property
    def n_persons(self) -> int:
        return self.responses.shape[0]

    @property
    def n_items(self) -> int:
        return self.responses.shape[1]

    @property
    def has_times(self) -> bool:
        return self.log_times is not None

    def without_times(self) -> "DataSet":
        return DataSet(self.responses)

    def check_spec(self, spec: ModelSpec):
        if spec.uses_times and not self.has_times:
            raise ConfigurationError(f"model {spec.value} needs a response-time matrix")


@dataclass
class ParameterState:
    """All person, item and global parameters of a model.

    Person arrays have length N, item arrays length J.  Under M1 variants the
    time-related entries (``tau``, ``alpha``, ``gamma``, ``kappa``, ``mu[1]``
    and the second row/column of ``Sigma`` and ``Omega``) are carried along but
    never used.
    """

    theta: np.ndarray
    xi: np.ndarray
    tau: np.ndarray
    beta: np.ndarray
    eta: np.ndarray
    alpha: np.ndarray
    delta: float
    gamma: float
    kappa: float
    pi1: float
    pi2: float
    mu: np.ndarray
    Sigma: np.ndarray
    Omega: np.ndarray

    def copy(self) -> "ParameterState":
        return replace(self, **{f.name: np.array(getattr(self, f.name), copy=True)
                                for f in fields(self) if isinstance(getattr(self, f.name), np.ndarray)})

    @property
    def n_persons(self) -> int:
        return len(self.theta)

    @property
    def n_items(self) -> int:
        return len(self.beta)

    @classmethod
    def zeros(cls, n_persons: int, n_items: int) -> "ParameterState":
        return cls(theta=np.zeros(n_persons), xi=np.zeros(n_persons, dtype=np.int8),
                   tau=np.zeros(n_persons), beta=np.zeros(n_items),
                   eta=np.zeros(n_items, dtype=np.int8), alpha=np.zeros(n_items),
                   delta=1.0, gamma=1.0, kappa=1.0, pi1=0.5, pi2=0.5,
                   mu=np.zeros(2), Sigma=np.eye(2), Omega=np.eye(2))

    def globals_dict(self, spec: ModelSpec) -> dict:
        """Named global parameters that belong to ``spec``."""
        out = {"sigma11": self.Sigma[0, 0], "pi1": self.pi1, "pi2": self.pi2,
               "omega11": self.Omega[0, 0], "mu1": self.mu[0]}
        if spec.response_drift:
            out["delta"] = self.delta
        if spec.uses_times:
            out.update(sigma22=self.Sigma[1, 1], sigma12=self.Sigma[0, 1],
                       omega22=self.Omega[1, 1], omega12=self.Omega[0, 1],
                       mu2=self.mu[1], kappa=self.kappa)
            if spec.time_drift:
                out["gamma"] = self.gamma
        return {k: float(v) for k, v in out.items()}


def irf_prob(theta, beta, xi, eta, delta):
    """Probability of a correct response; the drift applies only when ``xi*eta == 1``."""
    return expit(np.asarray(theta) - np.asarray(beta) + np.asarray(xi) * np.asarray(eta) * delta)


def rt_log_density(log_t, tau, alpha, xi, eta, gamma, kappa):
    """Normal log density of a log time with mean ``alpha - tau - xi*eta*gamma`` and variance ``kappa``."""
    resid = np.asarray(log_t) - (np.asarray(alpha) - np.asarray(tau)
                                 - np.asarray(xi) * np.asarray(eta) * gamma)
    return -0.5 * (LOG_2PI + np.log(kappa)) - 0.5 * resid * resid / kappa


def cheat_matrix(state: ParameterState) -> np.ndarray:
    return np.outer(state.xi, state.eta).astype(bool)


def response_logits(state: ParameterState, spec: ModelSpec) -> np.ndarray:
    logits = state.theta[:, None] - state.beta[None, :]
    if spec.response_drift:
        logits = logits + state.delta * cheat_matrix(state)
    return logits


def bernoulli_logit_loglik(y, logits):
    """Cell-wise ``log P(Y=y)`` for a logistic model."""
    return y * logits - np.logaddexp(0.0, logits)


def response_loglik_sums(y, theta, beta, cheat=None, delta=0.0, axis=None):
    """Sum of Bernoulli log masses at logits ``theta_i - beta_j + delta*cheat_ij``.

    ``axis=1`` gives per-person sums, ``axis=0`` per-item sums, ``None`` the
    total.  ``log(1 + exp(logit))`` is evaluated as ``log1p`` of an outer
    product of exponentials, which needs one transcendental call per cell.
    """
    theta = np.asarray(theta, dtype=float)
    beta = np.asarray(beta, dtype=float)
    use_drift = cheat is not None and delta != 0.0
    hi = theta.max() - beta.min() + max(delta, 0.0)
    lo = theta.min() - beta.max() + min(delta, 0.0)
    if hi > 500.0 or lo < -700.0:
        logits = theta[:, None] - beta[None, :]
        if use_drift:
            logits = logits + delta * cheat
        return bernoulli_logit_loglik(y, logits).sum(axis=axis)
    prod = np.outer(np.exp(theta), np.exp(-beta))
    if use_drift:
        np.multiply(prod, np.exp(delta), out=prod, where=cheat)
    softplus = np.log1p(prod, out=prod).sum(axis=axis)
    yf = y if y.dtype == np.float64 else y.astype(np.float64)
    if axis == 1:
        linear = theta * yf.sum(axis=1) - yf @ beta
    elif axis == 0:
        linear = yf.T @ theta - beta * yf.sum(axis=0)
    else:
        linear = theta @ yf.sum(axis=1) - beta @ yf.sum(axis=0)
    if use_drift:
        linear = linear + delta * np.sum(yf * cheat, axis=axis)
    return linear - softplus


def time_residuals(data: DataSet, state: ParameterState, spec: ModelSpec) -> np.ndarray:
    """``log T - (alpha - tau - xi*eta*gamma)``; zero where the time is masked."""
    resid = data.log_times - state.alpha[None, :] + state.tau[:, None]
    if spec.time_drift:
        resid = resid + state.gamma * cheat_matrix(state)
    return np.where(data.time_mask, resid, 0.0)


def response_log_likelihood(data: DataSet, state: ParameterState, spec: ModelSpec) -> float:
    if spec.response_drift:
        return float(response_loglik_sums(data.response_matrix, state.theta, state.beta,
                                          cheat_matrix(state), state.delta))
    return float(response_loglik_sums(data.response_matrix, state.theta, state.beta))


def time_log_likelihood(data: DataSet, state: ParameterState, spec: ModelSpec) -> float:
    if not spec.uses_times:
        return 0.0
    data.check_spec(spec)
    n_obs = int(data.time_mask.sum())
    if n_obs == 0:
        return 0.0
    resid = time_residuals(data, state, spec)
    return float(-0.5 * n_obs * (LOG_2PI + np.log(state.kappa))
                 - 0.5 * np.sum(resid * resid) / state.kappa)


def log_likelihood(data: DataSet, state: ParameterState, spec: ModelSpec) -> float:
    """Joint log likelihood of all observed cells given every parameter."""
    spec = ModelSpec.parse(spec)
    data.check_spec(spec)
    _check_dims(data, state)
    return response_log_likelihood(data, state, spec) + time_log_likelihood(data, state, spec)


def deviance(data: DataSet, state: ParameterState, spec: ModelSpec) -> float:
    return -2.0 * log_likelihood(data, state, spec)


def _check_dims(data: DataSet, state: ParameterState):
    if state.n_persons != data.n_persons or state.n_items != data.n_items:
        raise ConfigurationError(
            f"state is {state.n_persons}x{state.n_items} but data is {data.n_persons}x{data.n_items}")
