"""Prior and hyper-prior stack for M2 and the priors it induces on M1."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .model import ModelSpec, ParameterState
from .rand_dist import (
    Bernoulli, Beta, Gamma, InvGamma, InvWishart2, MVNormal2, Normal,
    ParameterError, as_generator, is_spd2,
)


@dataclass(frozen=True)
class HyperConfig:
    """Hyper-prior constants.  Defaults are the published ones."""

    delta_shape: float = 2.0
    delta_rate: float = 0.5
    gamma_shape: float = 2.0
    gamma_rate: float = 0.5
    kappa_shape: float = 1.0
    kappa_scale: float = 1.0
    pi_a: float = 2.0
    pi_b: float = 2.0
    mu_mean: float = 0.0
    mu_var: float = 25.0
    iw_df: float = 3.0
    iw_scale: tuple = field(default=((2.0, 0.0), (0.0, 2.0)))

    def __post_init__(self):
        for name in ("delta_shape", "delta_rate", "gamma_shape", "gamma_rate", "kappa_shape",
                     "kappa_scale", "pi_a", "pi_b", "mu_var"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        object.__setattr__(self, "iw_scale", tuple(map(tuple, np.asarray(self.iw_scale, dtype=float))))
        # constructing the distribution validates df and the scale matrix
        InvWishart2(self.iw_df, self.iw_scale)

    @classmethod
    def from_dict(cls, d: dict | None) -> "HyperConfig":
        return cls(**(d or {}))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["iw_scale"] = [list(r) for r in self.iw_scale]
        return out

    @property
    def delta_prior(self) -> Gamma:
        return Gamma(self.delta_shape, self.delta_rate)

    @property
    def gamma_prior(self) -> Gamma:
        return Gamma(self.gamma_shape, self.gamma_rate)

    @property
    def kappa_prior(self) -> InvGamma:
        return InvGamma(self.kappa_shape, self.kappa_scale)

    @property
    def pi_prior(self) -> Beta:
        return Beta(self.pi_a, self.pi_b)

    @property
    def mu_prior(self) -> Normal:
        return Normal(self.mu_mean, np.sqrt(self.mu_var))

    @property
    def cov_prior(self) -> InvWishart2:
        return InvWishart2(self.iw_df, self.iw_scale)

    @property
    def var11_prior(self) -> InvGamma:
        """Marginal of a diagonal entry of the inverse-Wishart prior."""
        return InvGamma((self.iw_df - 1.0) / 2.0, self.iw_scale[0][0] / 2.0)


DEFAULT_HYPER = HyperConfig()


def sample_full_state(hyper: HyperConfig, n_persons: int, n_items: int, spec, rng) -> ParameterState:
    """Draw hyper-parameters from their priors, then persons and items given them."""
    spec = ModelSpec.parse(spec)
    if n_persons < 1 or n_items < 1:
        raise ValueError("n_persons and n_items must be at least 1")
    gen = as_generator(rng)
    st = ParameterState.zeros(n_persons, n_items)
    st.delta = float(hyper.delta_prior.sample(gen))
    st.pi1 = float(hyper.pi_prior.sample(gen))
    st.pi2 = float(hyper.pi_prior.sample(gen))
    if spec.uses_times:
        st.gamma = float(hyper.gamma_prior.sample(gen))
        st.kappa = float(hyper.kappa_prior.sample(gen))
        st.mu = hyper.mu_prior.sample(gen, size=2)
        st.Sigma = hyper.cov_prior.sample(gen)
        st.Omega = hyper.cov_prior.sample(gen)
        person = MVNormal2((0.0, 0.0), st.Sigma).sample(gen, size=n_persons)
        item = MVNormal2(tuple(st.mu), st.Omega).sample(gen, size=n_items)
        st.theta, st.tau = person[:, 0].copy(), person[:, 1].copy()
        st.beta, st.alpha = item[:, 0].copy(), item[:, 1].copy()
    else:
        s11 = float(hyper.var11_prior.sample(gen))
        w11 = float(hyper.var11_prior.sample(gen))
        st.mu[0] = float(hyper.mu_prior.sample(gen))
        st.Sigma = np.diag([s11, 1.0])
        st.Omega = np.diag([w11, 1.0])
        st.theta = gen.normal(0.0, np.sqrt(s11), n_persons)
        st.beta = gen.normal(st.mu[0], np.sqrt(w11), n_items)
    st.xi = Bernoulli(st.pi1).sample(gen, size=n_persons)
    st.eta = Bernoulli(st.pi2).sample(gen, size=n_items)
    return st


def log_prior(state: ParameterState, spec, hyper: HyperConfig | None = None) -> float:
    """Joint log prior density; ``-inf`` outside the support."""
    spec = ModelSpec.parse(spec)
    hyper = hyper or DEFAULT_HYPER
    if not (0.0 < state.pi1 < 1.0 and 0.0 < state.pi2 < 1.0):
        return -np.inf
    if spec.response_drift and not state.delta > 0:
        return -np.inf
    lp = float(hyper.pi_prior.log_density(state.pi1) + hyper.pi_prior.log_density(state.pi2))
    lp += float(np.sum(Bernoulli(state.pi1).log_density(state.xi)))
    lp += float(np.sum(Bernoulli(state.pi2).log_density(state.eta)))
    if spec.response_drift:
        lp += float(hyper.delta_prior.log_density(state.delta))
    if spec.uses_times:
        if spec.time_drift and not state.gamma > 0:
            return -np.inf
        if not (state.kappa > 0 and is_spd2(state.Sigma) and is_spd2(state.Omega)):
            return -np.inf
        if spec.time_drift:
            lp += float(hyper.gamma_prior.log_density(state.gamma))
        lp += float(hyper.kappa_prior.log_density(state.kappa))
        lp += float(np.sum(hyper.mu_prior.log_density(state.mu)))
        lp += float(hyper.cov_prior.log_density(state.Sigma) + hyper.cov_prior.log_density(state.Omega))
        person = np.column_stack([state.theta, state.tau])
        item = np.column_stack([state.beta, state.alpha])
        lp += float(np.sum(MVNormal2((0.0, 0.0), state.Sigma).log_density(person)))
        lp += float(np.sum(MVNormal2(tuple(state.mu), state.Omega).log_density(item)))
    else:
        s11, w11 = state.Sigma[0, 0], state.Omega[0, 0]
        if not (s11 > 0 and w11 > 0):
            return -np.inf
        lp += float(hyper.mu_prior.log_density(state.mu[0]))
        lp += float(hyper.var11_prior.log_density(s11) + hyper.var11_prior.log_density(w11))
        lp += float(np.sum(Normal(0.0, np.sqrt(s11)).log_density(state.theta)))
        lp += float(np.sum(Normal(state.mu[0], np.sqrt(w11)).log_density(state.beta)))
    return lp
