"""Random-scan Metropolis-Hastings-within-Gibbs sampler.

One sweep updates every parameter block of the model exactly once, in an
order drawn uniformly at random.  Continuous person, item and drift
parameters (and the class proportions) move by Gaussian random-walk MH;
indicators, variances, means and covariance matrices are drawn exactly from
their full conditionals.

Person- and item-level blocks are vectorised: all N (or J) coordinates are
proposed and accepted independently in a single step, which is valid because
they are conditionally independent given the remaining blocks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .model import (
    ConfigurationError, DataSet, ModelSpec, ParameterState, cheat_matrix, deviance,
    response_loglik_sums, time_residuals,
)
from .priors import DEFAULT_HYPER, HyperConfig, sample_full_state
from .rand_dist import InvGamma, InvWishart2, MVNormal2, Normal, RngStream, as_generator, is_spd2

log = logging.getLogger(__name__)

M1_BLOCKS = ("theta", "xi", "beta", "eta", "delta", "pi1", "sigma11", "pi2", "mu1", "omega11")
M2_BLOCKS = ("theta", "tau", "xi", "beta", "alpha", "eta", "delta", "gamma", "kappa",
             "pi1", "Sigma", "pi2", "mu", "Omega")
MH_BLOCKS = ("theta", "tau", "beta", "alpha", "delta", "gamma", "pi1", "pi2")
PERSON_BLOCKS = ("theta", "tau")
ITEM_BLOCKS = ("beta", "alpha")

DEFAULT_STEPS = {"theta": 1.0, "tau": 0.2, "beta": 0.5, "alpha": 0.2,
                 "delta": 0.1, "gamma": 0.05, "pi1": 0.05, "pi2": 0.05}


def blocks_for(spec) -> tuple:
    """Parameter blocks updated in one sweep for ``spec``."""
    spec = ModelSpec.parse(spec)
    blocks = M2_BLOCKS if spec.uses_times else M1_BLOCKS
    if not spec.response_drift:
        blocks = tuple(b for b in blocks if b != "delta")
    if spec.uses_times and not spec.time_drift:
        blocks = tuple(b for b in blocks if b != "gamma")
    return blocks


@dataclass
class SamplerConfig:
    burn_in: int = 1000
    n_iter: int = 3000
    step_sizes: dict = field(default_factory=dict)
    adapt: bool = True
    adapt_every: int = 50
    target_accept: tuple = (0.2, 0.5)
    fixed_blocks: tuple = ()

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_iter:
            raise ConfigurationError(f"need 0 <= burn_in < n_iter, got {self.burn_in}, {self.n_iter}")
        unknown = set(self.step_sizes) - set(MH_BLOCKS)
        if unknown:
            raise ConfigurationError(f"step sizes given for unknown blocks {sorted(unknown)}")
        for k, v in self.step_sizes.items():
            if not v > 0:
                raise ConfigurationError(f"step size for {k} must be positive")
        if self.adapt_every < 1:
            raise ConfigurationError("adapt_every must be positive")
        known = set(M1_BLOCKS) | set(M2_BLOCKS)
        if set(self.fixed_blocks) - known:
            raise ConfigurationError(f"cannot fix unknown blocks {sorted(set(self.fixed_blocks) - known)}")
        self.fixed_blocks = tuple(self.fixed_blocks)

    def initial_steps(self, n_persons: int, n_items: int) -> dict:
        steps = {**DEFAULT_STEPS, **self.step_sizes}
        out = {}
        for b, s in steps.items():
            if b in PERSON_BLOCKS:
                out[b] = np.full(n_persons, float(s))
            elif b in ITEM_BLOCKS:
                out[b] = np.full(n_items, float(s))
            else:
                out[b] = np.array(float(s))
        return out


# ---------------------------------------------------------------------------
# log targets for the MH blocks


def _time_moments(block, state, data, spec):
    """Per-coordinate sums ``(n, s1, s2)`` such that the time log likelihood of
    ``tau`` (or ``alpha``) at value ``v`` is ``-(s2 + 2*v*s1 + v*v*n) / (2*kappa)``."""
    m = data.time_mask
    if block == "tau":
        a = data.log_times - state.alpha[None, :]
        axis = 1
    else:
        a = -(data.log_times + state.tau[:, None])
        axis = 0
    if spec.time_drift:
        g = state.gamma if block == "tau" else -state.gamma
        a = a + g * cheat_matrix(state)
    a = a * m
    return m.sum(axis=axis), a.sum(axis=axis), (a * a).sum(axis=axis)


def _time_loglik_from_moments(moments, value, kappa):
    n, s1, s2 = moments
    return -(s2 + 2.0 * value * s1 + value * value * n) / (2.0 * kappa)


def _block_log_lik(block, value, state, data, spec):
    """Log likelihood terms that depend on ``block`` evaluated at ``value``."""
    y = data.response_matrix
    if block in ("theta", "beta"):
        theta = value if block == "theta" else state.theta
        beta = value if block == "beta" else state.beta
        axis = 1 if block == "theta" else 0
        if spec.response_drift:
            return response_loglik_sums(y, theta, beta, cheat_matrix(state), state.delta, axis=axis)
        return response_loglik_sums(y, theta, beta, axis=axis)
    if block in ("tau", "alpha"):
        if not data.has_times:
            return np.zeros(len(value))
        return _time_loglik_from_moments(_time_moments(block, state, data, spec), value, state.kappa)
    if block == "delta":
        if value <= 0:
            return -np.inf
        rows, cols = state.xi.astype(bool), state.eta.astype(bool)
        if not (rows.any() and cols.any()):
            return 0.0
        return float(response_loglik_sums(y[np.ix_(rows, cols)], state.theta[rows],
                                          state.beta[cols] - value))
    if block == "gamma":
        if value <= 0:
            return -np.inf
        c = cheat_matrix(state) & data.time_mask if data.has_times else None
        if c is None or not c.any():
            return 0.0
        resid = (data.log_times - state.alpha[None, :] + state.tau[:, None] + value)[c]
        return float(-0.5 * np.sum(resid * resid) / state.kappa)
    if block in ("pi1", "pi2"):
        if not 0.0 < value < 1.0:
            return -np.inf
        bits = state.xi if block == "pi1" else state.eta
        k = int(np.sum(bits))
        return k * np.log(value) + (len(bits) - k) * np.log1p(-value)
    raise ConfigurationError(f"unknown MH block {block!r}")


def _bivariate_quad(x1, x2, cov):
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2
    return (cov[1, 1] * x1 * x1 - 2.0 * cov[0, 1] * x1 * x2 + cov[0, 0] * x2 * x2) / det


def _block_log_prior(block, value, state, spec, hyper):
    """Prior terms (up to constants) that depend on ``block`` evaluated at ``value``."""
    if block == "theta":
        if spec.uses_times:
            return -0.5 * _bivariate_quad(value, state.tau, state.Sigma)
        return -0.5 * value * value / state.Sigma[0, 0]
    if block == "tau":
        return -0.5 * _bivariate_quad(state.theta, value, state.Sigma)
    if block == "beta":
        if spec.uses_times:
            return -0.5 * _bivariate_quad(value - state.mu[0], state.alpha - state.mu[1], state.Omega)
        d = value - state.mu[0]
        return -0.5 * d * d / state.Omega[0, 0]
    if block == "alpha":
        return -0.5 * _bivariate_quad(state.beta - state.mu[0], value - state.mu[1], state.Omega)
    if block == "delta":
        return float(hyper.delta_prior.log_density(value))
    if block == "gamma":
        return float(hyper.gamma_prior.log_density(value))
    if block in ("pi1", "pi2"):
        return float(hyper.pi_prior.log_density(value))
    raise ConfigurationError(f"unknown MH block {block!r}")


def block_log_target(block, value, state, data, spec, hyper=None):
    """Full-conditional log density (unnormalised) of an MH block."""
    spec = ModelSpec.parse(spec)
    hyper = hyper or DEFAULT_HYPER
    ll = _block_log_lik(block, value, state, data, spec)
    if np.all(np.isneginf(ll)):
        return ll
    return ll + _block_log_prior(block, value, state, spec, hyper)


def _log_target_fn(block, state, data, spec, hyper):
    if block in ("tau", "alpha") and data.has_times:
        moments = _time_moments(block, state, data, spec)

        def target(value):
            return (_time_loglik_from_moments(moments, value, state.kappa)
                    + _block_log_prior(block, value, state, spec, hyper))
        return target
    return lambda value: block_log_target(block, value, state, data, spec, hyper)


def _get_block(state, block):
    v = getattr(state, block)
    return np.array(v, dtype=float) if np.ndim(v) else float(v)


def mh_update_continuous(block, state, data, spec, step, rng, hyper=None):
    """One Gaussian random-walk MH step for ``block``; updates ``state`` in place.

    Returns the acceptance flags (one per coordinate for person/item blocks).
    """
    if block not in MH_BLOCKS:
        raise ConfigurationError(f"unknown MH block {block!r}")
    spec = ModelSpec.parse(spec)
    gen = as_generator(rng)
    cur = _get_block(state, block)
    step = np.asarray(step, dtype=float)
    if np.any(step <= 0):
        raise ConfigurationError("step size must be positive")
    prop = cur + step * gen.standard_normal(np.shape(cur))
    if np.ndim(cur) == 0:
        prop = float(prop)
    target = _log_target_fn(block, state, data, spec, hyper or DEFAULT_HYPER)
    lt_cur = target(cur)
    lt_prop = target(prop)
    log_u = np.log(gen.random(np.shape(cur)))
    with np.errstate(invalid="ignore"):
        accept = log_u < (lt_prop - lt_cur)
    if np.ndim(cur) == 0:
        if accept:
            setattr(state, block, prop)
        return np.array(bool(accept))
    setattr(state, block, np.where(accept, prop, cur))
    return accept


# ---------------------------------------------------------------------------
# Gibbs blocks


def indicator_log_odds(which, state, data, spec):
    """Posterior log odds of each indicator being 1 given all other parameters."""
    spec = ModelSpec.parse(spec)
    if which in ("xi", "person"):
        prior = logit(state.pi1)
        other, axis, n = state.eta.astype(bool), 1, state.n_persons
    elif which in ("eta", "item"):
        prior = logit(state.pi2)
        other, axis, n = state.xi.astype(bool), 0, state.n_items
    else:
        raise ConfigurationError(f"unknown indicator block {which!r}")
    out = np.full(n, prior, dtype=float)
    if not other.any():
        return out
    sl = (slice(None), other) if axis == 1 else (other, slice(None))
    if spec.response_drift and state.delta != 0:
        # difference of the log masses with and without the drift on the relevant cells
        y = data.response_matrix[sl]
        theta = state.theta if axis == 1 else state.theta[other]
        beta = state.beta[other] if axis == 1 else state.beta
        with_drift = response_loglik_sums(y, theta, beta - state.delta, axis=axis)
        without = response_loglik_sums(y, theta, beta, axis=axis)
        out += with_drift - without
    if spec.time_drift and data.has_times and state.gamma != 0:
        e0 = (data.log_times - state.alpha[None, :] + state.tau[:, None])[sl]
        g = state.gamma
        diff = -(2.0 * e0 * g + g * g) / (2.0 * state.kappa)
        out += np.where(data.time_mask[sl], diff, 0.0).sum(axis=axis)
    return out


def indicator_conditional_probs(which, state, data, spec):
    return expit(indicator_log_odds(which, state, data, spec))


def gibbs_update_indicators(which, state, data, spec, rng):
    """Redraw every ``xi`` (``which='xi'``) or ``eta`` from its Bernoulli conditional."""
    gen = as_generator(rng)
    p = indicator_conditional_probs(which, state, data, spec)
    bits = (gen.random(len(p)) < p).astype(np.int8)
    setattr(state, "xi" if which in ("xi", "person") else "eta", bits)
    return bits


def conditional_distribution(block, state, data, spec, hyper=None):
    """Exact full conditional used by a closed-form Gibbs block."""
    spec = ModelSpec.parse(spec)
    hyper = hyper or DEFAULT_HYPER
    if block == "sigma11":
        a, b = hyper.var11_prior.shape, hyper.var11_prior.scale
        return InvGamma(a + state.n_persons / 2.0, b + np.sum(state.theta**2) / 2.0)
    if block == "omega11":
        a, b = hyper.var11_prior.shape, hyper.var11_prior.scale
        return InvGamma(a + state.n_items / 2.0, b + np.sum((state.beta - state.mu[0]) ** 2) / 2.0)
    if block == "kappa":
        if not data.has_times:
            return hyper.kappa_prior
        resid = time_residuals(data, state, spec)
        n_obs = int(data.time_mask.sum())
        return InvGamma(hyper.kappa_shape + n_obs / 2.0, hyper.kappa_scale + np.sum(resid**2) / 2.0)
    if block == "mu1":
        prec = 1.0 / hyper.mu_var + state.n_items / state.Omega[0, 0]
        mean = (hyper.mu_mean / hyper.mu_var + np.sum(state.beta) / state.Omega[0, 0]) / prec
        return Normal(mean, np.sqrt(1.0 / prec))
    if block == "mu":
        om_inv = np.linalg.inv(state.Omega)
        prec = np.eye(2) / hyper.mu_var + state.n_items * om_inv
        cov = np.linalg.inv(prec)
        total = np.array([np.sum(state.beta), np.sum(state.alpha)])
        mean = cov @ (om_inv @ total + hyper.mu_mean / hyper.mu_var)
        return MVNormal2(tuple(mean), tuple(map(tuple, 0.5 * (cov + cov.T))))
    if block == "Sigma":
        x = np.column_stack([state.theta, state.tau])
        scale = np.asarray(hyper.iw_scale) + x.T @ x
        return InvWishart2(hyper.iw_df + state.n_persons, tuple(map(tuple, scale)))
    if block == "Omega":
        x = np.column_stack([state.beta - state.mu[0], state.alpha - state.mu[1]])
        scale = np.asarray(hyper.iw_scale) + x.T @ x
        return InvWishart2(hyper.iw_df + state.n_items, tuple(map(tuple, scale)))
    raise ConfigurationError(f"no closed-form conditional for block {block!r}")


def gibbs_update_variance(which, state, data, spec, rng, hyper=None):
    """Exact inverse-gamma draw for ``sigma11``, ``omega11`` or ``kappa``."""
    if which not in ("sigma11", "omega11", "kappa"):
        raise ConfigurationError(f"unknown variance block {which!r}")
    value = float(conditional_distribution(which, state, data, spec, hyper).sample(rng))
    if which == "sigma11":
        state.Sigma[0, 0] = value
    elif which == "omega11":
        state.Omega[0, 0] = value
    else:
        state.kappa = value
    return value


def gibbs_update_mean(which, state, data, spec, rng, hyper=None):
    """Exact normal draw of the item mean (``mu1`` under M1, ``mu`` under M2)."""
    if which not in ("mu1", "mu"):
        raise ConfigurationError(f"unknown mean block {which!r}")
    value = conditional_distribution(which, state, data, spec, hyper).sample(rng)
    if which == "mu1":
        state.mu[0] = float(value)
    else:
        state.mu = np.asarray(value, dtype=float)
    return value


def gibbs_update_cov(which, state, data, spec, rng, hyper=None):
    """Exact inverse-Wishart draw of ``Sigma`` or ``Omega``."""
    if which not in ("Sigma", "Omega"):
        raise ConfigurationError(f"unknown covariance block {which!r}")
    value = conditional_distribution(which, state, data, spec, hyper).sample(rng)
    setattr(state, which, value)
    return value


def update_block(block, state, data, spec, steps, rng, hyper=None):
    """Dispatch one block update.  Returns MH acceptance flags or ``None``."""
    if block in MH_BLOCKS:
        return mh_update_continuous(block, state, data, spec, steps[block], rng, hyper)
    if block in ("xi", "eta"):
        gibbs_update_indicators(block, state, data, spec, rng)
    elif block in ("sigma11", "omega11", "kappa"):
        gibbs_update_variance(block, state, data, spec, rng, hyper)
    elif block in ("mu1", "mu"):
        gibbs_update_mean(block, state, data, spec, rng, hyper)
    elif block in ("Sigma", "Omega"):
        gibbs_update_cov(block, state, data, spec, rng, hyper)
    else:
        raise ConfigurationError(f"unknown block {block!r}")
    return None


def random_scan_sweep(state, data, spec, steps, rng, hyper=None, order_log=None, blocks=None):
    """Update each block once in a fresh uniformly random order.

    ``blocks`` restricts the sweep (default: every block of ``spec``).
    Returns ``(state, accepts)`` where ``accepts`` maps MH blocks to their flags.
    """
    spec = ModelSpec.parse(spec)
    gen = as_generator(rng)
    if blocks is None:
        blocks = blocks_for(spec)
    order = [blocks[k] for k in gen.permutation(len(blocks))]
    if order_log is not None:
        order_log.append(order)
    accepts = {}
    for b in order:
        flags = update_block(b, state, data, spec, steps, gen, hyper)
        if flags is not None:
            accepts[b] = flags
    return state, accepts


# ---------------------------------------------------------------------------
# chains

GLOBAL_SCALARS = ("delta", "gamma", "kappa", "pi1", "pi2")


@dataclass
class ChainOutput:
    """Post-burn-in draws of one chain, plus its full deviance trace."""

    spec: ModelSpec
    theta: np.ndarray
    xi: np.ndarray
    tau: np.ndarray
    beta: np.ndarray
    eta: np.ndarray
    alpha: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    kappa: np.ndarray
    pi1: np.ndarray
    pi2: np.ndarray
    mu: np.ndarray
    Sigma: np.ndarray
    Omega: np.ndarray
    deviance: np.ndarray
    burn_in: int
    acceptance: dict = field(default_factory=dict)
    step_sizes: dict = field(default_factory=dict)
    seed: int = 0
    stream_path: tuple = ()

    ARRAY_FIELDS = ("theta", "xi", "tau", "beta", "eta", "alpha", "delta", "gamma", "kappa",
                    "pi1", "pi2", "mu", "Sigma", "Omega")

    @property
    def n_draws(self) -> int:
        return len(self.delta)

    @property
    def post_deviance(self) -> np.ndarray:
        return self.deviance[self.burn_in:]

    def state_at(self, k: int) -> ParameterState:
        kw = {f: np.array(getattr(self, f)[k], copy=True) for f in self.ARRAY_FIELDS}
        for f in GLOBAL_SCALARS:
            kw[f] = float(kw[f])
        return ParameterState(**kw)

    def plugin_state(self) -> ParameterState:
        """Posterior means of continuous parameters; indicators by majority vote."""
        return plugin_state([self])

    def global_draws(self) -> dict:
        """Draws of the named global parameters of this chain's model."""
        out = {}
        names = ParameterState.zeros(1, 1).globals_dict(self.spec).keys()
        lookup = {
            "sigma11": self.Sigma[:, 0, 0], "sigma22": self.Sigma[:, 1, 1],
            "sigma12": self.Sigma[:, 0, 1], "omega11": self.Omega[:, 0, 0],
            "omega22": self.Omega[:, 1, 1], "omega12": self.Omega[:, 0, 1],
            "mu1": self.mu[:, 0], "mu2": self.mu[:, 1],
            "delta": self.delta, "gamma": self.gamma, "kappa": self.kappa,
            "pi1": self.pi1, "pi2": self.pi2,
        }
        for name in names:
            out[name] = np.asarray(lookup[name], dtype=float)
        return out


def _pooled(chains, name):
    return np.concatenate([getattr(c, name) for c in chains], axis=0)


def plugin_state(chains) -> ParameterState:
    chains = list(chains)
    if not chains or sum(c.n_draws for c in chains) == 0:
        raise ValueError("no posterior draws supplied")
    kw = {}
    for f in ChainOutput.ARRAY_FIELDS:
        pooled = _pooled(chains, f)
        if f in ("xi", "eta"):
            kw[f] = (pooled.mean(axis=0) > 0.5).astype(np.int8)
        else:
            kw[f] = pooled.mean(axis=0)
    for f in GLOBAL_SCALARS:
        kw[f] = float(kw[f])
    return ParameterState(**kw)


def _adapt_steps(steps, counts, window, lo, hi):
    mid = 0.5 * (lo + hi)
    for b, c in counts.items():
        rate = c / window
        factor = np.clip(np.exp(2.0 * (rate - mid)), 0.5, 2.0)
        factor = np.where((rate < lo) | (rate > hi), factor, 1.0)
        steps[b] = steps[b] * factor


def check_state(state: ParameterState, spec) -> None:
    """Raise if ``state`` lies outside the model's parameter support."""
    spec = ModelSpec.parse(spec)
    problems = []
    if not 0 < state.pi1 < 1 or not 0 < state.pi2 < 1:
        problems.append("class proportions must lie in (0, 1)")
    if spec.response_drift and not state.delta > 0:
        problems.append("delta must be positive")
    if spec.uses_times:
        if spec.time_drift and not state.gamma > 0:
            problems.append("gamma must be positive")
        if not state.kappa > 0:
            problems.append("kappa must be positive")
        if not (is_spd2(state.Sigma) and is_spd2(state.Omega)):
            problems.append("Sigma and Omega must be positive definite")
    elif not (state.Sigma[0, 0] > 0 and state.Omega[0, 0] > 0):
        problems.append("sigma11 and omega11 must be positive")
    if problems:
        raise ConfigurationError("initial state outside support: " + "; ".join(problems))


def _two_group_split(x: np.ndarray) -> np.ndarray:
    """Boolean mask of the upper group of the split maximising between-group variance."""
    order = np.argsort(x)
    xs = x[order]
    n = len(xs)
    k = np.arange(1, n)
    c = np.cumsum(xs)[:-1]
    m0 = c / k
    m1 = (xs.sum() - c) / (n - k)
    score = k * (n - k) * (m1 - m0) ** 2
    cut = int(np.argmax(score)) + 1
    upper = np.zeros(n, dtype=bool)
    upper[order[cut:]] = True
    return upper


def _fit_time_drift(lt, m, xi, eta, alpha, tau, n_sweeps=15):
    """Alternating least squares for ``log t = alpha - tau - gamma * xi * eta``."""
    c = np.outer(xi, eta).astype(float) * m
    alpha, tau, gamma = alpha.copy(), tau.copy(), 1.0
    n_row = np.maximum(m.sum(axis=1), 1)
    n_col = np.maximum(m.sum(axis=0), 1)
    for _ in range(n_sweeps):
        if c.sum() > 0:
            gamma = max(float((np.where(m, alpha[None, :] - tau[:, None] - lt, 0.0) * c).sum() / c.sum()), 0.05)
        alpha = (np.where(m, lt + tau[:, None] + gamma * c, 0.0)).sum(axis=0) / n_col
        tau = (np.where(m, alpha[None, :] - gamma * c - lt, 0.0)).sum(axis=1) / n_row
        shift = tau.mean()
        tau, alpha = tau - shift, alpha - shift
    return gamma, alpha, tau


def _spectral_indicators(data: DataSet, alpha, tau):
    """Starting indicators from the leading singular pair of the log-time residuals.

    Cheating adds a rank-one block to the residuals of the additive time
    model.  Splitting the leading singular vectors gives the two labellings
    ``(xi, eta)`` and ``(1 - xi, 1 - eta)``, which fit the data equally well;
    the one whose speed and intensity parameters are least dispersed is kept.
    Returns ``None`` when the split is degenerate.
    """
    m, lt = data.time_mask, data.log_times
    if data.n_persons < 3 or data.n_items < 3 or m.mean() < 0.5:
        return None
    e = np.where(m, alpha[None, :] - tau[:, None] - lt, 0.0)
    e = e - e.mean(axis=0) - e.mean(axis=1)[:, None] + e.mean()
    u_mat, _, vt = np.linalg.svd(e, full_matrices=False)
    a, b = _two_group_split(u_mat[:, 0]), _two_group_split(vt[0])
    if u_mat[:, 0][a].mean() * vt[0][b].mean() < 0:
        b = ~b
    best = None
    for xi, eta in ((a, b), (~a, ~b)):
        if xi.all() or eta.all():
            continue
        gamma, al, ta = _fit_time_drift(lt, m, xi, eta, alpha, tau)
        score = data.n_persons * np.log(ta.var() + 1e-12) + data.n_items * np.log(al.var() + 1e-12)
        if best is None or score < best[0]:
            best = (score, xi.astype(np.int8), eta.astype(np.int8), gamma, al, ta)
    return None if best is None else best[1:]


def data_driven_init(data: DataSet, spec) -> ParameterState:
    """Moment-based starting state.

    Abilities and difficulties come from smoothed logits of person and item
    proportions correct, speed and time intensity from row/column means of the
    log times.  Without times every indicator starts at 0; with times the
    indicators, time drift and time parameters come from a spectral split of
    the log-time residuals.  The response drift starts at 1.
    """
    spec = ModelSpec.parse(spec)
    y = data.responses
    n, j = y.shape
    st = ParameterState.zeros(n, j)
    p_person = (y.sum(axis=1) + 0.5) / (j + 1.0)
    p_item = (y.sum(axis=0) + 0.5) / (n + 1.0)
    st.theta = logit(p_person)
    st.beta = -logit(p_item)
    st.pi1 = st.pi2 = 0.1
    st.delta = st.gamma = 1.0
    st.mu[0] = st.beta.mean()
    st.Sigma = np.diag([max(st.theta.var(), 0.05), 1.0])
    st.Omega = np.diag([max(st.beta.var(), 0.05), 1.0])
    if spec.uses_times:
        m = data.time_mask
        lt = data.log_times
        grand = lt[m].mean() if m.any() else 0.0
        row = np.where(m.any(axis=1), (lt * m).sum(axis=1) / np.maximum(m.sum(axis=1), 1), grand)
        col = np.where(m.any(axis=0), (lt * m).sum(axis=0) / np.maximum(m.sum(axis=0), 1), grand)
        st.tau = grand - row
        st.alpha = col
        st.mu[1] = st.alpha.mean()
        resid = np.where(m, lt - st.alpha[None, :] + st.tau[:, None], 0.0)
        st.kappa = float(max((resid**2).sum() / max(m.sum(), 1), 0.05))
        start = _spectral_indicators(data, st.alpha, st.tau)
        if start is not None:
            st.xi, st.eta, st.gamma, st.alpha, st.tau = start
            st.pi1 = float(np.clip(st.xi.mean(), 0.02, 0.98))
            st.pi2 = float(np.clip(st.eta.mean(), 0.02, 0.98))
            st.mu[1] = st.alpha.mean()
            fit = st.alpha[None, :] - st.tau[:, None] - st.gamma * np.outer(st.xi, st.eta)
            resid = np.where(m, lt - fit, 0.0)
            st.kappa = float(max((resid**2).sum() / max(m.sum(), 1), 0.05))
        for name, a, b in (("Sigma", st.theta, st.tau), ("Omega", st.beta, st.alpha)):
            cov = np.cov(np.vstack([a, b])) if len(a) > 2 else np.eye(2)
            cov = cov + 0.05 * np.eye(2)
            setattr(st, name, cov if is_spd2(cov) else np.eye(2))
    return st


def run_chain(data: DataSet, spec, config: SamplerConfig | None = None, init: ParameterState | None = None,
              rng=None, hyper: HyperConfig | None = None) -> ChainOutput:
    """Run ``config.n_iter`` sweeps and keep the draws after ``config.burn_in``.

    Without ``init`` the starting state is a draw from the prior.  Step sizes
    adapt during burn-in only and are frozen afterwards.
    """
    spec = ModelSpec.parse(spec)
    config = config or SamplerConfig()
    hyper = hyper or DEFAULT_HYPER
    data.check_spec(spec)
    if rng is None:
        rng = RngStream(0)
    gen = as_generator(rng)
    n, j = data.n_persons, data.n_items
    if init is None:
        state = sample_full_state(hyper, n, j, spec, gen)
    else:
        state = init.copy()
        if state.n_persons != n or state.n_items != j:
            raise ConfigurationError("initial state dimensions do not match the data")
        check_state(state, spec)

    m1, m2 = config.burn_in, config.n_iter
    keep = m2 - m1
    out = {
        "theta": np.empty((keep, n)), "xi": np.empty((keep, n), dtype=np.int8),
        "tau": np.empty((keep, n)), "beta": np.empty((keep, j)),
        "eta": np.empty((keep, j), dtype=np.int8), "alpha": np.empty((keep, j)),
        "mu": np.empty((keep, 2)), "Sigma": np.empty((keep, 2, 2)), "Omega": np.empty((keep, 2, 2)),
    }
    for f in GLOBAL_SCALARS:
        out[f] = np.empty(keep)
    dev = np.empty(m2)

    steps = config.initial_steps(n, j)
    blocks = tuple(b for b in blocks_for(spec) if b not in config.fixed_blocks)
    mh_blocks = [b for b in blocks if b in MH_BLOCKS]
    window = {b: np.zeros_like(steps[b]) for b in mh_blocks}
    post_acc = {b: np.zeros_like(steps[b]) for b in mh_blocks}
    since_adapt = 0
    lo, hi = config.target_accept

    for t in range(m2):
        state, accepts = random_scan_sweep(state, data, spec, steps, gen, hyper, blocks=blocks)
        if t < m1:
            for b, flags in accepts.items():
                window[b] += flags
            since_adapt += 1
            if config.adapt and since_adapt == config.adapt_every:
                _adapt_steps(steps, window, since_adapt, lo, hi)
                window = {b: np.zeros_like(steps[b]) for b in mh_blocks}
                since_adapt = 0
        else:
            for b, flags in accepts.items():
                post_acc[b] += flags
            k = t - m1
            for f in out:
                out[f][k] = getattr(state, f)
        dev[t] = deviance(data, state, spec)

    acceptance = {b: float(np.mean(v) / keep) for b, v in post_acc.items()}
    stream_path = rng.path if isinstance(rng, RngStream) else ()
    seed = rng.seed if isinstance(rng, RngStream) else 0
    return ChainOutput(spec=spec, deviance=dev, burn_in=m1, acceptance=acceptance,
                       step_sizes={b: np.array(s, copy=True) for b, s in steps.items()},
                       seed=seed, stream_path=stream_path, **out)
