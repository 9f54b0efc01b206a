"""Convergence diagnostics and deviance information criterion."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import ModelSpec, deviance
from .sampler import ChainOutput, plugin_state


@dataclass
class ConvergenceReport:
    r_hat: float
    n_chains: int
    n_draws_per_chain: int
    converged: bool
    threshold: float = 1.1

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DicReport:
    dic: float
    dbar: float
    dhat: float
    p_d: float

    def to_dict(self) -> dict:
        return asdict(self)


def gelman_rubin(chains, threshold: float = 1.1) -> ConvergenceReport:
    """Potential scale reduction factor of two or more equal-length sequences.

    Uses ``sqrt(((n-1)/n * W + B/n) / W)`` with ``B`` the between-chain and
    ``W`` the mean within-chain variance.  Returns ``inf`` when every chain is
    constant but their levels differ.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError("need at least two chains of length at least two")
    m, n = x.shape
    means = x.mean(axis=1)
    w = x.var(axis=1, ddof=1).mean()
    b = n * means.var(ddof=1)
    if w == 0:
        r_hat = np.inf if b > 0 else 1.0
    else:
        r_hat = float(np.sqrt(((n - 1) / n * w + b / n) / w))
    return ConvergenceReport(r_hat=r_hat, n_chains=m, n_draws_per_chain=n,
                             converged=bool(r_hat < threshold), threshold=threshold)


def split_rhat(trace, n_splits: int = 2, threshold: float = 1.1) -> ConvergenceReport:
    """Gelman-Rubin on consecutive segments of a single trace."""
    trace = np.asarray(trace, dtype=float)
    n = len(trace) // n_splits
    if n < 2:
        raise ValueError("trace too short to split")
    return gelman_rubin(trace[: n * n_splits].reshape(n_splits, n), threshold)


def _as_chains(draws) -> list:
    if isinstance(draws, ChainOutput):
        return [draws]
    return list(draws)


def dic(data, spec, draws) -> DicReport:
    """DIC of pooled post-burn-in draws with the deviance conditional on all parameters.

    ``dhat`` is evaluated at posterior means of continuous parameters with each
    indicator set to 1 when its posterior mean exceeds 0.5.
    """
    spec = ModelSpec.parse(spec)
    chains = _as_chains(draws)
    if not chains or sum(c.n_draws for c in chains) == 0:
        raise ValueError("dic needs at least one posterior draw")
    devs = np.concatenate([c.post_deviance for c in chains])
    dbar = float(devs.mean())
    dhat = float(deviance(data, plugin_state(chains), spec))
    p_d = dbar - dhat
    return DicReport(dic=dbar + p_d, dbar=dbar, dhat=dhat, p_d=p_d)
