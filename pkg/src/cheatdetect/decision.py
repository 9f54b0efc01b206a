"""Decision rules on posterior indicator probabilities.

Compound rules flag unit ``i`` when ``p_i > zeta`` (strict).  The individual
Bayes rule flags when ``p_i >= cost`` (non-strict).  Both local FDR and local
FNR are step functions of ``zeta`` that only jump at the distinct values of
``p``, so thresholds are searched over that finite grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DecisionResult:
    flags: np.ndarray
    threshold: float
    fdr: float
    fnr: float
    counts: tuple | None = None

    @property
    def n_flagged(self) -> int:
        return int(self.flags.sum())

    def to_dict(self) -> dict:
        return {"threshold": float(self.threshold), "n_flagged": self.n_flagged,
                "fdr": float(self.fdr), "fnr": float(self.fnr),
                "flagged": np.flatnonzero(self.flags).tolist(),
                "counts": None if self.counts is None else list(self.counts)}


def _probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float).ravel()
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("posterior probabilities must lie in [0, 1]")
    return p


def indicator_posterior_means(chains, which: str = "person") -> np.ndarray:
    """Fraction of pooled draws in which each indicator equals 1."""
    from .sampler import ChainOutput

    if isinstance(chains, ChainOutput):
        chains = [chains]
    name = {"person": "xi", "xi": "xi", "item": "eta", "eta": "eta"}[which]
    arrays = [np.asarray(getattr(c, name)) for c in chains]
    if not arrays or sum(len(a) for a in arrays) == 0:
        raise ValueError("no posterior draws supplied")
    return np.concatenate(arrays, axis=0).mean(axis=0)


def bayes_decision(probs, cost: float) -> np.ndarray:
    """Flags minimising the Bayes risk when a false positive costs ``cost``."""
    if not 0.0 < cost < 1.0:
        raise ValueError(f"cost must lie in (0, 1), got {cost}")
    return (_probs(probs) >= cost).astype(np.int8)


def threshold_flags(probs, zeta: float) -> np.ndarray:
    return (_probs(probs) > zeta).astype(np.int8)


def local_fdr(probs, zeta: float) -> float:
    """Posterior expected proportion of non-cheaters among the flagged."""
    p = _probs(probs)
    d = p > zeta
    return float(np.sum(1.0 - p[d]) / max(int(d.sum()), 1))


def local_fnr(probs, zeta: float) -> float:
    """Posterior expected proportion of cheaters among the unflagged."""
    p = _probs(probs)
    keep = ~(p > zeta)
    return float(np.sum(p[keep]) / max(int(keep.sum()), 1))


def candidate_thresholds(probs, include_one: bool = False) -> np.ndarray:
    grid = np.unique(np.concatenate([[0.0], _probs(probs)]))
    if include_one and grid[-1] < 1.0:
        grid = np.append(grid, 1.0)
    return grid


def _result(p, zeta, truth=None) -> DecisionResult:
    flags = threshold_flags(p, zeta)
    counts = outcome_counts(flags, truth) if truth is not None else None
    return DecisionResult(flags, float(zeta), local_fdr(p, zeta), local_fnr(p, zeta), counts)


def optimal_threshold_fdr(probs, rho: float, truth=None) -> DecisionResult:
    """Smallest threshold whose local FDR is at most ``rho``.

    This minimises local FNR among threshold rules subject to the FDR bound.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    p = _probs(probs)
    for zeta in candidate_thresholds(p):
        if local_fdr(p, zeta) <= rho:
            return _result(p, zeta, truth)
    # unreachable: the largest candidate flags nothing and has zero FDR
    raise AssertionError("no feasible threshold")


def optimal_threshold_fnr(probs, rho: float, truth=None) -> DecisionResult:
    """Largest threshold whose local FNR is at most ``rho``.

    Local FNR is nondecreasing in the threshold, so this flags the fewest
    units and hence has the smallest local FDR among feasible threshold rules.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    p = _probs(probs)
    for zeta in candidate_thresholds(p, include_one=True)[::-1]:
        if local_fnr(p, zeta) <= rho:
            return _result(p, zeta, truth)
    return _result(p, 0.0, truth)


def outcome_counts(flags, truth) -> tuple:
    """``(N00, N01, N10, N11)``: first index is the truth, second the flag."""
    f = np.asarray(flags).astype(bool).ravel()
    t = np.asarray(truth).astype(bool).ravel()
    if f.shape != t.shape:
        raise ValueError(f"flags ({f.size}) and truth ({t.size}) differ in length")
    return (int(np.sum(~t & ~f)), int(np.sum(~t & f)), int(np.sum(t & ~f)), int(np.sum(t & f)))


def false_discovery_proportion(flags, truth) -> float:
    n00, n01, n10, n11 = outcome_counts(flags, truth)
    return n01 / max(n01 + n11, 1)


def false_nondiscovery_proportion(flags, truth) -> float:
    n00, n01, n10, n11 = outcome_counts(flags, truth)
    return n10 / max(n00 + n10, 1)


def error_curve(probs) -> list:
    """Local FDR and FNR at every distinct threshold, ordered by detections."""
    p = _probs(probs)
    rows = []
    for zeta in candidate_thresholds(p, include_one=True):
        rows.append({"threshold": float(zeta), "n_detections": int(np.sum(p > zeta)),
                     "fdr": local_fdr(p, zeta), "fnr": local_fnr(p, zeta)})
    return sorted(rows, key=lambda r: r["n_detections"])
