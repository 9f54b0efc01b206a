"""Bayesian detection of item preknowledge.

Joint Rasch / log-normal response-time models with latent cheater and
compromised-item classes, fitted by a random-scan Metropolis-within-Gibbs
sampler, plus compound decision rules on the posterior class probabilities.
"""

from .analysis import analyze, posterior_summary, run_chains
from .decision import (DecisionResult, bayes_decision, local_fdr, local_fnr,
                       optimal_threshold_fdr, optimal_threshold_fnr)
from .diagnostics import dic, gelman_rubin, split_rhat
from .estimator import CheatingDetector
from .fileio import IngestionError, RunConfig, load_chains, load_dataset, save_chains
from .model import ConfigurationError, DataError, DataSet, ModelSpec, ParameterState, log_likelihood
from .priors import HyperConfig
from .rand_dist import ParameterError, RngStream
from .sampler import ChainOutput, SamplerConfig, run_chain
from .simulation import SETTINGS, generate_dataset, run_study

__version__ = "0.1.0"

__all__ = [
    "CheatingDetector", "ChainOutput", "ConfigurationError", "DataError", "DataSet",
    "DecisionResult", "HyperConfig", "IngestionError", "ModelSpec", "ParameterError",
    "ParameterState", "RngStream", "RunConfig", "SETTINGS", "SamplerConfig", "analyze",
    "bayes_decision", "dic", "gelman_rubin", "generate_dataset", "load_chains", "load_dataset",
    "local_fdr", "local_fnr", "log_likelihood", "optimal_threshold_fdr", "optimal_threshold_fnr",
    "posterior_summary", "run_chain", "run_chains", "run_study", "save_chains", "split_rhat",
]
