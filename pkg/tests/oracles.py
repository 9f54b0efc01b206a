"""Brute-force numerical oracles, independent of the sampler's closed forms."""

import numpy as np
from scipy.special import expit, log_expit


def rasch_posterior_means(y, sigma11, omega11, mu1, n_theta=241, n_beta=61, half_width=6.0):
    """Posterior means of all abilities and difficulties of a small Rasch model.

    Abilities ``~ N(0, sigma11)`` and difficulties ``~ N(mu1, omega11)`` with
    every hyper-parameter fixed.  Difficulties are integrated on a full
    ``n_beta ** J`` grid; each ability is integrated out on its own 1-D grid,
    which is exact because abilities are independent given the difficulties.
    """
    y = np.asarray(y)
    n, j = y.shape
    if j > 5:
        raise ValueError("grid over difficulties is only feasible for a handful of items")
    th = np.linspace(-half_width, half_width, n_theta) * np.sqrt(sigma11)
    bg = mu1 + np.linspace(-half_width, half_width, n_beta) * np.sqrt(omega11)
    w_th = np.exp(-0.5 * th**2 / sigma11)
    p1 = expit(th[:, None] - bg[None, :])  # (theta, beta)
    letters = "abcde"[:j]
    expr = "t," + ",".join("t" + c for c in letters) + "->" + letters
    log_post = np.zeros((n_beta,) * j)
    for k in range(j):
        shape = [1] * j
        shape[k] = n_beta
        log_post = log_post - 0.5 * ((bg - mu1) ** 2 / omega11).reshape(shape)
    cond_theta = []
    for i in range(n):
        factors = [p1 if y[i, k] else 1.0 - p1 for k in range(j)]
        mass = np.einsum(expr, w_th, *factors, optimize=True)
        first = np.einsum(expr, w_th * th, *factors, optimize=True)
        cond_theta.append(first / mass)
        log_post = log_post + np.log(mass)
    post = np.exp(log_post - log_post.max())
    post /= post.sum()
    theta_mean = np.array([np.sum(post * c) for c in cond_theta])
    beta_mean = []
    for k in range(j):
        shape = [1] * j
        shape[k] = n_beta
        beta_mean.append(np.sum(post * bg.reshape(shape)))
    return theta_mean, np.array(beta_mean)


def grid_tv(log_unnorm, density, grid_cell):
    """Total variation between a normalised grid posterior and a density on the same grid."""
    p = np.exp(log_unnorm - np.max(log_unnorm))
    p /= p.sum()
    q = density * grid_cell
    q = q / q.sum() if abs(q.sum() - 1) < 0.05 else q
    return 0.5 * np.sum(np.abs(p - q))


def single_theta_posterior(y, beta, sigma11, grid):
    """Grid posterior of one ability with one Bernoulli observation."""
    lp = -0.5 * grid**2 / sigma11 + (log_expit(grid - beta) if y else log_expit(beta - grid))
    p = np.exp(lp - lp.max())
    return p / p.sum()


def bernoulli_mass(y, logit):
    p = expit(logit)
    return np.where(y == 1, p, 1 - p)
