"""Seeded random streams and the distribution families used by the models.

Every family exposes ``sample(rng, size=None)`` and ``log_density(x)``.
Log densities include their normalising constants.  Parameter checks raise
:class:`ParameterError` at construction time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import lgamma, log, pi
from typing import Union

import numpy as np

LOG_2PI = log(2.0 * pi)


class ParameterError(ValueError):
    """A distribution parameter lies outside its domain."""


@dataclass
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Streams are derived with :class:`numpy.random.SeedSequence` spawn keys, so
    children of a stream are independent of each other and of the parent.
    The underlying generator is created lazily and advances with each draw.
    """

    seed: int
    stream_id: int = 0
    parent_path: tuple = ()
    _gen: np.random.Generator | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ParameterError("seed and stream_id must be non-negative")

    @property
    def path(self) -> tuple:
        return self.parent_path + (int(self.stream_id),)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(int(self.seed), spawn_key=self.path)
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id, self.path)


def spawn_substream(rng: RngStream, stream_id: int) -> RngStream:
    """Child stream that depends only on ``rng``'s identity and ``stream_id``."""
    return rng.spawn(stream_id)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _check_positive(**kw):
    for name, value in kw.items():
        if not np.isfinite(value) or value <= 0:
            raise ParameterError(f"{name} must be positive, got {value}")


def _check_spd(name, m):
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2) or not np.allclose(m, m.T):
        raise ParameterError(f"{name} must be a symmetric 2x2 matrix")
    if not is_spd2(m):
        raise ParameterError(f"{name} must be positive definite")
    return m


def is_spd2(m) -> bool:
    """True when a symmetric 2x2 matrix is positive definite."""
    m = np.asarray(m)
    if not np.all(np.isfinite(m)):
        return False
    return bool(m[0, 0] > 0 and m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0] > 0)


@dataclass(frozen=True)
class Normal:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        _check_positive(sd=self.sd)

    def sample(self, rng, size=None):
        return as_generator(rng).normal(self.mean, self.sd, size=size)

    def log_density(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return -0.5 * LOG_2PI - log(self.sd) - 0.5 * z * z

    @property
    def moments(self):
        return self.mean, self.sd**2


@dataclass(frozen=True)
class MVNormal2:
    mean: tuple = (0.0, 0.0)
    cov: tuple = ((1.0, 0.0), (0.0, 1.0))

    def __post_init__(self):
        if np.shape(self.mean) != (2,):
            raise ParameterError("mean must be a 2-vector")
        _check_spd("cov", self.cov)

    def sample(self, rng, size=None):
        cov = np.asarray(self.cov, dtype=float)
        chol = np.linalg.cholesky(cov)
        shape = (2,) if size is None else tuple(np.atleast_1d(size)) + (2,)
        z = as_generator(rng).standard_normal(shape)
        return np.asarray(self.mean, dtype=float) + z @ chol.T

    def log_density(self, x):
        cov = np.asarray(self.cov, dtype=float)
        d = np.asarray(x, dtype=float) - np.asarray(self.mean, dtype=float)
        det = cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2
        inv = np.array([[cov[1, 1], -cov[0, 1]], [-cov[0, 1], cov[0, 0]]]) / det
        quad = np.einsum("...i,ij,...j->...", d, inv, d)
        return -LOG_2PI - 0.5 * log(det) - 0.5 * quad


@dataclass(frozen=True)
class Gamma:
    """Gamma with shape/rate parameterisation (mean ``shape / rate``)."""

    shape: float
    rate: float

    def __post_init__(self):
        _check_positive(shape=self.shape, rate=self.rate)

    def sample(self, rng, size=None):
        return as_generator(rng).gamma(self.shape, 1.0 / self.rate, size=size)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.shape * log(self.rate) - lgamma(self.shape)
                   + (self.shape - 1.0) * np.log(x) - self.rate * x)
        return np.where(x > 0, out, -np.inf)

    @property
    def moments(self):
        return self.shape / self.rate, self.shape / self.rate**2


@dataclass(frozen=True)
class InvGamma:
    """Inverse gamma, density proportional to ``x**(-shape-1) * exp(-scale/x)``."""

    shape: float
    scale: float

    def __post_init__(self):
        _check_positive(shape=self.shape, scale=self.scale)

    def sample(self, rng, size=None):
        return self.scale / as_generator(rng).gamma(self.shape, 1.0, size=size)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.shape * log(self.scale) - lgamma(self.shape)
                   - (self.shape + 1.0) * np.log(x) - self.scale / x)
        return np.where(x > 0, out, -np.inf)

    @property
    def moments(self):
        a, b = self.shape, self.scale
        mean = b / (a - 1) if a > 1 else np.inf
        var = b * b / ((a - 1) ** 2 * (a - 2)) if a > 2 else np.inf
        return mean, var


@dataclass(frozen=True)
class Beta:
    a: float
    b: float

    def __post_init__(self):
        _check_positive(a=self.a, b=self.b)

    def sample(self, rng, size=None):
        return as_generator(rng).beta(self.a, self.b, size=size)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        norm = lgamma(self.a + self.b) - lgamma(self.a) - lgamma(self.b)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = norm + (self.a - 1.0) * np.log(x) + (self.b - 1.0) * np.log1p(-x)
        return np.where((x > 0) & (x < 1), out, -np.inf)

    @property
    def moments(self):
        s = self.a + self.b
        return self.a / s, self.a * self.b / (s * s * (s + 1))


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"p must lie in [0, 1], got {self.p}")

    def sample(self, rng, size=None):
        u = as_generator(rng).random(size)
        return (u < self.p).astype(np.int8)

    def log_density(self, x):
        x = np.asarray(x)
        with np.errstate(divide="ignore"):
            lp1, lp0 = np.log(self.p), np.log1p(-self.p)
        return np.where(x == 1, lp1, np.where(x == 0, lp0, -np.inf))

    @property
    def moments(self):
        return self.p, self.p * (1 - self.p)


@dataclass(frozen=True)
class InvWishart2:
    """Inverse Wishart on 2x2 SPD matrices, density proportional to
    ``|X|**(-(df+3)/2) * exp(-tr(scale @ inv(X)) / 2)``."""

    df: float
    scale: tuple = ((1.0, 0.0), (0.0, 1.0))

    def __post_init__(self):
        if not self.df > 1:
            raise ParameterError(f"df must exceed 1, got {self.df}")
        _check_spd("scale", self.scale)

    def sample(self, rng, size=None):
        gen = as_generator(rng)
        n = 1 if size is None else int(size)
        # Bartlett decomposition of W ~ Wishart(df, inv(scale)); X = inv(W).
        prec_chol = np.linalg.cholesky(np.linalg.inv(np.asarray(self.scale, dtype=float)))
        a = np.zeros((n, 2, 2))
        a[:, 0, 0] = np.sqrt(gen.chisquare(self.df, size=n))
        a[:, 1, 1] = np.sqrt(gen.chisquare(self.df - 1.0, size=n))
        a[:, 1, 0] = gen.standard_normal(n)
        la = prec_chol @ a
        w = la @ np.swapaxes(la, 1, 2)
        x = np.linalg.inv(w)
        x = 0.5 * (x + np.swapaxes(x, 1, 2))
        return x[0] if size is None else x

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        psi = np.asarray(self.scale, dtype=float)
        nu = self.df
        det_x = x[..., 0, 0] * x[..., 1, 1] - x[..., 0, 1] * x[..., 1, 0]
        det_psi = psi[0, 0] * psi[1, 1] - psi[0, 1] ** 2
        ok = (x[..., 0, 0] > 0) & (det_x > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_x = np.stack([np.stack([x[..., 1, 1], -x[..., 0, 1]], -1),
                              np.stack([-x[..., 1, 0], x[..., 0, 0]], -1)], -2) / det_x[..., None, None]
            trace = np.einsum("ij,...ji->...", psi, inv_x)
            log_mgamma = 0.5 * log(pi) + lgamma(nu / 2.0) + lgamma(nu / 2.0 - 0.5)
            out = (0.5 * nu * log(det_psi) - nu * log(2.0) - log_mgamma
                   - 0.5 * (nu + 3.0) * np.log(det_x) - 0.5 * trace)
        return np.where(ok, out, -np.inf)


DistSpec = Union[Normal, MVNormal2, Gamma, InvGamma, Beta, Bernoulli, InvWishart2]


def sample(dist: DistSpec, rng, size=None):
    """Draw from ``dist``; advances ``rng``."""
    return dist.sample(rng, size=size)


def log_density(dist: DistSpec, x):
    return dist.log_density(x)
