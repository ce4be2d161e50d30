"""Closed-form score oracles for Gaussian-mixture data.

A mixture with known parameters plays the role of the trained network: the
forward-process marginal started from sum_k w_k N(m_k, diag(V_k)) is again a
mixture, so the score, the noise prediction and the data prediction are all
exact.  Noise/data-prediction calls are tallied so samplers can report NFE;
one call counts once whatever the batch width.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .schedules import ScheduleBase


@dataclass(frozen=True)
class DataDistribution:
    """Axis-aligned Gaussian mixture: weights (K,), means (K, d), variances (K, d)."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        m = np.atleast_2d(np.asarray(self.means, dtype=float))
        v = np.atleast_2d(np.asarray(self.variances, dtype=float))
        if w.ndim != 1 or w.size == 0:
            raise ConfigError("weights must be a non-empty 1-D sequence")
        if np.any(w <= 0):
            raise ConfigError("mixture weights must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ConfigError(f"mixture weights must sum to 1, got {w.sum()!r}")
        if m.shape[0] != w.size or v.shape != m.shape:
            raise ConfigError("weights, means and variances have inconsistent shapes")
        if np.any(v <= 0):
            raise ConfigError("component variances must be positive")
        object.__setattr__(self, "weights", w / w.sum())
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @classmethod
    def from_components(cls, components) -> "DataDistribution":
        """Build from [{"weight": w, "mean": [...], "var": [...]}, ...]."""
        if not components:
            raise ConfigError("at least one mixture component is required")
        w = [c["weight"] for c in components]
        m = [np.atleast_1d(c["mean"]) for c in components]
        v = [np.broadcast_to(np.atleast_1d(c["var"]), np.atleast_1d(c["mean"]).shape) for c in components]
        return cls(np.array(w, float), np.array(m, float), np.array(v, float))

    @classmethod
    def standard_normal(cls, d: int) -> "DataDistribution":
        return cls(np.array([1.0]), np.zeros((1, d)), np.ones((1, d)))


class ScoreModel:
    """Exact score / noise-prediction / data-prediction oracle on a schedule."""

    def __init__(self, data: DataDistribution, sched: ScheduleBase):
        self.data = data
        self.sched = sched
        self.nfe = 0

    @property
    def dim(self) -> int:
        return self.data.dim

    def reset_nfe(self) -> None:
        self.nfe = 0

    # -- exact quantities (not NFE-counted) ---------------------------------

    def _marginal(self, t):
        a, _, sbar = self.sched.alpha_sigma(t)
        mu = a * self.data.means                        # (K, d)
        cov = a * a * self.data.variances + sbar * sbar  # (K, d)
        return a, mu, cov

    def log_density(self, x, t):
        """log p_t(x); x has shape (..., d), result shape (...)."""
        _, mu, cov = self._marginal(t)
        x = np.asarray(x, dtype=float)
        diff = x[..., None, :] - mu                     # (..., K, d)
        log_comp = -0.5 * (np.sum(diff * diff / cov, axis=-1) + np.sum(np.log(2.0 * math.pi * cov), axis=-1))
        log_comp = log_comp + np.log(self.data.weights)
        top = np.max(log_comp, axis=-1, keepdims=True)
        return np.squeeze(top, -1) + np.log(np.sum(np.exp(log_comp - top), axis=-1))

    def score(self, x, t):
        """Exact gradient of log p_t, via log-space responsibilities."""
        _, mu, cov = self._marginal(t)
        x = np.asarray(x, dtype=float)
        diff = x[..., None, :] - mu
        log_comp = -0.5 * (np.sum(diff * diff / cov, axis=-1) + np.sum(np.log(2.0 * math.pi * cov), axis=-1))
        log_comp = log_comp + np.log(self.data.weights)
        top = np.max(log_comp, axis=-1, keepdims=True)
        resp = np.exp(log_comp - top)
        resp /= np.sum(resp, axis=-1, keepdims=True)
        return -np.sum(resp[..., None] * diff / cov, axis=-2)

    # -- network-style evaluations (NFE-counted) -----------------------------

    def noise_pred(self, x, t):
        """Raw-network value: -sigma_bar * score for VP/VE, the preconditioned
        inversion for EDM (returns zero on data matching the EDM prior)."""
        self.nfe += 1
        x = np.asarray(x, dtype=float)
        a, s, sbar = self.sched.alpha_sigma(t)
        sc = self.score(x, t)
        if self.sched.family == "edm":
            sd = self.sched.sigma_data
            den = t * t + sd * sd
            return (sc + x / den) * (t * math.sqrt(den) / sd)
        return -sbar * sc

    def data_pred(self, x, t):
        """Posterior-mean denoiser: x/alpha - sigma * eps_hat, with eps_hat the
        noise prediction (for EDM this equals c1 x + c2 F(c3 x))."""
        self.nfe += 1
        x = np.asarray(x, dtype=float)
        a, s, sbar = self.sched.alpha_sigma(t)
        sc = self.score(x, t)
        if self.sched.family == "edm":
            return x + t * t * sc
        eps_hat = -sbar * sc
        return x / a - s * eps_hat

    def score_from_model(self, x, t):
        """Score reconstructed from the network output through the schedule's
        preconditioning, the way a black-box sampler would (costs 1 NFE)."""
        x = np.asarray(x, dtype=float)
        a, s, sbar = self.sched.alpha_sigma(t)
        f_val = self.noise_pred(x, t)
        if self.sched.family == "edm":
            pc = self.sched.precond(t)
            return ((pc.c1 - 1.0) * x + pc.c2 * f_val) / (a * s * s)
        return -f_val / sbar


class ZeroModel:
    """Model with vanishing nonlinear part: F == 0 and D == x / alpha.

    Makes every exponential step an exact linear transition, which is the
    basis of the exactness tests; evaluations still count toward NFE.
    """

    def __init__(self, d: int, sched: ScheduleBase):
        if d < 1:
            raise DomainError("dimension must be >= 1")
        self._d = d
        self.sched = sched
        self.nfe = 0

    @property
    def dim(self) -> int:
        return self._d

    def reset_nfe(self) -> None:
        self.nfe = 0

    def score(self, x, t):
        return np.zeros_like(np.asarray(x, dtype=float))

    def noise_pred(self, x, t):
        self.nfe += 1
        return np.zeros_like(np.asarray(x, dtype=float))

    def data_pred(self, x, t):
        self.nfe += 1
        a, _, _ = self.sched.alpha_sigma(t)
        return np.asarray(x, dtype=float) / a

    def score_from_model(self, x, t):
        self.nfe += 1
        return np.zeros_like(np.asarray(x, dtype=float))


def zero_model(d: int, sched: ScheduleBase) -> ZeroModel:
    return ZeroModel(d, sched)
