"""Reproducible noise: keyed substreams and the weighted-increment algebra.

The RNG contract is counter based: a draw is addressed by (seed, trajectory,
step, stage) and is identical across runs, platforms, evaluation orders and
worker counts.  Trajectories are grouped into fixed blocks of ``BLOCK``
consecutive indices; one Philox generator is keyed per (block, step, stage)
and a trajectory reads its own row of the block draw.  This makes vectorized
sampling cheap while keeping every (trajectory, step, stage) draw a pure
function of the key.

Stage index conventions used by the samplers:
  stage 0  churn noise (and the initial-state draw at step 0),
  stage j  the j-th Gaussian z^j of a multi-stage solver step.
SEEDS-1/2/3 on the same (seed, trajectory, step) therefore share z^1, which
is what the per-step equivalence checks rely on.
"""

import math

import numpy as np

from .errors import ConfigError, DomainError
from .phi import sqrt_exp_diff

BLOCK = 1024


class RngStream:
    """Counter-based provider of independent Gaussian substreams."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def generator(self, traj: int, step: int, stage: int) -> np.random.Generator:
        """Fresh generator for one (trajectory, step, stage) key."""
        return self._block_generator(traj, step, stage)

    def _block_generator(self, block, step, stage):
        counter = [0, int(stage), int(step), int(block)]
        return np.random.Generator(np.random.Philox(key=self.seed, counter=counter))

    def _normal_block(self, block, step, stage, d):
        return self._block_generator(block, step, stage).standard_normal((BLOCK, d))

    def gauss(self, traj: int, step: int, stage: int, d: int) -> np.ndarray:
        """d i.i.d. standard normals for one trajectory, shape (d,)."""
        if d < 1:
            raise DomainError("dimension must be >= 1")
        return self._normal_block(traj // BLOCK, step, stage, d)[traj % BLOCK]

    def normal_paths(self, n: int, step: int, stage: int, d: int, offset: int = 0) -> np.ndarray:
        """Draws for trajectories offset..offset+n-1, shape (n, d).

        Row p of the result equals ``gauss(offset + p, step, stage, d)``
        regardless of n or offset, so any partition of the path range
        reproduces the same values.
        """
        out = np.empty((n, d))
        filled = 0
        while filled < n:
            traj = offset + filled
            block, row = divmod(traj, BLOCK)
            take = min(BLOCK - row, n - filled)
            out[filled : filled + take] = self._normal_block(block, step, stage, d)[row : row + take]
            filled += take
        return out


class ZeroStream:
    """Drop-in stream whose draws are all zero (deterministic-part probes)."""

    def gauss(self, traj, step, stage, d):
        return np.zeros(d)

    def normal_paths(self, n, step, stage, d, offset=0):
        return np.zeros((n, d))


def weighted_increment_std(sigma_bar_t: float, h: float, kind: str) -> float:
    """Standard deviation of the one-step weighted stochastic increment.

    kind "np": sigma_bar_t sqrt(e^{2h} - 1); kind "dp": sigma_bar_t
    sqrt(1 - e^{-2h}).  Requires h > 0 (backward step).
    """
    if h <= 0.0 or not math.isfinite(h):
        raise DomainError(f"weighted increment needs h > 0, got {h!r}")
    if kind == "np":
        return sigma_bar_t * math.sqrt(math.expm1(2.0 * h))
    if kind == "dp":
        return sigma_bar_t * math.sqrt(-math.expm1(-2.0 * h))
    raise ConfigError(f"unknown increment kind {kind!r}; expected 'np' or 'dp'")


def raw_increment_var(lam_a: float, lam_b: float) -> float:
    """Variance of integral_{lam_a}^{lam_b} e^{-lam} dW for lam_b > lam_a."""
    if lam_b <= lam_a:
        raise DomainError("need lam_b > lam_a")
    return 0.5 * math.exp(-2.0 * lam_a) * (-math.expm1(-2.0 * (lam_b - lam_a)))


def staged_noise_seeds2(z1, z2, sbar_mid, sbar_t, h):
    """Two-stage noise pair sharing z1 between the half and full step.

    noise_mid  = sbar_mid sqrt(e^h - 1) z1
    noise_full = sbar_t  (sqrt(e^{2h} - e^h) z1 + sqrt(e^h - 1) z2)
    """
    if h <= 0.0:
        raise DomainError("staged noise needs h > 0")
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    root = math.sqrt(math.expm1(h))
    noise_mid = sbar_mid * root * z1
    noise_full = sbar_t * (sqrt_exp_diff(2.0 * h, h) * z1 + root * z2)
    return noise_mid, noise_full


def staged_noise_seeds3(z1, z2, z3, sbar_s1, sbar_s2, sbar_t, h, r1, r2):
    """Three-stage noises (n1, A, B) of the three-stage stochastic step.

    n1 = sbar_s1 sqrt(e^{2 r1 h} - 1) z1
    A  = sbar_s2 (sqrt(e^{2 r2 h} - e^{2 r1 h}) z1 + sqrt(e^{2 r1 h} - 1) z2)
    B  = sbar_t  (sqrt(e^{2h} - e^{2 r2 h}) z1 + sqrt(e^{2 r2 h} - e^{2 r1 h}) z2
                  + sqrt(e^{2 r1 h} - 1) z3)
    """
    if not 0.0 < r1 < r2 < 1.0:
        raise ConfigError(f"stage fractions must satisfy 0 < r1 < r2 < 1, got {r1}, {r2}")
    if h <= 0.0:
        raise DomainError("staged noise needs h > 0")
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    z3 = np.asarray(z3, dtype=float)
    c_inner = math.sqrt(math.expm1(2.0 * r1 * h))
    c_mid = sqrt_exp_diff(2.0 * r2 * h, 2.0 * r1 * h)
    c_outer = sqrt_exp_diff(2.0 * h, 2.0 * r2 * h)
    n1 = sbar_s1 * c_inner * z1
    a = sbar_s2 * (c_mid * z1 + c_inner * z2)
    b = sbar_t * (c_outer * z1 + c_mid * z2 + c_inner * z3)
    return n1, a, b


def chasles_refine(gen: np.random.Generator, lam_partition, size=None):
    """Independent weighted increments over adjacent lambda subintervals.

    ``lam_partition`` is strictly increasing with length >= 2.  Increment j
    is N(0, v_j) with v_j = integral e^{-2 lam} over subinterval j, so the
    sum over j is distributed as the full-interval weighted integral.
    Returns shape (len-1,) or (len-1, size).
    """
    lams = np.asarray(lam_partition, dtype=float)
    if lams.ndim != 1 or lams.size < 2:
        raise ConfigError("partition must be a 1-D array of length >= 2")
    if not np.all(np.diff(lams) > 0.0):
        raise ConfigError("partition must be strictly increasing")
    stds = np.array(
        [math.sqrt(raw_increment_var(lams[j], lams[j + 1])) for j in range(lams.size - 1)]
    )
    shape = (lams.size - 1,) if size is None else (lams.size - 1, size)
    draws = gen.standard_normal(shape)
    return draws * (stds if size is None else stds[:, None])


def correlated_pair(gen: np.random.Generator, h: float, size=None):
    """Correlated pair (w_hat, z_hat) approximating (W_h, int_0^h W dt).

    Lower-triangular construction from two unit normals:
        w_hat = sqrt(h) u1
        z_hat = (h sqrt(h)/2) u1 + (h sqrt(h)/(2 sqrt(3))) u2
    giving covariance [[h, h^2/2], [h^2/2, h^3/3]].
    """
    if h <= 0.0:
        raise DomainError("correlated pair needs h > 0")
    shape = () if size is None else (size,)
    u1 = gen.standard_normal(shape)
    u2 = gen.standard_normal(shape)
    rh = math.sqrt(h)
    w = rh * u1
    z = (h * rh / 2.0) * u1 + (h * rh / (2.0 * math.sqrt(3.0))) * u2
    return w, z


def weak_point_increment(gen: np.random.Generator, h: float, order: int, size=None):
    """Discrete stand-ins for the Wiener increment in weak schemes.

    order 1: +-sqrt(h) with probability 1/2 each.
    order 2: +-sqrt(3h) with probability 1/6 each, 0 with probability 2/3.
    """
    if h <= 0.0:
        raise DomainError("weak increment needs h > 0")
    shape = () if size is None else (size,)
    u = gen.random(shape)
    if order == 1:
        return math.sqrt(h) * np.where(u < 0.5, 1.0, -1.0)
    if order == 2:
        mag = math.sqrt(3.0 * h)
        return np.where(u < 1.0 / 6.0, mag, np.where(u < 2.0 / 6.0, -mag, 0.0))
    raise ConfigError(f"unsupported weak-increment order {order!r}; expected 1 or 2")
