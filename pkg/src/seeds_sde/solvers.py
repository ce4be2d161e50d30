"""One-step update rules and the outer sampling loop.

Families
--------
seeds1/2/3         stochastic exponential steps (1, 2, 3 stages)
dpm1/2/3/4         deterministic exponential ODE steps (probability flow)
euler_maruyama     direct reverse-SDE discretization baseline
exp_euler_etd /    classical exponential Euler in the time variable
exp_euler_lawson   (ETD and integrating-factor flavors)
gddim              stochastic DDIM-style step (VP only)
ve2_ode_a/b, ve2_sde  one-parameter two-stage data-prediction schemes (VE/EDM)

All stochastic steps draw through a stage-keyed ``StepDraws`` provider so
that solvers sharing a (seed, trajectory, step) also share z^1, z^2, ...;
passing ``ZeroStepDraws`` isolates the deterministic part.

Noise-prediction steps are expressed through an "exponential frame": the
lambda variable, the linear transition Phi(t, s), the gain multiplying
(e^h - 1) F (and its phi_2 corrections), and the scale of the Gaussian term,
all schedule-specific.  Data-prediction steps use lambda = -log sigma
directly.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GridError
from .grids import StepGrid
from .noise import staged_noise_seeds3
from .phi import phi, sqrt_exp_diff
from .schedules import ODE, SDE, ScheduleBase

FAMILIES = (
    "seeds1",
    "seeds2",
    "seeds3",
    "dpm1",
    "dpm2",
    "dpm3",
    "dpm4",
    "euler_maruyama",
    "exp_euler_etd",
    "exp_euler_lawson",
    "gddim",
    "ve2_ode_a",
    "ve2_ode_b",
    "ve2_sde",
)

_EVALS_PER_STEP = {
    "seeds1": 1,
    "seeds2": 2,
    "seeds3": 3,
    "dpm1": 1,
    "dpm2": 2,
    "dpm3": 3,
    "dpm4": 5,
    "euler_maruyama": 1,
    "exp_euler_etd": 1,
    "exp_euler_lawson": 1,
    "gddim": 1,
    "ve2_ode_a": 2,
    "ve2_ode_b": 2,
    "ve2_sde": 2,
}

_GAMMA_CAP = math.sqrt(2.0) - 1.0


@dataclass(frozen=True)
class ChurnParams:
    """Extra-noise injection parameters (inactive when s_churn == 0)."""

    s_churn: float = 0.0
    s_tmin: float = 0.0
    s_tmax: float = math.inf
    s_noise: float = 1.0

    def __post_init__(self):
        if self.s_churn < 0.0:
            raise ConfigError("s_churn must be >= 0")
        if self.s_tmin > self.s_tmax:
            raise ConfigError("need s_tmin <= s_tmax")
        if self.s_noise <= 0.0:
            raise ConfigError("s_noise must be positive")


@dataclass(frozen=True)
class SolverSpec:
    """Solver family plus mode and stage parameters."""

    family: str
    mode: str = "np"
    r1: float = 1.0 / 3.0
    r2: float = 2.0 / 3.0
    c2: float = 0.5
    churn: ChurnParams | None = None

    def __post_init__(self):
        fam = self.family.lower().replace("-", "_")
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise ConfigError(f"unknown solver family {self.family!r}; expected one of {FAMILIES}")
        if self.mode not in ("np", "dp"):
            raise ConfigError(f"mode must be 'np' or 'dp', got {self.mode!r}")
        if fam in ("seeds3", "dpm3") and not 0.0 < self.r1 < self.r2 < 1.0:
            raise ConfigError(f"{fam} needs 0 < r1 < r2 < 1, got r1={self.r1}, r2={self.r2}")
        if fam in ("seeds2", "dpm2") and not 0.0 < self.c2 <= 1.0:
            raise ConfigError(f"{fam} needs 0 < c2 <= 1, got c2={self.c2}")
        if fam.startswith("ve2") and not 0.0 < self.r1 <= 1.0:
            raise ConfigError(f"{fam} needs 0 < r1 <= 1, got r1={self.r1}")
        if fam in ("seeds2", "seeds3", "dpm2", "dpm3", "dpm4") and self.mode == "dp":
            raise ConfigError(f"{fam} is defined in noise-prediction mode only")

    @property
    def evals_per_step(self) -> int:
        return _EVALS_PER_STEP[self.family]

    def validate_against(self, sched: ScheduleBase) -> None:
        """Cross-field constraints between solver family and schedule."""
        fam = self.family
        if fam == "gddim" and sched.family != "vp":
            raise ConfigError("gddim requires a VP schedule")
        if fam.startswith("ve2") and sched.family not in ("ve", "edm"):
            raise ConfigError(f"{fam} requires a VE or EDM schedule")
        np_families = ("seeds1", "seeds2", "seeds3", "dpm1", "dpm2", "dpm3", "dpm4",
                       "exp_euler_etd", "exp_euler_lawson")
        if fam in np_families and self.mode == "np" and sched.family == "ve":
            raise ConfigError("noise-prediction steps are not defined on the VE schedule; use mode='dp'")


class StepDraws:
    """Stage-keyed z draws for one solver step over a batch of trajectories."""

    def __init__(self, stream, step_index: int, n: int, d: int, offset: int = 0, squeeze: bool = False):
        self.stream = stream
        self.step_index = step_index
        self.n = n
        self.d = d
        self.offset = offset
        self.squeeze = squeeze

    def z(self, stage: int) -> np.ndarray:
        out = self.stream.normal_paths(self.n, self.step_index, stage, self.d, offset=self.offset)
        return out[0] if self.squeeze else out


class ZeroStepDraws:
    """Deterministic-part probe: every stage draw is the zero vector."""

    def __init__(self, shape):
        self.shape = shape

    def z(self, stage: int) -> np.ndarray:
        return np.zeros(self.shape)


class ArrayDraws:
    """Fixed draws injected by tests: ArrayDraws({1: z1, 2: z2, ...})."""

    def __init__(self, by_stage: dict):
        self.by_stage = {k: np.asarray(v, dtype=float) for k, v in by_stage.items()}

    def z(self, stage: int) -> np.ndarray:
        return self.by_stage[stage]


# -- exponential frames (noise-prediction mode) ------------------------------


class _Frame:
    """lambda variable and step coefficients of one (schedule, equation) pair."""

    __slots__ = ("lam", "t_of_lam", "trans", "gain", "nscale", "nsign", "stochastic")

    def __init__(self, lam, t_of_lam, trans, gain, nscale, nsign, stochastic):
        self.lam = lam
        self.t_of_lam = t_of_lam
        self.trans = trans
        self.gain = gain
        self.nscale = nscale
        self.nsign = nsign
        self.stochastic = stochastic


def np_frame(sched: ScheduleBase, stochastic: bool) -> _Frame:
    """Noise-prediction frame for the reverse SDE (stochastic) or the
    probability-flow ODE (deterministic)."""
    if sched.family == "vp":

        def gain(t, k=2.0 if stochastic else 1.0):
            a, s, sbar = sched.alpha_sigma(t)
            return -k * sbar

        def nscale(t):
            return sched.alpha_sigma(t)[2]

        return _Frame(
            lam=lambda t: sched.lambda_of_t(t, SDE),
            t_of_lam=lambda l: sched.t_of_lambda(l, SDE),
            trans=lambda s, t: sched.alpha_sigma(t)[0] / sched.alpha_sigma(s)[0],
            gain=gain,
            nscale=nscale,
            nsign=-1.0,
            stochastic=stochastic,
        )
    if sched.family == "edm":
        sd = sched.sigma_data
        if stochastic:
            return _Frame(
                lam=lambda t: sched.lambda_of_t(t, SDE),
                t_of_lam=lambda l: sched.t_of_lambda(l, SDE),
                trans=lambda s, t: (t * t + sd * sd) / (s * s + sd * sd),
                gain=lambda t: 2.0 * t * math.sqrt(t * t + sd * sd) / sd,
                nscale=lambda t: t * math.sqrt(t * t + sd * sd) / sd,
                nsign=1.0,
                stochastic=True,
            )
        return _Frame(
            lam=lambda t: sched.lambda_of_t(t, ODE),
            t_of_lam=lambda l: sched.t_of_lambda(l, ODE),
            trans=lambda s, t: math.sqrt((t * t + sd * sd) / (s * s + sd * sd)),
            gain=lambda t: math.sqrt(t * t + sd * sd) * math.atan(t / sd),
            nscale=None,
            nsign=1.0,
            stochastic=False,
        )
    raise ConfigError(f"noise-prediction steps are not defined for schedule family {sched.family!r}")


def _check_backward(s: float, t: float, h: float) -> None:
    if not t < s:
        raise GridError(f"steps go backward in time, got s={s}, t={t}")
    if h <= 0.0:
        raise GridError(f"step width h must be positive, got h={h}")


# -- one-step update rules ----------------------------------------------------


def seeds1_step(model, sched, x_s, s, t, draws, mode="np"):
    """Single-stage stochastic exponential step (1 model evaluation)."""
    if mode == "np":
        fr = np_frame(sched, stochastic=True)
        h = fr.lam(t) - fr.lam(s)
        _check_backward(s, t, h)
        f_val = model.noise_pred(x_s, s)
        eps = draws.z(1)
        det = fr.trans(s, t) * x_s + fr.gain(t) * math.expm1(h) * f_val
        return det + fr.nsign * fr.nscale(t) * math.sqrt(math.expm1(2.0 * h)) * eps
    if mode == "dp":
        a_s, sg_s, _ = sched.alpha_sigma(s)
        a_t, sg_t, sbar_t = sched.alpha_sigma(t)
        h = math.log(sg_s / sg_t)
        _check_backward(s, t, h)
        d_val = model.data_pred(x_s, s)
        eps = draws.z(1)
        trans = (sg_t * sg_t * a_t) / (sg_s * sg_s * a_s)
        det = trans * x_s - a_t * math.expm1(-2.0 * h) * d_val
        return det + sbar_t * math.sqrt(-math.expm1(-2.0 * h)) * eps
    raise ConfigError(f"mode must be 'np' or 'dp', got {mode!r}")


def seeds2_step(model, sched, x_s, s, t, draws, c2=0.5):
    """Two-stage stochastic exponential step (2 model evaluations).

    Stage node at lambda_s + c2 h; c2 = 1/2 is the midpoint form whose noise
    combination is sqrt(e^{2h} - e^h) z1 + sqrt(e^h - 1) z2.
    """
    if not 0.0 < c2 <= 1.0:
        raise ConfigError(f"seeds2 needs 0 < c2 <= 1, got {c2}")
    fr = np_frame(sched, stochastic=True)
    lam_s = fr.lam(s)
    h = fr.lam(t) - lam_s
    _check_backward(s, t, h)
    s1 = fr.t_of_lam(lam_s + c2 * h)
    z1, z2 = draws.z(1), draws.z(2)
    f_s = model.noise_pred(x_s, s)
    # z1 is the weighted increment over [lam_s, lam_s + c2 h]; carrying it to
    # t and adding a fresh remainder keeps the stage and full-step noises on
    # one Brownian path (at c2 = 1/2 this is the sqrt(e^{2h} - e^h) pattern)
    mid_std = math.sqrt(math.expm1(2.0 * c2 * h))
    u = (
        fr.trans(s, s1) * x_s
        + fr.gain(s1) * math.expm1(c2 * h) * f_s
        + fr.nsign * fr.nscale(s1) * mid_std * z1
    )
    f_mid = model.noise_pred(u, s1)
    rem = 2.0 * (1.0 - c2) * h
    full_noise = sqrt_exp_diff(2.0 * h, rem) * z1 + math.sqrt(math.expm1(rem)) * z2
    return (
        fr.trans(s, t) * x_s
        + fr.gain(t) * math.expm1(h) * ((1.0 - 0.5 / c2) * f_s + (0.5 / c2) * f_mid)
        + fr.nsign * fr.nscale(t) * full_noise
    )


def seeds3_step(model, sched, x_s, s, t, draws, r1=1.0 / 3.0, r2=2.0 / 3.0):
    """Three-stage stochastic exponential step (3 model evaluations)."""
    if not 0.0 < r1 < r2 < 1.0:
        raise ConfigError(f"seeds3 needs 0 < r1 < r2 < 1, got r1={r1}, r2={r2}")
    fr = np_frame(sched, stochastic=True)
    lam_s = fr.lam(s)
    h = fr.lam(t) - lam_s
    _check_backward(s, t, h)
    s1 = fr.t_of_lam(lam_s + r1 * h)
    s2 = fr.t_of_lam(lam_s + r2 * h)
    z1, z2, z3 = draws.z(1), draws.z(2), draws.z(3)
    n1, noise_a, noise_b = staged_noise_seeds3(
        z1, z2, z3, fr.nscale(s1), fr.nscale(s2), fr.nscale(t), h, r1, r2
    )
    f_s = model.noise_pred(x_s, s)
    u1 = fr.trans(s, s1) * x_s + fr.gain(s1) * math.expm1(r1 * h) * f_s + fr.nsign * n1
    f_u1 = model.noise_pred(u1, s1)
    # (e^{r2 h} - 1)/(r2 h) - 1 == r2 h phi_2(r2 h), stable near h = 0
    corr2 = (r2 / r1) * (r2 * h) * phi(2, r2 * h)
    u2 = (
        fr.trans(s, s2) * x_s
        + fr.gain(s2) * (math.expm1(r2 * h) * f_s + corr2 * (f_u1 - f_s))
        + fr.nsign * noise_a
    )
    f_u2 = model.noise_pred(u2, s2)
    corr3 = (1.0 / r2) * h * phi(2, h)
    return (
        fr.trans(s, t) * x_s
        + fr.gain(t) * (math.expm1(h) * f_s + corr3 * (f_u2 - f_s))
        + fr.nsign * noise_b
    )


def dpm_step(model, sched, x_s, s, t, order, mode="np", c2=0.5, r1=1.0 / 3.0, r2=2.0 / 3.0):
    """Deterministic exponential ODE step of the given order (1..4).

    Order 1 exists in both modes; orders 2-4 are noise-prediction only.
    Order 4 follows the five-stage scheme with nodes (1/2, 1/2, 1, 1/2).
    """
    if order not in (1, 2, 3, 4):
        raise ConfigError(f"dpm order must be in 1..4, got {order!r}")
    if mode == "dp":
        if order != 1:
            raise ConfigError("data-prediction mode is only defined for the order-1 step")
        a_s, sg_s, sbar_s = sched.alpha_sigma(s)
        a_t, sg_t, sbar_t = sched.alpha_sigma(t)
        h = math.log(sg_s / sg_t)
        _check_backward(s, t, h)
        d_val = model.data_pred(x_s, s)
        return (sbar_t / sbar_s) * x_s - a_t * math.expm1(-h) * d_val
    fr = np_frame(sched, stochastic=False)
    lam_s = fr.lam(s)
    h = fr.lam(t) - lam_s
    _check_backward(s, t, h)
    f_s = model.noise_pred(x_s, s)
    if order == 1:
        return fr.trans(s, t) * x_s + fr.gain(t) * math.expm1(h) * f_s
    if order == 2:
        s1 = fr.t_of_lam(lam_s + c2 * h)
        u = fr.trans(s, s1) * x_s + fr.gain(s1) * math.expm1(c2 * h) * f_s
        f_mid = model.noise_pred(u, s1)
        comb = (1.0 - 0.5 / c2) * f_s + (0.5 / c2) * f_mid
        return fr.trans(s, t) * x_s + fr.gain(t) * math.expm1(h) * comb
    if order == 3:
        s1 = fr.t_of_lam(lam_s + r1 * h)
        s2 = fr.t_of_lam(lam_s + r2 * h)
        u1 = fr.trans(s, s1) * x_s + fr.gain(s1) * math.expm1(r1 * h) * f_s
        f_u1 = model.noise_pred(u1, s1)
        corr2 = (r2 / r1) * (r2 * h) * phi(2, r2 * h)
        u2 = fr.trans(s, s2) * x_s + fr.gain(s2) * (math.expm1(r2 * h) * f_s + corr2 * (f_u1 - f_s))
        f_u2 = model.noise_pred(u2, s2)
        corr3 = (1.0 / r2) * h * phi(2, h)
        return fr.trans(s, t) * x_s + fr.gain(t) * (math.expm1(h) * f_s + corr3 * (f_u2 - f_s))
    return _dpm4_step(model, sched, x_s, s, t, fr, h, lam_s, f_s)


def _dpm4_step(model, sched, x_s, s, t, fr, h, lam_s, k1):
    r = 0.5
    s_mid = fr.t_of_lam(lam_s + r * h)   # nodes s2 = s3 = s5
    s4 = fr.t_of_lam(lam_s + h)
    g_mid, g4, g_t = fr.gain(s_mid), fr.gain(s4), fr.gain(t)
    erh = math.expm1(r * h)
    eh = math.expm1(h)
    hphi2 = h * phi(2, h)                       # (e^h - 1)/h - 1
    k2 = fr.trans(s, s_mid) * x_s + g_mid * erh * k1
    f_k2 = model.noise_pred(k2, s_mid)
    k3 = fr.trans(s, s_mid) * x_s + g_mid * erh * k1 + g_mid * (4.0 * erh / h - 2.0) * (f_k2 - k1)
    f_k3 = model.noise_pred(k3, s_mid)
    k4 = fr.trans(s, s4) * x_s + g4 * eh * k1 + g4 * hphi2 * (f_k3 + f_k2 - 2.0 * k1)
    f_k4 = model.noise_pred(k4, s4)
    a_term = g_mid * erh * k1 - 0.25 * g_mid * hphi2 * (k1 + f_k2 + f_k3)
    b_term = g_mid * (erh / h - 0.5) * (k1 + 4.0 * f_k2 + 4.0 * f_k3 - f_k4)
    # (e^h - 1 + 4(e^{rh} - 1) - 3h)/h^2 - 1 at r = 1/2 equals h phi_3(h) + (h/2) phi_3(h/2)
    c_coef = h * phi(3, h) + 0.5 * h * phi(3, 0.5 * h)
    c_term = g_mid * c_coef * (-k1 - f_k2 - f_k3 + f_k4)
    k5 = fr.trans(s, s_mid) * x_s + a_term + b_term + c_term
    f_k5 = model.noise_pred(k5, s_mid)
    d_term = g_t * eh * k1 - g_t * hphi2 * (4.0 * f_k5 - f_k4 - 3.0 * k1)
    e_term = g_t * 4.0 * h * phi(3, h) * (k1 + f_k4 - 2.0 * f_k5)
    return fr.trans(s, t) * x_s + d_term + e_term


def euler_maruyama_step(model, sched, x_s, s, t, draws):
    """Direct discretization of the reverse SDE (1 model evaluation)."""
    if not t < s:
        raise GridError(f"steps go backward in time, got s={s}, t={t}")
    dt = t - s
    f = sched.drift_f(s)
    g2 = sched.diffusion_g2(s)
    score = model.score_from_model(x_s, s)
    eps = draws.z(1)
    return x_s + (f * x_s - g2 * score) * dt + math.sqrt(g2 * abs(dt)) * eps


def exp_euler_step(model, sched, x_s, s, t, variant):
    """Exponential Euler in the time variable, ETD or Lawson flavor.

    Both treat the linear part exactly through the transition factor; ETD
    weights the frozen nonlinearity by phi_1 of the effective drift, Lawson
    pushes it through the transition.
    """
    if variant not in ("etd", "lawson"):
        raise ConfigError(f"variant must be 'etd' or 'lawson', got {variant!r}")
    if not t < s:
        raise GridError(f"steps go backward in time, got s={s}, t={t}")
    if sched.family == "vp":
        a_s = sched.alpha_sigma(s)[0]
        a_t = sched.alpha_sigma(t)[0]
        trans = a_t / a_s
        b_s = a_s * sched.sigma_dot(s)
    elif sched.family == "edm":
        sd = sched.sigma_data
        trans = math.sqrt((t * t + sd * sd) / (s * s + sd * sd))
        b_s = -sd / math.sqrt(s * s + sd * sd)
    else:
        raise ConfigError("exponential Euler is not defined on the VE schedule")
    dt = t - s
    f_val = model.noise_pred(x_s, s)
    if variant == "lawson":
        return trans * (x_s + dt * b_s * f_val)
    a_eff = math.log(trans) / dt
    return trans * x_s + dt * phi(1, a_eff * dt) * b_s * f_val


def gddim_step(model, sched, x_s, s, t, draws):
    """Stochastic DDIM-style step (VP only, 1 model evaluation)."""
    if sched.family != "vp":
        raise ConfigError("gddim requires a VP schedule")
    a_s, sg_s, _ = sched.alpha_sigma(s)
    a_t, sg_t, sbar_t = sched.alpha_sigma(t)
    h = math.log(sg_s / sg_t)
    _check_backward(s, t, h)
    eps_hat = model.noise_pred(x_s, s)
    eps = draws.z(1)
    return (
        (a_t / a_s) * x_s
        + sbar_t * (sg_t / sg_s - sg_s / sg_t) * eps_hat
        + sbar_t * math.sqrt(-math.expm1(-2.0 * h)) * eps
    )


def ve_2stage_step(model, sched, x_s, s, t, draws, r=0.5, kind="ode_a"):
    """One-parameter two-stage data-prediction schemes on VE/EDM.

    Kinds: "ode_a" (weighted-average bracket), "ode_b" (phi_2 correction),
    "sde" (staged noise with the usual Chasles split).  2 model evaluations.
    """
    if kind not in ("ode_a", "ode_b", "sde"):
        raise ConfigError(f"unknown two-stage kind {kind!r}")
    if not 0.0 < r <= 1.0:
        raise ConfigError(f"two-stage parameter needs 0 < r <= 1, got {r}")
    if sched.family not in ("ve", "edm"):
        raise ConfigError("two-stage data-prediction schemes require a VE or EDM schedule")
    sg_s = sched.sigma_of_t(s)
    sg_t = sched.sigma_of_t(t)
    h = math.log(sg_s / sg_t)
    _check_backward(s, t, h)
    s1 = sched.time_of_sigma(sg_s * math.exp(-r * h))
    sg_1 = sg_s * math.exp(-r * h)
    d_s = model.data_pred(x_s, s)
    if kind == "sde":
        z1, z2 = draws.z(1), draws.z(2)
        u = (
            (sg_1 * sg_1 / (sg_s * sg_s)) * x_s
            - math.expm1(-2.0 * r * h) * d_s
            + sg_1 * math.sqrt(-math.expm1(-2.0 * r * h)) * z1
        )
        d_u = model.data_pred(u, s1)
        bracket = (1.0 - 0.5 / r) * d_s + (0.5 / r) * d_u
        # Chasles split: the stage-1 chunk carried to t plus a fresh remainder
        carried = sqrt_exp_diff(-2.0 * (1.0 - r) * h, -2.0 * h)
        fresh = math.sqrt(-math.expm1(-2.0 * (1.0 - r) * h))
        return (
            (sg_t * sg_t / (sg_s * sg_s)) * x_s
            - math.expm1(-2.0 * h) * bracket
            + sg_t * (carried * z1 + fresh * z2)
        )
    u = (sg_1 / sg_s) * x_s - math.expm1(-r * h) * d_s
    d_u = model.data_pred(u, s1)
    if kind == "ode_a":
        bracket = (1.0 - 0.5 / r) * d_s + (0.5 / r) * d_u
        return (sg_t / sg_s) * x_s - math.expm1(-h) * bracket
    # ode_b: (e^{-h} - 1)/h + 1 == h phi_2(-h)
    corr = (1.0 / r) * h * phi(2, -h)
    return (sg_t / sg_s) * x_s - math.expm1(-h) * d_s + corr * (d_u - d_s)


def churn_inject(x, params: ChurnParams, sigma_t, n_steps, sched, noise):
    """Lift the noise level by gamma = min(s_churn / M, sqrt(2) - 1).

    Active only while sigma_t lies in [s_tmin, s_tmax]; returns the lifted
    state and raised sigma (caller maps sigma back to a time).  Fresh noise
    has standard deviation s_noise * sqrt(sigma'^2 - sigma_t^2), added in
    unscaled coordinates.
    """
    if params.s_churn == 0.0 or not params.s_tmin <= sigma_t <= params.s_tmax:
        return x, sigma_t
    gamma = min(params.s_churn / n_steps, _GAMMA_CAP)
    if gamma <= 0.0:
        return x, sigma_t
    sigma_hat = sigma_t * (1.0 + gamma)
    t_old = sched.time_of_sigma(sigma_t)
    t_new = sched.time_of_sigma(sigma_hat)
    a_old = sched.alpha_sigma(t_old)[0]
    a_new = sched.alpha_sigma(t_new)[0]
    extra = params.s_noise * math.sqrt(sigma_hat * sigma_hat - sigma_t * sigma_t)
    return a_new * (x / a_old + extra * noise), sigma_hat


def step_once(spec: SolverSpec, model, sched, x, s, t, draws):
    """Dispatch one step of the configured solver family."""
    fam = spec.family
    if fam == "seeds1":
        return seeds1_step(model, sched, x, s, t, draws, mode=spec.mode)
    if fam == "seeds2":
        return seeds2_step(model, sched, x, s, t, draws, c2=spec.c2)
    if fam == "seeds3":
        return seeds3_step(model, sched, x, s, t, draws, r1=spec.r1, r2=spec.r2)
    if fam.startswith("dpm"):
        return dpm_step(model, sched, x, s, t, int(fam[3]), mode=spec.mode, c2=spec.c2,
                        r1=spec.r1, r2=spec.r2)
    if fam == "euler_maruyama":
        return euler_maruyama_step(model, sched, x, s, t, draws)
    if fam == "exp_euler_etd":
        return exp_euler_step(model, sched, x, s, t, "etd")
    if fam == "exp_euler_lawson":
        return exp_euler_step(model, sched, x, s, t, "lawson")
    if fam == "gddim":
        return gddim_step(model, sched, x, s, t, draws)
    if fam.startswith("ve2"):
        return ve_2stage_step(model, sched, x, s, t, draws, r=spec.r1, kind=fam[4:])
    raise ConfigError(f"unknown solver family {fam!r}")


@dataclass
class SampleResult:
    """Terminal states plus optional recorded trajectory."""

    terminal: np.ndarray            # (n, d)
    times: np.ndarray               # (M+1,)
    nfe_per_path: int
    trajectory: np.ndarray | None   # (M+1, n, d) when recorded


def sample(model, sched, grid: StepGrid, spec: SolverSpec, stream, n_paths=1,
           x0=None, path_offset=0, record=False) -> SampleResult:
    """Run the iterative procedure over the grid for a batch of trajectories.

    Steps i = 1..M-1 apply the solver; the final interval is the trivial
    step (the state is carried over unchanged, no model call), so the total
    cost is evals_per_step * (M - 1) per path.  The initial state is
    x_T ~ N(0, sigma_bar(t_0)^2 I) unless x0 is given.
    """
    spec.validate_against(sched)
    times = grid.times
    n_real = grid.n_steps - 1
    if n_real < 1:
        raise GridError("grid needs at least one real step (M >= 2)")
    d = model.dim
    if x0 is None:
        sbar0 = sched.alpha_sigma(float(times[0]))[2]
        x = sbar0 * stream.normal_paths(n_paths, 0, 0, d, offset=path_offset)
    else:
        x = np.array(x0, dtype=float).reshape(n_paths, d)
    traj = np.empty((times.size, n_paths, d)) if record else None
    if record:
        traj[0] = x
    for i in range(1, n_real + 1):
        s, t = float(times[i - 1]), float(times[i])
        draws = StepDraws(stream, i, n_paths, d, offset=path_offset)
        if spec.churn is not None and spec.churn.s_churn > 0.0:
            sigma_s = sched.sigma_of_t(s)
            x, sigma_hat = churn_inject(x, spec.churn, sigma_s, grid.n_steps, sched, draws.z(0))
            if sigma_hat != sigma_s:
                s = sched.time_of_sigma(sigma_hat)
        x = step_once(spec, model, sched, x, s, t, draws)
        if record:
            traj[i] = x
    if record:
        traj[-1] = x  # trivial last step
    return SampleResult(
        terminal=x,
        times=times.copy(),
        nfe_per_path=spec.evals_per_step * n_real,
        trajectory=traj,
    )
