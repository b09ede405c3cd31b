"""Threshold-crossing simulation design with an analytic population oracle.

Outcomes are ``Y1 = 2 U1`` and ``Y0 = 1 + U0`` with ``U_d = U + xi_d``,
``xi_0 = xi_1 + V``; treatment is ``D = 1{pi0 + pi1 Z >= eta}`` with
``(U, eta)`` standard bivariate normal (correlation ``rho``) and
``Z ~ Binomial(L-1, binom_p) / (L-1)`` so the instrument always spans [0, 1].

Every probability the bounds consume is a bivariate normal orthant
probability of ``(U_d / s_d, eta)``, whose correlation is ``rho / s_d`` with
``s_d = sd(U_d)``.
"""

import json
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
from scipy import special, stats
from scipy.optimize import brentq

from .dataset import SMOOTH, EmpiricalModel, InstrumentSupport, Sample
from .errors import ConfigError

# 20-point Gauss-Legendre rule on [-1, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_TWO_PI = 2.0 * math.pi


def norm_cdf(x):
    return special.ndtr(x)


def _bvn_upper(h, k, r):
    """``P[X > h, Y > k]`` for standard bivariate normal, Genz's variant of Drezner-Wesolowsky."""
    h, k, r = np.broadcast_arrays(np.asarray(h, float), np.asarray(k, float), np.asarray(r, float))
    out = np.empty(h.shape)
    small = np.abs(r) < 0.925

    if small.any():
        hs, ks, rs = h[small], k[small], r[small]
        hk = hs * ks
        half_sq = (hs * hs + ks * ks) / 2.0
        asr = np.arcsin(rs)
        sn = np.sin(asr[:, None] * (_GL_X[None, :] + 1.0) / 2.0)
        terms = np.exp((sn * hk[:, None] - half_sq[:, None]) / (1.0 - sn * sn))
        out[small] = (terms @ _GL_W) * asr / (2.0 * _TWO_PI) + norm_cdf(-hs) * norm_cdf(-ks)

    big = ~small
    if big.any():
        hb, kb, rb = h[big], k[big].copy(), r[big]
        kb = np.where(rb < 0, -kb, kb)
        hk = hb * kb
        bvn = np.zeros(hb.shape)
        interior = np.abs(rb) < 1.0
        if interior.any():
            hi, ki, ri, hki = hb[interior], kb[interior], rb[interior], hk[interior]
            as_ = (1.0 - ri) * (1.0 + ri)
            a = np.sqrt(as_)
            bs = (hi - ki) ** 2
            c = (4.0 - hki) / 8.0
            d = (12.0 - hki) / 16.0
            val = a * np.exp(-(bs / as_ + hki) / 2.0) * (
                1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0
            )
            b = np.sqrt(bs)
            corr = np.exp(-hki / 2.0) * math.sqrt(_TWO_PI) * norm_cdf(-b / a) * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
            val = val - np.where(hki > -160.0, corr, 0.0)
            a2 = a / 2.0
            xs = (a2[:, None] * (_GL_X[None, :] + 1.0)) ** 2
            rs_ = np.sqrt(1.0 - xs)
            asr = -(bs[:, None] / xs + hki[:, None]) / 2.0
            with np.errstate(over="ignore", invalid="ignore"):
                inner = np.exp(asr) * (
                    np.exp(-hki[:, None] * (1.0 - rs_) / (2.0 * (1.0 + rs_))) / rs_
                    - (1.0 + c[:, None] * xs * (1.0 + d[:, None] * xs))
                )
            inner = np.where(asr > -100.0, inner, 0.0)
            val = val + a2 * (inner @ _GL_W)
            bvn[interior] = -val / _TWO_PI
        pos = rb > 0
        bvn = np.where(pos, bvn + norm_cdf(-np.maximum(hb, kb)), -bvn)
        bvn = np.where(~pos & (kb > hb), bvn + norm_cdf(kb) - norm_cdf(hb), bvn)
        out[big] = bvn
    return out


def bvn_cdf(x, y, rho):
    """``P[A <= x, B <= y]`` for a standard bivariate normal pair with correlation ``rho``.

    Vectorized over broadcastable ``x``, ``y``, ``rho``; infinite arguments
    are handled exactly.  Absolute error is below 1e-14 for ``|rho| < 1``.
    """
    x, y, rho = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(rho, float))
    if np.any(np.abs(rho) >= 1.0):
        raise ValueError("|rho| must be < 1")
    out = np.empty(x.shape)
    lo = (x == -np.inf) | (y == -np.inf)
    xinf = (x == np.inf) & ~lo
    yinf = (y == np.inf) & ~lo & ~xinf
    rest = ~(lo | xinf | yinf)
    out[lo] = 0.0
    out[xinf] = norm_cdf(y[xinf])
    out[yinf] = norm_cdf(x[yinf])
    if rest.any():
        out[rest] = _bvn_upper(-x[rest], -y[rest], rho[rest])
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DgpConfig:
    """Parameters of the simulation design.

    The defaults for the error covariance, noise scales, selection
    coefficients and binomial probability are a reproducible choice, not
    calibrated values.
    """

    rho: float = 0.5
    sigma_xi: float = 0.3
    sigma_v: float = 0.4
    pi0: float = -0.5
    pi1: float = 1.0
    binom_p: float = 0.5
    L: int = 6
    n: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not abs(self.rho) < 1.0:
            raise ConfigError("rho", f"must satisfy |rho| < 1, got {self.rho}")
        for name in ("sigma_xi", "sigma_v"):
            if not getattr(self, name) >= 0.0:
                raise ConfigError(name, f"must be >= 0, got {getattr(self, name)}")
        if not 0.0 < self.binom_p < 1.0:
            raise ConfigError("binom_p", f"must lie in (0, 1), got {self.binom_p}")
        if int(self.L) != self.L or self.L < 2:
            raise ConfigError("L", f"must be an integer >= 2, got {self.L}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError("n", f"must be a positive integer, got {self.n}")
        for name in ("pi0", "pi1"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(name, "must be finite")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown DGP parameter")
        return cls(**data)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def with_(self, **changes):
        return replace(self, **changes)

    @property
    def levels(self):
        return np.arange(self.L) / (self.L - 1)

    @property
    def level_probs(self):
        return stats.binom.pmf(np.arange(self.L), self.L - 1, self.binom_p)

    @property
    def thresholds(self):
        return self.pi0 + self.pi1 * self.levels

    @property
    def propensity(self):
        return norm_cdf(self.thresholds)

    def u_sd(self, d):
        var = 1.0 + self.sigma_xi**2 + (self.sigma_v**2 if d == 0 else 0.0)
        return math.sqrt(var)

    def outcome_location_scale(self, d):
        """``Y_d = loc + scale * U_d``."""
        return (0.0, 2.0) if d == 1 else (1.0, 1.0)


def draw_sample(config, rng=None):
    """Draw ``config.n`` observations; deterministic given ``config.seed`` when ``rng`` is None."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    n = config.n
    e = rng.standard_normal((4, n))
    u = e[0]
    eta = config.rho * e[0] + math.sqrt(1.0 - config.rho**2) * e[1]
    xi1 = config.sigma_xi * e[2]
    xi0 = xi1 + config.sigma_v * e[3]
    k = rng.binomial(config.L - 1, config.binom_p, size=n)
    z = k / (config.L - 1)
    d = (config.pi0 + config.pi1 * z >= eta).astype(np.int8)
    y1 = 2.0 * (u + xi1)
    y0 = 1.0 + (u + xi0)
    y = np.where(d == 1, y1, y0)
    return Sample(y, d, k, InstrumentSupport(tuple(config.levels)))


def _standardized(config, y, d):
    loc, scale = config.outcome_location_scale(d)
    s = config.u_sd(d)
    return (np.asarray(y, float) - loc) / (scale * s), config.rho / s


def population_joint(config, y, d):
    """``P[Y <= y, D=d | Z=z_l]``, shape ``y.shape + (L,)``."""
    a, r = _standardized(config, y, d)
    a = np.asarray(a)[..., None]
    c = config.thresholds
    # orthant identities avoid subtracting nearly equal probabilities
    if d == 1:
        return bvn_cdf(a, c, r)
    return bvn_cdf(a, -c, -r)


def population_joint_tail(config, y, d):
    """``P[Y > y, D=d | Z=z_l]``, computed directly so far upper tails keep their relative accuracy."""
    a, r = _standardized(config, y, d)
    a = np.asarray(a)[..., None]
    c = config.thresholds
    if d == 1:
        return bvn_cdf(-a, c, -r)
    return bvn_cdf(-a, -c, r)


def _arm_weights(config, d):
    w = config.level_probs * config.propensity if d == 1 else config.level_probs * (1.0 - config.propensity)
    return config.level_probs / w.sum()


def population_marginal(config, y, d):
    """``P[Y <= y | D=d]`` with the instrument integrated over its binomial law."""
    return population_joint(config, y, d) @ _arm_weights(config, d)


def population_marginal_tail(config, y, d):
    """``P[Y > y | D=d]``."""
    return population_joint_tail(config, y, d) @ _arm_weights(config, d)


def _arm_mean(config, d):
    # E[U | eta <= c] = -rho phi(c)/Phi(c), E[U | eta > c] = rho phi(c)/(1-Phi(c))
    c, pz, q = config.thresholds, config.propensity, config.level_probs
    phi = stats.norm.pdf(c)
    loc, scale = config.outcome_location_scale(d)
    if d == 1:
        mass = q * pz
        mean_u = -config.rho * phi / pz
    else:
        mass = q * (1.0 - pz)
        mean_u = config.rho * phi / (1.0 - pz)
    return loc + scale * float(mass @ mean_u / mass.sum())


@dataclass(frozen=True, eq=False)
class PopulationModel(EmpiricalModel):
    """:class:`EmpiricalModel` whose curves come from the analytic design.

    Off-grid evaluations use the closed form rather than interpolation.
    """

    config: DgpConfig = None

    def joint_at(self, y, d):
        return population_joint(self.config, y, d)

    def marginal_at(self, y, d):
        return population_marginal(self.config, y, d)

    def joint_tail_at(self, y, d):
        return population_joint_tail(self.config, y, d)

    def marginal_tail_at(self, y, d):
        return population_marginal_tail(self.config, y, d)

    def quantile(self, tau, d):
        lo, hi = self.y_grid[0], self.y_grid[-1]
        f = lambda t: float(population_marginal(self.config, t, d)) - tau  # noqa: E731
        while f(lo) > 0:
            lo -= hi - lo
        while f(hi) < 0:
            hi += hi - lo
        return brentq(f, lo, hi, xtol=1e-12)

    def true_counterfactual_cdf(self, y, arm="treated"):
        return true_counterfactual_cdf(self.config, y, arm)


def default_grid(config, size=401, width=7.0):
    """Equispaced grid covering both potential outcomes to ``width`` standard deviations."""
    lo, hi = [], []
    for d in (0, 1):
        loc, scale = config.outcome_location_scale(d)
        sd = scale * config.u_sd(d)
        lo.append(loc - width * sd)
        hi.append(loc + width * sd)
    return np.linspace(min(lo), max(hi), size)


def evaluation_grid(config, arm="treated", size=101, width=3.5):
    """Equispaced reporting grid around the counterfactual outcome of ``arm``."""
    d = 0 if arm == "treated" else 1
    loc, scale = config.outcome_location_scale(d)
    sd = scale * config.u_sd(d)
    return np.linspace(loc - width * sd, loc + width * sd, size)


def population_model(config, grid=None):
    """Analytic counterpart of :func:`fosdbounds.dataset.estimate` on ``grid``."""
    grid = default_grid(config) if grid is None else np.asarray(grid, dtype=float)
    joint = np.stack([population_joint(config, grid, d) for d in (0, 1)])
    marginal = np.stack([population_marginal(config, grid, d) for d in (0, 1)])
    arm_mean = np.array([_arm_mean(config, 0), _arm_mean(config, 1)])
    return PopulationModel(
        y_grid=grid,
        propensity=config.propensity,
        joint_subcdf=joint,
        marginal_cdf=marginal,
        n_per_level=config.level_probs,
        support=InstrumentSupport(tuple(config.levels)),
        arm_mean=arm_mean,
        kind=SMOOTH,
        config=config,
    )


def true_counterfactual_cdf(config, grid, arm="treated"):
    """``F_{Y0|D=1}`` (treated arm) or ``F_{Y1|D=0}`` (untreated arm) on ``grid``."""
    if arm == "treated":
        num = population_joint(config, grid, 0)
        # P[Y0 <= y, D=1 | z] = P[U0 <= .] - P[Y0 <= y, D=0 | z]
        a, _ = _standardized(config, grid, 0)
        num = norm_cdf(np.asarray(a))[..., None] - num
        mass = config.level_probs * config.propensity
    elif arm == "untreated":
        a, _ = _standardized(config, grid, 1)
        num = norm_cdf(np.asarray(a))[..., None] - population_joint(config, grid, 1)
        mass = config.level_probs * (1.0 - config.propensity)
    else:
        raise ValueError(f"unknown arm {arm!r}")
    return num @ config.level_probs / mass.sum()


def true_counterfactual_mean(config, arm="treated"):
    """``E[Y0 | D=1]`` or ``E[Y1 | D=0]``."""
    # E[U | D=d] does not depend on which potential outcome carries it
    d_obs = 1 if arm == "treated" else 0
    d_cf = 1 - d_obs
    loc_obs, scale_obs = config.outcome_location_scale(d_obs)
    mean_u = (_arm_mean(config, d_obs) - loc_obs) / scale_obs
    loc, scale = config.outcome_location_scale(d_cf)
    return loc + scale * mean_u


def true_counterfactual_quantile(config, tau, arm="treated"):
    d_cf = 0 if arm == "treated" else 1
    loc, scale = config.outcome_location_scale(d_cf)
    sd = scale * config.u_sd(d_cf)
    f = lambda t: float(true_counterfactual_cdf(config, np.array([t]), arm)[0]) - tau  # noqa: E731
    return brentq(f, loc - 12 * sd, loc + 12 * sd, xtol=1e-12)
