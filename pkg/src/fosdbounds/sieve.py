"""Bernstein sieve for the dual of the bound programs.

The dual of the upper-bound program is a search over a nonnegative
Lagrangian measure on the outcome space.  Approximating its density by
``sum_j theta_j b_j(u)`` with Bernstein polynomials on the normalized outcome
``u in [0, 1]`` turns the dual into a finite LP in ``(theta, lambda)``:

    max   theta' b - lambda_2
    s.t.  [1 q] lambda - B theta = p(ybar, cf)
          sum(theta) = J + 1,  theta >= 0

where ``b_j`` and ``B_lj`` integrate ``b_j`` against the observed-arm CDF and
sub-CDFs.  Any feasible ``(theta, lambda)`` gives a value no larger than the
primal upper bound; the lower bound uses the same feasible set with the
objective minimized.
"""

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from . import lp
from .bounds import LOWER, TREATED, UPPER, gamma_constraints, observed_d


def _log_binom(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _check_index(j, J):
    if int(J) != J or J < 1:
        raise ValueError(f"basis order J must be a positive integer, got {J!r}")
    j = np.asarray(j)
    if np.any(j != np.round(j)) or np.any(j < 1) or np.any(j > J):
        raise ValueError(f"basis index must lie in 1..{J}, got {j!r}")


def bernstein(j, J, y):
    """Bernstein basis ``C(J, j) y^j (1 - y)^(J - j)`` for ``1 <= j <= J``.

    Evaluated on the log scale, so large ``J`` does not overflow.
    """
    _check_index(j, J)
    y = np.asarray(y, dtype=float)
    if np.any((y < 0) | (y > 1)):
        raise ValueError("y must lie in [0, 1]")
    j = np.asarray(j, dtype=float)
    out = np.exp(_log_binom(J, j) + xlogy(j, y) + xlog1py(J - j, -y))
    return out if out.ndim else float(out)


def _binomial_tail(k0, n, x):
    """``P[Bin(n, x) >= k0]`` as an explicit finite sum; broadcasts over ``k0`` and ``x``."""
    k0 = np.asarray(k0, dtype=float)
    x = np.asarray(x, dtype=float)
    k = np.arange(n + 1, dtype=float)
    terms = np.exp(_log_binom(n, k) + xlogy(k, x[..., None]) + xlog1py(n - k, -x[..., None]))
    mask = k >= k0[..., None]
    return np.sum(np.where(mask, terms, 0.0), axis=-1)


def basis_partial_integral(j, J, a, b):
    """Exact ``integral_a^b b_{j,J}(u) du`` for ``0 <= a <= b <= 1``.

    Uses ``(S(b) - S(a)) / (J + 1)`` with ``S`` the binomial tail
    ``P[Bin(J + 1, x) >= j + 1]``.  Broadcasts over ``j``, ``a`` and ``b``.
    """
    _check_index(j, J)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b > 1) or np.any(a > b):
        raise ValueError("need 0 <= a <= b <= 1")
    j = np.asarray(j)
    out = (_binomial_tail(j + 1, J + 1, b) - _binomial_tail(j + 1, J + 1, a)) / (J + 1)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SieveSpec:
    """Basis order and the affine map ``y -> (y - y_min) / (y_max - y_min)``."""

    J: int
    y_min: float
    y_max: float

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 1:
            raise ValueError(f"J must be a positive integer, got {self.J!r}")
        if not (math.isfinite(self.y_min) and math.isfinite(self.y_max)) or self.y_min >= self.y_max:
            raise ValueError("need finite y_min < y_max")

    @classmethod
    def from_model(cls, model, J):
        return cls(int(J), float(model.y_grid[0]), float(model.y_grid[-1]))

    def normalize(self, y):
        return (np.asarray(y, dtype=float) - self.y_min) / (self.y_max - self.y_min)

    def denormalize(self, u):
        return self.y_min + np.asarray(u, dtype=float) * (self.y_max - self.y_min)


@dataclass(frozen=True, eq=False)
class BernsteinMoments:
    """``b_marg[j] = int b_j F`` and ``B_joint[l, j] = int b_j P_l`` on the normalized scale."""

    b_marg: np.ndarray
    B_joint: np.ndarray
    arm: str = TREATED


def _piece_integrals(u, J, kind):
    """Per-panel weights ``W`` with ``int b_j f = sum_k W[k, j]`` style contractions.

    Step functions: ``f = f_k`` on ``[u_k, u_{k+1})``, so one weight per panel.
    Smooth functions: ``f`` is the linear interpolant of the grid values; returns
    left- and right-node weights so that the panel integral is
    ``f_k * WL[k, j] + f_{k+1} * WR[k, j]``.
    """
    a, b = u[:-1], u[1:]
    js = np.arange(1, J + 1)
    full = basis_partial_integral(js[None, :], J, a[:, None], b[:, None])
    if kind == "step":
        return full, None
    # int_a^b u b_{j,J}(u) du = (j + 1) / (J + 1) * int_a^b b_{j+1,J+1}(u) du
    first = (js + 1) / (J + 1) * basis_partial_integral(js[None, :] + 1, J + 1, a[:, None], b[:, None])
    h = (b - a)[:, None]
    right = (first - a[:, None] * full) / h
    return full - right, right


def compute_moments(model, spec, arm=TREATED):
    """Bernstein moments of the observed-arm CDF and sub-CDFs.

    Step-function models (empirical estimates) are integrated exactly panel by
    panel.  Smooth models are integrated exactly against the piecewise-linear
    interpolant of their grid values, which is the function the bound programs
    see between grid points.
    """
    d = observed_d(arm)
    y = model.y_grid
    inside = (y >= spec.y_min) & (y <= spec.y_max)
    u = np.clip(spec.normalize(y[inside]), 0.0, 1.0)
    # make the panels cover [0, 1]
    F = model.marginal_at(y[inside], d)
    P = model.joint_at(y[inside], d)
    if u.size == 0 or u[0] > 0.0:
        left = spec.y_min
        u = np.concatenate([[0.0], u])
        F = np.concatenate([[model.marginal_at(np.array([left]), d)[0]], F])
        P = np.vstack([model.joint_at(np.array([left]), d), P])
    if u[-1] < 1.0:
        right = spec.y_max
        u = np.concatenate([u, [1.0]])
        F = np.concatenate([F, [model.marginal_at(np.array([right]), d)[0]]])
        P = np.vstack([P, model.joint_at(np.array([right]), d)])
    WL, WR = _piece_integrals(u, spec.J, model.kind)
    if WR is None:
        b = F[:-1] @ WL
        B = P[:-1].T @ WL
    else:
        b = F[:-1] @ WL + F[1:] @ WR
        B = P[:-1].T @ WL + P[1:].T @ WR
    return BernsteinMoments(b, B, arm)


@dataclass(frozen=True, eq=False)
class DualSolution:
    J: int
    theta: np.ndarray
    lambda2: np.ndarray
    value: float
    status: str
    direction: str = UPPER
    arm: str = TREATED
    ybar: float = math.nan
    gap: float = math.nan

    @property
    def optimal(self):
        return self.status == lp.OPTIMAL

    @property
    def message(self):
        if self.status == lp.INFEASIBLE:
            return f"dual infeasible at J={self.J}"
        return self.status

    def with_gap(self, primal_value):
        """Copy carrying the gap to a primal bound (primal minus dual for upper bounds)."""
        gap = primal_value - self.value if self.direction == UPPER else self.value - primal_value
        return DualSolution(self.J, self.theta, self.lambda2, self.value, self.status,
                            self.direction, self.arm, self.ybar, float(gap))

    def to_dict(self):
        def num(v):
            return None if v is None or not math.isfinite(v) else float(v)

        return {
            "J": self.J,
            "ybar": num(self.ybar),
            "arm": self.arm,
            "direction": self.direction,
            "status": self.status,
            "message": self.message,
            "value": num(self.value),
            "theta": None if self.theta is None else self.theta.tolist(),
            "lambda": None if self.lambda2 is None else self.lambda2.tolist(),
            "duality_gap": num(self.gap),
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def dual_program(moments, propensity, c, J, arm=TREATED, direction=UPPER, mass_constraint=True):
    """LP over ``x = (theta, lambda)`` in minimization form."""
    A_gamma, _ = gamma_constraints(propensity, arm)
    # [1 q] lambda - B theta = c
    A = np.hstack([-moments.B_joint, A_gamma.T])
    b = np.asarray(c, dtype=float)
    if mass_constraint:
        A = np.vstack([A, np.concatenate([np.ones(J), np.zeros(2)])])
        b = np.concatenate([b, [J + 1.0]])
    obj = np.concatenate([moments.b_marg, [0.0, -1.0]])
    if direction == UPPER:
        obj = -obj
    elif direction != LOWER:
        raise ValueError(f"unknown direction {direction!r}")
    lower = np.concatenate([np.zeros(J), [-np.inf, -np.inf]])
    return lp.LpProblem(obj, A, b, lower=lower)


def dual_sieve_bound(model, spec, ybar, arm=TREATED, direction=UPPER, mass_constraint=True,
                     moments=None, **solver_opts):
    """Sieve approximation of the bound at ``ybar`` from the dual side.

    Parameters
    ----------
    model : EmpiricalModel
    spec : SieveSpec
    ybar : float
        Clamped into ``[spec.y_min, spec.y_max]`` with a warning.
    direction : {"upper", "lower"}
        The upper-bound dual is maximized and never exceeds the primal upper
        bound; the lower-bound version is minimized over the same set and
        never falls below the primal lower bound.
    mass_constraint : bool
        Impose ``sum(theta) = J + 1`` (unit mass of the Lagrangian measure).
    moments : BernsteinMoments, optional
        Reuse precomputed moments.

    Returns
    -------
    DualSolution
        ``status == "infeasible"`` reads as "dual infeasible at J".
    """
    if not spec.y_min <= ybar <= spec.y_max:
        warnings.warn(f"ybar={ybar} outside [{spec.y_min}, {spec.y_max}]; clamped", stacklevel=2)
        ybar = min(max(ybar, spec.y_min), spec.y_max)
    if moments is None:
        moments = compute_moments(model, spec, arm)
    J = spec.J
    c = np.asarray(model.joint_at(np.array([ybar]), 1 - observed_d(arm))).reshape(-1)
    prob = dual_program(moments, model.propensity, c, J, arm, direction, mass_constraint)
    sol = lp.solve(prob, **solver_opts)
    if not sol.optimal:
        return DualSolution(J, None, None, math.nan, sol.status, direction, arm, float(ybar))
    value = -sol.value if direction == UPPER else sol.value
    return DualSolution(J, sol.x[:J], sol.x[J:], float(value), sol.status, direction, arm, float(ybar))
