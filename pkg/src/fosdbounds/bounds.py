"""Bounds on counterfactual CDFs, quantile and average treatment effects.

For the treated arm the coefficient vectors ``gamma`` live in

    Gamma = {gamma : sum(gamma) = 0, sum(gamma * p) = 1},   p_l = P[D=1 | Z=z_l]

and a ``gamma`` with ``sum_l gamma_l P[Y<=y, D=1 | z_l] >= P[Y<=y | D=1]`` at every
``y`` certifies the upper bound ``-sum_l gamma_l P[Y<=ybar, D=0 | z_l]`` on
``P[Y0 <= ybar | D=1]``; the reversed inequality certifies a lower bound.
The untreated arm swaps the roles of ``D=1`` and ``D=0`` and normalizes with
``P[D=0 | Z=z_l]``.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from . import lp
from .errors import RelevanceError, SolverError

TREATED = "treated"
UNTREATED = "untreated"
UPPER = "upper"
LOWER = "lower"

# status reported when the certificate inequalities admit no solution
CONDITION_FAILS = "condition not satisfied in sample"
NUMERICAL_FAILURE = "simplex answer failed its optimality certificate"


def observed_d(arm):
    """Treatment state whose outcome is observed for ``arm`` (1 for treated)."""
    if arm == TREATED:
        return 1
    if arm == UNTREATED:
        return 0
    raise ValueError(f"unknown arm {arm!r}")


def gamma_constraints(propensity, arm=TREATED):
    """Rows ``[1'; q']`` and right-hand side ``(0, 1)`` defining Gamma for ``arm``."""
    q = np.asarray(propensity, float) if observed_d(arm) == 1 else 1.0 - np.asarray(propensity, float)
    if np.ptp(q) <= 1e-12:
        raise RelevanceError("propensity is constant across instrument levels; the instrument is irrelevant")
    return np.vstack([np.ones_like(q), q]), np.array([0.0, 1.0])


def gamma_particular(propensity, arm=TREATED):
    """Minimum-norm member of Gamma (the unique member when ``L = 2``)."""
    A, b = gamma_constraints(propensity, arm)
    if A.shape[1] == 2:
        return np.linalg.solve(A, b)
    return np.linalg.lstsq(A, b, rcond=None)[0]


@dataclass(frozen=True, eq=False)
class GammaVector:
    gamma: np.ndarray
    arm: str
    direction: str


@dataclass(frozen=True, eq=False)
class GammaBound:
    """Outcome of one bound program at one ``ybar``.

    ``value`` is NaN unless ``status == "optimal"``.
    """

    ybar: float
    value: float
    status: str
    gamma: GammaVector = None

    @property
    def feasible(self):
        return self.status == lp.OPTIMAL

    @property
    def message(self):
        if self.status == lp.INFEASIBLE:
            return CONDITION_FAILS
        if self.status == lp.FAILED:
            return NUMERICAL_FAILURE
        return self.status


def _certificate_rows(model, pts, d_obs):
    """Rows ``P, F`` of the certificate inequality ``P gamma >= F``.

    Where ``F > 1/2`` the row is rewritten in upper-tail form: since
    ``sum(gamma q) = 1`` on Gamma, ``P gamma >= F`` is equivalent to
    ``-(q - P) gamma >= -(1 - F)``.  The tail form keeps the information in
    the row at full relative precision, whereas the CDF form buries it under
    the normalization (entries near ``q`` and ``1``).
    """
    P = model.joint_at(pts, d_obs)
    F = model.marginal_at(pts, d_obs)
    tail = F > 0.5
    if tail.any():
        P[tail] = -model.joint_tail_at(pts[tail], d_obs)
        F[tail] = -model.marginal_tail_at(pts[tail], d_obs)
    return P, F


def gamma_program(model, ybar, arm=TREATED, direction=UPPER, points=None, extra_eq=None):
    """Linear program whose optimum is the bound at ``ybar``.

    The certificate inequality is imposed at ``points`` (default: the
    model's grid).  Upper bounds minimize ``-p(ybar, cf)'gamma``; lower bounds
    minimize ``p(ybar, cf)'gamma`` and the bound is minus the optimum.
    """
    d_obs = observed_d(arm)
    A, b = gamma_constraints(model.propensity, arm)
    if extra_eq is not None:
        A = np.vstack([A, extra_eq[0]])
        b = np.concatenate([b, extra_eq[1]])
    pts = model.y_grid if points is None else np.asarray(points, float)
    P, F = _certificate_rows(model, pts, d_obs)
    c = np.asarray(model.joint_at(np.array([ybar]), 1 - d_obs)).reshape(-1)
    if direction == UPPER:
        return lp.LpProblem(-c, A, b, P, F, np.full(model.L, -np.inf))
    if direction == LOWER:
        return lp.LpProblem(c, A, b, -P, -F, np.full(model.L, -np.inf))
    raise ValueError(f"unknown direction {direction!r}")


def solve_gamma_bound(model, ybar, arm=TREATED, direction=UPPER, points=None, strict=False, **solver_opts):
    """Optimal bound on the counterfactual CDF at ``ybar`` over certificate vectors.

    Parameters
    ----------
    model : EmpiricalModel
    ybar : float
    arm : {"treated", "untreated"}
        ``"treated"`` bounds ``P[Y0 <= ybar | D=1]``; ``"untreated"`` bounds
        ``P[Y1 <= ybar | D=0]``.
    direction : {"upper", "lower"}
    points : array, optional
        Outcome values at which the certificate inequality is enforced.
    strict : bool
        Raise on numerical failure instead of returning status ``"failed"``.

    Returns
    -------
    GammaBound
        ``status`` is ``"infeasible"`` when no vector in Gamma satisfies the
        inequalities on the data (the identifying condition fails in sample),
        and ``"failed"`` when the simplex answer could not be certified.

    Raises
    ------
    RelevanceError
        If propensities are constant across instrument levels.
    SolverError
        On numerical failure of the simplex method, if ``strict``.
    """
    prob = gamma_program(model, ybar, arm, direction, points)
    try:
        sol = lp.solve(prob, **solver_opts)
    except SolverError:
        if strict:
            raise
        return GammaBound(float(ybar), math.nan, lp.FAILED)
    if sol.status == lp.FAILED and strict:
        raise SolverError(f"simplex failed at ybar={ybar}")
    if not sol.optimal:
        return GammaBound(float(ybar), math.nan, sol.status)
    value = sol.value if direction == UPPER else -sol.value
    return GammaBound(float(ybar), float(value), sol.status, GammaVector(sol.x, arm, direction))


def minimal_slack(model, arm=TREATED, direction=UPPER, points=None, **solver_opts):
    """Smallest uniform relaxation ``eps`` that makes the certificate system feasible.

    Solves ``min eps`` over ``(gamma, eps)`` with ``gamma`` in Gamma and the
    certificate inequality relaxed by ``eps`` at every point.  Zero means the
    bound programs are feasible; a positive value measures how far the data
    are from satisfying the identifying condition.
    """
    d_obs = observed_d(arm)
    A, b = gamma_constraints(model.propensity, arm)
    pts = model.y_grid if points is None else np.asarray(points, float)
    P = model.joint_at(pts, d_obs)
    F = model.marginal_at(pts, d_obs)
    sign = 1.0 if direction == UPPER else -1.0
    if direction not in (UPPER, LOWER):
        raise ValueError(f"unknown direction {direction!r}")
    # feasibility alone is much better conditioned than the epigraph program
    free = np.full(model.L, -np.inf)
    try:
        if lp.solve(lp.LpProblem(np.zeros(model.L), A, b, sign * P, sign * F, free), **solver_opts).optimal:
            return 0.0
    except SolverError:
        pass
    ones = np.ones((pts.size, 1))
    G = np.hstack([sign * P, ones])
    c = np.zeros(model.L + 1)
    c[-1] = 1.0
    lower = np.concatenate([np.full(model.L, -np.inf), [0.0]])
    sol = lp.solve(lp.LpProblem(c, np.hstack([A, np.zeros((2, 1))]), b, G, sign * F, lower), **solver_opts)
    if not sol.optimal:
        raise SolverError(f"slack program ended with status {sol.status}")
    return float(sol.x[-1])


def monotonize(raw_lower, raw_upper):
    """Clamp to [0, 1] and make both envelopes nondecreasing.

    The lower envelope takes a running maximum from the left, the upper one a
    running minimum from the right; both moves keep the envelopes valid.

    Returns
    -------
    lower, upper, crossing : arrays
        ``crossing`` flags grid points where the shaped lower exceeds the
        shaped upper envelope.
    """
    lo = np.maximum.accumulate(np.clip(np.asarray(raw_lower, float), 0.0, 1.0))
    up = np.minimum.accumulate(np.clip(np.asarray(raw_upper, float), 0.0, 1.0)[::-1])[::-1]
    return lo, up, lo > up + 1e-12


@dataclass(frozen=True, eq=False)
class CdfBoundCurve:
    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    raw_lower: np.ndarray
    raw_upper: np.ndarray
    feasible_lower: np.ndarray
    feasible_upper: np.ndarray
    arm: str = TREATED
    status_lower: tuple = ()
    status_upper: tuple = ()
    crossing: np.ndarray = None

    @property
    def width(self):
        return self.upper - self.lower

    @property
    def mean_width(self):
        return float(np.mean(self.width))

    def _count(self, status):
        return {"lower": sum(s == status for s in self.status_lower),
                "upper": sum(s == status for s in self.status_upper)}

    def infeasible_counts(self):
        """Points where the certificate system has no solution."""
        if not self.status_lower and not self.status_upper:
            return {"lower": int((~self.feasible_lower).sum()), "upper": int((~self.feasible_upper).sum())}
        return self._count(lp.INFEASIBLE)

    def failure_counts(self):
        """Points where the solver could not certify its answer."""
        return self._count(lp.FAILED)

    def to_csv(self, fh, extra=None):
        """Write ``y, raw_lb, raw_ub, lb, ub, feasible_lb, feasible_ub`` (plus ``extra`` columns)."""
        extra = extra or {}
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "raw_lb", "raw_ub", "lb", "ub", "feasible_lb", "feasible_ub", *extra])
        for i, y in enumerate(self.grid):
            w.writerow([
                repr(float(y)), repr(float(self.raw_lower[i])), repr(float(self.raw_upper[i])),
                repr(float(self.lower[i])), repr(float(self.upper[i])),
                int(self.feasible_lower[i]), int(self.feasible_upper[i]),
                *(repr(float(v[i])) for v in extra.values()),
            ])


def curve_from_raw(grid, raw_lower, raw_upper, feasible_lower, feasible_upper, arm=TREATED,
                   status_lower=(), status_upper=()):
    """Shape raw bound values; points without a certificate get the trivial bound."""
    lo_in = np.where(feasible_lower, raw_lower, 0.0)
    up_in = np.where(feasible_upper, raw_upper, 1.0)
    lo, up, crossing = monotonize(lo_in, up_in)
    return CdfBoundCurve(
        np.asarray(grid, float), lo, up, np.asarray(raw_lower, float), np.asarray(raw_upper, float),
        np.asarray(feasible_lower, bool), np.asarray(feasible_upper, bool), arm,
        tuple(status_lower), tuple(status_upper), crossing,
    )


def _recheck_infeasible(results, model, arm, direction, points, solver_opts):
    """Re-solve "infeasible" points when another point of the same curve is optimal.

    The certificate system does not depend on ``ybar``, so one certified
    optimum proves it feasible and any infeasible verdict on the same curve
    is a numerical artifact of a nearly degenerate system.  Such points are
    retried with the full primal route, then constraint generation, and
    reported as failed if neither certifies an optimum.
    """
    if not any(r.feasible for r in results) or not any(r.status == lp.INFEASIBLE for r in results):
        return results
    opts = {k: v for k, v in solver_opts.items() if k != "method"}
    fixed = []
    for r in results:
        if r.status == lp.INFEASIBLE:
            for method in ("primal", "cutting"):
                r2 = solve_gamma_bound(model, r.ybar, arm, direction, points, method=method, **opts)
                if r2.feasible:
                    break
            r = r2 if r2.feasible else GammaBound(r.ybar, math.nan, lp.FAILED)
        fixed.append(r)
    return fixed


def cdf_bound_curve(model, eval_grid, arm=TREATED, points=None, **solver_opts):
    """Upper and lower envelopes of the counterfactual CDF over ``eval_grid``."""
    eval_grid = np.asarray(eval_grid, float)
    out = {}
    for direction in (LOWER, UPPER):
        res = [solve_gamma_bound(model, yb, arm, direction, points, **solver_opts) for yb in eval_grid]
        out[direction] = _recheck_infeasible(res, model, arm, direction, points, solver_opts)
    return curve_from_raw(
        eval_grid,
        np.array([r.value for r in out[LOWER]]),
        np.array([r.value for r in out[UPPER]]),
        np.array([r.feasible for r in out[LOWER]]),
        np.array([r.feasible for r in out[UPPER]]),
        arm,
        [r.status for r in out[LOWER]],
        [r.status for r in out[UPPER]],
    )


def _inverse(grid, F, tau):
    hit = np.flatnonzero(F >= tau - 1e-12)
    return float(grid[hit[0]]) if hit.size else math.inf


def quantile_bounds(curve, tau):
    """Worst-case bounds on the counterfactual ``tau``-quantile.

    The lower quantile bound inverts the upper CDF envelope and vice versa;
    ``inf`` means the envelope never reaches ``tau`` on the grid.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    return _inverse(curve.grid, curve.upper, tau), _inverse(curve.grid, curve.lower, tau)


@dataclass(frozen=True)
class QteBounds:
    tau: float
    observed_quantile: float
    counterfactual_quantile_lb: float
    counterfactual_quantile_ub: float
    qte_lb: float
    qte_ub: float


def qte_bounds(model, curve, tau, arm=TREATED):
    """Bounds on ``QTE_tau(d)`` for the arm's observed treatment state ``d``.

    Treated arm: ``Q_{Y|D=1}(tau) - Q_{Y0|D=1}(tau)``; untreated arm:
    ``Q_{Y1|D=0}(tau) - Q_{Y|D=0}(tau)``.
    """
    q_lb, q_ub = quantile_bounds(curve, tau)
    obs = model.quantile(tau, observed_d(arm))
    if arm == TREATED:
        lo, hi = obs - q_ub, obs - q_lb
    else:
        lo, hi = q_lb - obs, q_ub - obs
    return QteBounds(float(tau), float(obs), q_lb, q_ub, float(lo), float(hi))


@dataclass(frozen=True)
class AteBounds:
    ate_lb: float
    ate_ub: float
    counterfactual_mean_lb: float
    counterfactual_mean_ub: float
    unbounded: bool = False


def ate_bounds(curve, arm=TREATED, observed_mean=None, bounded_support=True):
    """Bounds on ``ATE(d)`` by integrating the quantile bounds.

    With outcome support taken as ``[grid[0], grid[-1]]``, a CDF ``F`` has mean
    ``grid[-1] - integral(F)``; the lower envelope gives the upper mean and
    vice versa (trapezoid rule on the grid).  With ``bounded_support=False``
    an envelope that does not reach 1 at the top of the grid leaves the mean
    unbounded above.
    """
    g = curve.grid
    top = g[-1]
    mean_ub = top - trapezoid(curve.lower, g)
    mean_lb = top - trapezoid(curve.upper, g)
    unbounded = False
    if not bounded_support:
        if curve.lower[-1] < 1.0 - 1e-12:
            mean_ub, unbounded = math.inf, True
        if curve.upper[0] > 1e-12:
            mean_lb, unbounded = -math.inf, True
    if observed_mean is None:
        observed_mean = math.nan
    if arm == TREATED:
        lo, hi = observed_mean - mean_ub, observed_mean - mean_lb
    elif arm == UNTREATED:
        lo, hi = mean_lb - observed_mean, mean_ub - observed_mean
    else:
        raise ValueError(f"unknown arm {arm!r}")
    return AteBounds(float(lo), float(hi), float(mean_lb), float(mean_ub), unbounded)


@dataclass(frozen=True, eq=False)
class PointIdentification:
    """Result of the exact-certificate search.

    ``identified`` is True when some ``gamma`` in Gamma reproduces the
    observed-arm CDF to within ``tol_eq`` in sup norm; :meth:`cdf` then
    evaluates the identified counterfactual CDF.
    """

    identified: bool
    residual: float
    gamma: np.ndarray
    tol_eq: float
    model: object = None
    arm: str = TREATED

    def cdf(self, y):
        if not self.identified:
            raise ValueError(f"not point-identified at tol_eq={self.tol_eq:g} (residual {self.residual:.3g})")
        d_cf = 1 - observed_d(self.arm)
        return -(self.model.joint_at(np.asarray(y, float), d_cf) @ self.gamma)

    def __str__(self):
        if self.identified:
            return f"point-identified (residual {self.residual:.3g})"
        return f"not point-identified at tol_eq={self.tol_eq:g} (residual {self.residual:.3g})"


def point_identify(model, arm=TREATED, tol_eq=1e-6, points=None, **solver_opts):
    """Minimize the sup-norm gap between the observed-arm CDF and its Gamma-combination.

    Solves ``min t`` over ``(gamma, t)`` with ``gamma`` in Gamma and
    ``|P(y_i)'gamma - F(y_i)| <= t`` at every grid point.
    """
    d_obs = observed_d(arm)
    A, b = gamma_constraints(model.propensity, arm)
    pts = model.y_grid if points is None else np.asarray(points, float)
    P = model.joint_at(pts, d_obs)
    F = model.marginal_at(pts, d_obs)
    L = model.L
    ones = np.ones((pts.size, 1))
    G = np.vstack([np.hstack([-P, ones]), np.hstack([P, ones])])
    h = np.concatenate([-F, F])
    c = np.zeros(L + 1)
    c[-1] = 1.0
    A_eq = np.hstack([A, np.zeros((2, 1))])
    lower = np.concatenate([np.full(L, -np.inf), [0.0]])
    sol = lp.solve(lp.LpProblem(c, A_eq, b, G, h, lower), **solver_opts)
    if not sol.optimal:
        raise SolverError(f"residual program ended with status {sol.status}")
    gamma = sol.x[:L]
    residual = float(np.abs(P @ gamma - F).max())
    return PointIdentification(residual <= tol_eq, residual, gamma, tol_eq, model, arm)
