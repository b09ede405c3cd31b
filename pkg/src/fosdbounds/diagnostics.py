"""Testable implications: complier distributions, the FOSD-preservation test,
and the violation probability of the sampled bound program.

Under LATE-type monotonicity the instrument levels can be ordered by
propensity, and differencing adjacent sub-CDFs identifies the outcome
distributions of the compliers moved by each step.  If an FOSD ordering of
complier mixtures holds for ``Y1`` it must hold for ``Y0`` as well; the test
searches for mixtures that break this.
"""

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import lp
from .bounds import gamma_program
from .errors import DiagnosticUnavailable, SolverError
from .simulate import draw_sample, population_model, true_counterfactual_quantile

MIN_SHARE = 0.02


@dataclass(frozen=True, eq=False)
class ComplierCdfs:
    """Outcome CDFs of the compliers moved by each adjacent propensity step.

    ``F1[g]`` and ``F0[g]`` are raw differenced curves on ``grid`` for group
    ``g``; ``F1_shaped``/``F0_shaped`` are clipped to [0, 1] and made
    nondecreasing, and ``shaping_violation`` records how far the raw curves
    were from that (a sampling diagnostic).
    """

    grid: np.ndarray
    F1: np.ndarray
    F0: np.ndarray
    shares: np.ndarray
    pairs: tuple
    always_taker_share: float
    never_taker_share: float
    F1_shaped: np.ndarray = None
    F0_shaped: np.ndarray = None
    shaping_violation: float = 0.0

    @property
    def n_groups(self):
        return self.shares.size

    def labels(self):
        return [f"{a:g}->{b:g}" for a, b in self.pairs]


def _shape(F):
    lifted = np.maximum.accumulate(np.clip(F, 0.0, 1.0), axis=-1)
    return lifted, float(np.max(np.abs(lifted - F), initial=0.0))


def complier_cdfs(model, min_share=MIN_SHARE):
    """Difference adjacent sub-CDFs after ordering levels by propensity.

    Parameters
    ----------
    model : EmpiricalModel
    min_share : float
        Adjacent pairs whose complier share falls below this are dropped with
        a warning.

    Raises
    ------
    DiagnosticUnavailable
        If no adjacent pair has a large enough complier share.
    """
    order = np.argsort(model.propensity, kind="stable")
    p = model.propensity[order]
    levels = np.asarray(model.support.levels)[order]
    J1 = model.joint_subcdf[1][:, order]
    J0 = model.joint_subcdf[0][:, order]
    F1, F0, shares, pairs = [], [], [], []
    for l in range(1, p.size):
        share = p[l] - p[l - 1]
        if share < min_share:
            warnings.warn(
                f"dropping pair ({levels[l - 1]:g}, {levels[l]:g}): complier share {share:.4f} < {min_share}",
                stacklevel=2,
            )
            continue
        F1.append((J1[:, l] - J1[:, l - 1]) / share)
        F0.append((J0[:, l - 1] - J0[:, l]) / share)
        shares.append(share)
        pairs.append((float(levels[l - 1]), float(levels[l])))
    if not shares:
        raise DiagnosticUnavailable(f"no adjacent instrument pair has complier share >= {min_share}")
    F1, F0 = np.array(F1), np.array(F0)
    F1s, v1 = _shape(F1)
    F0s, v0 = _shape(F0)
    return ComplierCdfs(
        np.asarray(model.y_grid, float), F1, F0, np.array(shares), tuple(pairs),
        float(p[0]), float(1.0 - p[-1]), F1s, F0s, max(v1, v0),
    )


@dataclass(frozen=True, eq=False)
class FosdTestReport:
    max_violation: float
    witness_weights: tuple
    witness_y: float
    passed: bool
    tol: float
    condition: str
    violation_curve: np.ndarray
    grid: np.ndarray
    labels: tuple = ()

    def to_dict(self):
        w, wt = self.witness_weights
        return {
            "condition": self.condition,
            "passed": bool(self.passed),
            "tol": self.tol,
            "max_violation": self.max_violation,
            "witness_y": self.witness_y,
            "groups": list(self.labels),
            "omega": w.tolist(),
            "omega_tilde": wt.tolist(),
        }


def _curves(compliers, condition, shaped):
    F1 = compliers.F1_shaped if shaped else compliers.F1
    F0 = compliers.F0_shaped if shaped else compliers.F0
    if condition == "S1":
        return F1, F0
    if condition == "S0":
        return F0, F1
    raise ValueError(f"condition must be 'S1' or 'S0', got {condition!r}")


def fosd_preservation_test(compliers, tol=1e-6, condition="S1", shaped=False):
    """Largest breach of FOSD preservation across complier mixtures.

    For each grid point ``y*`` solve

        max  sum(w F_other(y*)) - sum(wt F_other(y*))
        s.t. sum(w F_cond(y)) <= sum(wt F_cond(y))  for all grid y
             w, wt in the simplex over complier groups,

    where ``F_cond`` is the ``Y1`` curve for condition ``"S1"`` (``Y0`` for
    ``"S0"``).  A positive optimum means the mixture ``w`` dominates ``wt`` in
    the conditioning outcome but not in the other one.

    Returns
    -------
    FosdTestReport
        ``passed`` is ``max_violation <= tol``.
    """
    Fc, Fo = _curves(compliers, condition, shaped)
    G, m = Fc.shape
    if G < 2:
        raise DiagnosticUnavailable("need at least two complier groups for the FOSD test")
    # x = (w, wt);  wt'Fc(y) - w'Fc(y) >= 0
    Gm = np.hstack([-Fc.T, Fc.T])
    A = np.zeros((2, 2 * G))
    A[0, :G] = 1.0
    A[1, G:] = 1.0
    b = np.ones(2)
    best, arg, wit = -math.inf, 0, None
    curve = np.empty(m)
    for i in range(m):
        c = np.concatenate([-Fo[:, i], Fo[:, i]])
        sol = lp.solve(lp.LpProblem(c, A, b, Gm, np.zeros(m)))
        if not sol.optimal:
            raise SolverError(f"FOSD program at y={compliers.grid[i]:g} ended with status {sol.status}")
        curve[i] = -sol.value
        if curve[i] > best:
            best, arg, wit = curve[i], i, sol.x
    w = np.clip(wit[:G], 0.0, None)
    wt = np.clip(wit[G:], 0.0, None)
    w, wt = w / w.sum(), wt / wt.sum()
    viol = max(0.0, float(best))
    return FosdTestReport(
        viol, (w, wt), float(compliers.grid[arg]), viol <= tol, tol, condition,
        curve, compliers.grid, tuple(compliers.labels()),
    )


def write_witness_weights(report, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["group", "omega", "omega_tilde"])
    labels = report.labels or [str(g) for g in range(report.witness_weights[0].size)]
    for g, lab in enumerate(labels):
        w.writerow([lab, repr(float(report.witness_weights[0][g])), repr(float(report.witness_weights[1][g]))])


def write_witness_curves(report, compliers, fh):
    """Mixture curves of the witness for both outcomes."""
    w_, wt = report.witness_weights
    Fc, Fo = _curves(compliers, report.condition, shaped=False)
    cond, other = ("F1", "F0") if report.condition == "S1" else ("F0", "F1")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["y", f"omega_{cond}", f"omega_tilde_{cond}", f"omega_{other}", f"omega_tilde_{other}", "violation"])
    for i, y in enumerate(compliers.grid):
        w.writerow([repr(float(y)), repr(float(w_ @ Fc[:, i])), repr(float(wt @ Fc[:, i])),
                    repr(float(w_ @ Fo[:, i])), repr(float(wt @ Fo[:, i])), repr(float(report.violation_curve[i]))])


# -- violation probability of the sampled program --------------------------


@dataclass(frozen=True)
class ViolationReport:
    n: int
    reps: int
    mean_violation: float
    bound: float
    mc_stderr: float
    n_used: int
    n_infeasible: int
    n_unbounded: int
    ybar: float
    eval_n: int
    seed: int

    @property
    def within_bound(self):
        return self.mean_violation <= self.bound + 2.0 * self.mc_stderr

    def to_dict(self):
        d = dict(self.__dict__)
        d["within_bound"] = self.within_bound
        return d


def _one_replication(args):
    config, pop, n, ybar, seed, rep, y_eval, F_eval, P_eval, atol = args
    rng = np.random.default_rng([seed, rep])
    sample = draw_sample(config.with_(n=n), rng)
    prob = gamma_program(pop, ybar, points=np.sort(sample.y))
    try:
        sol = lp.solve(prob)
    except Exception:  # solver certificate failure: count as unusable
        return lp.FAILED, math.nan
    if not sol.optimal:
        return sol.status, math.nan
    h = F_eval - P_eval @ sol.x
    return lp.OPTIMAL, float(np.mean(h > atol))


def violation_experiment(config, n=100, reps=200, eval_n=100_000, ybar=None, seed=0, workers=1, atol=0.0):
    """Monte Carlo estimate of the expected violation probability.

    Each replication draws ``n`` observations, imposes the certificate
    inequality of the upper-bound program only at their outcomes (with the
    population sub-CDFs), and measures the share of a large independent
    evaluation sample at which the solution violates the inequality by more
    than ``atol``.  Replication ``r`` uses the stream ``default_rng([seed, r])``;
    the evaluation sample uses ``default_rng([seed, reps, 1])``, so results do
    not depend on ``workers``.

    Raises
    ------
    RuntimeError
        If no replication produced an optimal solution.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if reps < 50:
        warnings.warn(f"only {reps} replications; the Monte Carlo error of the mean is large", stacklevel=2)
    if n < config.L:
        raise ValueError(f"n={n} is below L={config.L}; the sampled program cannot pin down gamma")
    pop = population_model(config)
    if ybar is None:
        ybar = true_counterfactual_quantile(config, 0.5)
    ev = draw_sample(config.with_(n=eval_n), np.random.default_rng([seed, reps, 1]))
    P_eval = pop.joint_at(ev.y, 1)
    F_eval = pop.marginal_at(ev.y, 1)
    jobs = [(config, pop, n, ybar, seed, r, ev.y, F_eval, P_eval, atol) for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_one_replication, jobs, chunksize=max(1, reps // (4 * workers))))
    else:
        results = [_one_replication(j) for j in jobs]
    status = [s for s, _ in results]
    V = np.array([v for s, v in results if s == lp.OPTIMAL])
    if V.size == 0:
        raise RuntimeError(
            f"all {reps} replications failed (infeasible: {status.count(lp.INFEASIBLE)}, "
            f"unbounded: {status.count(lp.UNBOUNDED)}); try a larger n"
        )
    se = float(V.std(ddof=1) / math.sqrt(V.size)) if V.size > 1 else math.nan
    return ViolationReport(
        n, reps, float(V.mean()), 1.0 / (n + 1), se, int(V.size),
        status.count(lp.INFEASIBLE), status.count(lp.UNBOUNDED), float(ybar), eval_n, seed,
    )
