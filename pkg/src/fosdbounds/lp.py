"""Dense linear programs and a two-phase primal simplex solver.

Problems are stated in the general form::

    minimize    c'x
    subject to  A x  = b
                G x >= h
                x_j >= 0  or  x_j free

and reduced to ``min c'u, S u = r, u >= 0`` before pivoting.  Problems with
many more constraints than variables (the bound programs enforce one
inequality per outcome grid point) are solved through their dual, whose
tableau has one row per variable, and the primal solution is read back from
the simplex multipliers.
"""

from dataclasses import dataclass

import numpy as np

from .errors import LpStructureError, SolverError

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-8

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
FAILED = "failed"

# reinversions attempted after phase 2 reports optimality
_REFRESH = 3


def _as_matrix(M, n, name):
    if M is None:
        return np.zeros((0, n))
    M = np.array(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(1, -1) if M.size else np.zeros((0, n))
    if M.ndim != 2 or M.shape[1] != n:
        raise LpStructureError(f"{name} must have {n} columns, got shape {M.shape}")
    return M


def _as_vector(v, m, name):
    if v is None:
        v = np.zeros(0)
    v = np.array(v, dtype=float).reshape(-1)
    if v.shape[0] != m:
        raise LpStructureError(f"{name} must have length {m}, got {v.shape[0]}")
    return v


@dataclass(frozen=True, eq=False)
class LpProblem:
    """Minimize ``objective @ x`` subject to ``A_eq x = b_eq`` and ``G x >= h``.

    ``lower`` holds the per-variable lower bound, either ``0.0`` or ``-inf``
    (free).  Defaults to all variables nonnegative.
    """

    objective: np.ndarray
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    G: np.ndarray = None
    h: np.ndarray = None
    lower: np.ndarray = None

    def __post_init__(self):
        c = np.array(self.objective, dtype=float).reshape(-1)
        n = c.shape[0]
        if n == 0:
            raise LpStructureError("problem has no variables")
        A = _as_matrix(self.A_eq, n, "A_eq")
        b = _as_vector(self.b_eq, A.shape[0], "b_eq")
        G = _as_matrix(self.G, n, "G")
        h = _as_vector(self.h, G.shape[0], "h")
        lower = np.zeros(n) if self.lower is None else _as_vector(self.lower, n, "lower")
        if not np.all((lower == 0.0) | (lower == -np.inf)):
            raise LpStructureError("lower bounds must be 0 or -inf")
        for name, arr in (("objective", c), ("A_eq", A), ("b_eq", b), ("G", G), ("h", h)):
            if not np.all(np.isfinite(arr)):
                raise LpStructureError(f"{name} contains non-finite entries")
        for name, arr in (("objective", c), ("A_eq", A), ("b_eq", b), ("G", G), ("h", h), ("lower", lower)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vars(self):
        return self.objective.shape[0]

    @property
    def free(self):
        return self.lower == -np.inf

    def dump(self):
        """Plain-text listing, one constraint per line."""

        def row(coefs):
            terms = [f"{v:+.12g}*x{j}" for j, v in enumerate(coefs) if v != 0.0]
            return " ".join(terms) if terms else "0"

        lines = [f"minimize {row(self.objective)}"]
        for i in range(self.A_eq.shape[0]):
            lines.append(f"eq{i}: {row(self.A_eq[i])} = {self.b_eq[i]:.12g}")
        for i in range(self.G.shape[0]):
            lines.append(f"ge{i}: {row(self.G[i])} >= {self.h[i]:.12g}")
        for j in range(self.n_vars):
            lines.append(f"bound x{j} {'free' if self.free[j] else '>= 0'}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str
    x: np.ndarray = None
    value: float = np.nan
    eq_duals: np.ndarray = None
    ineq_duals: np.ndarray = None
    iterations: int = 0
    method: str = ""

    @property
    def optimal(self):
        return self.status == OPTIMAL


# -- standard form --------------------------------------------------------


def _pivot(T, r, j):
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T, basis, n_enter, piv_tol, opt_tol, max_iter, bland_after):
    """Pivot ``T`` in place until optimal; the last row holds reduced costs."""
    m = T.shape[0] - 1
    if n_enter == 0:
        return OPTIMAL, 0
    degenerate = 0
    bland = False
    for it in range(max_iter):
        d = T[m, :n_enter]
        if bland:
            cand = np.flatnonzero(d < -opt_tol)
            if cand.size == 0:
                return OPTIMAL, it
            j = cand[0]
        else:
            j = int(np.argmin(d))
            if d[j] >= -opt_tol:
                return OPTIMAL, it
        col = T[:m, j]
        rows = np.flatnonzero(col > piv_tol)
        if rows.size == 0:
            return UNBOUNDED, it
        rhs = np.maximum(T[rows, -1], 0.0)
        ratios = rhs / col[rows]
        rmin = ratios.min()
        ties = rows[ratios <= rmin + 1e-12 * max(1.0, rmin)]
        if bland:
            r = ties[np.argmin(basis[ties])]
        else:
            r = ties[np.argmax(col[ties])]
        degenerate = degenerate + 1 if rmin <= piv_tol else 0
        if degenerate >= bland_after:
            bland = True
        _pivot(T, r, j)
        basis[r] = j
    return FAILED, max_iter


def _standard_simplex(S, r, c, piv_tol, tol_feas, max_iter=None, bland_after=50):
    """Solve ``min c'u s.t. S u = r, u >= 0``.

    Returns ``(status, u, y, iterations)`` where ``y`` are the equality
    multipliers (``c - S'y >= 0`` at optimum).
    """
    m, n = S.shape
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000
    sign = np.where(r < 0, -1.0, 1.0)
    S1 = S * sign[:, None]
    r1 = r * sign
    scale_c = max(1.0, np.abs(c).max(initial=0.0))
    opt_tol = piv_tol * scale_c

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = S1
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = r1
    T[m, :n] = -S1.sum(axis=0)
    T[m, -1] = -r1.sum()
    basis = np.arange(n, n + m)

    status, it1 = _run(T, basis, n, piv_tol, piv_tol, max_iter, bland_after)
    if status == FAILED:
        return FAILED, None, None, it1
    if -T[m, -1] > tol_feas * max(1.0, np.abs(r1).max(initial=0.0)):
        return INFEASIBLE, None, None, it1

    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] >= n:
            row = np.abs(T[i, :n])
            j = int(np.argmax(row)) if n else -1
            if n and row[j] > piv_tol:
                _pivot(T, i, j)
                basis[i] = j
            else:
                keep[i] = False
    T = np.vstack([T[:m][keep], T[m:]])
    basis = basis[keep]
    m2 = basis.size

    T[m2, :] = 0.0
    T[m2, :n] = c
    for i in range(m2):
        T[m2] -= c[basis[i]] * T[i]
    status, its = _run(T, basis, n, piv_tol, opt_tol, max_iter, bland_after)
    its += it1
    # reinvert from the original data to shed accumulated rounding, and keep
    # pivoting if the refreshed reduced costs are no longer optimal
    S1k, r1k = S1[keep], r1[keep]
    for _ in range(_REFRESH):
        if status != OPTIMAL:
            break
        try:
            X = np.linalg.solve(S1k[:, basis], np.column_stack([S1k, np.eye(m)[keep], r1k]))
        except np.linalg.LinAlgError:
            break
        if X[:, -1].min(initial=0.0) < -tol_feas * max(1.0, np.abs(r1k).max(initial=0.0)):
            break
        T[:m2] = X
        T[:m2, -1] = np.maximum(X[:, -1], 0.0)
        T[m2] = 0.0
        T[m2, :n] = c
        T[m2] -= c[basis] @ T[:m2]
        if T[m2, :n].min(initial=0.0) >= -opt_tol:
            break
        status, more = _run(T, basis, n, piv_tol, opt_tol, max_iter, bland_after)
        its += more
    if status != OPTIMAL:
        return status, None, None, its

    u = np.zeros(n)
    y = np.zeros(m)
    B = S[keep][:, basis]
    try:
        u[basis] = np.linalg.solve(B, r[keep])
        y[keep] = np.linalg.solve(B.T, c[basis])
    except np.linalg.LinAlgError:
        u[basis] = T[:m2, -1]
        y[keep] = -T[m2, n:n + m][keep] * sign[keep]
    u = np.maximum(u, 0.0)
    return OPTIMAL, u, y, its


# -- general form ---------------------------------------------------------


def _solve_primal(p, piv_tol, tol_feas, max_iter):
    n, free = p.n_vars, p.free
    me, mg = p.A_eq.shape[0], p.G.shape[0]
    nf = int(free.sum())
    S = np.zeros((me + mg, n + nf + mg))
    S[:me, :n] = p.A_eq
    S[:me, n:n + nf] = -p.A_eq[:, free]
    S[me:, :n] = p.G
    S[me:, n:n + nf] = -p.G[:, free]
    S[me:, n + nf:] = -np.eye(mg)
    r = np.concatenate([p.b_eq, p.h])
    c = np.concatenate([p.objective, -p.objective[free], np.zeros(mg)])
    status, u, y, its = _standard_simplex(S, r, c, piv_tol, tol_feas, max_iter)
    if status != OPTIMAL:
        return LpSolution(status, iterations=its, method="primal")
    x = u[:n].copy()
    x[free] -= u[n:n + nf]
    return LpSolution(OPTIMAL, x, float(p.objective @ x), y[:me], y[me:], its, "primal")


def _solve_dual(p, piv_tol, tol_feas, max_iter):
    n, free = p.n_vars, p.free
    me, mg = p.A_eq.shape[0], p.G.shape[0]
    nonneg = np.flatnonzero(~free)
    S = np.zeros((n, 2 * me + mg + nonneg.size))
    S[:, :me] = p.A_eq.T
    S[:, me:2 * me] = -p.A_eq.T
    S[:, 2 * me:2 * me + mg] = p.G.T
    S[nonneg, 2 * me + mg + np.arange(nonneg.size)] = 1.0
    cost = np.concatenate([-p.b_eq, p.b_eq, -p.h, np.zeros(nonneg.size)])
    status, u, pi, its = _standard_simplex(S, p.objective.copy(), cost, piv_tol, tol_feas, max_iter)
    if status == OPTIMAL:
        x = -pi
        y = u[:me] - u[me:2 * me]
        w = u[2 * me:2 * me + mg]
        return LpSolution(OPTIMAL, x, float(p.objective @ x), y, w, its, "dual")
    if status == UNBOUNDED:
        return LpSolution(INFEASIBLE, iterations=its, method="dual")
    if status == INFEASIBLE:
        # dual infeasible: primal is unbounded iff it is feasible
        st0, _, _, its0 = _standard_simplex(S, np.zeros(n), cost, piv_tol, tol_feas, max_iter)
        verdict = UNBOUNDED if st0 == OPTIMAL else INFEASIBLE
        return LpSolution(verdict, iterations=its + its0, method="dual")
    return LpSolution(status, iterations=its, method="dual")


def _solve_cutting(p, piv_tol, tol_feas, max_iter, batch=None):
    """Constraint generation over the inequality rows.

    Solves the primal on a subset of rows, adds the most violated rows and
    repeats.  Each restricted program is a relaxation, so its infeasibility is
    final and an optimum that satisfies every row is optimal for the whole
    problem (with zero multipliers on the rows never added).  Keeps the
    tableau small for tall programs with a handful of variables.
    """
    n, mg = p.n_vars, p.G.shape[0]
    if mg == 0:
        return _solve_primal(p, piv_tol, tol_feas, max_iter)
    batch = batch or 2 * n + 2
    active = np.unique(np.linspace(0, mg - 1, min(mg, 4 * n + 10)).round().astype(int))
    its = 0
    while True:
        sub = LpProblem(p.objective, p.A_eq, p.b_eq, p.G[active], p.h[active], p.lower)
        sol = _solve_primal(sub, piv_tol, tol_feas, max_iter)
        if sol.status == FAILED:
            sol = _solve_dual(sub, piv_tol, tol_feas, max_iter)
        its += sol.iterations
        if sol.status in (INFEASIBLE, FAILED):
            return LpSolution(sol.status, iterations=its, method="cutting")
        if sol.status == UNBOUNDED:
            if active.size == mg:
                return LpSolution(UNBOUNDED, iterations=its, method="cutting")
            spread = np.linspace(0, mg - 1, min(mg, 2 * active.size)).round().astype(int)
            active = np.union1d(active, spread)
            continue
        viol = p.h - p.G @ sol.x
        viol[active] = 0.0
        worst = np.argsort(viol)[::-1][:batch]
        add = worst[viol[worst] > tol_feas]
        if add.size == 0:
            w = np.zeros(mg)
            w[active] = sol.ineq_duals
            return LpSolution(OPTIMAL, sol.x, sol.value, sol.eq_duals, w, its, "cutting")
        active = np.union1d(active, add)


def check_solution(p, sol, tol_feas=FEAS_TOL):
    """Largest violation among primal feasibility, dual feasibility and the duality gap."""
    x, y, w = sol.x, sol.eq_duals, sol.ineq_duals
    scale = max(1.0, np.abs(x).max(initial=0.0))
    viol = [0.0]
    if p.A_eq.size:
        viol.append(np.abs(p.A_eq @ x - p.b_eq).max())
    if p.G.size:
        viol.append(np.max(p.h - p.G @ x, initial=0.0))
        viol.append(np.max(-w, initial=0.0))
    viol.append(np.max(-x[~p.free], initial=0.0))
    red = p.objective - p.A_eq.T @ y - p.G.T @ w
    viol.append(np.abs(red[p.free]).max(initial=0.0))
    viol.append(np.max(-red[~p.free], initial=0.0))
    gap = abs(sol.value - (p.b_eq @ y + p.h @ w))
    viol.append(gap / scale)
    return float(max(viol))


def _primal_violation(p, x):
    viol = [0.0, np.max(-x[~p.free], initial=0.0)]
    if p.A_eq.size:
        viol.append(np.abs(p.A_eq @ x - p.b_eq).max())
    if p.G.size:
        viol.append(np.max(p.h - p.G @ x, initial=0.0))
    return float(max(viol))


def _certificate(problem, scaled, raw, sol):
    """Optimality measured on the equilibrated problem, feasibility on the original.

    Multipliers of nearly-zero rows are legitimately huge, so absolute dual
    residuals on the original data say little; on the equilibrated problem
    every row and column has unit max-norm and the residuals are relative.
    """
    return max(check_solution(scaled, raw), _primal_violation(problem, sol.x))


ROW_SCALING = True
# the fallback route is skipped when its tableau would exceed this many cells
FALLBACK_CELLS = 100_000


def _tableau_cells(p, route):
    n, me, mg = p.n_vars, p.A_eq.shape[0], p.G.shape[0]
    if route == "cutting":
        return 0
    if route == "primal":
        rows, cols = me + mg, n + int(p.free.sum()) + mg
    else:
        rows, cols = n, 2 * me + mg + int((~p.free).sum())
    return (rows + 1) * (cols + rows + 1)


def _inv_max(v):
    return np.where(v > 0, 1.0 / np.where(v > 0, v, 1.0), 1.0)


def _equilibrate(p):
    """Row then column max-norm scaling; returns the scaled problem and both scale vectors."""
    me = p.A_eq.shape[0]
    M = np.vstack([p.A_eq, p.G])
    r = np.ones(M.shape[0]) if not ROW_SCALING else _inv_max(np.abs(M).max(axis=1, initial=0.0))
    M = M * r[:, None]
    s = _inv_max(np.abs(M).max(axis=0, initial=0.0))
    M = M * s
    q = LpProblem(p.objective * s, M[:me], p.b_eq * r[:me], M[me:], p.h * r[me:], p.lower)
    return q, r, s


def _unscale(sol, r, s, me, problem):
    if not sol.optimal:
        return sol
    x = sol.x * s
    return LpSolution(OPTIMAL, x, float(problem.objective @ x), sol.eq_duals * r[:me],
                      sol.ineq_duals * r[me:], sol.iterations, sol.method)


def solve(problem, *, method="auto", pivot_tol=PIVOT_TOL, tol_feas=FEAS_TOL, max_iter=None):
    """Solve an :class:`LpProblem` with the two-phase simplex method.

    Parameters
    ----------
    problem : LpProblem
    method : {"auto", "primal", "dual", "cutting"}
        ``"dual"`` pivots on the dual tableau (one row per variable);
        ``"cutting"`` runs the primal on a growing subset of inequality rows.
        ``"auto"`` tries dual, cutting, then primal when there are more than
        twice as many constraints as variables, otherwise primal then dual;
        it moves on when an answer fails the optimality certificate, skipping
        any route whose tableau exceeds ``FALLBACK_CELLS``.
    pivot_tol, tol_feas : float
        Pivot acceptance and feasibility tolerances.

    Returns
    -------
    LpSolution
        ``eq_duals`` and ``ineq_duals`` satisfy
        ``objective = A_eq' eq_duals + G' ineq_duals + r`` with ``r = 0`` on free
        variables and ``r >= 0`` on nonnegative ones, and ``ineq_duals >= 0``.
    """
    if not isinstance(problem, LpProblem):
        raise LpStructureError("solve expects an LpProblem")
    routes = {"primal": _solve_primal, "dual": _solve_dual, "cutting": _solve_cutting}
    if method == "auto":
        n_rows = problem.A_eq.shape[0] + problem.G.shape[0]
        order = ["dual", "cutting", "primal"] if n_rows > 2 * problem.n_vars else ["primal", "dual"]
    elif method in routes:
        order = [method]
    else:
        raise ValueError(f"unknown method {method!r}")

    scaled, r, s = _equilibrate(problem)
    me = problem.A_eq.shape[0]
    sol = None
    for k, name in enumerate(order):
        if k and _tableau_cells(problem, name) > FALLBACK_CELLS:
            break
        raw = routes[name](scaled, pivot_tol, tol_feas, max_iter)
        sol = _unscale(raw, r, s, me, problem)
        if sol.status != OPTIMAL:
            if sol.status != FAILED:
                return sol
            continue
        err = _certificate(problem, scaled, raw, sol)
        if err <= tol_feas * 100:
            return sol
    if sol.status == OPTIMAL:
        raise SolverError(f"simplex solution failed certificate check ({err:.3g})")
    return sol
