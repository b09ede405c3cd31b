"""Command-line front end.

Every command reads one effective :class:`RunConfig` (JSON file, then flag
overrides), writes its outputs atomically into ``--output`` and echoes the
effective configuration into ``manifest.json``.

Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O error
(including an unavailable diagnostic), 3 substantive finding (the bound
conditions fail everywhere, or the FOSD diagnostic rejects), 4 solver failure.
"""

import argparse
import io
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__, lp
from .bounds import (
    LOWER, TREATED, UNTREATED, UPPER, ate_bounds, cdf_bound_curve, curve_from_raw, minimal_slack,
    observed_d, qte_bounds,
)
from .dataset import EmpiricalModel, estimate, load_csv, write_sample_csv
from .diagnostics import (
    MIN_SHARE, complier_cdfs, fosd_preservation_test, violation_experiment, write_witness_curves,
    write_witness_weights,
)
from .errors import ConfigError, DataError, DiagnosticUnavailable, FosdBoundsError, SolverError
from .sieve import SieveSpec, compute_moments, dual_sieve_bound
from .simulate import (
    DgpConfig, default_grid, draw_sample, evaluation_grid, population_model, true_counterfactual_cdf,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FINDING, EXIT_SOLVER = 0, 1, 2, 3, 4
SOLVERS = ("sampled", "sieve", "both")
FIGURES = {"L2": 2, "L5": 5, "L6": 6}


@dataclass(frozen=True)
class RunConfig:
    """Effective parameters of one command run.

    ``dgp`` holds :class:`DgpConfig` fields for simulation and population
    mode; ``seed`` overrides its seed.  ``grid`` is the evaluation-grid size,
    ``constraint_grid`` the grid policy for estimation ("unique" or a number
    of quantile points; in population mode a number of equispaced points).
    """

    input: str = None
    output: str = "out"
    population: bool = False
    dgp: dict = field(default_factory=lambda: DgpConfig().to_dict())
    constraint_grid: object = "unique"
    grid: int = 101
    arm: str = TREATED
    tau: tuple = (0.25, 0.5, 0.75)
    J: int = 20
    solver: str = "sampled"
    mass_constraint: bool = True
    tol_feas: float = lp.FEAS_TOL
    pivot_tol: float = lp.PIVOT_TOL
    fosd_tol: float = 1e-6
    min_share: float = MIN_SHARE
    seed: int = 0
    reps: int = 200
    violation_n: int = 100
    eval_n: int = 100_000
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "tau", tuple(float(t) for t in self.tau))
        # DgpConfig validates its own fields and names the offending one
        self.dgp_config()
        if self.arm not in (TREATED, UNTREATED):
            raise ConfigError("arm", f"must be 'treated' or 'untreated', got {self.arm!r}")
        if self.solver not in SOLVERS:
            raise ConfigError("solver", f"must be one of {SOLVERS}, got {self.solver!r}")
        if self.solver != "sampled" and (int(self.J) != self.J or self.J < 1):
            raise ConfigError("J", f"the sieve solver needs an integer J >= 1, got {self.J!r}")
        if int(self.grid) != self.grid or self.grid < 2:
            raise ConfigError("grid", f"evaluation grid needs at least 2 points, got {self.grid!r}")
        cg = self.constraint_grid
        if cg != "unique" and (isinstance(cg, (str, bool)) or int(cg) != cg or cg < 2):
            raise ConfigError("constraint_grid", f"must be 'unique' or an integer >= 2, got {cg!r}")
        if not self.tau or any(not 0.0 < t < 1.0 for t in self.tau):
            raise ConfigError("tau", f"every quantile level must lie in (0, 1), got {list(self.tau)}")
        for name in ("tol_feas", "pivot_tol", "fosd_tol"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(name, "must be positive")
        if not 0.0 <= self.min_share < 1.0:
            raise ConfigError("min_share", "must lie in [0, 1)")
        for name in ("reps", "violation_n", "eval_n", "workers"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(name, f"must be a positive integer, got {v!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("seed", f"must be a nonnegative integer, got {self.seed!r}")

    def dgp_config(self):
        if not isinstance(self.dgp, dict):
            raise ConfigError("dgp", "must be a JSON object")
        try:
            return DgpConfig.from_dict({**self.dgp, "seed": self.seed})
        except TypeError as exc:
            raise ConfigError("dgp", str(exc)) from None

    def solver_opts(self):
        return {"tol_feas": self.tol_feas, "pivot_tol": self.pivot_tol}

    def to_dict(self):
        d = asdict(self)
        d["tau"] = list(self.tau)
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        data = dict(data)
        if "dgp" in data:
            data["dgp"] = {**DgpConfig().to_dict(), **data["dgp"]}
        return cls(**data)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a JSON object")
        return cls.from_dict(data)


# -- output plumbing ---------------------------------------------------------


class Outputs:
    """Collect output files and write them atomically, refusing to clobber."""

    def __init__(self, directory, force=False):
        self.directory = directory
        self.force = force
        self.files = {}

    def add(self, name, text):
        self.files[name] = text

    def add_csv(self, name, writer, *args):
        buf = io.StringIO()
        writer(*args, buf)
        self.files[name] = buf.getvalue()

    def add_json(self, name, obj):
        self.files[name] = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"

    def check(self, names):
        """Fail before any work is done if an output would be overwritten."""
        if self.force:
            return
        taken = [n for n in names if os.path.exists(os.path.join(self.directory, n))]
        if taken:
            raise FileExistsError(f"{os.path.join(self.directory, taken[0])} exists; pass --force to overwrite")

    def commit(self):
        self.check(self.files)
        for name, text in self.files.items():
            path = os.path.join(self.directory, name)
            folder, base = os.path.split(path)
            os.makedirs(folder or ".", exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=folder or ".", prefix=f".{base}.", suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
        return sorted(self.files)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _manifest(command, cfg, **extra):
    return {"command": command, "version": __version__, "config": cfg.to_dict(), **extra}


# -- shared steps ------------------------------------------------------------


def _load_model(cfg):
    """Return ``(model, eval_grid, dgp or None)`` for population or file input."""
    if cfg.population:
        dgp = cfg.dgp_config()
        size = 401 if cfg.constraint_grid == "unique" else int(cfg.constraint_grid)
        model = population_model(dgp, default_grid(dgp, size=size))
        return model, evaluation_grid(dgp, cfg.arm, size=int(cfg.grid)), dgp
    if cfg.input is None:
        raise ConfigError("input", "give --input PATH or --population")
    if not os.path.exists(cfg.input):
        raise FileNotFoundError(f"input file not found: {cfg.input}")
    if cfg.input.endswith(".json"):
        model = EmpiricalModel.from_json(cfg.input)
    else:
        model = estimate(load_csv(cfg.input), cfg.constraint_grid)
    return model, np.linspace(model.y_grid[0], model.y_grid[-1], int(cfg.grid)), None


def _sieve_curve(model, grid, cfg):
    """Shaped envelopes from the sieve duals plus the raw per-point solutions."""
    spec = SieveSpec.from_model(model, cfg.J)
    moments = compute_moments(model, spec, cfg.arm)
    sols = {}
    for direction in (LOWER, UPPER):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sols[direction] = [
                dual_sieve_bound(model, spec, float(y), cfg.arm, direction, cfg.mass_constraint, moments,
                                 **cfg.solver_opts())
                for y in grid
            ]
    curve = curve_from_raw(
        grid,
        np.array([s.value for s in sols[LOWER]]),
        np.array([s.value for s in sols[UPPER]]),
        np.array([s.optimal for s in sols[LOWER]]),
        np.array([s.optimal for s in sols[UPPER]]),
        cfg.arm,
        [s.status for s in sols[LOWER]],
        [s.status for s in sols[UPPER]],
    )
    return curve, sols


def _bounds_run(cfg):
    model, grid, dgp = _load_model(cfg)
    sampled = cdf_bound_curve(model, grid, cfg.arm, **cfg.solver_opts()) if cfg.solver != "sieve" else None
    sieve = _sieve_curve(model, grid, cfg) if cfg.solver != "sampled" else None
    curve = sampled if sampled is not None else sieve[0]
    extra = {}
    summary = {
        "solver": cfg.solver,
        "arm": cfg.arm,
        "L": model.L,
        "propensity": model.propensity,
        "mean_width": curve.mean_width,
        "infeasible": curve.infeasible_counts(),
        "failed": curve.failure_counts(),
        "crossings": int(np.sum(curve.crossing)) if curve.crossing is not None else 0,
        "points": [
            {"y": float(y), "lower": sl or ("optimal" if fl else "infeasible"),
             "upper": su or ("optimal" if fu else "infeasible")}
            for y, sl, su, fl, fu in zip(
                grid, curve.status_lower or [None] * grid.size, curve.status_upper or [None] * grid.size,
                curve.feasible_lower, curve.feasible_upper,
            )
        ],
    }
    if sampled is not None:
        summary["minimal_slack"] = {}
        for direction, n_bad in sampled.infeasible_counts().items():
            try:
                eps = minimal_slack(model, cfg.arm, direction, **cfg.solver_opts()) if n_bad else 0.0
            except SolverError:
                eps = None
            summary["minimal_slack"][direction] = eps
    if sieve is not None:
        scurve, sols = sieve
        summary["sieve"] = {
            "J": cfg.J,
            "mass_constraint": cfg.mass_constraint,
            "mean_width": scurve.mean_width,
            "dual_infeasible": scurve.infeasible_counts(),
            "note": "sieve values approach the bounds from inside and need not cover the true curve",
        }
        if sampled is not None:
            gap_up = np.where(scurve.feasible_upper & sampled.feasible_upper,
                              sampled.raw_upper - scurve.raw_upper, np.nan)
            gap_lo = np.where(scurve.feasible_lower & sampled.feasible_lower,
                              scurve.raw_lower - sampled.raw_lower, np.nan)
            extra.update(sieve_lb=scurve.lower, sieve_ub=scurve.upper, gap_lb=gap_lo, gap_ub=gap_up)
            summary["sieve"]["max_gap_upper"] = float(np.nanmax(gap_up)) if np.any(np.isfinite(gap_up)) else None
            summary["sieve"]["max_gap_lower"] = float(np.nanmax(gap_lo)) if np.any(np.isfinite(gap_lo)) else None
    if dgp is not None:
        truth = true_counterfactual_cdf(dgp, grid, cfg.arm)
        extra["true_cdf"] = truth
        slack = 1e-6 + cfg.tol_feas
        summary["validity_violations"] = int(np.sum((curve.lower > truth + slack) | (curve.upper < truth - slack)))
    qte = [asdict(qte_bounds(model, curve, t, cfg.arm)) for t in cfg.tau]
    d_obs = observed_d(cfg.arm)
    ate = asdict(ate_bounds(curve, cfg.arm, observed_mean=float(model.arm_mean[d_obs])))
    summary["qte"] = qte
    summary["ate"] = ate
    all_rejected = not curve.feasible_lower.any() and not curve.feasible_upper.any() \
        and curve.failure_counts() == {"lower": 0, "upper": 0}
    summary["conditions_fail_everywhere"] = all_rejected
    return curve, extra, summary


# -- commands ----------------------------------------------------------------


def cmd_simulate(cfg, out):
    out.check(["sample.csv", "manifest.json"])
    dgp = cfg.dgp_config()
    sample = draw_sample(dgp)
    out.add_csv("sample.csv", write_sample_csv, sample)
    out.add_json("manifest.json", _manifest("simulate", cfg, dgp=dgp.to_dict(), seed=dgp.seed, rows=len(sample)))
    return EXIT_OK


def cmd_estimate(cfg, out):
    out.check(["model.json", "manifest.json"])
    model, _, _ = _load_model(cfg)
    out.add("model.json", model.to_json() + "\n")
    out.add_json("manifest.json", _manifest("estimate", cfg, L=model.L, grid_points=int(model.y_grid.size)))
    return EXIT_OK


def cmd_bounds(cfg, out):
    out.check(["bounds.csv", "summary.json", "manifest.json"])
    curve, extra, summary = _bounds_run(cfg)
    out.add_csv("bounds.csv", lambda fh: curve.to_csv(fh, extra))
    out.add_json("summary.json", summary)
    out.add_json("manifest.json", _manifest("bounds", cfg))
    return EXIT_FINDING if summary["conditions_fail_everywhere"] else EXIT_OK


def _write_qte(rows, fh):
    keys = list(rows[0])
    fh.write(",".join(keys) + "\n")
    for r in rows:
        fh.write(",".join(repr(float(r[k])) for k in keys) + "\n")


def cmd_qte(cfg, out):
    out.check(["qte.csv", "summary.json", "manifest.json"])
    _, _, summary = _bounds_run(cfg)
    out.add_csv("qte.csv", _write_qte, summary["qte"])
    out.add_json("summary.json", {k: summary[k] for k in ("solver", "arm", "L", "mean_width", "qte", "ate")})
    out.add_json("manifest.json", _manifest("qte", cfg))
    return EXIT_FINDING if summary["conditions_fail_everywhere"] else EXIT_OK


def _write_compliers(compliers, fh):
    labels = compliers.labels()
    fh.write(",".join(["y", *(f"F1[{g}]" for g in labels), *(f"F0[{g}]" for g in labels)]) + "\n")
    for i, y in enumerate(compliers.grid):
        vals = [*compliers.F1[:, i], *compliers.F0[:, i]]
        fh.write(",".join([repr(float(y)), *(repr(float(v)) for v in vals)]) + "\n")


def cmd_diagnose(cfg, out):
    names = ["fosd_report.json", "compliers.csv", "witness_weights.csv", "witness_curves.csv", "manifest.json"]
    out.check(names)
    model, _, _ = _load_model(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        compliers = complier_cdfs(model, cfg.min_share)
    report = fosd_preservation_test(compliers, tol=cfg.fosd_tol, condition="S1" if cfg.arm == TREATED else "S0")
    body = report.to_dict()
    body.update(
        complier_shares=compliers.shares,
        always_taker_share=compliers.always_taker_share,
        never_taker_share=compliers.never_taker_share,
        shaping_violation=compliers.shaping_violation,
        dropped_pairs=[str(w.message) for w in caught],
    )
    out.add_json("fosd_report.json", body)
    out.add_csv("compliers.csv", _write_compliers, compliers)
    out.add_csv("witness_weights.csv", write_witness_weights, report)
    out.add_csv("witness_curves.csv", lambda fh: write_witness_curves(report, compliers, fh))
    out.add_json("manifest.json", _manifest("diagnose", cfg))
    return EXIT_OK if report.passed else EXIT_FINDING


def cmd_violation(cfg, out):
    out.check(["violation.json", "manifest.json"])
    rep = violation_experiment(cfg.dgp_config(), n=cfg.violation_n, reps=cfg.reps, eval_n=cfg.eval_n,
                               seed=cfg.seed, workers=cfg.workers)
    out.add_json("violation.json", rep.to_dict())
    out.add_json("manifest.json", _manifest("violation", cfg))
    return EXIT_OK


def _write_widths(rows, fh):
    keys = list(rows[0])
    fh.write(",".join(keys) + "\n")
    for r in rows:
        fh.write(",".join(str(r[k]) if isinstance(r[k], int) else repr(float(r[k])) for k in keys) + "\n")


def cmd_reproduce(cfg, out, figure):
    """Plot-ready bundle for one figure id under the population design."""
    sub = f"figure_{figure}"
    names = [f"{sub}/curve.csv", f"{sub}/widths.csv", f"{sub}/manifest.json"]
    out.check(names)
    # the oracle check below needs the certified sampled curve
    solver = "both" if cfg.solver == "sieve" else cfg.solver
    cfg = replace(cfg, population=True, solver=solver, dgp={**cfg.dgp, "L": FIGURES[figure]})
    curve, extra, summary = _bounds_run(cfg)
    truth = extra["true_cdf"]
    half = curve.grid >= np.median(curve.grid)
    widths = [{
        "L": FIGURES[figure],
        "mean_width": curve.mean_width,
        "max_width": float(np.max(curve.width)),
        "max_upper_top_half": float(np.max(curve.upper[half])),
        "infeasible_lower": int(summary["infeasible"]["lower"]),
        "infeasible_upper": int(summary["infeasible"]["upper"]),
        "failed_lower": int(summary["failed"]["lower"]),
        "failed_upper": int(summary["failed"]["upper"]),
        "validity_violations": int(summary["validity_violations"]),
    }]
    columns = {"true_cdf": truth, **{k: v for k, v in extra.items() if k != "true_cdf"}}
    out.add_csv(f"{sub}/curve.csv", lambda fh: curve.to_csv(fh, columns))
    out.add_csv(f"{sub}/widths.csv", _write_widths, widths)
    out.add_json(f"{sub}/manifest.json", _manifest("reproduce", cfg, figure=figure, widths=widths[0]))
    if widths[0]["validity_violations"]:
        raise SolverError(f"{figure}: {widths[0]['validity_violations']} grid points violate the population oracle")
    return EXIT_OK


# -- argument handling -------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with code 1 instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _dgp_item(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key.strip(), json.loads(value)
    except json.JSONDecodeError:
        raise argparse.ArgumentTypeError(f"value for {key!r} is not a number: {value!r}") from None


def _common(p):
    p.add_argument("--config", metavar="PATH", help="JSON config file; flags override its values")
    p.add_argument("--input", metavar="PATH", help="CSV sample (y,d,z) or model JSON from 'estimate'")
    p.add_argument("--output", metavar="DIR", help="output directory")
    p.add_argument("--population", action="store_true", default=None,
                   help="use the analytic simulation design instead of --input")
    p.add_argument("--solver", choices=SOLVERS)
    p.add_argument("--grid", type=int, metavar="N", help="evaluation-grid size")
    p.add_argument("--constraint-grid", dest="constraint_grid", metavar="POLICY",
                   help="'unique' or a number of grid points for the constraint grid")
    p.add_argument("--tau", type=_float_list, metavar="LIST", help="comma-separated quantile levels")
    p.add_argument("--J", type=int, metavar="N", help="Bernstein sieve order")
    p.add_argument("--arm", choices=(TREATED, UNTREATED))
    p.add_argument("--seed", type=int, metavar="N")
    p.add_argument("--L", type=int, metavar="N", help="number of instrument levels in the design")
    p.add_argument("--n", type=int, metavar="N", help="sample size drawn by 'simulate'")
    p.add_argument("--dgp", type=_dgp_item, action="append", metavar="KEY=VALUE",
                   help="override one design parameter (repeatable)")
    p.add_argument("--no-mass-constraint", dest="mass_constraint", action="store_false", default=None)
    p.add_argument("--reps", type=int, metavar="N")
    p.add_argument("--eval-n", dest="eval_n", type=int, metavar="N")
    p.add_argument("--violation-n", dest="violation_n", type=int, metavar="N")
    p.add_argument("--workers", type=int, metavar="N")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")


def build_parser():
    parser = _Parser(prog="fosdbounds", description="Bounds on counterfactual distributions with a multi-valued instrument.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "simulate": "draw a sample from the simulation design",
        "estimate": "tabulate propensities and sub-CDFs into model.json",
        "bounds": "counterfactual CDF bounds, QTE and ATE intervals",
        "qte": "quantile treatment effect bounds",
        "diagnose": "complier CDFs and the FOSD-preservation test",
        "violation": "Monte Carlo violation probability of the sampled program",
        "reproduce": "plot-ready bundle for a population figure",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        if name == "reproduce":
            p.add_argument("figure", choices=sorted(FIGURES), help="figure id")
        _common(p)
    return parser


def config_from_args(args):
    """Merge the config file (if any) with explicit flags."""
    base = {}
    if args.config:
        if not os.path.exists(args.config):
            raise FileNotFoundError(f"config file not found: {args.config}")
        with open(args.config, encoding="utf-8") as fh:
            base = RunConfig.from_json(fh.read()).to_dict()
    cfg = RunConfig.from_dict(base)
    over = {}
    for name in ("input", "output", "population", "solver", "grid", "tau", "J", "arm", "seed",
                 "mass_constraint", "reps", "eval_n", "violation_n", "workers"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = v
    if args.constraint_grid is not None:
        cg = args.constraint_grid
        over["constraint_grid"] = cg if cg == "unique" else _as_int("constraint_grid", cg)
    dgp = dict(cfg.dgp)
    for key, value in args.dgp or []:
        if key == "seed":
            # the run seed drives the design; an explicit --seed still wins
            over.setdefault("seed", value)
        else:
            dgp[key] = value
    if args.L is not None:
        dgp["L"] = args.L
    if args.n is not None:
        dgp["n"] = args.n
    over["dgp"] = dgp
    return RunConfig.from_dict({**cfg.to_dict(), **over})


def _as_int(name, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(name, f"expected 'unique' or an integer, got {text!r}") from None


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        out = Outputs(cfg.output, force=args.force)
        if args.command == "reproduce":
            code = cmd_reproduce(cfg, out, args.figure)
        else:
            code = COMMANDS[args.command](cfg, out)
        for name in out.commit():
            print(os.path.join(cfg.output, name))
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DiagnosticUnavailable as exc:
        print(f"diagnostic unavailable: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FosdBoundsError as exc:
        # relevance failures and similar data-side preconditions
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # anything else is a defect or a numerical breakdown
        print(f"internal failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "bounds": cmd_bounds,
    "qte": cmd_qte,
    "diagnose": cmd_diagnose,
    "violation": cmd_violation,
}


if __name__ == "__main__":
    sys.exit(main())
