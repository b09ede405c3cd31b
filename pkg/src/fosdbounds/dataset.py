"""Observational samples and the empirical probability objects built from them."""

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParseError, StratumError, SupportError

STEP = "step"
SMOOTH = "smooth"


@dataclass(frozen=True)
class InstrumentSupport:
    """Ordered instrument values ``z_1 < ... < z_L``."""

    levels: tuple

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        if len(levels) < 2:
            raise SupportError(f"instrument takes {len(levels)} distinct value(s); at least 2 are needed")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise SupportError("instrument levels must be strictly increasing")
        object.__setattr__(self, "levels", levels)

    @property
    def L(self):
        return len(self.levels)


@dataclass(frozen=True)
class Observation:
    y: float
    d: int
    z_index: int  # 0-based position in InstrumentSupport.levels


@dataclass(frozen=True, eq=False)
class Sample:
    """Columns of an i.i.d. sample: outcome, treatment and instrument level index.

    ``z_index`` holds 0-based positions into ``support.levels``.
    """

    y: np.ndarray
    d: np.ndarray
    z_index: np.ndarray
    support: InstrumentSupport
    cell_label: str = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        d = np.asarray(self.d).reshape(-1)
        z = np.asarray(self.z_index).reshape(-1)
        if y.size == 0:
            raise DataError("sample is empty")
        if not (y.size == d.size == z.size):
            raise DataError("y, d and z_index must have equal length")
        if not np.all(np.isfinite(y)):
            raise DataError("outcomes must be finite")
        if not np.all((d == 0) | (d == 1)):
            raise DataError("treatment must be 0 or 1")
        if np.any(z < 0) or np.any(z >= self.support.L) or not np.all(z == np.round(z)):
            raise DataError("instrument index out of range")
        for name, arr in (("y", y), ("d", d.astype(np.int8)), ("z_index", z.astype(np.int64))):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_observations(cls, observations, support, cell_label=None):
        obs = list(observations)
        return cls(
            np.array([o.y for o in obs], dtype=float),
            np.array([o.d for o in obs]),
            np.array([o.z_index for o in obs]),
            support,
            cell_label,
        )

    def __len__(self):
        return self.y.size

    @property
    def z(self):
        return np.asarray(self.support.levels)[self.z_index]

    def observations(self):
        for y, d, z in zip(self.y, self.d, self.z_index):
            yield Observation(float(y), int(d), int(z))

    def restrict(self, mask, cell_label=None):
        """Subsample (e.g. one discrete covariate cell) on the same instrument support."""
        mask = np.asarray(mask, dtype=bool)
        return Sample(self.y[mask], self.d[mask], self.z_index[mask], self.support, cell_label)

    def to_csv(self, path, columns=("y", "d", "z")):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write_sample_csv(self, fh, columns)


def write_sample_csv(sample, fh, columns=("y", "d", "z")):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for y, d, z in zip(sample.y, sample.d, sample.z):
        w.writerow([repr(float(y)), int(d), repr(float(z))])


def load_csv(path, y="y", d="d", z="z", cell=None, cell_value=None):
    """Read a header-bearing CSV into a :class:`Sample`.

    Instrument levels are the sorted distinct values of the ``z`` column.  If
    ``cell`` names a discrete covariate column, only rows whose value equals
    ``cell_value`` are kept.
    """
    ys, ds, zs = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError("file is empty", line=1)
        wanted = [y, d, z] + ([cell] if cell else [])
        missing = [c for c in wanted if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"missing column(s) {missing}", line=1)
        for row in reader:
            line = reader.line_num
            vals = {}
            for col in (y, d, z):
                raw = row.get(col)
                if raw is None or raw.strip() == "":
                    raise ParseError(f"missing value for '{col}'", line=line)
                try:
                    vals[col] = float(raw)
                except ValueError:
                    raise ParseError(f"non-numeric value {raw!r} for '{col}'", line=line) from None
            if not (math.isfinite(vals[y]) and math.isfinite(vals[z])):
                raise ParseError("non-finite value", line=line)
            if vals[d] not in (0.0, 1.0):
                raise ParseError(f"treatment must be 0 or 1, got {row[d]!r}", line=line)
            if cell and row.get(cell) != str(cell_value):
                continue
            ys.append(vals[y])
            ds.append(int(vals[d]))
            zs.append(vals[z])
    if not ys:
        raise DataError(f"{path}: no observations")
    levels, z_index = np.unique(np.array(zs), return_inverse=True)
    support = InstrumentSupport(tuple(levels))
    label = None if cell is None else f"{cell}={cell_value}"
    return Sample(np.array(ys), np.array(ds), z_index, support, label)


@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    """Probability objects consumed by the bound programs, tabulated on ``y_grid``.

    Attributes
    ----------
    y_grid : (m,) array
        Strictly increasing outcome grid.
    propensity : (L,) array
        ``P[D=1 | Z=z_l]``.
    joint_subcdf : (2, m, L) array
        ``joint_subcdf[d, i, l] = P[Y <= y_i, D=d | Z=z_l]``.
    marginal_cdf : (2, m) array
        ``P[Y <= y_i | D=d]``; NaN rows mark an empty treatment stratum.
    n_per_level : (L,) array
        Observation counts per level (population models store level weights).
    arm_mean : (2,) array
        ``E[Y | D=d]``.
    kind : {"step", "smooth"}
        Step functions are right-continuous between grid points; smooth
        functions are linearly interpolated.
    """

    y_grid: np.ndarray
    propensity: np.ndarray
    joint_subcdf: np.ndarray
    marginal_cdf: np.ndarray
    n_per_level: np.ndarray
    support: InstrumentSupport
    arm_mean: np.ndarray = field(default_factory=lambda: np.full(2, np.nan))
    kind: str = STEP

    @property
    def L(self):
        return self.propensity.size

    def check_stratum(self, d):
        if np.isnan(self.marginal_cdf[d]).any():
            raise StratumError(f"no observations with D={d}")

    def _lookup(self, values, y):
        """Evaluate grid-tabulated curves (last axis of ``values`` is the grid) at ``y``."""
        y = np.asarray(y, dtype=float)
        g = self.y_grid
        if self.kind == STEP:
            idx = np.searchsorted(g, y, side="right") - 1
            out = values[..., np.clip(idx, 0, g.size - 1)]
            return np.where(idx < 0, 0.0, out)
        if values.ndim == 1:
            return np.interp(y, g, values)
        return np.stack([np.interp(y, g, v) for v in values])

    def joint_at(self, y, d):
        """``P[Y <= y, D=d | Z=z_l]`` for each ``y``; shape ``y.shape + (L,)``."""
        y = np.asarray(y, dtype=float)
        vals = self._lookup(self.joint_subcdf[d].T, y.reshape(-1))
        return vals.T.reshape(y.shape + (self.L,))

    def marginal_at(self, y, d):
        """``P[Y <= y | D=d]``."""
        self.check_stratum(d)
        return self._lookup(self.marginal_cdf[d], y)

    def joint_tail_at(self, y, d):
        """``P[Y > y, D=d | Z=z_l]``."""
        return self.level_probabilities(d) - self.joint_at(y, d)

    def marginal_tail_at(self, y, d):
        """``P[Y > y | D=d]``."""
        return 1.0 - self.marginal_at(y, d)

    def quantile(self, tau, d):
        """Generalized inverse ``inf{y in grid: P[Y <= y | D=d] >= tau}``."""
        self.check_stratum(d)
        F = self.marginal_cdf[d]
        idx = np.searchsorted(F, tau - 1e-12, side="left")
        return float(self.y_grid[idx]) if idx < F.size else math.inf

    def level_probabilities(self, d):
        """``P[D=d | Z=z_l]``."""
        return self.propensity if d == 1 else 1.0 - self.propensity

    def to_dict(self):
        return {
            "kind": self.kind,
            "levels": list(self.support.levels),
            "y_grid": self.y_grid.tolist(),
            "propensity": self.propensity.tolist(),
            "joint_subcdf": {str(d): self.joint_subcdf[d].tolist() for d in (0, 1)},
            "marginal_cdf": {str(d): [None if math.isnan(v) else v for v in self.marginal_cdf[d]] for d in (0, 1)},
            "n_per_level": self.n_per_level.tolist(),
            "arm_mean": [None if math.isnan(v) else float(v) for v in self.arm_mean],
        }

    @classmethod
    def from_dict(cls, data):
        def arr(v):
            return np.array([np.nan if x is None else x for x in v], dtype=float)

        return cls(
            y_grid=np.array(data["y_grid"], dtype=float),
            propensity=np.array(data["propensity"], dtype=float),
            joint_subcdf=np.stack([np.array(data["joint_subcdf"][str(d)], dtype=float) for d in (0, 1)]),
            marginal_cdf=np.stack([arr(data["marginal_cdf"][str(d)]) for d in (0, 1)]),
            n_per_level=np.array(data["n_per_level"], dtype=float),
            support=InstrumentSupport(tuple(data["levels"])),
            arm_mean=arr(data["arm_mean"]),
            kind=data.get("kind", STEP),
        )

    def to_json(self, path=None):
        text = json.dumps(self.to_dict())
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text_or_path):
        text = text_or_path
        if not text.lstrip().startswith("{"):
            with open(text_or_path, encoding="utf-8") as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


def make_grid(y, policy="unique"):
    """Outcome grid from pooled outcomes.

    ``policy`` is ``"unique"`` (all sorted distinct values) or an integer
    ``K`` (``K`` equispaced pooled-sample quantiles, deduplicated).
    """
    y = np.asarray(y, dtype=float)
    if isinstance(policy, str):
        if policy != "unique":
            raise ValueError(f"unknown grid policy {policy!r}")
        return np.unique(y)
    K = int(policy)
    if K < 2:
        raise ValueError("quantile grid needs at least 2 points")
    return np.unique(np.quantile(y, np.linspace(0.0, 1.0, K)))


def estimate(sample, grid="unique"):
    """Tabulate propensities, joint sub-CDFs and arm-wise marginal CDFs.

    Parameters
    ----------
    sample : Sample
    grid : "unique", int, or array
        Grid policy for :func:`make_grid`, or an explicit increasing grid.

    Returns
    -------
    EmpiricalModel
    """
    y_grid = np.asarray(grid, dtype=float) if not isinstance(grid, (str, int)) else make_grid(sample.y, grid)
    if np.any(np.diff(y_grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    L = sample.support.L
    n_level = np.bincount(sample.z_index, minlength=L)
    if np.any(n_level == 0):
        empty = [sample.support.levels[i] for i in np.flatnonzero(n_level == 0)]
        raise StratumError(f"no observations at instrument level(s) {empty}")

    joint = np.zeros((2, y_grid.size, L))
    for d in (0, 1):
        for lvl in range(L):
            ys = np.sort(sample.y[(sample.d == d) & (sample.z_index == lvl)])
            joint[d, :, lvl] = np.searchsorted(ys, y_grid, side="right") / n_level[lvl]
    propensity = np.bincount(sample.z_index[sample.d == 1], minlength=L) / n_level

    marginal = np.full((2, y_grid.size), np.nan)
    arm_mean = np.full(2, np.nan)
    for d in (0, 1):
        ys = np.sort(sample.y[sample.d == d])
        if ys.size:
            marginal[d] = np.searchsorted(ys, y_grid, side="right") / ys.size
            arm_mean[d] = ys.mean()

    degenerate = (propensity <= 0.0) | (propensity >= 1.0)
    if degenerate.any():
        warnings.warn(
            f"degenerate propensity at instrument level(s) {np.flatnonzero(degenerate).tolist()}",
            stacklevel=2,
        )
    return EmpiricalModel(y_grid, propensity, joint, marginal, n_level.astype(float), sample.support, arm_mean, STEP)
