"""Regenerate ``sieve_calibration.json``: primal upper bounds and sieve duals on the default population.

Run from the repository root with ``python3 tests/fixtures/calibrate_sieve.py``.
The gap threshold is the largest J=40 gap rounded up to 1e-3 when
every dual is feasible, and null otherwise.
"""

import json
import math
from pathlib import Path

import numpy as np

from fosdbounds.bounds import UPPER, solve_gamma_bound
from fosdbounds.sieve import SieveSpec, compute_moments, dual_sieve_bound
from fosdbounds.simulate import DgpConfig, population_model, true_counterfactual_quantile

TAUS = (0.1, 0.3, 0.5, 0.7, 0.9)
ORDERS = (5, 10, 20, 40)


def calibrate():
    cfg = DgpConfig()
    model = population_model(cfg)
    ybars = [float(true_counterfactual_quantile(cfg, t)) for t in TAUS]
    primal = [solve_gamma_bound(model, y, direction=UPPER) for y in ybars]
    duals = {}
    for J in ORDERS:
        spec = SieveSpec.from_model(model, J)
        mom = compute_moments(model, spec)
        duals[J] = [dual_sieve_bound(model, spec, y, direction=UPPER, moments=mom) for y in ybars]
    gaps = [p.value - d.value for p, d in zip(primal, duals[40]) if d.optimal and p.feasible]
    if len(gaps) == len(ybars):
        g = max(abs(x) for x in gaps)
        threshold = math.ceil(g * 1e3) / 1e3
        note = "threshold = max J=40 gap rounded up"
    else:
        threshold = None
        note = "sieve dual infeasible with the unit-mass constraint; no gap can be calibrated"
    return {
        "dgp": cfg.to_dict(),
        "taus": list(TAUS),
        "ybar": ybars,
        "primal_ub": [p.value for p in primal],
        "primal_status": [p.status for p in primal],
        "dual_status": {str(J): [d.status for d in duals[J]] for J in ORDERS},
        "dual_value": {str(J): [d.value if d.optimal else None for d in duals[J]] for J in ORDERS},
        "threshold": threshold,
        "note": note,
    }


if __name__ == "__main__":
    out = Path(__file__).with_name("sieve_calibration.json")
    out.write_text(json.dumps(calibrate(), indent=2) + "\n")
    print(out)
