"""Cross-checks of the flux solver against a generic conic solver.

Skipped when cvxpy is unavailable; the rest of the suite does not depend
on it.
"""

import numpy as np
import pytest

cp = pytest.importorskip("cvxpy")

from mvlift import (
    MeasureField,
    TargetGrid,
    build_interval,
    full_mask,
    operator_norm_tv,
    quadratic,
    solve_eulerian,
)
from conftest import measure_from_rows, random_rows


def _instance(seed, periodic):
    rng = np.random.default_rng(seed)
    n, m = 6, 7
    d = build_interval(n, 1.0)
    g = TargetGrid(q=1, cells=(m,), mins=(0.0,), maxs=(1.0,), periodic=(periodic,))
    mu = measure_from_rows(g, random_rows(rng, n, m, floor=0.15))
    return d, g, mu


def _reference_value(d, g, mu, kind):
    m = g.cells[0]
    h = g.spacing(0)
    periodic = g.periodic[0]
    rows = mu.rho
    total = 0.0
    for k in range(d.n_edges):
        r0, r1 = rows[k], rows[k + 1]
        rb = 0.5 * (r0 + r1)
        ell = w = float(d.edge_length[k])
        if periodic:
            J = cp.Variable(m)
            cons = [(J[(c + 1) % m] - J[c]) / h + (r1[c] - r0[c]) / ell == 0
                    for c in range(m)]
            p = 0.5 * (J + cp.hstack([J[1:], J[:1]]))
        else:
            J = cp.Variable(m + 1)
            cons = [J[0] == 0, J[m] == 0]
            cons += [(J[c + 1] - J[c]) / h + (r1[c] - r0[c]) / ell == 0
                     for c in range(m)]
            p = 0.5 * (J[:-1] + J[1:])
        if kind == "quadratic":
            obj = cp.sum(cp.multiply(0.5 * w / rb, cp.square(p)))
        else:
            obj = w * cp.norm1(p)
        prob = cp.Problem(cp.Minimize(obj), cons)
        prob.solve(solver=cp.CLARABEL)
        total += prob.value
    return total


@pytest.mark.parametrize("periodic", [False, True])
def test_quadratic_flux_matches_conic_reference(periodic):
    d, g, mu = _instance(42, periodic)
    rep = solve_eulerian(mu, d, full_mask(d), quadratic(0.5))
    ref = _reference_value(d, g, mu, "quadratic")
    assert rep.value == pytest.approx(ref, rel=1e-8)


def test_tv_flux_matches_conic_reference():
    d, g, mu = _instance(43, False)
    rep = solve_eulerian(mu, d, full_mask(d), operator_norm_tv(1.0))
    ref = _reference_value(d, g, mu, "tv")
    assert rep.value == pytest.approx(ref, rel=1e-8)
