import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epsim.eplocate import (
    DIABOLIC,
    EXCEPTIONAL,
    DegenerateFamilyError,
    analytic_q0_gammas,
    classify_degeneracy,
    locate_ep_on_scan,
    reduced_invariants,
    trace_ep2_curve,
)
from epsim.model import HamiltonianSpec, build_general, hamiltonian
from epsim.numerics import DEFAULT_CLUSTER_TOL, char_poly, eigendecompose


def sym(J1, J2, gamma=0.0):
    return HamiltonianSpec(g=1.0, J=(J1, J2, J1), gamma_scale=gamma)


def test_reduced_invariants_examples():
    r = reduced_invariants(1, 1, 1)
    assert abs(r.P) < 1e-15 and abs(r.Q) < 1e-15
    assert abs(reduced_invariants(1, 0, 0.5).Q) < 1e-15


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 3), st.floats(0, 2), st.floats(0, 2))
def test_reduced_invariants_match_charpoly(gam, J1, J2):
    c = char_poly(build_general(sym(J1, J2, gam))).coeffs
    r = reduced_invariants(gam, J1, J2)
    assert abs(c[2] - r.P) <= 1e-12 * max(1, abs(r.P))
    assert abs(c[4] - r.Q) <= 1e-12 * max(1, abs(r.Q))
    assert abs(c[1]) <= 1e-12 and abs(c[3]) <= 1e-12


def test_classify_examples():
    (d,) = classify_degeneracy(np.array([[0, 1], [0, 0]]))
    assert (d.eigenvalue, d.algebraic_mult, d.geometric_mult, d.kind) == (0, 2, 1, EXCEPTIONAL)
    M = build_general(HamiltonianSpec(g=1.0, J=(0, 0.5, 0), gamma_scale=0.0))
    (d,) = classify_degeneracy(M)
    assert (d.eigenvalue, d.algebraic_mult, d.geometric_mult, d.kind) == (0, 2, 2, DIABOLIC)
    (d,) = classify_degeneracy(build_general(sym(1, 1, 1)))
    assert (d.eigenvalue, d.algebraic_mult, d.geometric_mult, d.kind) == (0, 4, 1, EXCEPTIONAL)
    assert classify_degeneracy(np.diag([1.0, 2.0, 3.0])) == []


def test_locate_ep4():
    recs = locate_ep_on_scan(sym(1, 1), "gamma", (0.5, 1.5))
    assert len(recs) == 1
    r = recs[0]
    assert abs(r.params["gamma"] - 1) <= 1e-6
    assert (r.algebraic_mult, r.geometric_mult, r.kind) == (4, 1, EXCEPTIONAL)
    assert r.bracket_width <= 1e-8


@pytest.mark.parametrize(
    "J1,J2,expect",
    [
        (0.59, 0.68, (0.3419171699, 1.0180828301)),
        (0.71, 0.60, (0.4145728, 0.9901663)),
    ],
)
def test_locate_ep2_pairs(J1, J2, expect):
    recs = locate_ep_on_scan(sym(J1, J2), "gamma", (0.1, 1.2))
    gams = sorted({round(r.params["gamma"], 6) for r in recs})
    assert len(gams) == 2
    assert np.allclose(gams, expect, atol=2e-6)
    assert all(r.kind == EXCEPTIONAL and r.algebraic_mult == 2 and r.geometric_mult == 1 for r in recs)


def test_q0_oracle_values():
    g = analytic_q0_gammas(0.59, 0.68)
    assert np.allclose(g, [0.3419171699, 1.0180828301], atol=1e-9)
    for x in g:
        assert abs(reduced_invariants(x, 0.59, 0.68).Q) < 1e-14


def test_records_satisfy_gap_invariant():
    tmpl = sym(0.81, 0.83)
    for r in locate_ep_on_scan(tmpl, "gamma", (0.1, 1.2)):
        es = eigendecompose(hamiltonian(tmpl.with_axis("gamma", r.params["gamma"])))
        assert es.min_gap <= 10 * es.cluster_tol
        assert r.bracket_width <= 1e-8
    for end in (0.1, 1.2):
        assert eigendecompose(hamiltonian(tmpl.with_axis("gamma", end))).min_gap > DEFAULT_CLUSTER_TOL


def test_no_ep_is_empty_list():
    assert locate_ep_on_scan(sym(1, 1), "gamma", (0.0, 0.5)) == []


def test_degenerate_family_error():
    spec = HamiltonianSpec(g=1.0, J=(0, 0, 0), gamma_scale=0.0)
    with pytest.raises(DegenerateFamilyError):
        locate_ep_on_scan(spec, "J2", (0.0, 1.0))


def test_locate_along_coupling_axis():
    recs = locate_ep_on_scan(sym(1.0, 1.0, gamma=1.0), "J", (0.5, 1.5))
    assert any(abs(r.params["J"] - 1) < 1e-6 and r.algebraic_mult == 4 for r in recs)


def test_locate_rejects_bad_input():
    with pytest.raises(ValueError):
        locate_ep_on_scan(sym(1, 1), "gamma", (1.0, 0.5))
    with pytest.raises(ValueError):
        locate_ep_on_scan(sym(1, 1), "nope", (0.0, 1.0))
    with pytest.raises(ValueError):
        locate_ep_on_scan(sym(1, 1), "gamma", (0.0, 1.0), tol=0)


def test_trace_q0_branch():
    cur = trace_ep2_curve("Q0", 1.0, np.arange(101) / 100)
    J1, J2 = cur.points.T
    assert np.max(np.abs(J2 - (J1**2 + 1) / 2)) <= 1e-8
    assert cur.terminal is not None
    assert cur.terminal.algebraic_mult == 4 and cur.terminal.kind == EXCEPTIONAL
    for a, b in [(0, 0.5), (0.59, 0.674), (0.81, 0.828)]:
        k = int(np.argmin(np.abs(J1 - a)))
        assert abs(J2[k] - b) < 1e-3


def test_trace_p24q_branch():
    cur = trace_ep2_curve("P24Q", 1.0, np.arange(101) / 100)
    J1, J2 = cur.points.T
    for a, b in zip(J1, J2):
        r = reduced_invariants(1.0, a, b)
        assert abs(r.P**2 - 4 * r.Q) <= 1e-10
    # the branch crosses J2 = 0 at J1 = 1/sqrt(3)
    fine = trace_ep2_curve("P24Q", 1.0, [1 / math.sqrt(3)])
    assert abs(fine.points[0, 1]) < 1e-6
    assert cur.terminal is not None and cur.terminal.params["J1"] == 1.0


def test_trace_errors():
    with pytest.raises(ValueError):
        trace_ep2_curve("XX", 1.0, [0.1])
    with pytest.raises(ValueError):
        trace_ep2_curve("Q0", 0.0, [0.1])


def test_kind_diabolic_at_zero_gamma():
    M = hamiltonian(sym(0.0, 0.5, 0.0))
    kinds = {d.kind for d in classify_degeneracy(M)}
    assert kinds == {DIABOLIC}


def test_ep_record_dict():
    r = locate_ep_on_scan(sym(1, 1), "gamma", (0.5, 1.5))[0].to_dict()
    assert r["eigenvalue"] == {"re": 0.0, "im": 0.0}
    assert r["kind"] == EXCEPTIONAL
