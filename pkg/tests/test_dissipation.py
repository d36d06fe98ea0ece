from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epsim.dissipation import (
    CGTable,
    Polarization,
    cg_table,
    constraint_residual,
    gamma_from_rates,
    pump_rates,
    solve_polarization,
)
from oracles import cg_squared_table


def test_cg_table_matches_sympy():
    ref = cg_squared_table()
    table = cg_table().entries
    for row, rrow in zip(table, ref):
        assert [F(str(x)) for x in rrow] == list(row)


def test_cg_rows_exact():
    t = cg_table()
    assert all(sum(r) == 1 for r in t.entries)
    assert all(x >= 0 for r in t.entries for x in r)
    # columns are (sigma+, sigma-, pi) = (q=+1, q=-1, q=0)
    assert t.row(0) == (0, 1, 0)
    assert t.row(1) == (0, F(3, 5), F(2, 5))
    assert t.row(2) == (F(1, 10), F(3, 10), F(3, 5))
    assert t.row(3) == (F(3, 10), F(1, 10), F(3, 5))


def test_pump_rates_examples():
    rv = pump_rates(Polarization(F(2, 3), 0, F(1, 3)))
    assert rv.rates == (0, F(2, 15), F(4, 15), F(2, 5))
    assert rv.ratio_string() == "0:1:2:3"
    assert constraint_residual(rv) == 0
    assert pump_rates(Polarization(0, 0, 1)).rates == (0, F(2, 5), F(3, 5), F(3, 5))


def test_constraint_random_simplex():
    rng = np.random.default_rng(0)
    for w in rng.dirichlet([1, 1, 1], size=1000):
        w = w / w.sum()
        rv = pump_rates(Polarization(*(F(float(x)) for x in w)))
        assert abs(float(np.dot([1, -3, 3, -1], rv.as_array()))) <= 1e-14


def test_polarization_validation():
    with pytest.raises(ValueError):
        Polarization(0.5, 0.6, 0)
    with pytest.raises(ValueError):
        Polarization(-0.1, 0.6, 0.5)
    with pytest.raises(ValueError):
        Polarization.from_sequence([1, 0])
    assert Polarization("2/3", "0", "1/3").sigma_plus == F(2, 3)


def test_solve_examples():
    s = solve_polarization([0, 1, 2, 3])
    assert s.feasible and s.polarization.as_tuple() == (F(2, 3), 0, F(1, 3))
    assert s.scale == pytest.approx(7.5)
    s2 = solve_polarization([0, 2, 4, 6])
    assert s2.polarization == s.polarization and s2.scale == pytest.approx(15.0)
    bad = solve_polarization([1, 0, 0, 0])
    assert not bad.feasible and bad.constraint_residual == 1.0
    assert "constraint" in bad.message
    with pytest.raises(ValueError):
        solve_polarization([0, -1, 2, 3])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=3).filter(lambda w: sum(w) > 1e-3), st.floats(0.1, 50))
def test_solve_round_trip_and_homogeneity(w, k):
    w = np.array(w) / sum(w)
    eps = Polarization(*(F(float(x)) for x in w))
    target = pump_rates(eps).as_array()
    s = solve_polarization(list(target))
    assert s.feasible
    assert np.allclose(pump_rates(s.polarization).as_array() * s.scale, target, atol=1e-8)
    s2 = solve_polarization(list(k * target))
    assert np.allclose(s2.polarization.as_floats(), s.polarization.as_floats(), atol=1e-8)
    assert s2.scale == pytest.approx(k * s.scale, rel=1e-8)


def test_gamma_from_rates_examples():
    g = 2 * np.pi * 2.3e3
    step = 2 * g / 3 / 1e3
    est = gamma_from_rates(np.arange(4) * step, g)
    assert est.gamma == pytest.approx(1.0, abs=1e-12)
    assert gamma_from_rates([0, 1, 2, 3], 1.5e3).gamma == 1.0
    with pytest.raises(ValueError):
        gamma_from_rates([0, 0, 0, 0], g)


def test_gamma_from_measured_reference_rates():
    g = 2 * np.pi * 2.3e3
    sig = [0.3, 0.4, 1.7, 1.8]
    est = gamma_from_rates([0.4, 10.0, 20.4, 30.3], g, sig)
    assert round(est.gamma, 2) == 1.04
    # states |2>..|4> sit inside their quoted error; |1> at 1.33 sigma
    assert np.all(np.abs(est.residuals[1:]) <= np.array(sig[1:]))
    assert abs(est.residuals[0]) <= 2 * sig[0]


def test_cg_table_array():
    assert isinstance(cg_table(), CGTable)
    assert np.allclose(cg_table().as_array().sum(axis=1), 1)
