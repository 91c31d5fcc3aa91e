import csv

import numpy as np
import pytest

from viscofrac.evolution import EvolutionTrace, StepRecord, TimeGrid
from viscofrac.viscosity import (ParametrizedTrace, ViscousFamily, ViscousGriffithReport, _parametrize,
                                 default_eps0, detect_jumps, epsilon_ladder, extract_limit,
                                 parametrized_griffith_check, rate_norm, reparametrize)

from conftest import edge_crack


def record(i, t, a, G=1.0, kappa=2.0, power=0.0):
    c = edge_crack(a)
    z = np.zeros(1)
    p = {"power": power}
    return StepRecord(i, t, c, c.lengths, c.tips, np.array([G]), np.array([G]), np.array([kappa]),
                      0.0, kappa * a, kappa * a, p, p, z, z.copy(), 0.0)


def trace(times, lengths, eps=1.0, **kw):
    steps = [record(i, t, a, **kw) for i, (t, a) in enumerate(zip(times, lengths))]
    return EvolutionTrace(eps, TimeGrid(np.asarray(times, float)), steps)


def test_ladder():
    assert epsilon_ladder(1.0, 4) == [1.0, 0.5, 0.25, 0.125]
    assert default_eps0(2.0, 0.1, 0.4) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        epsilon_ladder(0.0)


def test_family_requires_decreasing_eps():
    tr = trace([0, 1], [0.3, 0.3])
    with pytest.raises(ValueError):
        ViscousFamily([(1.0, tr), (1.0, tr)])


def test_unit_speed_growth_closed_form():
    # l = 0.3 + t gives sigma = 2t and t~' = l~' = 1/2
    t = np.linspace(0, 0.2, 5)
    p = reparametrize(trace(t, 0.3 + t))
    np.testing.assert_allclose(p.sigma, 2 * t, atol=1e-15)
    np.testing.assert_allclose(p.t_prime, 0.5)
    np.testing.assert_allclose(p.l_prime[:, 0], 0.5)
    assert p.identity_error() < 1e-14
    assert p.S == pytest.approx(0.4)


def test_no_growth_is_identity_map():
    t = np.linspace(0, 1, 6)
    p = reparametrize(trace(t, np.full(6, 0.3)))
    np.testing.assert_allclose(p.sigma, t)
    np.testing.assert_allclose(p.t_prime, 1.0)
    assert p.plateau_length() == 0.0


def test_rate_norm():
    t = np.linspace(0, 1, 5)
    assert rate_norm(trace(t, 0.3 + 0.1 * t, eps=2.0)) == pytest.approx(2.0 * 0.01)


def test_trend_band():
    assert ViscousGriffithReport([1, 0.5], [], [1.0, 1.15]).trend_ok
    assert not ViscousGriffithReport([1, 0.5], [], [1.0, 1.3]).trend_ok


def test_jump_detection():
    t = np.linspace(0, 1, 11)
    L = 0.3 + 0.001 * t
    L[6:] += 0.2
    jumps = detect_jumps(trace(t, L), dl_min=0.001)
    assert len(jumps) == 1
    j = jumps[0]
    assert j.i == 6 and (j.t0, j.t1) == (pytest.approx(0.5), pytest.approx(0.6))
    assert j.mass == pytest.approx(0.2001, abs=1e-9)


def test_limit_needs_three_members():
    t = np.linspace(0, 1, 3)
    fam = ViscousFamily([(1.0, trace(t, [0.3] * 3)), (0.5, trace(t, [0.3] * 3))])
    with pytest.raises(ValueError):
        extract_limit(fam, 0.01, 0.001, 1.5)


def test_limit_certificate():
    t = np.linspace(0, 1, 5)
    fam = ViscousFamily([(e, trace(t, 0.3 + d * t)) for e, d in ((1.0, 0.04), (0.5, 0.02), (0.25, 0.01))])
    lim = extract_limit(fam, 0.015, 1e-3, np.sqrt(2))
    np.testing.assert_allclose(lim.certificates, [0.02, 0.01], atol=1e-9)
    assert lim.converged and lim.eps == 0.25
    assert not extract_limit(fam, 0.005, 1e-3, np.sqrt(2)).converged


def _plateau(G_end):
    recs = [record(0, 0.0, 0.3, G=1.0), record(1, 0.5, 0.3, G=2.0), record(2, 0.5, 0.4, G=G_end),
            record(3, 1.0, 0.4, G=1.5)]
    return _parametrize(recs, ["step", "step", "plateau", "step"])


def test_parametrized_clauses():
    p = _plateau(2.0)
    assert p.plateau_length() == pytest.approx(0.1)
    rep = parametrized_griffith_check(p, tol=1e-2)
    assert [r["clauses"][-1] for r in rep.rows] == ["pG2", "pG4", "pG2"]
    assert rep.passed
    # G below kappa at the end of the plateau violates pG4
    bad = parametrized_griffith_check(_plateau(1.5), tol=1e-2)
    assert [r["piece"] for r in bad.failures] == [2]


def test_decreasing_length_rejected():
    with pytest.raises(ValueError):
        reparametrize(trace([0, 1], [0.3, 0.2]))


def test_json_and_csv(tmp_path):
    p = _plateau(2.0)
    q = ParametrizedTrace.from_dict(__import__("json").loads(p.to_json()))
    np.testing.assert_array_equal(q.sigma, p.sigma)
    assert q.kind == p.kind
    path = tmp_path / "p.csv"
    p.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["sigma", "t", "l_0", "G_0", "kappa_0"]
    assert len(rows) == 5
    assert float(rows[3][0]) == pytest.approx(0.6)
