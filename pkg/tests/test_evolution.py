import io

import numpy as np
import pytest

from viscofrac.evolution import (EvolutionTrace, SearchConfig, TimeGrid, check_discrete_griffith,
                                 incremental_step, resolve_record, run_discrete_evolution,
                                 viscous_energy_balance)
from viscofrac.scenarios import scenario

COARSE = {"mesh": {"h": 1 / 20, "tip_grading": 8}, "time": {"k": 8}}


@pytest.fixture(scope="module")
def growth():
    cfg = scenario("edge-crack", **COARSE)
    stream = io.StringIO()
    tr = run_discrete_evolution(cfg.crack, cfg.grid, cfg.eps, cfg.search, cfg.context(), stream)
    return cfg, tr, stream.getvalue()


def test_time_grid():
    g = TimeGrid.uniform(1.0, 4)
    assert g.k == 4 and g.T == 1.0
    assert g.refined().k == 8
    with pytest.raises(ValueError):
        TimeGrid(np.array([0.0, 0.5, 0.5, 1.0]))


def test_curvature_set_orders_straight_first():
    assert SearchConfig().curvature_set(0.1)[0] == 0.0
    assert len(SearchConfig().curvature_set(0.1)) == 5
    assert SearchConfig.forced_straight().curvature_set(0.1) == (0.0,)


def test_growth_occurs_and_is_irreversible(growth):
    _, tr, _ = growth
    assert tr.total_growth() > 0
    for a, b in zip(tr.steps[:-1], tr.steps[1:]):
        assert b.crack.contains(a.crack)
        assert np.all(b.lengths >= a.lengths)


def test_discrete_griffith_holds(growth):
    _, tr, _ = growth
    rep = check_discrete_griffith(tr, 1e-3)
    assert rep.passed, rep.failures[:3]
    assert rep.max_stationarity <= 1e-3


def test_energy_balance_small(growth):
    _, tr, _ = growth
    assert viscous_energy_balance(tr).relative_residual < 1e-2


def test_stream_matches_trace(growth):
    _, tr, text = growth
    back = EvolutionTrace.from_jsonl(text)
    assert back.status == tr.status
    np.testing.assert_array_equal(back.lengths, tr.lengths)
    np.testing.assert_array_equal(back.times, tr.times)
    again = EvolutionTrace.from_jsonl(tr.to_jsonl())
    assert [s.to_dict() for s in again.steps] == [s.to_dict() for s in tr.steps]


def test_subcritical_load_gives_no_growth():
    cfg = scenario("subcritical", **COARSE)
    tr = run_discrete_evolution(cfg.crack, cfg.grid, cfg.eps, cfg.search, cfg.context())
    assert tr.total_growth() == 0.0
    assert np.all(np.nan_to_num(tr.G) < tr.kappa)


def test_step_growth_is_stationary():
    # a single step from the seed: kappa - G + eps dl/dt vanishes on the grown tip
    cfg = scenario("edge-crack", **COARSE)
    ctx = cfg.context()
    res = incremental_step(cfg.crack, 0.8, 0.9, 1.0, cfg.search, ctx)
    dl = res.delta_lengths[0]
    assert dl > 0
    r = res.kappa[0] - res.G[0] + 1.0 * dl / 0.1
    assert abs(r) <= 1e-3 * res.kappa[0] * max(1.0, dl / 0.1)


def test_resolve_record_has_no_growth():
    cfg = scenario("edge-crack", **COARSE)
    rec = resolve_record(cfg.crack, 0.5, cfg.context(), i=3)
    assert rec.i == 3 and rec.t == 0.5
    assert np.all(rec.delta_lengths == 0)
    assert rec.G[0] > 0


def test_step_rejects_bad_arguments():
    cfg = scenario("edge-crack", **COARSE)
    with pytest.raises(ValueError):
        incremental_step(cfg.crack, 0.5, 0.5, 1.0, cfg.search, cfg.context())
    with pytest.raises(ValueError):
        incremental_step(cfg.crack, 0.5, 0.6, 0.0, cfg.search, cfg.context())
