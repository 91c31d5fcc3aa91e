import json

import numpy as np
import pytest

from viscofrac.config import MODES, ConfigError, build_config, parse_config
from viscofrac.scenarios import edge_crack, jump, scenario


def errors_of(raw):
    with pytest.raises(ConfigError) as ei:
        build_config(raw)
    return ei.value.errors


def test_builtin_scenarios_valid():
    for name in ("edge-crack", "subcritical", "jump"):
        cfg = scenario(name)
        assert cfg.grid.T == pytest.approx(cfg.loads.T)
        assert cfg.members >= 3


def test_all_errors_reported_together():
    raw = edge_crack()
    raw["material"]["mu"] = -1.0
    raw["mesh"]["h"] = 0.5
    del raw["loads"]["w"]
    errs = errors_of(raw)
    assert any("(H3)" in e for e in errs)
    assert any("mesh.h" in e for e in errs)
    assert any("loads.w" in e for e in errs)


def test_h3_lambda_plus_mu():
    raw = edge_crack()
    raw["material"]["lambda"] = "-2 + x"
    assert any("(H3)" in e and "lambda + mu" in e for e in errors_of(raw))


def test_h4_bounds():
    raw = edge_crack()
    raw["material"]["kappa_bounds"] = [3.0, 2.0]
    assert any("(H4)" in e for e in errors_of(raw))
    raw["material"]["kappa_bounds"] = [1.0, 2.0]
    assert any("(H4)" in e and "outside" in e for e in errors_of(raw))
    raw = edge_crack()
    raw["material"]["kappa"] = "x - 0.5"
    assert any("(H4)" in e for e in errors_of(raw))


def test_inferred_kappa_bounds():
    cfg = build_config(jump())
    assert cfg.material.kappa_bounds == (1.4, 5.6)
    assert build_config(edge_crack()).material.kappa_bounds == (2.8, 2.8)


def test_load_gap_message():
    raw = edge_crack()
    raw["loads"]["w"]["scale"] = {"times": [0.1, 0.5], "values": [0.1, 0.5]}
    errs = errors_of(raw)
    assert any("gap [0, 0.1)" in e and "(0.5, 0.9]" in e for e in errs)


def test_bad_expression_and_mode():
    raw = edge_crack(mode="nope")
    raw["material"]["mu"] = "exp(x)"
    errs = errors_of(raw)
    assert any("unknown mode" in e for e in errs)
    assert any("exp" in e for e in errs)


def test_inadmissible_crack():
    raw = edge_crack()
    raw["crack"]["components"][0]["vertices"] = [[0.0, 0.5], [0.3, 0.5], [0.3, 0.8], [0.1, 0.3]]
    assert any("not admissible" in e for e in errors_of(raw))


def test_curvature_bound_and_members():
    raw = edge_crack()
    raw["search"]["curvatures"] = [0, 50]
    raw["viscosity"]["members"] = 2
    errs = errors_of(raw)
    assert any("1/eta" in e for e in errs)
    assert any("members" in e for e in errs)


def test_missing_crack_file(tmp_path):
    raw = edge_crack()
    raw["crack"] = {"eta": 0.05, "file": "absent.json"}
    with pytest.raises(ConfigError, match="crack file not found"):
        build_config(raw, tmp_path)


def test_json_toml_and_hash(tmp_path):
    p = tmp_path / "a.json"
    p.write_text(json.dumps(edge_crack()))
    a = parse_config(p)
    b = parse_config(p)
    assert a.config_hash == b.config_hash and len(a.config_hash) == 64
    t = parse_config("configs/edge_crack.toml")
    assert t.name == "edge-crack" and t.h == pytest.approx(1 / 32)
    np.testing.assert_allclose(t.loads.w(0.45, np.array([[0.0, 1.0]])), [[0.0, 0.45]])


def test_with_mode():
    cfg = scenario("edge-crack")
    assert cfg.with_mode("solve-once").mode == "solve-once"
    assert set(MODES) >= {"solve-once", "err-only", "evolve-viscous", "evolve-vv", "parametrize"}
