"""Built-in scenarios on the edge-cracked unit square.

Plane strain, lambda = mu = 1, clamped-displacement tension: the bottom and top
edges follow w(t, x) = t (0, 2y - 1). The crack starts on the left edge at
mid-height.
"""
from __future__ import annotations

import copy

from .config import ScenarioConfig, build_config

EDGE_CRACK = {
    "name": "edge-crack",
    "units": "nondimensional",
    "mode": "evolve-viscous",
    "domain": {"polygon": [[0, 0], [1, 0], [1, 1], [0, 1]], "dirichlet_edges": [0, 2], "traction_edges": []},
    "material": {"lambda": 1.0, "mu": 1.0, "kappa": 2.8},
    "loads": {"T": 0.9, "w": {"profile": ["0", "2*y - 1"]}},
    "crack": {"eta": 0.05, "components": [{"vertices": [[0.0, 0.5], [0.3, 0.5]], "origin": "boundary"}]},
    "mesh": {"h": 1.0 / 32, "tip_grading": 8},
    "time": {"k": 16},
    "search": {"curvatures": "straight"},
    "viscosity": {"eps": 1.0, "members": 4},
}

# toughness 2.8 up to the seed tip, a drop to 1.4, then a steep rise to 5.6
JUMP_KAPPA = "max(1.4, min(2.8, 2.8 - 28*(x - 0.3))) + max(0, min(4.2, 420*(x - 0.55)))"


def edge_crack(a: float = 0.3, **over) -> dict:
    raw = copy.deepcopy(EDGE_CRACK)
    raw["crack"]["components"][0]["vertices"] = [[0.0, 0.5], [a, 0.5]]
    return _merge(raw, over)


def subcritical(factor: float = 0.6, **over) -> dict:
    """Edge crack with the displacement scaled down so G stays below kappa1."""
    raw = edge_crack(name="subcritical", **over)
    raw["loads"]["w"]["profile"] = [f"0", f"{factor!r}*(2*y - 1)"]
    return raw


def jump(**over) -> dict:
    """Supercritical scenario: the crack becomes unstable at once and arrests at x ~ 0.55."""
    raw = edge_crack(name="jump")
    raw["material"] = {"lambda": 1.0, "mu": 1.0, "kappa": JUMP_KAPPA, "kappa_bounds": [1.4, 5.6]}
    raw["loads"]["T"] = 0.8
    raw["search"]["dl_max"] = 0.45
    return _merge(raw, over)


def _merge(raw: dict, over: dict) -> dict:
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(raw.get(k), dict):
            _merge(raw[k], v)
        else:
            raw[k] = v
    return raw


SCENARIOS = {"edge-crack": edge_crack, "subcritical": subcritical, "jump": jump}


def scenario(name: str, **over) -> ScenarioConfig:
    return build_config(SCENARIOS[name](**over))
