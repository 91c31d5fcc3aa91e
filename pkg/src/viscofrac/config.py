"""Scenario configuration files (JSON or TOML) and their validation.

Validation collects every problem it can find before failing, so a broken
config is reported in one pass.
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evolution import EvolutionContext, SearchConfig, TimeGrid
from .expressions import Expression, ExpressionError, VectorExpression
from .geometry import BOUNDARY, INTERIOR, CrackComponent, CrackSet, GeometryError, check_admissible
from .model import DomainSpec, LoadTrajectory, MaterialModel, ModelError, TimeScale

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

MODES = ("solve-once", "err-only", "evolve-viscous", "evolve-vv", "parametrize")
ORIGINS = {"boundary": BOUNDARY, "interior": INTERIOR}


class ConfigError(ValueError):
    """All schema violations found in a config."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n  - " + "\n  - ".join(self.errors))


@dataclass
class ScenarioConfig:
    name: str
    units: str
    mode: str
    domain: DomainSpec
    material: MaterialModel
    material_source: dict
    loads: LoadTrajectory
    crack: CrackSet
    h: float
    tip_grading: float
    grid: TimeGrid
    search: SearchConfig
    eps: float
    eps0: float | None
    members: int
    hausdorff_tol: float
    plateau_samples: int
    slope_floor: float
    griffith_tol: float
    param_tol: float
    err_radii: list | None
    out_dir: Path
    source_bytes: bytes = field(repr=False, default=b"")
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.source_bytes).hexdigest()

    def context(self, solver: str = "direct") -> EvolutionContext:
        return EvolutionContext(self.domain, self.material, self.loads, self.h, self.tip_grading, self.crack, solver)

    def with_mode(self, mode: str) -> "ScenarioConfig":
        if mode not in MODES:
            raise ConfigError([f"unknown mode {mode!r} (expected one of {', '.join(MODES)})"])
        from dataclasses import replace
        return replace(self, mode=mode)


def _get(d, key, errors, where, kind=None, default=...):
    if key not in d:
        if default is ...:
            errors.append(f"missing required key '{where}{key}'")
        return None if default is ... else default
    v = d[key]
    if kind is not None and not isinstance(v, kind):
        errors.append(f"'{where}{key}' has the wrong type ({type(v).__name__})")
        return None if default is ... else default
    return v


def _number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _validation_grid(domain: DomainSpec, n: int = 41) -> np.ndarray:
    p = domain.polygon
    lo, hi = p.min(axis=0), p.max(axis=0)
    xs, ys = np.meshgrid(np.linspace(lo[0], hi[0], n), np.linspace(lo[1], hi[1], n))
    pts = np.column_stack([xs.ravel(), ys.ravel()])
    inside = domain.contains(pts)
    return np.vstack([pts[inside], p])


def _scale(spec, T, errors, where):
    """A TimeScale from {times, values}; a missing spec means the ramp s(t) = t."""
    if spec is None:
        return TimeScale(np.array([0.0, max(T, 1e-300)]), np.array([0.0, max(T, 1e-300)]))
    times = spec.get("times")
    values = spec.get("values")
    if not isinstance(times, list) or not isinstance(values, list) or len(times) != len(values) or not times:
        errors.append(f"'{where}' needs equal-length nonempty 'times' and 'values' lists")
        return None
    if not all(_number(v) for v in times + values):
        errors.append(f"'{where}' samples must be numbers")
        return None
    t = np.array(times, float)
    if np.any(np.diff(t) <= 0):
        errors.append(f"'{where}.times' must increase strictly")
        return None
    gaps = []
    if t[0] > 0:
        gaps.append(f"[0, {t[0]:g})")
    if t[-1] < T:
        gaps.append(f"({t[-1]:g}, {T:g}]")
    if gaps:
        errors.append(f"'{where}' samples cover [{t[0]:g}, {t[-1]:g}] but not [0, T]: gap {' and '.join(gaps)}")
        return None
    return TimeScale(t, np.array(values, float))


def _field(src, errors, where, vector=False):
    try:
        return VectorExpression(src) if vector else Expression(src)
    except (ExpressionError, TypeError) as exc:
        errors.append(f"'{where}': {exc}")
        return None


def build_config(raw: dict, base_dir: Path | str = ".", source_bytes: bytes | None = None) -> ScenarioConfig:
    """Validate a parsed config mapping; raises ConfigError listing every violation."""
    errors = []
    base_dir = Path(base_dir)
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a mapping"])
    if source_bytes is None:
        source_bytes = json.dumps(raw, sort_keys=True).encode()
    name = str(raw.get("name", "scenario"))
    units = str(raw.get("units", "nondimensional"))
    mode = raw.get("mode", "evolve-viscous")
    if mode not in MODES:
        errors.append(f"unknown mode {mode!r} (expected one of {', '.join(MODES)})")

    # domain
    dom = _get(raw, "domain", errors, "", dict, {})
    domain = None
    poly = _get(dom, "polygon", errors, "domain.", list)
    dir_edges = _get(dom, "dirichlet_edges", errors, "domain.", list)
    trac_edges = _get(dom, "traction_edges", errors, "domain.", list, [])
    if poly is not None and dir_edges is not None:
        try:
            domain = DomainSpec(np.array(poly, float), tuple(dir_edges), tuple(trac_edges or ()))
        except (ModelError, ValueError) as exc:
            errors.append(f"domain: {exc}")

    # material
    mat = _get(raw, "material", errors, "", dict, {})
    fields = {}
    for key in ("lambda", "mu", "kappa"):
        v = _get(mat, key, errors, "material.")
        if v is not None:
            fields[key] = _field(v, errors, f"material.{key}")
    bounds = mat.get("kappa_bounds")
    material = None
    if bounds is not None and (not isinstance(bounds, list) or len(bounds) != 2 or not all(_number(b) for b in bounds)):
        errors.append("'material.kappa_bounds' must be a pair of numbers")
        bounds = None
    if bounds is not None and bounds[0] > bounds[1]:
        errors.append(f"(H4) violated: kappa1 = {bounds[0]} exceeds kappa2 = {bounds[1]}")
    if bounds is not None and bounds[0] <= 0:
        errors.append(f"(H4) violated: kappa1 = {bounds[0]} must be positive")
    if domain is not None and all(fields.get(k) is not None for k in ("lambda", "mu", "kappa")):
        pts = _validation_grid(domain)
        lam, mu, kap = (fields[k](pts) for k in ("lambda", "mu", "kappa"))
        bad_mu = np.flatnonzero(~(mu > 0))
        if len(bad_mu):
            errors.append(f"(H3) violated: mu <= 0 at {len(bad_mu)} validation points, e.g. {pts[bad_mu[0]].tolist()}")
        bad = np.flatnonzero(~(lam + mu > 0))
        if len(bad):
            errors.append(f"(H3) violated: lambda + mu <= 0 at {len(bad)} validation points, "
                          f"e.g. {pts[bad[0]].tolist()}")
        if not np.all(np.isfinite(kap)):
            errors.append("(H4) violated: kappa is not finite on the validation grid")
        elif bounds is None:
            bounds = [float(kap.min()), float(kap.max())]
            if bounds[0] <= 0:
                errors.append(f"(H4) violated: kappa reaches {bounds[0]:g} <= 0")
        elif bounds[0] <= bounds[1]:
            out = np.flatnonzero((kap < bounds[0] - 1e-12) | (kap > bounds[1] + 1e-12))
            if len(out):
                errors.append(f"(H4) violated: kappa = {kap[out[0]]:g} outside [{bounds[0]}, {bounds[1]}] "
                              f"at {pts[out[0]].tolist()}")
        if not any("(H" in e for e in errors):
            material = MaterialModel(fields["lambda"], fields["mu"], fields["kappa"], tuple(bounds))

    # loads
    ld = _get(raw, "loads", errors, "", dict, {})
    T = _get(ld, "T", errors, "loads.")
    if T is not None and (not _number(T) or T <= 0):
        errors.append("'loads.T' must be a positive number")
        T = None
    loads = None
    parts = {}
    for key in ("w", "f", "g"):
        spec = ld.get(key)
        if spec is None:
            parts[key] = (None, None)
            continue
        if isinstance(spec, list):
            spec = {"profile": spec}
        if not isinstance(spec, dict) or "profile" not in spec:
            errors.append(f"'loads.{key}' needs a 'profile' pair of expressions")
            continue
        prof = _field(spec["profile"], errors, f"loads.{key}.profile", vector=True)
        sc = _scale(spec.get("scale"), T, errors, f"loads.{key}.scale") if T is not None else None
        parts[key] = (prof, sc)
    if "w" not in ld:
        errors.append("missing required key 'loads.w'")
    if T is not None and not errors:
        zero = lambda x: np.zeros((np.asarray(x).shape[0], 2))
        w, f, g = parts["w"], parts["f"], parts["g"]
        if g[0] is not None and domain is not None and not domain.traction_edges:
            errors.append("'loads.g' given but the domain has no traction edges")
        loads = LoadTrajectory(float(T), w[1], w[0], f[1], f[0] or zero, g[1], g[0] or zero)

    # crack
    cr = _get(raw, "crack", errors, "", dict, {})
    eta = _get(cr, "eta", errors, "crack.")
    if eta is not None and (not _number(eta) or eta <= 0):
        errors.append("'crack.eta' must be a positive number")
        eta = None
    comps_raw = None
    if "file" in cr:
        path = base_dir / str(cr["file"])
        if not path.is_file():
            errors.append(f"crack file not found: {path}")
        else:
            try:
                comps_raw = json.loads(path.read_text())["components"]
            except (OSError, ValueError, KeyError) as exc:
                errors.append(f"cannot read crack file {path}: {exc}")
    else:
        comps_raw = _get(cr, "components", errors, "crack.", list)
    crack = None
    if comps_raw is not None and eta is not None:
        comps = []
        for k, c in enumerate(comps_raw):
            try:
                v = np.array(c["vertices"], float)
                origin = c.get("origin", "boundary")
                origin = ORIGINS.get(origin, origin)
                L = float(np.sum(np.linalg.norm(np.diff(v, axis=0), axis=1)))
                comps.append(CrackComponent(v, float(c.get("frozen_prefix_len", L)), origin))
            except (KeyError, TypeError, ValueError, GeometryError) as exc:
                errors.append(f"crack.components[{k}]: {exc}")
        if comps and len(comps) == len(comps_raw):
            crack = CrackSet(tuple(comps), float(eta))
            if domain is not None:
                rep = check_admissible(crack, domain)
                if not rep.passed:
                    nm, st = rep.first_violation
                    errors.append(f"initial crack is not admissible ({nm}: {st.message})")

    # discretization and search
    mesh = raw.get("mesh", {})
    h = mesh.get("h", 1.0 / 32)
    grading = mesh.get("tip_grading", 8.0)
    if not _number(h) or h <= 0:
        errors.append("'mesh.h' must be a positive number")
    if eta is not None and _number(h) and h > eta:
        errors.append(f"'mesh.h' = {h} exceeds eta = {eta}: the load lift would reach the crack clearance zone")
    if not _number(grading) or grading < 1:
        errors.append("'mesh.tip_grading' must be a number >= 1")
    tm = raw.get("time", {})
    grid = None
    if "nodes" in tm:
        try:
            grid = TimeGrid(np.array(tm["nodes"], float))
        except ValueError as exc:
            errors.append(f"time.nodes: {exc}")
    else:
        k = tm.get("k", 16)
        if not isinstance(k, int) or k < 1:
            errors.append("'time.k' must be a positive integer")
        elif T is not None:
            grid = TimeGrid.uniform(float(T), k)
    if grid is not None and T is not None and abs(grid.T - T) > 1e-12:
        errors.append(f"time grid ends at {grid.T:g}, not at T = {T:g}")
    se = raw.get("search", {})
    curv = se.get("curvatures", "default")
    if curv == "default":
        curv = None
    elif curv == "straight":
        curv = (0.0,)
    elif not (isinstance(curv, list) and curv and all(_number(c) for c in curv)):
        errors.append("'search.curvatures' must be 'default', 'straight' or a list of numbers")
        curv = None
    elif eta is not None and any(abs(c) > 1.0 / eta + 1e-12 for c in curv):
        errors.append(f"'search.curvatures' exceed the bound 1/eta = {1.0 / eta:g}")
    search = SearchConfig(tuple(curv) if curv is not None else None, se.get("dl_min"), se.get("dl_max"),
                          float(se.get("morph_fraction", 0.15)), float(se.get("xtol", 1e-12)),
                          int(se.get("max_sweeps", 3)), int(se.get("workers", 1)))

    vi = raw.get("viscosity", {})
    eps = vi.get("eps", 1.0)
    if not _number(eps) or eps <= 0:
        errors.append("'viscosity.eps' must be positive")
    eps0 = vi.get("eps0")
    if eps0 is not None and (not _number(eps0) or eps0 <= 0):
        errors.append("'viscosity.eps0' must be positive")
    members = vi.get("members", 4)
    if not isinstance(members, int) or members < 3:
        errors.append("'viscosity.members' must be an integer >= 3")

    radii = raw.get("err", {}).get("radii")
    out = raw.get("output", {}).get("dir", f"runs/{name}")

    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(
        name, units, mode, domain, material, {k: mat[k] for k in ("lambda", "mu", "kappa")}, loads, crack,
        float(h), float(grading), grid, search, float(eps), None if eps0 is None else float(eps0), members,
        float(vi.get("hausdorff_tol", 2.0 * float(h))), int(vi.get("plateau_samples", 8)),
        float(vi.get("slope_floor", 1e-6)), float(vi.get("griffith_tol", 1e-3)), float(vi.get("param_tol", 2e-2)),
        radii, (base_dir / out) if not Path(out).is_absolute() else Path(out), source_bytes, raw)


def parse_config(path) -> ScenarioConfig:
    """Read and validate a .json or .toml scenario file."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    try:
        if path.suffix.lower() == ".toml":
            raw = tomllib.loads(data.decode())
        else:
            raw = json.loads(data)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError([f"cannot parse {path.name}: {exc}"]) from None
    return build_config(raw, path.parent, data)
