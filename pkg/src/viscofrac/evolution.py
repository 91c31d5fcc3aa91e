"""Viscous incremental minimization and the discrete Griffith checks.

At each time node the crack is grown by minimizing

    E(t_i; Gamma) + K(Gamma) + eps/2 * sum_m (dl_m)^2 / dt

over tangent arc extensions of constant curvature. Along each extension line
the objective is a smooth function of the added length when it is evaluated on
a morphed copy of one base mesh, and its derivative

    h(d) = kappa(P(d)) - G(d) + eps * dl / dt

is available in closed form through the domain-integral ERR with the exact
morph velocity. The search marches along the line (remeshing when the morph
range is exhausted), brackets the first sign change of h and solves h = 0 with
Brent's method. Objective values stay comparable across remeshes because each
new base inherits the value reached by the previous morph family.
"""
from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO

import numpy as np
from scipy.optimize import brentq

from .err import InfeasibleRadius, VelocityField, build_velocity_field, cutoff_profile, energy_release_rate, radius_limits
from .fem import DisplacementField, energies, load_power, solve_equilibrium
from .geometry import CrackSet, arc_points, check_admissible, discrete_curvature, extend_component, tip_and_tangent
from .mesh import CRACK, CrackedMesh, MeshError, build_mesh
from .model import DomainSpec, LoadTrajectory, MaterialModel  # noqa: F401

CLEARANCE_STOP = "clearance stop"
COMPLETE = "complete"


@dataclass(frozen=True)
class TimeGrid:
    nodes: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.nodes, float).ravel()
        if len(t) < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("time grid must start at 0 and increase strictly")
        object.__setattr__(self, "nodes", t)

    @classmethod
    def uniform(cls, T: float, k: int) -> "TimeGrid":
        return cls(np.linspace(0.0, T, k + 1))

    @property
    def k(self) -> int:
        return len(self.nodes) - 1

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    def refined(self) -> "TimeGrid":
        """Insert midpoints (k doubles)."""
        t = self.nodes
        mid = 0.5 * (t[:-1] + t[1:])
        out = np.empty(2 * len(t) - 1)
        out[0::2], out[1::2] = t, mid
        return TimeGrid(out)


@dataclass
class SearchConfig:
    """Extension search parameters.

    Attributes:
        curvatures: signed curvatures tried at each tip; ``None`` gives
            {-1/eta, -1/(2 eta), 0, 1/(2 eta), 1/eta}.
        dl_min: resolution of the length search (default h/2); growth below it
            is still allowed, it only sets the first probe length.
        dl_max: cap on the length added to one tip in one step (default 10 h).
        morph_fraction: morph range as a fraction of the cutoff radius.
        xtol: absolute tolerance of the root solve.
        max_sweeps: coordinate-descent sweeps over tips.
        workers: threads for independent curvature lines.
    """

    curvatures: tuple | None = None
    dl_min: float | None = None
    dl_max: float | None = None
    morph_fraction: float = 0.15
    xtol: float = 1e-12
    max_sweeps: int = 3
    workers: int = 1

    @classmethod
    def forced_straight(cls, **kw) -> "SearchConfig":
        """The one-dimensional family: straight tangent extensions only."""
        return cls(curvatures=(0.0,), **kw)

    def curvature_set(self, eta: float) -> tuple:
        if self.curvatures is None:
            return (0.0, -0.5 / eta, 0.5 / eta, -1.0 / eta, 1.0 / eta)
        return tuple(sorted((float(c) for c in self.curvatures), key=lambda c: (abs(c), c)))

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class EvolutionContext:
    domain: DomainSpec
    material: MaterialModel
    loads: LoadTrajectory
    h: float
    tip_grading: float = 8.0
    initial: CrackSet | None = None
    solver: str = "direct"


# ---------------------------------------------------------------------------
# states and the morph family
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class _State:
    """Equilibrium of one crack on one mesh at the current time."""

    crack: CrackSet
    mesh: CrackedMesh
    disp: DisplacementField
    E: float
    K: float
    age: float = 0.0  # morph distance accumulated since the mesh was generated


def _solve_state(ctx: EvolutionContext, crack: CrackSet, t: float, mesh: CrackedMesh | None = None,
                 age: float = 0.0) -> _State:
    if mesh is None:
        mesh = build_mesh(ctx.domain, crack, ctx.h, ctx.tip_grading)
        age = 0.0
    disp = solve_equilibrium(mesh, ctx.material, ctx.loads, t, solver=ctx.solver)
    rep = energies(disp, ctx.material, ctx.loads, t, crack)
    return _State(crack, mesh, disp, rep.elastic, rep.surface, age)


def morph_radius(state: _State, m: int, ctx: EvolutionContext) -> float:
    """Support radius of the morph field at tip m: 0.8 of the largest feasible cutoff."""
    _, cap, floor = radius_limits(state.mesh, state.crack, m, ctx.domain)
    r = 0.8 * cap
    if r < floor:
        raise InfeasibleRadius(f"tip too close to boundary/other crack (tip {m})")
    return r


def _project_on_polyline(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Arc-length coordinate of the closest polyline point for each row of x."""
    a, b = v[:-1], v[1:]
    d = b - a
    L = np.linalg.norm(d, axis=1)
    arc = np.concatenate([[0.0], np.cumsum(L)])
    s = np.einsum("nsk,sk->ns", x[:, None, :] - a[None], d) / (L**2)[None]
    s = np.clip(s, 0.0, 1.0)
    q = a[None] + s[..., None] * d[None]
    dist = np.linalg.norm(x[:, None, :] - q, axis=-1)
    k = np.argmin(dist, axis=1)
    return arc[k] + s[np.arange(len(x)), k] * L[k]


class _MorphFamily:
    """Meshes of Gamma_b extended by an arc of curvature c and length d, for small d.

    Nodes near the tip move by phi(|x - P|) (A(d) - P), where A(d) is the arc end;
    nodes on the growing crack slide along the crack curve by phi * d, so the
    morphed crack is exactly the extended one.
    """

    def __init__(self, base: _State, m: int, c: float, radius: float, ctx: EvolutionContext):
        self.base, self.m, self.c, self.ctx = base, m, c, ctx
        mesh = base.mesh
        self.P, self.tau = tip_and_tangent(base.crack, m)
        self.r = radius
        self.r_in = 0.2 * radius
        x0 = mesh.nodes
        self.phi = cutoff_profile(np.linalg.norm(x0 - self.P, axis=1), self.r_in, self.r)[0]
        comp = base.crack.components[m]
        self.poly = comp.vertices
        self.L = comp.length
        on_crack = np.unique(mesh.facets[(mesh.facet_kind == CRACK) & (mesh.facet_owner == m)])
        tipn = mesh.tip_nodes[m]
        on_crack = np.union1d(on_crack, [tipn]) if tipn >= 0 else on_crack
        self.crack_nodes = on_crack[self.phi[on_crack] > 0]
        self.s0 = _project_on_polyline(x0[self.crack_nodes], self.poly) if len(self.crack_nodes) else np.zeros(0)
        self.max_step = base.crack.eta / 10.0

    def prefix_curvature(self) -> float:
        """Largest discrete curvature of the crack polyline inside the morph support."""
        v = self.poly
        if len(v) < 3:
            return 0.0
        k = discrete_curvature(v)
        near = np.linalg.norm(v[1:-1] - self.P, axis=1) < self.r
        return float(k[near].max()) if np.any(near) else 0.0

    def arc_end(self, d: float):
        if d <= 0:
            return self.P.copy(), self.tau.copy()
        pts, t1 = arc_points(self.P, self.tau, self.c, d, self.max_step)
        return pts[-1], t1

    def _curve(self, s: np.ndarray):
        """Points and unit tangents along the base crack continued by the arc."""
        pts = np.empty((len(s), 2))
        tan = np.empty((len(s), 2))
        v = self.poly
        seg = np.diff(v, axis=0)
        L = np.linalg.norm(seg, axis=1)
        arc = np.concatenate([[0.0], np.cumsum(L)])
        inside = s <= self.L
        if np.any(inside):
            si = s[inside]
            k = np.clip(np.searchsorted(arc, si, side="right") - 1, 0, len(L) - 1)
            lam = (si - arc[k]) / L[k]
            pts[inside] = v[k] + lam[:, None] * seg[k]
            tan[inside] = seg[k] / L[k][:, None]
        for i in np.flatnonzero(~inside):
            pts[i], tan[i] = self.arc_end(float(s[i] - self.L))
        return pts, tan

    def crack_at(self, d: float) -> CrackSet:
        return extend_component(self.base.crack, self.m, d, self.c, self.max_step)

    def displacement(self, d: float):
        """Node displacement and its derivative in d (the exact morph velocity)."""
        A, T = self.arc_end(d)
        disp = self.phi[:, None] * (A - self.P)[None]
        vel = self.phi[:, None] * T[None]
        if len(self.crack_nodes):
            n = self.crack_nodes
            s = self.s0 + self.phi[n] * d
            q, tq = self._curve(s)
            disp[n] = q - self.base.mesh.nodes[n]
            vel[n] = self.phi[n][:, None] * tq
        return disp, vel, A, T

    def evaluate(self, d: float, t: float):
        """State, morph-consistent G and tip toughness at added length d."""
        crack = self.crack_at(d)
        disp, vel, A, T = self.displacement(d)
        if d == 0.0:
            state = self.base
            mesh = state.mesh
        else:
            mesh = self.base.mesh.moved(disp)
            state = _solve_state(self.ctx, crack, t, mesh, self.base.age + d)
        vf = VelocityField(mesh, self.m, A, T, self.r, self.r_in, vel)
        G = energy_release_rate(state.disp, self.ctx.material, self.ctx.loads, t, crack, self.m, vf).G
        kap = float(self.ctx.material.kappa(A[None])[0])
        return state, G, kap


@dataclass
class _LineResult:
    m: int
    c: float
    delta: float
    objective: float
    state: _State
    G: float
    kappa: float
    flag: str = ""
    log: list = field(default_factory=list)
    solves: int = 0


def _line_search(base0: _State, m: int, c: float, t: float, dt: float, eps: float,
                 other_pen: float, search: SearchConfig, ctx: EvolutionContext, obj0: float) -> _LineResult:
    """March along one curvature line from the null state and solve h = 0.

    ``obj0`` is the objective of the null state; ``other_pen`` the penalty of the
    other tips (constant along the line).
    """
    dl_max = search.dl_max if search.dl_max is not None else 10.0 * ctx.h
    log = []
    solves = 0
    base = base0
    base_delta = 0.0  # length added at the current base

    def raw_obj(state: _State, total: float) -> float:
        return state.E + state.K + 0.5 * eps * total**2 / dt + other_pen

    offset = obj0 - raw_obj(base0, 0.0)  # stitched minus raw objective on the current mesh
    flag = ""
    feval = {}
    far = None  # furthest evaluated point: (total, state, G, kappa, objective)
    while True:
        try:
            R = morph_radius(base, m, ctx)
        except InfeasibleRadius:
            flag = CLEARANCE_STOP
            break
        room = search.morph_fraction * R - base.age
        if room < 0.25 * search.morph_fraction * R:
            # the mesh is used up: regenerate it for the same crack
            try:
                fresh = _solve_state(ctx, base.crack, t)
            except MeshError:
                flag = CLEARANCE_STOP
                break
            solves += 1
            offset += raw_obj(base, base_delta) - raw_obj(fresh, base_delta)
            base = fresh
            continue
        fam = _MorphFamily(base, m, c, R, ctx)
        hi = min(room, dl_max - base_delta)
        # crack nodes slide along the curve while their neighbours translate, so the
        # sagitta curv * d^2 / 2 shears the tip elements: keep it below a fifth of their size
        curv = max(abs(c), fam.prefix_curvature())
        bent = curv > 0 and 0.5 * curv * hi**2 > 0.2 * base.mesh.tip_size(m)
        if bent:
            hi = math.sqrt(0.4 * base.mesh.tip_size(m) / curv)
        while hi > 1e-9 * ctx.h:
            if check_admissible(fam.crack_at(hi), ctx.domain, ctx.initial).passed:
                break
            hi *= 0.5
            flag = CLEARANCE_STOP
        if hi <= 1e-9 * ctx.h:
            break
        feval = {}

        def h_of(d, fam=fam, feval=feval, base_delta=base_delta, offset=offset):
            nonlocal solves, far
            if d not in feval:
                st, G, kap = fam.evaluate(d, t)
                solves += d != 0.0
                total = base_delta + d
                obj = raw_obj(st, total) + offset
                hv = kap - G + eps * total / dt
                feval[d] = (st, G, kap, hv, obj)
                if far is None or total > far[0]:
                    far = (total, st, G, kap, obj)
                log.append({"m": m, "c": c, "delta": total, "objective": obj, "h": hv})
            return feval[d][3]

        h_hi = None
        while hi > 1e-9 * ctx.h:
            try:
                h_hi = h_of(hi)
                break
            except MeshError:
                # morph too strong: shorten the range, or regenerate a used mesh
                if base.age > 0:
                    break
                hi *= 0.5
        if h_hi is None:
            if base.age > 0:
                base = dataclasses.replace(base, age=math.inf)
                continue
            flag = flag or "mesh inversion"
            break
        if h_hi >= 0:
            if h_of(0.0) >= 0:
                d_star = 0.0
            else:
                d_star = brentq(h_of, 0.0, hi, xtol=search.xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
            st, G, kap, hv, obj = feval[d_star]
            return _LineResult(m, c, base_delta + d_star, obj, st, G, kap, "", log, solves)
        if flag == CLEARANCE_STOP or base_delta + hi >= dl_max - 1e-14:
            break
        # still descending: continue from the end of this range on the morphed mesh
        base = feval[hi][0]
        if bent:
            base = dataclasses.replace(base, age=math.inf)
        base_delta += hi
    if far is None:
        return _LineResult(m, c, 0.0, obj0, base0, math.nan, math.nan, flag or CLEARANCE_STOP, log, solves)
    total, st, G, kap, obj = far
    return _LineResult(m, c, total, obj, st, G, kap, flag or "length cap", log, solves)


# ---------------------------------------------------------------------------
# incremental step
# ---------------------------------------------------------------------------

@dataclass
class IncrementalStepResult:
    crack: CrackSet
    delta_lengths: np.ndarray
    curvatures: np.ndarray
    objective: float
    G: np.ndarray
    G_default: np.ndarray
    kappa: np.ndarray
    energy: dict
    power_left: dict
    power_right: dict
    log: list
    status: str = COMPLETE
    solves: int = 0
    final_state: object = field(default=None, repr=False)


def _tip_kappa(material, crack):
    return np.array([float(material.kappa(c.tip[None])[0]) for c in crack.components])


def _default_G(state: _State, ctx: EvolutionContext, t: float) -> np.ndarray:
    out = np.full(state.crack.M, math.nan)
    for m, comp in enumerate(state.crack.components):
        if comp.length <= 0:
            continue
        try:
            vf = build_velocity_field(state.mesh, state.crack, m, None, ctx.loads, ctx.domain)
        except InfeasibleRadius:
            continue
        out[m] = energy_release_rate(state.disp, ctx.material, ctx.loads, t, state.crack, m, vf).G
    return out


def incremental_step(prev: CrackSet, t_prev: float, t_cur: float, eps: float, search: SearchConfig,
                     ctx: EvolutionContext, start=None) -> IncrementalStepResult:
    """One viscous incremental minimization over tangent arc extensions.

    ``start`` may carry the final state of the previous step; its mesh is then
    reused for the null state, so that energies at successive times are
    evaluated on the same discretization.
    """
    if not t_cur > t_prev:
        raise ValueError("t_cur must exceed t_prev")
    if eps <= 0:
        raise ValueError("eps must be positive")
    dt = t_cur - t_prev
    M = prev.M
    curv = search.curvature_set(prev.eta)
    if start is not None and start.crack is prev:
        state = _solve_state(ctx, prev, t_cur, start.mesh, start.age)
    else:
        state = _solve_state(ctx, prev, t_cur)
    solves = 1
    dl = np.zeros(M)
    cs = np.zeros(M)
    Gm = np.full(M, math.nan)  # morph-consistent G for grown tips
    log = []
    status = COMPLETE

    def pen(dlv):
        return 0.5 * eps * float(np.sum(dlv**2)) / dt

    sweeps = search.max_sweeps if M > 1 else 1
    for sweep in range(sweeps):
        changed = False
        for m in range(M):
            if prev.components[m].length <= 0:
                continue
            # base: tip m reset to its previous arc, the other tips as currently chosen
            if dl[m] > 0:
                base_crack = state.crack.with_component(m, prev.components[m])
                base = _solve_state(ctx, base_crack, t_cur)
                solves += 1
            else:
                base = state
            others = dl.copy()
            others[m] = 0.0
            other_pen = pen(others)
            obj_null = base.E + base.K + other_pen
            log.append({"m": m, "c": 0.0, "delta": 0.0, "objective": obj_null, "h": None, "null": True})
            kap0 = float(ctx.material.kappa(base.crack.components[m].tip[None])[0])
            try:
                vf = build_velocity_field(base.mesh, base.crack, m, None, ctx.loads, ctx.domain)
            except InfeasibleRadius:
                status = CLEARANCE_STOP
                continue
            G0 = energy_release_rate(base.disp, ctx.material, ctx.loads, t_cur, base.crack, m, vf).G
            log[-1]["h"] = kap0 - G0
            best = (obj_null, 0.0, 0, 0.0, base, G0, "")
            if kap0 - G0 < 0:
                def run(c):
                    return _line_search(base, m, c, t_cur, dt, eps, other_pen,
                                        search, ctx, obj_null)
                if search.workers > 1 and len(curv) > 1:
                    with ThreadPoolExecutor(search.workers) as ex:
                        results = list(ex.map(run, curv))
                else:
                    results = [run(c) for c in curv]
                for res in results:  # order of curv is the tie-break order
                    log.extend(res.log)
                    solves += res.solves
                    scale = max(abs(best[0]), 1e-300)
                    if res.objective < best[0] - 1e-12 * scale:
                        best = (res.objective, res.delta, 1, res.c, res.state, res.G, res.flag)
            obj, d, grew, c, st, G, flag = best
            if flag == CLEARANCE_STOP:
                status = CLEARANCE_STOP
            if abs(d - dl[m]) > 1e-14 or (grew and cs[m] != c):
                changed = True
            dl[m], cs[m] = d, c
            Gm[m] = G if grew else math.nan
            state = st
        if not changed:
            break

    crack = state.crack
    Gd = _default_G(state, ctx, t_cur)
    G = np.where(np.isnan(Gm), Gd, Gm)
    rep = energies(state.disp, ctx.material, ctx.loads, t_cur, crack)
    pl = load_power(state.disp, ctx.material, ctx.loads, t_cur, side="left")
    pr = load_power(state.disp, ctx.material, ctx.loads, t_cur, side="right")
    objective = state.E + state.K + pen(dl)
    return IncrementalStepResult(crack, dl, cs, objective, G, Gd, _tip_kappa(ctx.material, crack), rep.to_dict(),
                                 pl, pr, log, status, solves, state)


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

@dataclass
class StepRecord:
    i: int
    t: float
    crack: CrackSet
    lengths: np.ndarray
    tips: np.ndarray
    G: np.ndarray
    G_default: np.ndarray
    kappa: np.ndarray
    E: float
    K: float
    F: float
    power_left: dict
    power_right: dict
    delta_lengths: np.ndarray
    curvatures: np.ndarray
    objective: float
    status: str = COMPLETE
    solves: int = 0
    n_candidates: int = 0

    def to_dict(self) -> dict:
        return {
            "i": self.i, "t": self.t, "crack": self.crack.to_dict(), "lengths": self.lengths.tolist(),
            "tips": self.tips.tolist(), "G": _nan_list(self.G), "G_default": _nan_list(self.G_default),
            "kappa": self.kappa.tolist(), "E": self.E, "K": self.K, "F": self.F,
            "power_left": self.power_left, "power_right": self.power_right,
            "delta_lengths": self.delta_lengths.tolist(), "curvatures": self.curvatures.tolist(),
            "objective": self.objective, "status": self.status, "solves": self.solves,
            "n_candidates": self.n_candidates,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepRecord":
        arr = lambda k: np.array([math.nan if v is None else v for v in d[k]], float)
        return cls(d["i"], d["t"], CrackSet.from_dict(d["crack"]), arr("lengths"), np.array(d["tips"], float),
                   arr("G"), arr("G_default"), arr("kappa"), d["E"], d["K"], d["F"], d["power_left"],
                   d["power_right"], arr("delta_lengths"), arr("curvatures"), d["objective"],
                   d.get("status", COMPLETE), d.get("solves", 0), d.get("n_candidates", 0))


def _nan_list(a):
    return [None if not np.isfinite(v) else float(v) for v in np.asarray(a, float)]


@dataclass
class EvolutionTrace:
    eps: float
    grid: TimeGrid
    steps: list
    status: str = COMPLETE
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.steps])

    @property
    def lengths(self) -> np.ndarray:
        """(n_records, M) lengths at the recorded nodes."""
        return np.array([s.lengths for s in self.steps])

    @property
    def G(self) -> np.ndarray:
        return np.array([s.G for s in self.steps])

    @property
    def kappa(self) -> np.ndarray:
        return np.array([s.kappa for s in self.steps])

    @property
    def F(self) -> np.ndarray:
        return np.array([s.F for s in self.steps])

    def crack_at(self, t: float) -> CrackSet:
        """Piecewise-constant interpolant: Gamma_i on (t_{i-1}, t_i]."""
        ts = self.times
        i = int(np.searchsorted(ts, t, side="left"))
        return self.steps[min(i, len(ts) - 1)].crack

    def length_at(self, t: float) -> np.ndarray:
        """Piecewise-affine interpolant of the lengths."""
        L = self.lengths
        return np.array([np.interp(t, self.times, L[:, m]) for m in range(L.shape[1])])

    def total_growth(self) -> float:
        L = self.lengths
        return float(np.sum(L[-1] - L[0]))

    def header(self) -> dict:
        return {"type": "header", "eps": self.eps, "grid": self.grid.nodes.tolist(), "meta": self.meta}

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header())]
        lines += [json.dumps({"type": "step", **s.to_dict()}) for s in self.steps]
        lines.append(json.dumps({"type": "footer", "status": self.status}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "EvolutionTrace":
        recs = [json.loads(ln) for ln in text.splitlines() if ln.strip()]
        head = recs[0]
        steps = [StepRecord.from_dict(r) for r in recs if r.get("type") == "step"]
        foot = [r for r in recs if r.get("type") == "footer"]
        status = foot[0]["status"] if foot else "incomplete"
        return cls(head["eps"], TimeGrid(np.array(head["grid"])), steps, status, head.get("meta", {}))


def initial_record(gamma0: CrackSet, ctx: EvolutionContext, state=None) -> StepRecord:
    st = state or _solve_state(ctx, gamma0, 0.0)
    G = _default_G(st, ctx, 0.0)
    pr = load_power(st.disp, ctx.material, ctx.loads, 0.0, side="right")
    z = np.zeros(gamma0.M)
    return StepRecord(0, 0.0, gamma0, gamma0.lengths, gamma0.tips, G, G.copy(), _tip_kappa(ctx.material, gamma0),
                      st.E, st.K, st.E + st.K, pr, pr, z, z.copy(), st.E + st.K, COMPLETE, 1, 0)


def resolve_record(crack: CrackSet, t: float, ctx: EvolutionContext, i: int = -1) -> StepRecord:
    """Equilibrium record for a fixed crack at time t on a fresh mesh (no growth)."""
    st = _solve_state(ctx, crack, t)
    G = _default_G(st, ctx, t)
    pl = load_power(st.disp, ctx.material, ctx.loads, t, side="left")
    pr = load_power(st.disp, ctx.material, ctx.loads, t, side="right")
    z = np.zeros(crack.M)
    return StepRecord(i, float(t), crack, crack.lengths, crack.tips, G, G.copy(), _tip_kappa(ctx.material, crack),
                      st.E, st.K, st.E + st.K, pl, pr, z, z.copy(), st.E + st.K, COMPLETE, 1, 0)


def run_discrete_evolution(gamma0: CrackSet, grid: TimeGrid, eps: float, search: SearchConfig,
                           ctx: EvolutionContext, stream: IO[str] | None = None) -> EvolutionTrace:
    """Recursive incremental minimization over the time grid.

    Records are written to ``stream`` as JSON lines while the run progresses.
    The trace stops early with status ``clearance stop`` when a tip can no longer
    grow within the admissible class.
    """
    if ctx.initial is None:
        ctx = EvolutionContext(ctx.domain, ctx.material, ctx.loads, ctx.h, ctx.tip_grading, gamma0, ctx.solver)
    rep = check_admissible(gamma0, ctx.domain)
    if not rep.passed:
        name, st = rep.first_violation
        raise ValueError(f"initial crack is not admissible ({name}: {st.message})")
    trace = EvolutionTrace(float(eps), grid, [], COMPLETE,
                           {"h": ctx.h, "tip_grading": ctx.tip_grading, "search": _jsonable(search.to_dict())})
    if stream is not None:
        stream.write(json.dumps(trace.header()) + "\n")

    def emit(rec):
        trace.steps.append(rec)
        if stream is not None:
            stream.write(json.dumps({"type": "step", **rec.to_dict()}) + "\n")
            stream.flush()

    state = _solve_state(ctx, gamma0, 0.0)
    emit(initial_record(gamma0, ctx, state))
    crack = gamma0
    for i in range(1, grid.k + 1):
        t0, t1 = grid.nodes[i - 1], grid.nodes[i]
        res = incremental_step(crack, t0, t1, eps, search, ctx, start=state)
        state = res.final_state
        if not res.crack.contains(crack):
            raise AssertionError("irreversibility violated")
        rec = StepRecord(i, float(t1), res.crack, res.crack.lengths, res.crack.tips, res.G, res.G_default, res.kappa,
                         res.energy["elastic"], res.energy["surface"], res.energy["total"], res.power_left,
                         res.power_right, res.delta_lengths, res.curvatures, res.objective, res.status, res.solves,
                         len(res.log))
        emit(rec)
        crack = res.crack
        if res.status == CLEARANCE_STOP:
            trace.status = CLEARANCE_STOP
            break
    if stream is not None:
        stream.write(json.dumps({"type": "footer", "status": trace.status}) + "\n")
    return trace


def _jsonable(d):
    return json.loads(json.dumps(d, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o)))


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

@dataclass
class GriffithReport:
    rows: list
    tol: float

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def failures(self) -> list:
        # G2/G3 do not bind where admissibility stopped the growth; G1 always does
        return [r for r in self.rows
                if not r["G1"] or (not r.get("constrained") and not (r["G2"] and r["G3"]))]

    @property
    def constrained(self) -> list:
        return [r for r in self.rows if r.get("constrained")]

    @property
    def max_stationarity(self) -> float:
        """Largest |kappa - G + eps dl/dt| / scale over unconstrained growing tips."""
        vals = [r["stationarity"] for r in self.rows if r["dl"] > 0 and not r.get("constrained")]
        return max(vals) if vals else 0.0

    def to_dict(self):
        return {"tol": self.tol, "passed": self.passed, "rows": self.rows}


def check_discrete_griffith(trace: EvolutionTrace, tol: float = 1e-3) -> GriffithReport:
    """Per step and tip: (G1) dl >= 0 exactly, (G2) one-sided and (G3) complementarity.

    With r = kappa - G + eps dl/dt and scale = kappa2 max(1, dl/dt):
    (G2) r >= -tol scale, (G3) |dl r| <= tol scale. ``stationarity`` is |r|/scale
    on growing tips, a stronger diagnostic than (G3).
    """
    rows = []
    eps = trace.eps
    k2 = None
    for prev, cur in zip(trace.steps[:-1], trace.steps[1:]):
        dt = cur.t - prev.t
        for m in range(len(cur.lengths)):
            dl = float(cur.lengths[m] - prev.lengths[m])
            g1 = dl >= 0 and cur.crack.components[m].has_prefix(prev.crack.components[m])
            kap = float(cur.kappa[m])
            if k2 is None:
                k2 = trace.meta.get("kappa2", None)
            kk2 = float(k2) if k2 is not None else max(float(np.nanmax(trace.kappa)), 1e-300)
            G = float(cur.G[m])
            if not np.isfinite(G):
                if dl == 0:
                    rows.append({"i": cur.i, "m": m, "dl": dl, "G1": g1, "G2": True, "G3": True, "r": None,
                                 "stationarity": 0.0, "note": "no ERR (zero-length or infeasible radius)"})
                    continue
                G = math.inf
            r = kap - G + eps * dl / dt
            scale = kk2 * max(1.0, dl / dt)
            rows.append({"i": cur.i, "m": m, "dl": dl, "G1": bool(g1), "G2": bool(r >= -tol * scale),
                         "G3": bool(abs(dl * r) <= tol * scale), "r": r,
                         "stationarity": abs(r) / scale if dl > 0 else 0.0,
                         "constrained": cur.status == CLEARANCE_STOP})
    return GriffithReport(rows, tol)


@dataclass
class BalanceReport:
    t: np.ndarray
    residual: np.ndarray
    work: np.ndarray
    dissipation: np.ndarray
    bound_lhs: np.ndarray
    bound_rhs: np.ndarray

    @property
    def total_work(self) -> float:
        return float(self.work[-1]) if len(self.work) else 0.0

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual))) if len(self.residual) else 0.0

    @property
    def relative_residual(self) -> float:
        w = abs(self.total_work)
        return self.max_residual / w if w > 0 else (0.0 if self.max_residual == 0 else math.inf)

    def to_dict(self):
        return {"t": self.t.tolist(), "residual": self.residual.tolist(), "work": self.work.tolist(),
                "dissipation": self.dissipation.tolist(), "bound_lhs": self.bound_lhs.tolist(),
                "bound_rhs": self.bound_rhs.tolist(), "relative_residual": self.relative_residual}


def viscous_energy_balance(trace: EvolutionTrace, rule: str = "trapezoid") -> BalanceReport:
    """Residual of the viscous energy balance on the trace sampling.

    residual(t_i) = F(t_i) - F(0) + sum_j (G_j - kappa_j) dl_j - W(t_i), with the
    load work W by the trapezoid rule on the recorded powers. The growth term uses
    the trapezoid rule in time (``rule="trapezoid"``) or the step-end value
    (``rule="right"``), with dl/dt constant on each step. ``bound_lhs`` is
    eps/2 * sum dl^2/dt (the viscous part of the a priori estimate) and
    ``bound_rhs`` is F(0) + W (its right-hand side without the constant-weighted
    terms).
    """
    st = trace.steps
    n = len(st)
    t = np.array([s.t for s in st])
    res = np.zeros(n)
    work = np.zeros(n)
    diss = np.zeros(n)
    vis = np.zeros(n)
    F0 = st[0].F
    for i in range(1, n):
        dt = st[i].t - st[i - 1].t
        work[i] = work[i - 1] + 0.5 * (st[i - 1].power_right["power"] + st[i].power_left["power"]) * dt
        dl = st[i].lengths - st[i - 1].lengths
        grow = dl > 0
        if rule == "trapezoid":
            gap = 0.5 * ((st[i - 1].G - st[i - 1].kappa) + (st[i].G - st[i].kappa))
        else:
            gap = st[i].G - st[i].kappa
        term = float(np.sum((gap * dl)[grow])) if np.any(grow) else 0.0
        diss[i] = diss[i - 1] + term
        vis[i] = vis[i - 1] + 0.5 * trace.eps * float(np.sum(dl**2)) / dt
        res[i] = st[i].F - F0 + diss[i] - work[i]
    return BalanceReport(t, res, work, diss, vis, F0 + work)
