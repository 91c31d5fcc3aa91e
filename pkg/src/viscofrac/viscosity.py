"""Vanishing-viscosity families, their limit proxy and the arc-length reparametrization.

A family runs the viscous scheme for a ladder eps_j = eps0 2^-j on one time grid.
The limit is represented by the finest member; its jumps (single steps with
growth far above the typical step growth) become plateaus of t~ when the trace
is reparametrized by sigma = t + sum_m (l^m - l0^m).
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .evolution import (EvolutionContext, EvolutionTrace, GriffithReport, SearchConfig, StepRecord, TimeGrid,
                        check_discrete_griffith, resolve_record, run_discrete_evolution)
from .geometry import CrackSet, hausdorff_distance

SLOPE_FLOOR = 1e-6
CONVERGED = "converged"
NO_CERTIFICATE = "no Cauchy certificate"


def default_eps0(kappa2: float, dt: float, dl_max: float) -> float:
    """eps0 making the first-step penalty eps dl^2/(2 dt) equal kappa2 dl at dl = dl_max."""
    return 2.0 * kappa2 * dt / dl_max


def epsilon_ladder(eps0: float, members: int = 4) -> list:
    if eps0 <= 0 or members < 1:
        raise ValueError("need eps0 > 0 and at least one member")
    return [eps0 * 2.0**-j for j in range(members)]


@dataclass
class ViscousFamily:
    """Traces for a strictly decreasing sequence of viscosities."""

    members: list  # [(eps, EvolutionTrace)]

    def __post_init__(self):
        eps = [e for e, _ in self.members]
        if any(b >= a for a, b in zip(eps[:-1], eps[1:])):
            raise ValueError("viscosities must decrease strictly")

    @property
    def eps(self) -> list:
        return [e for e, _ in self.members]

    @property
    def traces(self) -> list:
        return [tr for _, tr in self.members]

    @property
    def finest(self) -> EvolutionTrace:
        return self.members[-1][1]

    def invariant_violations(self, tol: float = 1e-3) -> list:
        """Members whose trace fails the discrete Griffith check."""
        return [e for e, tr in self.members if not check_discrete_griffith(tr, tol).passed]


def run_family(gamma0: CrackSet, grid: TimeGrid, eps_values, search: SearchConfig, ctx: EvolutionContext,
               workers: int = 1, streams=None) -> ViscousFamily:
    """Run one discrete evolution per eps; members are independent and may run concurrently."""
    eps_values = sorted((float(e) for e in eps_values), reverse=True)
    streams = streams or [None] * len(eps_values)

    def one(k):
        return run_discrete_evolution(gamma0, grid, eps_values[k], search, ctx, streams[k])

    if workers > 1 and len(eps_values) > 1:
        with ThreadPoolExecutor(min(workers, len(eps_values))) as ex:
            traces = list(ex.map(one, range(len(eps_values))))
    else:
        traces = [one(k) for k in range(len(eps_values))]
    return ViscousFamily(list(zip(eps_values, traces)))


# ---------------------------------------------------------------------------
# viscous Griffith conditions
# ---------------------------------------------------------------------------

def rate_norm(trace: EvolutionTrace) -> float:
    """eps * ||l'||_2^2 for the piecewise-affine length interpolant."""
    t = trace.times
    L = trace.lengths
    if len(t) < 2:
        return 0.0
    dl = np.diff(L, axis=0)
    dt = np.diff(t)[:, None]
    return float(trace.eps * np.sum(dl**2 / dt))


@dataclass
class ViscousGriffithReport:
    eps: list
    reports: list  # GriffithReport per member
    rate_norms: list
    trend_band: float = 0.2

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    @property
    def sup_rate_norm(self) -> float:
        return max(self.rate_norms) if self.rate_norms else 0.0

    @property
    def trend_ok(self) -> bool:
        """eps ||l'||^2 does not increase along the ladder beyond the noise band."""
        v = self.rate_norms
        return all(b <= (1 + self.trend_band) * a + 1e-300 for a, b in zip(v[:-1], v[1:]))

    def to_dict(self):
        return {"eps": self.eps, "passed": self.passed, "rate_norms": self.rate_norms,
                "sup_rate_norm": self.sup_rate_norm, "trend_ok": self.trend_ok,
                "reports": [r.to_dict() for r in self.reports]}


def viscous_griffith_check(family: ViscousFamily, tol: float = 1e-3) -> ViscousGriffithReport:
    reps = [check_discrete_griffith(tr, tol) for tr in family.traces]
    return ViscousGriffithReport(family.eps, reps, [rate_norm(tr) for tr in family.traces])


# ---------------------------------------------------------------------------
# jumps and the limit proxy
# ---------------------------------------------------------------------------

@dataclass
class Jump:
    i: int  # step index: growth happened on (t_{i-1}, t_i]
    t0: float
    t1: float
    tips: list
    l_minus: list
    l_plus: list

    @property
    def mass(self) -> float:
        return float(np.sum(np.subtract(self.l_plus, self.l_minus)))

    def to_dict(self):
        return dict(self.__dict__, mass=self.mass)


def jump_threshold(trace: EvolutionTrace, dl_min: float) -> float:
    """5 (median step growth + dl_min), the median over all steps and tips."""
    L = trace.lengths
    if len(L) < 2:
        return math.inf
    dl = np.diff(L, axis=0)
    return 5.0 * (float(np.median(dl)) + dl_min)


def detect_jumps(trace: EvolutionTrace, dl_min: float, threshold: float | None = None) -> list:
    thr = jump_threshold(trace, dl_min) if threshold is None else threshold
    L = trace.lengths
    out = []
    for i in range(1, len(L)):
        dl = L[i] - L[i - 1]
        big = np.flatnonzero(dl > thr)
        if len(big):
            out.append(Jump(i, float(trace.steps[i - 1].t), float(trace.steps[i].t), big.tolist(),
                            L[i - 1].tolist(), L[i].tolist()))
    return out


def _in_jump_set(t: float, windows) -> bool:
    return any(a < t <= b for a, b in windows)


@dataclass
class LimitResult:
    proxy: EvolutionTrace
    eps: float
    certificates: list  # sup_t d_H(Gamma_j, Gamma_{j+1}) outside the jump set
    jump_windows: list
    jumps: list  # of the proxy
    threshold: float
    hausdorff_tol: float
    status: str
    g2_continuity: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_dict(self):
        return {"eps": self.eps, "certificates": self.certificates, "jump_windows": self.jump_windows,
                "jumps": [j.to_dict() for j in self.jumps], "threshold": self.threshold,
                "hausdorff_tol": self.hausdorff_tol, "status": self.status,
                "g2_continuity": self.g2_continuity}


def extract_limit(family: ViscousFamily, hausdorff_tol: float, dl_min: float, domain_diameter: float,
                  g2_tol: float = 1e-2) -> LimitResult:
    """Finest member as the limit proxy with a Cauchy certificate over the ladder.

    Times in the jump set of any member are excluded from the certificate. The
    family converges when the certificate of the finest pair is within
    ``hausdorff_tol``; otherwise the status says so.
    """
    if len(family.members) < 3:
        raise ValueError("the limit needs at least three family members")
    traces = family.traces
    windows = set()
    for tr in traces:
        for j in detect_jumps(tr, dl_min):
            windows.add((j.t0, j.t1))
    windows = sorted(windows)
    times = sorted(set(np.concatenate([tr.times for tr in traces]).tolist()))
    certs = []
    for a, b in zip(traces[:-1], traces[1:]):
        end = min(a.times[-1], b.times[-1])
        sup = 0.0
        for t in times:
            if t > end or _in_jump_set(t, windows):
                continue
            sup = max(sup, hausdorff_distance(a.crack_at(t), b.crack_at(t), diameter=domain_diameter))
        certs.append(sup)
    status = CONVERGED if certs[-1] <= hausdorff_tol else NO_CERTIFICATE
    proxy = family.finest
    k2 = float(np.nanmax(proxy.kappa)) if len(proxy.steps) else 1.0
    g2 = []
    for s in proxy.steps:
        if _in_jump_set(s.t, windows):
            continue
        gap = np.asarray(s.kappa) - np.asarray(s.G)
        for m, v in enumerate(gap):
            if np.isfinite(v) and v < -g2_tol * k2:
                g2.append({"i": s.i, "t": s.t, "m": m, "kappa_minus_G": float(v)})
    return LimitResult(proxy, family.eps[-1], certs, [list(w) for w in windows], detect_jumps(proxy, dl_min),
                       jump_threshold(proxy, dl_min), hausdorff_tol, status, g2)


# ---------------------------------------------------------------------------
# parametrized evolution
# ---------------------------------------------------------------------------

@dataclass
class ParametrizedTrace:
    """Nodes of the reparametrized evolution; affine in sigma between nodes.

    ``t_prime`` and ``l_prime`` hold the slopes of the piece ending at each node
    (node 0 carries the slopes of the first piece). ``records`` keep the full
    equilibrium data (G, kappa, energies, powers) at each node, and ``kind``
    tells recorded steps from plateau re-solves.
    """

    sigma: np.ndarray
    t: np.ndarray
    lengths: np.ndarray
    t_prime: np.ndarray
    l_prime: np.ndarray
    records: list
    kind: list

    @property
    def S(self) -> float:
        return float(self.sigma[-1])

    @property
    def G(self) -> np.ndarray:
        return np.array([r.G for r in self.records])

    @property
    def kappa(self) -> np.ndarray:
        return np.array([r.kappa for r in self.records])

    @property
    def piece_t_prime(self) -> np.ndarray:
        return self.t_prime[1:]

    @property
    def piece_l_prime(self) -> np.ndarray:
        return self.l_prime[1:]

    def identity_error(self) -> float:
        """max |t~' + sum_m l~^m' - 1| over the samples."""
        if len(self.t_prime) == 0:
            return 0.0
        return float(np.max(np.abs(self.t_prime + self.l_prime.sum(axis=1) - 1.0)))

    def plateau_length(self, floor: float = SLOPE_FLOOR) -> float:
        dsig = np.diff(self.sigma)
        return float(np.sum(dsig[self.piece_t_prime <= floor]))

    def to_dict(self):
        return {"sigma": self.sigma.tolist(), "t": self.t.tolist(), "lengths": self.lengths.tolist(),
                "t_prime": self.t_prime.tolist(), "l_prime": self.l_prime.tolist(), "kind": self.kind,
                "records": [r.to_dict() for r in self.records]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ParametrizedTrace":
        return cls(np.array(d["sigma"]), np.array(d["t"]), np.array(d["lengths"]), np.array(d["t_prime"]),
                   np.array(d["l_prime"]), [StepRecord.from_dict(r) for r in d["records"]], list(d["kind"]))

    def write_csv(self, path) -> None:
        """Plot data: sigma, t, l_m, G_m, kappa_m (one row per node)."""
        M = self.lengths.shape[1]
        head = (["sigma", "t"] + [f"l_{m}" for m in range(M)] + [f"G_{m}" for m in range(M)]
                + [f"kappa_{m}" for m in range(M)])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(head)
            for k, r in enumerate(self.records):
                w.writerow([repr(float(self.sigma[k])), repr(float(self.t[k]))]
                           + [repr(float(v)) for v in self.lengths[k]]
                           + ["" if not np.isfinite(v) else repr(float(v)) for v in r.G]
                           + [repr(float(v)) for v in r.kappa])


def _parametrize(records: list, kinds: list) -> ParametrizedTrace:
    t = np.array([r.t for r in records], float)
    L = np.array([r.lengths for r in records], float)
    n, M = L.shape
    dt = np.diff(t)
    dl = np.diff(L, axis=0)
    dl[(dl < 0) & (dl > -1e-10)] = 0.0  # truncation round-off
    if np.any(dt < 0) or np.any(dl < 0):
        raise ValueError("time and lengths must be nondecreasing along the records")
    dsig = dt + dl.sum(axis=1)
    keep = np.concatenate([[True], dsig > 0])
    if not keep.all():
        # repeated nodes carry no sigma length
        return _parametrize([r for r, k in zip(records, keep) if k], [c for c, k in zip(kinds, keep) if k])
    sigma = np.concatenate([[0.0], np.cumsum(dsig)])
    tp = np.ones(n)
    lp = np.zeros((n, M))
    if n > 1:
        tp[1:] = dt / dsig
        lp[1:] = dl / dsig[:, None]
        tp[0], lp[0] = tp[1], lp[1]
    return ParametrizedTrace(sigma, t, L, tp, lp, list(records), list(kinds))


def reparametrize(trace: EvolutionTrace) -> ParametrizedTrace:
    """sigma(t) = t + sum_m (l^m(t) - l0^m), inverted exactly on each affine piece."""
    return _parametrize(trace.steps, ["step"] * len(trace.steps))


def _truncate_to(crack: CrackSet, lengths) -> CrackSet:
    comps = tuple(c.truncated(float(l)) for c, l in zip(crack.components, lengths))
    return CrackSet(comps, crack.eta)


def parametrize_limit(limit: LimitResult, ctx: EvolutionContext, plateau_samples: int = 8,
                      workers: int = 1) -> ParametrizedTrace:
    """Reparametrize the limit proxy with each jump collapsed onto a plateau.

    A jump on (t_{i-1}, t_i] becomes: time advance to t_i with the crack frozen,
    then growth at fixed t = t_i through ``plateau_samples`` proportional
    truncations of Gamma_i, each re-solved at t_i.
    """
    steps = limit.proxy.steps
    jumps = {j.i: j for j in limit.jumps}
    jobs = []  # (insert-before index, crack, t)
    for i, j in jumps.items():
        lo = np.asarray(j.l_minus)
        hi = np.asarray(j.l_plus)
        for q in range(plateau_samples):
            theta = q / plateau_samples
            jobs.append((i, _truncate_to(steps[i].crack, lo + theta * (hi - lo)), steps[i].t))

    def solve(job):
        _, crack, t = job
        return resolve_record(crack, t, ctx)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as ex:
            solved = list(ex.map(solve, jobs))
    else:
        solved = [solve(jb) for jb in jobs]
    extra = {}
    for (i, _, _), rec in zip(jobs, solved):
        extra.setdefault(i, []).append(rec)
    records, kinds = [], []
    for k, s in enumerate(steps):
        for rec in extra.get(k, []):
            records.append(rec)
            kinds.append("plateau")
        records.append(s)
        kinds.append("step")
    return _parametrize(records, kinds)


@dataclass
class ParamGriffithReport:
    tol: float
    slope_floor: float
    rows: list
    balance_residual: np.ndarray
    balance_work: np.ndarray

    @property
    def failures(self) -> list:
        return [r for r in self.rows if not r["ok"]]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def relative_balance(self) -> float:
        w = float(np.max(np.abs(self.balance_work))) if len(self.balance_work) else 0.0
        r = float(np.max(np.abs(self.balance_residual))) if len(self.balance_residual) else 0.0
        return r / w if w > 0 else (0.0 if r == 0 else math.inf)

    def to_dict(self):
        return {"tol": self.tol, "slope_floor": self.slope_floor, "passed": self.passed, "rows": self.rows,
                "balance_residual": self.balance_residual.tolist(), "balance_work": self.balance_work.tolist(),
                "relative_balance": self.relative_balance}


def parametrized_griffith_check(p: ParametrizedTrace, tol: float = 1e-2, slope_floor: float = SLOPE_FLOOR,
                                kappa2: float | None = None) -> ParamGriffithReport:
    """(pG1)-(pG4) on each affine piece and the energy balance in sigma.

    (pG2)/(pG3) are evaluated at the right end of a piece; (pG4) at both ends of
    a plateau piece. Tolerances scale with kappa2.
    """
    G = p.G
    K = p.kappa
    k2 = float(kappa2) if kappa2 is not None else max(float(np.nanmax(K)), 1e-300)
    band = tol * k2
    rows = []
    for j in range(1, len(p.sigma)):
        tp = float(p.t_prime[j])
        lp = p.l_prime[j]
        row = {"piece": j, "sigma": [float(p.sigma[j - 1]), float(p.sigma[j])], "t_prime": tp,
               "l_prime": lp.tolist(), "clauses": []}
        ok = bool(tp >= 0 and np.all(lp >= 0))
        row["clauses"].append("pG1")
        if tp > slope_floor:
            row["clauses"].append("pG2")
            ok &= bool(np.all(~np.isfinite(G[j]) | (G[j] <= K[j] + band)))
            grow = lp > slope_floor
            if np.any(grow):
                row["clauses"].append("pG3")
                ok &= bool(np.all(np.abs(G[j][grow] - K[j][grow]) <= band))
        else:
            row["clauses"].append("pG4")
            grow = lp > slope_floor
            ok &= bool(np.any(grow))
            for e in (j - 1, j):
                ok &= bool(np.all(G[e][grow] >= K[e][grow] - band))
            row["G_minus_kappa"] = [(G[e][grow] - K[e][grow]).tolist() for e in (j - 1, j)]
        row["ok"] = ok
        rows.append(row)
    res, work = _sigma_balance(p)
    return ParamGriffithReport(tol, slope_floor, rows, res, work)


def _sigma_balance(p: ParametrizedTrace):
    """Residual F(s) - F(0) - W(s) + D(s) by the trapezoid rule in sigma.

    On a piece, t~' dsigma = dt and l~' dsigma = dl, so the load work uses the
    one-sided powers at the piece ends and the growth term the averaged G - kappa.
    """
    recs = p.records
    n = len(recs)
    res = np.zeros(n)
    work = np.zeros(n)
    diss = 0.0
    for j in range(1, n):
        a, b = recs[j - 1], recs[j]
        dsig = p.sigma[j] - p.sigma[j - 1]
        dt = p.t_prime[j] * dsig
        work[j] = work[j - 1] + 0.5 * (a.power_right["power"] + b.power_left["power"]) * dt
        dl = p.l_prime[j] * dsig
        gap = 0.5 * ((a.G - a.kappa) + (b.G - b.kappa))
        grow = dl > 0
        diss += float(np.sum((gap * dl)[grow])) if np.any(grow) else 0.0
        res[j] = b.F - recs[0].F + diss - work[j]
    return res, work
