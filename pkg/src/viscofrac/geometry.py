"""Admissible crack geometry: polyline cracks with bounded curvature.

Each crack component is an arc-length parametrized polyline starting at its
anchor (a boundary point or the split point of an interior seed) and ending at
its tip. Growth only ever appends vertices after the current tip, so the
initial (frozen) prefix is never touched.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

BOUNDARY = "boundary-anchored"
INTERIOR = "interior-split"
ORIGIN_KINDS = (BOUNDARY, INTERIOR)

SNAP_TOL = 1e-12


class GeometryError(ValueError):
    """Structural defect in a crack description (not an admissibility failure)."""


# ---------------------------------------------------------------------------
# elementary computational geometry
# ---------------------------------------------------------------------------

def point_segment_distance(points, a, b):
    """Distances between every point and every segment [a_j, b_j].

    Returns an array of shape (len(points), len(a)).
    """
    p = np.asarray(points, float).reshape(-1, 2)[:, None, :]
    a = np.asarray(a, float).reshape(-1, 2)[None, :, :]
    b = np.asarray(b, float).reshape(-1, 2)[None, :, :]
    d = b - a
    dd = np.einsum("ijk,ijk->ij", d, d)
    s = np.einsum("ijk,ijk->ij", p - a, d) / np.where(dd > 0, dd, 1.0)
    s = np.clip(s, 0.0, 1.0)
    q = a + s[..., None] * d
    return np.linalg.norm(p - q, axis=-1)


def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def segment_intersections(a0, a1, b0, b1, tol=SNAP_TOL):
    """Boolean matrix: does segment i of (a0, a1) touch segment j of (b0, b1)?

    Touching within ``tol`` counts as intersecting (snap tolerance).
    """
    a0 = np.asarray(a0, float).reshape(-1, 2)[:, None, :]
    a1 = np.asarray(a1, float).reshape(-1, 2)[:, None, :]
    b0 = np.asarray(b0, float).reshape(-1, 2)[None, :, :]
    b1 = np.asarray(b1, float).reshape(-1, 2)[None, :, :]
    o1 = _orient(a0, a1, b0)
    o2 = _orient(a0, a1, b1)
    o3 = _orient(b0, b1, a0)
    o4 = _orient(b0, b1, a1)
    proper = (o1 * o2 < 0) & (o3 * o4 < 0)
    # near-touching configurations (endpoints on the other segment, collinear overlaps)
    near = np.zeros(proper.shape, bool)
    A0 = np.broadcast_to(a0, proper.shape + (2,))
    A1 = np.broadcast_to(a1, proper.shape + (2,))
    B0 = np.broadcast_to(b0, proper.shape + (2,))
    B1 = np.broadcast_to(b1, proper.shape + (2,))
    for p, s0, s1 in ((A0, B0, B1), (A1, B0, B1), (B0, A0, A1), (B1, A0, A1)):
        near |= _point_seg_dist_elementwise(p, s0, s1) <= tol
    return proper | near


def _point_seg_dist_elementwise(p, a, b):
    d = b - a
    dd = np.einsum("...k,...k->...", d, d)
    s = np.einsum("...k,...k->...", p - a, d) / np.where(dd > 0, dd, 1.0)
    s = np.clip(s, 0.0, 1.0)
    return np.linalg.norm(p - (a + s[..., None] * d), axis=-1)


def segment_segment_distance(a0, a1, b0, b1):
    """Exact distance matrix between two families of segments."""
    a0 = np.asarray(a0, float).reshape(-1, 2)
    a1 = np.asarray(a1, float).reshape(-1, 2)
    b0 = np.asarray(b0, float).reshape(-1, 2)
    b1 = np.asarray(b1, float).reshape(-1, 2)
    d = np.minimum.reduce([
        point_segment_distance(a0, b0, b1),
        point_segment_distance(a1, b0, b1),
        point_segment_distance(b0, a0, a1).T,
        point_segment_distance(b1, a0, a1).T,
    ])
    hit = segment_intersections(a0, a1, b0, b1, tol=0.0)
    d[hit] = 0.0
    return d


def points_in_polygon(points, polygon):
    """Even-odd ray casting; points on the boundary are reported unreliably."""
    p = np.asarray(points, float).reshape(-1, 2)
    v = np.asarray(polygon, float)
    w = np.roll(v, -1, axis=0)
    x, y = p[:, 0:1], p[:, 1:2]
    cond = (v[None, :, 1] > y) != (w[None, :, 1] > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = v[None, :, 0] + (y - v[None, :, 1]) * (w[None, :, 0] - v[None, :, 0]) / (w[None, :, 1] - v[None, :, 1])
    cross = cond & (x < xint)
    return (np.count_nonzero(cross, axis=1) % 2) == 1


def polygon_edges(polygon):
    v = np.asarray(polygon, float)
    return v, np.roll(v, -1, axis=0)


def distance_to_polygon_boundary(points, polygon):
    a, b = polygon_edges(polygon)
    return point_segment_distance(points, a, b).min(axis=1)


def _polygon_of(domain) -> np.ndarray:
    if domain is None:
        return None
    return np.asarray(getattr(domain, "polygon", domain), float)


def _rot90(v):
    v = np.asarray(v, float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


# ---------------------------------------------------------------------------
# crack components
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CrackComponent:
    """One arc Gamma^m of the crack, stored as a polyline from anchor to tip.

    Attributes:
        vertices: (n, 2) array, anchor first, tip last.
        frozen_prefix_len: arc length of the initial-crack portion.
        origin_kind: ``BOUNDARY`` or ``INTERIOR``.
        tip_tangent: exact unit tangent at the tip when the last piece is an arc
            produced by :func:`arc_points`; ``None`` means last-segment direction.
    """

    vertices: np.ndarray
    frozen_prefix_len: float = 0.0
    origin_kind: str = BOUNDARY
    tip_tangent: np.ndarray | None = None

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        if self.tip_tangent is not None:
            t = np.asarray(self.tip_tangent, float).reshape(2)
            t = t / np.linalg.norm(t)
            t.setflags(write=False)
            object.__setattr__(self, "tip_tangent", t)
        if self.origin_kind not in ORIGIN_KINDS:
            raise GeometryError(f"unknown origin_kind {self.origin_kind!r}")
        if not np.all(np.isfinite(v)) or len(v) == 0:
            raise GeometryError("crack vertices must be finite and non-empty")
        seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
        if np.any(seg <= SNAP_TOL):
            k = int(np.argmin(seg))
            raise GeometryError(f"degenerate polyline: zero-length segment at vertex {k} {v[k].tolist()}")
        if self.frozen_prefix_len < -SNAP_TOL or self.frozen_prefix_len > seg.sum() + 1e-9:
            raise GeometryError("frozen_prefix_len outside [0, length]")

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)

    @property
    def arc_lengths(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.segment_lengths)])

    @property
    def length(self) -> float:
        return float(self.segment_lengths.sum())

    @property
    def anchor(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def tip(self) -> np.ndarray:
        return self.vertices[-1]

    @property
    def nsegments(self) -> int:
        return len(self.vertices) - 1

    def last_segment_direction(self) -> np.ndarray:
        d = self.vertices[-1] - self.vertices[-2]
        return d / np.linalg.norm(d)

    @property
    def tangent(self) -> np.ndarray:
        if self.tip_tangent is not None:
            return np.array(self.tip_tangent)
        if self.nsegments == 0:
            raise GeometryError("a single-point component has no tangent")
        return self.last_segment_direction()

    def point_at(self, s: float) -> np.ndarray:
        """Point at arc length ``s`` (clamped to the component)."""
        arc = self.arc_lengths
        s = min(max(s, 0.0), arc[-1])
        k = int(np.clip(np.searchsorted(arc, s, side="right") - 1, 0, max(self.nsegments - 1, 0)))
        if self.nsegments == 0:
            return self.vertices[0].copy()
        lam = (s - arc[k]) / (arc[k + 1] - arc[k])
        return (1 - lam) * self.vertices[k] + lam * self.vertices[k + 1]

    def truncated(self, length: float) -> "CrackComponent":
        """Prefix of arc length ``length`` (never shorter than the frozen prefix)."""
        length = max(length, self.frozen_prefix_len)
        arc = self.arc_lengths
        if length >= arc[-1] - SNAP_TOL:
            return self
        k = int(np.searchsorted(arc, length, side="right"))
        pts = list(self.vertices[:k])
        end = self.point_at(length)
        if np.linalg.norm(end - pts[-1]) > 1e-12:
            pts.append(end)
        elif len(pts) > 1:
            pts[-1] = end
        direction = self.vertices[k] - self.vertices[k - 1]
        return CrackComponent(np.array(pts), self.frozen_prefix_len, self.origin_kind,
                              tip_tangent=direction / np.linalg.norm(direction))

    def extended(self, new_points, tip_tangent=None) -> "CrackComponent":
        if len(new_points) == 0:
            return self
        v = np.vstack([self.vertices, np.asarray(new_points, float).reshape(-1, 2)])
        return CrackComponent(v, self.frozen_prefix_len, self.origin_kind, tip_tangent)

    def has_prefix(self, other: "CrackComponent", tol: float = 1e-12) -> bool:
        """True when ``other`` is an initial piece of this component.

        All vertices of ``other`` but its tip must be vertices of this component;
        the tip may also sit inside the matching segment (a truncation).
        """
        n = len(other.vertices)
        if n > len(self.vertices):
            return False
        if not np.all(np.abs(self.vertices[:n - 1] - other.vertices[:n - 1]) <= tol):
            return False
        if np.all(np.abs(self.vertices[n - 1] - other.vertices[-1]) <= tol):
            return True
        if n < 2:
            return False
        d = point_segment_distance(other.vertices[-1:], self.vertices[n - 2:n - 1], self.vertices[n - 1:n])
        return bool(d[0, 0] <= max(tol, 1e-12))

    def sample(self, step: float, start: float = 0.0) -> np.ndarray:
        """Points every ``step`` (or closer) of arc length from ``start``, vertices included."""
        arc = self.arc_lengths
        if self.nsegments == 0:
            return self.vertices.copy()
        out = []
        for k in range(self.nsegments):
            a, b = arc[k], arc[k + 1]
            if b < start - SNAP_TOL:
                continue
            lo = max(a, start)
            n = max(1, int(math.ceil((b - lo) / step)))
            s = np.linspace(lo, b, n + 1)
            lam = ((s - a) / (b - a))[:, None]
            out.append((1 - lam) * self.vertices[k] + lam * self.vertices[k + 1])
        return np.unique(np.vstack(out), axis=0) if out else self.vertices[-1:].copy()

    def free_part(self) -> np.ndarray:
        """Vertices of the portion beyond the frozen prefix (may be a single point)."""
        arc = self.arc_lengths
        s0 = self.frozen_prefix_len
        if s0 >= arc[-1] - SNAP_TOL:
            return self.vertices[-1:].copy()
        k = int(np.searchsorted(arc, s0, side="right"))
        start = self.point_at(s0)
        rest = self.vertices[k:]
        if np.linalg.norm(rest[0] - start) <= SNAP_TOL:
            return rest.copy()
        return np.vstack([start, rest])

    def frozen_part(self) -> np.ndarray:
        return self.truncated(self.frozen_prefix_len).vertices if self.frozen_prefix_len > 0 else self.vertices[:1].copy()

    def to_dict(self) -> dict:
        d = {
            "vertices": self.vertices.tolist(),
            "frozen_prefix_len": float(self.frozen_prefix_len),
            "origin_kind": self.origin_kind,
        }
        if self.tip_tangent is not None:
            d["tip_tangent"] = self.tip_tangent.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CrackComponent":
        return cls(np.array(d["vertices"], float), float(d.get("frozen_prefix_len", 0.0)),
                   d.get("origin_kind", BOUNDARY), d.get("tip_tangent"))


@dataclass(frozen=True, eq=False)
class CrackSet:
    """Union of M crack components sharing the admissibility radius ``eta``."""

    components: tuple
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if self.eta <= 0:
            raise GeometryError("eta must be positive")

    @property
    def M(self) -> int:
        return len(self.components)

    def __getitem__(self, m) -> CrackComponent:
        return self.components[m]

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([c.length for c in self.components])

    @property
    def tips(self) -> np.ndarray:
        return np.array([c.tip for c in self.components])

    def with_component(self, m: int, comp: CrackComponent) -> "CrackSet":
        comps = list(self.components)
        comps[m] = comp
        return replace(self, components=tuple(comps))

    def contains(self, other: "CrackSet") -> bool:
        """Prefix inclusion component by component (irreversibility)."""
        return self.M == other.M and all(a.has_prefix(b) for a, b in zip(self.components, other.components))

    def segments(self):
        """(a, b, owner) arrays over all segments of all components."""
        a, b, owner = [], [], []
        for m, c in enumerate(self.components):
            if c.nsegments:
                a.append(c.vertices[:-1])
                b.append(c.vertices[1:])
                owner.append(np.full(c.nsegments, m))
        if not a:
            return np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0, int)
        return np.vstack(a), np.vstack(b), np.concatenate(owner)

    def to_dict(self) -> dict:
        return {"eta": float(self.eta), "components": [c.to_dict() for c in self.components]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "CrackSet":
        return cls(tuple(CrackComponent.from_dict(c) for c in d["components"]), float(d["eta"]))

    @classmethod
    def from_json(cls, s: str) -> "CrackSet":
        return cls.from_dict(json.loads(s))


def split_interior_seed(vertices, split_index: int, eta: float) -> list[CrackComponent]:
    """Split an interior seed polyline at vertex ``split_index`` into two components.

    Both halves start at the split point, which therefore lies in both frozen
    prefixes, and run outward to the two tips.
    """
    v = np.asarray(vertices, float)
    if not 0 < split_index < len(v) - 1:
        raise GeometryError("split point must be an interior vertex of the seed")
    first = v[split_index::-1]
    second = v[split_index:]
    out = []
    for half in (first, second):
        L = float(np.linalg.norm(np.diff(half, axis=0), axis=1).sum())
        out.append(CrackComponent(half, L, INTERIOR))
    return out


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

@dataclass
class ConstraintStatus:
    ok: bool
    message: str = ""
    location: tuple | None = None


@dataclass
class AdmissibilityReport:
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks.values())

    @property
    def first_violation(self) -> tuple[str, ConstraintStatus] | None:
        for name, c in self.checks.items():
            if not c.ok:
                return name, c
        return None

    def __bool__(self):
        return self.passed

    def to_dict(self) -> dict:
        return {k: {"ok": v.ok, "message": v.message, "location": v.location} for k, v in self.checks.items()}


def turning_angles(vertices) -> np.ndarray:
    """Unsigned turning angle at each interior vertex."""
    d = np.diff(np.asarray(vertices, float), axis=0)
    if len(d) < 2:
        return np.zeros(0)
    u, w = d[:-1], d[1:]
    cross = u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]
    dot = np.einsum("ij,ij->i", u, w)
    return np.abs(np.arctan2(cross, dot))


def discrete_curvature(vertices) -> np.ndarray:
    """Turning angle divided by the mean of the two adjacent segment lengths."""
    v = np.asarray(vertices, float)
    seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
    if len(seg) < 2:
        return np.zeros(0)
    return turning_angles(v) / (0.5 * (seg[:-1] + seg[1:]))


def _ball_normals(comp: CrackComponent, pts: np.ndarray) -> np.ndarray:
    """Unit normals at sample points: segment normal, bisector normal at vertices."""
    v = comp.vertices
    d = np.diff(v, axis=0)
    t = d / np.linalg.norm(d, axis=1)[:, None]
    dist = point_segment_distance(pts, v[:-1], v[1:])
    seg = np.argmin(dist, axis=1)
    tang = t[seg].copy()
    # vertices: average the adjacent tangents
    for i in range(1, len(v) - 1):
        hit = np.linalg.norm(pts - v[i], axis=1) <= 1e-12
        if np.any(hit):
            b = t[i - 1] + t[i]
            nb = np.linalg.norm(b)
            tang[hit] = b / nb if nb > 1e-14 else t[i]
    return _rot90(tang)


def check_admissible(crack: CrackSet, domain, initial: CrackSet | None = None,
                     sample_step: float | None = None) -> AdmissibilityReport:
    """Check the admissibility constraints of the crack class at sampling resolution.

    The report carries one entry per constraint: ``a`` (arcs meet the boundary in
    at most one endpoint), ``b`` (positive length, complement connected),
    ``c`` (tangent double-ball condition), ``curvature`` (discrete curvature bound),
    ``d`` (pairwise intersections), ``e`` (initial crack contained) and ``f``
    (2*eta clearance of the grown part).

    Raises:
        GeometryError: structural defects (degenerate polyline, empty set).
    """
    if crack.M == 0:
        raise GeometryError("crack set has no components")
    eta = crack.eta
    step = sample_step or eta / 10.0
    poly = _polygon_of(domain)
    pa, pb = polygon_edges(poly)
    rep = AdmissibilityReport()
    A, B, owner = crack.segments()

    # (a) each arc meets the boundary in at most one endpoint, which must be its anchor
    status = ConstraintStatus(True)
    for m, c in enumerate(crack.components):
        v = c.vertices
        dist = distance_to_polygon_boundary(v, poly)
        inside = points_in_polygon(v, poly)
        on_bdry = dist <= 1e-10
        if c.origin_kind == BOUNDARY and not on_bdry[0]:
            status = ConstraintStatus(False, f"component {m}: boundary-anchored arc does not start on the boundary", tuple(v[0]))
            break
        bad = ~(inside | on_bdry)
        bad[0] = bad[0] and c.origin_kind != BOUNDARY
        interior_touch = on_bdry.copy()
        interior_touch[0] = on_bdry[0] and c.origin_kind != BOUNDARY
        if np.any(bad) or np.any(interior_touch[1:]) or (c.origin_kind == INTERIOR and on_bdry[0]):
            k = int(np.argmax(bad | interior_touch))
            status = ConstraintStatus(False, f"component {m}: point outside or on the boundary away from the anchor", tuple(v[k]))
            break
        if c.nsegments:
            hit = segment_intersections(v[:-1], v[1:], pa, pb)
            if c.origin_kind == BOUNDARY:
                hit[0] &= point_segment_distance(v[1:2], pa, pb)[0] <= 1e-10
            if np.any(hit):
                k = int(np.argwhere(hit)[0][0])
                status = ConstraintStatus(False, f"component {m}: segment {k} crosses the boundary", tuple(v[k]))
                break
    rep.checks["a"] = status

    # curvature bound
    status = ConstraintStatus(True)
    kmax = 1.0 / eta
    for m, c in enumerate(crack.components):
        k = discrete_curvature(c.vertices)
        if len(k) and k.max() > kmax * (1 + 1e-9) + 1e-12:
            i = int(np.argmax(k)) + 1
            status = ConstraintStatus(False, f"component {m}: discrete curvature {k.max():.6g} > 1/eta = {kmax:.6g}",
                                      tuple(c.vertices[i]))
            break
    if status.ok:
        # interior seeds: the two halves must join with bounded curvature
        for m, c in enumerate(crack.components):
            for n in range(m + 1, crack.M):
                o = crack.components[n]
                if (c.origin_kind == INTERIOR and o.origin_kind == INTERIOR and c.nsegments and o.nsegments
                        and np.linalg.norm(c.anchor - o.anchor) <= 1e-12):
                    joint = np.array([c.vertices[1], c.anchor, o.vertices[1]])
                    kk = discrete_curvature(joint)[0]
                    if kk > kmax * (1 + 1e-9) + 1e-12:
                        status = ConstraintStatus(False, f"components {m},{n}: kink at the split point", tuple(c.anchor))
    rep.checks["curvature"] = status

    # (c) two tangent eta-balls free of the crack at every sampled point
    status = ConstraintStatus(True)
    theta = max([turning_angles(c.vertices).max(initial=0.0) for c in crack.components] + [0.0])
    ball_tol = eta * (1.0 - math.cos(min(theta, math.pi) / 2.0)) + 1e-9 * eta
    if len(A):
        for m, c in enumerate(crack.components):
            if c.nsegments == 0:
                continue
            pts = c.sample(step)
            nrm = _ball_normals(c, pts)
            for sgn in (1.0, -1.0):
                centers = pts + sgn * eta * nrm
                dmin = point_segment_distance(centers, A, B).min(axis=1)
                bad = dmin < eta - ball_tol
                if np.any(bad):
                    k = int(np.argmax(bad))
                    status = ConstraintStatus(False, f"component {m}: double-ball condition fails "
                                              f"(ball intrusion {eta - dmin[k]:.3g})", tuple(pts[k]))
                    break
            if not status.ok:
                break
    rep.checks["c"] = status

    # (d) components pairwise intersect in at most one point, inside both frozen prefixes;
    # self-intersections of a single component are reported here as well
    status = ConstraintStatus(True)
    for m, c in enumerate(crack.components):
        if c.nsegments >= 3:
            v = c.vertices
            hit = segment_intersections(v[:-1], v[1:], v[:-1], v[1:])
            n = c.nsegments
            i, j = np.triu_indices(n, k=2)
            bad = hit[i, j]
            if np.any(bad):
                status = ConstraintStatus(False, f"component {m}: self-intersection", tuple(v[i[bad][0]]))
                break
    if status.ok:
        for m in range(crack.M):
            for n in range(m + 1, crack.M):
                cm, cn = crack.components[m], crack.components[n]
                if cm.nsegments == 0 or cn.nsegments == 0:
                    continue
                pts = _pair_intersection_points(cm.vertices, cn.vertices)
                if len(pts) == 0:
                    continue
                uniq = _unique_points(pts)
                if len(uniq) > 1:
                    status = ConstraintStatus(False, f"components {m},{n} intersect in more than one point", tuple(uniq[0]))
                    break
                x = uniq[0]
                fm = cm.frozen_part()
                fn = cn.frozen_part()
                dm = _dist_to_polyline(x, fm)
                dn = _dist_to_polyline(x, fn)
                if dm > 1e-10 or dn > 1e-10:
                    status = ConstraintStatus(False, f"components {m},{n} meet outside the initial crack", tuple(x))
                    break
            if not status.ok:
                break
    rep.checks["d"] = status

    # (e) initial crack contained
    status = ConstraintStatus(True)
    if initial is not None:
        if initial.M != crack.M:
            status = ConstraintStatus(False, "number of components differs from the initial crack")
        else:
            for m, (c, c0) in enumerate(zip(crack.components, initial.components)):
                if not c.has_prefix(c0) or abs(c.frozen_prefix_len - c0.frozen_prefix_len) > 1e-12:
                    status = ConstraintStatus(False, f"component {m} does not extend its initial arc", tuple(c.anchor))
                    break
    rep.checks["e"] = status

    # (f) clearance of the grown part from the boundary and from the other components
    status = ConstraintStatus(True)
    clearance = 2.0 * eta
    for m, c in enumerate(crack.components):
        if c.length - c.frozen_prefix_len <= SNAP_TOL:
            continue
        free = c.free_part()
        fa, fb = (free[:-1], free[1:]) if len(free) > 1 else (free, free)
        db = segment_segment_distance(fa, fb, pa, pb)
        if db.min() < clearance - 1e-12:
            k = np.unravel_index(np.argmin(db), db.shape)[0]
            status = ConstraintStatus(False, f"component {m}: grown part within 2*eta of the boundary "
                                      f"(distance {db.min():.6g})", tuple(fb[k]))
            break
        others = owner != m
        if np.any(others):
            do = segment_segment_distance(fa, fb, A[others], B[others])
            if do.min() < clearance - 1e-12:
                k = np.unravel_index(np.argmin(do), do.shape)[0]
                status = ConstraintStatus(False, f"component {m}: grown part within 2*eta of another component "
                                          f"(distance {do.min():.6g})", tuple(fb[k]))
                break
    rep.checks["f"] = status

    # (b) positive length, complement connected: the contact graph has no cycle
    status = ConstraintStatus(True)
    if crack.lengths.sum() <= 0:
        status = ConstraintStatus(False, "crack has zero length")
    else:
        parent = list(range(crack.M + 1))  # index M is the boundary

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        edges = [(m, crack.M) for m, c in enumerate(crack.components)
                 if c.origin_kind == BOUNDARY and c.length > 0]
        for m in range(crack.M):
            for n in range(m + 1, crack.M):
                cm, cn = crack.components[m], crack.components[n]
                if cm.nsegments and cn.nsegments and len(_pair_intersection_points(cm.vertices, cn.vertices)):
                    edges.append((m, n))
        for i, j in edges:
            ri, rj = find(i), find(j)
            if ri == rj:
                status = ConstraintStatus(False, "crack set encloses a region (complement not connected)")
                break
            parent[ri] = rj
    rep.checks["b"] = status

    order = ["a", "b", "c", "curvature", "d", "e", "f"]
    rep.checks = {k: rep.checks[k] for k in order}
    return rep


def _pair_intersection_points(v, w) -> np.ndarray:
    hit = segment_intersections(v[:-1], v[1:], w[:-1], w[1:])
    pts = []
    for i, j in np.argwhere(hit):
        pts.append(_segment_meet(v[i], v[i + 1], w[j], w[j + 1]))
    return np.array(pts).reshape(-1, 2)


def _segment_meet(a0, a1, b0, b1):
    d1, d2 = a1 - a0, b1 - b0
    den = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(den) > 1e-14:
        s = ((b0[0] - a0[0]) * d2[1] - (b0[1] - a0[1]) * d2[0]) / den
        return a0 + np.clip(s, 0, 1) * d1
    # parallel: return the closest endpoint pair midpoint
    cands = [a0, a1, b0, b1]
    best = min(((p, q) for p in cands[:2] for q in cands[2:]), key=lambda pq: np.linalg.norm(pq[0] - pq[1]))
    return 0.5 * (best[0] + best[1])


def _unique_points(pts, tol=1e-10):
    out = []
    for p in pts:
        if not any(np.linalg.norm(p - q) <= tol for q in out):
            out.append(p)
    return out


def _dist_to_polyline(x, v):
    v = np.asarray(v, float)
    if len(v) == 1:
        return float(np.linalg.norm(x - v[0]))
    return float(point_segment_distance(x, v[:-1], v[1:]).min())


# ---------------------------------------------------------------------------
# Hausdorff distance
# ---------------------------------------------------------------------------

def _as_point_set(x, densify_tol: float) -> np.ndarray:
    if x is None:
        return np.zeros((0, 2))
    if isinstance(x, CrackSet):
        parts = [c.sample(densify_tol) for c in x.components]
        return np.vstack(parts) if parts else np.zeros((0, 2))
    if isinstance(x, CrackComponent):
        return x.sample(densify_tol)
    return np.asarray(x, float).reshape(-1, 2)


def hausdorff_distance(a, b, densify_tol: float = 1e-3, diameter: float | None = None) -> float:
    """Hausdorff distance between two crack sets, components or point sets.

    Polylines are densified with spacing at most ``densify_tol``; the result is
    exact for the densified samplings. With exactly one empty argument the
    distance is ``diameter`` (the diameter of the domain); two empty sets are at
    distance 0.
    """
    pa = _as_point_set(a, densify_tol)
    pb = _as_point_set(b, densify_tol)
    if len(pa) == 0 and len(pb) == 0:
        return 0.0
    if len(pa) == 0 or len(pb) == 0:
        if diameter is None:
            raise ValueError("distance to the empty set needs the domain diameter")
        return float(diameter)
    dab = cKDTree(pb).query(pa)[0].max()
    dba = cKDTree(pa).query(pb)[0].max()
    return float(max(dab, dba))


# ---------------------------------------------------------------------------
# extensions
# ---------------------------------------------------------------------------

def arc_points(start, tangent, curvature: float, length: float, max_step: float):
    """Sample a constant-curvature arc leaving ``start`` with unit ``tangent``.

    Returns the sampled points (``start`` excluded) and the unit tangent at the end.
    Positive curvature turns counter-clockwise.
    """
    start = np.asarray(start, float)
    t0 = np.asarray(tangent, float)
    t0 = t0 / np.linalg.norm(t0)
    if length <= 0:
        return np.zeros((0, 2)), t0
    n = max(1, int(math.ceil(length / max_step - 1e-12)))
    s = np.linspace(0.0, length, n + 1)[1:]
    nrm = _rot90(t0)
    if abs(curvature) * length < 1e-12:
        pts = start + s[:, None] * t0
        return pts, t0
    c = curvature
    pts = start + (np.sin(c * s) / c)[:, None] * t0 + ((1 - np.cos(c * s)) / c)[:, None] * nrm
    ang = c * length
    t1 = math.cos(ang) * t0 + math.sin(ang) * nrm
    return pts, t1


@dataclass(frozen=True, eq=False)
class ExtensionCandidate:
    component_index: int
    delta_length: float
    signed_curvature: float
    resulting_component: CrackComponent
    crack: CrackSet


def tip_and_tangent(crack: CrackSet, m: int):
    """Tip point and unit tangent of component ``m``."""
    c = crack.components[m]
    t = c.tangent
    return c.tip.copy(), t / np.linalg.norm(t)


def extend_component(crack: CrackSet, m: int, delta_length: float, curvature: float,
                     max_step: float | None = None) -> CrackSet:
    """Tangent-continuous arc extension of component ``m`` (no admissibility check)."""
    if delta_length <= 0:
        return crack
    c = crack.components[m]
    tip, tan = tip_and_tangent(crack, m)
    pts, t1 = arc_points(tip, tan, curvature, delta_length, max_step or crack.eta / 10.0)
    return crack.with_component(m, c.extended(pts, t1))


def generate_extensions(crack: CrackSet, m: int, lengths: Iterable[float], curvatures: Iterable[float],
                        domain, sample_step: float | None = None) -> list[ExtensionCandidate]:
    """Admissible constant-curvature extensions of tip ``m``.

    The null extension is always returned first. Inadmissible combinations are
    dropped silently.
    """
    if not 0 <= m < crack.M:
        raise IndexError(f"unknown tip index {m}")
    lengths = [float(x) for x in lengths]
    curvatures = [float(x) for x in curvatures]
    if any(x < 0 for x in lengths):
        raise ValueError("extension lengths must be nonnegative")
    kmax = 1.0 / crack.eta
    if any(abs(c) > kmax * (1 + 1e-12) for c in curvatures):
        raise ValueError("requested curvature exceeds 1/eta")
    out = [ExtensionCandidate(m, 0.0, 0.0, crack.components[m], crack)]
    for c in curvatures:
        for dl in lengths:
            if dl <= 0:
                continue
            new = extend_component(crack, m, dl, c, sample_step)
            if check_admissible(new, domain, sample_step=sample_step).passed:
                out.append(ExtensionCandidate(m, dl, c, new.components[m], new))
    return out


def clearance_to_tip(crack: CrackSet, m: int, domain) -> tuple[float, float]:
    """Distances from tip ``m`` to the domain boundary and to the other components."""
    tip = crack.components[m].tip
    db = float(distance_to_polygon_boundary(tip[None], _polygon_of(domain))[0])
    A, B, owner = crack.segments()
    others = owner != m
    do = float(point_segment_distance(tip[None], A[others], B[others]).min()) if np.any(others) else math.inf
    return db, do
