"""Conforming triangulations of the cracked domain.

The crack polylines are constrained segments of a Triangle PSLG. After
meshing, every crack vertex except the tips is duplicated once per side, so
that the two crack faces are separate boundary pieces and no stiffness couples
across them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import triangle

from .geometry import CrackSet, turning_angles
from .model import DomainSpec

CRACK_MARKER = 1000
FREE, DIRICHLET, TRACTION, CRACK = 0, 1, 2, 3


class MeshError(RuntimeError):
    """Meshing failed or produced an invalid triangulation."""


def shape_gradients(nodes: np.ndarray, tris: np.ndarray):
    """Signed areas (E,) and P1 basis gradients (E, 3, 2)."""
    p = nodes[tris]
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    area = 0.5 * det
    g = np.empty(tris.shape + (2,))
    g[:, 0, 0] = y[:, 1] - y[:, 2]
    g[:, 1, 0] = y[:, 2] - y[:, 0]
    g[:, 2, 0] = y[:, 0] - y[:, 1]
    g[:, 0, 1] = x[:, 2] - x[:, 1]
    g[:, 1, 1] = x[:, 0] - x[:, 2]
    g[:, 2, 1] = x[:, 1] - x[:, 0]
    g /= det[:, None, None]
    return area, g


@dataclass(eq=False)
class CrackedMesh:
    """P1 mesh of the cracked domain.

    Attributes:
        nodes: (N, 2) coordinates; duplicated crack nodes share coordinates.
        triangles: (E, 3) counter-clockwise connectivity.
        parent: (N,) index of the geometric vertex each node copies.
        facets: (F, 2) boundary edges, crack faces included.
        facet_kind: FREE, DIRICHLET, TRACTION or CRACK per facet.
        facet_owner: polygon edge index, or crack component index for crack faces.
        crack_node_groups: node index arrays, one per duplicated crack vertex.
        tip_nodes: node index of each tip, -1 for zero-length components.
        h, tip_grading: target sizes used to build the mesh.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    parent: np.ndarray
    facets: np.ndarray
    facet_kind: np.ndarray
    facet_owner: np.ndarray
    crack_node_groups: list
    tip_nodes: np.ndarray
    h: float
    tip_grading: float
    tips: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    area: np.ndarray = None
    grads: np.ndarray = None

    def __post_init__(self):
        self.area, self.grads = shape_gradients(self.nodes, self.triangles)
        if np.any(self.area <= 0):
            k = int(np.argmin(self.area))
            raise MeshError(f"triangle {k} is not positively oriented (area {self.area[k]:.3g})")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        return np.unique(self.facets[self.facet_kind == DIRICHLET])

    @property
    def n_duplicated(self) -> int:
        return sum(len(g) - 1 for g in self.crack_node_groups)

    def element_sizes(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e = np.linalg.norm(p - np.roll(p, 1, axis=1), axis=-1)
        return e.max(axis=1)

    def local_size(self, x) -> float:
        """Largest edge among elements whose centroid is nearest ``x`` (within 1.5 h)."""
        c = self.centroids
        d = np.linalg.norm(c - np.asarray(x, float), axis=1)
        sizes = self.element_sizes()
        near = d <= max(1.5 * sizes[np.argmin(d)], d.min() + 1e-15)
        return float(sizes[near].max())

    def tip_size(self, m: int) -> float:
        """Largest edge of the elements touching tip node ``m``."""
        n = self.tip_nodes[m]
        if n < 0:
            return self.local_size(self.tips[m])
        touch = np.any(self.triangles == n, axis=1)
        return float(self.element_sizes()[touch].max())

    def moved(self, displacement: np.ndarray) -> "CrackedMesh":
        """Same topology with nodes displaced; raises MeshError on inversion."""
        disp = np.asarray(displacement, float).reshape(self.nodes.shape)
        nodes = self.nodes + disp
        tips = self.tips.copy()
        for m, n in enumerate(self.tip_nodes):
            if n >= 0:
                tips[m] = nodes[n]
        return CrackedMesh(nodes, self.triangles, self.parent, self.facets, self.facet_kind, self.facet_owner,
                           self.crack_node_groups, self.tip_nodes, self.h, self.tip_grading, tips)

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.facets[self.facet_kind != CRACK])


def _simplify(v: np.ndarray) -> np.ndarray:
    """Drop interior vertices where the polyline is straight."""
    if len(v) <= 2:
        return v
    ang = turning_angles(v)
    keep = np.concatenate([[True], ang > 1e-10, [True]])
    return v[keep]


class _PointPool:
    def __init__(self, tol):
        self.pts = []
        self.tol = tol

    def add(self, p) -> int:
        p = np.asarray(p, float)
        for i, q in enumerate(self.pts):
            if abs(q[0] - p[0]) <= self.tol and abs(q[1] - p[1]) <= self.tol:
                return i
        self.pts.append(p)
        return len(self.pts) - 1


def build_mesh(domain: DomainSpec, crack: CrackSet | None, h: float, tip_grading: float = 8.0,
               grading_rate: float = 0.3, min_angle: float = 28.0, max_passes: int = 8) -> CrackedMesh:
    """Triangulate the domain with the crack as interior constraint, graded toward the tips.

    The target size is ``min(h, h/tip_grading + grading_rate * d)`` with ``d`` the
    distance to the nearest tip.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    poly = domain.polygon
    n = len(poly)
    diam = domain.diameter
    snap = 1e-9 * diam
    pool = _PointPool(1e-13 * max(diam, 1.0))
    comps = list(crack.components) if crack is not None else []

    # boundary points per polygon edge (mouths inserted)
    extra = {e: [] for e in range(n)}
    for m, c in enumerate(comps):
        a = c.anchor
        for i in range(n):
            p0, p1 = poly[i], poly[(i + 1) % n]
            d = p1 - p0
            s = float(np.dot(a - p0, d) / np.dot(d, d))
            q = p0 + np.clip(s, 0, 1) * d
            if np.linalg.norm(a - q) <= 1e-10 * max(diam, 1.0):
                if min(np.linalg.norm(a - p0), np.linalg.norm(a - p1)) <= snap:
                    raise MeshError(f"crack vertex at {a.tolist()} coincides with a polygon vertex")
                extra[i].append((s, a))
                break
    for v in (p for c in comps for p in c.vertices):
        dv = np.linalg.norm(poly - v, axis=1)
        if dv.min() <= snap:
            raise MeshError(f"crack vertex at {v.tolist()} coincides with a polygon vertex")

    segs, marks = [], []
    for i in range(n):
        chain = [poly[i]] + [p for _, p in sorted(extra[i], key=lambda sp: sp[0])] + [poly[(i + 1) % n]]
        ids = [pool.add(p) for p in chain]
        for a, b in zip(ids[:-1], ids[1:]):
            if a != b:
                segs.append((a, b))
                marks.append(1 + i)
    for m, c in enumerate(comps):
        if c.nsegments == 0:
            pool.add(c.anchor)
            continue
        ids = [pool.add(p) for p in _simplify(c.vertices)]
        for a, b in zip(ids[:-1], ids[1:]):
            segs.append((a, b))
            marks.append(CRACK_MARKER + m)

    tips = np.array([c.tip for c in comps]).reshape(-1, 2)
    grow = np.array([c.length > 0 for c in comps], bool)
    V = np.array(pool.pts)
    S = np.array(segs, int)
    M = np.array(marks, int)

    def target(x):
        # area targets; the tip part is tighter so that edge lengths (not just
        # areas) respect h / tip_grading next to the tip
        a = np.full(len(x), h * h / 2.5)
        if len(tips):
            d = np.linalg.norm(x[:, None] - tips[None], axis=-1).min(axis=1)
            a = np.minimum(a, (h / tip_grading + grading_rate * d) ** 2 / 5.0)
        return a

    flags = f"pq{min_angle:g}a{h * h / 2.5:.17g}Q"
    try:
        A = triangle.triangulate(dict(vertices=V, segments=S, segment_markers=M[:, None]), flags)
        for _ in range(max_passes):
            P, T = A["vertices"], A["triangles"]
            c = P[T].mean(axis=1)
            p = P[T]
            ar = 0.5 * np.abs((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                              - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
            tgt = target(c)
            if np.all(ar <= tgt * 1.0001):
                break
            A = triangle.triangulate(dict(vertices=P, triangles=T, segments=A["segments"],
                                          segment_markers=A["segment_markers"],
                                          triangle_max_area=tgt), f"rpq{min_angle:g}aQ")
    except Exception as exc:  # triangle raises bare RuntimeError on bad input
        raise MeshError(f"triangulation failed: {exc}") from exc

    P = np.asarray(A["vertices"], float)
    T = np.asarray(A["triangles"], np.int64)
    SG = np.asarray(A["segments"], np.int64)
    SM = np.asarray(A["segment_markers"], np.int64).ravel()
    p = P[T]
    det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    T[det < 0] = T[det < 0][:, [0, 2, 1]]
    return _finalize(domain, comps, P, T, SG, SM, tips, grow, h, tip_grading)


def _edge_key(a, b):
    return (a, b) if a < b else (b, a)


def _finalize(domain, comps, P, T, SG, SM, tips, grow, h, tip_grading) -> CrackedMesh:
    seg_marker = {_edge_key(int(a), int(b)): int(mk) for (a, b), mk in zip(SG, SM)}
    crack_edges = {k for k, mk in seg_marker.items() if mk >= CRACK_MARKER}
    crack_nodes = sorted({v for e in crack_edges for v in e})

    nodes = [P]
    parent = list(range(len(P)))
    T = T.copy()
    groups = []
    if crack_nodes:
        # node -> incident triangles
        order = np.argsort(T.ravel(), kind="stable")
        owner = order // 3
        sorted_nodes = T.ravel()[order]
        starts = np.searchsorted(sorted_nodes, np.arange(len(P) + 1))
        next_id = len(P)
        new_pts = []
        for v in crack_nodes:
            fan = owner[starts[v]:starts[v + 1]]
            # union-find across fan triangles sharing a non-crack edge at v
            par = {t: t for t in fan}

            def find(t):
                while par[t] != t:
                    par[t] = par[par[t]]
                    t = par[t]
                return t

            by_edge = {}
            for t in fan:
                for w in T[t]:
                    if w == v:
                        continue
                    k = _edge_key(v, int(w))
                    if k in crack_edges:
                        continue
                    by_edge.setdefault(k, []).append(t)
            for ts in by_edge.values():
                for t in ts[1:]:
                    ra, rb = find(ts[0]), find(t)
                    if ra != rb:
                        par[ra] = rb
            roots = sorted({find(t) for t in fan}, key=lambda r: min(t for t in fan if find(t) == r))
            if len(roots) <= 1:
                continue
            grp = [v]
            for r in roots[1:]:
                members = [t for t in fan if find(t) == r]
                for t in members:
                    T[t][T[t] == v] = next_id
                new_pts.append(P[v])
                parent.append(v)
                grp.append(next_id)
                next_id += 1
            groups.append(np.array(grp))
        if new_pts:
            nodes.append(np.array(new_pts))
    X = np.vstack(nodes)
    parent = np.array(parent)

    # boundary facets = edges used by a single triangle
    e = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    es = np.sort(e, axis=1)
    uniq, inv, cnt = np.unique(es, axis=0, return_inverse=True, return_counts=True)
    single = cnt[inv.ravel()] == 1
    facets = e[single]
    kinds = np.empty(len(facets), int)
    owners = np.empty(len(facets), int)
    dset, sset = set(domain.dirichlet_edges), set(domain.traction_edges)
    for i, (a, b) in enumerate(facets):
        mk = seg_marker.get(_edge_key(int(parent[a]), int(parent[b])))
        if mk is None:
            raise MeshError(f"boundary facet {X[a].tolist()}-{X[b].tolist()} has no source segment")
        if mk >= CRACK_MARKER:
            kinds[i], owners[i] = CRACK, mk - CRACK_MARKER
        else:
            edge = mk - 1
            owners[i] = edge
            kinds[i] = DIRICHLET if edge in dset else TRACTION if edge in sset else FREE

    tip_nodes = np.full(len(comps), -1, int)
    for m, c in enumerate(comps):
        if grow[m]:
            d = np.linalg.norm(X - tips[m], axis=1)
            k = int(np.argmin(d))
            if d[k] > 1e-12 * max(1.0, domain.diameter):
                raise MeshError(f"tip {m} is not a mesh node")
            tip_nodes[m] = k
    return CrackedMesh(X, T, parent, facets, kinds, owners, groups, tip_nodes, h, tip_grading, tips.copy())


# ---------------------------------------------------------------------------
# Triangle ASCII format
# ---------------------------------------------------------------------------

def write_triangle_files(mesh: CrackedMesh, stem: str) -> list[str]:
    """Write ``stem.node``, ``stem.ele`` and ``stem.edge``; returns the paths.

    Node markers: 1 on Dirichlet nodes, 0 otherwise. Edge markers: facet kind
    times 10000 plus the owning edge or component index.
    """
    dn = np.zeros(mesh.n_nodes, int)
    dn[mesh.dirichlet_nodes] = 1
    paths = [f"{stem}.node", f"{stem}.ele", f"{stem}.edge"]
    with open(paths[0], "w") as fh:
        fh.write(f"{mesh.n_nodes} 2 1 1\n")
        for i, ((x, y), par, mk) in enumerate(zip(mesh.nodes, mesh.parent, dn)):
            fh.write(f"{i} {x:.17g} {y:.17g} {par} {mk}\n")
    with open(paths[1], "w") as fh:
        fh.write(f"{mesh.n_elements} 3 0\n")
        for i, (a, b, c) in enumerate(mesh.triangles):
            fh.write(f"{i} {a} {b} {c}\n")
    with open(paths[2], "w") as fh:
        fh.write(f"{len(mesh.facets)} 1\n")
        for i, ((a, b), k, o) in enumerate(zip(mesh.facets, mesh.facet_kind, mesh.facet_owner)):
            fh.write(f"{i} {a} {b} {k * 10000 + o}\n")
    return paths


def read_triangle_files(stem: str) -> dict:
    """Inverse of :func:`write_triangle_files` (arrays only)."""
    def rows(path):
        with open(path) as fh:
            lines = [ln.split("#")[0].split() for ln in fh]
        lines = [ln for ln in lines if ln]
        return lines[0], lines[1:]

    hdr, body = rows(f"{stem}.node")
    nodes = np.array([[float(r[1]), float(r[2])] for r in body])
    parent = np.array([int(r[3]) for r in body])
    marker = np.array([int(r[4]) for r in body])
    _, body = rows(f"{stem}.ele")
    tris = np.array([[int(r[1]), int(r[2]), int(r[3])] for r in body])
    _, body = rows(f"{stem}.edge")
    edges = np.array([[int(r[1]), int(r[2])] for r in body])
    emark = np.array([int(r[3]) for r in body])
    return dict(nodes=nodes, parent=parent, node_marker=marker, triangles=tris, edges=edges,
                edge_kind=emark // 10000, edge_owner=emark % 10000)
