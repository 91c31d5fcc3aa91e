"""Problem data: the domain, the material fields and the time-dependent loads."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import points_in_polygon, segment_intersections

ScalarField = Callable[[np.ndarray], np.ndarray]
VectorField = Callable[[np.ndarray], np.ndarray]


class ModelError(ValueError):
    """Invalid problem data."""


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Polygonal reference configuration.

    ``polygon`` lists the vertices counter-clockwise; edge ``i`` joins vertex ``i``
    to vertex ``i+1``. Dirichlet and traction parts are unions of whole edges.
    """

    polygon: np.ndarray
    dirichlet_edges: tuple = ()
    traction_edges: tuple = ()

    def __post_init__(self):
        p = np.array(self.polygon, float).reshape(-1, 2)
        if len(p) < 3:
            raise ModelError("polygon needs at least three vertices")
        area = 0.5 * np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1])
        if area < 0:
            p = p[::-1].copy()
            n = len(p)
            # edge i (v_i -> v_{i+1}) becomes edge n-2-i after reversal
            remap = lambda e: (n - 2 - e) % n
            object.__setattr__(self, "dirichlet_edges", tuple(sorted(remap(e) for e in self.dirichlet_edges)))
            object.__setattr__(self, "traction_edges", tuple(sorted(remap(e) for e in self.traction_edges)))
        p.setflags(write=False)
        object.__setattr__(self, "polygon", p)
        n = len(p)
        d = tuple(sorted(set(int(e) for e in self.dirichlet_edges)))
        s = tuple(sorted(set(int(e) for e in self.traction_edges)))
        object.__setattr__(self, "dirichlet_edges", d)
        object.__setattr__(self, "traction_edges", s)
        if any(not 0 <= e < n for e in d + s):
            raise ModelError("edge index out of range")
        # simple polygon: non-adjacent edges do not meet
        a, b = p, np.roll(p, -1, axis=0)
        hit = segment_intersections(a, b, a, b, tol=0.0)
        for i in range(n):
            for j in range(i + 2, n):
                if (i == 0 and j == n - 1):
                    continue
                if hit[i, j]:
                    raise ModelError(f"polygon is not simple (edges {i} and {j} meet)")
        # closure of the traction part is disjoint from the closure of the Dirichlet part
        dv = {e for e in d} | {(e + 1) % n for e in d}
        sv = {e for e in s} | {(e + 1) % n for e in s}
        if set(d) & set(s) or dv & sv:
            raise ModelError("traction edges must stay away from the closure of the Dirichlet part")

    @property
    def edges(self):
        return self.polygon, np.roll(self.polygon, -1, axis=0)

    @property
    def diameter(self) -> float:
        p = self.polygon
        return float(np.max(np.linalg.norm(p[:, None] - p[None], axis=-1)))

    @property
    def area(self) -> float:
        p = self.polygon
        return float(0.5 * np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1]))

    def contains(self, x) -> np.ndarray:
        return points_in_polygon(x, self.polygon)

    @classmethod
    def rectangle(cls, x0=0.0, y0=0.0, x1=1.0, y1=1.0, dirichlet_edges=(0, 2), traction_edges=()):
        """Edges: 0 bottom, 1 right, 2 top, 3 left."""
        return cls(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]), dirichlet_edges, traction_edges)

    def to_dict(self):
        return {"polygon": self.polygon.tolist(), "dirichlet_edges": list(self.dirichlet_edges),
                "traction_edges": list(self.traction_edges)}


def _const(value):
    def f(x):
        return np.full(np.asarray(x).shape[0], float(value))
    f.constant = float(value)
    return f


def _zero_grad(x):
    return np.zeros((np.asarray(x).shape[0], 2))


@dataclass(frozen=True, eq=False)
class MaterialModel:
    """Lamé fields and toughness, each a callable mapping (n, 2) points to (n,) values.

    ``grad_lam`` and ``grad_mu`` are optional analytic gradients ((n, 2) arrays).
    ``kappa_bounds`` is the pair (kappa1, kappa2).
    """

    lam: ScalarField
    mu: ScalarField
    kappa: ScalarField
    kappa_bounds: tuple
    grad_lam: VectorField | None = None
    grad_mu: VectorField | None = None

    @classmethod
    def constant(cls, lam: float, mu: float, kappa: float) -> "MaterialModel":
        return cls(_const(lam), _const(mu), _const(kappa), (float(kappa), float(kappa)), _zero_grad, _zero_grad)

    @property
    def kappa1(self) -> float:
        return float(self.kappa_bounds[0])

    @property
    def kappa2(self) -> float:
        return float(self.kappa_bounds[1])

    @property
    def homogeneous(self) -> bool:
        return hasattr(self.lam, "constant") and hasattr(self.mu, "constant")

    def validate(self, points) -> None:
        """Check positivity of the stiffness and the toughness bounds at ``points``."""
        x = np.asarray(points, float).reshape(-1, 2)
        lam, mu, kap = self.lam(x), self.mu(x), self.kappa(x)
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(kap))):
            raise ModelError("material fields must be finite")
        if np.any(mu <= 0) or np.any(lam + mu <= 0):
            k = int(np.argmin(np.minimum(mu, lam + mu)))
            raise ModelError(f"stiffness not positive definite at {x[k].tolist()}")
        k1, k2 = self.kappa_bounds
        if not 0 < k1 <= k2:
            raise ModelError("toughness bounds must satisfy 0 < kappa1 <= kappa2")
        if np.any(kap < k1 * (1 - 1e-12)) or np.any(kap > k2 * (1 + 1e-12)):
            k = int(np.argmax(np.maximum(k1 - kap, kap - k2)))
            raise ModelError(f"toughness {kap[k]:.6g} outside [{k1}, {k2}] at {x[k].tolist()}")

    def lipschitz_estimate(self, points, rng=None, pairs: int = 200) -> float:
        """Largest difference quotient of lam, mu and kappa over random point pairs."""
        rng = np.random.default_rng(rng)
        x = np.asarray(points, float).reshape(-1, 2)
        i = rng.integers(0, len(x), pairs)
        j = rng.integers(0, len(x), pairs)
        keep = i != j
        i, j = i[keep], j[keep]
        d = np.linalg.norm(x[i] - x[j], axis=1)
        ok = d > 0
        out = 0.0
        for fn in (self.lam, self.mu, self.kappa):
            v = fn(x)
            if ok.any():
                out = max(out, float(np.max(np.abs(v[i] - v[j])[ok] / d[ok])))
        return out

    def gradients(self, x, step: float):
        """Gradients of lam and mu at ``x``: analytic if given, else central differences."""
        x = np.asarray(x, float).reshape(-1, 2)
        out = []
        for fn, g in ((self.lam, self.grad_lam), (self.mu, self.grad_mu)):
            if g is not None:
                out.append(np.asarray(g(x), float).reshape(-1, 2))
                continue
            ex = np.array([step, 0.0])
            ey = np.array([0.0, step])
            gx = (fn(x + ex) - fn(x - ex)) / (2 * step)
            gy = (fn(x + ey) - fn(x - ey)) / (2 * step)
            out.append(np.stack([gx, gy], axis=1))
        return out[0], out[1]


def _zero_vec(x):
    return np.zeros((np.asarray(x).shape[0], 2))


@dataclass(frozen=True, eq=False)
class TimeScale:
    """Piecewise-linear scalar function of time given by samples."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, float).ravel()
        v = np.asarray(self.values, float).ravel()
        if len(t) != len(v) or len(t) < 1:
            raise ModelError("time samples and values must have equal nonzero length")
        if np.any(np.diff(t) <= 0):
            raise ModelError("time samples must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))

    def rate(self, t: float, side: str = "right") -> float:
        """Difference quotient of the sample interval containing ``t``.

        At a sample time, ``side`` selects the interval to the right or left.
        """
        tt = self.times
        if len(tt) == 1:
            return 0.0
        if side == "right":
            k = int(np.searchsorted(tt, t, side="right")) - 1
        else:
            k = int(np.searchsorted(tt, t, side="left")) - 1
        k = min(max(k, 0), len(tt) - 2)
        return float((self.values[k + 1] - self.values[k]) / (tt[k + 1] - tt[k]))


@dataclass(frozen=True, eq=False)
class LoadTrajectory:
    """Separable loads: w(t,x) = s_w(t) W(x), f(t,x) = s_f(t) F(x), g(t,x) = s_g(t) Gt(x).

    Only the values of W on Dirichlet nodes enter the discrete problem; the
    lift used for work terms vanishes outside the element layer touching the
    Dirichlet boundary, so its support stays within eta of the boundary as
    long as the mesh size does not exceed eta.
    """

    T: float
    w_scale: TimeScale
    w_profile: VectorField = _zero_vec
    f_scale: TimeScale | None = None
    f_profile: VectorField = _zero_vec
    g_scale: TimeScale | None = None
    g_profile: VectorField = _zero_vec
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for s in (self.w_scale, self.f_scale, self.g_scale):
            if s is None:
                continue
            if s.times[0] > 1e-14 or s.times[-1] < self.T - 1e-12:
                raise ModelError("load samples must cover [0, T]")

    @classmethod
    def ramp(cls, T: float, w_profile=None, f_profile=None, g_profile=None, **meta) -> "LoadTrajectory":
        """All loads scale linearly from 0 at t = 0 to their profile at t = 1."""
        s = TimeScale(np.array([0.0, max(T, 1e-300)]), np.array([0.0, max(T, 1e-300)]))
        return cls(T, s, w_profile or _zero_vec, s if f_profile else None, f_profile or _zero_vec,
                   s if g_profile else None, g_profile or _zero_vec, dict(meta))

    @property
    def has_body_force(self) -> bool:
        return self.f_scale is not None

    @property
    def has_traction(self) -> bool:
        return self.g_scale is not None

    def _sc(self, s, t):
        return 0.0 if s is None else s(t)

    def _rt(self, s, t, side):
        return 0.0 if s is None else s.rate(t, side)

    def w(self, t, x):
        return self._sc(self.w_scale, t) * np.asarray(self.w_profile(x), float).reshape(-1, 2)

    def f(self, t, x):
        return self._sc(self.f_scale, t) * np.asarray(self.f_profile(x), float).reshape(-1, 2)

    def g(self, t, x):
        return self._sc(self.g_scale, t) * np.asarray(self.g_profile(x), float).reshape(-1, 2)

    def w_dot(self, t, x, side="right"):
        return self._rt(self.w_scale, t, side) * np.asarray(self.w_profile(x), float).reshape(-1, 2)

    def f_dot(self, t, x, side="right"):
        return self._rt(self.f_scale, t, side) * np.asarray(self.f_profile(x), float).reshape(-1, 2)

    def g_dot(self, t, x, side="right"):
        return self._rt(self.g_scale, t, side) * np.asarray(self.g_profile(x), float).reshape(-1, 2)

    def scaled(self, alpha: float) -> "LoadTrajectory":
        """All loads multiplied by ``alpha``."""
        def sc(s):
            return None if s is None else TimeScale(s.times, alpha * s.values)
        return LoadTrajectory(self.T, sc(self.w_scale), self.w_profile, sc(self.f_scale), self.f_profile,
                              sc(self.g_scale), self.g_profile, dict(self.meta))
