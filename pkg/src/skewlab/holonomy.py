"""Stable and unstable fiber holonomies as certified finite composition limits.

For a skew product F(x, y) = (Ax, g_x(y)) and y0 on the stable leaf of x0, the
holonomy from fiber(x0) to fiber(y0) is the C^0 limit of

    H_n = (g^(n) over y0)^{-1} o (g^(n) over x0),

certified by a Cauchy test on a fiber grid.  Both base orbits are derived from
a single *anchor* orbit plus analytic leaf offsets s * rate^k along the
eigendirection: iterating the two base points independently in floating point
would inject noise growing like lambda_u^n and destroy the limit.  All the
correctness oracles (equivariance, composition, inverse, shadowing) are stated
against this evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anosov import LEAF_RESIDUAL_TOL, leaf_coordinate
from .errors import BrokenPath, NoConvergence
from .fiber import SkewProduct
from .torus import TorusPoint, lift, mod1, torus_dist, wrap

DEFAULT_TOL = 1e-10
N_MAX_COMPOSITIONS = 200
CERT_GRID_N = 32
_LOOKAHEAD = 6


def _fiber_grid(n: int) -> np.ndarray:
    ticks = (np.arange(n) + 0.5) / n
    uu, vv = np.meshgrid(ticks, ticks, indexing="ij")
    return np.stack([uu.ravel(), vv.ravel()], axis=-1)


@dataclass(frozen=True)
class HolonomyMap:
    """Certified truncation of a stable/unstable holonomy between two fibers.

    The two base points are anchor + s_from * e and anchor + s_to * e on a
    common leaf; evaluation recomputes the truncated composition on demand.
    """

    sp: SkewProduct
    kind: str                 # "stable" | "unstable"
    anchor: tuple[float, float]
    s_from: float
    s_to: float
    truncation_n: int
    certified_tol: float
    tol: float
    increments: tuple[float, ...] = field(repr=False, default=())

    @property
    def from_base(self) -> TorusPoint:
        e = self.sp.base.eigen_direction(self.kind)
        return wrap(np.asarray(self.anchor) + self.s_from * e)

    @property
    def to_base(self) -> TorusPoint:
        e = self.sp.base.eigen_direction(self.kind)
        return wrap(np.asarray(self.anchor) + self.s_to * e)

    def _base_pair(self, n: int):
        """Anchor orbit and offset from/to base points for n composition steps."""
        cache = getattr(self, "_pair_cache", None)
        if cache is not None and cache[0] >= n:
            return cache[1][:n + 1], cache[2][:n + 1]
        a = self.sp.base
        e = a.eigen_direction(self.kind)
        rate = a.contraction_rate(self.kind)
        forward = self.kind == "stable"
        anchors = a.orbit(np.asarray(self.anchor, float), n, forward=forward)
        scales = rate ** np.arange(n + 1)
        from_pts = mod1(anchors + np.multiply.outer(self.s_from * scales, e))
        to_pts = mod1(anchors + np.multiply.outer(self.s_to * scales, e))
        object.__setattr__(self, "_pair_cache", (n, from_pts, to_pts))
        return from_pts, to_pts

    def __call__(self, ys):
        return self.evaluate_at(ys, self.truncation_n)

    def evaluate_at(self, ys, n: int):
        ys = np.asarray(ys, dtype=float)
        fam = self.sp.family
        from_pts, to_pts = self._base_pair(n)
        v = mod1(ys)
        if self.kind == "stable":
            for k in range(n):
                v = fam.apply(from_pts[k], v)
            for k in range(n - 1, -1, -1):
                v = fam.inverse(to_pts[k], v)
        else:
            for k in range(1, n + 1):
                v = fam.inverse(from_pts[k], v)
            for k in range(n, 0, -1):
                v = fam.apply(to_pts[k], v)
        return v

    def inverse_map(self) -> "HolonomyMap":
        """The reverse holonomy (same anchor, endpoints swapped)."""
        return HolonomyMap(sp=self.sp, kind=self.kind, anchor=self.anchor,
                           s_from=self.s_to, s_to=self.s_from,
                           truncation_n=self.truncation_n,
                           certified_tol=self.certified_tol, tol=self.tol,
                           increments=self.increments)

    def measured_decay_ratio(self, floor: float = 1e-13) -> float:
        """Geometric-mean per-step ratio of the Cauchy increments above floor.

        Individual consecutive ratios fluctuate with the field gradient along
        the orbit; the envelope rate (first to last significant increment) is
        the meaningful contraction measurement.
        """
        sig = [(k, d) for k, d in enumerate(self.increments) if d > floor]
        if len(sig) < 2:
            return 0.0
        (k0, d0), (k1, d1) = sig[0], sig[-1]
        return float((d1 / d0) ** (1.0 / (k1 - k0)))


_TAIL_SAFETY = 100.0


def _min_horizon(sp: SkewProduct, kind: str, s_from: float, s_to: float,
                 tol: float, n_max: int) -> int:
    """Smallest n past which step-n contributions are provably below tol/2.

    The fiber maps at the paired base points differ by at most
    base_lipschitz * |s_from - s_to| * rate^n, so a family that has not yet
    shown an increment may still produce one until this horizon; the Cauchy
    scan must not stop before it.
    """
    scale = sp.family.base_lipschitz() * abs(s_from - s_to) * _TAIL_SAFETY
    if scale == 0.0:
        return 0
    lam = abs(sp.base.contraction_rate(kind))
    if tol / 2 >= scale:
        return 0
    n = int(np.ceil(np.log((tol / 2) / scale) / np.log(lam)))
    return min(max(n, 0), n_max - _LOOKAHEAD)


def _certify(sp: SkewProduct, kind: str, anchor, s_from: float, s_to: float,
             tol: float, cert_grid_n: int, n_max: int):
    """Run the Cauchy scan; return (truncation_n, certified_tol, increments)."""
    fam = sp.family
    probe = HolonomyMap(sp=sp, kind=kind, anchor=tuple(np.asarray(anchor, float)),
                        s_from=s_from, s_to=s_to, truncation_n=0,
                        certified_tol=np.inf, tol=tol)
    grid = _fiber_grid(cert_grid_n)
    from_pts, to_pts = probe._base_pair(n_max + 1)
    n_min = _min_horizon(sp, kind, s_from, s_to, tol, n_max)
    ups = grid.copy()
    h_prev = grid.copy()
    increments: list[float] = []
    for n in range(1, n_max + 1):
        if kind == "stable":
            ups = fam.apply(from_pts[n - 1], ups)
            v = ups
            for k in range(n - 1, -1, -1):
                v = fam.inverse(to_pts[k], v)
        else:
            ups = fam.inverse(from_pts[n], ups)
            v = ups
            for k in range(n, 0, -1):
                v = fam.apply(to_pts[k], v)
        h_next = v
        increments.append(float(np.max(torus_dist(h_next, h_prev))))
        h_prev = h_next
        if (n >= n_min + _LOOKAHEAD
                and all(d < tol / 2 for d in increments[-_LOOKAHEAD:])):
            break
        if n >= max(60, n_min + 20) and min(increments[-10:]) > 1e-4:
            raise NoConvergence(
                f"{kind} holonomy increments not decaying after {n} compositions "
                "(domination failure)")
    else:
        raise NoConvergence(
            f"{kind} holonomy failed its Cauchy certificate within {n_max} compositions")
    trunc = 0
    for k, d in enumerate(increments, start=1):
        if d >= tol / 2:
            trunc = k
    certified = max(increments[trunc:], default=0.0)
    return trunc, certified, tuple(increments)


def make_holonomy(sp: SkewProduct, kind: str, anchor, s_from: float, s_to: float,
                  tol: float = DEFAULT_TOL, cert_grid_n: int = CERT_GRID_N,
                  n_max: int = N_MAX_COMPOSITIONS) -> HolonomyMap:
    """Certified holonomy between anchor + s_from*e and anchor + s_to*e."""
    anchor = tuple(np.asarray(anchor, float).reshape(2))
    trunc, certified, increments = _certify(sp, kind, anchor, s_from, s_to,
                                            tol, cert_grid_n, n_max)
    return HolonomyMap(sp=sp, kind=kind, anchor=anchor, s_from=s_from, s_to=s_to,
                       truncation_n=trunc, certified_tol=certified, tol=tol,
                       increments=increments)


def _leaf_offset(sp: SkewProduct, kind: str, x, y) -> float:
    s, resid = leaf_coordinate(sp.base, kind, x, y)
    if resid > LEAF_RESIDUAL_TOL:
        raise BrokenPath(
            f"point {tuple(np.round(lift(y), 12))} not on the {kind} leaf of "
            f"{tuple(np.round(lift(x), 12))} (residual {resid:.3e})")
    return s


def stable_holonomy(sp: SkewProduct, x, y, tol: float = DEFAULT_TOL,
                    cert_grid_n: int = CERT_GRID_N,
                    n_max: int = N_MAX_COMPOSITIONS) -> HolonomyMap:
    """Holonomy from fiber(x) to fiber(y) for y on the stable leaf of x."""
    s = _leaf_offset(sp, "stable", x, y)
    return make_holonomy(sp, "stable", lift(x), 0.0, s, tol, cert_grid_n, n_max)


def unstable_holonomy(sp: SkewProduct, x, y, tol: float = DEFAULT_TOL,
                      cert_grid_n: int = CERT_GRID_N,
                      n_max: int = N_MAX_COMPOSITIONS) -> HolonomyMap:
    """Mirror of stable_holonomy along backward iterates."""
    s = _leaf_offset(sp, "unstable", x, y)
    return make_holonomy(sp, "unstable", lift(x), 0.0, s, tol, cert_grid_n, n_max)


@dataclass(frozen=True)
class SuLeg:
    kind: str
    from_point: TorusPoint
    to_point: TorusPoint


@dataclass(frozen=True)
class SuPath:
    """Chain of stable/unstable legs; consecutive legs share endpoints."""

    legs: tuple[SuLeg, ...]

    def is_loop(self) -> bool:
        return bool(self.legs) and torus_dist(
            self.legs[0].from_point, self.legs[-1].to_point) < 1e-9


@dataclass(frozen=True)
class PathHolonomy:
    """Ordered composition of leg holonomies along an su-path."""

    maps: tuple[HolonomyMap, ...]

    def __call__(self, ys):
        v = mod1(np.asarray(ys, dtype=float))
        for h in self.maps:
            v = h(v)
        return v

    def inverse(self, ys):
        v = mod1(np.asarray(ys, dtype=float))
        for h in reversed(self.maps):
            v = h.inverse_map()(v)
        return v

    @property
    def certified_tol(self) -> float:
        return float(sum(h.certified_tol for h in self.maps))


def project_su(sp: SkewProduct, path: SuPath, tol: float = DEFAULT_TOL,
               anchors: tuple | None = None, cert_grid_n: int = CERT_GRID_N) -> PathHolonomy:
    """Compose leg holonomies along a multi-leg su-path.

    Each leg is validated for leaf membership and chaining; an optional
    per-leg anchor list overrides the default anchor (the leg's own start),
    which matters when several legs should share one exactly-iterable orbit.
    """
    maps = []
    for i, leg in enumerate(path.legs):
        if leg.kind not in ("stable", "unstable"):
            raise BrokenPath(f"leg {i} has unknown kind {leg.kind!r}")
        if i > 0 and torus_dist(path.legs[i - 1].to_point, leg.from_point) > 1e-9:
            raise BrokenPath(f"legs {i - 1} and {i} do not chain")
        anchor = lift(leg.from_point) if anchors is None else np.asarray(anchors[i], float)
        s_from = _leaf_offset(sp, leg.kind, anchor, leg.from_point)
        s_to = _leaf_offset(sp, leg.kind, anchor, leg.to_point)
        maps.append(make_holonomy(sp, leg.kind, anchor, s_from, s_to,
                                  tol=tol, cert_grid_n=cert_grid_n))
    return PathHolonomy(maps=tuple(maps))
