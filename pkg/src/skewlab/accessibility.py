"""Loop maps from heteroclinic quads, fixed-point detection, orbit exploration
of center accessibility classes, and the point/curve/open trichotomy classifier.

A loop map is the fiber self-map over fiber(x) obtained by composing the four
holonomies around one heteroclinic loop x -> z_i -> p_i -> w_i -> x.  Its fixed
points are exactly the fiber points whose center accessibility class (under the
available generators) is trivial.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anosov import HeteroclinicQuad
from .fiber import SkewProduct
from .holonomy import DEFAULT_TOL, PathHolonomy, SuLeg, SuPath, project_su
from .torus import Region, lift, mod1, torus_dist, wrapped_diff

DIAMETER_TRIVIAL = 1e-6
CURVE_BAND = (0.75, 1.25)
OPEN_MIN = 1.6
DYADIC_SCALES = tuple(range(3, 9))
MIN_BOXES = 24
_QUANT = 1e-9


@dataclass(frozen=True)
class LoopMap:
    """Alternating 4-holonomy composition around a quad, acting on fiber(x).

    Every image point lies in the center accessibility class of its argument
    by construction, so fixed points witness trivial classes.
    """

    quad: HeteroclinicQuad
    index: int
    path: PathHolonomy
    tol: float

    def __call__(self, ys):
        return self.path(ys)

    def inverse(self, ys):
        return self.path.inverse(ys)

    def displacement(self, ys):
        ys = mod1(np.asarray(ys, dtype=float))
        return wrapped_diff(self(ys), ys)


def loop_path(quad: HeteroclinicQuad, i: int) -> SuPath:
    p, w, z = quad.loop_points(i)
    return SuPath(legs=(
        SuLeg("unstable", quad.x, z),
        SuLeg("stable", z, p),
        SuLeg("unstable", p, w),
        SuLeg("stable", w, quad.x),
    ))


def loop_map(sp: SkewProduct, quad: HeteroclinicQuad, i: int,
             tol: float = DEFAULT_TOL, cert_grid_n: int = 32) -> LoopMap:
    """Loop map for loop i of a quad; propagates NoConvergence from holonomies.

    Legs through the periodic point p_i are anchored at p_i and legs through x
    at x, so each leg rides one consistently iterated orbit.
    """
    p, _, _ = quad.loop_points(i)
    anchors = (lift(quad.x), lift(p), lift(p), lift(quad.x))
    path = project_su(sp, loop_path(quad, i), tol=tol, anchors=anchors,
                      cert_grid_n=cert_grid_n)
    return LoopMap(quad=quad, index=i, path=path, tol=tol)


def standard_generators(sp: SkewProduct, quads, tol: float = DEFAULT_TOL,
                        cert_grid_n: int = 32) -> list[LoopMap]:
    return [loop_map(sp, quad, i, tol=tol, cert_grid_n=cert_grid_n)
            for quad in quads for i in (1, 2)]


# ---------------------------------------------------------------------------
# fixed points of fiber self-maps

@dataclass(frozen=True)
class FixedPointResult:
    identity_like: bool
    points: np.ndarray  # (m, 2), deterministic order

    def __len__(self):
        return len(self.points)


def _dedup(points: np.ndarray, radius: float) -> np.ndarray:
    if len(points) == 0:
        return points.reshape(0, 2)
    keys = np.round(points / radius).astype(np.int64)
    _, idx = np.unique(keys, axis=0, return_index=True)
    pts = points[np.sort(idx)]
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    return pts[order]


def find_fixed_points(map_fn, region: Region, tol: float = 1e-8,
                      seed_grid_n: int = 64, max_iter: int = 50,
                      dedup_factor: float = 10.0) -> FixedPointResult:
    """All fixed points of a fiber self-map inside a chart rectangle.

    Grid seeding + damped Newton on the wrapped displacement with
    finite-difference derivatives; seeds with a singular derivative fall back
    to a bisection-refined local grid scan.  If more than half of the seed
    grid is already fixed, the map is flagged identity-like instead.
    """
    center = np.asarray(region.center, float)
    seeds = region.grid(seed_grid_n)

    def disp(pts):
        return wrapped_diff(map_fn(pts), pts)

    d0 = disp(seeds)
    fixed_frac = float(np.mean(np.hypot(d0[:, 0], d0[:, 1]) < tol))
    if fixed_frac > 0.5:
        return FixedPointResult(identity_like=True, points=np.empty((0, 2)))

    h = 1e-6
    xi = wrapped_diff(seeds, center)
    active = np.ones(len(seeds), dtype=bool)
    singular_seeds = []
    converged = []
    for _ in range(max_iter):
        if not np.any(active):
            break
        q = mod1(center + xi[active])
        d = disp(q)
        dn = np.hypot(d[:, 0], d[:, 1])
        done = dn < 0.25 * tol
        if np.any(done):
            converged.append(mod1(center + xi[active][done]))
        ex = np.array([h, 0.0])
        ey = np.array([0.0, h])
        j00_01 = (disp(mod1(q + ex)) - disp(mod1(q - ex))) / (2 * h)
        j10_11 = (disp(mod1(q + ey)) - disp(mod1(q - ey))) / (2 * h)
        det = j00_01[:, 0] * j10_11[:, 1] - j00_01[:, 1] * j10_11[:, 0]
        sing = (np.abs(det) < 1e-12) & ~done
        if np.any(sing):
            singular_seeds.extend(mod1(center + xi[active][sing]))
        ok = ~done & ~sing
        step = np.zeros_like(d)
        safe_det = np.where(np.abs(det) < 1e-300, 1.0, det)
        step[:, 0] = (d[:, 0] * j10_11[:, 1] - d[:, 1] * j10_11[:, 0]) / safe_det
        step[:, 1] = (d[:, 1] * j00_01[:, 0] - d[:, 0] * j00_01[:, 1]) / safe_det
        norm = np.hypot(step[:, 0], step[:, 1])
        cap = 0.2
        scale = np.where(norm > cap, cap / np.maximum(norm, 1e-300), 1.0)
        new_xi = xi[active].copy()
        new_xi[ok] -= step[ok] * scale[ok, None]
        out = np.max(np.abs(new_xi), axis=1) > np.max(region.half) + 0.1
        keep = ok & ~out
        idx = np.flatnonzero(active)
        xi[idx] = new_xi
        active[idx[~keep]] = False

    for s in singular_seeds:
        pt = _refine_by_scan(map_fn, np.asarray(s), 2.2 * np.max(region.half) / seed_grid_n)
        converged.append(pt[None, :])

    if not converged:
        return FixedPointResult(identity_like=False, points=np.empty((0, 2)))
    pts = np.concatenate(converged, axis=0)
    resid = torus_dist(map_fn(pts), pts)
    pts = pts[(resid < tol) & region.contains(pts, margin=1e-9)]
    return FixedPointResult(identity_like=False,
                            points=_dedup(pts, dedup_factor * tol))


def _refine_by_scan(map_fn, seed: np.ndarray, span: float, levels: int = 3) -> np.ndarray:
    best = seed
    for _ in range(levels):
        offs = np.linspace(-span, span, 5)
        uu, vv = np.meshgrid(offs, offs, indexing="ij")
        cand = mod1(best + np.stack([uu.ravel(), vv.ravel()], axis=-1))
        d = torus_dist(map_fn(cand), cand)
        best = cand[int(np.argmin(d))]
        span /= 5.0
    return best


# ---------------------------------------------------------------------------
# class exploration and classification

@dataclass
class ClassSample:
    """Orbit of a seed fiber point under the loop-map groupoid."""

    seed: tuple[float, float]
    points: np.ndarray
    generators_used: int
    word_length: int
    diagnostics: "Classification | None" = field(default=None)


@dataclass(frozen=True)
class Classification:
    verdict: str            # Trivial | Curve | Open | Indeterminate
    diameter: float
    dim_estimate: float
    scales_used: tuple[int, ...]
    box_counts: tuple[int, ...]
    n_points: int


def explore_class(sp: SkewProduct, quads, seed, K: int = 2000,
                  word_length: int = 12, tol: float = DEFAULT_TOL,
                  generators=None) -> ClassSample:
    """Breadth-first orbit of one seed under all loop maps and inverses."""
    return explore_classes(sp, quads, np.asarray(seed, float).reshape(1, 2),
                           K=K, word_length=word_length, tol=tol,
                           generators=generators)[0]


def explore_classes(sp: SkewProduct, quads, seeds, K: int = 2000,
                    word_length: int = 12, tol: float = DEFAULT_TOL,
                    generators=None) -> list[ClassSample]:
    """Lockstep breadth-first exploration of many seeds at once.

    Produces exactly the same per-seed samples as explore_class run seed by
    seed; batching exists because generator evaluation is vectorized and
    dominated by per-call overhead.
    """
    seeds = mod1(np.asarray(seeds, dtype=float).reshape(-1, 2))
    gens = standard_generators(sp, quads, tol=tol) if generators is None else list(generators)
    if not gens:
        raise ValueError("at least one generator loop map is required")
    actions = [(g, False) for g in gens] + [(g, True) for g in gens]

    m = len(seeds)
    seen: set[tuple[int, int, int]] = set()
    collected: list[list[np.ndarray]] = [[] for _ in range(m)]
    counts = np.zeros(m, dtype=int)

    def keys_of(pts):
        return np.round(pts * (1.0 / _QUANT)).astype(np.int64)

    frontier_pts = seeds.copy()
    frontier_sid = np.arange(m)
    for sid, pt in zip(frontier_sid, frontier_pts):
        k = keys_of(pt[None, :])[0]
        seen.add((sid, int(k[0]), int(k[1])))
        collected[sid].append(pt)
        counts[sid] += 1

    for _ in range(word_length):
        if len(frontier_pts) == 0 or np.all(counts >= K):
            break
        cand_pts = []
        cand_sid = []
        for gen, inv in actions:
            img = gen.inverse(frontier_pts) if inv else gen(frontier_pts)
            cand_pts.append(img)
            cand_sid.append(frontier_sid)
        pts = np.concatenate(cand_pts, axis=0)
        sids = np.concatenate(cand_sid, axis=0)
        keys = keys_of(pts)
        new_pts = []
        new_sid = []
        for p, sid, k in zip(pts, sids, keys):
            if counts[sid] >= K:
                continue
            key = (int(sid), int(k[0]), int(k[1]))
            if key in seen:
                continue
            seen.add(key)
            collected[sid].append(p)
            counts[sid] += 1
            new_pts.append(p)
            new_sid.append(sid)
        frontier_pts = np.asarray(new_pts).reshape(-1, 2)
        frontier_sid = np.asarray(new_sid, dtype=int)

    return [ClassSample(seed=(float(s[0]), float(s[1])),
                        points=np.asarray(collected[i]).reshape(-1, 2),
                        generators_used=2 * len(gens), word_length=word_length)
            for i, s in enumerate(seeds)]


def sample_diameter(points: np.ndarray) -> float:
    """Max pairwise torus distance, chunked to bound memory."""
    n = len(points)
    if n < 2:
        return 0.0
    best = 0.0
    for i0 in range(0, n, 256):
        chunk = points[i0:i0 + 256]
        d = torus_dist(chunk[:, None, :], points[None, :, :])
        best = max(best, float(np.max(d)))
    return best


def box_counts(points: np.ndarray, scales=DYADIC_SCALES) -> tuple[int, ...]:
    out = []
    for j in scales:
        cells = np.floor(points * (1 << j)).astype(np.int64)
        cells = np.minimum(cells, (1 << j) - 1)
        out.append(int(len(np.unique(cells, axis=0))))
    return tuple(out)


def classify_class(sample: ClassSample, scales=DYADIC_SCALES) -> Classification:
    """Trichotomy verdict for a class sample.

    Trivial below the diameter threshold; otherwise a box-counting dimension
    estimate over dyadic scales restricted to the scaling regime: scales
    saturated by the finite sample (count above max(n/4, 32)) and scales at
    the sample-diameter regime (count below MIN_BOXES) are dropped before the
    fit.  Banded verdicts, with an honest Indeterminate when ambiguous.
    """
    pts = np.asarray(sample.points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        raise ValueError("empty class sample")
    diameter = sample_diameter(pts)
    if diameter < DIAMETER_TRIVIAL:
        cls = Classification("Trivial", diameter, 0.0, (), (), n)
        sample.diagnostics = cls
        return cls
    counts = box_counts(pts, scales)
    cap = max(n / 4.0, 32.0)
    kept = [(j, c) for j, c in zip(scales, counts) if MIN_BOXES <= c <= cap]
    if len(kept) < 2:
        cls = Classification("Indeterminate", diameter, float("nan"),
                             tuple(j for j, _ in kept), counts, n)
        sample.diagnostics = cls
        return cls
    js = np.array([j for j, _ in kept], dtype=float)
    logs = np.log2([c for _, c in kept])
    slope = float(np.polyfit(js, logs, 1)[0])
    if CURVE_BAND[0] <= slope <= CURVE_BAND[1]:
        verdict = "Curve"
    elif slope > OPEN_MIN:
        verdict = "Open"
    else:
        verdict = "Indeterminate"
    cls = Classification(verdict, diameter, slope, tuple(int(j) for j in js), counts, n)
    sample.diagnostics = cls
    return cls


# ---------------------------------------------------------------------------
# trivial-set scan (desk-scale Gamma_0 restricted to one fiber)

@dataclass(frozen=True)
class TrivialScanResult:
    points: np.ndarray          # grid points fixed by every generator
    grid: np.ndarray
    fixed_mask: np.ndarray
    max_displacement: np.ndarray
    grid_n: int
    tol: float

    @property
    def all_trivial(self) -> bool:
        return bool(np.all(self.fixed_mask))

    @property
    def empty(self) -> bool:
        return not np.any(self.fixed_mask)


def trivial_set_scan(sp: SkewProduct, quads, fiber_grid_n: int, tol: float,
                     region: Region | None = None, generators=None) -> TrivialScanResult:
    """Grid points fixed by all generator loop maps, with the displacement field."""
    gens = standard_generators(sp, quads) if generators is None else list(generators)
    if region is None:
        ticks = (np.arange(fiber_grid_n) + 0.5) / fiber_grid_n
        uu, vv = np.meshgrid(ticks, ticks, indexing="ij")
        grid = np.stack([uu.ravel(), vv.ravel()], axis=-1)
    else:
        grid = region.grid(fiber_grid_n)
    fixed = np.ones(len(grid), dtype=bool)
    max_disp = np.zeros(len(grid))
    for gen in gens:
        d = torus_dist(gen(grid), grid)
        fixed &= d < tol
        max_disp = np.maximum(max_disp, d)
    return TrivialScanResult(points=grid[fixed], grid=grid, fixed_mask=fixed,
                             max_displacement=max_disp, grid_n=fiber_grid_n, tol=tol)
