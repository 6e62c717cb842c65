"""Flat 2-torus geometry: wrapped points, the translation-invariant metric,
rectangular chart regions, and compactly supported smooth bump profiles.

Everything here is pure and operates on plain floats or numpy arrays of
shape (..., 2).  The canonical representative of a torus point is [0, 1)^2;
equality of points always means ``torus_dist < EQUALITY_TOL``, never
coordinate equality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EQUALITY_TOL = 1e-12


def mod1(values):
    """Componentwise reduction mod 1 into [0, 1), safe at the seam.

    ``x % 1.0`` can round to exactly 1.0 for tiny negative inputs; those are
    folded back to 0.0 so the half-open invariant holds bitwise.
    """
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite input to mod1/wrap")
    out = arr % 1.0
    return np.where(out >= 1.0, 0.0, out)


def wrapped_diff(a, b):
    """Shortest displacement vector from ``b`` to ``a``, components in [-1/2, 1/2)."""
    d = (np.asarray(a, dtype=float) - np.asarray(b, dtype=float) + 0.5) % 1.0
    d = np.where(d >= 1.0, 0.0, d)
    return d - 0.5


def torus_dist(a, b):
    """Minimum Euclidean distance over integer translates.

    Symmetric, satisfies the triangle inequality, and bounded by sqrt(2)/2.
    Broadcasts over leading dimensions.
    """
    d = np.abs(wrapped_diff(a, b))
    return np.hypot(d[..., 0], d[..., 1])


@dataclass(frozen=True)
class TorusPoint:
    """A point of the 2-torus with canonical coordinates in [0, 1)^2."""

    u: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValueError("non-finite torus coordinates")
        if not (0.0 <= self.u < 1.0 and 0.0 <= self.v < 1.0):
            raise ValueError(f"coordinates {(self.u, self.v)} not in [0,1)^2; use wrap()")

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v], dtype=float)

    def __iter__(self):
        yield self.u
        yield self.v

    def __array__(self, dtype=None, copy=None):
        return np.array([self.u, self.v], dtype=dtype or float)


def wrap(point) -> TorusPoint:
    """Reduce a coordinate pair mod 1 into a canonical TorusPoint."""
    arr = mod1(np.asarray(point, dtype=float).reshape(2))
    return TorusPoint(float(arr[0]), float(arr[1]))


def lift(point) -> np.ndarray:
    """Canonical lift of a point to the fundamental domain [0,1)^2."""
    return np.asarray(point, dtype=float).reshape(2).copy()


def lift_near(point, reference) -> np.ndarray:
    """The lift of ``point`` closest to the (already lifted) ``reference``."""
    ref = np.asarray(reference, dtype=float)
    return ref + wrapped_diff(point, ref)


def points_equal(a, b, tol: float = EQUALITY_TOL) -> bool:
    return bool(torus_dist(a, b) < tol)


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle on the fiber torus, given by center and half-widths.

    Must fit inside one chart: half-widths are capped below 1/2.
    """

    center: tuple[float, float]
    half: tuple[float, float]

    def __post_init__(self):
        h = np.asarray(self.half, float)
        if not np.all((h > 0) & (h < 0.5)):
            raise ValueError("region half-widths must lie in (0, 1/2)")

    def grid(self, n: int) -> np.ndarray:
        """(n*n, 2) array of wrapped grid points covering the region."""
        c = np.asarray(self.center, float)
        h = np.asarray(self.half, float)
        us = np.linspace(c[0] - h[0], c[0] + h[0], n)
        vs = np.linspace(c[1] - h[1], c[1] + h[1], n)
        uu, vv = np.meshgrid(us, vs, indexing="ij")
        return mod1(np.stack([uu.ravel(), vv.ravel()], axis=-1))

    def contains(self, points, margin: float = 0.0) -> np.ndarray:
        d = np.abs(wrapped_diff(points, np.asarray(self.center, float)))
        h = np.asarray(self.half, float) + margin
        return (d[..., 0] <= h[0]) & (d[..., 1] <= h[1])

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        c = np.asarray(self.center, float)
        h = np.asarray(self.half, float)
        offs = rng.uniform(-h, h, size=(m, 2))
        return mod1(c + offs)


def _smoothstep_coeffs(order: int) -> np.ndarray:
    """Coefficients (ascending powers of t) of the C^order smoothstep S_k.

    S_k is the unique degree 2k+1 polynomial with S_k(0)=0, S_k(1)=1 and k
    vanishing derivatives at both ends.  order=2 gives 10t^3 - 15t^4 + 6t^5.
    """
    k = order
    coeffs = np.zeros(2 * k + 2)
    for i in range(k + 1):
        c = math.comb(k + i, i) * math.comb(2 * k + 1, k - i) * (-1) ** i
        coeffs[k + 1 + i] = c
    return coeffs


@dataclass(frozen=True)
class BumpProfile:
    """Radial bump: 1 on [0, inner], 0 on [outer, inf), smooth monotone between.

    The transition band uses the polynomial smoothstep of the declared order,
    so the junctions are exactly C^order (order=2 is the quintic
    1 - (10t^3 - 15t^4 + 6t^5) on the band).
    """

    inner_radius: float
    outer_radius: float
    order: int = 2
    _poly: np.ndarray = field(init=False, repr=False, compare=False)
    _dpoly: np.ndarray = field(init=False, repr=False, compare=False)
    _d2poly: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.inner_radius > 0):
            raise ValueError("inner_radius must be positive")
        if not (self.outer_radius > self.inner_radius):
            raise ValueError("outer_radius must exceed inner_radius")
        if not (isinstance(self.order, int) and self.order >= 2):
            raise ValueError("smoothness order must be an integer >= 2")
        poly = _smoothstep_coeffs(self.order)
        dpoly = np.polynomial.polynomial.polyder(poly)
        d2poly = np.polynomial.polynomial.polyder(dpoly)
        object.__setattr__(self, "_poly", poly)
        object.__setattr__(self, "_dpoly", dpoly)
        object.__setattr__(self, "_d2poly", d2poly)

    @property
    def band(self) -> float:
        return self.outer_radius - self.inner_radius

    def value(self, r):
        return self.value_and_derivatives(r, 0)[0]

    def value_and_derivatives(self, r, n_derivs: int = 2):
        """Profile value and its first ``n_derivs`` radial derivatives at r >= 0."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("radius must be nonnegative")
        t = np.clip((r - self.inner_radius) / self.band, 0.0, 1.0)
        if self.order == 2:
            # hand-rolled quintic smoothstep: the hot path of the bump flow.
            # s, s', s'' all reach their clip values exactly (s(1) = 1 in
            # exact float arithmetic), so no branch masks are needed.
            t2 = t * t
            s = t2 * t * (10.0 + t * (-15.0 + 6.0 * t))
            out = [1.0 - s]
            if n_derivs >= 1:
                out.append(t2 * (1.0 + t * (-2.0 + t)) * (-30.0 / self.band))
            if n_derivs >= 2:
                out.append(t * (60.0 + t * (-180.0 + 120.0 * t)) / -self.band**2)
            return tuple(out)
        in_band = (r > self.inner_radius) & (r < self.outer_radius)
        s = np.polynomial.polynomial.polyval(t, self._poly)
        val = np.where(r <= self.inner_radius, 1.0, np.where(in_band, 1.0 - s, 0.0))
        out = [val]
        if n_derivs >= 1:
            ds = np.polynomial.polynomial.polyval(t, self._dpoly)
            out.append(np.where(in_band, -ds / self.band, 0.0))
        if n_derivs >= 2:
            d2s = np.polynomial.polynomial.polyval(t, self._d2poly)
            out.append(np.where(in_band, -d2s / self.band**2, 0.0))
        return tuple(out)

    def max_abs_derivative(self) -> float:
        """Upper bound on |d value/dr|, attained mid-band."""
        ts = np.linspace(0.0, 1.0, 257)
        return float(np.max(np.abs(np.polynomial.polynomial.polyval(ts, self._dpoly)))) / self.band


def bump_eval(profile: BumpProfile, r):
    """Evaluate a bump profile at radius r (scalar or array); errors on r < 0."""
    val = profile.value(r)
    return float(val) if np.isscalar(r) or np.asarray(r).ndim == 0 else val
