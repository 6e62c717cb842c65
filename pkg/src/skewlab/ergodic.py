"""Birkhoff-average diagnostics and su-leg shadowing checks.

These probes never claim ergodicity; they report whether the cross-initial-
condition spread of time averages collapses at the rate an ergodic system
would show at desk scale, under a fixed, named set of observables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .anosov import leaf_coordinate
from .errors import BrokenPath, ShadowFailure
from .fiber import SkewProduct
from .holonomy import HolonomyMap
from .torus import lift, mod1, torus_dist

ERGODIC_DECAY_FACTOR = 1.5
_DIST_FLOOR = 1e-13


def observable(name: str):
    """Fixed named observables so reports stay comparable across experiments."""
    if name == "fiber_cos":
        return lambda xs, ys: np.cos(2 * math.pi * ys[..., 0])
    if name == "base_cos":
        return lambda xs, ys: np.cos(2 * math.pi * xs[..., 0])
    if name == "product_cos":
        return lambda xs, ys: (np.cos(2 * math.pi * ys[..., 0])
                               * np.cos(2 * math.pi * xs[..., 0]))
    raise ValueError(f"unknown observable {name!r}; "
                     "choose fiber_cos, base_cos or product_cos")


def birkhoff(sp: SkewProduct, obs, init, n: int) -> float:
    """Time average (1/n) sum_{k<n} obs(F^k(init)) along the exact float orbit."""
    if n < 1:
        raise ValueError("n must be >= 1")
    fn = observable(obs) if isinstance(obs, str) else obs
    x = np.asarray(init[0], float).reshape(2)
    y = np.asarray(init[1], float).reshape(2)
    total = 0.0
    for _ in range(n):
        total += float(fn(x, y))
        x, y = sp.step(x, y)
    return total / n


@dataclass(frozen=True)
class ErgodicReport:
    observable: str
    n_iterations: int
    n_initial_conditions: int
    seed: int
    checkpoints: tuple[int, ...]
    sigma: tuple[float, ...]
    per_ic_averages: tuple[float, ...]
    verdict: str  # ERGODIC-LIKE | NON-ERGODIC-LIKE

    @property
    def decay_ratio(self) -> float:
        return self.sigma[-1] / self.sigma[0] if self.sigma[0] > 0 else math.inf


def _frozen_between_events(family) -> bool:
    """True when fiber coordinates change only inside bump base supports."""
    from .fiber import ConstantFamily, IdentityMap
    from .perturbation import PerturbedFamily

    return (isinstance(family, PerturbedFamily)
            and isinstance(family.inner, ConstantFamily)
            and isinstance(family.inner.fiber_map, IdentityMap))


def _scan_generic(sp, fn, xs, ys, n, checkpoints):
    sums = np.zeros(len(xs))
    sigma = []
    finals = None
    cp = set(checkpoints)
    for k in range(1, n + 1):
        sums += fn(xs, ys)
        xs, ys = sp.step(xs, ys)
        if k in cp:
            avgs = sums / k
            sigma.append(float(np.std(avgs)))
            if k == n:
                finals = avgs
    return sigma, finals


def _scan_event_driven(sp, fn, xs, ys, n, checkpoints):
    """Fast path for identity-fiber bump perturbations.

    The fiber state is piecewise constant between visits of the base orbit to
    a bump support, so base orbits and activations vectorize wholesale, bump
    events batch across initial conditions rank by rank, and observables sum
    in closed form over the frozen stretches.
    """
    from .perturbation import _bump_fiber_action

    m = len(xs)
    bumps = sp.family.bumps
    orbit = np.empty((n, m, 2))
    cur = xs
    for k in range(n):
        orbit[k] = cur
        cur = sp.base.apply(cur)
    activations = [b.base_bump.value(torus_dist(orbit, np.asarray(b.base_center, float)))
                   for b in bumps]  # each (n, m)

    event_steps = []   # per IC: sorted step indices with an active bump
    event_bump = []    # per IC: which bump fired
    event_t = []
    for i in range(m):
        cols = [act[:, i] for act in activations]
        mask = np.zeros(n, dtype=bool)
        for c in cols:
            mask |= c > 0
        steps = np.flatnonzero(mask)
        which = np.zeros(len(steps), dtype=int)
        tvals = np.zeros(len(steps))
        for b_idx, c in enumerate(cols):
            active = c[steps] > 0
            which[active] = b_idx   # base supports disjoint: at most one fires
            tvals[active] = c[steps][active]
        event_steps.append(steps)
        event_bump.append(which)
        event_t.append(tvals)

    max_rank = max((len(s) for s in event_steps), default=0)
    timelines = [np.empty((len(s) + 1, 2)) for s in event_steps]
    state = ys.copy()
    for i in range(m):
        timelines[i][0] = state[i]
    for rank in range(max_rank):
        for b_idx, bump in enumerate(bumps):
            sel = [i for i in range(m)
                   if rank < len(event_steps[i]) and event_bump[i][rank] == b_idx]
            if not sel:
                continue
            idx = np.array(sel)
            ts = np.array([event_t[i][rank] for i in sel])
            state[idx] = _bump_fiber_action(bump, ts, state[idx], inverse=True)
        for i in range(m):
            if rank < len(event_steps[i]):
                timelines[i][rank + 1] = state[i]

    sums = np.zeros((len(checkpoints), m))
    finals = np.zeros(m)
    steps_axis = np.arange(n)
    for i in range(m):
        ranks = np.searchsorted(event_steps[i], steps_axis, side="left")
        fiber = timelines[i][ranks]
        vals = fn(orbit[:, i, :], fiber)
        csum = np.cumsum(vals)
        for j, cpn in enumerate(checkpoints):
            sums[j, i] = csum[cpn - 1]
        finals[i] = csum[n - 1] / n
    sigma = [float(np.std(sums[j] / cpn)) for j, cpn in enumerate(checkpoints)]
    return sigma, finals


def ergodic_scan(sp: SkewProduct, obs_name: str, n: int, m_ics: int,
                 seed: int) -> ErgodicReport:
    """Cross-IC deviation of running Birkhoff averages at n/4, n/2 and n.

    ERGODIC-LIKE means sigma(n) < sigma(n/4)/1.5; deterministic given the seed.
    """
    if m_ics < 2:
        raise ValueError("need at least two initial conditions")
    fn = observable(obs_name)
    rng = np.random.default_rng(seed)
    xs = rng.random((m_ics, 2))
    ys = rng.random((m_ics, 2))
    checkpoints = sorted({max(1, n // 4), max(1, n // 2), n})
    if _frozen_between_events(sp.family) and n * m_ics >= 10_000:
        sigma, finals = _scan_event_driven(sp, fn, xs, ys, n, checkpoints)
    else:
        sigma, finals = _scan_generic(sp, fn, xs, ys, n, checkpoints)
    s0, s_end = sigma[0], sigma[-1]
    verdict = "ERGODIC-LIKE" if s_end < s0 / ERGODIC_DECAY_FACTOR else "NON-ERGODIC-LIKE"
    return ErgodicReport(observable=obs_name, n_iterations=n,
                         n_initial_conditions=m_ics, seed=seed,
                         checkpoints=tuple(checkpoints), sigma=tuple(sigma),
                         per_ic_averages=tuple(float(a) for a in finals),
                         verdict=verdict)


@dataclass(frozen=True)
class ShadowReport:
    kind: str
    distances: np.ndarray
    ratio_estimate: float


def shadow_check(sp: SkewProduct, leg, v, n_max: int = 50,
                 holonomy: HolonomyMap | None = None) -> ShadowReport:
    """Contraction table for an su-leg pairing (x, v) with (y, H(v)).

    The base pair is tracked in leaf coordinates along the anchor orbit (the
    same device the holonomy itself uses); the fiber pair evolves through the
    true fiber maps.  Distances must decay at ratio <= lambda + 0.1 beyond a
    burn-in, else ShadowFailure.
    """
    kind, x, y = leg
    a = sp.base
    s, resid = leaf_coordinate(a, kind, x, y)
    if resid > 1e-10:
        raise BrokenPath(f"leg endpoints not on a common {kind} leaf")
    if holonomy is None:
        from .holonomy import stable_holonomy, unstable_holonomy

        maker = stable_holonomy if kind == "stable" else unstable_holonomy
        holonomy = maker(sp, x, y)
    v = np.asarray(v, float).reshape(2)
    hv = holonomy(v)
    e = a.eigen_direction(kind)
    rate = a.contraction_rate(kind)
    forward = kind == "stable"

    anchors = a.orbit(lift(x), n_max, forward=forward)
    dist = np.empty(n_max + 1)
    fib_x, fib_y = v.copy(), hv.copy()
    offs = s
    for k in range(n_max + 1):
        base_gap = abs(offs)
        fiber_gap = float(torus_dist(fib_x, fib_y))
        dist[k] = math.hypot(base_gap, fiber_gap)
        if k == n_max:
            break
        xk = mod1(anchors[k])
        yk = mod1(anchors[k] + offs * e)
        if forward:
            fib_x = sp.family.apply(xk, fib_x)
            fib_y = sp.family.apply(yk, fib_y)
        else:
            xk1 = mod1(anchors[k + 1])
            yk1 = mod1(anchors[k + 1] + offs * rate * e)
            fib_x = sp.family.inverse(xk1, fib_x)
            fib_y = sp.family.inverse(yk1, fib_y)
        offs *= rate

    lam = abs(rate)
    burn_in = 3
    window = 4
    step_ratios = []
    win_ratios = []
    for k in range(burn_in, n_max):
        if dist[k] < _DIST_FLOOR or dist[k + 1] < _DIST_FLOOR:
            break
        step_ratios.append(dist[k + 1] / dist[k])
        if k + window <= n_max and dist[k + window] > _DIST_FLOOR:
            win_ratios.append((dist[k + window] / dist[k]) ** (1.0 / window))
    # per-step ratios may stall where the field gradient vanishes along the
    # orbit; the contraction bound applies to windowed rates
    if win_ratios and max(win_ratios) > lam + 0.1:
        raise ShadowFailure(
            f"windowed distance ratio {max(win_ratios):.4f} exceeds "
            f"{lam + 0.1:.4f} (holonomy or domination bug)")
    if len(dist) > burn_in + window and dist[burn_in] > _DIST_FLOOR:
        tail = dist[burn_in:]
        live = tail > _DIST_FLOOR
        idx = np.flatnonzero(live)
        for k in idx[:-window]:
            if tail[k + window] >= tail[k] and tail[k + window] > _DIST_FLOOR:
                raise ShadowFailure("distances not eventually decreasing")
    est = float(np.exp(np.mean(np.log(step_ratios)))) if step_ratios else lam
    return ShadowReport(kind=kind, distances=dist, ratio_estimate=est)
