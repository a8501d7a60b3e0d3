"""Integration engines for singular pair integrals and volume integrals.

Two pair engines share one Estimate type:

* ``mc_pair_integrate``: stratified importance-sampling Monte Carlo.  The
  outer point x is drawn uniformly from a ball sized by the field's decay
  envelope; the offset h = y - x is drawn log-uniformly in radius
  (density proportional to ``|h|^-N``) inside radial strata, matching the
  kernel's scale invariance.  Randomness is keyed per (master_seed,
  chunk, stratum), and per-chunk partials are reduced in ascending chunk
  order, so results are bit-identical regardless of worker count and of
  any inner cutoff inside the integrand's exact-zero region.

* ``radial_pair_integrate``: deterministic quadrature for radial fields.
  The pair integral reduces to (r, s, theta) with surface factor
  ``|S^{N-1}| |S^{N-2}| r^{N-1} s^{N-1} sin(theta)^{N-2}``; the theta
  integral is evaluated via the substitution t = |x-y|^2, which turns it
  into a 1D integral on [(r-s)^2, (r+s)^2] handled by graded panels, so
  the near-diagonal kernel blowup costs no accuracy.

Both report rigorous tail bounds for the truncated regions where the
field metadata permits one.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DivergentIntegralError, PreconditionError
from .fields import RadialProfile1D, ScalarField

__all__ = [
    "Estimate",
    "McSpec",
    "RadialSpec",
    "PairContext",
    "RadialWeight",
    "mc_pair_integrate",
    "mc_pair_integrate_many",
    "radial_pair_integrate",
    "volume_integrate",
    "ball_volume",
    "sphere_surface",
]


def sphere_surface(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(n: int, radius: float = 1.0) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0) * radius ** n


# ---------------------------------------------------------------------------
# result type and specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    """A numerical value with error accounting.

    stderr is 0 for deterministic engines; ``tail_bound`` bounds the mass
    lost to domain truncation; ``discrepancy`` is the grid-refinement
    difference reported by the deterministic engine.
    """

    value: float
    stderr: float = 0.0
    n_effective: int = 0
    tail_bound: float = 0.0
    method: str = "closed_form"
    diverged: bool = False
    discrepancy: float = 0.0

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr,
                "n_effective": self.n_effective, "tail_bound": self.tail_bound,
                "method": self.method, "diverged": self.diverged,
                "discrepancy": self.discrepancy}


@dataclass(frozen=True)
class McSpec:
    """Monte Carlo sampling plan.

    ``chunk_size`` must divide ``n_samples`` and be divisible by
    ``radial_strata`` so per-stratum allocation is identical in every
    chunk; this is what makes worker count irrelevant to the result.
    ``h_max`` and ``x_radius``, normally derived from field metadata,
    can be pinned explicitly for common-random-number pairing.
    """

    master_seed: int
    n_samples: int = 192000
    chunk_size: int = 4800
    outer_radius_eps: float = 1e-5
    radial_strata: int = 24
    h_max: Optional[float] = None
    x_radius: Optional[float] = None

    def __post_init__(self):
        if self.n_samples < self.chunk_size:
            raise PreconditionError("n_samples must be >= chunk_size")
        if self.n_samples % self.chunk_size != 0:
            raise PreconditionError("chunk_size must divide n_samples")
        if self.chunk_size % self.radial_strata != 0:
            raise PreconditionError("radial_strata must divide chunk_size")
        if self.outer_radius_eps <= 0:
            raise PreconditionError("outer_radius_eps must be positive")

    def to_dict(self) -> dict:
        return {"master_seed": self.master_seed, "n_samples": self.n_samples,
                "chunk_size": self.chunk_size, "outer_radius_eps": self.outer_radius_eps,
                "radial_strata": self.radial_strata, "h_max": self.h_max,
                "x_radius": self.x_radius}


@dataclass(frozen=True)
class RadialSpec:
    """Grid sizes for the reduced (r, s, theta) quadrature."""

    n_r: int = 48
    n_s: int = 30
    n_theta: int = 96
    r_max: float = 0.0  # 0 -> derived from the field's decay envelope

    def __post_init__(self):
        if min(self.n_r, self.n_s, self.n_theta) <= 0:
            raise PreconditionError("all grid sizes must be positive")

    def to_dict(self) -> dict:
        return {"n_r": self.n_r, "n_s": self.n_s, "n_theta": self.n_theta,
                "r_max": self.r_max}


# ---------------------------------------------------------------------------
# small deterministic quadrature helpers
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _gl_rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w  # mapped to [0, 1]


def panel_nodes(panels: np.ndarray, order: int):
    """Gauss-Legendre nodes/weights on a union of panels given by breakpoints."""
    xi, wi = _gl_rule(order)
    a = panels[:-1][:, None]
    width = np.diff(panels)[:, None]
    nodes = (a + width * xi[None, :]).ravel()
    weights = (width * wi[None, :]).ravel()
    return nodes, weights


def uniform_panels(a: float, b: float, n: int, splits: Sequence[float] = ()) -> np.ndarray:
    pts = np.linspace(a, b, n + 1)
    extra = [s for s in splits if a < s < b]
    return np.unique(np.concatenate([pts, np.asarray(extra, dtype=float)]))


def graded_panels(a: float, b: float, depth: int, toward: str = "both") -> np.ndarray:
    """Panels on [a, b] geometrically refined toward one or both endpoints.

    One-sided grading keeps the doubling widths all the way across; the
    two-sided version lets the ladders meet in the middle.
    """
    span = b - a
    if span <= 0:
        return np.array([a, b])
    widths = span * 2.0 ** (-np.arange(depth, 0, -1, dtype=float))
    left = a + np.concatenate([[0.0], np.cumsum(widths)])
    right = b - np.concatenate([[0.0], np.cumsum(widths)])[::-1]
    pts = [np.array([a, b])]
    if toward == "left":
        pts.append(left)
    elif toward == "right":
        pts.append(right)
    else:
        pts.append(left[left < a + 0.5 * span])
        pts.append(right[right > a + 0.5 * span])
    return np.unique(np.concatenate(pts))


# ---------------------------------------------------------------------------
# chunked Monte Carlo scaffolding
# ---------------------------------------------------------------------------

def _workers() -> int:
    try:
        return max(1, int(os.environ.get("WORKERS", "1")))
    except ValueError:
        return 1


def _run_chunks(chunk_fn: Callable[[int], tuple], n_chunks: int):
    """Evaluate chunks (possibly concurrently) and return results by index."""
    w = _workers()
    if w <= 1 or n_chunks == 1:
        return [chunk_fn(c) for c in range(n_chunks)]
    with ThreadPoolExecutor(max_workers=min(w, n_chunks)) as pool:
        return list(pool.map(chunk_fn, range(n_chunks)))


def _reduce_triples(triples, scale: float):
    """Ordered reduction of per-chunk (sum, sumsq, count) into value/stderr/ess.

    ``scale`` multiplies the raw mean (stratification factor).  stderr is
    computed from chunk means, which are iid replicas of the estimator.
    """
    s_tot = 0.0
    q_tot = 0.0
    n_tot = 0
    means = []
    for s, q, n in triples:  # ascending chunk order
        s_tot += s
        q_tot += q
        n_tot += n
        means.append(scale * s / n)
    value = scale * s_tot / n_tot
    c = len(means)
    if c >= 2:
        m = np.asarray(means)
        stderr = float(np.sqrt(np.sum((m - value) ** 2) / (c * (c - 1))))
    else:
        # single chunk: fall back to the per-sample variance
        var = max(q_tot / n_tot - (s_tot / n_tot) ** 2, 0.0)
        stderr = scale * math.sqrt(var / n_tot)
    ess = int((s_tot * s_tot) / q_tot) if q_tot > 0 else 0
    return value, stderr, ess


def _unit_rows(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=1)
    norms = np.where(norms > 0, norms, 1.0)
    return v / norms[:, None]


# ---------------------------------------------------------------------------
# Monte Carlo pair engine
# ---------------------------------------------------------------------------

@dataclass
class PairContext:
    """Geometry and workload description for the MC pair engine.

    ``integrands`` are maps (x_pts, y_pts, |y-x|) -> nonnegative values;
    they include the kernel.  ``numerator`` and ``kernel_p`` describe the
    kernel's decay (numerator / |h|^{N+p}) and are used only to derive
    the outer truncation radius and its rigorous tail bound.  When
    ``symmetric`` is set the integrand must be symmetric under swapping
    x and y, and ``rank_fn`` (typically |u|) must satisfy: the integrand
    vanishes whenever rank(x) <= numerator-specific floor; the engine
    then restricts to the half-domain rank(x) >= rank(y) and doubles.
    """

    dim: int
    x_center: np.ndarray
    x_radius: float
    kernel_p: float
    numerator: float
    integrands: tuple
    inner_cutoff: float = 0.0
    symmetric: bool = False
    rank_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    extra_tail: float = 0.0


def _derive_h_max(ctx: PairContext, spec: McSpec):
    vol = ball_volume(ctx.dim, ctx.x_radius)
    omega = sphere_surface(ctx.dim)
    fac = 2.0 if ctx.symmetric else 1.0
    p = ctx.kernel_p
    if spec.h_max is not None:
        h = spec.h_max
    else:
        h = (fac * vol * omega * ctx.numerator / (p * spec.outer_radius_eps)) ** (1.0 / p)
        h = max(h, 4.0 * ctx.x_radius, 10.0 * ctx.inner_cutoff, 1e-12)
    tail = fac * vol * omega * ctx.numerator * h ** (-p) / p
    return h, tail


def mc_pair_integrate_many(ctx: PairContext, spec: McSpec):
    """Stratified MC estimates for several integrands on one sample stream.

    Sharing the stream makes pointwise integrand orderings carry over to
    the estimates exactly (common random numbers).
    """
    n = ctx.dim
    rx = spec.x_radius if spec.x_radius is not None else ctx.x_radius
    ctx = replace(ctx, x_radius=rx)
    if rx <= 0:
        return [Estimate(0.0, 0.0, 0, ctx.extra_tail, "mc") for _ in ctx.integrands]
    h_max, h_tail = _derive_h_max(ctx, spec)
    tail_bound = h_tail + ctx.extra_tail
    k_strata = spec.radial_strata
    edges = np.geomspace(h_max * 1e-9, h_max, k_strata + 1)
    log_widths = np.log(edges[1:] / edges[:-1])
    active = np.nonzero(edges[1:] > ctx.inner_cutoff)[0]
    m = spec.chunk_size // k_strata
    n_chunks = spec.n_samples // spec.chunk_size
    vol = ball_volume(n, rx)
    omega = sphere_surface(n)
    n_int = len(ctx.integrands)

    def one_chunk(c: int):
        s_acc = np.zeros(n_int)
        q_acc = np.zeros(n_int)
        for k in active:
            rng = np.random.default_rng([spec.master_seed, c, int(k)])
            xdir = rng.standard_normal((m, n))
            xu = rng.random(m)
            hdir = rng.standard_normal((m, n))
            hu = rng.random(m)
            x = ctx.x_center + rx * (xu ** (1.0 / n))[:, None] * _unit_rows(xdir)
            rho = edges[k] * np.exp(log_widths[k] * hu)
            y = x + rho[:, None] * _unit_rows(hdir)
            base = vol * (log_widths[k] * omega) * rho ** n
            if ctx.symmetric:
                rk_x = ctx.rank_fn(x)
                rk_y = ctx.rank_fn(y)
                base = base * np.where(rk_x >= rk_y, 2.0, 0.0)
            for i, f in enumerate(ctx.integrands):
                zeta = f(x, y, rho) * base
                s_acc[i] += float(zeta.sum())
                q_acc[i] += float((zeta * zeta).sum())
        return s_acc, q_acc

    results = _run_chunks(one_chunk, n_chunks)
    out = []
    for i in range(n_int):
        triples = [(results[c][0][i], results[c][1][i], spec.chunk_size)
                   for c in range(n_chunks)]
        value, stderr, ess = _reduce_triples(triples, float(k_strata))
        out.append(Estimate(value, stderr, ess, tail_bound, "mc"))
    return out


def mc_pair_integrate(ctx: PairContext, spec: McSpec) -> Estimate:
    """Single-integrand front end for the MC pair engine."""
    if len(ctx.integrands) != 1:
        raise PreconditionError("mc_pair_integrate expects exactly one integrand")
    return mc_pair_integrate_many(ctx, spec)[0]


# ---------------------------------------------------------------------------
# theta-reduced kernel for the radial engine
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _xi_rule(order: int):
    """Nodes/weights on [0, 1], geometrically graded toward both endpoints.

    The reduced theta integral in t = |x-y|^2 concentrates at its lower
    endpoint when r is close to s, and for even N the integrand carries
    half-power factors vanishing at both endpoints; two-sided grading
    down to 1e-16 resolves any layer the outer quadrature can produce.
    """
    ratio = math.sqrt(10.0)
    lo = [0.0]
    v = 1e-16
    while v < 0.5:
        lo.append(v)
        v *= ratio
    hi = [1.0 - b for b in lo if 1.0 - b > 0.5]
    bps = np.unique(np.asarray(lo + hi + [0.5, 1.0]))
    return panel_nodes(bps, order)


def theta_reduced_kernel(r, s, n: int, p: float, order: int = 6,
                         d_window: Optional[tuple] = None) -> np.ndarray:
    """Integral over theta in [0, pi] of sin(theta)^{n-2} / d^{n+p},
    with d^2 = r^2 + s^2 - 2 r s cos(theta), optionally restricted to
    d in [d_window[0], d_window[1]].

    Uses t = d^2:  T = (2 r s)^{-(n-2)} * int ((t-a)(b-t))^{(n-3)/2} t^{-(n+p)/2} dt
    over [a, b] = [(r-s)^2, (r+s)^2].
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    r, s = np.broadcast_arrays(r, s)
    shape = r.shape
    rf = r.ravel()
    sf = s.ravel()
    a = (rf - sf) ** 2
    b = (rf + sf) ** 2
    lo, hi = a.copy(), b.copy()
    if d_window is not None:
        lo = np.maximum(lo, d_window[0] ** 2)
        hi = np.minimum(hi, d_window[1] ** 2)
    rs = rf * sf
    ok = (hi > lo) & (rs > 0)
    out = np.zeros_like(rf)
    if np.any(ok):
        xi, w = _xi_rule(order)
        t = lo[ok, None] + (hi[ok] - lo[ok])[:, None] * xi[None, :]
        e = (n - 3) / 2.0
        ta = np.maximum(t - a[ok, None], 0.0)
        bt = np.maximum(b[ok, None] - t, 0.0)
        if e == 0.0:
            poly = np.ones_like(t)
        else:
            poly = (ta * bt) ** e
        integ = poly * t ** (-(n + p) / 2.0)
        vals = (integ @ w) * (hi[ok] - lo[ok])
        out[ok] = vals * (2.0 * rs[ok]) ** (-(n - 2.0))
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# level crossings for exact indicator geometry
# ---------------------------------------------------------------------------

def _scalarize(g):
    return lambda x: float(g(np.array([x]))[0])


def _probe_grid(lo: float, hi: float, bulk: Optional[float] = None,
                n_dense: int = 2048) -> np.ndarray:
    """Bracketing grid: dense where the profile has structure, geometric
    beyond (profiles are monotone out there, so sparse brackets suffice)."""
    if bulk is None or bulk >= hi:
        return np.linspace(lo, hi, n_dense)
    dense = np.linspace(lo, bulk, n_dense)
    far = np.geomspace(max(bulk, 1e-12), hi, 128)
    return np.unique(np.concatenate([dense, far, [hi]]))


def _level_crossings(g, level: float, lo: float, hi: float,
                     probe_pts: Optional[np.ndarray] = None):
    """All roots of g(s) = level on [lo, hi], found by dense bracketing."""
    xs = probe_pts if probe_pts is not None else np.linspace(lo, hi, 2048)
    vals = g(xs) - level
    sign = np.sign(vals)
    roots = []
    gs = _scalarize(g)
    f = lambda x: gs(x) - level
    for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        roots.append(brentq(f, xs[i], xs[i + 1], xtol=1e-14, rtol=1e-15))
    for i in np.nonzero(vals == 0.0)[0]:
        roots.append(float(xs[i]))
    return sorted(roots)


def _excess_intervals(g, a_val: float, delta: float, lo: float, hi: float,
                      probe_pts: Optional[np.ndarray] = None):
    """Maximal intervals of {s in [lo, hi]: |g(s) - a_val| > delta}."""
    cuts = ([lo] + _level_crossings(g, a_val + delta, lo, hi, probe_pts)
            + _level_crossings(g, a_val - delta, lo, hi, probe_pts) + [hi])
    cuts = sorted(set(cuts))
    gs = _scalarize(g)
    intervals = []
    for e1, e2 in zip(cuts[:-1], cuts[1:]):
        if e2 - e1 <= 0:
            continue
        mid = 0.5 * (e1 + e2)
        if abs(gs(mid) - a_val) > delta:
            if intervals and abs(intervals[-1][1] - e1) < 1e-14 * max(1.0, hi):
                intervals[-1] = (intervals[-1][0], e2)
            else:
                intervals.append((e1, e2))
    return intervals


# ---------------------------------------------------------------------------
# radial pair engine
# ---------------------------------------------------------------------------

@dataclass
class RadialWeight:
    """Numerator of the pair integrand for the radial engine.

    ``pair_fn(a, b)`` maps profile values (a, b) = (g(r), g(s)) to the
    nonnegative numerator weight.  ``threshold`` marks the exact
    indicator structure |a - b| > threshold, which lets the engine carve
    the admissible s-intervals exactly; ``zero_sep`` is a radius in
    |r - s| below which the weight vanishes identically (threshold /
    Lipschitz).  ``d_window`` hard-restricts the pair distance.
    ``numerator`` scales the rigorous tail bound.

    For smooth symmetric weights (envelope functionals) set
    ``symmetric_far``: the engine then integrates r over [0, r_range]
    and s out to [0, s_range] with ``s_range >> r_range``, doubling the
    s > r_range portion by symmetry; ``tail_hint`` is the caller's bound
    on everything beyond that geometry.
    """

    pair_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    threshold: Optional[float] = None
    zero_sep: float = 0.0
    d_window: Optional[tuple] = None
    numerator: float = 1.0
    symmetric_far: bool = False
    r_range: Optional[float] = None
    s_range: Optional[float] = None
    tail_hint: float = 0.0


def _pair_prefactor(n: int) -> float:
    return sphere_surface(n) * sphere_surface(n - 1)


def _s_branch_panels(e1: float, e2: float, depth: int, knots) -> np.ndarray:
    pts = graded_panels(e1, e2, depth=depth, toward="both")
    inner = [k for k in knots if e1 < k < e2]
    if inner:
        pts = np.unique(np.concatenate([pts, np.asarray(inner, dtype=float)]))
    return pts


def _radial_indicator_value(profile: RadialProfile1D, kernel_p: float,
                            weight: RadialWeight, spec: RadialSpec, dim: int,
                            order_r: int, order_s: int, order_t: int) -> float:
    """Indicator path: the admissible s-set is carved exactly per r node."""
    g = profile.g
    delta = weight.threshold
    s_max = spec.r_max
    r_half = profile.decay_radius(delta / 2.0)
    if r_half <= 0.0:
        return 0.0
    r_half = min(r_half, s_max)
    knots = profile.knots
    bulk = min(profile.decay_radius(1e-4 * delta), s_max)
    probe_pts = _probe_grid(0.0, s_max, bulk)

    if profile.monotone_decreasing:
        # unordered pairs: 2 * { r < s, g(r) - g(s) > delta }
        tops = _level_crossings(g, delta, 0.0, s_max, probe_pts)
        if not tops:
            return 0.0
        r_top = tops[-1]
        gs = _scalarize(g)
        r_panels = uniform_panels(0.0, r_top, spec.n_r, splits=knots)
        r_nodes, r_w = panel_nodes(r_panels, order_r)
        total = 0.0
        for rn, rw in zip(r_nodes, r_w):
            target = gs(rn) - delta
            if gs(s_max) >= target:
                continue  # admissible s lies beyond s_max; covered by tail bound
            s2 = brentq(lambda s: gs(s) - target, rn, s_max, xtol=1e-14, rtol=1e-15)
            panels = _s_branch_panels(s2, s_max, spec.n_s, knots)
            sn, sw = panel_nodes(panels, order_s)
            t_vals = theta_reduced_kernel(rn, sn, dim, kernel_p, order=order_t,
                                          d_window=weight.d_window)
            w_vals = weight.pair_fn(np.full_like(sn, gs(rn)), g(sn))
            total += rw * rn ** (dim - 1) * float(np.sum(sw * w_vals * t_vals * sn ** (dim - 1)))
        return 2.0 * _pair_prefactor(dim) * total

    # generic path: r over [0, r_half], exact intervals in s over [0, s_max];
    # the region {r > r_half, s <= r_half} equals by symmetry the portion of
    # the main integral with s > r_half, which is added once more.
    gs = _scalarize(g)
    r_panels = uniform_panels(0.0, r_half, spec.n_r, splits=knots)
    r_nodes, r_w = panel_nodes(r_panels, order_r)
    total = 0.0
    extra = 0.0
    for rn, rw in zip(r_nodes, r_w):
        a_val = gs(rn)
        for e1, e2 in _excess_intervals(g, a_val, delta, 0.0, s_max, probe_pts):
            panels = _s_branch_panels(e1, e2, spec.n_s, knots)
            sn, sw = panel_nodes(panels, order_s)
            t_vals = theta_reduced_kernel(rn, sn, dim, kernel_p, order=order_t,
                                          d_window=weight.d_window)
            w_vals = weight.pair_fn(np.full_like(sn, a_val), g(sn))
            contrib = rw * rn ** (dim - 1) * (sw * w_vals * t_vals * sn ** (dim - 1))
            total += float(np.sum(contrib))
            extra += float(np.sum(contrib[sn > r_half]))
    return _pair_prefactor(dim) * (total + extra)


def _s_panels_around(rn: float, lo: float, hi: float, depth: int, knots,
                     base: int = 12) -> np.ndarray:
    """Panels on [lo, hi]: coarse base grid, graded refinement at s = rn,
    graded coverage of the far tail, split at profile knots."""
    near_hi = min(hi, max(2.0 * rn, rn + 1.0))
    bps = [np.linspace(lo, near_hi, base + 1)]
    if lo < rn < hi:
        bps.append(graded_panels(max(lo, rn - 0.5 * (near_hi - lo)), rn,
                                 depth=depth, toward="right"))
        bps.append(graded_panels(rn, min(near_hi, rn + 0.5 * (near_hi - lo)),
                                 depth=depth, toward="left"))
    if near_hi < hi:
        bps.append(graded_panels(near_hi, hi, depth=max(depth, 24), toward="left"))
    inner = [k for k in knots if lo < k < hi]
    if inner:
        bps.append(np.asarray(inner, dtype=float))
    return np.unique(np.concatenate(bps))


def _radial_tensor_value(profile: RadialProfile1D, kernel_p: float,
                         weight: RadialWeight, spec: RadialSpec, dim: int,
                         order_r: int, order_s: int, order_t: int,
                         r_max: Optional[float] = None) -> float:
    """Tensor path for smooth weights and raw distance windows.

    With ``weight.symmetric_far`` the r range is [0, r_range] and the
    s > r_range portion is added twice (symmetry of the integrand);
    otherwise both variables run over [0, r_max].
    """
    g = profile.g
    knots = profile.knots
    if weight.symmetric_far:
        r_hi = weight.r_range if weight.r_range is not None else spec.r_max
        s_hi = weight.s_range if weight.s_range is not None else spec.r_max
    else:
        r_hi = r_max if r_max is not None else spec.r_max
        s_hi = r_hi
    r_panels = uniform_panels(0.0, r_hi, spec.n_r, splits=knots)
    r_nodes, r_w = panel_nodes(r_panels, order_r)
    total = 0.0
    extra = 0.0
    for rn, rw in zip(r_nodes, r_w):
        a_val = float(g(np.array([rn]))[0])
        panels = _s_panels_around(rn, 0.0, s_hi, spec.n_s, knots)
        sn, sw = panel_nodes(panels, order_s)
        t_vals = theta_reduced_kernel(rn, sn, dim, kernel_p, order=order_t,
                                      d_window=weight.d_window)
        contrib = (rw * rn ** (dim - 1)
                   * sw * weight.pair_fn(np.full_like(sn, a_val), g(sn))
                   * t_vals * sn ** (dim - 1))
        total += float(np.sum(contrib))
        if weight.symmetric_far:
            extra += float(np.sum(contrib[sn > r_hi]))
    return _pair_prefactor(dim) * (total + extra)


def radial_pair_integrate(profile: RadialProfile1D, kernel_p: float,
                          weight: RadialWeight, spec: RadialSpec,
                          dim: int) -> Estimate:
    """Deterministic pair integral for a radial field.

    Runs the quadrature at the requested and at halved resolution and
    reports the difference as ``discrepancy``.  stderr is always 0.
    """
    if dim < 2:
        raise PreconditionError("radial reduction needs dimension >= 2")
    if spec.r_max <= 0:
        raise PreconditionError("RadialSpec.r_max must be set for the radial engine")

    if weight.threshold is not None:
        if not math.isfinite(profile.lipschitz):
            raise PreconditionError("indicator path needs a finite Lipschitz bound")
        run = lambda o_r, o_s, o_t, nr, ns: _radial_indicator_value(
            profile, kernel_p, weight,
            replace(spec, n_r=nr, n_s=ns), dim, o_r, o_s, o_t)
        full = run(6, 6, 6, spec.n_r, spec.n_s)
        half = run(4, 4, 4, max(4, spec.n_r // 2), max(6, spec.n_s - 4))
        # rigorous bound on the mass beyond s_max
        delta = weight.threshold
        r_half = min(profile.decay_radius(delta / 2.0), spec.r_max)
        gap = spec.r_max - r_half
        if gap <= 0.25 * spec.r_max:
            raise PreconditionError("r_max leaves no room beyond the field's bulk")
        tail = (2.0 * ball_volume(dim, r_half) * sphere_surface(dim)
                * weight.numerator * gap ** (-kernel_p) / kernel_p)
        return Estimate(full, 0.0, 0, tail, "radial", False,
                        2.0 * abs(full - half))

    full = _radial_tensor_value(profile, kernel_p, weight, spec, dim, 6, 6, 6)
    half_spec = replace(spec, n_r=max(4, spec.n_r // 2), n_s=max(6, spec.n_s - 4))
    half = _radial_tensor_value(profile, kernel_p, weight, half_spec, dim, 4, 4, 4)
    if weight.symmetric_far:
        tail = weight.tail_hint
    elif profile.support_radius <= spec.r_max:
        tail = 0.0  # compact support: truncation is exact
    else:
        wider = _radial_tensor_value(profile, kernel_p, weight, half_spec,
                                     dim, 4, 4, 4, r_max=1.3 * spec.r_max)
        tail = abs(wider - half)
    return Estimate(full, 0.0, 0, tail, "radial", False, 2.0 * abs(full - half))


# ---------------------------------------------------------------------------
# volume integrals
# ---------------------------------------------------------------------------

def radial_volume_value(fn_r: Callable[[np.ndarray], np.ndarray], dim: int,
                        r_max: float, knots: Sequence[float] = (),
                        n_panels: int = 64, order: int = 8) -> float:
    """Deterministic integral over R^N of a radial integrand fn(|x|)."""
    panels = uniform_panels(0.0, r_max, n_panels, splits=knots)
    nodes, w = panel_nodes(panels, order)
    return sphere_surface(dim) * float(np.sum(w * fn_r(nodes) * nodes ** (dim - 1)))


def _proposal_components(field: ScalarField):
    """Gaussian mixture adapted to the field's bumps, for MC proposals."""
    from .fields import (FiniteSumField, GaussianField, IndicatorField,
                         RadialProfileField, SmoothBumpField)

    if isinstance(field, FiniteSumField):
        comps = []
        for t in field.terms:
            comps.extend(_proposal_components(t))
        return comps
    if isinstance(field, GaussianField):
        return [(field.center, 0.5 / math.sqrt(field.rate))]
    if isinstance(field, (SmoothBumpField, IndicatorField)):
        return [(field.center, field.radius / 1.5)]
    if isinstance(field, RadialProfileField):
        prof = field.radial_profile()
        return [(field.center, prof.support_radius / 1.5)]
    # fallback: unit Gaussian at the origin
    return [(np.zeros(field.dim), 1.0)]


def mc_volume_value(fn_pts: Callable[[np.ndarray], np.ndarray], dim: int,
                    components, spec: McSpec) -> Estimate:
    """Plain importance-sampled volume integral with a Gaussian mixture proposal."""
    comps = [(np.asarray(c, dtype=float), float(s)) for c, s in components]
    k = len(comps)
    n_chunks = spec.n_samples // spec.chunk_size
    m = spec.chunk_size
    norms = np.array([(2.0 * math.pi * s * s) ** (dim / 2.0) for _, s in comps])

    def density(x):
        q = np.zeros(x.shape[0])
        for (c, s), z in zip(comps, norms):
            d2 = np.sum((x - c) ** 2, axis=1)
            q += np.exp(-0.5 * d2 / (s * s)) / z
        return q / k

    def one_chunk(ci: int):
        rng = np.random.default_rng([spec.master_seed, ci])
        pick = rng.integers(0, k, size=m)
        z = rng.standard_normal((m, dim))
        centers = np.stack([comps[i][0] for i in pick])
        sigmas = np.array([comps[i][1] for i in pick])
        x = centers + sigmas[:, None] * z
        zeta = fn_pts(x) / density(x)
        return float(zeta.sum()), float((zeta * zeta).sum())

    results = _run_chunks(one_chunk, n_chunks)
    triples = [(s, q, m) for s, q in results]
    value, stderr, ess = _reduce_triples(triples, 1.0)
    return Estimate(value, stderr, ess, 0.0, "mc")


_DEFAULT_VOLUME_SPEC = McSpec(master_seed=1812051820, n_samples=192000,
                              chunk_size=4800)


def volume_integrate(integrand: Callable[[np.ndarray], np.ndarray],
                     field: ScalarField, spec: Optional[McSpec] = None,
                     tail_eps: float = 1e-9) -> Estimate:
    """Integral over R^N of ``integrand(points)``.

    The field supplies geometry only: a radial field routes to the
    deterministic radial rule (the integrand must then be radial about
    the field's center); anything else is integrated by MC under a
    mixture proposal adapted to the field.  Non-decaying fields are
    rejected since no sound truncation exists.
    """
    if not field.decays:
        raise DivergentIntegralError("field has no decay envelope; integral not truncatable")
    prof = field.radial_profile()
    if prof is not None:
        if prof.support_radius < math.inf:
            r_max = prof.support_radius
        else:
            r_max = prof.decay_radius(tail_eps * max(prof.sup, 1.0))
        center = field.center
        e1 = np.zeros(field.dim)
        e1[0] = 1.0

        def fn_r(r):
            pts = center[None, :] + r[:, None] * e1[None, :]
            return integrand(pts)

        val = radial_volume_value(fn_r, field.dim, max(r_max, 1e-12), knots=prof.knots)
        return Estimate(val, 0.0, 0, 0.0, "radial")
    sp = spec if spec is not None else _DEFAULT_VOLUME_SPEC
    return mc_volume_value(integrand, field.dim, _proposal_components(field), sp)


def lebesgue_volume_integral(field: ScalarField, fn_of_u, power_hint: float = 2.0,
                             spec: Optional[McSpec] = None) -> Estimate:
    """Integral of fn(u(x)) dx, using the field's own evaluations."""
    eps = (1e-14) ** (1.0 / power_hint) * max(getattr(field, "sup_bound", 1.0), 1.0)
    return volume_integrate(lambda pts: fn_of_u(field.evaluate(pts)), field,
                            spec=spec, tail_eps=min(eps, 1e-6))


def dirichlet_quadrature(field: ScalarField, spec: Optional[McSpec] = None) -> Estimate:
    """Quadrature fallback for the Dirichlet energy."""
    prof = field.radial_profile()
    if prof is not None and prof.dg is not None:
        r_max = (prof.support_radius if prof.support_radius < math.inf
                 else prof.decay_radius(1e-8 * max(prof.sup, 1.0)))
        val = radial_volume_value(lambda r: prof.dg(r) ** 2, field.dim,
                                  max(r_max, 1e-12), knots=prof.knots)
        return Estimate(val, 0.0, 0, 0.0, "radial")
    if not field.decays:
        raise DivergentIntegralError("cannot truncate a non-decaying field")
    sp = spec if spec is not None else _DEFAULT_VOLUME_SPEC
    fn = lambda pts: np.sum(field.gradient(pts) ** 2, axis=1)
    return mc_volume_value(fn, field.dim, _proposal_components(field), sp)
