"""Analytic test fields on R^N with exact metadata.

Each field knows how to evaluate itself and its gradient at arbitrary
points, and carries a sound Lipschitz bound plus a decay envelope
``eps -> R(eps)`` with ``|u(x)| <= eps`` whenever ``|x| >= R(eps)``.
The integration engines rely on this metadata for exact (not heuristic)
domain truncations, so the bounds must hold everywhere.

Closed-form L2 norms and Dirichlet energies are provided where they
exist (Gaussians and sums of Gaussians, indicators); other shapes fall
back to deterministic radial quadrature.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    DimensionMismatchError,
    DivergentIntegralError,
    UnsupportedOperationError,
)

__all__ = [
    "ScalarField",
    "GaussianField",
    "SmoothBumpField",
    "IndicatorField",
    "RadialProfileField",
    "FiniteSumField",
    "ConstantField",
    "ExponentialField",
    "ComplexField",
    "LinearPhase",
    "VectorPotential",
    "ZeroPotential",
    "ConstantPotential",
    "LinearBPotential",
    "RadialProfile1D",
    "eval",
    "grad",
    "l2_norm_sq",
    "dirichlet_energy",
    "transform",
    "field_from_dict",
    "descriptor_hash",
]


def check_dimension(n: int, minimum: int = 1) -> int:
    if not isinstance(n, (int, np.integer)) or n < minimum:
        raise DimensionMismatchError(f"dimension must be an integer >= {minimum}, got {n!r}")
    return int(n)


def _as_points(x, dim: int) -> np.ndarray:
    """Coerce a point or batch of points to shape (m, dim)."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise DimensionMismatchError(f"expected points of dimension {dim}, got shape {pts.shape}")
    return pts


def unit_ball_volume(n: int, radius: float = 1.0) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0) * radius ** n


@dataclass(frozen=True)
class RadialProfile1D:
    """One-dimensional radial profile g(r) of a radial field, with metadata.

    ``lipschitz`` bounds |g'| on [0, inf); ``decay_radius(eps)`` is relative
    to the field's own center.  ``knots`` lists radii where g is less smooth
    (support edges, spline breakpoints) so quadrature panels can align there.
    """

    g: Callable[[np.ndarray], np.ndarray]
    dg: Optional[Callable[[np.ndarray], np.ndarray]]
    lipschitz: float
    sup: float
    knots: np.ndarray
    decay_radius: Callable[[float], float]
    monotone_decreasing: bool
    support_radius: float = math.inf


class ScalarField:
    """Base class; concrete shapes implement the evaluation primitives."""

    dim: int

    # -- evaluation ------------------------------------------------------
    def evaluate(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    # -- metadata --------------------------------------------------------
    @property
    def differentiable(self) -> bool:
        return True

    @property
    def lipschitz_bound(self) -> float:
        raise NotImplementedError

    @property
    def sup_bound(self) -> float:
        """Upper bound on sup |u| (exact for the basic shapes)."""
        raise NotImplementedError

    @property
    def center(self) -> np.ndarray:
        return np.zeros(self.dim)

    def decay_radius(self, eps: float) -> float:
        """Radius R with |u(x)| <= eps for all |x| >= R (origin-anchored)."""
        raise UnsupportedOperationError(f"{type(self).__name__} has no decay envelope")

    @property
    def decays(self) -> bool:
        try:
            self.decay_radius(1e-3)
            return True
        except UnsupportedOperationError:
            return False

    @property
    def is_radial(self) -> bool:
        return self.radial_profile() is not None

    def radial_profile(self) -> Optional[RadialProfile1D]:
        """Radial profile about self.center, or None for non-radial fields."""
        return None

    # -- transforms ------------------------------------------------------
    def dilate(self, lam: float) -> "ScalarField":
        raise NotImplementedError

    def amplify(self, t: float) -> "ScalarField":
        raise NotImplementedError

    def translate(self, v) -> "ScalarField":
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


@dataclass(frozen=True)
class GaussianField(ScalarField):
    """amp * exp(-rate * |x - center|^2)."""

    dim: int
    rate: float
    amplitude: float = 1.0
    center_point: tuple = ()

    def __post_init__(self):
        check_dimension(self.dim)
        if self.rate <= 0:
            raise ValueError("Gaussian rate must be positive")
        c = tuple(float(v) for v in (self.center_point or (0.0,) * self.dim))
        if len(c) != self.dim:
            raise DimensionMismatchError("center has wrong dimension")
        object.__setattr__(self, "center_point", c)

    @property
    def center(self) -> np.ndarray:
        return np.array(self.center_point)

    def evaluate(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        r2 = np.sum((pts - self.center) ** 2, axis=1)
        return self.amplitude * np.exp(-self.rate * r2)

    def gradient(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        d = pts - self.center
        vals = self.amplitude * np.exp(-self.rate * np.sum(d * d, axis=1))
        return -2.0 * self.rate * vals[:, None] * d

    @property
    def lipschitz_bound(self) -> float:
        # sup |g'| = |amp| sqrt(2 rate / e), attained at r = 1/sqrt(2 rate)
        return abs(self.amplitude) * math.sqrt(2.0 * self.rate / math.e)

    @property
    def sup_bound(self) -> float:
        return abs(self.amplitude)

    def decay_radius(self, eps: float) -> float:
        if eps <= 0:
            raise ValueError("eps must be positive")
        if abs(self.amplitude) <= eps:
            return 0.0
        r = math.sqrt(math.log(abs(self.amplitude) / eps) / self.rate)
        return float(np.linalg.norm(self.center)) + r

    def radial_profile(self) -> RadialProfile1D:
        amp, a = self.amplitude, self.rate

        def g(r):
            return amp * np.exp(-a * np.asarray(r, dtype=float) ** 2)

        def dg(r):
            r = np.asarray(r, dtype=float)
            return -2.0 * a * amp * r * np.exp(-a * r * r)

        def decay(eps):
            if abs(amp) <= eps:
                return 0.0
            return math.sqrt(math.log(abs(amp) / eps) / a)

        return RadialProfile1D(
            g=g, dg=dg,
            lipschitz=self.lipschitz_bound,
            sup=abs(amp),
            knots=np.array([]),
            decay_radius=decay,
            monotone_decreasing=amp > 0,
        )

    def dilate(self, lam: float) -> "GaussianField":
        if lam <= 0:
            raise ValueError("dilation factor must be positive")
        return GaussianField(self.dim, self.rate / lam ** 2, self.amplitude,
                             tuple(lam * c for c in self.center_point))

    def amplify(self, t: float) -> "GaussianField":
        return GaussianField(self.dim, self.rate, t * self.amplitude, self.center_point)

    def translate(self, v) -> "GaussianField":
        v = np.asarray(v, dtype=float)
        return GaussianField(self.dim, self.rate, self.amplitude,
                             tuple(np.array(self.center_point) + v))

    def to_dict(self) -> dict:
        return {"shape": "gaussian", "dim": self.dim, "rate": self.rate,
                "amplitude": self.amplitude, "center": list(self.center_point)}


@dataclass(frozen=True)
class SmoothBumpField(ScalarField):
    """Compactly supported C-infinity bump:
    amp * exp(1 - R^2 / (R^2 - r^2)) on r < R, zero outside."""

    dim: int
    radius: float
    amplitude: float = 1.0
    center_point: tuple = ()

    def __post_init__(self):
        check_dimension(self.dim)
        if self.radius <= 0:
            raise ValueError("bump radius must be positive")
        c = tuple(float(v) for v in (self.center_point or (0.0,) * self.dim))
        if len(c) != self.dim:
            raise DimensionMismatchError("center has wrong dimension")
        object.__setattr__(self, "center_point", c)

    @property
    def center(self) -> np.ndarray:
        return np.array(self.center_point)

    def _profile_vals(self, r: np.ndarray) -> np.ndarray:
        R = self.radius
        out = np.zeros_like(r, dtype=float)
        inside = r < R
        ri = r[inside]
        out[inside] = self.amplitude * np.exp(1.0 - R * R / (R * R - ri * ri))
        return out

    def _profile_dvals(self, r: np.ndarray) -> np.ndarray:
        R = self.radius
        out = np.zeros_like(r, dtype=float)
        inside = r < R
        ri = r[inside]
        den = R * R - ri * ri
        out[inside] = self.amplitude * np.exp(1.0 - R * R / den) * (-2.0 * ri * R * R / den ** 2)
        return out

    def evaluate(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        r = np.linalg.norm(pts - self.center, axis=1)
        return self._profile_vals(r)

    def gradient(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        d = pts - self.center
        r = np.linalg.norm(d, axis=1)
        dg = self._profile_dvals(r)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(r > 0, dg / np.where(r > 0, r, 1.0), 0.0)
        return scale[:, None] * d

    @property
    def lipschitz_bound(self) -> float:
        # no elementary closed form; dense deterministic grid with margin
        r = np.linspace(0.0, self.radius * (1.0 - 1e-9), 20001)
        return float(np.max(np.abs(self._profile_dvals(r)))) * 1.02

    @property
    def sup_bound(self) -> float:
        return abs(self.amplitude)

    def decay_radius(self, eps: float) -> float:
        if eps <= 0:
            raise ValueError("eps must be positive")
        if abs(self.amplitude) <= eps:
            return 0.0
        return float(np.linalg.norm(self.center)) + self.radius

    def radial_profile(self) -> RadialProfile1D:
        return RadialProfile1D(
            g=self._profile_vals,
            dg=self._profile_dvals,
            lipschitz=self.lipschitz_bound,
            sup=abs(self.amplitude),
            knots=np.array([self.radius]),
            decay_radius=lambda eps: 0.0 if abs(self.amplitude) <= eps else self.radius,
            monotone_decreasing=self.amplitude > 0,
            support_radius=self.radius,
        )

    def dilate(self, lam: float) -> "SmoothBumpField":
        if lam <= 0:
            raise ValueError("dilation factor must be positive")
        return SmoothBumpField(self.dim, lam * self.radius, self.amplitude,
                               tuple(lam * c for c in self.center_point))

    def amplify(self, t: float) -> "SmoothBumpField":
        return SmoothBumpField(self.dim, self.radius, t * self.amplitude, self.center_point)

    def translate(self, v) -> "SmoothBumpField":
        v = np.asarray(v, dtype=float)
        return SmoothBumpField(self.dim, self.radius, self.amplitude,
                               tuple(np.array(self.center_point) + v))

    def to_dict(self) -> dict:
        return {"shape": "bump", "dim": self.dim, "radius": self.radius,
                "amplitude": self.amplitude, "center": list(self.center_point)}


@dataclass(frozen=True)
class IndicatorField(ScalarField):
    """amp * 1{|x - center| <= radius}; the canonical divergent input."""

    dim: int
    radius: float
    amplitude: float = 1.0
    center_point: tuple = ()

    def __post_init__(self):
        check_dimension(self.dim)
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")
        c = tuple(float(v) for v in (self.center_point or (0.0,) * self.dim))
        if len(c) != self.dim:
            raise DimensionMismatchError("center has wrong dimension")
        object.__setattr__(self, "center_point", c)

    @property
    def center(self) -> np.ndarray:
        return np.array(self.center_point)

    def evaluate(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        r = np.linalg.norm(pts - self.center, axis=1)
        return np.where(r <= self.radius, self.amplitude, 0.0)

    def gradient(self, x) -> np.ndarray:
        raise UnsupportedOperationError("indicator field is not differentiable")

    @property
    def differentiable(self) -> bool:
        return False

    @property
    def lipschitz_bound(self) -> float:
        return math.inf

    @property
    def sup_bound(self) -> float:
        return abs(self.amplitude)

    def decay_radius(self, eps: float) -> float:
        if eps <= 0:
            raise ValueError("eps must be positive")
        if abs(self.amplitude) <= eps:
            return 0.0
        return float(np.linalg.norm(self.center)) + self.radius

    def radial_profile(self) -> RadialProfile1D:
        amp, R = self.amplitude, self.radius
        return RadialProfile1D(
            g=lambda r: np.where(np.asarray(r, dtype=float) <= R, amp, 0.0),
            dg=None,
            lipschitz=math.inf,
            sup=abs(amp),
            knots=np.array([R]),
            decay_radius=lambda eps: 0.0 if abs(amp) <= eps else R,
            monotone_decreasing=False,
            support_radius=R,
        )

    def dilate(self, lam: float) -> "IndicatorField":
        if lam <= 0:
            raise ValueError("dilation factor must be positive")
        return IndicatorField(self.dim, lam * self.radius, self.amplitude,
                              tuple(lam * c for c in self.center_point))

    def amplify(self, t: float) -> "IndicatorField":
        return IndicatorField(self.dim, self.radius, t * self.amplitude, self.center_point)

    def translate(self, v) -> "IndicatorField":
        v = np.asarray(v, dtype=float)
        return IndicatorField(self.dim, self.radius, self.amplitude,
                              tuple(np.array(self.center_point) + v))

    def to_dict(self) -> dict:
        return {"shape": "indicator", "dim": self.dim, "radius": self.radius,
                "amplitude": self.amplitude, "center": list(self.center_point)}


class RadialProfileField(ScalarField):
    """Radial field from a clamped piecewise-cubic profile with zero tails.

    The profile interpolates (knots, values) with g'(0) = 0 and
    g'(r_end) = 0, and is identically zero beyond the last knot.  The
    last value must be zero so the extension is C^1.
    """

    def __init__(self, dim: int, knots: Sequence[float], values: Sequence[float],
                 center: Sequence[float] = ()):
        self.dim = check_dimension(dim)
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.ndim != 1 or knots.size < 3 or np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing with >= 3 entries")
        if knots[0] != 0.0:
            raise ValueError("first knot must be r = 0")
        if values[-1] != 0.0:
            raise ValueError("last profile value must be 0 (compact support)")
        self._knots = knots
        self._values = values
        center = np.asarray(center, dtype=float)
        self._center = np.zeros(dim) if center.size == 0 else center
        if self._center.size != dim:
            raise DimensionMismatchError("center has wrong dimension")
        self._spline = CubicSpline(knots, values, bc_type=((1, 0.0), (1, 0.0)))
        self._dspline = self._spline.derivative()
        self._lip, self._sup, self._monotone = self._exact_extrema()

    def _exact_extrema(self):
        """Exact sup|g| and sup|g'| from the piecewise-polynomial structure."""
        cand_r = list(self._knots)
        for i in range(len(self._knots) - 1):
            a, b = self._knots[i], self._knots[i + 1]
            coef = self._spline.c[:, i]  # cubic coeffs in (r - a), highest first
            # extrema of g: roots of the quadratic g' on the piece
            dcoef = np.array([3 * coef[0], 2 * coef[1], coef[2]])
            for rt in np.roots(dcoef):
                if np.isreal(rt) and 0 <= rt.real <= b - a:
                    cand_r.append(a + rt.real)
        cand_r = np.unique(np.clip(np.asarray(cand_r, dtype=float), 0.0, self._knots[-1]))
        sup = float(np.max(np.abs(self._spline(cand_r))))
        # extrema of g': roots of g'' (linear on each piece) plus breakpoints
        cand_d = list(self._knots)
        for i in range(len(self._knots) - 1):
            a, b = self._knots[i], self._knots[i + 1]
            coef = self._spline.c[:, i]
            # g'' = 6 a3 s + 2 a2 = 0
            if coef[0] != 0:
                s = -2 * coef[1] / (6 * coef[0])
                if 0 <= s <= b - a:
                    cand_d.append(a + s)
        cand_d = np.unique(np.asarray(cand_d, dtype=float))
        lip = float(np.max(np.abs(self._dspline(cand_d))))
        dvals = self._dspline(np.unique(np.concatenate([cand_d, cand_r])))
        monotone = bool(np.all(dvals <= 1e-14)) and bool(np.all(self._values >= 0))
        return lip, sup, monotone

    @property
    def center(self) -> np.ndarray:
        return self._center.copy()

    def _profile_vals(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.where(r <= self._knots[-1], self._spline(np.minimum(r, self._knots[-1])), 0.0)
        return out

    def _profile_dvals(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.where(r <= self._knots[-1], self._dspline(np.minimum(r, self._knots[-1])), 0.0)

    def evaluate(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        r = np.linalg.norm(pts - self._center, axis=1)
        return self._profile_vals(r)

    def gradient(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        d = pts - self._center
        r = np.linalg.norm(d, axis=1)
        dg = self._profile_dvals(r)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(r > 0, dg / np.where(r > 0, r, 1.0), 0.0)
        return scale[:, None] * d

    @property
    def lipschitz_bound(self) -> float:
        return self._lip

    @property
    def sup_bound(self) -> float:
        return self._sup

    def decay_radius(self, eps: float) -> float:
        if eps <= 0:
            raise ValueError("eps must be positive")
        if self._sup <= eps:
            return 0.0
        return float(np.linalg.norm(self._center)) + float(self._knots[-1])

    def radial_profile(self) -> RadialProfile1D:
        return RadialProfile1D(
            g=self._profile_vals,
            dg=self._profile_dvals,
            lipschitz=self._lip,
            sup=self._sup,
            knots=self._knots.copy(),
            decay_radius=lambda eps: 0.0 if self._sup <= eps else float(self._knots[-1]),
            monotone_decreasing=self._monotone,
            support_radius=float(self._knots[-1]),
        )

    def dilate(self, lam: float) -> "RadialProfileField":
        if lam <= 0:
            raise ValueError("dilation factor must be positive")
        return RadialProfileField(self.dim, lam * self._knots, self._values, lam * self._center)

    def amplify(self, t: float) -> "RadialProfileField":
        return RadialProfileField(self.dim, self._knots, t * self._values, self._center)

    def translate(self, v) -> "RadialProfileField":
        return RadialProfileField(self.dim, self._knots, self._values,
                                  self._center + np.asarray(v, dtype=float))

    def to_dict(self) -> dict:
        return {"shape": "radial_profile", "dim": self.dim,
                "knots": [float(v) for v in self._knots],
                "values": [float(v) for v in self._values],
                "center": [float(v) for v in self._center]}


class FiniteSumField(ScalarField):
    """Pointwise sum of component fields."""

    def __init__(self, terms: Sequence[ScalarField]):
        terms = list(terms)
        if not terms:
            raise ValueError("FiniteSumField needs at least one term")
        dims = {t.dim for t in terms}
        if len(dims) != 1:
            raise DimensionMismatchError("all terms must share one dimension")
        self.dim = terms[0].dim
        self.terms = terms

    def evaluate(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        out = np.zeros(pts.shape[0])
        for t in self.terms:
            out += t.evaluate(pts)
        return out

    def gradient(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        out = np.zeros_like(pts)
        for t in self.terms:
            out += t.gradient(pts)
        return out

    @property
    def differentiable(self) -> bool:
        return all(t.differentiable for t in self.terms)

    @property
    def lipschitz_bound(self) -> float:
        return float(sum(t.lipschitz_bound for t in self.terms))

    @property
    def sup_bound(self) -> float:
        return float(sum(t.sup_bound for t in self.terms))

    @property
    def center(self) -> np.ndarray:
        return self.terms[0].center

    def decay_radius(self, eps: float) -> float:
        k = len(self.terms)
        return max(t.decay_radius(eps / k) for t in self.terms)

    def radial_profile(self) -> Optional[RadialProfile1D]:
        profs = [t.radial_profile() for t in self.terms]
        if any(p is None for p in profs):
            return None
        c0 = self.terms[0].center
        if any(np.any(t.center != c0) for t in self.terms[1:]):
            return None
        k = len(profs)

        def g(r):
            r = np.asarray(r, dtype=float)
            return sum(p.g(r) for p in profs)

        dgs = [p.dg for p in profs]
        dg = None
        if all(d is not None for d in dgs):
            def dg(r):  # noqa: F811
                r = np.asarray(r, dtype=float)
                return sum(d(r) for d in dgs)

        knots = np.unique(np.concatenate([p.knots for p in profs])) if profs else np.array([])
        return RadialProfile1D(
            g=g, dg=dg,
            lipschitz=float(sum(p.lipschitz for p in profs)),
            sup=float(sum(p.sup for p in profs)),
            knots=knots,
            decay_radius=lambda eps: max(p.decay_radius(eps / k) for p in profs),
            monotone_decreasing=all(p.monotone_decreasing for p in profs),
            support_radius=max(p.support_radius for p in profs),
        )

    def dilate(self, lam: float) -> "FiniteSumField":
        return FiniteSumField([t.dilate(lam) for t in self.terms])

    def amplify(self, t: float) -> "FiniteSumField":
        return FiniteSumField([s.amplify(t) for s in self.terms])

    def translate(self, v) -> "FiniteSumField":
        return FiniteSumField([t.translate(v) for t in self.terms])

    def to_dict(self) -> dict:
        return {"shape": "sum", "dim": self.dim, "terms": [t.to_dict() for t in self.terms]}


@dataclass(frozen=True)
class ConstantField(ScalarField):
    """u identically equal to a constant.  Not in L2 unless zero."""

    dim: int
    value: float = 1.0

    def __post_init__(self):
        check_dimension(self.dim)

    def evaluate(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        return np.full(pts.shape[0], float(self.value))

    def gradient(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        return np.zeros_like(pts)

    @property
    def lipschitz_bound(self) -> float:
        return 0.0

    @property
    def sup_bound(self) -> float:
        return abs(self.value)

    def decay_radius(self, eps: float) -> float:
        if self.value == 0.0:
            return 0.0
        if eps >= abs(self.value):
            return 0.0
        raise UnsupportedOperationError("constant field does not decay")

    def radial_profile(self) -> RadialProfile1D:
        v = float(self.value)
        return RadialProfile1D(
            g=lambda r: np.full_like(np.asarray(r, dtype=float), v),
            dg=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
            lipschitz=0.0, sup=abs(v), knots=np.array([]),
            decay_radius=lambda eps: 0.0 if abs(v) <= eps else math.inf,
            monotone_decreasing=False,
        )

    def dilate(self, lam: float) -> "ConstantField":
        return self

    def amplify(self, t: float) -> "ConstantField":
        return ConstantField(self.dim, t * self.value)

    def translate(self, v) -> "ConstantField":
        return self

    def to_dict(self) -> dict:
        return {"shape": "constant", "dim": self.dim, "value": self.value}


@dataclass(frozen=True)
class ExponentialField(ScalarField):
    """amp * exp(rate . x); used for Gauss-measure equality cases only."""

    dim: int
    rate_vector: tuple
    amplitude: float = 1.0

    def __post_init__(self):
        check_dimension(self.dim)
        rv = tuple(float(v) for v in self.rate_vector)
        if len(rv) != self.dim:
            raise DimensionMismatchError("rate vector has wrong dimension")
        object.__setattr__(self, "rate_vector", rv)

    def evaluate(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        return self.amplitude * np.exp(pts @ np.array(self.rate_vector))

    def gradient(self, x) -> np.ndarray:
        vals = self.evaluate(x)
        return vals[:, None] * np.array(self.rate_vector)[None, :]

    @property
    def lipschitz_bound(self) -> float:
        return math.inf

    @property
    def sup_bound(self) -> float:
        return math.inf if any(self.rate_vector) else abs(self.amplitude)

    def dilate(self, lam: float) -> "ExponentialField":
        return ExponentialField(self.dim, tuple(c / lam for c in self.rate_vector),
                                self.amplitude)

    def amplify(self, t: float) -> "ExponentialField":
        return ExponentialField(self.dim, self.rate_vector, t * self.amplitude)

    def translate(self, v) -> "ExponentialField":
        v = np.asarray(v, dtype=float)
        shift = math.exp(-float(np.dot(np.array(self.rate_vector), v)))
        return ExponentialField(self.dim, self.rate_vector, self.amplitude * shift)

    def to_dict(self) -> dict:
        return {"shape": "exponential", "dim": self.dim,
                "rate_vector": list(self.rate_vector), "amplitude": self.amplitude}


# ---------------------------------------------------------------------------
# complex fields and vector potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearPhase:
    """phase(x) = offset + wave . x"""

    offset: float = 0.0
    wave: tuple = ()

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        if not self.wave:
            return np.full(pts.shape[0], float(self.offset))
        return self.offset + pts @ np.array(self.wave, dtype=float)

    def to_dict(self) -> dict:
        return {"kind": "linear", "offset": self.offset, "wave": list(self.wave)}


@dataclass(frozen=True)
class ComplexField:
    """u(x) = modulus(x) * exp(i phase(x)), with |u| = modulus exactly."""

    modulus: ScalarField
    phase: LinearPhase = LinearPhase()

    @property
    def dim(self) -> int:
        return self.modulus.dim

    def evaluate(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        m = self.modulus.evaluate(pts)
        ph = self.phase(pts)
        return m * np.exp(1j * ph)

    def to_dict(self) -> dict:
        return {"shape": "complex", "modulus": self.modulus.to_dict(),
                "phase": self.phase.to_dict()}


class VectorPotential:
    dim: int

    def evaluate(self, x) -> np.ndarray:
        raise NotImplementedError

    def local_bound(self, radius: float) -> float:
        """sup of |A| over the ball |x| <= radius."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroPotential(VectorPotential):
    dim: int

    def evaluate(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        return np.zeros_like(pts)

    def local_bound(self, radius: float) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"kind": "zero", "dim": self.dim}


@dataclass(frozen=True)
class ConstantPotential(VectorPotential):
    vector: tuple

    def __post_init__(self):
        object.__setattr__(self, "vector", tuple(float(v) for v in self.vector))

    @property
    def dim(self) -> int:
        return len(self.vector)

    def evaluate(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        return np.broadcast_to(np.array(self.vector), pts.shape).copy()

    def local_bound(self, radius: float) -> float:
        return float(np.linalg.norm(self.vector))

    def to_dict(self) -> dict:
        return {"kind": "constant", "vector": list(self.vector)}


class LinearBPotential(VectorPotential):
    """A(x) = M x with M antisymmetric (constant magnetic field)."""

    def __init__(self, matrix):
        M = np.asarray(matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("matrix must be square")
        if not np.allclose(M, -M.T, atol=1e-12):
            raise ValueError("matrix must be antisymmetric")
        self.matrix = M
        self.dim = M.shape[0]

    def evaluate(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        return pts @ self.matrix.T

    def local_bound(self, radius: float) -> float:
        return float(np.linalg.norm(self.matrix, 2)) * radius

    def to_dict(self) -> dict:
        return {"kind": "linear_b", "matrix": [[float(v) for v in row] for row in self.matrix]}


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------

def eval(f: ScalarField, x) -> float:  # noqa: A001  (name fixed by the interface)
    """Evaluate the field at a single point."""
    return float(f.evaluate(x)[0])


def grad(f: ScalarField, x) -> np.ndarray:
    """Analytic gradient at a single point."""
    if not f.differentiable:
        raise UnsupportedOperationError("field shape is not differentiable")
    return f.gradient(x)[0]


def _gauss_pair_l2(t1: GaussianField, t2: GaussianField) -> float:
    """Closed-form integral of t1(x) t2(x) over R^N."""
    n = t1.dim
    a1, a2 = t1.rate, t2.rate
    beta = a1 + a2
    dc = np.array(t1.center_point) - np.array(t2.center_point)
    gamma = a1 * a2 / beta
    return (t1.amplitude * t2.amplitude * (math.pi / beta) ** (n / 2.0)
            * math.exp(-gamma * float(dc @ dc)))


def _gauss_pair_dirichlet(t1: GaussianField, t2: GaussianField) -> float:
    """Closed-form integral of grad t1 . grad t2 over R^N."""
    n = t1.dim
    a1, a2 = t1.rate, t2.rate
    beta = a1 + a2
    dc = np.array(t1.center_point) - np.array(t2.center_point)
    d2 = float(dc @ dc)
    gamma = a1 * a2 / beta
    base = t1.amplitude * t2.amplitude * (math.pi / beta) ** (n / 2.0) * math.exp(-gamma * d2)
    return 4.0 * a1 * a2 * base * (n / (2.0 * beta) - (a1 * a2 / beta ** 2) * d2)


def _gaussian_terms(f: ScalarField):
    if isinstance(f, GaussianField):
        return [f]
    if isinstance(f, FiniteSumField):
        out = []
        for t in f.terms:
            sub = _gaussian_terms(t)
            if sub is None:
                return None
            out.extend(sub)
        return out
    return None


def l2_norm_sq(f: ScalarField, method: str = "auto"):
    """Integral of u^2 over R^N.

    method: 'auto' prefers closed forms, 'closed_form' requires one,
    'quadrature' forces the deterministic radial engine.
    """
    if method not in ("auto", "closed_form", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if isinstance(f, ConstantField):
        if f.value == 0.0:
            return 0.0
        raise DivergentIntegralError("nonzero constant field is not square integrable")
    if isinstance(f, ExponentialField) and any(f.rate_vector):
        raise DivergentIntegralError("exponential field is not square integrable")
    if method != "quadrature":
        terms = _gaussian_terms(f)
        if terms is not None:
            return float(sum(_gauss_pair_l2(a, b) for a in terms for b in terms))
        if isinstance(f, IndicatorField):
            return f.amplitude ** 2 * unit_ball_volume(f.dim, f.radius)
        if method == "closed_form":
            raise UnsupportedOperationError(f"no closed-form L2 norm for {type(f).__name__}")
    from . import quadrature  # deferred: quadrature imports this module

    return quadrature.lebesgue_volume_integral(f, lambda v: v * v, power_hint=2.0).value


def dirichlet_energy(f: ScalarField, method: str = "auto"):
    """Integral of |grad u|^2 over R^N."""
    if method not in ("auto", "closed_form", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if not f.differentiable:
        raise UnsupportedOperationError("Dirichlet energy is infinite for jump fields")
    if isinstance(f, ConstantField):
        return 0.0
    if isinstance(f, ExponentialField) and any(f.rate_vector):
        raise DivergentIntegralError("exponential field has divergent Dirichlet energy")
    if method != "quadrature":
        terms = _gaussian_terms(f)
        if terms is not None:
            return float(sum(_gauss_pair_dirichlet(a, b) for a in terms for b in terms))
        if method == "closed_form":
            raise UnsupportedOperationError(f"no closed-form energy for {type(f).__name__}")
    from . import quadrature

    return quadrature.dirichlet_quadrature(f).value


def transform(f: ScalarField, dilate: float = 1.0, amplify: float = 1.0,
              translate=None) -> ScalarField:
    """Return the field x -> amplify * u((x - translate) / dilate)."""
    out = f
    if dilate != 1.0:
        out = out.dilate(dilate)
    if amplify != 1.0:
        out = out.amplify(amplify)
    if translate is not None:
        out = out.translate(translate)
    return out


_SHAPES = {}


def field_from_dict(d: dict) -> ScalarField:
    """Rebuild a field from its JSON descriptor."""
    kind = d.get("shape")
    if kind == "gaussian":
        return GaussianField(d["dim"], d["rate"], d.get("amplitude", 1.0),
                             tuple(d.get("center", ())))
    if kind == "bump":
        return SmoothBumpField(d["dim"], d["radius"], d.get("amplitude", 1.0),
                               tuple(d.get("center", ())))
    if kind == "indicator":
        return IndicatorField(d["dim"], d["radius"], d.get("amplitude", 1.0),
                              tuple(d.get("center", ())))
    if kind == "radial_profile":
        return RadialProfileField(d["dim"], d["knots"], d["values"], d.get("center", ()))
    if kind == "sum":
        return FiniteSumField([field_from_dict(t) for t in d["terms"]])
    if kind == "constant":
        return ConstantField(d["dim"], d.get("value", 1.0))
    if kind == "exponential":
        return ExponentialField(d["dim"], tuple(d["rate_vector"]), d.get("amplitude", 1.0))
    raise ValueError(f"unknown field shape {kind!r}")


def descriptor_hash(obj) -> str:
    """Short stable hash of a field or spec descriptor, for provenance."""
    d = obj.to_dict() if hasattr(obj, "to_dict") else obj
    blob = json.dumps(d, sort_keys=True).encode()
    return hashlib.sha1(blob).hexdigest()[:12]
