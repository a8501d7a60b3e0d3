"""Evaluators for the nonlocal functionals, entropies and energies.

The pair functionals all share one dispatch: radial fields with a finite
Lipschitz bound go to the deterministic radial engine, everything else
to the stratified MC engine.  Fields with jump discontinuities (infinite
Lipschitz bound) are first probed for divergence by halving the inner
cutoff; growth by a factor >= 1.8 twice marks the integral as divergent
and the cutoff-limited partial estimate is returned with diverged=True.

Conventions: 0 * log 0 = 0 throughout; the Gauss measure is
exp(-pi |x|^2) dx, a probability measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np

from . import quadrature as quad
from .errors import (
    DivergentIntegralError,
    PreconditionError,
    UnsupportedOperationError,
    ZeroFieldError,
)
from .fields import (
    ComplexField,
    ConstantField,
    ExponentialField,
    GaussianField,
    IndicatorField,
    ScalarField,
    VectorPotential,
    l2_norm_sq,
    dirichlet_energy,
)
from .quadrature import (
    Estimate,
    McSpec,
    PairContext,
    RadialSpec,
    RadialWeight,
    ball_volume,
    mc_pair_integrate_many,
    radial_pair_integrate,
    sphere_surface,
)

__all__ = [
    "KernelSpec",
    "MonotoneEnvelope",
    "EnergyParams",
    "EngineSpec",
    "default_engine",
    "i_delta",
    "i_delta_p",
    "f_functional",
    "i_delta_magnetic",
    "i_delta_magnetic_paired",
    "entropy_l2",
    "entropy_l2_estimate",
    "ent_mu",
    "log_moment_lp",
    "log_moment_lp_estimate",
    "gauss_lsi_sides",
    "j_energy",
    "j_delta_energy",
    "lp_power_integral",
    "restricted_power_integral",
    "xlogx",
]


# ---------------------------------------------------------------------------
# parameter types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonotoneEnvelope:
    """Non-decreasing envelope F with sub-homogeneity F(t s) <= t^beta F(s).

    ``small_t_power`` is the power q with F(t) = O(t^q) near 0, used to
    size the inner cutoff.  ``zero_below`` marks an exact zero region
    F = 0 on [0, zero_below].  The threshold envelope reproducing the
    plain indicator functional is exempted from the sub-homogeneity
    check (it fails it), but stays valid for evaluation.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    beta: float
    name: str
    small_t_power: float
    zero_below: float = 0.0
    subhom_exempt: bool = False
    sup_value: float = math.inf

    @staticmethod
    def power_law(q: float) -> "MonotoneEnvelope":
        if q < 1:
            raise PreconditionError("power-law envelope needs q >= 1")
        return MonotoneEnvelope(fn=lambda t: np.asarray(t, dtype=float) ** q,
                                beta=q, name=f"power:{q}", small_t_power=q)

    @staticmethod
    def threshold(delta: float, p: float = 2.0) -> "MonotoneEnvelope":
        num = _int_pow(delta, p)
        return MonotoneEnvelope(
            fn=lambda t: np.where(np.asarray(t, dtype=float) > delta, num, 0.0),
            beta=p, name=f"threshold:{delta}", small_t_power=p,
            zero_below=delta, subhom_exempt=True, sup_value=num)

    def validate(self, t_max: float = 4.0, tol: float = 1e-12) -> None:
        """Monotonicity plus (unless exempt) sub-homogeneity on a 50x50 grid."""
        ts = np.linspace(0.0, t_max, 50)
        vals = self.fn(ts)
        if np.any(vals < -tol):
            raise PreconditionError(f"envelope {self.name} takes negative values")
        if np.any(np.diff(vals) < -tol):
            raise PreconditionError(f"envelope {self.name} is not non-decreasing")
        if not self.subhom_exempt:
            t = np.linspace(0.0, t_max, 50)[:, None]
            s = np.linspace(0.0, t_max, 50)[None, :]
            lhs = self.fn(t * s)
            rhs = t ** self.beta * self.fn(np.broadcast_to(s, lhs.shape))
            if np.any(lhs > rhs + tol):
                raise PreconditionError(
                    f"envelope {self.name} violates sub-homogeneity with beta={self.beta}")

    def to_dict(self) -> dict:
        return {"name": self.name, "beta": self.beta,
                "small_t_power": self.small_t_power, "zero_below": self.zero_below}


@dataclass(frozen=True)
class KernelSpec:
    """delta, kernel exponent p, optional envelope replacing the numerator."""

    delta: float
    p: float = 2.0
    envelope: Optional[MonotoneEnvelope] = None

    def __post_init__(self):
        if self.delta <= 0:
            raise PreconditionError("delta must be positive")
        if self.p < 1:
            raise PreconditionError("kernel exponent p must be >= 1")

    def to_dict(self) -> dict:
        return {"delta": self.delta, "p": self.p,
                "envelope": self.envelope.to_dict() if self.envelope else None}


@dataclass(frozen=True)
class EnergyParams:
    omega: float = 0.0


@dataclass(frozen=True)
class EngineSpec:
    """Which pair engine to use and with what parameters."""

    mc: McSpec
    radial: RadialSpec = RadialSpec()
    mode: str = "auto"  # auto | mc | radial

    def __post_init__(self):
        if self.mode not in ("auto", "mc", "radial"):
            raise PreconditionError(f"unknown engine mode {self.mode!r}")


def default_engine(seed: int, mode: str = "auto", **mc_overrides) -> EngineSpec:
    return EngineSpec(mc=McSpec(master_seed=seed, **mc_overrides), mode=mode)


def _int_pow(x: float, p: float) -> float:
    """x**p by repeated multiplication for small integer p.

    Keeps exact power-of-two scaling relations, which the amplitude-law
    common-random-number identities rely on.
    """
    if float(p).is_integer() and 1 <= p <= 8:
        out = 1.0
        for _ in range(int(p)):
            out *= x
        return out
    return x ** p


def xlogx(v: np.ndarray) -> np.ndarray:
    """t log t with the continuous extension 0 log 0 = 0."""
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(v > 0.0, v * np.log(np.where(v > 0.0, v, 1.0)), 0.0)


# ---------------------------------------------------------------------------
# pair functional dispatch
# ---------------------------------------------------------------------------

def _envelope_tail_power(field: ScalarField, q: float, eps0: float) -> float:
    """Bound on the integral of |u|^q over {|x| > R(eps0)} via the envelope."""
    if eps0 <= 0:
        return 0.0
    ts = np.geomspace(eps0 * 1e-12, eps0, 160)
    vols = np.array([ball_volume(field.dim, field.decay_radius(float(t))) for t in ts])
    integrand = q * ts ** (q - 1.0) * vols
    return float(np.trapezoid(integrand, ts))


def _threshold_weight_fn(delta: float, numerator: float):
    def w(a, b):
        return np.where(np.abs(a - b) > delta, numerator, 0.0)
    return w


def _radial_corner_const(dim: int) -> float:
    """Surface prefactor times the angular-kernel constant entering the
    crude far-diagonal remainder bound for smooth envelopes."""
    return sphere_surface(dim) * sphere_surface(dim - 1)


class _PairWorkload:
    """Everything the engines need for one pair functional."""

    def __init__(self, dim, x_radius, numerator, kernel_p, inner_cutoff,
                 integrands, rank_fn, extra_tail=0.0):
        self.dim = dim
        self.x_radius = x_radius
        self.numerator = numerator
        self.kernel_p = kernel_p
        self.inner_cutoff = inner_cutoff
        self.integrands = integrands
        self.rank_fn = rank_fn
        self.extra_tail = extra_tail

    def context(self, inner_cutoff=None, wrap=None):
        integrands = self.integrands
        if wrap is not None:
            integrands = tuple(wrap(f) for f in integrands)
        return PairContext(
            dim=self.dim,
            x_center=np.zeros(self.dim),
            x_radius=self.x_radius,
            kernel_p=self.kernel_p,
            numerator=self.numerator,
            integrands=integrands,
            inner_cutoff=self.inner_cutoff if inner_cutoff is None else inner_cutoff,
            symmetric=True,
            rank_fn=self.rank_fn,
            extra_tail=self.extra_tail,
        )


def _probe_divergence(workload: _PairWorkload, spec: McSpec):
    """Cutoff-halving probe for fields without a Lipschitz bound.

    Runs reduced-size estimates truncated at cutoffs c, c/2, c/4; growth
    by >= 1.8 at both halvings flags divergence and the partial estimate
    at the smallest cutoff is returned.
    """
    c0 = 0.05 * max(workload.x_radius, 1e-6)
    n_chunks = max(8, (spec.n_samples // spec.chunk_size) // 4)
    probe_spec = replace(spec, n_samples=n_chunks * spec.chunk_size)
    vals = []
    for c in (c0, c0 / 2.0, c0 / 4.0):
        wrap = lambda f, c=c: (lambda x, y, rho: f(x, y, rho) * (rho >= c))
        est = mc_pair_integrate_many(workload.context(inner_cutoff=c, wrap=wrap),
                                     probe_spec)[0]
        vals.append(est)
    v0, v1, v2 = (e.value for e in vals)
    grow1 = v1 >= 1.8 * v0 > 0.0
    grow2 = v2 >= 1.8 * v1 > 0.0
    if grow1 and grow2:
        return replace(vals[2], diverged=True)
    return None


def _pair_functional(u: ScalarField, p: float, engine: EngineSpec, *,
                     delta: Optional[float] = None,
                     envelope: Optional[MonotoneEnvelope] = None) -> Estimate:
    """Shared core of i_delta / i_delta_p / f_functional for real fields.

    Exactly one of ``delta`` (indicator numerator delta^p on
    {|u(x)-u(y)| > delta}) and ``envelope`` (numerator F(|u(x)-u(y)|))
    must be given.
    """
    if (delta is None) == (envelope is None):
        raise PreconditionError("pass exactly one of delta / envelope")
    dim = u.dim
    lip = u.lipschitz_bound
    if envelope is None:
        numerator = _int_pow(delta, p)
        tail_scale = numerator
        zero_below = delta
    else:
        numerator = 1.0
        tail_scale = envelope.sup_value  # inf for power laws: handled below
        zero_below = envelope.zero_below

    # exact shortcuts: a constant field has |u(x)-u(y)| = 0, and if the
    # oscillation 2 sup|u| cannot exceed the threshold the set is empty
    if lip == 0.0:
        return Estimate(0.0, 0.0, 0, 0.0, "closed_form")
    if zero_below > 0 and zero_below >= 2.0 * u.sup_bound:
        return Estimate(0.0, 0.0, 0, 0.0, "closed_form")

    prof = u.radial_profile()
    use_radial = (engine.mode == "radial"
                  or (engine.mode == "auto" and prof is not None
                      and math.isfinite(lip)))
    if engine.mode == "radial":
        if prof is None:
            raise PreconditionError("radial engine requires a radial field")
        if not math.isfinite(lip):
            raise PreconditionError("radial engine requires a finite Lipschitz bound")

    if use_radial and prof is not None and math.isfinite(lip):
        rspec = engine.radial
        if zero_below > 0:
            if envelope is None:
                pair_fn = _threshold_weight_fn(delta, numerator)
            else:
                pair_fn = lambda a, b: envelope.fn(np.abs(a - b))
            if rspec.r_max <= 0:
                r_half = prof.decay_radius(zero_below / 2.0)
                mass = (2.0 * ball_volume(dim, r_half) * sphere_surface(dim)
                        * tail_scale / p)
                atol = max(1e-6, 1e-5 * mass)
                rspec = replace(rspec, r_max=max(4.0 * r_half + 1.0,
                                                 (mass / atol) ** (1.0 / p)))
            weight = RadialWeight(pair_fn=pair_fn, threshold=zero_below,
                                  zero_sep=(zero_below / lip if lip > 0 else 0.0),
                                  numerator=tail_scale)
            return radial_pair_integrate(prof, p, weight, rspec, dim)
        # smooth envelope: symmetric weight with slowly decaying pair tails
        sup = prof.sup
        eps_x = 1e-9 * max(sup, 1e-30)
        r_range = prof.decay_radius(eps_x)
        q = envelope.small_t_power
        omega = sphere_surface(dim)
        uq = lp_power_integral(u, q).value
        far_mass = 2.0 ** q * uq * omega / p
        atol = max(1e-8, 1e-4 * far_mass)
        s_range = r_range + (far_mass / atol) ** (1.0 / p)
        if rspec.r_max > 0:
            s_range = rspec.r_max
            r_range = min(r_range, s_range)
        # residuals: pairs beyond s_range, plus the far near-diagonal corner
        far_tail = 2.0 * far_mass * max(s_range - r_range, 1e-12) ** (-p)
        corner = (4.0 * _radial_corner_const(dim) * lip ** p
                  * (2.0 * eps_x) ** (q - p) * (s_range - r_range) / p)
        weight = RadialWeight(pair_fn=lambda a, b: envelope.fn(np.abs(a - b)),
                              symmetric_far=True, r_range=r_range,
                              s_range=s_range, tail_hint=far_tail + corner)
        return radial_pair_integrate(prof, p, weight,
                                     replace(rspec, r_max=s_range), dim)

    # Monte Carlo path
    np_exp = -(dim + p)

    def integrand(x, y, rho):
        du = np.abs(u.evaluate(y) - u.evaluate(x))
        if envelope is None:
            w = np.where(du > delta, numerator, 0.0)
        else:
            w = envelope.fn(du)
        return w * rho ** np_exp

    rank_fn = lambda pts: np.abs(u.evaluate(pts))
    if zero_below > 0:
        x_radius = u.decay_radius(zero_below / 2.0)
        extra_tail = 0.0
        cutoff = zero_below / lip if (lip > 0 and math.isfinite(lip)) else 0.0
        h_tail_scale = tail_scale
    else:
        sup = u.sup_bound
        eps_x = 1e-5 * max(sup, 1e-12)
        x_radius = u.decay_radius(eps_x)
        q = envelope.small_t_power
        # |h|-tail: F(|du|) <= F(2 sup |u|) out there
        h_tail_scale = float(np.asarray(envelope.fn(np.array([2.0 * sup]))).ravel()[0])
        if math.isfinite(lip):
            cutoff = 1e-4 * max(x_radius, 1e-6)
            # excluded inner region, bounded through the L2 modulus of continuity
            energy = dirichlet_energy(u)
            inner_excl = (lip ** (q - 2.0) * energy * sphere_surface(dim)
                          * cutoff ** (q - p) / (q - p))
            outer_x = (2.0 ** q * _envelope_tail_power(u, q, eps_x)
                       * sphere_surface(dim) * cutoff ** (-p) / p)
            extra_tail = inner_excl + outer_x
        else:
            cutoff = 0.0  # jump field: the halving probe decides convergence
            extra_tail = 0.0

    workload = _PairWorkload(dim, x_radius, h_tail_scale, p, cutoff,
                             (integrand,), rank_fn, extra_tail)
    spec = engine.mc
    if not math.isfinite(lip):
        hit = _probe_divergence(workload, spec)
        if hit is not None:
            return hit
        # convergent despite no Lipschitz bound: keep the smallest probe cutoff;
        # the mass below it is not quantified by any envelope we hold
        c_small = 0.05 * max(x_radius, 1e-6) / 4.0
        wrap = lambda f: (lambda x, y, rho: f(x, y, rho) * (rho >= c_small))
        return mc_pair_integrate_many(
            workload.context(inner_cutoff=c_small, wrap=wrap), spec)[0]
    return mc_pair_integrate_many(workload.context(), spec)[0]


def i_delta(u: ScalarField, k: KernelSpec, engine: EngineSpec) -> Estimate:
    """The nonlocal functional with kernel delta^2 / |x-y|^{N+2}."""
    if k.p != 2.0:
        raise PreconditionError("i_delta is the p = 2 kernel; use i_delta_p")
    return _pair_functional(u, 2.0, engine, delta=k.delta)


def i_delta_p(u: ScalarField, k: KernelSpec, engine: EngineSpec) -> Estimate:
    """General-p variant: kernel delta^p / |x-y|^{N+p} on {|u(x)-u(y)| > delta}."""
    return _pair_functional(u, k.p, engine, delta=k.delta)


def f_functional(u: ScalarField, envelope: MonotoneEnvelope, p: float,
                 engine: EngineSpec) -> Estimate:
    """Envelope functional: integral of F(|u(x)-u(y)|) / |x-y|^{N+p}."""
    envelope.validate()
    if envelope.zero_below == 0.0 and envelope.small_t_power <= p:
        raise PreconditionError(
            "envelope must vanish faster than t^p near 0 for integrability")
    return _pair_functional(u, p, engine, envelope=envelope)


# ---------------------------------------------------------------------------
# magnetic functional
# ---------------------------------------------------------------------------

def _magnetic_workload(u: ComplexField, A: VectorPotential, delta: float,
                       engine: EngineSpec):
    dim = u.dim
    numerator = _int_pow(delta, 2.0)
    mod = u.modulus
    lip = mod.lipschitz_bound
    x_radius = mod.decay_radius(delta / 2.0)

    def mag_integrand(x, y, rho):
        phi = np.einsum("ij,ij->i", x - y, A.evaluate(0.5 * (x + y)))
        dpsi = np.abs(np.exp(1j * phi) * u.evaluate(y) - u.evaluate(x))
        return np.where(dpsi > delta, numerator, 0.0) * rho ** (-(dim + 2.0))

    def mod_integrand(x, y, rho):
        du = np.abs(np.abs(mod.evaluate(y)) - np.abs(mod.evaluate(x)))
        return np.where(du > delta, numerator, 0.0) * rho ** (-(dim + 2.0))

    rank_fn = lambda pts: np.abs(mod.evaluate(pts))
    if math.isfinite(lip):
        # |Psi(x,y) - Psi(x,x)| <= (L + sup|u| sup|A|) |x - y| on the sampled region
        probe = PairContext(dim, np.zeros(dim), x_radius, 2.0, numerator,
                            (mag_integrand,), symmetric=True, rank_fn=rank_fn)
        h_max, _ = quad._derive_h_max(probe, engine.mc)
        reach = x_radius + 0.5 * h_max
        lip_a = lip + mod.sup_bound * A.local_bound(reach)
        cutoff = delta / lip_a if lip_a > 0 else 0.0
    else:
        cutoff = 0.0
    return _PairWorkload(dim, x_radius, numerator, 2.0, cutoff,
                         (mag_integrand, mod_integrand), rank_fn)


def i_delta_magnetic(u: ComplexField, A: VectorPotential, k: KernelSpec,
                     engine: EngineSpec) -> Estimate:
    """Magnetic variant built from the covariant difference
    exp(i (x-y) . A((x+y)/2)) u(y) - u(x)."""
    return i_delta_magnetic_paired(u, A, k, engine)[0]


def i_delta_magnetic_paired(u: ComplexField, A: VectorPotential, k: KernelSpec,
                            engine: EngineSpec):
    """(magnetic estimate, estimate for |u|) on one shared sample stream.

    The pointwise bound ||u(x)| - |u(y)|| <= |Psi(x,x) - Psi(x,y)| makes
    the indicator inclusion hold sample by sample, so the returned pair
    is ordered with zero tolerance.
    """
    if k.p != 2.0:
        raise PreconditionError("the magnetic functional uses the p = 2 kernel")
    delta = k.delta
    if delta >= 2.0 * u.modulus.sup_bound:
        z = Estimate(0.0, 0.0, 0, 0.0, "closed_form")
        return z, z
    workload = _magnetic_workload(u, A, delta, engine)
    if not math.isfinite(u.modulus.lipschitz_bound):
        raise PreconditionError("magnetic functional needs a Lipschitz modulus")
    ests = mc_pair_integrate_many(workload.context(), engine.mc)
    return ests[0], ests[1]


# ---------------------------------------------------------------------------
# entropies, log-moments, Lp integrals
# ---------------------------------------------------------------------------

def _real_part(u: Union[ScalarField, ComplexField]) -> ScalarField:
    return u.modulus if isinstance(u, ComplexField) else u


def lp_power_integral(u: ScalarField, q: float, method: str = "auto") -> Estimate:
    """Integral of |u|^q over R^N (closed form where available)."""
    if isinstance(u, GaussianField) and method != "quadrature":
        val = abs(u.amplitude) ** q * (math.pi / (q * u.rate)) ** (u.dim / 2.0)
        return Estimate(val, method="closed_form")
    if isinstance(u, IndicatorField) and method != "quadrature":
        val = abs(u.amplitude) ** q * ball_volume(u.dim, u.radius)
        return Estimate(val, method="closed_form")
    if method == "closed_form":
        raise UnsupportedOperationError(f"no closed form for {type(u).__name__}")
    return quad.lebesgue_volume_integral(u, lambda v: np.abs(v) ** q, power_hint=q)


def restricted_power_integral(u: ScalarField, q: float, level: float,
                              mode: str = "above") -> Estimate:
    """Integral of |u|^q over the superlevel set {|u| > level} (mode='above')
    or the sublevel set {|u| <= level} (mode='below')."""
    if mode not in ("above", "below"):
        raise PreconditionError("mode must be 'above' or 'below'")
    if level <= 0:
        raise PreconditionError("level must be positive")
    if mode == "below":
        total = lp_power_integral(u, q)
        above = restricted_power_integral(u, q, level, "above")
        return Estimate(total.value - above.value,
                        math.hypot(total.stderr, above.stderr),
                        min(total.n_effective, above.n_effective),
                        total.tail_bound + above.tail_bound,
                        above.method)
    if level >= u.sup_bound:
        return Estimate(0.0, method="closed_form")
    prof = u.radial_profile()
    if prof is not None:
        r_hi = prof.decay_radius(level)  # superlevel set sits inside this radius
        g = prof.g
        absg = lambda r: np.abs(g(np.asarray(r, dtype=float)))
        total = 0.0
        for e1, e2 in quad._excess_intervals(absg, 0.0, level, 0.0, max(r_hi, 1e-12)):
            nodes, w = quad.panel_nodes(
                quad.uniform_panels(e1, e2, 24, splits=prof.knots), 8)
            total += float(np.sum(w * np.abs(g(nodes)) ** q * nodes ** (u.dim - 1)))
        return Estimate(sphere_surface(u.dim) * total, method="radial")
    fn = lambda pts: np.where(np.abs(u.evaluate(pts)) > level,
                              np.abs(u.evaluate(pts)) ** q, 0.0)
    return quad.volume_integrate(fn, u)


def log_moment_lp_estimate(u: Union[ScalarField, ComplexField], p: float,
                           method: str = "auto") -> Estimate:
    """Integral of |u|^p log |u|^p, with 0 log 0 = 0."""
    f = _real_part(u)
    if isinstance(f, GaussianField) and method != "quadrature":
        if f.amplitude == 0.0:
            return Estimate(0.0, method="closed_form")
        amp = abs(f.amplitude)
        val = amp ** p * (math.pi / (p * f.rate)) ** (f.dim / 2.0) \
            * (p * math.log(amp) - f.dim / 2.0)
        return Estimate(val, method="closed_form")
    if isinstance(f, IndicatorField) and method != "quadrature":
        amp = abs(f.amplitude)
        if amp == 0.0:
            return Estimate(0.0, method="closed_form")
        val = amp ** p * ball_volume(f.dim, f.radius) * p * math.log(amp)
        return Estimate(val, method="closed_form")
    if method == "closed_form":
        raise UnsupportedOperationError(f"no closed form for {type(f).__name__}")
    return quad.lebesgue_volume_integral(f, lambda v: xlogx(np.abs(v) ** p),
                                         power_hint=p)


def log_moment_lp(u, p: float, method: str = "auto") -> float:
    return log_moment_lp_estimate(u, p, method).value


def l2_norm_sq_estimate(u: Union[ScalarField, ComplexField],
                        method: str = "auto") -> Estimate:
    f = _real_part(u)
    terms_closed = method != "quadrature"
    try:
        if terms_closed:
            return Estimate(l2_norm_sq(f, method="closed_form"), method="closed_form")
    except UnsupportedOperationError:
        pass
    return quad.lebesgue_volume_integral(f, lambda v: v * v, power_hint=2.0)


def entropy_l2_estimate(u: Union[ScalarField, ComplexField],
                        method: str = "auto") -> Estimate:
    """Entropy of the normalized density u^2 / ||u||^2 (scale invariant)."""
    f = _real_part(u)
    nsq = l2_norm_sq_estimate(f, method="auto" if method == "quadrature" else method)
    if nsq.value <= 0.0:
        raise ZeroFieldError("entropy undefined for the zero field")
    if method != "quadrature":
        if isinstance(f, GaussianField) and f.amplitude != 0.0:
            n, a = f.dim, f.rate
            return Estimate(-n / 2.0 - (n / 2.0) * math.log(math.pi / (2.0 * a)),
                            method="closed_form")
        if isinstance(f, IndicatorField) and f.amplitude != 0.0:
            return Estimate(-math.log(ball_volume(f.dim, f.radius)),
                            method="closed_form")
    m = nsq.value
    est = quad.lebesgue_volume_integral(f, lambda v: xlogx(v * v / m), power_hint=2.0)
    return est


def entropy_l2(u, method: str = "auto") -> float:
    return entropy_l2_estimate(u, method).value


def ent_mu(f: Union[ScalarField, float], mu: str = "lebesgue", *,
           square: bool = False, dim: Optional[int] = None) -> float:
    """Normalized f log f integral plus (N/2) log of the total mass.

    ``mu`` is 'lebesgue' or 'gauss' (the probability e^{-pi|x|^2} dx).
    With ``square=True`` the argument field enters as f = u^2.
    """
    if mu not in ("lebesgue", "gauss"):
        raise PreconditionError("mu must be 'lebesgue' or 'gauss'")
    if isinstance(f, (int, float)):
        if dim is None:
            raise PreconditionError("dim required for a bare constant")
        f = ConstantField(dim, float(f))
    n = f.dim
    vals = lambda pts: (f.evaluate(pts) ** 2 if square else f.evaluate(pts))
    if mu == "lebesgue":
        if isinstance(f, ConstantField) and f.value != 0.0:
            raise DivergentIntegralError("constant f has infinite Lebesgue mass")
        base = _real_part(f)
        mass = (l2_norm_sq_estimate(base).value if square
                else quad.lebesgue_volume_integral(base, lambda v: v, power_hint=1.0).value)
        if mass <= 0:
            raise ZeroFieldError("||f||_{1,mu} must be positive")
        ent = quad.lebesgue_volume_integral(base, lambda v: xlogx(
            (v * v if square else v) / mass), power_hint=2.0 if square else 1.0).value
        return ent + (n / 2.0) * math.log(mass)
    mass = _gauss_expectation(f, vals)
    if mass <= 0:
        raise ZeroFieldError("||f||_{1,mu} must be positive")
    ent = _gauss_expectation(f, lambda pts: xlogx(vals(pts) / mass))
    return ent + (n / 2.0) * math.log(mass)


# ---------------------------------------------------------------------------
# Gauss-measure quantities
# ---------------------------------------------------------------------------

_GAUSS_MC_SPEC = McSpec(master_seed=271828182, n_samples=384000, chunk_size=4800)


def _gauss_expectation(field, fn_pts: Callable[[np.ndarray], np.ndarray],
                       spec: Optional[McSpec] = None) -> float:
    """Integral of fn against the probability measure e^{-pi |x|^2} dx."""
    n = field.dim
    prof = field.radial_profile()
    if prof is not None and not np.any(field.center):
        r_max = 6.0
        try:
            r_max = max(r_max, field.decay_radius(1e-9 * max(field.sup_bound, 1.0)))
        except (UnsupportedOperationError, OverflowError):
            pass
        e1 = np.zeros(n)
        e1[0] = 1.0
        fn_r = lambda r: fn_pts(r[:, None] * e1[None, :]) * np.exp(-math.pi * r * r)
        return quad.radial_volume_value(fn_r, n, r_max, knots=prof.knots,
                                        n_panels=96, order=8)
    sp = spec if spec is not None else _GAUSS_MC_SPEC
    sigma = 1.0 / math.sqrt(2.0 * math.pi)
    n_chunks = sp.n_samples // sp.chunk_size

    def one_chunk(c):
        rng = np.random.default_rng([sp.master_seed, c])
        x = sigma * rng.standard_normal((sp.chunk_size, n))
        z = fn_pts(x)
        return float(z.sum()), float((z * z).sum())

    results = quad._run_chunks(one_chunk, n_chunks)
    triples = [(s, q, sp.chunk_size) for s, q in results]
    value, _, _ = quad._reduce_triples(triples, 1.0)
    return value


def _gauss_moments_gaussian(f: GaussianField):
    """(m0, m2) = (int u^2 dG, int |x - c|^2 u^2 dG) in closed form."""
    n, a = f.dim, f.rate
    v = f.center
    beta = 2.0 * a + math.pi
    v2 = float(v @ v)
    m0 = f.amplitude ** 2 * math.exp(-(2.0 * a * math.pi / beta) * v2) \
        * (math.pi / beta) ** (n / 2.0)
    m2 = m0 * (n / (2.0 * beta) + (math.pi / beta) ** 2 * v2)
    return m0, m2


def gauss_lsi_sides(u: ScalarField) -> tuple:
    """(lhs, rhs) of the Gauss-measure logarithmic Sobolev inequality,
    with lhs = int u^2 log(u^2 / ||u||^2_G) dG and rhs = (1/pi) int |grad u|^2 dG."""
    if not u.differentiable:
        raise UnsupportedOperationError("both sides need a differentiable field")
    n = u.dim
    if isinstance(u, ConstantField):
        return 0.0, 0.0
    if isinstance(u, GaussianField):
        if u.amplitude == 0.0:
            raise ZeroFieldError("zero field")
        m0, m2 = _gauss_moments_gaussian(u)
        ilog = math.log(u.amplitude ** 2) * m0 - 2.0 * u.rate * m2
        lhs = ilog - m0 * math.log(m0)
        rhs = (4.0 * u.rate ** 2 / math.pi) * m2
        return lhs, rhs
    if isinstance(u, ExponentialField):
        if u.amplitude == 0.0:
            raise ZeroFieldError("zero field")
        c2 = float(np.dot(u.rate_vector, u.rate_vector))
        m0 = u.amplitude ** 2 * math.exp(c2 / math.pi)
        lhs = (c2 / math.pi) * m0
        rhs = (c2 / math.pi) * m0
        return lhs, rhs
    m0 = _gauss_expectation(u, lambda pts: u.evaluate(pts) ** 2)
    if m0 <= 0:
        raise ZeroFieldError("zero field")
    lhs = _gauss_expectation(u, lambda pts: _u2log(u, pts, m0))
    rhs = _gauss_expectation(u, lambda pts: np.sum(u.gradient(pts) ** 2, axis=1)) / math.pi
    return lhs, rhs


def _u2log(u: ScalarField, pts: np.ndarray, m0: float) -> np.ndarray:
    """u^2 log(u^2 / m0) with the 0 log 0 convention."""
    v2 = u.evaluate(pts) ** 2
    return np.where(v2 > 0,
                    v2 * (np.log(np.where(v2 > 0, v2, 1.0)) - math.log(m0)), 0.0)


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------

def j_energy(u: ScalarField, params: EnergyParams) -> float:
    """(1/2) |grad u|^2_2 + ((omega+1)/2) ||u||_2^2 - (1/2) int u^2 log u^2."""
    e = dirichlet_energy(u)
    m = l2_norm_sq(u)
    lm = log_moment_lp(u, 2.0)
    return 0.5 * e + 0.5 * (params.omega + 1.0) * m - 0.5 * lm


def j_delta_energy(u: ScalarField, params: EnergyParams, k: KernelSpec,
                   engine: EngineSpec) -> float:
    """Nonlocal energy: i_delta replaces the Dirichlet term (no 1/2 factor)."""
    i = i_delta(u, k, engine)
    if i.diverged:
        raise DivergentIntegralError("nonlocal term diverges for this field")
    m = l2_norm_sq(u)
    lm = log_moment_lp(u, 2.0)
    return i.value + 0.5 * (params.omega + 1.0) * m - 0.5 * lm
