"""Inequality checkers: LHS, RHS, deficit and admissible constants.

Unspecified constants are treated as outputs, never as assumed inputs:
each checker reports the smallest constant making its instance true, and
``sweep_family`` aggregates the per-instance constants into a family
supremum, re-validated on a deterministic held-out split.

Tolerance policy: inequalities involving Monte Carlo estimates are
asserted up to ``stat_margin`` (3x the combined standard errors,
linearized); deterministic instances carry a tiny floating-point slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import PreconditionError
from .fields import ComplexField, ScalarField, VectorPotential, descriptor_hash
from .functionals import (
    EngineSpec,
    KernelSpec,
    MonotoneEnvelope,
    entropy_l2_estimate,
    f_functional,
    gauss_lsi_sides,
    i_delta,
    i_delta_magnetic_paired,
    l2_norm_sq_estimate,
    log_moment_lp_estimate,
    lp_power_integral,
    restricted_power_integral,
)
from .fields import dirichlet_energy
from .quadrature import Estimate

__all__ = [
    "InequalityReport",
    "FamilySweep",
    "check_nonlocal_sobolev",
    "check_logsobolev_main",
    "check_envelope_lsi",
    "check_magnetic_lsi",
    "check_diamagnetic",
    "check_gauss_lsi",
    "check_euclidean_family",
    "check_small_set_bound",
    "jensen_gap",
    "jensen_gap_p",
    "sweep_family",
]

_FP_SLACK = 1e-9


@dataclass
class InequalityReport:
    """One inequality instance: sides, deficit, constant, provenance."""

    inequality_id: str
    lhs: float
    rhs: Optional[float] = None
    deficit: Optional[float] = None
    admissible_constant: Optional[float] = None
    stat_margin: float = 0.0
    inputs: dict = dc_field(default_factory=dict)
    degenerate: bool = False
    notes: str = ""
    rhs_builder: Optional[Callable[[float], float]] = dc_field(default=None, repr=False)

    def deficit_at(self, constant: float) -> float:
        if self.rhs_builder is None:
            raise PreconditionError(f"{self.inequality_id} has no free constant")
        return self.rhs_builder(constant) - self.lhs

    def holds(self, constant: Optional[float] = None) -> bool:
        d = self.deficit if constant is None else self.deficit_at(constant)
        if d is None:
            raise PreconditionError("no deficit available; pass a constant")
        return d >= -max(self.stat_margin, _FP_SLACK)

    def csv_row(self) -> dict:
        return {
            "inequality_id": self.inequality_id,
            "field_hash": self.inputs.get("field_hash", ""),
            "delta": self.inputs.get("delta", ""),
            "lhs": self.lhs,
            "rhs": "" if self.rhs is None else self.rhs,
            "deficit": "" if self.deficit is None else self.deficit,
            "constant": "" if self.admissible_constant is None else self.admissible_constant,
            "stat_margin": self.stat_margin,
            "degenerate": self.degenerate,
        }

    def detail(self) -> dict:
        out = self.csv_row()
        out["inputs"] = {k: v for k, v in self.inputs.items() if k != "field"}
        out["notes"] = self.notes
        return out


def _prov(u, delta=None, engine: Optional[EngineSpec] = None, **extra) -> dict:
    d = {"field": u.to_dict(), "field_hash": descriptor_hash(u)}
    if delta is not None:
        d["delta"] = delta
    if engine is not None:
        d["mc_hash"] = descriptor_hash(engine.mc.to_dict())
        d["radial_hash"] = descriptor_hash(engine.radial.to_dict())
    d.update(extra)
    return d


def _require_sobolev_dim(n: int, p: float = 2.0):
    if p == 2.0 and n < 3:
        raise PreconditionError("checkers need dimension N >= 3")
    if n <= p:
        raise PreconditionError(f"checkers need N > p (got N={n}, p={p})")


# ---------------------------------------------------------------------------
# individual checkers
# ---------------------------------------------------------------------------

def check_nonlocal_sobolev(u: ScalarField, delta: float, lam: float,
                           engine: EngineSpec) -> InequalityReport:
    """Restricted critical-exponent integral against a power of the
    nonlocal functional; the free constant is extracted per instance."""
    n = u.dim
    _require_sobolev_dim(n)
    if lam <= 0:
        raise PreconditionError("lambda must be positive")
    q = 2.0 * n / (n - 2.0)
    pw = n / (n - 2.0)
    inputs = _prov(u, delta, engine, llambda=lam)
    i_est = i_delta(u, KernelSpec(delta), engine)
    if i_est.diverged:
        return InequalityReport("nonlocal_sobolev", lhs=0.0, rhs=math.inf,
                                deficit=math.inf, admissible_constant=0.0,
                                inputs=inputs, degenerate=True,
                                notes="nonlocal term diverges; inequality vacuous")
    lhs_est = restricted_power_integral(u, q, lam * delta, "above")
    lhs = lhs_est.value
    amp = i_est.value ** pw
    if amp > 0:
        admissible = lhs / amp
    else:
        admissible = 0.0 if lhs <= 0 else math.inf
    builder = lambda c: c * amp
    sens = pw * i_est.value ** (pw - 1.0) if i_est.value > 0 else 0.0
    margin = 3.0 * math.hypot(lhs_est.stderr,
                              (admissible if math.isfinite(admissible) else 0.0)
                              * sens * i_est.stderr)
    return InequalityReport("nonlocal_sobolev", lhs=lhs,
                            admissible_constant=admissible, stat_margin=margin,
                            inputs=inputs, rhs_builder=builder,
                            degenerate=not math.isfinite(admissible))


def _log_sobolev_core(inequality_id: str, n: int, ent: Estimate, l2: Estimate,
                      nl_est: Estimate, delta: float, inputs: dict) -> InequalityReport:
    if nl_est.diverged:
        return InequalityReport(inequality_id, lhs=0.0, rhs=math.inf,
                                deficit=math.inf, admissible_constant=0.0,
                                inputs=inputs, degenerate=True,
                                notes="nonlocal term diverges; inequality vacuous")
    m = l2.value
    lhs = ent.value + (n / 2.0) * math.log(m)
    dterm = delta ** (4.0 / n) * m ** ((n - 2.0) / n)
    denom = dterm + nl_est.value
    admissible = math.exp((2.0 / n) * lhs) / denom
    builder = lambda c: (n / 2.0) * math.log(c * denom)
    # first-order margin on the deficit at fixed constant
    s_lhs = math.hypot(ent.stderr, (n / 2.0) * l2.stderr / max(m, 1e-300))
    s_rhs = (n / 2.0) * nl_est.stderr / max(denom, 1e-300)
    margin = 3.0 * math.hypot(s_lhs, s_rhs)
    return InequalityReport(inequality_id, lhs=lhs, admissible_constant=admissible,
                            stat_margin=margin, inputs=inputs, rhs_builder=builder)


def check_logsobolev_main(u: ScalarField, delta: float,
                          engine: EngineSpec) -> InequalityReport:
    """Entropy bounded by (N/2) log of the nonlocal term plus a delta term."""
    n = u.dim
    _require_sobolev_dim(n)
    ent = entropy_l2_estimate(u)
    l2 = l2_norm_sq_estimate(u)
    nl = i_delta(u, KernelSpec(delta), engine)
    return _log_sobolev_core("logsobolev_main", n, ent, l2, nl, delta,
                             _prov(u, delta, engine))


def check_magnetic_lsi(u: ComplexField, A: VectorPotential, delta: float,
                       engine: EngineSpec) -> InequalityReport:
    """Magnetic variant: |u| in the entropy, covariant difference on the right."""
    n = u.dim
    _require_sobolev_dim(n)
    ent = entropy_l2_estimate(u)
    l2 = l2_norm_sq_estimate(u)
    mag, _ = i_delta_magnetic_paired(u, A, KernelSpec(delta), engine)
    inputs = _prov(u.modulus, delta, engine, potential=A.to_dict())
    return _log_sobolev_core("magnetic_lsi", n, ent, l2, mag, delta, inputs)


def check_envelope_lsi(u: ScalarField, envelope: MonotoneEnvelope,
                   engine: EngineSpec) -> InequalityReport:
    """Envelope-functional version with the ||u||^beta normalization."""
    n = u.dim
    _require_sobolev_dim(n)
    envelope.validate()
    ent = entropy_l2_estimate(u)
    l2 = l2_norm_sq_estimate(u)
    ff = f_functional(u, envelope, 2.0, engine)
    inputs = _prov(u, None, engine, envelope=envelope.to_dict())
    if ff.diverged:
        return InequalityReport("envelope_lsi", lhs=0.0, rhs=math.inf, deficit=math.inf,
                                admissible_constant=0.0, inputs=inputs,
                                degenerate=True, notes="envelope functional diverges")
    beta = envelope.beta
    m = l2.value
    lhs = ent.value + (n * beta / 4.0) * math.log(m)
    denom = m ** (beta / 2.0) + ff.value
    admissible = math.exp((2.0 / n) * lhs) / denom
    builder = lambda c: (n / 2.0) * math.log(c * denom)
    s_lhs = math.hypot(ent.stderr, (n * beta / 4.0) * l2.stderr / max(m, 1e-300))
    s_rhs = (n / 2.0) * ff.stderr / max(denom, 1e-300)
    margin = 3.0 * math.hypot(s_lhs, s_rhs)
    return InequalityReport("envelope_lsi", lhs=lhs, admissible_constant=admissible,
                            stat_margin=margin, inputs=inputs, rhs_builder=builder)


def check_diamagnetic(u: ComplexField, A: VectorPotential, delta: float,
                      engine: EngineSpec) -> InequalityReport:
    """Paired common-random-number estimates; the ordering is sample-wise
    exact, so it is asserted with zero tolerance."""
    mag, base = i_delta_magnetic_paired(u, A, KernelSpec(delta), engine)
    inputs = _prov(u.modulus, delta, engine, potential=A.to_dict(),
                   phase=u.phase.to_dict())
    return InequalityReport("diamagnetic", lhs=base.value, rhs=mag.value,
                            deficit=mag.value - base.value, stat_margin=0.0,
                            inputs=inputs,
                            notes="paired ordering holds exactly by indicator inclusion")


def check_gauss_lsi(u: ScalarField) -> InequalityReport:
    lhs, rhs = gauss_lsi_sides(u)
    slack = 1e-7 * (1.0 + abs(lhs) + abs(rhs))
    return InequalityReport("gauss_lsi", lhs=lhs, rhs=rhs, deficit=rhs - lhs,
                            stat_margin=slack, inputs=_prov(u))


def check_euclidean_family(u: ScalarField, a: float) -> InequalityReport:
    """One-parameter Euclidean form; fully explicit, no free constant."""
    if a <= 0:
        raise PreconditionError("parameter a must be positive")
    n = u.dim
    l2 = l2_norm_sq_estimate(u)
    ent = entropy_l2_estimate(u)
    energy = dirichlet_energy(u)
    lhs = l2.value * ent.value + n * (1.0 + math.log(a)) * l2.value
    rhs = (a * a / math.pi) * energy
    margin = 3.0 * math.hypot(l2.value * ent.stderr,
                              (ent.value + n * (1.0 + math.log(a))) * l2.stderr)
    margin = max(margin, 1e-9 * (1.0 + abs(lhs) + abs(rhs)))
    return InequalityReport("euclidean_family", lhs=lhs, rhs=rhs,
                            deficit=rhs - lhs, stat_margin=margin,
                            inputs=_prov(u, a=a))


def check_small_set_bound(u: ScalarField, delta: float, lam: float) -> InequalityReport:
    """Sublevel critical integral against (lam delta)^{4/(N-2)} after
    normalizing to unit L2 mass."""
    n = u.dim
    _require_sobolev_dim(n)
    l2 = l2_norm_sq_estimate(u)
    if l2.value <= 0:
        raise PreconditionError("zero field")
    v = u.amplify(1.0 / math.sqrt(l2.value))
    q = 2.0 * n / (n - 2.0)
    lhs_est = restricted_power_integral(v, q, lam * delta, "below")
    rhs = (lam * delta) ** (4.0 / (n - 2.0))
    margin = max(3.0 * lhs_est.stderr, 1e-9 * (1.0 + abs(rhs)))
    return InequalityReport("small_set_bound", lhs=lhs_est.value, rhs=rhs,
                            deficit=rhs - lhs_est.value, stat_margin=margin,
                            inputs=_prov(u, delta, llambda=lam))


def jensen_gap(u: ScalarField) -> float:
    """log of the critical integral minus 2/(N-2) times the log-moment,
    for the unit-L2 normalization; nonnegative by Jensen."""
    n = u.dim
    _require_sobolev_dim(n)
    l2 = l2_norm_sq_estimate(u)
    if l2.value <= 0:
        raise PreconditionError("zero field")
    v = u.amplify(1.0 / math.sqrt(l2.value))
    q = 2.0 * n / (n - 2.0)
    crit = lp_power_integral(v, q)
    if crit.value <= 0:
        raise PreconditionError("critical integral vanished")
    return math.log(crit.value) - (2.0 / (n - 2.0)) * log_moment_lp_estimate(v, 2.0).value


def jensen_gap_p(u: ScalarField, p: float) -> float:
    """L^p variant of the Jensen gap, normalized to unit L^p mass."""
    n = u.dim
    if p <= 1:
        raise PreconditionError("p must be > 1")
    _require_sobolev_dim(n, p)
    mass = lp_power_integral(u, p)
    if mass.value <= 0:
        raise PreconditionError("zero field")
    v = u.amplify(mass.value ** (-1.0 / p))
    q = n * p / (n - p)
    crit = lp_power_integral(v, q)
    if crit.value <= 0:
        raise PreconditionError("critical integral vanished")
    return math.log(crit.value) - (p / (n - p)) * log_moment_lp_estimate(v, p).value


def check_jensen(u: ScalarField) -> InequalityReport:
    gap = jensen_gap(u)
    return InequalityReport("jensen", lhs=0.0, rhs=gap, deficit=gap,
                            stat_margin=1e-7 * (1.0 + abs(gap)), inputs=_prov(u))


# ---------------------------------------------------------------------------
# family sweeps
# ---------------------------------------------------------------------------

@dataclass
class FamilySweep:
    """Per-instance reports plus the family constant and held-out check."""

    inequality_id: str
    instances: List[tuple]            # (field_index, delta)
    reports: List[InequalityReport]
    train_idx: List[int]
    held_idx: List[int]
    family_constant: float
    held_ok: bool
    excluded: List[tuple]             # (instance index, reason)

    def held_deficits(self) -> List[float]:
        return [self.reports[i].deficit_at(self.family_constant) for i in self.held_idx]


_SWEEPABLE = ("logsobolev_main", "nonlocal_sobolev", "envelope_lsi")


def sweep_family(fields: Sequence[ScalarField], deltas: Sequence[float],
                 inequality_id: str, engine: EngineSpec, *, seed: int = 0,
                 lam: float = 1.0, envelope: Optional[MonotoneEnvelope] = None,
                 holdout_fraction: float = 0.2) -> FamilySweep:
    """Run one free-constant checker over fields x deltas; the family
    constant is the supremum of the per-instance admissible constants,
    re-validated end to end on a deterministic 20% held-out subset.

    The split is deterministic in ``seed``.  Diverged instances are
    excluded from the constant and reported.
    """
    if inequality_id not in _SWEEPABLE:
        raise PreconditionError(f"{inequality_id!r} has no free constant to sweep")
    if not fields:
        raise PreconditionError("empty field family")
    instances = [(fi, d) for fi in range(len(fields)) for d in deltas]
    reports: List[InequalityReport] = []
    excluded = []
    for idx, (fi, d) in enumerate(instances):
        u = fields[fi]
        if inequality_id == "logsobolev_main":
            rep = check_logsobolev_main(u, d, engine)
        elif inequality_id == "nonlocal_sobolev":
            rep = check_nonlocal_sobolev(u, d, lam, engine)
        else:
            env = envelope if envelope is not None else MonotoneEnvelope.threshold(d)
            rep = check_envelope_lsi(u, env, engine)
        reports.append(rep)
        if rep.degenerate:
            excluded.append((idx, rep.notes or "degenerate"))
    usable = [i for i in range(len(instances))
              if not reports[i].degenerate]
    if not usable:
        raise PreconditionError("every instance was degenerate")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(usable))
    n_held = max(1, int(math.ceil(holdout_fraction * len(usable)))) if len(usable) > 1 else 0
    held_idx = sorted(usable[perm[i]] for i in range(n_held))
    train_idx = sorted(set(usable) - set(held_idx))
    if not train_idx:  # single usable instance: train on it, nothing held out
        train_idx, held_idx = held_idx, []
    family_constant = max(reports[i].admissible_constant for i in usable)
    held_ok = all(
        reports[i].deficit_at(family_constant) >= -max(reports[i].stat_margin, _FP_SLACK)
        for i in held_idx)
    return FamilySweep(inequality_id, instances, reports, train_idx, held_idx,
                       family_constant, held_ok, excluded)
