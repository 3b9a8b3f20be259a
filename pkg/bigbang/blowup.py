"""
Blow-up of the singularity a = 0.

a = r^gamma, P = r^(-beta*gamma) v and d(tau) = r ds send the singular
state to the collision manifold {r = 0, v = +-sqrt(2)}, a pair of rest
points of the regularized field. The energy and field polynomials in r
are derived from the model's force and potential terms by the chain rule.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Tuple

from bigbang.cosmo import (CosmologyParams, PhysState, ReducedModel, Regime,
                           printed_coefficients)
from bigbang.exceptions import DomainError, SingularChartError
from bigbang.ratnum import exponents_of, format_rational


SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class RegState:
    """Point (r, v, s) of the regularized system, r >= 0."""
    r: float
    v: float
    s: float = 0.0

    def __post_init__(self):
        if not self.r >= 0:
            raise DomainError(f"Blown-up radius must be non-negative, got {self.r!r}", reason="r-negative")

    @property
    def on_collision_manifold(self) -> bool:
        return self.r == 0.0


@dataclass(frozen=True)
class RegTerm:
    """Term coef * r^exponent (times ln r when ``logarithmic``)."""
    coef: float
    exponent: Fraction
    logarithmic: bool = False
    label: str = ""

    def value(self, r: float) -> float:
        if r == 0.0:
            return 0.0
        value = self.coef * r ** float(self.exponent)
        if self.logarithmic:
            value *= math.log(r)
        return value

    def derivative(self, r: float) -> float:
        """d/dr for r > 0."""
        e = float(self.exponent)
        if not self.logarithmic:
            return self.coef * e * r ** (e - 1.0)
        return self.coef * r ** (e - 1.0) * (e * math.log(r) + 1.0)


@dataclass(frozen=True)
class ManifoldSpec:
    """Energy level with the energy (G-tilde) and field (G) polynomials in r."""
    h: float
    g_tilde_terms: Tuple[RegTerm, ...]
    g_terms: Tuple[RegTerm, ...]
    energy_exponent: Fraction
    lead_constant: float = 2.0

    def __post_init__(self):
        for term in self.g_tilde_terms + self.g_terms:
            if not term.exponent > 0:
                raise DomainError(f"Non-positive exponent {term.exponent} in term {term.label}",
                                  reason="nonpositive-field-exponent")

    def g_tilde(self, r: float) -> float:
        return sum(term.value(r) for term in self.g_tilde_terms)

    def residual(self, r: float, v: float) -> float:
        _require_nonnegative_r(r)
        level = 2.0 * self.h * r ** float(self.energy_exponent) if r > 0 else 0.0
        return v * v - self.lead_constant - level - self.g_tilde(r)

    def collision_points(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        root = math.sqrt(self.lead_constant)
        return (0.0, root), (0.0, -root)


def _require_nonnegative_r(r: float) -> None:
    if r < 0:
        raise DomainError(f"Blown-up radius must be non-negative, got {r!r}", reason="r-negative")


def to_regularized(model: ReducedModel, state: PhysState) -> RegState:
    """r = a^(1/gamma), v = a^beta P."""
    a = state.a
    if not a > 0:
        raise DomainError(f"Scale factor must be positive, got {a!r}", reason="a-nonpositive")
    exps = model.exps
    return RegState(r=a ** float(1 / exps.gamma), v=a ** exps.beta_f * state.p_mom)


def from_regularized(model: ReducedModel, reg: RegState) -> PhysState:
    """a = r^gamma, P = r^(-beta*gamma) v."""
    if reg.r == 0.0:
        raise SingularChartError("Collision manifold point has no physical preimage")
    _require_nonnegative_r(reg.r)
    exps = model.exps
    return PhysState(a=reg.r ** exps.gamma_f, p_mom=reg.r ** float(-exps.beta * exps.gamma) * reg.v)


def g_tilde_terms(model: ReducedModel) -> Tuple[RegTerm, ...]:
    """
    Terms of 2 r^(alpha*gamma) f(r^gamma), f the potential minus its lead.

    k a^-e becomes 2k r^(gamma(alpha - e)); c ln(a) becomes
    2 c gamma r^(alpha*gamma) ln(r).
    """
    exps = model.exps
    terms: List[RegTerm] = []
    for term in model.potential_terms:
        if term.coef:
            terms.append(RegTerm(2.0 * term.coef, exps.gamma * (exps.alpha - term.exponent),
                                 label=term.label))
        if term.log_coef:
            terms.append(RegTerm(2.0 * term.log_coef * exps.gamma_f, exps.alpha * exps.gamma,
                                 logarithmic=True, label=f"{term.label}-log"))
    return tuple(terms)


def g_terms(model: ReducedModel) -> Tuple[RegTerm, ...]:
    """Terms of G(r): force -c a^-e becomes c r^(2 - gamma(1 + e))."""
    gamma = model.exps.gamma
    return tuple(
        RegTerm(term.coef, 2 - gamma * (1 + term.exponent), label=term.label)
        for term in model.sub_forces
        if term.coef
    )


def manifold_spec(model: ReducedModel, h: float) -> ManifoldSpec:
    """Energy manifold at level h in blown-up coordinates."""
    exps = model.exps
    return ManifoldSpec(
        h=h,
        g_tilde_terms=g_tilde_terms(model),
        g_terms=g_terms(model),
        energy_exponent=exps.alpha * exps.gamma,
        lead_constant=2.0 * model.potential_lead_coef,
    )


def manifold_residual(model: ReducedModel, h: float, r: float, v: float) -> float:
    """v**2 - 2 - 2h r^(alpha*gamma) - G_tilde(r); zero on the energy manifold."""
    return manifold_spec(model, h).residual(r, v)


def regularized_field(model: ReducedModel, r: float, v: float) -> Tuple[float, float]:
    """(dr/ds, dv/ds) = ((beta+1) r v, beta (v**2 - 2) - G(r))."""
    _require_nonnegative_r(r)
    beta = model.exps.beta_f
    dr_ds = (beta + 1.0) * r * v
    dv_ds = beta * (v * v - model.lead_coef / beta)
    if r > 0:
        for term in g_terms(model):
            dv_ds -= term.value(r)
    return dr_ds, dv_ds


def s_rate(r: float) -> float:
    """dtau/ds = r."""
    if not r > 0:
        raise DomainError(f"Time rescaling needs r > 0, got {r!r}", reason="r-nonpositive")
    return r


def printed_g_tilde_terms(params: CosmologyParams) -> Tuple[RegTerm, ...]:
    """The energy polynomial exactly as printed, for comparison only."""
    printed = printed_coefficients(params)
    w = params.w
    regime = Regime.of(w)
    if regime is Regime.W_LESS_ONE:
        kappa_1 = 3 * (1 - w)
        a3, _, _ = printed["a3"]
        # a3 carries the factor (4 - kappa_1), so the quotient stays defined at kappa_1 = 4
        a3_quot = (2.0 * params.c_tilde * params.rho_w / params.sigma ** 2 if kappa_1 == 4
                   else a3 / float(4 - kappa_1))
        return (
            RegTerm(printed["a1"][0], Fraction(1), label="rho_m"),
            RegTerm(0.5 * printed["a2"][0], Fraction(2, 3), label="rho_rad"),
            RegTerm(a3_quot, kappa_1 / 3, label="rho_w"),
        )
    if regime is Regime.W_EQUAL_ONE:
        return (
            RegTerm(printed["b1"][0], Fraction(1), label="rho_m"),
            RegTerm(0.5 * printed["b2"][0], Fraction(2, 3), label="rho_rad"),
        )
    gamma = exponents_of(w).gamma
    kappa_2 = 3 * (w - 1)
    return (
        RegTerm(printed["c1"][0], gamma * (3 + kappa_2), label="rho_m"),
        RegTerm(0.5 * printed["c2"][0], gamma * (2 + kappa_2), label="rho_rad"),
        RegTerm(0.25 * printed["c3"][0], gamma * kappa_2, label="sigma"),
    )


def printed_g_terms(params: CosmologyParams) -> Tuple[RegTerm, ...]:
    """The field polynomial exactly as printed, for comparison only."""
    printed = printed_coefficients(params)
    w = params.w
    regime = Regime.of(w)
    if regime is Regime.W_LESS_ONE:
        kappa_1 = 3 * (1 - w)
        return (
            RegTerm(printed["a1"][0], Fraction(1), label="rho_m"),
            RegTerm(printed["a2"][0], Fraction(2, 3), label="rho_rad"),
            RegTerm(printed["a3"][0], kappa_1 / 3, label="rho_w"),
        )
    if regime is Regime.W_EQUAL_ONE:
        return (
            RegTerm(printed["b1"][0], Fraction(1), label="rho_m"),
            RegTerm(printed["b2"][0], Fraction(2, 3), label="rho_rad"),
        )
    gamma = exponents_of(w).gamma
    kappa_2 = 3 * (w - 1)
    return (
        RegTerm(printed["c1"][0], kappa_2 * gamma + 3, label="rho_m"),
        RegTerm(printed["c2"][0], kappa_2 * gamma + 2, label="rho_rad"),
        RegTerm(printed["c3"][0], kappa_2 * gamma, label="sigma"),
    )


def compare_terms(printed: Tuple[RegTerm, ...], derived: Tuple[RegTerm, ...],
                  rel_tol: float = 1e-12) -> List[Dict[str, Any]]:
    """Pair printed and derived terms by label; report coefficient ratio and exponent agreement."""
    by_label = {term.label: term for term in derived}
    records = []
    for term in printed:
        match = by_label.get(term.label)
        derived_coef = match.coef if match is not None else 0.0
        derived_exp = match.exponent if match is not None else None
        ratio = derived_coef / term.coef if term.coef else math.nan
        coef_ok = abs(derived_coef - term.coef) <= rel_tol * max(abs(term.coef), abs(derived_coef), 1e-300)
        records.append({
            "label": term.label,
            "printed_coef": term.coef,
            "derived_coef": derived_coef,
            "coef_ratio": ratio,
            "printed_exponent": format_rational(term.exponent),
            "derived_exponent": format_rational(derived_exp) if derived_exp is not None else None,
            "coef_matches": coef_ok,
            "exponent_matches": derived_exp == term.exponent,
        })
    return records
