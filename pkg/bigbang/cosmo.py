"""
Anisotropic Friedmann model and its reduction to a central-force system.

The physical acceleration is rescaled by a constant time scaling t = lambda*tau
into a'' = -lead * a^-(alpha+1) - sum(sub forces), with potential V so that
a'' = dV/da and energy H = P**2/2 - V. Every reduced coefficient is lambda**2
times the matching coefficient of the physical acceleration; none is
transcribed from printed constants.
"""

import math
import numbers
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Tuple

from bigbang.exceptions import DomainError, RejectedInputError
from bigbang.ratnum import ExponentTriple, as_rational, exponents_of, format_rational
from utils.logger import get_logger


logger = get_logger(__name__)

PARAM_KEYS = ("sigma", "K", "G", "rho_m", "rho_rad", "rho_w", "w")


class Regime(Enum):
    """Regime of the equation of state relative to w = 1."""
    W_LESS_ONE = "w<1"
    W_EQUAL_ONE = "w=1"
    W_GREATER_ONE = "w>1"

    @classmethod
    def of(cls, w: Fraction) -> "Regime":
        if w < 1:
            return cls.W_LESS_ONE
        if w == 1:
            return cls.W_EQUAL_ONE
        return cls.W_GREATER_ONE


def _require_positive_a(a: float) -> None:
    if not a > 0:
        raise DomainError(f"Scale factor must be positive, got {a!r}", reason="a-nonpositive")


@dataclass(frozen=True)
class CosmologyParams:
    """
    Physical inputs of the Friedmann model.

    Zero densities and anisotropy are accepted so that degenerate universes
    can be evaluated; ``check_positive`` enforces strict positivity
    before a reduction.
    """
    sigma: float
    curvature: float
    newton_g: float
    rho_m: float
    rho_rad: float
    rho_w: float
    w: Fraction

    def __post_init__(self):
        object.__setattr__(self, "w", as_rational(self.w))
        for name in ("sigma", "curvature", "newton_g", "rho_m", "rho_rad", "rho_w"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, numbers.Real) or not math.isfinite(value):
                raise RejectedInputError(f"Parameter {name} must be a finite real, got {value!r}",
                                         reason="non-finite-parameter")
            object.__setattr__(self, name, float(value))
        if self.newton_g <= 0:
            raise RejectedInputError(f"G must be positive, got {self.newton_g}", reason="nonpositive-parameter")
        for name in ("sigma", "rho_m", "rho_rad", "rho_w"):
            if getattr(self, name) < 0:
                raise RejectedInputError(f"Parameter {name} must be non-negative", reason="nonpositive-parameter")

    @property
    def c_tilde(self) -> float:
        """4*pi*G/3."""
        return 4.0 * math.pi * self.newton_g / 3.0

    def check_positive(self) -> None:
        """Raise unless sigma and the three present densities are strictly positive."""
        for name in ("sigma", "rho_m", "rho_rad", "rho_w"):
            if not getattr(self, name) > 0:
                raise RejectedInputError(f"Parameter {name} must be strictly positive for the reduction",
                                         reason="nonpositive-parameter")

    def with_overrides(self, **overrides: Any) -> "CosmologyParams":
        return replace(self, **overrides)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CosmologyParams":
        unknown = set(data) - set(PARAM_KEYS)
        if unknown:
            raise RejectedInputError(f"Unknown parameter keys: {sorted(unknown)}", reason="unknown-key")
        missing = [key for key in PARAM_KEYS if key not in data]
        if missing:
            raise RejectedInputError(f"Missing parameter keys: {missing}", reason="missing-key")
        return cls(
            sigma=data["sigma"],
            curvature=data["K"],
            newton_g=data["G"],
            rho_m=data["rho_m"],
            rho_rad=data["rho_rad"],
            rho_w=data["rho_w"],
            w=as_rational(data["w"]),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma": self.sigma,
            "K": self.curvature,
            "G": self.newton_g,
            "rho_m": self.rho_m,
            "rho_rad": self.rho_rad,
            "rho_w": self.rho_w,
            "w": format_rational(self.w),
        }


@dataclass(frozen=True)
class ForceTerm:
    """Force contribution -coef * a^(-exponent)."""
    coef: float
    exponent: Fraction
    label: str = ""

    def value(self, a: float) -> float:
        return self.coef * a ** (-float(self.exponent))


@dataclass(frozen=True)
class PotentialTerm:
    """Potential contribution coef * a^(-exponent) + log_coef * ln(a)."""
    coef: float
    exponent: Fraction
    log_coef: float = 0.0
    label: str = ""

    def value(self, a: float) -> float:
        result = self.coef * a ** (-float(self.exponent)) if self.coef else 0.0
        if self.log_coef:
            result += self.log_coef * math.log(a)
        return result

    def derivative(self, a: float) -> float:
        result = -float(self.exponent) * self.coef * a ** (-float(self.exponent) - 1.0)
        if self.log_coef:
            result += self.log_coef / a
        return result


@dataclass(frozen=True)
class PhysState:
    """Point (a, P, tau) of the reduced physical system, a > 0."""
    a: float
    p_mom: float
    tau: float = 0.0

    def __post_init__(self):
        _require_positive_a(self.a)


def antiderivative(term: ForceTerm, constant: float = 0.0) -> PotentialTerm:
    """
    Potential term whose derivative is the force term.

    -c a^-e integrates to (c/(e-1)) a^-(e-1); e = 1 gives -c ln(a) and the
    free constant is carried as an a^0 term.
    """
    if term.exponent == 1:
        return PotentialTerm(coef=constant, exponent=Fraction(0), log_coef=-term.coef, label=term.label)
    return PotentialTerm(coef=term.coef / float(term.exponent - 1), exponent=term.exponent - 1,
                         label=term.label)


@dataclass(frozen=True)
class ReducedModel:
    """Regime-dispatched central-force system a'' = dV/da."""
    regime: Regime
    w: Fraction
    exps: ExponentTriple
    kappa: Fraction
    lead_coef: float
    sub_forces: Tuple[ForceTerm, ...]
    potential_terms: Tuple[PotentialTerm, ...]
    time_scale: float
    c_tilde: float
    big_c: float
    notes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def lead_exponent(self) -> Fraction:
        """Exponent alpha + 1 of the dominant force term."""
        return self.exps.alpha + 1

    @property
    def potential_lead_coef(self) -> float:
        return self.lead_coef / self.exps.alpha_f

    def without_forces(self) -> "ReducedModel":
        """Free-motion copy: every force coefficient zero."""
        return replace(self, lead_coef=0.0, sub_forces=(), potential_terms=(),
                       notes=self.notes + ("force-free",))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "regime": self.regime.value,
            "w": format_rational(self.w),
            "exponents": self.exps.to_dict(),
            "kappa": format_rational(self.kappa),
            "lead_coef": self.lead_coef,
            "lead_exponent": format_rational(self.lead_exponent),
            "sub_forces": [
                {"label": t.label, "coef": t.coef, "exponent": format_rational(t.exponent)}
                for t in self.sub_forces
            ],
            "potential_terms": [
                {"label": t.label, "coef": t.coef, "exponent": format_rational(t.exponent),
                 "log_coef": t.log_coef}
                for t in self.potential_terms
            ],
            "time_scale": self.time_scale,
            "c_tilde": self.c_tilde,
            "big_c": self.big_c,
            "notes": list(self.notes),
        }


def hubble_sq(a: float, params: CosmologyParams) -> float:
    """H**2 from the anisotropic Friedmann equation."""
    _require_positive_a(a)
    w = float(params.w)
    densities = params.rho_m / a ** 3 + params.rho_rad / a ** 4 + params.rho_w / a ** (3.0 * (1.0 + w))
    return 2.0 * params.c_tilde * densities - params.curvature / a ** 2 + params.sigma ** 2 / a ** 6


def constraint_residual(a: float, adot: float, params: CosmologyParams) -> float:
    """adot**2 - a**2 H**2; zero iff (a, adot) satisfies the Friedmann constraint."""
    _require_positive_a(a)
    w = float(params.w)
    densities = params.rho_m / a + params.rho_rad / a ** 2 + params.rho_w / a ** (3.0 * (1.0 + w) - 2.0)
    return adot ** 2 - params.sigma ** 2 / a ** 4 + params.curvature - 2.0 * params.c_tilde * densities


def full_accel(a: float, params: CosmologyParams) -> float:
    """Second derivative of a in physical time."""
    _require_positive_a(a)
    w = float(params.w)
    matter = params.rho_m / a ** 2 + 2.0 * params.rho_rad / a ** 3
    fluid = params.rho_w * (3.0 * w + 1.0) / a ** (3.0 * w + 2.0)
    return -2.0 * params.sigma ** 2 / a ** 5 - params.c_tilde * (matter + fluid)


def _physical_terms(params: CosmologyParams) -> List[ForceTerm]:
    """The four force terms of the physical acceleration, before scaling."""
    w = params.w
    c_tilde = params.c_tilde
    return [
        ForceTerm(2.0 * params.sigma ** 2, Fraction(5), "sigma"),
        ForceTerm(c_tilde * params.rho_m, Fraction(2), "rho_m"),
        ForceTerm(2.0 * c_tilde * params.rho_rad, Fraction(3), "rho_rad"),
        ForceTerm(c_tilde * params.rho_w * float(3 * w + 1), 3 * w + 2, "rho_w"),
    ]


def _time_scale_sq(regime: Regime, params: CosmologyParams, big_c: float) -> float:
    if regime is Regime.W_LESS_ONE:
        return 2.0 / params.sigma ** 2
    if regime is Regime.W_EQUAL_ONE:
        return 4.0 / big_c
    return 1.0 / (params.c_tilde * params.rho_w)


def reduce(params: CosmologyParams) -> ReducedModel:
    """
    Reduce the Friedmann model to a central-force Hamiltonian system.

    Args:
        params: Physical parameters with sigma, G and the three densities positive

    Returns:
        ReducedModel whose dominant term has coefficient alpha and whose
        potential is lambda**2/2 times the density and anisotropy part of
        the constraint
    """
    params.check_positive()
    w = params.w
    regime = Regime.of(w)
    exps = exponents_of(w)
    c_tilde = params.c_tilde
    big_c = 2.0 * params.sigma ** 2 + 4.0 * c_tilde * params.rho_w
    lam_sq = _time_scale_sq(regime, params, big_c)
    lead_exponent = exps.alpha + 1

    lead = 0.0
    subs: List[ForceTerm] = []
    for term in _physical_terms(params):
        scaled = ForceTerm(lam_sq * term.coef, term.exponent, term.label)
        if term.exponent == lead_exponent:
            lead += scaled.coef
        else:
            subs.append(scaled)

    notes: List[str] = []
    if regime is Regime.W_LESS_ONE:
        kappa = 3 * (1 - w)
        if w < -1:
            notes.append("w<-1")
            logger.warning(f"w = {format_rational(w)} < -1: classified under the w <= 1 regime")
    elif regime is Regime.W_EQUAL_ONE:
        kappa = Fraction(0)
    else:
        kappa = 3 * (w - 1)

    potentials = []
    for term in subs:
        # a^0 potential of the w = -1/3 fluid: lambda^2 * c_tilde * rho_w
        constant = lam_sq * c_tilde * params.rho_w if term.exponent == 1 else 0.0
        potentials.append(antiderivative(term, constant))

    for term in subs:
        if not term.exponent < lead_exponent:
            raise DomainError(f"Sub-force {term.label} exponent {term.exponent} does not stay below "
                              f"{lead_exponent}", reason="dominance-violated")
        if term.coef < 0:
            notes.append(f"repulsive-{term.label}")

    model = ReducedModel(
        regime=regime,
        w=w,
        exps=exps,
        kappa=kappa,
        lead_coef=lead,
        sub_forces=tuple(subs),
        potential_terms=tuple(potentials),
        time_scale=math.sqrt(lam_sq),
        c_tilde=c_tilde,
        big_c=big_c,
        notes=tuple(notes),
    )
    logger.debug(f"Reduced w={format_rational(w)} ({regime.value}): lead {lead:.17g} "
                 f"a^-{lead_exponent}, {len(subs)} sub-forces, lambda={model.time_scale:.17g}")
    return model


def pure_power_model(w: Any) -> ReducedModel:
    """Model with only the dominant term a'' = -alpha a^-(alpha+1), V = a^-alpha."""
    w = as_rational(w)
    exps = exponents_of(w)
    regime = Regime.of(w)
    if regime is Regime.W_LESS_ONE:
        kappa = 3 * (1 - w)
    elif regime is Regime.W_EQUAL_ONE:
        kappa = Fraction(0)
    else:
        kappa = 3 * (w - 1)
    return ReducedModel(
        regime=regime,
        w=w,
        exps=exps,
        kappa=kappa,
        lead_coef=exps.alpha_f,
        sub_forces=(),
        potential_terms=(),
        time_scale=1.0,
        c_tilde=1.0,
        big_c=4.0,
        notes=("pure-power",),
    )


def reduced_accel(model: ReducedModel, a: float) -> float:
    """a'' in scaled time; equals dV/da."""
    _require_positive_a(a)
    accel = -model.lead_coef * a ** (-float(model.lead_exponent)) if model.lead_coef else 0.0
    for term in model.sub_forces:
        accel -= term.value(a)
    return accel


def potential_value(model: ReducedModel, a: float) -> float:
    """V(a) = a^-alpha + sum of potential terms."""
    _require_positive_a(a)
    value = model.potential_lead_coef * a ** (-model.exps.alpha_f) if model.lead_coef else 0.0
    for term in model.potential_terms:
        value += term.value(a)
    return value


def hamiltonian(model: ReducedModel, a: float, p_mom: float) -> float:
    """H = P**2/2 - V(a)."""
    return 0.5 * p_mom * p_mom - potential_value(model, a)


def physical_energy(params: CosmologyParams, model: ReducedModel) -> float:
    """Energy level h = -lambda**2 K / 2 reached by constraint-satisfying states."""
    return -0.5 * model.time_scale ** 2 * params.curvature


def scaled_momentum(model: ReducedModel, adot: float) -> float:
    """P = dA/dtau = lambda * da/dt."""
    return model.time_scale * adot


def constraint_adot(a: float, params: CosmologyParams, sign: float = -1.0) -> float:
    """
    adot solving the constraint at a, with the requested sign.

    Raises DomainError when a**2 H**2 < 0 (no real expansion rate at a).
    """
    rate_sq = a * a * hubble_sq(a, params)
    if rate_sq < 0:
        raise DomainError(f"No real expansion rate at a={a}: a^2 H^2 = {rate_sq}", reason="turning-region")
    return math.copysign(math.sqrt(rate_sq), sign)


# Printed coefficients, kept only for comparison against the derived ones.
def printed_coefficients(params: CosmologyParams) -> Dict[str, Tuple[float, Fraction, str]]:
    """Coefficient name -> (printed value, force exponent, term label) for the regime of params.w."""
    w = params.w
    regime = Regime.of(w)
    c_tilde = params.c_tilde
    sigma_sq = params.sigma ** 2
    if regime is Regime.W_LESS_ONE:
        kappa_1 = 3 * (1 - w)
        return {
            "a1": (2.0 * c_tilde * params.rho_m / sigma_sq, Fraction(2), "rho_m"),
            "a2": (4.0 * c_tilde * params.rho_rad / sigma_sq, Fraction(3), "rho_rad"),
            "a3": (2.0 * c_tilde * float(4 - kappa_1) * params.rho_w / sigma_sq, 5 - kappa_1, "rho_w"),
        }
    if regime is Regime.W_EQUAL_ONE:
        big_c = 2.0 * sigma_sq + 4.0 * c_tilde * params.rho_w
        return {
            "b1": (4.0 * c_tilde * params.rho_m / big_c, Fraction(2), "rho_m"),
            "b2": (8.0 * c_tilde * params.rho_rad / big_c, Fraction(3), "rho_rad"),
        }
    return {
        "c1": (params.rho_m / params.rho_w, Fraction(2), "rho_m"),
        "c2": (2.0 * params.rho_rad / params.rho_w, Fraction(3), "rho_rad"),
        "c3": (2.0 * sigma_sq / params.rho_w, Fraction(5), "sigma"),
    }


def compare_printed_coefficients(params: CosmologyParams, model: ReducedModel,
                                 rel_tol: float = 1e-12) -> List[Dict[str, Any]]:
    """
    Match each printed reduced coefficient against the derived sub-force
    of the same physical term.

    Returns:
        One record per printed coefficient with printed, derived, relative
        deviation and a ``matches`` flag
    """
    derived = {term.label: term for term in model.sub_forces}
    records = []
    for name, (printed, exponent, label) in printed_coefficients(params).items():
        term = derived.get(label)
        value = term.coef if term is not None and term.exponent == exponent else 0.0
        scale = max(abs(printed), abs(value), 1e-300)
        deviation = abs(printed - value) / scale
        matches = deviation <= rel_tol
        records.append({
            "name": name,
            "exponent": format_rational(exponent),
            "printed": printed,
            "derived": value,
            "rel_deviation": deviation,
            "matches": matches,
        })
        if not matches:
            logger.warning(f"Printed coefficient {name} = {printed:.6g} deviates from derived "
                           f"{value:.6g} (rel {deviation:.3g})")
    return records
