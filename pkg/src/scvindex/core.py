"""Composite vulnerability index model.

The index combines an individual-vulnerability side (awareness, behavior,
psychology, experience) and an attack-severity side (frequency, consequence,
sophistication), each a convex combination of factor scores on the [0, 5]
scale, blended by an (alpha, beta) pair that sums to one:

    overall = alpha * individual + beta * attack_severity

Factor composites are the arithmetic mean of whichever sub-factor scores are
present, which keeps every intermediate value on the same [0, 5] scale and
degrades gracefully when a sub-factor was not measured.

Everything here is a pure function over immutable values; no interior
mutation, safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .errors import (
    EmptyFactorError,
    MissingFactorError,
    NegativeWeightError,
    NonFiniteError,
    ScoreRangeError,
    SimplexViolationError,
)

SCORE_MIN = 0.0
SCORE_MAX = 5.0

#: Renormalize a weight block whose sum is off by no more than this;
#: reject anything worse as a configuration mistake.
SIMPLEX_TOLERANCE = 1e-6

IVI_WEIGHT_NAMES = ("awareness", "behavior", "psychology", "experience")
ASI_WEIGHT_NAMES = ("frequency", "consequence", "sophistication")
WEIGHT_NAMES = ("alpha", "beta") + IVI_WEIGHT_NAMES + ASI_WEIGHT_NAMES


def validate_score(value: float, *, clamp: bool = False, what: str = "score") -> float:
    """Check (or clamp) a value against the [0, 5] score scale.

    With ``clamp=False`` an out-of-range value raises ScoreRangeError; with
    ``clamp=True`` it is clipped to the nearest bound. NaN/inf always raise.
    """
    v = float(value)
    if not math.isfinite(v):
        raise NonFiniteError(f"{what} is not finite: {value!r}")
    if SCORE_MIN <= v <= SCORE_MAX:
        return v
    if clamp:
        return min(max(v, SCORE_MIN), SCORE_MAX)
    raise ScoreRangeError(f"{what} {v} outside [{SCORE_MIN}, {SCORE_MAX}]")


@dataclass(frozen=True)
class WeightConfig:
    """The seven factor weights plus the (alpha, beta) blend.

    Three blocks are each constrained to a probability simplex:
    (alpha, beta), the four individual-side weights, and the three
    attack-side weights. Construct through :func:`validate_weights` or
    :meth:`uniform` so the invariants are enforced.
    """

    alpha: float
    beta: float
    awareness: float
    behavior: float
    psychology: float
    experience: float
    frequency: float
    consequence: float
    sophistication: float

    @property
    def ivi_weights(self) -> tuple[float, float, float, float]:
        return (self.awareness, self.behavior, self.psychology, self.experience)

    @property
    def asi_weights(self) -> tuple[float, float, float]:
        return (self.frequency, self.consequence, self.sophistication)

    @classmethod
    def uniform(cls) -> "WeightConfig":
        """Equal weights: alpha = beta = 1/2, 1/4 per IVI factor, 1/3 per ASI factor."""
        return cls(0.5, 0.5, 0.25, 0.25, 0.25, 0.25, 1 / 3, 1 / 3, 1 / 3)

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _check_block(name: str, values: dict[str, float]) -> dict[str, float]:
    for key, v in values.items():
        if not math.isfinite(v):
            raise NonFiniteError(f"weight {key} is not finite: {v!r}")
        if v < 0:
            raise NegativeWeightError(f"weight {key} is negative: {v}")
    total = math.fsum(values.values())
    if abs(total - 1.0) > SIMPLEX_TOLERANCE:
        raise SimplexViolationError(
            f"{name} weights sum to {total!r}, expected 1 within {SIMPLEX_TOLERANCE}"
        )
    if total == 1.0:
        return values
    return {key: v / total for key, v in values.items()}


def validate_weights(raw: dict[str, float]) -> WeightConfig:
    """Validate a raw weight mapping and return a normalized WeightConfig.

    ``raw`` must carry all nine weight names. Block sums within 1e-6 of one
    are renormalized to sum exactly; larger deviations raise
    SimplexViolationError. Negative or non-finite entries are rejected.
    """
    missing = [name for name in WEIGHT_NAMES if name not in raw]
    if missing:
        raise SimplexViolationError(f"missing weight entries: {', '.join(missing)}")
    blend = _check_block("alpha/beta", {k: float(raw[k]) for k in ("alpha", "beta")})
    ivi = _check_block("individual", {k: float(raw[k]) for k in IVI_WEIGHT_NAMES})
    asi = _check_block("attack", {k: float(raw[k]) for k in ASI_WEIGHT_NAMES})
    return WeightConfig(**blend, **ivi, **asi)


@dataclass(frozen=True)
class IviFactors:
    """Individual-side sub-factor scores; None marks an unmeasured sub-factor.

    Awareness pair: unfamiliarity with the attack and the gap in protective
    knowledge. Behavior pair: risk-enhancing activity and (lack of) security
    practices. Psychology pair: trust and impulsivity. Experience pair: past
    encounters and responses to past incidents.
    """

    unfamiliarity: float | None = None
    protective_knowledge_gap: float | None = None
    risky_behavior: float | None = None
    security_practice_gap: float | None = None
    trust: float | None = None
    impulsivity: float | None = None
    past_encounters: float | None = None
    incident_response: float | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                object.__setattr__(self, f.name, validate_score(v, what=f.name))

    def factor_subscores(self) -> dict[str, list[float]]:
        pairs = {
            "awareness": (self.unfamiliarity, self.protective_knowledge_gap),
            "behavior": (self.risky_behavior, self.security_practice_gap),
            "psychology": (self.trust, self.impulsivity),
            "experience": (self.past_encounters, self.incident_response),
        }
        return {k: [v for v in vs if v is not None] for k, vs in pairs.items()}


@dataclass(frozen=True)
class AsiFactors:
    """Attack-side sub-factor scores; None marks an unmeasured sub-factor.

    Frequency pair: attempted and actual attacks. Consequence triple:
    financial, psychological, and personal-safety impact. Sophistication
    pair: mimicry of legitimate communication and personalization of the
    social engineering.
    """

    attempted_attacks: float | None = None
    actual_attacks: float | None = None
    financial_impact: float | None = None
    psychological_impact: float | None = None
    safety_impact: float | None = None
    mimicry: float | None = None
    personalization: float | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                object.__setattr__(self, f.name, validate_score(v, what=f.name))

    def factor_subscores(self) -> dict[str, list[float]]:
        groups = {
            "frequency": (self.attempted_attacks, self.actual_attacks),
            "consequence": (self.financial_impact, self.psychological_impact, self.safety_impact),
            "sophistication": (self.mimicry, self.personalization),
        }
        return {k: [v for v in vs if v is not None] for k, vs in groups.items()}


def composite_factor(sub_scores: list[float]) -> float:
    """Mean of the present sub-factor scores (stays on the [0, 5] scale)."""
    if not sub_scores:
        raise EmptyFactorError("no sub-factor scores present")
    return math.fsum(validate_score(s) for s in sub_scores) / len(sub_scores)


def _composites(factors, weights_names) -> dict[str, float]:
    out = {}
    for name, subs in factors.factor_subscores().items():
        if not subs:
            raise MissingFactorError(f"factor '{name}' has no measured sub-factors")
        out[name] = composite_factor(subs)
    return out


def compute_ivi(factors: IviFactors, weights: WeightConfig) -> float:
    """Weighted sum of the four individual-side factor composites."""
    comps = _composites(factors, IVI_WEIGHT_NAMES)
    return math.fsum(getattr(weights, n) * comps[n] for n in IVI_WEIGHT_NAMES)


def compute_asi(factors: AsiFactors, weights: WeightConfig) -> float:
    """Weighted sum of the three attack-side factor composites."""
    comps = _composites(factors, ASI_WEIGHT_NAMES)
    return math.fsum(getattr(weights, n) * comps[n] for n in ASI_WEIGHT_NAMES)


@dataclass(frozen=True)
class ScoreBreakdown:
    """One scored unit with every intermediate recorded.

    Factor composite fields are None when the breakdown was built from
    pre-aggregated index values rather than from sub-factor inputs.
    """

    ivi: float
    asi: float
    scvi: float
    weights: WeightConfig
    awareness: float | None = None
    behavior: float | None = None
    psychology: float | None = None
    experience: float | None = None
    frequency: float | None = None
    consequence: float | None = None
    sophistication: float | None = None

    def factor_values(self) -> dict[str, float | None]:
        names = IVI_WEIGHT_NAMES + ASI_WEIGHT_NAMES
        return {n: getattr(self, n) for n in names}


def compute_scvi(ivi: float, asi: float, weights: WeightConfig) -> ScoreBreakdown:
    """Blend the two index values: alpha * ivi + beta * asi."""
    ivi = validate_score(ivi, what="ivi")
    asi = validate_score(asi, what="asi")
    scvi = weights.alpha * ivi + weights.beta * asi
    return ScoreBreakdown(ivi=ivi, asi=asi, scvi=scvi, weights=weights)


def score_factors(
    ivi_factors: IviFactors, asi_factors: AsiFactors, weights: WeightConfig
) -> ScoreBreakdown:
    """Full pipeline from sub-factor scores to a breakdown with composites."""
    ivi_comps = _composites(ivi_factors, IVI_WEIGHT_NAMES)
    asi_comps = _composites(asi_factors, ASI_WEIGHT_NAMES)
    ivi = math.fsum(getattr(weights, n) * ivi_comps[n] for n in IVI_WEIGHT_NAMES)
    asi = math.fsum(getattr(weights, n) * asi_comps[n] for n in ASI_WEIGHT_NAMES)
    scvi = weights.alpha * ivi + weights.beta * asi
    return ScoreBreakdown(ivi=ivi, asi=asi, scvi=scvi, weights=weights, **ivi_comps, **asi_comps)
