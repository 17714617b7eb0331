"""Map free-text model output onto the binary label space.

Outputs are normalized (trim whitespace, lowercase, strip trailing
'.', '!', '?') and compared against manually declared positive and
negative surface forms. Anything that matches neither set scores the
fallback probability and is recorded as an unmatched-output event.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Literal, TYPE_CHECKING

from .errors import ValidationError

if TYPE_CHECKING:  # pragma: no cover
    from .predict import PredictionScore

logger = logging.getLogger(__name__)

Outcome = Literal["positive", "negative", "unmatched"]


@dataclass(frozen=True)
class Verbalizer:
    """Surface forms for each class plus the unmatched fallback."""

    positive_forms: frozenset[str]
    negative_forms: frozenset[str]
    fallback_probability: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "positive_forms", frozenset(normalize_output(f) for f in self.positive_forms)
        )
        object.__setattr__(
            self, "negative_forms", frozenset(normalize_output(f) for f in self.negative_forms)
        )
        if not self.positive_forms or not self.negative_forms:
            raise ValidationError("both form sets must be non-empty")
        overlap = self.positive_forms & self.negative_forms
        if overlap:
            raise ValidationError(
                f"forms may not be both positive and negative: {sorted(overlap)}"
            )
        if not 0.0 <= self.fallback_probability <= 1.0:
            raise ValidationError("fallback_probability must lie in [0, 1]")


def default_verbalizer() -> Verbalizer:
    return Verbalizer(frozenset({"yes"}), frozenset({"no"}))


def verbalizer_for(choices: Iterable[str]) -> Verbalizer:
    """Build a verbalizer whose forms are the (negative, positive) choices."""
    negative, positive = tuple(choices)
    return Verbalizer(frozenset({positive}), frozenset({negative}))


def normalize_output(raw: str) -> str:
    """Canonical comparison form of a model output."""
    text = raw.strip().lower()
    while text and text[-1] in ".!?":
        text = text[:-1]
    return text.strip()


def classify(raw: str, verbalizer: Verbalizer) -> Outcome:
    normalized = normalize_output(raw)
    if normalized in verbalizer.positive_forms:
        return "positive"
    if normalized in verbalizer.negative_forms:
        return "negative"
    return "unmatched"


def map_output(raw: str, verbalizer: Verbalizer) -> "PredictionScore":
    """Score a raw output: 1.0 positive, 0.0 negative, else the fallback."""
    from .predict import PredictionScore

    outcome = classify(raw, verbalizer)
    if outcome == "positive":
        probability = 1.0
    elif outcome == "negative":
        probability = 0.0
    else:
        probability = verbalizer.fallback_probability
        logger.debug("unmatched model output: %r", raw)
    return PredictionScore(positive_probability=probability, raw_output=raw)
