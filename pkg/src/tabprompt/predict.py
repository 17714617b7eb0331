"""Prediction backends: a deterministic mock and a remote HTTP endpoint.

The mock scores a prompt with a keyword logistic model over the
serialized row, which makes end-to-end runs reproducible without any
model server. The remote backend POSTs JSON ``{"input": ..., "choices":
[negative, positive]}`` and accepts either ``{"scores": [real, real]}``
aligned to the choices or ``{"text": "..."}`` to be verbalized. The
bearer credential is read from the environment variable named by the
config and is never logged.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Literal, Mapping, Sequence

import requests

from .errors import PredictionError, ValidationError
from .serialize import Prompt
from .verbalize import Verbalizer, classify, default_verbalizer

MAX_ATTEMPTS = 3
BACKOFF_BASE_SECONDS = 0.5
TRANSIENT_STATUS_CODES = frozenset({408, 429})


@dataclass(frozen=True)
class PredictorConfig:
    """Which backend to use and the parameters it needs."""

    kind: Literal["mock", "remote"]
    mock_weights: Mapping[str, float] | None = None
    mock_bias: float = 0.0
    endpoint_url: str | None = None
    auth_env_var: str | None = None
    timeout: float = 30.0
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "remote"):
            raise ValidationError(f"unknown predictor kind {self.kind!r}")
        if self.kind == "mock":
            if self.mock_weights is None:
                raise ValidationError("mock predictor requires mock_weights")
            object.__setattr__(self, "mock_weights", dict(self.mock_weights))
        if self.kind == "remote" and not self.endpoint_url:
            raise ValidationError("remote predictor requires endpoint_url")
        if self.timeout <= 0:
            raise ValidationError("timeout must be positive")
        if self.max_in_flight < 1:
            raise ValidationError("max_in_flight must be at least 1")


@dataclass(frozen=True)
class PredictionScore:
    """A probability for the positive choice plus the backend's raw output."""

    positive_probability: float
    raw_output: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.positive_probability <= 1.0:
            raise ValidationError("positive_probability must lie in [0, 1]")


def _sigmoid(score: float) -> float:
    if score >= 0:
        return 1.0 / (1.0 + math.exp(-score))
    value = math.exp(score)
    return value / (1.0 + value)


def _threshold_choice(probability: float, prompt: Prompt) -> str:
    negative, positive = prompt.answer_choices
    return positive if probability >= 0.5 else negative


def mock_score(prompt: Prompt, config: PredictorConfig) -> PredictionScore:
    """Keyword logistic score over the serialized row.

    Each configured keyword contributes its weight once if it occurs as
    a case-insensitive substring of the serialized row; the sigmoid of
    bias plus contributions is the positive probability. The raw output
    is the answer choice picked by thresholding at 0.5.
    """
    if config.kind != "mock":
        raise ValidationError("mock_score requires a mock predictor config")
    haystack = prompt.serialized_row.lower()
    assert config.mock_weights is not None
    score = config.mock_bias + sum(
        weight
        for keyword, weight in config.mock_weights.items()
        if keyword.lower() in haystack
    )
    probability = _sigmoid(score)
    return PredictionScore(
        positive_probability=probability,
        raw_output=_threshold_choice(probability, prompt),
    )


def _credential(config: PredictorConfig, row_index: int | None) -> str | None:
    if not config.auth_env_var:
        return None
    token = os.environ.get(config.auth_env_var)
    if not token:
        raise PredictionError(
            f"credential environment variable {config.auth_env_var!r} is not set",
            reason="missing_credential",
            row_index=row_index,
        )
    return token


def _interpret_scores(
    pair: object, prompt: Prompt, row_index: int | None
) -> PredictionScore:
    if (
        not isinstance(pair, (list, tuple))
        or len(pair) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair)
    ):
        raise PredictionError(
            f"endpoint returned malformed scores: {pair!r}",
            reason="bad_response",
            row_index=row_index,
        )
    negative, positive = float(pair[0]), float(pair[1])
    if not (math.isfinite(negative) and math.isfinite(positive)):
        raise PredictionError(
            "endpoint returned non-finite scores",
            reason="bad_response",
            row_index=row_index,
        )
    if negative >= 0 and positive >= 0:
        total = negative + positive
        probability = positive / total if total > 0 else 0.5
    else:
        # Negative values read as logits; fall back to a softmax pair.
        probability = _sigmoid(positive - negative)
    return PredictionScore(
        positive_probability=probability,
        raw_output=_threshold_choice(probability, prompt),
    )


def remote_score(
    prompt: Prompt,
    config: PredictorConfig,
    verbalizer: Verbalizer | None = None,
    *,
    session: requests.Session | None = None,
    row_index: int | None = None,
    on_unmatched: Callable[[str], None] | None = None,
) -> PredictionScore:
    """Score one prompt against the configured HTTP endpoint.

    Transient failures (timeouts, connection errors, HTTP 5xx, 408, 429)
    are retried with exponential backoff up to three attempts in total.
    Non-parseable responses and other HTTP errors fail immediately.
    """
    if config.kind != "remote":
        raise ValidationError("remote_score requires a remote predictor config")
    verbalizer = verbalizer or default_verbalizer()
    token = _credential(config, row_index)
    headers = {"Authorization": f"Bearer {token}"} if token else {}
    payload = {"input": prompt.text, "choices": list(prompt.answer_choices)}
    post = session.post if session is not None else requests.post

    last_transient = "transient failure"
    for attempt in range(1, MAX_ATTEMPTS + 1):
        try:
            response = post(
                config.endpoint_url,
                json=payload,
                headers=headers,
                timeout=config.timeout,
            )
        except requests.exceptions.RequestException as exc:
            last_transient = f"{type(exc).__name__}: {exc}"
        else:
            status = response.status_code
            if status >= 500 or status in TRANSIENT_STATUS_CODES:
                last_transient = f"endpoint returned HTTP {status}"
            elif status != 200:
                raise PredictionError(
                    f"endpoint returned HTTP {status}",
                    reason="http_error",
                    row_index=row_index,
                )
            else:
                return _interpret_response(
                    response, prompt, verbalizer, row_index, on_unmatched
                )
        if attempt < MAX_ATTEMPTS:
            time.sleep(BACKOFF_BASE_SECONDS * 2 ** (attempt - 1))
    raise PredictionError(
        f"{last_transient} (gave up after {MAX_ATTEMPTS} attempts)",
        reason="transient_exhausted",
        row_index=row_index,
    )


def _interpret_response(
    response: requests.Response,
    prompt: Prompt,
    verbalizer: Verbalizer,
    row_index: int | None,
    on_unmatched: Callable[[str], None] | None,
) -> PredictionScore:
    try:
        data = response.json()
    except ValueError:
        raise PredictionError(
            "endpoint response is not valid JSON",
            reason="bad_response",
            row_index=row_index,
        ) from None
    if not isinstance(data, dict):
        raise PredictionError(
            "endpoint response is not a JSON object",
            reason="bad_response",
            row_index=row_index,
        )
    if "scores" in data:
        return _interpret_scores(data["scores"], prompt, row_index)
    if "text" in data and isinstance(data["text"], str):
        text = data["text"]
        outcome = classify(text, verbalizer)
        if outcome == "positive":
            probability = 1.0
        elif outcome == "negative":
            probability = 0.0
        else:
            probability = verbalizer.fallback_probability
            if on_unmatched is not None:
                on_unmatched(text)
        return PredictionScore(positive_probability=probability, raw_output=text)
    raise PredictionError(
        "endpoint response carries neither scores nor text",
        reason="bad_response",
        row_index=row_index,
    )


def score_prompts(
    prompts: Sequence[Prompt],
    config: PredictorConfig,
    verbalizer: Verbalizer | None = None,
    *,
    row_indices: Sequence[int] | None = None,
) -> tuple[list[PredictionScore], int]:
    """Score a batch of prompts, returning scores and the unmatched count.

    Mock scoring runs sequentially. Remote scoring fans out over a
    thread pool bounded by ``max_in_flight`` so no more than that many
    requests are ever in flight; the first failure aborts the batch and
    carries its prompt's row index.
    """
    indices = list(row_indices) if row_indices is not None else list(range(len(prompts)))
    if len(indices) != len(prompts):
        raise ValidationError("row_indices must align with prompts")

    if config.kind == "mock":
        return [mock_score(p, config) for p in prompts], 0

    verbalizer = verbalizer or default_verbalizer()
    _credential(config, None)  # fail before opening any connection
    flags: list[bool] = [False] * len(prompts)

    def score_one(i: int) -> PredictionScore:
        def note(_: str) -> None:
            flags[i] = True

        return remote_score(
            prompts[i],
            config,
            verbalizer,
            session=session,
            row_index=indices[i],
            on_unmatched=note,
        )

    with requests.Session() as session:
        with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
            scores = list(pool.map(score_one, range(len(prompts))))
    return scores, sum(flags)
