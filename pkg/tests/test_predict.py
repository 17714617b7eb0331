from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

import pytest

import tabprompt.predict as predict_module
from tabprompt.errors import PredictionError, ValidationError
from tabprompt.predict import (
    PredictionScore,
    PredictorConfig,
    mock_score,
    remote_score,
    score_prompts,
)
from tabprompt.serialize import Prompt
from tabprompt.verbalize import default_verbalizer

PROMPT = Prompt(
    "price is 5000, issue is engine failure.",
    "Is this vehicle claim anomalous? Yes or no?",
    ("No", "Yes"),
)

Responder = Callable[[dict], tuple[int, object]]


class _Endpoint:
    """An in-process HTTP endpoint whose behavior is set per test."""

    def __init__(self) -> None:
        self.lock = threading.Lock()
        self.requests: list[dict] = []
        self.responder: Responder = lambda record: (200, {"scores": [0.5, 0.5]})
        self.delay = 0.0
        self.active = 0
        self.max_active = 0
        self.url = ""


class _Handler(BaseHTTPRequestHandler):
    endpoint: _Endpoint

    def do_POST(self) -> None:  # noqa: N802 (fixed by the HTTP API)
        endpoint = self.endpoint
        length = int(self.headers.get("Content-Length") or 0)
        try:
            payload = json.loads(self.rfile.read(length))
        except ValueError:
            payload = None
        record = {
            "payload": payload,
            "authorization": self.headers.get("Authorization"),
        }
        with endpoint.lock:
            endpoint.requests.append(record)
            endpoint.active += 1
            endpoint.max_active = max(endpoint.max_active, endpoint.active)
        try:
            if endpoint.delay:
                time.sleep(endpoint.delay)
            status, body = endpoint.responder(record)
        finally:
            with endpoint.lock:
                endpoint.active -= 1
        data = body if isinstance(body, bytes) else json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args: object) -> None:
        pass


@pytest.fixture
def endpoint():
    state = _Endpoint()
    handler = type("BoundHandler", (_Handler,), {"endpoint": state})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    state.url = f"http://127.0.0.1:{server.server_port}/score"
    yield state
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


def remote_config(endpoint: _Endpoint, **kwargs) -> PredictorConfig:
    kwargs.setdefault("timeout", 5.0)
    return PredictorConfig(kind="remote", endpoint_url=endpoint.url, **kwargs)


class _RecordingSleep:
    def __init__(self) -> None:
        self.sleeps: list[float] = []

    def sleep(self, seconds: float) -> None:
        self.sleeps.append(seconds)


@pytest.fixture
def fake_sleep(monkeypatch) -> _RecordingSleep:
    recorder = _RecordingSleep()
    monkeypatch.setattr(predict_module, "time", recorder)
    return recorder


def test_mock_frozen_sigmoid_values() -> None:
    hit = PredictorConfig(kind="mock", mock_weights={"engine": 1.0})
    assert mock_score(PROMPT, hit).positive_probability == 0.7310585786300049
    miss = PredictorConfig(kind="mock", mock_weights={"zebra": 1.0}, mock_bias=-1.0)
    assert mock_score(PROMPT, miss).positive_probability == 0.2689414213699951
    empty = PredictorConfig(kind="mock", mock_weights={})
    assert mock_score(PROMPT, empty).positive_probability == 0.5


def test_mock_threshold_picks_answer_choice() -> None:
    hit = PredictorConfig(kind="mock", mock_weights={"engine": 1.0})
    assert mock_score(PROMPT, hit).raw_output == "Yes"
    miss = PredictorConfig(kind="mock", mock_weights={"engine": -1.0})
    assert mock_score(PROMPT, miss).raw_output == "No"
    tie = PredictorConfig(kind="mock", mock_weights={})
    assert mock_score(PROMPT, tie).raw_output == "Yes"


def test_mock_keyword_match_is_case_insensitive() -> None:
    config = PredictorConfig(kind="mock", mock_weights={"ENGINE Failure": 2.0})
    assert mock_score(PROMPT, config).positive_probability > 0.5


def test_mock_matches_row_not_question() -> None:
    config = PredictorConfig(kind="mock", mock_weights={"anomalous": 5.0})
    assert mock_score(PROMPT, config).positive_probability == 0.5


def test_mock_weight_order_is_irrelevant() -> None:
    forward = PredictorConfig(
        kind="mock", mock_weights={"price": 0.3, "engine": 1.1, "issue": -0.4}
    )
    backward = PredictorConfig(
        kind="mock", mock_weights={"issue": -0.4, "engine": 1.1, "price": 0.3}
    )
    assert (
        mock_score(PROMPT, forward).positive_probability
        == mock_score(PROMPT, backward).positive_probability
    )


def test_mock_extra_matching_keyword_raises_probability() -> None:
    base = PredictorConfig(kind="mock", mock_weights={"price": 0.5})
    more = PredictorConfig(kind="mock", mock_weights={"price": 0.5, "issue": 0.5})
    assert (
        mock_score(PROMPT, more).positive_probability
        > mock_score(PROMPT, base).positive_probability
    )


def test_predictor_config_validation() -> None:
    with pytest.raises(ValidationError, match="mock_weights"):
        PredictorConfig(kind="mock")
    with pytest.raises(ValidationError, match="endpoint_url"):
        PredictorConfig(kind="remote")
    with pytest.raises(ValidationError, match="kind"):
        PredictorConfig(kind="oracle", mock_weights={})
    with pytest.raises(ValidationError, match="timeout"):
        PredictorConfig(kind="mock", mock_weights={}, timeout=0)
    with pytest.raises(ValidationError, match="max_in_flight"):
        PredictorConfig(kind="mock", mock_weights={}, max_in_flight=0)


def test_mock_score_rejects_remote_config(endpoint) -> None:
    with pytest.raises(ValidationError, match="mock"):
        mock_score(PROMPT, remote_config(endpoint))
    with pytest.raises(ValidationError, match="remote"):
        remote_score(PROMPT, PredictorConfig(kind="mock", mock_weights={}))


def test_prediction_score_bounds() -> None:
    with pytest.raises(ValidationError, match="positive_probability"):
        PredictionScore(positive_probability=1.5, raw_output="Yes")


def test_remote_scores_response(endpoint, monkeypatch) -> None:
    monkeypatch.setenv("TABPROMPT_TEST_TOKEN", "sekrit")
    endpoint.responder = lambda record: (200, {"scores": [0.2, 0.8]})
    config = remote_config(endpoint, auth_env_var="TABPROMPT_TEST_TOKEN")
    score = remote_score(PROMPT, config)
    assert score.positive_probability == 0.8
    assert score.raw_output == "Yes"
    assert len(endpoint.requests) == 1
    record = endpoint.requests[0]
    assert record["payload"] == {
        "input": PROMPT.text,
        "choices": ["No", "Yes"],
    }
    assert record["authorization"] == "Bearer sekrit"


def test_remote_without_auth_sends_no_header(endpoint) -> None:
    endpoint.responder = lambda record: (200, {"scores": [1.0, 0.0]})
    score = remote_score(PROMPT, remote_config(endpoint))
    assert score.positive_probability == 0.0
    assert score.raw_output == "No"
    assert endpoint.requests[0]["authorization"] is None


def test_remote_scores_all_zero_falls_back_to_half(endpoint) -> None:
    endpoint.responder = lambda record: (200, {"scores": [0.0, 0.0]})
    assert remote_score(PROMPT, remote_config(endpoint)).positive_probability == 0.5


def test_remote_negative_scores_read_as_logits(endpoint) -> None:
    endpoint.responder = lambda record: (200, {"scores": [-1.0, 1.0]})
    score = remote_score(PROMPT, remote_config(endpoint))
    assert score.positive_probability == 0.8807970779778823


def test_remote_malformed_scores_fail_immediately(endpoint) -> None:
    endpoint.responder = lambda record: (200, {"scores": [1.0]})
    with pytest.raises(PredictionError) as err:
        remote_score(PROMPT, remote_config(endpoint))
    assert err.value.reason == "bad_response"
    assert len(endpoint.requests) == 1


def test_remote_text_response_verbalized(endpoint) -> None:
    endpoint.responder = lambda record: (200, {"text": "Yes."})
    score = remote_score(PROMPT, remote_config(endpoint))
    assert score.positive_probability == 1.0
    assert score.raw_output == "Yes."

    endpoint.responder = lambda record: (200, {"text": " no "})
    assert remote_score(PROMPT, remote_config(endpoint)).positive_probability == 0.0


def test_remote_unmatched_text_scores_fallback(endpoint) -> None:
    endpoint.responder = lambda record: (200, {"text": "It depends."})
    seen: list[str] = []
    score = remote_score(
        PROMPT,
        remote_config(endpoint),
        default_verbalizer(),
        on_unmatched=seen.append,
    )
    assert score.positive_probability == 0.5
    assert score.raw_output == "It depends."
    assert seen == ["It depends."]


@pytest.mark.parametrize("status", [500, 503, 408, 429])
def test_remote_transient_statuses_retry_three_times(
    endpoint, fake_sleep, status
) -> None:
    endpoint.responder = lambda record: (status, {})
    with pytest.raises(PredictionError) as err:
        remote_score(PROMPT, remote_config(endpoint))
    assert err.value.reason == "transient_exhausted"
    assert f"HTTP {status}" in str(err.value)
    assert len(endpoint.requests) == 3
    assert fake_sleep.sleeps == [0.5, 1.0]


def test_remote_recovers_after_transient_failures(endpoint, fake_sleep) -> None:
    calls = {"n": 0}

    def flaky(record: dict) -> tuple[int, object]:
        calls["n"] += 1
        if calls["n"] < 3:
            return 500, {}
        return 200, {"scores": [0.25, 0.75]}

    endpoint.responder = flaky
    score = remote_score(PROMPT, remote_config(endpoint))
    assert score.positive_probability == 0.75
    assert len(endpoint.requests) == 3
    assert fake_sleep.sleeps == [0.5, 1.0]


def test_remote_client_error_fails_immediately(endpoint, fake_sleep) -> None:
    endpoint.responder = lambda record: (404, {})
    with pytest.raises(PredictionError) as err:
        remote_score(PROMPT, remote_config(endpoint), row_index=7)
    assert err.value.reason == "http_error"
    assert "row 7" in str(err.value)
    assert len(endpoint.requests) == 1
    assert fake_sleep.sleeps == []


def test_remote_non_json_body_fails_immediately(endpoint, fake_sleep) -> None:
    endpoint.responder = lambda record: (200, b"this is not json")
    with pytest.raises(PredictionError) as err:
        remote_score(PROMPT, remote_config(endpoint))
    assert err.value.reason == "bad_response"
    assert len(endpoint.requests) == 1
    assert fake_sleep.sleeps == []


def test_remote_response_without_scores_or_text(endpoint) -> None:
    endpoint.responder = lambda record: (200, {"logits": [1, 2]})
    with pytest.raises(PredictionError, match="neither scores nor text") as err:
        remote_score(PROMPT, remote_config(endpoint))
    assert err.value.reason == "bad_response"


def test_remote_connection_failure_is_transient(fake_sleep) -> None:
    config = PredictorConfig(
        kind="remote", endpoint_url="http://127.0.0.1:1/score", timeout=0.2
    )
    with pytest.raises(PredictionError) as err:
        remote_score(PROMPT, config)
    assert err.value.reason == "transient_exhausted"
    assert fake_sleep.sleeps == [0.5, 1.0]


def test_missing_credential_fails_before_any_request(endpoint, monkeypatch) -> None:
    monkeypatch.delenv("TABPROMPT_TEST_TOKEN", raising=False)
    config = remote_config(endpoint, auth_env_var="TABPROMPT_TEST_TOKEN")
    with pytest.raises(PredictionError) as err:
        remote_score(PROMPT, config)
    assert err.value.reason == "missing_credential"
    assert endpoint.requests == []

    monkeypatch.setenv("TABPROMPT_TEST_TOKEN", "")
    with pytest.raises(PredictionError) as err:
        score_prompts([PROMPT], config)
    assert err.value.reason == "missing_credential"
    assert endpoint.requests == []


def test_score_prompts_mock_batch() -> None:
    config = PredictorConfig(kind="mock", mock_weights={"engine": 2.0})
    other = Prompt("color is blue.", PROMPT.question, PROMPT.answer_choices)
    scores, unmatched = score_prompts([PROMPT, other], config)
    assert unmatched == 0
    assert [s.raw_output for s in scores] == ["Yes", "Yes"]
    assert scores[0].positive_probability > scores[1].positive_probability


def test_score_prompts_counts_unmatched(endpoint) -> None:
    texts = iter(["Yes", "It depends.", "no!", "who knows"])
    lock = threading.Lock()

    def respond(record: dict) -> tuple[int, object]:
        with lock:
            return 200, {"text": next(texts)}

    endpoint.responder = respond
    prompts = [
        Prompt(f"f is {i}.", PROMPT.question, PROMPT.answer_choices) for i in range(4)
    ]
    config = remote_config(endpoint, max_in_flight=1)
    scores, unmatched = score_prompts(prompts, config)
    assert unmatched == 2
    assert [s.positive_probability for s in scores] == [1.0, 0.5, 0.0, 0.5]


def test_score_prompts_bounded_concurrency(endpoint) -> None:
    endpoint.responder = lambda record: (200, {"scores": [0.4, 0.6]})
    endpoint.delay = 0.05
    prompts = [
        Prompt(f"f is {i}.", PROMPT.question, PROMPT.answer_choices) for i in range(8)
    ]
    scores, unmatched = score_prompts(prompts, remote_config(endpoint, max_in_flight=3))
    assert unmatched == 0
    assert len(scores) == 8
    assert all(s.positive_probability == 0.6 for s in scores)
    assert endpoint.max_active <= 3


def test_score_prompts_serial_when_limited_to_one(endpoint) -> None:
    endpoint.responder = lambda record: (200, {"scores": [0.4, 0.6]})
    endpoint.delay = 0.02
    prompts = [
        Prompt(f"f is {i}.", PROMPT.question, PROMPT.answer_choices) for i in range(5)
    ]
    score_prompts(prompts, remote_config(endpoint, max_in_flight=1))
    assert endpoint.max_active == 1


def test_score_prompts_misaligned_indices_rejected() -> None:
    config = PredictorConfig(kind="mock", mock_weights={})
    with pytest.raises(ValidationError, match="row_indices"):
        score_prompts([PROMPT], config, row_indices=[1, 2])


def test_score_prompts_error_carries_row_index(endpoint) -> None:
    endpoint.responder = lambda record: (404, {})
    with pytest.raises(PredictionError) as err:
        score_prompts([PROMPT], remote_config(endpoint), row_indices=[41])
    assert err.value.reason == "http_error"
    assert "row 41" in str(err.value)
