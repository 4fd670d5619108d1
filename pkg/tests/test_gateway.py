from __future__ import annotations

import json

import httpx
import pytest

from narravo.gateway import (
    BackendConfig,
    FixtureMissError,
    FixtureStore,
    GenerationFormatError,
    GenerationRequest,
    PromptStrategy,
    TransportFailure,
    build_prompt,
    fixture_key,
    generate_script,
    record_fixture,
    template_hash,
)
from narravo.script import serialize_script


@pytest.fixture()
def requests_by_strategy(office_scene):
    return {
        strategy: GenerationRequest(office_scene, strategy, max_fragments=13)
        for strategy in PromptStrategy
    }


def test_prompt_is_deterministic(requests_by_strategy):
    request = requests_by_strategy[PromptStrategy.S2_METAPHORICAL]
    assert build_prompt(request) == build_prompt(request)


def test_s2_carries_metaphors_s1_does_not(requests_by_strategy):
    s1 = build_prompt(requests_by_strategy[PromptStrategy.S1_CONVENTIONAL])
    s2 = build_prompt(requests_by_strategy[PromptStrategy.S2_METAPHORICAL])
    assert "portal to repressed memories" in s2
    assert "portal to repressed memories" not in s1
    assert "metaphor" in s2.split("Answer with")[0].lower()


def test_s3_prompt_enumerates_no_object_names(office_scene, requests_by_strategy):
    s3 = build_prompt(requests_by_strategy[PromptStrategy.S3_DIRECT])
    instructions = s3.split("Answer with")[0]
    for obj in office_scene.objects:
        assert obj.name not in instructions
    assert str(len(office_scene.objects)) in s3


def test_s1_s2_differ_only_in_metaphor_blocks(requests_by_strategy):
    s1 = build_prompt(requests_by_strategy[PromptStrategy.S1_CONVENTIONAL]).splitlines()
    s2 = build_prompt(requests_by_strategy[PromptStrategy.S2_METAPHORICAL]).splitlines()
    differing = [
        (a, b) for a, b in zip(s1, s2) if a != b
    ]
    for a, b in differing:
        assert "symbol" in b or "metaphor" in b


def test_all_strategies_demand_interchange_format(requests_by_strategy):
    for request in requests_by_strategy.values():
        prompt = build_prompt(request)
        for token in ('"object"', '"mainstory"', '"fragments"', "triggerCondition"):
            assert token in prompt


def test_seed_changes_prompt_and_key(office_scene):
    plain = GenerationRequest(office_scene, PromptStrategy.S1_CONVENTIONAL)
    seeded = GenerationRequest(office_scene, PromptStrategy.S1_CONVENTIONAL, seed="v2")
    assert build_prompt(plain) != build_prompt(seeded)
    assert fixture_key(build_prompt(plain), "m") != fixture_key(build_prompt(seeded), "m")


def test_template_hash_is_stable():
    assert template_hash() == template_hash()
    assert len(template_hash()) == 16


# --- fixtures


def test_record_then_replay_round_trip(tmp_path, office_scene, golden_script):
    request = GenerationRequest(office_scene, PromptStrategy.S2_METAPHORICAL)
    response = serialize_script(golden_script)
    key = record_fixture(request, response, tmp_path, elapsed_s=4.7)
    result = generate_script(request, BackendConfig.replay(tmp_path))
    assert result.raw_response == response
    assert result.script == golden_script
    assert result.elapsed_s == 4.7
    assert result.fixture_key == key


def test_distinct_prompts_get_distinct_keys(tmp_path, office_scene, golden_script):
    response = serialize_script(golden_script)
    keys = {
        record_fixture(
            GenerationRequest(office_scene, strategy), response, tmp_path
        )
        for strategy in PromptStrategy
    }
    assert len(keys) == 3


def test_rerecording_is_idempotent(tmp_path, office_scene):
    request = GenerationRequest(office_scene, PromptStrategy.S1_CONVENTIONAL)
    first = record_fixture(request, "{}", tmp_path)
    second = record_fixture(request, "{}", tmp_path)
    assert first == second
    assert len(list(tmp_path.glob("*.json"))) == 1


def test_fixture_fields(tmp_path, office_scene):
    request = GenerationRequest(office_scene, PromptStrategy.S1_CONVENTIONAL)
    key = record_fixture(request, "{}", tmp_path, elapsed_s=1.25)
    doc = json.loads((tmp_path / f"{key}.json").read_text())
    assert set(doc) == {"key", "request_digest", "model", "prompt", "response", "elapsed_s"}
    assert doc["key"] == key
    assert doc["request_digest"].startswith(key)


def test_replay_miss_names_key(tmp_path, office_scene):
    request = GenerationRequest(office_scene, PromptStrategy.S1_CONVENTIONAL)
    expected_key = fixture_key(build_prompt(request), "replay")
    with pytest.raises(FixtureMissError, match=expected_key):
        generate_script(request, BackendConfig.replay(tmp_path))


def test_malformed_fixture_reports_raw(tmp_path, office_scene):
    request = GenerationRequest(office_scene, PromptStrategy.S1_CONVENTIONAL)
    record_fixture(request, "this is not json at all", tmp_path)
    with pytest.raises(GenerationFormatError) as err:
        generate_script(request, BackendConfig.replay(tmp_path))
    assert err.value.raw_response == "this is not json at all"


# --- live transport (mocked)


def _live_backend():
    return BackendConfig.live(endpoint="https://vlm.test/v1/chat", model="gpt-4o")


def _client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def _envelope(content: str) -> dict:
    return {"choices": [{"message": {"content": content}}]}


def test_live_call_parses_openai_envelope(office_scene, golden_script):
    request = GenerationRequest(office_scene, PromptStrategy.S2_METAPHORICAL)
    calls = []

    def handler(http_request):
        calls.append(json.loads(http_request.content))
        return httpx.Response(200, json=_envelope(serialize_script(golden_script)))

    result = generate_script(request, _live_backend(), client=_client(handler),
                             retry_backoff_s=0.0)
    assert result.script == golden_script
    assert not result.repaired
    assert calls[0]["model"] == "gpt-4o"
    assert calls[0]["temperature"] == 0.0
    assert calls[0]["messages"][0]["role"] == "user"


def test_live_repair_reprompt_once(office_scene, golden_script):
    request = GenerationRequest(office_scene, PromptStrategy.S1_CONVENTIONAL)
    responses = iter(
        [
            _envelope("sorry, here is prose instead of JSON"),
            _envelope("```json\n" + serialize_script(golden_script) + "```"),
        ]
    )
    prompts = []

    def handler(http_request):
        prompts.append(json.loads(http_request.content)["messages"][0]["content"])
        return httpx.Response(200, json=next(responses))

    result = generate_script(request, _live_backend(), client=_client(handler),
                             retry_backoff_s=0.0)
    assert result.repaired
    assert result.script == golden_script
    assert len(prompts) == 2
    assert "could not be used" in prompts[1]


def test_live_unparseable_after_repair_fails(office_scene):
    request = GenerationRequest(office_scene, PromptStrategy.S1_CONVENTIONAL)

    def handler(http_request):
        return httpx.Response(200, json=_envelope("still not a script"))

    with pytest.raises(GenerationFormatError, match="after repair") as err:
        generate_script(request, _live_backend(), client=_client(handler),
                        retry_backoff_s=0.0)
    assert err.value.elapsed_s > 0.0  # timing recorded even for failures


def test_live_retries_transient_500(office_scene, golden_script):
    request = GenerationRequest(office_scene, PromptStrategy.S1_CONVENTIONAL)
    statuses = iter([500, 502])

    def handler(http_request):
        status = next(statuses, 200)
        if status != 200:
            return httpx.Response(status, text="upstream hiccup")
        return httpx.Response(200, json=_envelope(serialize_script(golden_script)))

    result = generate_script(request, _live_backend(), client=_client(handler),
                             retry_backoff_s=0.0)
    assert result.script == golden_script


def test_live_gives_up_after_retries(office_scene):
    request = GenerationRequest(office_scene, PromptStrategy.S1_CONVENTIONAL)
    count = {"n": 0}

    def handler(http_request):
        count["n"] += 1
        raise httpx.ConnectError("refused")

    with pytest.raises(TransportFailure, match="3 attempts"):
        generate_script(request, _live_backend(), client=_client(handler),
                        retry_backoff_s=0.0)
    assert count["n"] == 3


def test_live_client_error_is_fatal(office_scene):
    request = GenerationRequest(office_scene, PromptStrategy.S1_CONVENTIONAL)
    count = {"n": 0}

    def handler(http_request):
        count["n"] += 1
        return httpx.Response(401, text="bad key")

    with pytest.raises(TransportFailure, match="401"):
        generate_script(request, _live_backend(), client=_client(handler),
                        retry_backoff_s=0.0)
    assert count["n"] == 1


def test_live_without_endpoint_fails(office_scene, monkeypatch):
    monkeypatch.delenv("NARRAVO_VLM_URL", raising=False)
    request = GenerationRequest(office_scene, PromptStrategy.S1_CONVENTIONAL)
    with pytest.raises(TransportFailure, match="NARRAVO_VLM_URL"):
        generate_script(request, BackendConfig.live(), retry_backoff_s=0.0)


def test_bearer_key_from_environment(office_scene, golden_script, monkeypatch):
    monkeypatch.setenv("NARRAVO_VLM_KEY", "sk-test-123")
    request = GenerationRequest(office_scene, PromptStrategy.S1_CONVENTIONAL)
    seen = {}

    def handler(http_request):
        seen["auth"] = http_request.headers.get("authorization")
        return httpx.Response(200, json=_envelope(serialize_script(golden_script)))

    generate_script(request, _live_backend(), client=_client(handler),
                    retry_backoff_s=0.0)
    assert seen["auth"] == "Bearer sk-test-123"


def test_fixture_store_load_matches_record(tmp_path):
    store = FixtureStore(tmp_path)
    store.record("prompt text", "model-x", "the response", 2.5)
    assert store.load("prompt text", "model-x") == ("the response", 2.5)
