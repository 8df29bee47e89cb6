import json

import pytest

from apliance.extraction import (
    AttributeInference,
    CredentialError,
    EmptyPolicyError,
    ExtractionError,
    ExtractorConfig,
    FixtureExtractor,
    FixtureMissError,
    RemoteExtractor,
    TransportError,
    UnparseableResponseError,
    build_prompt,
    extract,
    parse_response,
    policy_hash,
)
from apliance.schema import Schema

SAMPLE_POLICY = "We collect your email address to provide our services in India."


def response_for(schema, values):
    payload = [
        {"attribute_name": name, "inferred_value": value, "justification": "stated"}
        for name, value in values.items()
    ]
    return json.dumps(payload)


def full_response(schema, **overrides):
    values = {a.name: "true" for a in schema.base}
    values["purpose_of_processing"] = "other"
    values.update(overrides)
    return response_for(schema, values)


class TestBuildPrompt:
    def test_contains_all_base_definitions_and_policy_once(self, dpdp):
        schema, _ = dpdp
        prompt = build_prompt(schema, SAMPLE_POLICY)
        for attr in schema.base:
            assert f'"attribute_name": "{attr.name}"' in prompt
        assert prompt.count(SAMPLE_POLICY) == 1
        assert "Do NOT introduce new attributes." in prompt
        assert "Do NOT invent attribute values not listed in possible_values." in prompt

    def test_deterministic(self, dpdp):
        schema, _ = dpdp
        assert build_prompt(schema, SAMPLE_POLICY) == build_prompt(schema, SAMPLE_POLICY)

    def test_empty_policy_rejected(self, dpdp):
        schema, _ = dpdp
        with pytest.raises(EmptyPolicyError):
            build_prompt(schema, "   \n\t ")

    def test_schema_without_base_attributes_rejected(self):
        with pytest.raises(ExtractionError):
            build_prompt(Schema((), ("act",)), SAMPLE_POLICY)

    def test_matches_committed_golden_snapshot(self, dpdp, golden_dir):
        schema, _ = dpdp
        policy = (golden_dir / "sample_policy.txt").read_text("utf-8")
        expected = (golden_dir / "dpdp_prompt.txt").read_bytes()
        assert build_prompt(schema, policy).encode("utf-8") == expected


class TestParseResponse:
    def test_well_formed_full_response(self, dpdp):
        schema, _ = dpdp
        result = parse_response(schema, full_response(schema))
        assert len(result.inferences) == 16
        assert result.warnings == ()
        assert [i.attribute_name for i in result.inferences] == [
            a.name for a in schema.base
        ]

    def test_derived_attribute_dropped_with_warning(self, dpdp):
        schema, _ = dpdp
        payload = json.loads(full_response(schema))
        payload.append({"attribute_name": "consent_status", "inferred_value": "active"})
        result = parse_response(schema, json.dumps(payload))
        assert len(result.inferences) == 16
        assert any("consent_status" in w for w in result.warnings)

    def test_out_of_domain_value_coerced_to_unknown(self, dpdp):
        schema, _ = dpdp
        result = parse_response(schema, full_response(schema, lawful_purpose="probably"))
        values = result.values()
        assert values["lawful_purpose"] == "unknown"
        assert any("probably" in w for w in result.warnings)

    def test_duplicate_keeps_last(self, dpdp):
        schema, _ = dpdp
        payload = json.loads(full_response(schema, consent_is_informed="false"))
        payload.append({"attribute_name": "consent_is_informed", "inferred_value": "true"})
        result = parse_response(schema, json.dumps(payload))
        assert result.values()["consent_is_informed"] == "true"
        assert any("duplicate" in w for w in result.warnings)

    def test_missing_attributes_filled_with_unknown(self, dpdp):
        schema, _ = dpdp
        payload = [
            {"attribute_name": "lawful_purpose", "inferred_value": "true"},
        ]
        result = parse_response(schema, json.dumps(payload))
        assert len(result.inferences) == 16
        values = result.values()
        assert values["lawful_purpose"] == "true"
        assert values["consent_is_informed"] == "unknown"
        assert len(result.warnings) == 15

    def test_fenced_payload_accepted(self, dpdp):
        schema, _ = dpdp
        fenced = "Here are the results:\n```json\n" + full_response(schema) + "\n```\n"
        result = parse_response(schema, fenced)
        assert result.warnings == ()

    def test_unparseable_response_rejected(self, dpdp):
        schema, _ = dpdp
        with pytest.raises(UnparseableResponseError):
            parse_response(schema, "I could not analyze this policy.")

    def test_values_normalized_to_lowercase(self, dpdp):
        schema, _ = dpdp
        result = parse_response(schema, full_response(schema, lawful_purpose="True"))
        assert result.values()["lawful_purpose"] == "true"

    def test_to_assignment_skips_unknown(self, dpdp):
        schema, _ = dpdp
        result = parse_response(schema, full_response(schema, lawful_purpose="unknown"))
        assignment = result.to_assignment()
        assert not assignment.bound("lawful_purpose")
        assert assignment.get("consent_is_informed") == "true"

    def test_recorded_transcript_replays_to_golden(self, dpdp, fixtures_dir):
        schema, _ = dpdp
        raw = (fixtures_dir / "transcript_raw.txt").read_text("utf-8")
        golden = json.loads((fixtures_dir / "transcript_golden.json").read_text("utf-8"))
        result = parse_response(schema, raw)
        assert result.values() == golden["values"]
        assert list(result.warnings) == golden["warnings"]


class TestFixtureExtractor:
    def test_lookup_by_policy_hash(self, dpdp, tmp_path):
        schema, _ = dpdp
        key = policy_hash(SAMPLE_POLICY)
        (tmp_path / f"{key}.json").write_text(full_response(schema))
        result = extract(FixtureExtractor(str(tmp_path)), schema, SAMPLE_POLICY)
        assert result.values()["lawful_purpose"] == "true"

    def test_lookup_by_policy_id_then_default(self, dpdp, tmp_path):
        schema, _ = dpdp
        (tmp_path / "mypolicy.json").write_text(full_response(schema, lawful_purpose="false"))
        (tmp_path / "default.json").write_text(full_response(schema))
        by_id = extract(FixtureExtractor(str(tmp_path), policy_id="mypolicy"), schema, "other text")
        assert by_id.values()["lawful_purpose"] == "false"
        by_default = extract(FixtureExtractor(str(tmp_path)), schema, "other text")
        assert by_default.values()["lawful_purpose"] == "true"

    def test_single_file_fixture(self, dpdp, tmp_path):
        schema, _ = dpdp
        path = tmp_path / "resp.json"
        path.write_text(full_response(schema))
        result = extract(FixtureExtractor(str(path)), schema, "anything")
        assert len(result.inferences) == 16

    def test_miss_raises(self, dpdp, tmp_path):
        schema, _ = dpdp
        with pytest.raises(FixtureMissError):
            extract(FixtureExtractor(str(tmp_path)), schema, SAMPLE_POLICY)


class FakeResponse:
    def __init__(self, status_code=200, content=""):
        self.status_code = status_code
        self._content = content

    def json(self):
        return {"choices": [{"message": {"content": self._content}}]}


class TestRemoteExtractor:
    def config(self):
        return ExtractorConfig(endpoint="https://example.invalid/v1/chat", max_retries=2)

    def test_missing_credential_fails_before_network(self, dpdp, monkeypatch):
        schema, _ = dpdp
        monkeypatch.delenv("APLIANCE_API_KEY", raising=False)
        calls = []
        extractor = RemoteExtractor(self.config(), post_fn=lambda *a, **k: calls.append(1))
        with pytest.raises(CredentialError):
            extract(extractor, schema, SAMPLE_POLICY)
        assert calls == []

    def test_happy_path(self, dpdp, monkeypatch):
        schema, _ = dpdp
        monkeypatch.setenv("APLIANCE_API_KEY", "secret")
        seen = {}

        def post(url, json=None, headers=None, timeout=None):
            seen["url"] = url
            seen["auth"] = headers["Authorization"]
            seen["model"] = json["model"]
            return FakeResponse(200, full_response(schema))

        extractor = RemoteExtractor(self.config(), post_fn=post)
        result = extract(extractor, schema, SAMPLE_POLICY)
        assert len(result.inferences) == 16
        assert seen["url"] == "https://example.invalid/v1/chat"
        assert seen["auth"] == "Bearer secret"
        assert seen["model"] == "gpt-5.4-mini"

    def test_retries_transient_failures_then_succeeds(self, dpdp, monkeypatch):
        schema, _ = dpdp
        monkeypatch.setenv("APLIANCE_API_KEY", "secret")
        attempts = []

        def post(url, **kwargs):
            attempts.append(1)
            if len(attempts) < 3:
                raise ConnectionError("transient")
            return FakeResponse(200, full_response(schema))

        naps = []
        extractor = RemoteExtractor(self.config(), post_fn=post, sleep_fn=naps.append)
        result = extract(extractor, schema, SAMPLE_POLICY)
        assert len(attempts) == 3
        assert naps == [0.5, 1.0]
        assert len(result.inferences) == 16

    def test_transport_error_after_retries(self, dpdp, monkeypatch):
        schema, _ = dpdp
        monkeypatch.setenv("APLIANCE_API_KEY", "secret")
        attempts = []

        def post(url, **kwargs):
            attempts.append(1)
            raise ConnectionError("down")

        extractor = RemoteExtractor(self.config(), post_fn=post, sleep_fn=lambda s: None)
        with pytest.raises(TransportError):
            extract(extractor, schema, SAMPLE_POLICY)
        assert len(attempts) == 3  # initial try + 2 retries

    def test_server_errors_retried_client_errors_not(self, dpdp, monkeypatch):
        schema, _ = dpdp
        monkeypatch.setenv("APLIANCE_API_KEY", "secret")
        server_attempts = []

        def post_5xx(url, **kwargs):
            server_attempts.append(1)
            return FakeResponse(503)

        extractor = RemoteExtractor(self.config(), post_fn=post_5xx, sleep_fn=lambda s: None)
        with pytest.raises(TransportError):
            extract(extractor, schema, SAMPLE_POLICY)
        assert len(server_attempts) == 3

        client_attempts = []

        def post_4xx(url, **kwargs):
            client_attempts.append(1)
            return FakeResponse(401)

        extractor = RemoteExtractor(self.config(), post_fn=post_4xx, sleep_fn=lambda s: None)
        with pytest.raises(TransportError):
            extract(extractor, schema, SAMPLE_POLICY)
        assert len(client_attempts) == 1


    def test_in_flight_limit_bounds_concurrency(self, dpdp, monkeypatch):
        import threading
        import time

        schema, _ = dpdp
        monkeypatch.setenv("APLIANCE_API_KEY", "secret")
        state = {"active": 0, "peak": 0}
        guard = threading.Lock()

        def post(url, **kwargs):
            with guard:
                state["active"] += 1
                state["peak"] = max(state["peak"], state["active"])
            time.sleep(0.02)
            with guard:
                state["active"] -= 1
            return FakeResponse(200, full_response(schema))

        config = ExtractorConfig(endpoint="https://example.invalid", max_in_flight=2)
        extractor = RemoteExtractor(config, post_fn=post)
        threads = [
            threading.Thread(target=lambda: extract(extractor, schema, SAMPLE_POLICY))
            for _ in range(6)
        ]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        assert state["peak"] <= 2


class TestInvariants:
    def test_output_always_complete_and_in_domain(self, dpdp):
        schema, _ = dpdp
        messy = json.dumps([
            {"attribute_name": "lawful_purpose", "inferred_value": "yes-ish"},
            {"attribute_name": "made_up", "inferred_value": "true"},
            {"attribute_name": "purpose_of_processing", "inferred_value": "other"},
            "garbage",
        ])
        result = parse_response(schema, messy)
        assert [i.attribute_name for i in result.inferences] == [a.name for a in schema.base]
        for inference in result.inferences:
            attr = schema.get(inference.attribute_name)
            assert inference.inferred_value == "unknown" or (
                inference.inferred_value in attr.domain
            )
