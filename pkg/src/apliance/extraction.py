"""Policy-text to base-attribute extraction.

Two extractors share one contract: the remote client sends a single
chat-completions request built from the prompt template below, and the
fixture extractor replays stored responses keyed by policy hash, letting
every pipeline above it run deterministically without a network.

Whatever the model returns, the parsed result always carries exactly one
inference per base attribute: unexpected attribute names are dropped,
out-of-domain values are coerced to the `unknown` sentinel, and gaps are
filled with `unknown`, each with a warning for the audit trail.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

from .schema import Assignment, Schema

UNKNOWN = "unknown"
API_KEY_ENV = "APLIANCE_API_KEY"


class ExtractionError(Exception):
    pass


class EmptyPolicyError(ExtractionError):
    pass


class CredentialError(ExtractionError):
    pass


class TransportError(ExtractionError):
    pass


class UnparseableResponseError(ExtractionError):
    pass


class FixtureMissError(ExtractionError):
    pass


@dataclass(frozen=True)
class AttributeInference:
    attribute_name: str
    inferred_value: str  # domain value or "unknown"
    justification: str = ""


@dataclass(frozen=True)
class ExtractionResult:
    inferences: tuple[AttributeInference, ...]
    warnings: tuple[str, ...]
    raw_response: str

    def to_assignment(self) -> Assignment:
        """Bindings for every attribute with a concrete (non-unknown) value."""
        return Assignment({
            inf.attribute_name: inf.inferred_value
            for inf in self.inferences
            if inf.inferred_value != UNKNOWN
        })

    def values(self) -> dict[str, str]:
        return {inf.attribute_name: inf.inferred_value for inf in self.inferences}


@dataclass(frozen=True)
class ExtractorConfig:
    endpoint: str
    model: str = "gpt-5.4-mini"  # opaque configuration, never validated
    timeout_s: float = 60.0
    max_retries: int = 2
    max_in_flight: int = 4


# ---------------------------------------------------------------------------
# Prompt construction
# ---------------------------------------------------------------------------

PROMPT_TEMPLATE = """Role:
You are an expert in Privacy Law (specifically the Digital Personal Data Protection Act of India) and in Attribute-Based Access Control (ABAC) systems.

Task Overview:
Analyze a given privacy policy and infer the values of predefined attributes used in an Attribute-based Model.

Input:
1. Privacy Policy
A block of text containing the privacy policy of a company.
2. Attribute Definitions (JSON)
A JSON array where each element contains:
 - attribute_name
 - values
 - description

Instructions:
1. Carefully read the privacy policy.
2. Determine whether the policy explicitly or implicitly provides information related to each attribute.
3. If explicitly stated, assign the corresponding value.
4. If logically inferable, assign the inferred value.
5. Strictly choose values only from the provided possible_values.

Output Format:
A JSON array where each element contains:
 - attribute_name
 - inferred_value
 - justification

Constraints:
 - Do NOT introduce new attributes.
 - Do NOT invent attribute values not listed in possible_values.

Privacy Policy:
<PRIVACY_POLICY_TEXT>

Attribute Definitions:
<ATTRIBUTE_JSON>
"""


def attribute_definitions_json(schema: Schema) -> str:
    """Base attributes as the structured array the prompt embeds."""
    from .dpdp import ATTRIBUTE_DESCRIPTIONS

    entries = [
        {
            "attribute_name": attr.name,
            "values": list(attr.domain) + [UNKNOWN],
            "description": ATTRIBUTE_DESCRIPTIONS.get(attr.name, attr.name),
        }
        for attr in schema.base
    ]
    return json.dumps(entries, indent=2, ensure_ascii=False)


def build_prompt(schema: Schema, policy_text: str) -> str:
    """Render the extraction prompt; byte-stable for identical inputs."""
    normalized = policy_text.strip()
    if not normalized:
        raise EmptyPolicyError("policy text is empty")
    if not schema.base:
        raise ExtractionError("schema has no base attributes to extract")
    prompt = PROMPT_TEMPLATE.replace("<PRIVACY_POLICY_TEXT>", normalized)
    return prompt.replace("<ATTRIBUTE_JSON>", attribute_definitions_json(schema))


# ---------------------------------------------------------------------------
# Response parsing
# ---------------------------------------------------------------------------

_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _locate_payload(text: str):
    """Find the first JSON array in the response, fenced or bare."""
    candidates = [m.strip() for m in _FENCE_RE.findall(text)]
    candidates.append(text.strip())
    for candidate in candidates:
        start = candidate.find("[")
        if start < 0:
            continue
        decoder = json.JSONDecoder()
        try:
            payload, _ = decoder.raw_decode(candidate[start:])
        except json.JSONDecodeError:
            continue
        if isinstance(payload, list):
            return payload
    return None


def parse_response(schema: Schema, response_text: str) -> ExtractionResult:
    """Parse a model response into one inference per base attribute.

    Tolerates fenced payloads, unknown names (dropped), out-of-domain
    values (coerced to unknown), duplicates (last wins), and missing
    attributes (filled with unknown); every repair adds a warning.
    """
    payload = _locate_payload(response_text)
    if payload is None:
        raise UnparseableResponseError("no JSON array found in response")

    base_attrs = {attr.name: attr for attr in schema.base}
    warnings: list[str] = []
    collected: dict[str, AttributeInference] = {}

    for item in payload:
        if not isinstance(item, dict):
            warnings.append(f"skipped non-object entry: {item!r}")
            continue
        name = str(item.get("attribute_name", "")).strip()
        attr = base_attrs.get(name)
        if attr is None:
            warnings.append(f"dropped inference for unknown attribute {name!r}")
            continue
        value = str(item.get("inferred_value", UNKNOWN)).strip().lower()
        if value != UNKNOWN and value not in attr.domain:
            warnings.append(
                f"{name}: value {value!r} outside domain, coerced to unknown"
            )
            value = UNKNOWN
        if name in collected:
            warnings.append(f"{name}: duplicate inference, keeping the last")
        collected[name] = AttributeInference(
            name, value, str(item.get("justification", ""))
        )

    inferences = []
    for attr in schema.base:
        if attr.name in collected:
            inferences.append(collected[attr.name])
        else:
            warnings.append(f"{attr.name}: missing from response, set to unknown")
            inferences.append(AttributeInference(attr.name, UNKNOWN, ""))

    return ExtractionResult(tuple(inferences), tuple(warnings), response_text)


# ---------------------------------------------------------------------------
# Extractors
# ---------------------------------------------------------------------------

def policy_hash(policy_text: str) -> str:
    return hashlib.sha256(policy_text.encode("utf-8")).hexdigest()


@dataclass
class FixtureExtractor:
    """Replays stored response payloads; no network.

    `path` is either a single response file (used for every call) or a
    directory searched as `<sha256-of-text>.json`, then `<policy_id>.json`,
    then `default.json`.
    """

    path: str
    policy_id: str | None = None

    def extract(self, schema: Schema, policy_text: str) -> ExtractionResult:
        root = Path(self.path)
        if root.is_file():
            return parse_response(schema, root.read_text("utf-8"))
        if root.is_dir():
            names = [policy_hash(policy_text) + ".json"]
            if self.policy_id:
                names.append(self.policy_id + ".json")
            names.append("default.json")
            for name in names:
                candidate = root / name
                if candidate.is_file():
                    return parse_response(schema, candidate.read_text("utf-8"))
            raise FixtureMissError(f"no fixture for this policy under {self.path}")
        raise FixtureMissError(f"fixture path {self.path} does not exist")


@dataclass
class RemoteExtractor:
    """Chat-completions client: one request per policy, retried on
    transient transport failures with exponential backoff."""

    config: ExtractorConfig
    post_fn: object = None  # injectable for tests; defaults to requests.post
    sleep_fn: object = field(default=time.sleep, repr=False)
    _gate: object = field(default=None, repr=False, init=False)

    def __post_init__(self):
        import threading

        self._gate = threading.Semaphore(self.config.max_in_flight)

    def extract(self, schema: Schema, policy_text: str) -> ExtractionResult:
        api_key = os.environ.get(API_KEY_ENV, "")
        if not api_key:
            raise CredentialError(f"environment variable {API_KEY_ENV} is not set")
        prompt = build_prompt(schema, policy_text)
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        }
        headers = {
            "Authorization": f"Bearer {api_key}",
            "Content-Type": "application/json",
        }
        content = self._request(body, headers)
        return parse_response(schema, content)

    def _request(self, body: dict, headers: dict) -> str:
        post = self.post_fn
        if post is None:
            import requests

            post = requests.post
        last_error: Exception | None = None
        with self._gate:
            for attempt in range(self.config.max_retries + 1):
                if attempt:
                    self.sleep_fn(0.5 * 2 ** (attempt - 1))
                try:
                    response = post(
                        self.config.endpoint,
                        json=body,
                        headers=headers,
                        timeout=self.config.timeout_s,
                    )
                except Exception as exc:  # transport-level failure, retry
                    last_error = exc
                    continue
                status = getattr(response, "status_code", 200)
                if status >= 500:
                    last_error = TransportError(f"server returned {status}")
                    continue
                if status >= 400:
                    raise TransportError(f"request rejected with {status}")
                try:
                    payload = response.json()
                    return payload["choices"][0]["message"]["content"]
                except Exception as exc:
                    raise UnparseableResponseError(
                        f"malformed completion envelope: {exc}"
                    ) from exc
        raise TransportError(f"request failed after retries: {last_error}")


def extract(extractor, schema: Schema, policy_text: str) -> ExtractionResult:
    """Run an extractor (remote or fixture) over policy text."""
    return extractor.extract(schema, policy_text)
