"""Attribute universe: definitions, schemas, and assignment validation.

A schema declares every attribute the rule language may mention: which
entity it belongs to, whether it is read from policy text (base), computed
by derivation rules (derived), or a runtime fact (unknown), plus its finite
value domain and, for derived attributes, the default it takes when no rule
fires. Assignments are partial maps from attribute names to domain values;
an unbound base or unknown attribute means "unknown".

Schema files are line oriented::

    # comment
    action data_processing
    attr lawful_purpose environment base {true,false}
    attr consent_status principal_subject derived {not_given,active,withdrawn} default=not_given

Schemas and assignments are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources

ENTITY_KINDS = ("fiduciary_subject", "principal_subject", "object", "environment")
ATTRIBUTE_KINDS = ("base", "derived", "unknown")

_NAME_RE = re.compile(r"^[a-z][a-z0-9_.]*$")


class SchemaError(Exception):
    """Invalid schema content (duplicate names, bad domains, bad defaults)."""


class SchemaParseError(SchemaError):
    """Schema file could not be parsed; carries the offending line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class AttributeDefinition:
    """One attribute: its owner entity, kind, value domain, and default."""

    name: str
    entity: str
    kind: str
    domain: tuple[str, ...]
    default: str | None = None

    def __post_init__(self):
        if not _NAME_RE.match(self.name):
            raise SchemaError(f"invalid attribute name {self.name!r}")
        if self.entity not in ENTITY_KINDS:
            raise SchemaError(f"{self.name}: unknown entity {self.entity!r}")
        if self.kind not in ATTRIBUTE_KINDS:
            raise SchemaError(f"{self.name}: unknown kind {self.kind!r}")
        if not self.domain:
            raise SchemaError(f"{self.name}: empty domain")
        if len(set(self.domain)) != len(self.domain):
            raise SchemaError(f"{self.name}: duplicate domain values")
        if self.kind == "derived":
            if self.default is None:
                raise SchemaError(f"{self.name}: derived attribute needs a default")
            if self.default not in self.domain:
                raise SchemaError(
                    f"{self.name}: default {self.default!r} outside domain"
                )
        elif self.default is not None:
            raise SchemaError(f"{self.name}: only derived attributes carry a default")


@dataclass(frozen=True)
class Schema:
    """Ordered attribute definitions plus the declared action names."""

    attributes: tuple[AttributeDefinition, ...]
    actions: tuple[str, ...] = ()
    _by_name: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        by_name: dict[str, AttributeDefinition] = {}
        for attr in self.attributes:
            if attr.name in by_name:
                raise SchemaError(f"duplicate attribute {attr.name!r}")
            by_name[attr.name] = attr
        if len(set(self.actions)) != len(self.actions):
            raise SchemaError("duplicate action name")
        object.__setattr__(self, "_by_name", by_name)

    def get(self, name: str) -> AttributeDefinition | None:
        return self._by_name.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def of_kind(self, kind: str) -> tuple[AttributeDefinition, ...]:
        return tuple(a for a in self.attributes if a.kind == kind)

    @property
    def base(self) -> tuple[AttributeDefinition, ...]:
        return self.of_kind("base")

    @property
    def derived(self) -> tuple[AttributeDefinition, ...]:
        return self.of_kind("derived")

    @property
    def unknown(self) -> tuple[AttributeDefinition, ...]:
        return self.of_kind("unknown")


@dataclass(frozen=True)
class Assignment:
    """Partial attribute valuation; unbound base/unknown means "unknown"."""

    bindings: dict[str, str]

    def get(self, name: str) -> str | None:
        return self.bindings.get(name)

    def bound(self, name: str) -> bool:
        return name in self.bindings

    def merged(self, other: "Assignment") -> "Assignment":
        combined = dict(self.bindings)
        combined.update(other.bindings)
        return Assignment(combined)

    def __eq__(self, other):
        return isinstance(other, Assignment) and self.bindings == other.bindings


@dataclass(frozen=True)
class ValidationFinding:
    """One problem with an assignment; `code` is machine-matchable."""

    code: str  # unknown_attribute | out_of_domain | derived_bound
    attribute: str
    message: str


# ---------------------------------------------------------------------------
# Schema file format
# ---------------------------------------------------------------------------

_DOMAIN_RE = re.compile(r"^\{([^{}]*)\}$")


def load_schema(text: str) -> Schema:
    """Parse schema-file contents, preserving attribute order."""
    attributes: list[AttributeDefinition] = []
    actions: list[str] = []
    seen_attrs: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "action":
            if len(fields) != 2:
                raise SchemaParseError(lineno, "expected: action <name>")
            if fields[1] in actions:
                raise SchemaParseError(lineno, f"duplicate action {fields[1]!r}")
            actions.append(fields[1])
        elif fields[0] == "attr":
            if len(fields) not in (5, 6):
                raise SchemaParseError(
                    lineno, "expected: attr <name> <entity> <kind> {v1,v2,...} [default=<v>]"
                )
            name, entity, kind, domain_text = fields[1], fields[2], fields[3], fields[4]
            match = _DOMAIN_RE.match(domain_text)
            if not match:
                raise SchemaParseError(lineno, f"malformed domain {domain_text!r}")
            domain = tuple(v.strip() for v in match.group(1).split(",") if v.strip())
            default = None
            if len(fields) == 6:
                if not fields[5].startswith("default="):
                    raise SchemaParseError(lineno, f"unexpected token {fields[5]!r}")
                default = fields[5][len("default="):]
            if name in seen_attrs:
                raise SchemaParseError(lineno, f"duplicate attribute {name!r}")
            seen_attrs.add(name)
            try:
                attributes.append(
                    AttributeDefinition(name, entity, kind, domain, default)
                )
            except SchemaError as exc:
                raise SchemaParseError(lineno, str(exc)) from exc
        else:
            raise SchemaParseError(lineno, f"unknown directive {fields[0]!r}")
    return Schema(tuple(attributes), tuple(actions))


def serialize_schema(schema: Schema) -> str:
    """Render a schema back to the file format; inverse of load_schema."""
    lines = []
    for action in schema.actions:
        lines.append(f"action {action}")
    for attr in schema.attributes:
        domain = "{" + ",".join(attr.domain) + "}"
        line = f"attr {attr.name} {attr.entity} {attr.kind} {domain}"
        if attr.default is not None:
            line += f" default={attr.default}"
        lines.append(line)
    return "\n".join(lines) + ("\n" if lines else "")


def validate_assignment(schema: Schema, assignment: Assignment) -> list[ValidationFinding]:
    """Check every binding; returns [] iff the assignment is well formed.

    Never raises: unknown names, out-of-domain values, and bindings to
    derived attributes each produce one finding.
    """
    findings: list[ValidationFinding] = []
    for name, value in assignment.bindings.items():
        attr = schema.get(name)
        if attr is None:
            findings.append(
                ValidationFinding("unknown_attribute", name, f"attribute {name!r} not in schema")
            )
            continue
        if attr.kind == "derived":
            findings.append(
                ValidationFinding(
                    "derived_bound", name, f"derived attribute {name!r} may not be bound"
                )
            )
            continue
        if value not in attr.domain:
            findings.append(
                ValidationFinding(
                    "out_of_domain", name, f"{name!r}: value {value!r} not in domain"
                )
            )
    return findings


# ---------------------------------------------------------------------------
# Built-in DPDP Act schema
# ---------------------------------------------------------------------------

def dpdp_schema() -> Schema:
    """The built-in DPDP Act schema: 16 base, 8 derived, 6 unknown attributes."""
    return load_schema(dpdp_schema_text())


def dpdp_schema_text() -> str:
    return resources.files("apliance.data").joinpath("dpdp.schema").read_text("utf-8")
