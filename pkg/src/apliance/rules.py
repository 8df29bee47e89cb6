"""Rule language: concrete syntax, parser, serializer, and static validation.

Grammar (``and`` binds tighter than ``or``)::

    pack   := rule+
    rule   := "rule" ID kind ":" "if" cond "then" effect
    kind   := "derive" | "decide"
    cond   := conj ("or" conj)*
    conj   := atom ("and" atom)*
    atom   := "(" cond ")" | "not" atom | "true"
            | ID "=" VALUE | ID "in" "{" VALUE ("," VALUE)* "}"
    effect := ID ":=" VALUE | "permit" ID

The bare ``true`` atom is what relaxation leaves behind when it blanks out
an attribute; accepting it in the grammar keeps relaxed packs serializable
and reparsable. ``#`` starts a comment. Packs are immutable after parsing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from .schema import Schema

# Accepted legacy spellings, normalized while resolving names against a schema.
ATTRIBUTE_ALIASES = {
    "consent_preconditions_fullfilled": "consent_preconditions_fulfilled",
}


class RuleError(Exception):
    """Base class for rule parsing and validation failures."""


class RuleParseError(RuleError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


class RuleValidationError(RuleError):
    pass


# ---------------------------------------------------------------------------
# Condition AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Eq:
    attribute: str
    value: str


@dataclass(frozen=True)
class In:
    attribute: str
    values: tuple[str, ...]


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


@dataclass(frozen=True)
class Not:
    child: object


@dataclass(frozen=True)
class TrueAtom:
    pass


Condition = Eq | In | And | Or | Not | TrueAtom


@dataclass(frozen=True)
class Rule:
    id: str
    kind: str  # derive | decide
    condition: Condition
    # derive: (attribute, value); decide: (action, None)
    effect: tuple[str, str | None]

    @property
    def target(self) -> str:
        return self.effect[0]


@dataclass(frozen=True)
class RulePack:
    rules: tuple[Rule, ...]
    name: str = ""

    def __post_init__(self):
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise RuleValidationError("duplicate rule id in pack")

    def derive_rules(self) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.kind == "derive")

    def decide_rules(self) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.kind == "decide")

    def get(self, rule_id: str) -> Rule | None:
        for rule in self.rules:
            if rule.id == rule_id:
                return rule
        return None


def condition_attributes(cond: Condition) -> set[str]:
    """Every attribute name mentioned anywhere in the condition."""
    if isinstance(cond, (Eq, In)):
        return {cond.attribute}
    if isinstance(cond, (And, Or)):
        names: set[str] = set()
        for child in cond.children:
            names |= condition_attributes(child)
        return names
    if isinstance(cond, Not):
        return condition_attributes(cond.child)
    return set()


def live_atom_count(cond: Condition) -> int:
    """Number of Eq/In atoms that survived relaxation."""
    if isinstance(cond, (Eq, In)):
        return 1
    if isinstance(cond, (And, Or)):
        return sum(live_atom_count(c) for c in cond.children)
    if isinstance(cond, Not):
        return live_atom_count(cond.child)
    return 0


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<assign>:=)
  | (?P<sym>[(){},=:])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"rule", "derive", "decide", "if", "then", "not", "and", "or", "in", "permit", "true"}


@dataclass
class _Token:
    kind: str  # ident | keyword | sym | assign | eof
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if not match:
            raise RuleParseError(line, col, f"unexpected character {text[pos]!r}")
        kind = match.lastgroup
        value = match.group()
        if kind == "newline":
            line += 1
            col = 1
        elif kind in ("ws", "comment"):
            col += len(value)
        elif kind == "ident":
            tok_kind = "keyword" if value in _KEYWORDS else "ident"
            tokens.append(_Token(tok_kind, value, line, col))
            col += len(value)
        else:
            tokens.append(_Token(kind, value, line, col))
            col += len(value)
        pos = match.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str):
        tok = self.peek()
        raise RuleParseError(tok.line, tok.col, message)

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text or tok.kind == "eof":
            self.fail(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return self.next()

    def name(self, what: str) -> str:
        # Keywords double as names/values where the grammar expects one
        # (e.g. the boolean value `true`).
        tok = self.peek()
        if tok.kind not in ("ident", "keyword"):
            self.fail(f"expected {what}, found {tok.text or 'end of input'!r}")
        return self.next().text

    def parse_pack(self, name: str) -> RulePack:
        rules = []
        while self.peek().text == "rule":
            rules.append(self.parse_rule())
        if self.peek().kind != "eof":
            self.fail("expected 'rule'")
        if not rules:
            self.fail("empty rule pack")
        try:
            return RulePack(tuple(rules), name)
        except RuleValidationError as exc:
            raise RuleParseError(1, 1, str(exc)) from exc

    def parse_rule(self) -> Rule:
        self.expect("rule")
        rule_id = self.name("rule id")
        kind_tok = self.peek()
        if kind_tok.text not in ("derive", "decide"):
            self.fail("expected 'derive' or 'decide'")
        kind = self.next().text
        self.expect(":")
        self.expect("if")
        cond = self.parse_cond()
        self.expect("then")
        if kind == "decide":
            self.expect("permit")
            action = self.name("action name")
            effect: tuple[str, str | None] = (action, None)
        else:
            attr = self.name("attribute name")
            self.expect(":=")
            value = self.name("value")
            effect = (attr, value)
        return Rule(rule_id, kind, cond, effect)

    def parse_cond(self) -> Condition:
        parts = [self.parse_conj()]
        while self.peek().text == "or":
            self.next()
            parts.append(self.parse_conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def parse_conj(self) -> Condition:
        parts = [self.parse_atom()]
        while self.peek().text == "and":
            self.next()
            parts.append(self.parse_atom())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def parse_atom(self) -> Condition:
        tok = self.peek()
        if tok.text == "(":
            self.next()
            cond = self.parse_cond()
            self.expect(")")
            return cond
        if tok.text == "not":
            self.next()
            return Not(self.parse_atom())
        if tok.text == "true":
            self.next()
            return TrueAtom()
        attr = self.name("attribute name")
        op = self.peek()
        if op.text == "=":
            self.next()
            return Eq(attr, self.name("value"))
        if op.text == "in":
            self.next()
            self.expect("{")
            values = [self.name("value")]
            while self.peek().text == ",":
                self.next()
                values.append(self.name("value"))
            self.expect("}")
            return In(attr, tuple(values))
        self.fail("expected '=' or 'in'")


# ---------------------------------------------------------------------------
# Static validation against a schema
# ---------------------------------------------------------------------------

def _resolve_name(name: str, schema: Schema) -> str:
    if name in schema:
        return name
    return ATTRIBUTE_ALIASES.get(name, name)


def _validate_condition(cond: Condition, schema: Schema, rule_id: str) -> Condition:
    """Resolve aliases and check attribute/value references; returns the
    normalized condition."""
    if isinstance(cond, Eq):
        name = _resolve_name(cond.attribute, schema)
        attr = schema.get(name)
        if attr is None:
            raise RuleValidationError(f"{rule_id}: unknown attribute {cond.attribute!r}")
        if cond.value not in attr.domain:
            raise RuleValidationError(
                f"{rule_id}: value {cond.value!r} not in domain of {name!r}"
            )
        return Eq(name, cond.value)
    if isinstance(cond, In):
        name = _resolve_name(cond.attribute, schema)
        attr = schema.get(name)
        if attr is None:
            raise RuleValidationError(f"{rule_id}: unknown attribute {cond.attribute!r}")
        for value in cond.values:
            if value not in attr.domain:
                raise RuleValidationError(
                    f"{rule_id}: value {value!r} not in domain of {name!r}"
                )
        return In(name, cond.values)
    if isinstance(cond, And):
        return And(tuple(_validate_condition(c, schema, rule_id) for c in cond.children))
    if isinstance(cond, Or):
        return Or(tuple(_validate_condition(c, schema, rule_id) for c in cond.children))
    if isinstance(cond, Not):
        return Not(_validate_condition(cond.child, schema, rule_id))
    return cond


def validate_pack(pack: RulePack, schema: Schema) -> RulePack:
    """Statically check a pack against a schema; returns the normalized pack.

    A pack that passes never raises unknown-symbol errors during evaluation.
    """
    rules = []
    for rule in pack.rules:
        cond = _validate_condition(rule.condition, schema, rule.id)
        if rule.kind == "derive":
            target = _resolve_name(rule.effect[0], schema)
            attr = schema.get(target)
            if attr is None:
                raise RuleValidationError(f"{rule.id}: unknown attribute {rule.effect[0]!r}")
            if attr.kind != "derived":
                raise RuleValidationError(
                    f"{rule.id}: derive effect targets non-derived attribute {target!r}"
                )
            if rule.effect[1] not in attr.domain:
                raise RuleValidationError(
                    f"{rule.id}: value {rule.effect[1]!r} not in domain of {target!r}"
                )
            effect = (target, rule.effect[1])
        else:
            action = rule.effect[0]
            if action not in schema.actions:
                raise RuleValidationError(f"{rule.id}: unknown action {action!r}")
            effect = (action, None)
        rules.append(Rule(rule.id, rule.kind, cond, effect))
    return RulePack(tuple(rules), pack.name)


def parse_rule_pack(text: str, schema: Schema, name: str = "") -> RulePack:
    """Parse and statically validate rule-file contents."""
    pack = _Parser(_tokenize(text)).parse_pack(name)
    return validate_pack(pack, schema)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _serialize_cond(cond: Condition, parent: str | None = None) -> str:
    if isinstance(cond, TrueAtom):
        return "true"
    if isinstance(cond, Eq):
        return f"{cond.attribute} = {cond.value}"
    if isinstance(cond, In):
        return f"{cond.attribute} in {{{', '.join(cond.values)}}}"
    if isinstance(cond, Not):
        child = cond.child
        inner = _serialize_cond(child, "not")
        if isinstance(child, (And, Or)):
            inner = f"({inner})"
        return f"not {inner}"
    if isinstance(cond, And):
        parts = []
        for child in cond.children:
            text = _serialize_cond(child, "and")
            # nested And/Or keep parens so shape survives a round trip
            if isinstance(child, (And, Or)):
                text = f"({text})"
            parts.append(text)
        return " and ".join(parts)
    if isinstance(cond, Or):
        parts = []
        for child in cond.children:
            text = _serialize_cond(child, "or")
            if isinstance(child, Or):
                text = f"({text})"
            parts.append(text)
        return " or ".join(parts)
    raise TypeError(f"not a condition: {cond!r}")


def serialize_rule(rule: Rule) -> str:
    cond = _serialize_cond(rule.condition)
    if rule.kind == "decide":
        effect = f"permit {rule.effect[0]}"
    else:
        effect = f"{rule.effect[0]} := {rule.effect[1]}"
    return f"rule {rule.id} {rule.kind}: if {cond} then {effect}"


def serialize_rule_pack(pack: RulePack) -> str:
    return "\n".join(serialize_rule(rule) for rule in pack.rules) + "\n"


# ---------------------------------------------------------------------------
# Relaxation
# ---------------------------------------------------------------------------

def _relax_cond(cond: Condition, attrs: frozenset[str]) -> Condition:
    if isinstance(cond, (Eq, In)):
        return TrueAtom() if cond.attribute in attrs else cond
    if isinstance(cond, And):
        return And(tuple(_relax_cond(c, attrs) for c in cond.children))
    if isinstance(cond, Or):
        return Or(tuple(_relax_cond(c, attrs) for c in cond.children))
    if isinstance(cond, Not):
        return Not(_relax_cond(cond.child, attrs))
    return cond


def relax(pack: RulePack, attrs: set[str], schema: Schema) -> RulePack:
    """Replace every atom mentioning an attribute in `attrs` with `true`.

    Rule ids and arity are preserved so explanations stay comparable across
    relaxation levels. Only base and unknown attributes may be relaxed.
    """
    for name in attrs:
        attr = schema.get(name)
        if attr is None:
            raise RuleValidationError(f"cannot relax unknown attribute {name!r}")
        if attr.kind == "derived":
            raise RuleValidationError(f"cannot relax derived attribute {name!r}")
    frozen = frozenset(attrs)
    if not frozen:
        return pack
    rules = tuple(
        Rule(r.id, r.kind, _relax_cond(r.condition, frozen), r.effect) for r in pack.rules
    )
    return RulePack(rules, pack.name)


# ---------------------------------------------------------------------------
# Built-in DPDP Act rule pack
# ---------------------------------------------------------------------------

def dpdp_rule_pack(schema: Schema) -> RulePack:
    """The built-in DPDP pack: 13 rules (the two processing-permission rules
    appear both as decide rules and as derive twins targeting
    allow_data_processing, so the final attribute is visible in enriched
    assignments while decisions stay deny-by-default)."""
    return parse_rule_pack(dpdp_rules_text(), schema, name="dpdp")


def dpdp_rules_text() -> str:
    return resources.files("apliance.data").joinpath("dpdp.rules").read_text("utf-8")
