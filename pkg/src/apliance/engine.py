"""Core semantics: fixpoint derivation, decisions, admissibility, and blame.

Derivation is evaluated stratum by stratum over the dependency graph of
derived attributes: within a stratum, rules fire by forward chaining (an
atom over a still-unbound attribute is simply unsatisfied); once a stratum
can make no further progress, its unbound attributes take their schema
defaults and become visible to later strata. This makes defaults such as
consent_status = not_given usable by downstream rules. For negation-free,
conflict-free packs the result is order-independent, idempotent, and
stable under re-derivation; evaluation is deterministic (pack order)
regardless.

Decisions are deny-by-default: an action is permitted iff at least one
decide rule fires against the enriched assignment.

All operations are pure functions over immutable inputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .rules import And, Condition, Eq, In, Not, Or, Rule, RulePack, TrueAtom
from .schema import Assignment, Schema

DEFAULT_ENUMERATION_LIMIT = 20


class EngineError(Exception):
    pass


class MissingBindingError(EngineError):
    def __init__(self, names):
        super().__init__(f"unbound attributes: {', '.join(sorted(names))}")
        self.names = frozenset(names)


class ConflictError(EngineError):
    """Two fired rules bound the same attribute to different values."""

    def __init__(self, attribute: str, first_rule: str, second_rule: str):
        super().__init__(
            f"rules {first_rule} and {second_rule} derive conflicting values "
            f"for {attribute!r}"
        )
        self.attribute = attribute
        self.rule_ids = (first_rule, second_rule)


class EnumerationLimitError(EngineError):
    def __init__(self, free_count: int, limit: int):
        super().__init__(
            f"{free_count} free attributes exceed the enumeration limit of {limit}"
        )
        self.free_count = free_count
        self.limit = limit


class BlameError(EngineError):
    pass


@dataclass(frozen=True)
class EnrichedAssignment:
    """A total valuation plus, per attribute, how its value came to be.

    Provenance tags: ("given",) for input bindings, ("derived", rule_id)
    for rule-bound values, ("defaulted",) for schema defaults.
    """

    bindings: dict[str, str]
    provenance: dict[str, tuple]

    def get(self, name: str) -> str | None:
        return self.bindings.get(name)


@dataclass(frozen=True)
class Decision:
    outcome: str  # permit | deny
    firing_rules: frozenset[str]

    @property
    def permitted(self) -> bool:
        return self.outcome == "permit"


@dataclass(frozen=True)
class AdmissibilityResult:
    status: str  # admissible | violating
    witness: Assignment | None
    scenarios_checked: int


@dataclass(frozen=True)
class BlameEntry:
    attribute: str
    expected: str
    actual: str
    rule_path: tuple[str, ...]


@dataclass(frozen=True)
class BlameSet:
    entries: tuple[BlameEntry, ...]

    def attributes(self) -> tuple[str, ...]:
        return tuple(e.attribute for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)


# ---------------------------------------------------------------------------
# Condition evaluation
# ---------------------------------------------------------------------------

def eval_condition(cond: Condition, lookup) -> bool:
    """Two-valued evaluation; an atom over an undefined attribute is False."""
    if isinstance(cond, TrueAtom):
        return True
    if isinstance(cond, Eq):
        return lookup(cond.attribute) == cond.value
    if isinstance(cond, In):
        value = lookup(cond.attribute)
        return value is not None and value in cond.values
    if isinstance(cond, And):
        return all(eval_condition(c, lookup) for c in cond.children)
    if isinstance(cond, Or):
        return any(eval_condition(c, lookup) for c in cond.children)
    if isinstance(cond, Not):
        return not eval_condition(cond.child, lookup)
    raise TypeError(f"not a condition: {cond!r}")


# ---------------------------------------------------------------------------
# Fixpoint derivation
# ---------------------------------------------------------------------------

def _derived_strata(schema: Schema, pack: RulePack) -> list[list[str]]:
    """Strongly connected components of the derived-attribute dependency
    graph, in topological order (schema order within a component)."""
    derived_names = [a.name for a in schema.derived]
    derived_set = set(derived_names)
    deps: dict[str, set[str]] = {name: set() for name in derived_names}
    for rule in pack.derive_rules():
        target = rule.target
        if target not in derived_set:
            continue
        for name in _condition_derived(rule.condition, derived_set):
            deps[target].add(name)

    # Tarjan's algorithm, iterative over schema order for determinism.
    index: dict[str, int] = {}
    lowlink: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    sccs: list[list[str]] = []
    counter = itertools.count()

    def strongconnect(root: str):
        work = [(root, iter(sorted(deps[root], key=derived_names.index)))]
        index[root] = lowlink[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            node, children = work[-1]
            advanced = False
            for child in children:
                if child not in index:
                    index[child] = lowlink[child] = next(counter)
                    stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter(sorted(deps[child], key=derived_names.index))))
                    advanced = True
                    break
                if child in on_stack:
                    lowlink[node] = min(lowlink[node], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
            if lowlink[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                sccs.append(sorted(component, key=derived_names.index))

    for name in derived_names:
        if name not in index:
            strongconnect(name)
    return sccs


def _condition_derived(cond: Condition, derived_set: set[str]) -> set[str]:
    if isinstance(cond, (Eq, In)):
        return {cond.attribute} if cond.attribute in derived_set else set()
    if isinstance(cond, (And, Or)):
        found: set[str] = set()
        for child in cond.children:
            found |= _condition_derived(child, derived_set)
        return found
    if isinstance(cond, Not):
        return _condition_derived(cond.child, derived_set)
    return set()


def derive_fixpoint(
    schema: Schema,
    pack: RulePack,
    assignment: Assignment,
    trace: list[str] | None = None,
) -> EnrichedAssignment:
    """Close an input over the pack's derivation rules, then apply defaults.

    Requires every base and unknown attribute bound to an in-domain value.
    Raises ConflictError when two fired rules disagree on a target value;
    re-deriving an already-bound value is fine. Pass a list as `trace` to
    collect one line per fired rule and per applied default.
    """
    required = [a.name for a in schema.attributes if a.kind != "derived"]
    missing = [name for name in required if not assignment.bound(name)]
    if missing:
        raise MissingBindingError(missing)
    for name in assignment.bindings:
        attr = schema.get(name)
        if attr is None:
            raise EngineError(f"input binds unknown attribute {name!r}")
        if attr.kind == "derived":
            raise EngineError(f"input binds derived attribute {name!r}")

    bindings = dict(assignment.bindings)
    provenance: dict[str, tuple] = {name: ("given",) for name in bindings}
    bound_by: dict[str, str] = {}

    rules_by_target: dict[str, list[Rule]] = {}
    for rule in pack.derive_rules():
        rules_by_target.setdefault(rule.target, []).append(rule)

    for stratum in _derived_strata(schema, pack):
        stratum_rules = [r for name in stratum for r in rules_by_target.get(name, [])]
        # keep pack order for deterministic conflict reporting
        stratum_rules.sort(key=pack.rules.index)
        changed = True
        while changed:
            changed = False
            for rule in stratum_rules:
                if not eval_condition(rule.condition, bindings.get):
                    continue
                target, value = rule.effect
                if target in bound_by:
                    if bindings[target] != value:
                        raise ConflictError(target, bound_by[target], rule.id)
                    continue
                bindings[target] = value
                bound_by[target] = rule.id
                provenance[target] = ("derived", rule.id)
                if trace is not None:
                    trace.append(f"fired {rule.id}: {target} := {value}")
                changed = True
        for name in stratum:
            if name not in bindings:
                bindings[name] = schema.get(name).default
                provenance[name] = ("defaulted",)
                if trace is not None:
                    trace.append(f"defaulted: {name} := {bindings[name]}")

    return EnrichedAssignment(bindings, provenance)


def decide(
    schema: Schema,
    pack: RulePack,
    enriched: EnrichedAssignment,
    action: str | None = None,
    trace: list[str] | None = None,
) -> Decision:
    """Evaluate decide rules against an enriched assignment (deny-by-default)."""
    firing = frozenset(
        rule.id
        for rule in pack.decide_rules()
        if (action is None or rule.effect[0] == action)
        and eval_condition(rule.condition, enriched.get)
    )
    decision = Decision("permit" if firing else "deny", firing)
    if trace is not None:
        for rule_id in sorted(firing):
            trace.append(f"fired {rule_id}: permit")
        trace.append(f"decision: {decision.outcome}")
    return decision


def evaluate_scenario(
    schema: Schema,
    pack: RulePack,
    base: Assignment,
    unknowns: Assignment,
    action: str | None = None,
) -> tuple[EnrichedAssignment, Decision]:
    """Compose base and unknown bindings, derive, and decide."""
    enriched = derive_fixpoint(schema, pack, base.merged(unknowns))
    return enriched, decide(schema, pack, enriched, action)


# ---------------------------------------------------------------------------
# Admissibility
# ---------------------------------------------------------------------------

def check_admissibility(
    schema: Schema,
    pack: RulePack,
    given: Assignment,
    action: str | None = None,
    limit: int = DEFAULT_ENUMERATION_LIMIT,
) -> AdmissibilityResult:
    """Exhaustively test every completion of the free attributes.

    Free attributes are the unknown-kind and unbound base attributes;
    completions are enumerated in schema order with each attribute's domain
    order, the last free attribute varying fastest. The request is
    admissible iff every completion permits; otherwise the first denying
    completion (in enumeration order) is the witness.
    """
    free = [
        a for a in schema.attributes
        if a.kind != "derived" and not given.bound(a.name)
    ]
    if len(free) > limit:
        raise EnumerationLimitError(len(free), limit)

    checked = 0
    for combo in itertools.product(*(a.domain for a in free)):
        completion = dict(given.bindings)
        completion.update({a.name: v for a, v in zip(free, combo)})
        enriched = derive_fixpoint(schema, pack, Assignment(completion))
        checked += 1
        if not decide(schema, pack, enriched, action).permitted:
            witness = Assignment({a.name: v for a, v in zip(free, combo)})
            return AdmissibilityResult("violating", witness, checked)
    return AdmissibilityResult("admissible", None, checked)


# ---------------------------------------------------------------------------
# Blame
# ---------------------------------------------------------------------------

def _dedupe(entries: list[BlameEntry]) -> list[BlameEntry]:
    seen = set()
    result = []
    for entry in entries:
        key = (entry.attribute, entry.expected)
        if key not in seen:
            seen.add(key)
            result.append(entry)
    return result


def _expected_text(want, negate: bool = False) -> str:
    if isinstance(want, tuple):
        text = "one of {" + ", ".join(want) + "}"
    else:
        text = str(want)
    return f"not {text}" if negate else text


class _Blamer:
    def __init__(self, schema: Schema, pack: RulePack, enriched: EnrichedAssignment):
        self.schema = schema
        self.pack = pack
        self.enriched = enriched
        self.rules_by_target: dict[str, list[Rule]] = {}
        for rule in pack.derive_rules():
            self.rules_by_target.setdefault(rule.target, []).append(rule)

    def holds(self, cond: Condition, want: bool) -> bool:
        return eval_condition(cond, self.enriched.get) is want

    def condition(self, cond: Condition, want: bool, path: tuple[str, ...]):
        """Blame for making `cond` evaluate to `want`; None if infeasible."""
        if self.holds(cond, want):
            return []
        if isinstance(cond, TrueAtom):
            return None  # want False from a constant-true atom: hopeless
        if isinstance(cond, Eq):
            return self.atom(cond.attribute, (cond.value,), want, path, cond.value)
        if isinstance(cond, In):
            return self.atom(cond.attribute, cond.values, want, path, cond.values)
        if isinstance(cond, Not):
            return self.condition(cond.child, not want, path)
        if isinstance(cond, And):
            if want:
                return self.all_of(cond.children, True, path)
            return self.first_feasible(cond.children, False, path)
        if isinstance(cond, Or):
            if want:
                return self.first_feasible(cond.children, True, path)
            return self.all_of(cond.children, False, path)
        raise TypeError(f"not a condition: {cond!r}")

    def all_of(self, children, want: bool, path):
        entries: list[BlameEntry] = []
        for child in children:
            sub = self.condition(child, want, path)
            if sub is None:
                return None
            entries.extend(sub)
        return _dedupe(entries)

    def first_feasible(self, children, want: bool, path):
        # Disjuncts are tried in written order: the pack states its primary
        # legal basis first, so explanations follow the pack's own reading.
        for child in children:
            sub = self.condition(child, want, path)
            if sub is not None:
                return sub
        return None

    def atom(self, attribute: str, accepted: tuple[str, ...], want: bool, path, raw_want):
        attr = self.schema.get(attribute)
        if attr is None:
            raise BlameError(f"unknown attribute {attribute!r}")
        actual = self.enriched.get(attribute) or "unknown"
        if attr.kind != "derived":
            expected = _expected_text(raw_want, negate=not want)
            return [BlameEntry(attribute, expected, actual, path)]
        if not want:
            # Unfiring the rule that produced a derived value is out of scope
            # for explanations; the built-in pack never needs it.
            return None
        candidates = [
            rule for rule in self.rules_by_target.get(attribute, [])
            if rule.effect[1] in accepted
        ]
        best = None
        for rule in candidates:  # pack order; ties keep the earlier rule
            sub = self.condition(rule.condition, True, (rule.id,) + path)
            if sub is None:
                continue
            if best is None or len(sub) < len(best):
                best = sub
        return best

    def decide_goal(self, action: str) -> list[BlameEntry] | None:
        best = None
        for rule in self.pack.decide_rules():
            if rule.effect[0] != action:
                continue
            sub = self.condition(rule.condition, True, (rule.id,))
            if sub is None:
                continue
            if best is None or len(sub) < len(best):
                best = sub
        return best


def blame(
    schema: Schema,
    pack: RulePack,
    enriched: EnrichedAssignment,
    goal: str,
) -> BlameSet:
    """Explain why a goal fails in terms of base/unknown attribute values.

    Goals are either ``permit <action>`` or ``<attribute>=<value>``. The
    result is empty iff the goal already holds. Entries carry the chain of
    derive-rule ids from the rule that reads the blamed attribute up to the
    goal. Minimization is greedy per choice point, not a global minimum.
    """
    blamer = _Blamer(schema, pack, enriched)
    if goal.startswith("permit "):
        action = goal[len("permit "):].strip()
        if action not in schema.actions:
            raise BlameError(f"unknown action {action!r}")
        if decide(schema, pack, enriched, action).permitted:
            return BlameSet(())
        entries = blamer.decide_goal(action)
    elif "=" in goal:
        attribute, _, value = goal.partition("=")
        attribute, value = attribute.strip(), value.strip()
        attr = schema.get(attribute)
        if attr is None:
            raise BlameError(f"unknown attribute {attribute!r}")
        if value not in attr.domain:
            raise BlameError(f"value {value!r} not in domain of {attribute!r}")
        entries = blamer.condition(Eq(attribute, value), True, ())
    else:
        raise BlameError(f"malformed goal {goal!r}")
    if entries is None:
        raise BlameError(f"goal {goal!r} has no derivable path to blame")
    return BlameSet(tuple(entries))


# ---------------------------------------------------------------------------
# Permit support (which given values a permit actually rests on)
# ---------------------------------------------------------------------------

def permit_support(
    schema: Schema,
    pack: RulePack,
    enriched: EnrichedAssignment,
    decision: Decision,
) -> frozenset[str]:
    """Base/unknown attributes transitively supporting the fired decide rules.

    Follows only the branches that actually hold; a disjunct that failed
    contributes nothing even though its attributes appear in the condition.
    """
    support: set[str] = set()
    pending: list[Condition] = [
        rule.condition for rule in pack.decide_rules() if rule.id in decision.firing_rules
    ]
    expanded_rules: set[str] = set()
    while pending:
        cond = pending.pop()
        support_condition(cond, schema, enriched, support, pending, expanded_rules, pack)
    return frozenset(support)


def support_condition(cond, schema, enriched, support, pending, expanded_rules, pack):
    if isinstance(cond, TrueAtom):
        return
    if isinstance(cond, (Eq, In)):
        attr = schema.get(cond.attribute)
        if attr.kind != "derived":
            support.add(cond.attribute)
            return
        origin = enriched.provenance.get(cond.attribute)
        if origin and origin[0] == "derived" and origin[1] not in expanded_rules:
            expanded_rules.add(origin[1])
            rule = pack.get(origin[1])
            pending.append(rule.condition)
        return
    if isinstance(cond, Not):
        support_condition(cond.child, schema, enriched, support, pending, expanded_rules, pack)
        return
    if isinstance(cond, And):
        for child in cond.children:
            support_condition(child, schema, enriched, support, pending, expanded_rules, pack)
        return
    if isinstance(cond, Or):
        for child in cond.children:
            if eval_condition(child, enriched.get):
                support_condition(child, schema, enriched, support, pending, expanded_rules, pack)
        return
