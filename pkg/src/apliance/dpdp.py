"""DPDP Act instantiation: practical verdicts and relaxation analysis.

The verdict answers "would this policy's implied data-processing request be
permitted under the intended consent flow?": the six runtime attributes are
pinned to the canonical scenario (consent given, not withdrawn), base
attributes the extractor could not determine are treated as false for
evaluation but reported with reason "unknown", and the blocked-attribute
list comes from the engine's blame output. Full admissibility over all
runtime scenarios remains available through the engine directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from . import engine
from .rules import RulePack, dpdp_rule_pack, relax
from .schema import Assignment, Schema, dpdp_schema

# The intended consent flow: consent given and not withdrawn; none of the
# consent-free processing grounds apply.
CANONICAL_SCENARIO = Assignment({
    "consent_action": "true",
    "consent_withdraw_action": "false",
    "voluntary_data_for_specified_purpose": "false",
    "consent_for_state_benefits": "false",
    "available_to_state_and_notified_by_government": "false",
    "reasonable_time_elapsed": "false",
})

# Relaxation levels used by the staged compliance analysis.
RELAX_L0: frozenset[str] = frozenset()
RELAX_L1 = frozenset({
    "consent_request_language_all_eighth_schedule",
    "notice_languages_all_eighth_schedule",
    "consent_notice_how_to_complaint_to_board",
})
RELAX_L2 = RELAX_L1 | frozenset({
    "consent_is_unambiguous",
    "easy_consent_withdrawal",
})
RELAXATION_LEVELS: dict[str, frozenset[str]] = {
    "L0": RELAX_L0,
    "L1": RELAX_L1,
    "L2": RELAX_L2,
}

# Evaluation stand-ins for base attributes the extractor left unknown.
UNKNOWN_FALLBACK = {"purpose_of_processing": "other"}

ATTRIBUTE_DESCRIPTIONS = {
    "offering_service_to_data_principal_within_india":
        "The service is offered to consumers or data principals located in India.",
    "consent_is_freely_given":
        "Consent is given freely, without coercion or bundling with unrelated services.",
    "consent_is_specific_to_purpose":
        "Consent covers only the processing necessary for the stated purpose.",
    "consent_is_informed":
        "The data principal is told what personal data is collected, why, what rights "
        "apply (access, correction, withdrawal), and whom to contact for grievances.",
    "consent_is_unambiguous":
        "Consent is expressed through a clear affirmative action.",
    "consent_request_language_all_eighth_schedule":
        "The consent request is available in English and in every language of the "
        "Eighth Schedule of the Indian Constitution.",
    "consent_request_contains_contact_details_of_dpo_or_equivalent":
        "Contact details are published for a data protection officer or a person able "
        "to answer questions about the processing on the fiduciary's behalf.",
    "easy_consent_withdrawal":
        "Withdrawing consent is as easy and simple as giving it.",
    "consent_notice_information_about_personal_data":
        "The consent notice describes what personal data will be collected.",
    "consent_notice_purpose_of_processing":
        "The consent notice describes the purpose of collecting personal data.",
    "consent_notice_how_to_exercise_rights_sec6.4":
        "The consent notice describes how consent can be withdrawn.",
    "consent_notice_how_to_exercise_rights_sec13":
        "The consent notice describes the grievance redressal means the fiduciary provides.",
    "consent_notice_how_to_complaint_to_board":
        "The consent notice describes how to complain to the Data Protection Board.",
    "notice_languages_all_eighth_schedule":
        "Notices are available in English and in every language of the Eighth Schedule "
        "of the Indian Constitution.",
    "purpose_of_processing":
        "The purpose for which the personal data is processed or shared.",
    "lawful_purpose":
        "The processing purpose is not expressly forbidden by law.",
    "voluntary_data_for_specified_purpose":
        "The user voluntarily provided personal data for the specified purpose.",
    "consent_action":
        "The user explicitly gave consent for the processing.",
    "consent_withdraw_action":
        "The user explicitly withdrew previously given consent.",
    "reasonable_time_elapsed":
        "A reasonable time has passed since consent withdrawal.",
    "consent_for_state_benefits":
        "The user consented to processing related to state benefits or services.",
    "available_to_state_and_notified_by_government":
        "The personal data is already held by the state and notified by the government.",
}


@dataclass(frozen=True)
class Violation:
    attribute: str
    reason: str  # false | unknown
    description: str
    rule_path: tuple[str, ...] = ()


@dataclass(frozen=True)
class Verdict:
    status: str  # compliant | non_compliant
    violations: tuple[Violation, ...]
    scenario: Assignment
    decision: engine.Decision
    enriched: engine.EnrichedAssignment

    @property
    def compliant(self) -> bool:
        return self.status == "compliant"


@lru_cache(maxsize=1)
def builtin() -> tuple[Schema, RulePack]:
    """The built-in DPDP schema and rule pack, parsed once."""
    schema = dpdp_schema()
    return schema, dpdp_rule_pack(schema)


def compliance_verdict(
    base: Assignment,
    relaxations: set[str] = frozenset(),
    *,
    schema: Schema | None = None,
    pack: RulePack | None = None,
) -> Verdict:
    """Decide compliance for an extracted base assignment.

    `base` covers the schema's base attributes; attributes the extraction
    left unknown stay unbound and are evaluated at their fallback value
    (false, or `other` for the processing purpose) while keeping reason
    "unknown" in any violation naming them.
    """
    if schema is None or pack is None:
        schema, pack = builtin()
    effective = {}
    unknown_attrs = set()
    for attr in schema.base:
        value = base.get(attr.name)
        if value is None:
            unknown_attrs.add(attr.name)
            value = UNKNOWN_FALLBACK.get(attr.name, "false")
        effective[attr.name] = value

    working_pack = relax(pack, set(relaxations), schema)
    enriched, decision = engine.evaluate_scenario(
        schema, working_pack, Assignment(effective), CANONICAL_SCENARIO
    )
    if decision.permitted:
        return Verdict("compliant", (), CANONICAL_SCENARIO, decision, enriched)

    blame_set = engine.blame(schema, working_pack, enriched, "permit data_processing")
    violations = tuple(
        Violation(
            attribute=entry.attribute,
            reason="unknown" if entry.attribute in unknown_attrs else "false",
            description=ATTRIBUTE_DESCRIPTIONS.get(entry.attribute, entry.attribute),
            rule_path=entry.rule_path,
        )
        for entry in blame_set.entries
    )
    return Verdict("non_compliant", violations, CANONICAL_SCENARIO, decision, enriched)


def relaxation_report(
    corpus: list[tuple[str, Assignment]],
    *,
    schema: Schema | None = None,
    pack: RulePack | None = None,
) -> list[tuple[str, int]]:
    """Compliant counts at each relaxation level (L0, L1, L2)."""
    table = []
    for level in ("L0", "L1", "L2"):
        relaxed = RELAXATION_LEVELS[level]
        count = sum(
            1 for _, base in corpus
            if compliance_verdict(base, relaxed, schema=schema, pack=pack).compliant
        )
        table.append((level, count))
    return table


def render_verdict_text(verdict: Verdict) -> str:
    """Plain-text verdict: COMPLIANT, or NON-COMPLIANT with a numbered list."""
    if verdict.compliant:
        return "COMPLIANT\n"
    lines = ["NON-COMPLIANT"]
    for number, violation in enumerate(verdict.violations, start=1):
        lines.append(
            f"{number}. {violation.attribute}: {violation.description} [{violation.reason}]"
        )
    return "\n".join(lines) + "\n"


def load_corpus_csv(text: str, schema: Schema) -> list[tuple[str, Assignment]]:
    """Build per-policy base assignments from annotation-style CSV.

    Expects the header `policy_id,attribute,label`; `unknown` labels leave
    the attribute unbound. Boolean labels bind directly; a `true` label on
    the processing-purpose attribute binds its ordinary-commerce value.
    """
    from .metrics import load_annotations

    pairs = load_annotations(text, schema)
    per_policy: dict[str, dict[str, str]] = {}
    for pair in pairs:
        bindings = per_policy.setdefault(pair.policy_id, {})
        if pair.label == "unknown":
            continue
        attr = schema.get(pair.attribute)
        if pair.label in attr.domain:
            bindings[pair.attribute] = pair.label
        elif pair.attribute in UNKNOWN_FALLBACK and pair.label == "true":
            bindings[pair.attribute] = UNKNOWN_FALLBACK[pair.attribute]
        # a false label on a non-boolean attribute stays unbound
    return [(policy_id, Assignment(b)) for policy_id, b in sorted(per_policy.items())]
