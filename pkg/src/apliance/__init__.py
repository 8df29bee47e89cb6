"""Attribute-based compliance checking for privacy policies.

A privacy law is formalized as derivation and decision rules over a typed
attribute schema; a privacy policy becomes an attribute assignment for an
implied data-processing request; compliance is whether that request is
permitted. Ships with the DPDP Act (Sections 1-7) rule pack, an LLM-backed
attribute extractor, an evaluation harness, and a caching analysis service.
"""

__version__ = "0.1.0"

from .schema import (  # noqa: F401
    Assignment,
    AttributeDefinition,
    Schema,
    dpdp_schema,
    load_schema,
    serialize_schema,
    validate_assignment,
)
from .rules import (  # noqa: F401
    Rule,
    RulePack,
    dpdp_rule_pack,
    parse_rule_pack,
    relax,
    serialize_rule_pack,
)
from .engine import (  # noqa: F401
    AdmissibilityResult,
    BlameSet,
    Decision,
    EnrichedAssignment,
    blame,
    check_admissibility,
    derive_fixpoint,
    evaluate_scenario,
)
from .dpdp import (  # noqa: F401
    CANONICAL_SCENARIO,
    RELAXATION_LEVELS,
    Verdict,
    compliance_verdict,
    relaxation_report,
)
