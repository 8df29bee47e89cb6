import itertools

from apliance.dpdp import (
    CANONICAL_SCENARIO,
    RELAX_L1,
    RELAX_L2,
    RELAXATION_LEVELS,
    compliance_verdict,
    load_corpus_csv,
    relaxation_report,
    render_verdict_text,
)
from apliance.engine import permit_support
from apliance.schema import Assignment

LANG_AND_BOARD = {
    "consent_request_language_all_eighth_schedule",
    "notice_languages_all_eighth_schedule",
    "consent_notice_how_to_complaint_to_board",
}

# base attributes in the consent path's antecedent closure (everything the
# consent-based permission transitively requires)
CONSENT_PATH_CLOSURE = {
    "offering_service_to_data_principal_within_india",
    "lawful_purpose",
    "consent_is_freely_given",
    "consent_is_specific_to_purpose",
    "consent_is_informed",
    "consent_is_unambiguous",
    "consent_request_language_all_eighth_schedule",
    "consent_request_contains_contact_details_of_dpo_or_equivalent",
    "easy_consent_withdrawal",
    "consent_notice_information_about_personal_data",
    "consent_notice_purpose_of_processing",
    "consent_notice_how_to_exercise_rights_sec6.4",
    "consent_notice_how_to_exercise_rights_sec13",
    "consent_notice_how_to_complaint_to_board",
    "notice_languages_all_eighth_schedule",
}


class TestCanonicalScenario:
    def test_binds_all_six_unknowns(self, dpdp):
        schema, _ = dpdp
        assert set(CANONICAL_SCENARIO.bindings) == {a.name for a in schema.unknown}

    def test_consent_given_not_withdrawn(self):
        assert CANONICAL_SCENARIO.get("consent_action") == "true"
        assert CANONICAL_SCENARIO.get("consent_withdraw_action") == "false"


class TestComplianceVerdict:
    def test_all_favourable_is_compliant(self, favourable_base):
        verdict = compliance_verdict(favourable_base)
        assert verdict.status == "compliant"
        assert verdict.violations == ()
        assert verdict.decision.firing_rules == frozenset({"R3"})

    def test_language_and_board_failures_are_blamed(self, favourable_base):
        broken = dict(favourable_base.bindings)
        for name in LANG_AND_BOARD:
            broken[name] = "false"
        verdict = compliance_verdict(Assignment(broken))
        assert verdict.status == "non_compliant"
        assert set(v.attribute for v in verdict.violations) >= LANG_AND_BOARD

    def test_relaxed_verdict_blames_residual_blocker(self, favourable_base):
        broken = dict(favourable_base.bindings)
        for name in LANG_AND_BOARD:
            broken[name] = "false"
        broken["consent_is_unambiguous"] = "false"
        verdict = compliance_verdict(Assignment(broken), RELAX_L1)
        assert verdict.status == "non_compliant"
        assert [v.attribute for v in verdict.violations] == ["consent_is_unambiguous"]
        assert verdict.violations[0].reason == "false"

    def test_unknown_base_value_reported_as_unknown(self, favourable_base):
        partial = dict(favourable_base.bindings)
        del partial["consent_is_informed"]
        verdict = compliance_verdict(Assignment(partial))
        assert verdict.status == "non_compliant"
        reasons = {v.attribute: v.reason for v in verdict.violations}
        assert reasons == {"consent_is_informed": "unknown"}

    def test_violations_carry_descriptions(self, favourable_base):
        broken = dict(favourable_base.bindings)
        broken["easy_consent_withdrawal"] = "false"
        verdict = compliance_verdict(Assignment(broken))
        assert verdict.violations[0].description
        assert verdict.violations[0].description != verdict.violations[0].attribute

    def test_single_attribute_sensitivity(self, dpdp, favourable_base):
        schema, _ = dpdp
        for name in CONSENT_PATH_CLOSURE:
            flipped = dict(favourable_base.bindings)
            flipped[name] = "false"
            verdict = compliance_verdict(Assignment(flipped))
            assert verdict.status == "non_compliant", name
            assert [v.attribute for v in verdict.violations] == [name]

    def test_purpose_flip_outside_consent_path_is_harmless(self, favourable_base):
        flipped = dict(favourable_base.bindings)
        flipped["purpose_of_processing"] = "medical_emergency"
        assert compliance_verdict(Assignment(flipped)).status == "compliant"

    def test_compliant_verdict_never_rests_on_unknown_values(self, dpdp, favourable_base):
        schema, pack = dpdp
        # drop attributes outside the consent path and confirm the permit's
        # support contains no coerced-unknown attribute
        partial = dict(favourable_base.bindings)
        del partial["purpose_of_processing"]
        verdict = compliance_verdict(Assignment(partial))
        assert verdict.status == "compliant"
        support = permit_support(schema, pack, verdict.enriched, verdict.decision)
        assert "purpose_of_processing" not in support

    def test_relaxation_monotone_at_verdict_level(self, favourable_base):
        cases = [favourable_base.bindings]
        for flips in [
            {"consent_is_unambiguous": "false"},
            {"notice_languages_all_eighth_schedule": "false"},
            {"easy_consent_withdrawal": "false", "lawful_purpose": "false"},
            {name: "false" for name in CONSENT_PATH_CLOSURE},
        ]:
            cases.append({**favourable_base.bindings, **flips})
        for bindings in cases:
            statuses = [
                compliance_verdict(Assignment(bindings), RELAXATION_LEVELS[level]).compliant
                for level in ("L0", "L1", "L2")
            ]
            for earlier, later in itertools.pairwise(statuses):
                assert not (earlier and not later)


class TestRelaxationReport:
    def test_committed_corpus_counts(self, dpdp, fixtures_dir):
        schema, _ = dpdp
        text = (fixtures_dir / "corpus_labels.csv").read_text()
        corpus = load_corpus_csv(text, schema)
        assert len(corpus) == 25
        assert relaxation_report(corpus) == [("L0", 0), ("L1", 3), ("L2", 20)]

    def test_empty_corpus(self):
        assert relaxation_report([]) == [("L0", 0), ("L1", 0), ("L2", 0)]

    def test_single_favourable_policy(self, favourable_base):
        report = relaxation_report([("only", favourable_base)])
        assert report == [("L0", 1), ("L1", 1), ("L2", 1)]


class TestRendering:
    def test_compliant_rendering(self, favourable_base):
        text = render_verdict_text(compliance_verdict(favourable_base))
        assert text == "COMPLIANT\n"

    def test_non_compliant_numbered_list(self, favourable_base):
        broken = dict(favourable_base.bindings)
        for name in sorted(LANG_AND_BOARD):
            broken[name] = "false"
        text = render_verdict_text(compliance_verdict(Assignment(broken)))
        lines = text.strip().splitlines()
        assert lines[0] == "NON-COMPLIANT"
        assert len(lines) == 4
        for number, line in enumerate(lines[1:], start=1):
            assert line.startswith(f"{number}. ")
            assert "[false]" in line
