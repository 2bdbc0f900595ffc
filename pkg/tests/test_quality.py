import dataclasses

import pytest

from mcqforge import data
from mcqforge.errors import ValidationError
from mcqforge.items import McqItem, ProvenanceRecord, parse_mcq
from mcqforge.providers import MockBackend, ProviderHub
from mcqforge.prompts import evaluate_prompt
from mcqforge.quality import (
    CriterionId,
    CriterionVerdict,
    aggregate,
    check_criterion2,
    check_criterion9_lexical,
    evaluate_semantic_criteria,
    parse_evaluator_block,
    run_quality_checks,
)
from mcqforge.items import render_mcq

from conftest import random_item


def writer_items():
    fixtures = data.demo_fixtures()
    texts = [fixtures[f"item_writer_{k}"]["Present the Question 2"] for k in range(1, 5)]
    return [parse_mcq(t) for t in texts]


def make_item(stem, question, options, correct=0):
    return McqItem(
        stem=stem, question=question, options=tuple(options), correct_index=correct,
        provenance=ProvenanceRecord(source_role="item_writer_1"),
    )


PASSING = make_item(
    "A reservoir shows algae blooms each summer. Managers adjust nutrient inflow from farms. "
    "Monitoring continues for two seasons.",
    "Which factor most directly drives the bloom pattern?",
    ["Excess fertilizer washed into the water", "Seasonal bird migration", "Boat traffic wakes",
     "Sediment color changes", "Shoreline erosion rates"],
)


class TestCriterion2:
    def test_all_four_reference_items_pass(self):
        for item in writer_items():
            assert check_criterion2(item).passed, item.stem[:40]

    def test_two_sentence_total_fails_with_evidence(self):
        item = make_item("Single sentence stem.", "Why?", PASSING.options)
        verdict = check_criterion2(item)
        assert not verdict.passed
        assert "stem: 2 sentences" in verdict.evidence

    def test_eight_word_option_flips_a_passing_item(self):
        assert check_criterion2(PASSING).passed
        options = list(PASSING.options)
        options[2] = "one two three four five six seven eight"
        mutated = dataclasses.replace(PASSING, options=tuple(options))
        verdict = check_criterion2(mutated)
        assert not verdict.passed
        assert any("option C: 8 words" in e for e in verdict.evidence)

    def test_seven_word_option_is_allowed(self):
        options = list(PASSING.options)
        options[4] = "one two three four five six seven"
        assert check_criterion2(dataclasses.replace(PASSING, options=tuple(options))).passed

    def test_mutation_soundness_over_corpus(self, rng):
        checked = 0
        for _ in range(200):
            item = random_item(rng)
            if not check_criterion2(item).passed:
                continue
            checked += 1
            for i in range(5):
                options = list(item.options)
                options[i] = options[i] + " pad pad pad pad pad pad pad pad"
                assert not check_criterion2(dataclasses.replace(item, options=tuple(options))).passed
            short = dataclasses.replace(item, stem="Only one stem sentence here.",
                                        question="Why?")
            assert not check_criterion2(short).passed
        assert checked > 20

    def test_pure_function_repeat_agreement(self):
        a = check_criterion2(PASSING)
        b = check_criterion2(PASSING)
        assert (a.verdict, a.evidence) == (b.verdict, b.evidence)


class TestCriterion9Lexical:
    def test_shared_unique_term_fails(self):
        item = make_item(
            "A bacterium stops producing a porin in its outer membrane. Antibiotic uptake drops "
            "sharply. The lab confirms the change.",
            "Which alteration explains the resistance?",
            ["Fewer porin doorways for drugs", "Thicker capsule layers", "Faster division rates",
             "New flagellar motors", "Smaller genome size"],
        )
        verdict = check_criterion9_lexical(item)
        assert not verdict.passed
        assert "porin" in verdict.evidence

    def test_distractor_exemption(self):
        item = make_item(
            "A bacterium stops producing a porin in its outer membrane. Antibiotic uptake drops "
            "sharply. The lab confirms the change.",
            "Which alteration explains the resistance?",
            ["Fewer porin doorways for drugs", "Extra porin pumps appearing",
             "Faster division rates", "New flagellar motors", "Smaller genome size"],
        )
        assert check_criterion9_lexical(item).passed

    def test_general_terms_are_acceptable(self):
        item = make_item(
            "A student grows a cell sample with bacteria from yogurt. Colonies appear overnight. "
            "Counts are recorded daily.",
            "Which condition most favors the growth observed?",
            ["Gentle warmth around each bacteria cell", "Freezer storage between counts",
             "Dry agar plates without medium", "Constant ultraviolet exposure", "Sealed anaerobic jars"],
            correct=0,
        )
        assert check_criterion9_lexical(item).passed

    def test_same_root_matches_inflections(self):
        item = make_item(
            "A strain acquires mutations under antibiotic pressure. Cultures persist for weeks. "
            "Sequencing identifies the change.",
            "What explains the survival?",
            ["A mutation in the target gene", "Plasmid loss during division",
             "Slower growth at low temperature", "Loss of flagella", "Thicker cell walls"],
        )
        verdict = check_criterion9_lexical(item)
        assert not verdict.passed  # "mutations" in stem, "mutation" in key

    def test_exemption_monotonicity(self, rng):
        passes_checked = fails_checked = 0
        for _ in range(300):
            item = random_item(rng)
            verdict = check_criterion9_lexical(item)
            i = 0 if item.correct_index != 0 else 1
            options = list(item.options)
            if verdict.passed:
                # adding any key token to a distractor cannot create a failure
                options[i] = options[i] + " " + item.correct_option.split()[0]
                patched = dataclasses.replace(item, options=tuple(options))
                assert check_criterion9_lexical(patched).passed
                passes_checked += 1
            else:
                # exempting every flagged term via a distractor clears the check
                options[i] = options[i] + " " + " ".join(verdict.evidence)
                patched = dataclasses.replace(item, options=tuple(options))
                assert check_criterion9_lexical(patched).passed
                fails_checked += 1
        assert passes_checked and fails_checked


class TestEvaluator:
    def evaluator_hub(self, response):
        hub = ProviderHub()
        prompt = evaluate_prompt(criteria_block=data.criteria_block(),
                                 item_text=render_mcq(PASSING))
        hub.configure("evaluator", MockBackend({prompt: response}))
        return hub

    def test_all_pass_block_parses_to_eight_passes(self):
        block = "\n".join(f"CRITERION {n}: PASS - fine." for n in range(1, 10))
        verdicts = evaluate_semantic_criteria(self.evaluator_hub(block), PASSING)
        assert len(verdicts) == 8
        assert all(v.passed for v in verdicts)
        assert all(v.evaluator == "automated:evaluator" for v in verdicts)

    def test_recall_item_fails_c6(self):
        block = "\n".join(
            f"CRITERION {n}: {'FAIL - recall oriented.' if n == 6 else 'PASS - ok.'}"
            for n in range(1, 10)
        )
        verdicts = evaluate_semantic_criteria(self.evaluator_hub(block), PASSING, criteria=[6])
        assert len(verdicts) == 1
        assert not verdicts[0].passed

    def test_two_keys_item_fails_c7(self):
        block = "CRITERION 7: FAIL - two defensible keys."
        verdicts = evaluate_semantic_criteria(self.evaluator_hub(block), PASSING, criteria=[7])
        assert verdicts[0].criterion == 7 and not verdicts[0].passed

    def test_unparseable_answer_is_conservative_fail(self):
        verdicts = evaluate_semantic_criteria(
            self.evaluator_hub("I think it looks good overall!"), PASSING
        )
        assert all(not v.passed for v in verdicts)
        assert all(v.rationale == "evaluator response unparseable" for v in verdicts)

    def test_block_parser_tolerates_label_variants(self):
        parsed = parse_evaluator_block("C1: PASS\ncriterion 2 : FAIL - too short\n3. PASS ok")
        assert parsed[1][0] == "pass"
        assert parsed[2][0] == "fail"
        assert parsed[3][0] == "pass"


def full_verdicts(fails=()):
    out = [
        CriterionVerdict(2, "fail" if 2 in fails else "pass", "deterministic",
                         evidence=("stem: 1 sentences",) if 2 in fails else ()),
        CriterionVerdict(9, "fail" if 9 in fails else "pass", "deterministic",
                         evidence=("porin",) if 9 in fails else ()),
    ]
    for n in (1, 3, 4, 5, 6, 7, 8):
        out.append(CriterionVerdict(n, "fail" if n in fails else "pass", "automated:evaluator"))
    return out


class TestAggregate:
    def test_all_pass_accepts(self):
        report = aggregate(PASSING, full_verdicts())
        assert report.accepted and report.failed_ids == []
        assert report.coding() == "acceptable"

    def test_fail_coding_sorted(self):
        report = aggregate(PASSING, full_verdicts(fails={8, 4, 9}))
        assert not report.accepted
        assert report.failed_ids == [4, 8, 9]
        assert report.coding() == "4,8,9"

    def test_missing_coverage_rejected(self):
        with pytest.raises(ValidationError):
            aggregate(PASSING, full_verdicts()[:4])

    def test_human_override_accepts(self):
        verdicts = full_verdicts(fails={6}) + [
            CriterionVerdict(6, "pass", "human:reviewer-1", rationale="actually fine")
        ]
        assert not aggregate(PASSING, verdicts, policy="deterministic_first").accepted
        assert aggregate(PASSING, verdicts, policy="human_overrides").accepted

    def test_human_verdict_recorded_side_by_side(self):
        verdicts = full_verdicts(fails={6}) + [
            CriterionVerdict(6, "pass", "human:reviewer-1")
        ]
        report = aggregate(PASSING, verdicts, policy="human_overrides")
        sixes = [v for v in report.verdicts if v.criterion == 6]
        assert len(sixes) == 2  # automated fail kept alongside the human pass

    def test_c9_both_halves_must_pass(self):
        verdicts = full_verdicts()
        verdicts.append(CriterionVerdict(9, "fail", "automated:evaluator",
                                         rationale="paraphrase overlap"))
        report = aggregate(PASSING, verdicts)
        assert report.failed_ids == [9]

    def test_no_vacuous_acceptance(self):
        report = aggregate(PASSING, full_verdicts())
        for n in range(1, 10):
            assert any(v.criterion == n and v.passed for v in report.verdicts)


class TestRunQualityChecks:
    def test_end_to_end_with_mock_evaluator(self):
        hub = ProviderHub()
        block = "\n".join(f"CRITERION {n}: PASS - ok." for n in range(1, 10))
        hub.configure("evaluator", MockBackend({"Check whether the following MCQ": block}))
        report = run_quality_checks(hub, PASSING)
        assert report.accepted

    def test_criterion_id_text_attached(self):
        c2 = CriterionId(2)
        assert "at least 3 sentences" in c2.text
        assert c2.machine_decidable
        assert not CriterionId(5).machine_decidable
        with pytest.raises(ValidationError):
            CriterionId(10)
