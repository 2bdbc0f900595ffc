"""The nine-criteria quality engine.

Criterion 2 (stem length / option length) and the lexical half of
criterion 9 (shared key terms between stem and keyed answer) are decided
deterministically. The remaining criteria are semantic judgments
delegated to an evaluator role; its structured PASS/FAIL block is parsed
into verdicts, and anything unparseable counts as FAIL because the
pipeline discards items it cannot certify.

For criterion 2 the sentence threshold is applied to the stem and
question concatenated: providers present them as one pre-option block
and the reference items only clear the 3-sentence bar when the question
sentence counts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import data, prompts
from .errors import ValidationError
from .items import McqItem, render_mcq
from .providers import ProviderHub
from .textutil import content_tokens, sentence_count, stem as stem_word, word_count

MACHINE_DECIDABLE = frozenset({2, 9})  # 9 only in its lexical half
SEMANTIC_CRITERIA = (1, 3, 4, 5, 6, 7, 8, 9)

MIN_STEM_SENTENCES = 3
MAX_OPTION_WORDS = 7

POLICIES = ("deterministic_first", "human_overrides")


@dataclass(frozen=True)
class CriterionId:
    """A criterion number 1-9 with its full rubric text attached."""

    value: int

    def __post_init__(self):
        if self.value not in range(1, 10):
            raise ValidationError(f"criterion id out of range: {self.value}")

    @property
    def text(self) -> str:
        return data.criteria_texts()[self.value]

    @property
    def machine_decidable(self) -> bool:
        return self.value in MACHINE_DECIDABLE


@dataclass(frozen=True)
class CriterionVerdict:
    criterion: int
    verdict: str  # pass | fail
    evaluator: str  # "deterministic" | "automated:<role>" | "human:<identity>"
    rationale: str = ""
    evidence: tuple[str, ...] = ()

    def __post_init__(self):
        if self.verdict not in ("pass", "fail"):
            raise ValidationError(f"verdict must be pass/fail, got {self.verdict!r}")
        if self.evaluator == "deterministic" and self.verdict == "fail" and not self.evidence:
            raise ValidationError("deterministic fail verdicts must carry evidence spans")

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def evaluator_kind(self) -> str:
        return self.evaluator.split(":", 1)[0]


@dataclass
class QualityReport:
    item_id: str
    verdicts: list[CriterionVerdict] = field(default_factory=list)
    policy: str = "deterministic_first"

    @property
    def failed_ids(self) -> list[int]:
        failed = set()
        for n in range(1, 10):
            governing = self._governing(n)
            if governing and not all(v.passed for v in governing):
                failed.add(n)
        return sorted(failed)

    @property
    def accepted(self) -> bool:
        return not self.failed_ids and self._covered()

    def _governing(self, n: int) -> list[CriterionVerdict]:
        mine = [v for v in self.verdicts if v.criterion == n]
        humans = [v for v in mine if v.evaluator_kind == "human"]
        if self.policy == "human_overrides" and humans:
            return [humans[-1]]
        return [v for v in mine if v.evaluator_kind != "human"]

    def _covered(self) -> bool:
        return all(self._governing(n) for n in range(1, 10))

    def coding(self) -> str:
        """Compact result coding: 'acceptable' or the failed ids, comma-joined."""
        return "acceptable" if self.accepted else ",".join(str(n) for n in self.failed_ids)


def check_criterion2(item: McqItem) -> CriterionVerdict:
    """Structural check: >=3 sentences before the options, 5 options of <=7 words."""
    evidence = []
    sentences = sentence_count(item.content_text())
    if sentences < MIN_STEM_SENTENCES:
        evidence.append(f"stem: {sentences} sentences")
    if len(item.options) != 5:
        evidence.append(f"options: {len(item.options)} given")
    for i, opt in enumerate(item.options):
        n = word_count(opt)
        if n > MAX_OPTION_WORDS:
            evidence.append(f"option {chr(65 + i)}: {n} words")
    if evidence:
        return CriterionVerdict(2, "fail", "deterministic",
                                rationale="stem/option length limits violated",
                                evidence=tuple(evidence))
    return CriterionVerdict(2, "pass", "deterministic",
                            rationale=f"{sentences} sentences, all options within "
                                      f"{MAX_OPTION_WORDS} words")


def _content_term_roots(text: str, stoplist: frozenset[str]) -> dict[str, set[str]]:
    """Map stemmed root -> original tokens, skipping stoplisted words."""
    roots: dict[str, set[str]] = {}
    for tok in content_tokens(text):
        if tok in stoplist:
            continue
        roots.setdefault(stem_word(tok), set()).add(tok)
    return roots


def check_criterion9_lexical(item: McqItem, stoplist: Optional[frozenset[str]] = None) -> CriterionVerdict:
    """Lexical half of criterion 9: exact/same-root terms shared between the
    stem+question and the keyed option must also appear in a distractor.

    Synonym and paraphrase overlap is out of scope here; that half is
    delegated to the semantic evaluator.
    """
    if stoplist is None:
        stoplist = data.stoplist() | data.general_terms()
    stem_roots = _content_term_roots(item.content_text(), stoplist)
    key_roots = _content_term_roots(item.correct_option, stoplist)
    distractor_roots = set()
    for d in item.distractors:
        distractor_roots.update(_content_term_roots(d, stoplist))
    unexempted = []
    for root in sorted(set(stem_roots) & set(key_roots)):
        if root not in distractor_roots:
            token = sorted(stem_roots[root] | key_roots[root])[0]
            unexempted.append(token)
    if unexempted:
        return CriterionVerdict(9, "fail", "deterministic",
                                rationale="stem and keyed option share key terms not "
                                          "represented in any distractor",
                                evidence=tuple(unexempted))
    return CriterionVerdict(9, "pass", "deterministic",
                            rationale="no unshared key terms between stem and keyed option")


_VERDICT_LINE = re.compile(
    r"^\s*(?:CRITERION\s*)?C?(\d)\s*[:.\-]\s*(PASS|FAIL)\b\s*[-–:]?\s*(.*)$",
    re.IGNORECASE,
)


def parse_evaluator_block(response: str) -> dict[int, tuple[str, str]]:
    """Extract {criterion: (pass|fail, rationale)} from a structured reply."""
    out: dict[int, tuple[str, str]] = {}
    for line in response.splitlines():
        m = _VERDICT_LINE.match(line)
        if m:
            out[int(m.group(1))] = (m.group(2).lower(), m.group(3).strip())
    return out


def evaluate_semantic_criteria(
    hub: ProviderHub,
    item: McqItem,
    criteria: Iterable[int] = SEMANTIC_CRITERIA,
    role: str = "evaluator",
) -> list[CriterionVerdict]:
    """One evaluator dispatch per item; unparseable answers become FAIL."""
    wanted = sorted(set(criteria))
    for n in wanted:
        CriterionId(n)  # range check
    prompt = prompts.evaluate_prompt(
        criteria_block=data.criteria_block(),
        item_text=render_mcq(item, mark_correct=True),
    )
    response, entry = hub.dispatch(role, prompt)
    parsed = parse_evaluator_block(response)
    verdicts = []
    for n in wanted:
        if n in parsed:
            verdict, rationale = parsed[n]
            verdicts.append(CriterionVerdict(n, verdict, f"automated:{role}",
                                             rationale=rationale or "(no rationale given)"))
        else:
            verdicts.append(CriterionVerdict(n, "fail", f"automated:{role}",
                                             rationale="evaluator response unparseable"))
    return verdicts


def aggregate(item: McqItem, verdicts: Iterable[CriterionVerdict],
              policy: str = "deterministic_first") -> QualityReport:
    """Combine verdicts into accept/reject with failed-criterion coding."""
    if policy not in POLICIES:
        raise ValidationError(f"unknown policy {policy!r}")
    report = QualityReport(item_id=item.id, verdicts=list(verdicts), policy=policy)
    if not report._covered():
        uncovered = [n for n in range(1, 10) if not report._governing(n)]
        raise ValidationError(f"missing criterion coverage for {uncovered}")
    return report


def run_quality_checks(
    hub: Optional[ProviderHub],
    item: McqItem,
    policy: str = "deterministic_first",
    role: str = "evaluator",
    human_verdicts: Iterable[CriterionVerdict] = (),
) -> QualityReport:
    """Deterministic checks plus (when a hub is given) semantic evaluation."""
    verdicts: list[CriterionVerdict] = [check_criterion2(item), check_criterion9_lexical(item)]
    if hub is not None:
        verdicts.extend(evaluate_semantic_criteria(hub, item, role=role))
    verdicts.extend(human_verdicts)
    return aggregate(item, verdicts, policy=policy)


def lint_deterministic(item: McqItem) -> list[CriterionVerdict]:
    """Just the machine-decidable checks, for offline linting."""
    return [check_criterion2(item), check_criterion9_lexical(item)]
