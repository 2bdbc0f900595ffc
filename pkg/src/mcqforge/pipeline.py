"""Staged generation state machines with human review gates.

Prototype flow: a concept-map prompt (P1) feeds gate G1, where the
reviewer picks a concept node; a question+answer prompt (P2) feeds gate
G2, where one candidate is selected; the MCQ prompt (P3) then fans out
to every item-writer role and each parsed candidate is adjudicated at
gate G3. No dispatch for a stage happens before a gate decision closes
the previous one, and sessions are single-writer.

Series flow starts from an accepted prototype and lands directly at G3
for per-candidate review. The one-step baseline is a single direct
dispatch with no gates, kept as a session so its drafts stay traceable.

Correction budgets are per item: at most 4 adjustment prompts and at
most 10 manually edited words; operations that would exceed a cap are
refused with the item untouched. Adjustment prompts count when a
revision is successfully applied (the transcript still records failed
attempts).
"""

from __future__ import annotations

import re
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from typing import Optional, Union

from . import data, prompts
from .errors import (
    BudgetExhaustedError,
    ParseFailureError,
    ProviderError,
    SessionConflictError,
    UnknownIdError,
    ValidationError,
    WrongGateError,
)
from .items import (
    EditRecord,
    McqItem,
    ParseReport,
    ProvenanceRecord,
    parse_mcq,
    render_mcq,
    split_mcq_blocks,
    word_edit_distance,
)
from .providers import ITEM_WRITER_ROLES, ProviderHub
from .textutil import next_seq

MODES = ("prototype", "series_example_based", "series_concept_derived", "one_step")
GATES = ("G1_concept_map", "G2_question_answer", "G3_item")
STAGES = ("gate_G1", "gate_G2", "gate_G3", "completed", "rejected", "failed")

MAX_ADJUSTMENT_PROMPTS = 4
MAX_MANUAL_WORDS = 10

_GATE_FOR_STAGE = {"gate_G1": "G1_concept_map", "gate_G2": "G2_question_answer",
                   "gate_G3": "G3_item"}
_STAGE_INDEX = {"gate_G1": 1, "gate_G2": 2, "gate_G3": 3}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class GenerationInput:
    kind: str  # textbook_fragment | learning_objective
    body: str
    topic: str
    discipline: str
    education_level: str
    speciality: str = ""
    requested_items: int = 1

    def __post_init__(self):
        if self.kind not in ("textbook_fragment", "learning_objective"):
            raise ValidationError(f"unknown input kind {self.kind!r}")
        if not self.body.strip():
            raise ValidationError("input body is empty")
        if self.requested_items < 1:
            raise ValidationError("requested_items must be >= 1")


@dataclass(frozen=True)
class GateDecision:
    gate: str
    action: str  # approve | edit | select | reject
    reviewer: str = "reviewer"
    text: Optional[str] = None  # edit payload
    selection: Union[str, int, None] = None  # node label (G1) or candidate number (G2)
    item_id: Optional[str] = None  # G3 target
    timestamp: str = field(default_factory=_now)
    seq: int = field(default_factory=next_seq)

    def __post_init__(self):
        if self.gate not in GATES:
            raise ValidationError(f"unknown gate {self.gate!r}")
        if self.action not in ("approve", "edit", "select", "reject"):
            raise ValidationError(f"unknown gate action {self.action!r}")
        if self.action == "select" and self.gate == "G3_item":
            raise ValidationError("select is only valid at G1 (concept) and G2 (candidate)")
        if self.action == "select" and self.selection is None:
            raise ValidationError("select requires a selection payload")
        if self.action == "edit" and not (self.text and self.text.strip()):
            raise ValidationError("edit requires replacement text")


@dataclass
class BudgetCounter:
    adjustment_prompts_used: int = 0
    manual_words_edited: int = 0

    def charge_adjustment(self) -> None:
        if self.adjustment_prompts_used >= MAX_ADJUSTMENT_PROMPTS:
            raise BudgetExhaustedError(
                f"adjustment budget exhausted ({MAX_ADJUSTMENT_PROMPTS} prompts used)"
            )
        self.adjustment_prompts_used += 1

    def check_manual(self, delta: int) -> None:
        if self.manual_words_edited + delta > MAX_MANUAL_WORDS:
            raise BudgetExhaustedError(
                f"manual edit of {delta} words would exceed the "
                f"{MAX_MANUAL_WORDS}-word budget "
                f"({self.manual_words_edited} already used)"
            )

    def charge_manual(self, delta: int) -> None:
        self.check_manual(delta)
        self.manual_words_edited += delta


@dataclass
class QaCandidate:
    number: int
    question: str
    answer: str

    def render(self) -> str:
        return f"Question {self.number}: {self.question} Answer: {self.answer}"


_QA_BLOCK = re.compile(
    r"Question\s+(\d+)\s*[:.]\s*(.*?)\s*Answer\s*[:.]\s*(.+?)(?=(?:\n\s*\n|\n)\s*Question\s+\d+\s*[:.]|\Z)",
    re.DOTALL,
)


def parse_qa_candidates(text: str) -> list[QaCandidate]:
    out = []
    for m in _QA_BLOCK.finditer(text):
        question = " ".join(m.group(2).split())
        answer = " ".join(m.group(3).split())
        if question and answer:
            out.append(QaCandidate(int(m.group(1)), question, answer))
    return out


@dataclass
class StageArtifact:
    text: str
    transcript_ids: list[str] = field(default_factory=list)
    stage_index: int = 0


@dataclass
class PipelineSession:
    mode: str
    input: Optional[GenerationInput] = None
    prototype_id: Optional[str] = None
    id: str = field(default_factory=lambda: f"s-{uuid.uuid4().hex[:10]}")
    stage: str = "gate_G1"
    artifacts: dict = field(default_factory=dict)
    gate_log: list[GateDecision] = field(default_factory=list)
    budgets: dict[str, BudgetCounter] = field(default_factory=dict)
    items: dict[str, McqItem] = field(default_factory=dict)
    parse_reports: list[ParseReport] = field(default_factory=list)
    qa_candidates: list[QaCandidate] = field(default_factory=list)
    selected_concept: Optional[str] = None
    selected_qa: Optional[QaCandidate] = None
    pending: Optional[dict] = None  # set while stage == failed; drives resume
    created_at: str = field(default_factory=_now)

    @property
    def current_gate(self) -> Optional[str]:
        return _GATE_FOR_STAGE.get(self.stage)

    def budget_for(self, item_id: str) -> BudgetCounter:
        return self.budgets.setdefault(item_id, BudgetCounter())

    def open_item_ids(self) -> list[str]:
        return [i for i, item in self.items.items() if item.status == "under_review"]


def resolve_concept_node(concept_map: str, selection: str) -> str:
    """Find the concept-map line naming the selection; returns the full
    node label as written (numbering kept, bullet markers stripped)."""
    wanted = selection.strip().lower()
    for line in concept_map.splitlines():
        cleaned = line.strip().lstrip("-*•●○▪ ").strip()
        if wanted and wanted in cleaned.lower():
            return cleaned
    raise ValidationError(f"concept {selection!r} not found in the concept map")


class Pipeline:
    """Session orchestrator over a provider hub. Single writer per session."""

    def __init__(self, hub: ProviderHub, writer_roles: Optional[list[str]] = None,
                 one_step_role: str = "item_writer_1"):
        self.hub = hub
        self.writer_roles = list(writer_roles) if writer_roles else list(ITEM_WRITER_ROLES)
        self.one_step_role = one_step_role
        self.sessions: dict[str, PipelineSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # -- plumbing ------------------------------------------------------------

    def session(self, session_id: str) -> PipelineSession:
        if session_id not in self.sessions:
            raise UnknownIdError(f"unknown session {session_id}")
        return self.sessions[session_id]

    def find_item(self, item_id: str) -> tuple[PipelineSession, McqItem]:
        for session in self.sessions.values():
            if item_id in session.items:
                return session, session.items[item_id]
        raise UnknownIdError(f"unknown item {item_id}")

    def _register(self, session: PipelineSession) -> PipelineSession:
        with self._registry_lock:
            self.sessions[session.id] = session
            self._locks[session.id] = threading.Lock()
        return session

    def _locked(self, session_id: str) -> threading.Lock:
        lock = self._locks[session_id]
        if not lock.acquire(blocking=False):
            raise SessionConflictError(f"session {session_id} has a concurrent writer")
        return lock

    # -- prototype flow --------------------------------------------------------

    def start_prototype_session(self, gen_input: GenerationInput) -> PipelineSession:
        """Dispatch the concept-map prompt and open gate G1."""
        session = self._register(PipelineSession(mode="prototype", input=gen_input))
        self._dispatch_concept_map(session)
        return session

    def _dispatch_concept_map(self, session: PipelineSession) -> None:
        gen_input = session.input
        prompt = prompts.concept_map_prompt(
            gen_input.kind,
            education_level=gen_input.education_level,
            discipline=gen_input.discipline,
            input_body=gen_input.body,
        )
        try:
            response, entry = self.hub.dispatch("concept_mapper", prompt)
        except ProviderError:
            session.stage = "failed"
            session.pending = {"op": "start_prototype"}
            return
        session.artifacts["concept_map"] = StageArtifact(
            text=response, transcript_ids=[entry.id], stage_index=1
        )
        session.stage = "gate_G1"
        session.pending = None

    def submit_gate_decision(self, session_id: str, decision: GateDecision) -> PipelineSession:
        session = self.session(session_id)
        lock = self._locked(session_id)
        try:
            gate = session.current_gate
            if gate is None:
                raise WrongGateError(
                    f"session is {session.stage}; no gate is open"
                )
            if decision.gate != gate:
                raise WrongGateError(
                    f"session is at {gate}, decision targets {decision.gate}"
                )
            handler = {
                "G1_concept_map": self._decide_g1,
                "G2_question_answer": self._decide_g2,
                "G3_item": self._decide_g3,
            }[gate]
            handler(session, decision)
            return session
        finally:
            lock.release()

    def _decide_g1(self, session: PipelineSession, decision: GateDecision) -> None:
        artifact = session.artifacts["concept_map"]
        if decision.action == "reject":
            session.stage = "rejected"
            session.gate_log.append(decision)
            return
        if decision.action == "select":
            concept = resolve_concept_node(artifact.text, str(decision.selection))
        elif decision.action == "edit":
            artifact.text = decision.text
            concept = decision.text.strip()
        else:  # approve: the whole reviewed map is the concept context
            concept = artifact.text.strip()
        self._advance_to_g2(session, concept)
        session.gate_log.append(decision)

    def _advance_to_g2(self, session: PipelineSession, concept: str) -> None:
        session.selected_concept = concept
        response, entry = self.hub.dispatch("question_writer", prompts.questions_prompt(concept))
        candidates = parse_qa_candidates(response)
        if not candidates:
            raise ParseFailureError("no question/answer candidates found in response")
        session.artifacts["qa_candidates"] = StageArtifact(
            text=response, transcript_ids=[entry.id], stage_index=2
        )
        session.qa_candidates = candidates
        session.stage = "gate_G2"

    def _decide_g2(self, session: PipelineSession, decision: GateDecision) -> None:
        if decision.action == "reject":
            session.stage = "rejected"
            session.gate_log.append(decision)
            return
        if decision.action == "edit":
            candidates = parse_qa_candidates(decision.text)
            if not candidates:
                raise ParseFailureError("edited text contains no question/answer candidates")
            session.artifacts["qa_candidates"].text = decision.text
            session.qa_candidates = candidates
            session.gate_log.append(decision)
            if len(candidates) == 1:
                self._fan_out(session, candidates[0])
            return  # several candidates remain: gate stays open for a select
        if decision.action == "approve":
            if len(session.qa_candidates) != 1:
                raise ValidationError(
                    "approve at G2 needs exactly one candidate; select one instead"
                )
            chosen = session.qa_candidates[0]
        else:
            try:
                number = int(decision.selection)
            except (TypeError, ValueError):
                raise ValidationError(f"G2 selection must be a candidate number, got "
                                      f"{decision.selection!r}")
            chosen = next((c for c in session.qa_candidates if c.number == number), None)
            if chosen is None:
                raise ValidationError(f"candidate {number} out of range")
        self._fan_out(session, chosen)
        session.gate_log.append(decision)

    def _fan_out(self, session: PipelineSession, chosen: QaCandidate) -> None:
        """P3 to every writer role concurrently; join before G3 opens."""
        session.selected_qa = chosen
        prompt = prompts.mcq_prompt(chosen.render(), data.criteria_block())
        artifact = StageArtifact(text="", stage_index=3)

        def run(role):
            return role, self.hub.dispatch(role, prompt)

        with ThreadPoolExecutor(max_workers=max(len(self.writer_roles), 1)) as pool:
            results = list(pool.map(run, self.writer_roles))
        texts = []
        for role, (response, entry) in results:
            artifact.transcript_ids.append(entry.id)
            texts.append(f"[{role}]\n{response}")
            parsed = parse_mcq(
                response,
                discipline=session.input.discipline if session.input else "",
                education_level=session.input.education_level if session.input else "",
                topic=session.input.topic if session.input else "",
                provenance=ProvenanceRecord(
                    source_role=role, session_id=session.id, prompt_ids=(entry.id,)
                ),
                status="under_review",
            )
            if isinstance(parsed, McqItem):
                session.items[parsed.id] = parsed
                session.budget_for(parsed.id)
            else:
                session.parse_reports.append(parsed)
        artifact.text = "\n\n".join(texts)
        session.artifacts["candidate_items"] = artifact
        session.stage = "gate_G3"

    def _decide_g3(self, session: PipelineSession, decision: GateDecision) -> None:
        if decision.action == "reject" and decision.item_id is None:
            # reject the whole remaining batch
            for item_id in session.open_item_ids():
                session.items[item_id] = replace(session.items[item_id], status="rejected")
            session.stage = "rejected" if not self._any_accepted(session) else "completed"
            session.gate_log.append(decision)
            return
        if decision.item_id is None:
            raise ValidationError("G3 decisions must name an item_id")
        item = session.items.get(decision.item_id)
        if item is None:
            raise UnknownIdError(f"item {decision.item_id} is not in this session")
        if item.status != "under_review":
            raise ValidationError(f"item {decision.item_id} already closed ({item.status})")
        if decision.action == "approve":
            session.items[item.id] = replace(item, status="accepted")
        elif decision.action == "reject":
            session.items[item.id] = replace(item, status="rejected")
        else:  # edit: a manual correction that also closes the item
            revised = self._manual_edit(session, item, decision.text)
            session.items[item.id] = replace(revised, status="accepted")
        session.gate_log.append(decision)
        if not session.open_item_ids():
            session.stage = "completed" if self._any_accepted(session) else "rejected"

    @staticmethod
    def _any_accepted(session: PipelineSession) -> bool:
        return any(i.status == "accepted" for i in session.items.values())

    # -- series and one-step ---------------------------------------------------

    def start_series_session(self, prototype: McqItem, mode: str, count: int = 5,
                             role: Optional[str] = None) -> PipelineSession:
        if mode not in ("example_based", "concept_derived"):
            raise ValidationError(f"unknown series mode {mode!r}")
        if prototype.status != "accepted":
            raise ValidationError("series prototypes must be accepted items")
        if count < 1:
            raise ValidationError("series count must be >= 1")
        session = self._register(
            PipelineSession(mode=f"series_{mode}", prototype_id=prototype.id)
        )
        role = role or self.one_step_role
        self._dispatch_series(session, prototype, mode, count, role)
        return session

    def _dispatch_series(self, session: PipelineSession, prototype: McqItem,
                         mode: str, count: int, role: str) -> None:
        prompt = prompts.series_prompt(
            mode,
            prototype_item=render_mcq(prototype, mark_correct=True),
            count=count,
            discipline=prototype.discipline or "the same discipline",
            education_level=prototype.education_level or "the same level",
        )
        try:
            response, entry = self.hub.dispatch(role, prompt)
        except ProviderError:
            session.stage = "failed"
            session.pending = {"op": "series", "mode": mode, "count": count,
                               "role": role, "prototype": prototype}
            return
        artifact = StageArtifact(text=response, transcript_ids=[entry.id], stage_index=3)
        session.artifacts["candidate_items"] = artifact
        for block in split_mcq_blocks(response):
            parsed = parse_mcq(
                block,
                discipline=prototype.discipline,
                education_level=prototype.education_level,
                topic=prototype.topic,
                provenance=ProvenanceRecord(
                    source_role=role, session_id=session.id, prompt_ids=(entry.id,)
                ),
                status="under_review",
            )
            if isinstance(parsed, McqItem):
                session.items[parsed.id] = parsed
                session.budget_for(parsed.id)
            else:
                session.parse_reports.append(parsed)
        session.stage = "gate_G3"
        session.pending = None

    def run_one_step(self, gen_input: GenerationInput) -> PipelineSession:
        """Single direct dispatch, drafts returned without gates."""
        session = self._register(PipelineSession(mode="one_step", input=gen_input))
        self._dispatch_one_step(session)
        return session

    def _dispatch_one_step(self, session: PipelineSession) -> None:
        gen_input = session.input
        prompt = prompts.one_step_prompt(
            count=gen_input.requested_items,
            education_level=gen_input.education_level,
            speciality=gen_input.speciality or gen_input.topic,
            discipline=gen_input.discipline,
        )
        try:
            response, entry = self.hub.dispatch(self.one_step_role, prompt)
        except ProviderError:
            session.stage = "failed"
            session.pending = {"op": "one_step"}
            return
        session.artifacts["candidate_items"] = StageArtifact(
            text=response, transcript_ids=[entry.id], stage_index=1
        )
        for block in split_mcq_blocks(response):
            parsed = parse_mcq(
                block,
                discipline=gen_input.discipline,
                education_level=gen_input.education_level,
                topic=gen_input.topic,
                provenance=ProvenanceRecord(
                    source_role=self.one_step_role, session_id=session.id,
                    prompt_ids=(entry.id,),
                ),
                status="draft",
            )
            if isinstance(parsed, McqItem):
                session.items[parsed.id] = parsed
            else:
                session.parse_reports.append(parsed)
        session.stage = "completed"
        session.pending = None

    def resume_session(self, session_id: str) -> PipelineSession:
        """Retry the dispatch that failed, keeping the session id."""
        session = self.session(session_id)
        lock = self._locked(session_id)
        try:
            if session.stage != "failed" or not session.pending:
                raise ValidationError("session is not in a resumable failed state")
            pending = session.pending
            if pending["op"] == "start_prototype":
                self._dispatch_concept_map(session)
            elif pending["op"] == "one_step":
                self._dispatch_one_step(session)
            elif pending["op"] == "series":
                self._dispatch_series(session, pending["prototype"], pending["mode"],
                                      pending["count"], pending["role"])
            else:
                raise ValidationError(f"unknown pending op {pending['op']!r}")
            return session
        finally:
            lock.release()

    # -- correction budget -------------------------------------------------------

    def apply_adjustment_prompt(self, session_id: str, item_id: str,
                                criterion_id: int) -> McqItem:
        """Targeted revision prompt naming a criterion's full rubric text."""
        session = self.session(session_id)
        lock = self._locked(session_id)
        try:
            item = session.items.get(item_id)
            if item is None:
                raise UnknownIdError(f"item {item_id} is not in session {session_id}")
            if item.status != "under_review":
                raise ValidationError(f"item {item_id} is not under review")
            budget = session.budget_for(item_id)
            if budget.adjustment_prompts_used >= MAX_ADJUSTMENT_PROMPTS:
                raise BudgetExhaustedError(
                    f"adjustment budget exhausted ({MAX_ADJUSTMENT_PROMPTS} prompts used)"
                )
            criterion_text = data.criteria_texts().get(criterion_id)
            if criterion_text is None:
                raise ValidationError(f"unknown criterion id {criterion_id}")
            prompt = prompts.adjust_prompt(
                criterion_id=criterion_id,
                criterion_text=criterion_text,
                item_text=render_mcq(item, mark_correct=True),
            )
            response, entry = self.hub.dispatch(item.provenance.source_role, prompt)
            revised = parse_mcq(
                response,
                item_id=item.id,
                discipline=item.discipline,
                education_level=item.education_level,
                topic=item.topic,
                provenance=replace(
                    item.provenance, prompt_ids=item.provenance.prompt_ids + (entry.id,)
                ).with_edit(EditRecord(kind="adjustment_prompt", criterion_targeted=criterion_id)),
                status="under_review",
            )
            if isinstance(revised, ParseReport):
                raise ParseFailureError(
                    f"revision unparseable: {revised.summary()}", report=revised
                )
            budget.charge_adjustment()
            session.items[item_id] = revised
            return revised
        finally:
            lock.release()

    def apply_manual_edit(self, session_id: str, item_id: str, new_text: str) -> McqItem:
        """Replace an item's text by hand, charged against the word budget."""
        session = self.session(session_id)
        lock = self._locked(session_id)
        try:
            item = session.items.get(item_id)
            if item is None:
                raise UnknownIdError(f"item {item_id} is not in session {session_id}")
            if item.status != "under_review":
                raise ValidationError(f"item {item_id} is not under review")
            revised = self._manual_edit(session, item, new_text)
            session.items[item_id] = revised
            return revised
        finally:
            lock.release()

    def _manual_edit(self, session: PipelineSession, item: McqItem, new_text: str) -> McqItem:
        delta = word_edit_distance(render_mcq(item, mark_correct=True), new_text)
        budget = session.budget_for(item.id)
        budget.check_manual(delta)  # refuse before touching anything
        revised = parse_mcq(
            new_text,
            item_id=item.id,
            discipline=item.discipline,
            education_level=item.education_level,
            topic=item.topic,
            provenance=item.provenance.with_edit(
                EditRecord(kind="manual_edit", word_delta=delta)
            ),
            status="under_review",
        )
        if isinstance(revised, ParseReport):
            raise ParseFailureError(f"edited text unparseable: {revised.summary()}",
                                    report=revised)
        budget.charge_manual(delta)
        return revised

    # -- audit -------------------------------------------------------------------

    def audit_export(self, session_id: str) -> dict:
        """Everything needed to reconstruct provenance for one session."""
        session = self.session(session_id)
        transcript_ids = set()
        for artifact in session.artifacts.values():
            transcript_ids.update(artifact.transcript_ids)
        for item in session.items.values():
            transcript_ids.update(item.provenance.prompt_ids)
        entries = [e for e in self.hub.transcripts.entries() if e.id in transcript_ids]
        return {
            "session": {
                "id": session.id,
                "mode": session.mode,
                "stage": session.stage,
                "created_at": session.created_at,
                "selected_concept": session.selected_concept,
                "selected_qa": asdict(session.selected_qa) if session.selected_qa else None,
            },
            "gate_log": [asdict(d) for d in session.gate_log],
            "transcripts": [asdict(e) for e in sorted(entries, key=lambda e: e.seq)],
            "items": {
                item_id: {
                    "status": item.status,
                    "provenance": asdict(item.provenance),
                    "text": render_mcq(item, mark_correct=True),
                }
                for item_id, item in session.items.items()
            },
            "budgets": {
                item_id: asdict(counter) for item_id, counter in session.budgets.items()
            },
            "parse_reports": [r.missing for r in session.parse_reports],
        }
