"""Canonical MCQ item model: parsing, rendering, and word-edit accounting.

An item is stem + question + exactly five options with one keyed answer.
Provider output arrives as flowing text with inline or per-line option
labels ("A)", "A.", "A:"); ``parse_mcq`` normalizes that into an
``McqItem`` or returns a ``ParseReport`` naming the missing pieces.
``render_mcq`` emits the canonical layout, and parse∘render is the
identity on valid items (compared by content).

The question is stored separately from the stem but the two are
concatenated wherever a metric treats the pre-option text as one block
(providers blur the boundary; see ``content_text``).
"""

from __future__ import annotations

import json
import re
import uuid
from dataclasses import dataclass, field, asdict, replace
from datetime import datetime, timezone
from typing import Optional, Union

from .errors import ValidationError
from .textutil import normalize_ws, sentence_spans, word_count

STATUSES = ("draft", "under_review", "accepted", "rejected")

_CORRECT_MARK = re.compile(r"\s*\(correct(?:\s+answer)?\)\s*", re.IGNORECASE)
_EXPLANATION = re.compile(r"(?:^|\n)\s*explanation\s*:?\s*", re.IGNORECASE)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class EditRecord:
    """One correction event: an adjustment prompt or a manual word edit."""

    kind: str  # adjustment_prompt | manual_edit
    word_delta: Optional[int] = None  # manual_edit only
    criterion_targeted: Optional[int] = None
    timestamp: str = field(default_factory=_now)

    def __post_init__(self):
        if self.kind not in ("adjustment_prompt", "manual_edit"):
            raise ValidationError(f"unknown edit kind: {self.kind!r}")
        if (self.kind == "manual_edit") != (self.word_delta is not None):
            raise ValidationError("word_delta present iff kind is manual_edit")
        if self.word_delta is not None and self.word_delta < 0:
            raise ValidationError("word_delta must be non-negative")


@dataclass(frozen=True)
class ProvenanceRecord:
    """Where an item came from: producing role, session, and transcripts."""

    source_role: str
    session_id: Optional[str] = None
    prompt_ids: tuple[str, ...] = ()
    created_at: str = field(default_factory=_now)
    edits: tuple[EditRecord, ...] = ()

    def with_edit(self, edit: EditRecord) -> "ProvenanceRecord":
        return replace(self, edits=self.edits + (edit,))


@dataclass(frozen=True)
class McqItem:
    """A parsed test item. Immutable; revisions create new values."""

    stem: str
    question: str
    options: tuple[str, ...]
    correct_index: int
    id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    explanation: Optional[str] = None
    discipline: str = ""
    education_level: str = ""
    topic: str = ""
    provenance: ProvenanceRecord = field(
        default_factory=lambda: ProvenanceRecord(source_role="human")
    )
    status: str = "draft"

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        validate_item(self)

    @property
    def correct_option(self) -> str:
        return self.options[self.correct_index]

    @property
    def distractors(self) -> tuple[str, ...]:
        return tuple(o for i, o in enumerate(self.options) if i != self.correct_index)

    def content_text(self) -> str:
        """Stem and question as one block, the way providers present them."""
        return f"{self.stem} {self.question}"

    def content_key(self) -> tuple:
        """Textual identity: what parse∘render must preserve."""
        return (self.stem, self.question, self.options, self.correct_index, self.explanation)


def validate_item(item: McqItem) -> None:
    if len(item.options) != 5:
        raise ValidationError(f"item must have exactly 5 options, got {len(item.options)}")
    if not (0 <= item.correct_index <= 4):
        raise ValidationError(f"correct_index out of range: {item.correct_index}")
    if not item.stem.strip():
        raise ValidationError("stem is empty")
    if not item.question.strip():
        raise ValidationError("question is empty")
    if not item.question.rstrip().endswith("?"):
        raise ValidationError("question must be a single interrogative sentence")
    if len(sentence_spans(item.question.strip())) != 1:
        raise ValidationError("question must be a single interrogative sentence")
    for i, opt in enumerate(item.options):
        if not opt.strip():
            raise ValidationError(f"option {chr(65 + i)} is empty")
    if len({o.strip() for o in item.options}) != len(item.options):
        raise ValidationError("option texts must be pairwise distinct")
    if item.status not in STATUSES:
        raise ValidationError(f"unknown status: {item.status!r}")
    if not item.provenance.source_role.strip():
        raise ValidationError("provenance source_role is empty")


@dataclass
class ParseReport:
    """Which structural elements of an MCQ text could not be found."""

    missing: list[str] = field(default_factory=list)
    detail: str = ""
    raw: str = ""

    @property
    def ok(self) -> bool:
        return not self.missing

    def summary(self) -> str:
        return "; ".join(self.missing) or "ok"


def _option_labels(n: int) -> list[str]:
    return [chr(ord("A") + i) for i in range(n)]


def _find_option_chain(text: str, labels: list[str]) -> Optional[list[re.Match]]:
    """First in-order chain of option markers A) B) ... covering all labels."""
    marker = re.compile(r"(?<![A-Za-z0-9(])([A-Z])[).:](?=\s)")
    by_label: dict[str, list[re.Match]] = {}
    for m in marker.finditer(text):
        by_label.setdefault(m.group(1), []).append(m)
    for first in by_label.get(labels[0], []):
        chain = [first]
        ok = True
        for lab in labels[1:]:
            nxt = next((m for m in by_label.get(lab, []) if m.start() > chain[-1].start()), None)
            if nxt is None:
                ok = False
                break
            chain.append(nxt)
        if ok:
            return chain
    return None


def parse_mcq(
    raw: str,
    expected_options: int = 5,
    *,
    item_id: Optional[str] = None,
    discipline: str = "",
    education_level: str = "",
    topic: str = "",
    provenance: Optional[ProvenanceRecord] = None,
    status: str = "draft",
) -> Union[McqItem, ParseReport]:
    """Parse one MCQ text into an item, or report what was not found.

    The stem is all text before the option list, the question is the
    final interrogative sentence of that text, and the keyed option is
    the single one carrying a "(correct)" marker. A trailing
    "Explanation:" paragraph after the last option is captured.
    """
    text = raw.strip()
    if not text:
        return ParseReport(missing=["input text"], raw=raw)
    labels = _option_labels(expected_options)
    report = ParseReport(raw=raw)

    chain = _find_option_chain(text, labels)
    if chain is None:
        # name the first label that breaks the chain for the report
        found = set()
        partial = _find_option_chain(text, labels[:1])
        if partial:
            found.add(labels[0])
            for k in range(2, expected_options + 1):
                if _find_option_chain(text, labels[:k]):
                    found.add(labels[k - 1])
                else:
                    break
        for lab in labels:
            if lab not in found:
                report.missing.append(f"option {lab}")
        return report

    # text past the final option; peel off an Explanation paragraph if present
    tail_start = chain[-1].end()
    tail = text[tail_start:]
    explanation = None
    expl_match = _EXPLANATION.search(tail)
    option_texts = []
    for i, m in enumerate(chain):
        begin = m.end()
        end = chain[i + 1].start() if i + 1 < len(chain) else len(text)
        option_texts.append(text[begin:end])
    if expl_match:
        explanation = tail[expl_match.end():].strip() or None
        option_texts[-1] = tail[: expl_match.start()]

    # one more label following the last expected option means extra options
    extra = re.match(r"\s*(" + re.escape(chr(ord(labels[-1][0]) + 1)) + r")[).:]\s", option_texts[-1])
    if extra or _find_option_chain(option_texts[-1], [chr(ord(labels[-1][0]) + 1)]):
        report.missing.append(f"exactly {expected_options} options (found more)")
        return report

    correct_index = None
    cleaned = []
    marker_count = 0
    for i, opt in enumerate(option_texts):
        hits = _CORRECT_MARK.findall(opt)
        marker_count += len(hits)
        if hits:
            correct_index = i
        cleaned.append(normalize_ws(_CORRECT_MARK.sub(" ", opt)))
    if marker_count == 0:
        report.missing.append("correct-option marker")
    elif marker_count > 1:
        report.missing.append("single correct-option marker (found several)")

    for i, opt in enumerate(cleaned):
        if not opt:
            report.missing.append(f"option {labels[i]} text")
    if len(set(cleaned)) != len(cleaned):
        report.missing.append("distinct option texts")

    pre = text[: chain[0].start()].strip()
    stem, question = _split_stem_question(pre)
    if not question:
        report.missing.append("interrogative question sentence")
    if not stem:
        report.missing.append("stem")

    if report.missing:
        return report

    kwargs = {}
    if item_id is not None:
        kwargs["id"] = item_id
    return McqItem(
        stem=stem,
        question=question,
        options=tuple(cleaned),
        correct_index=correct_index,
        explanation=explanation,
        discipline=discipline,
        education_level=education_level,
        topic=topic,
        provenance=provenance or ProvenanceRecord(source_role="human"),
        status=status,
        **kwargs,
    )


def _split_stem_question(pre: str) -> tuple[str, str]:
    """Split pre-option text into stem and final interrogative sentence."""
    spans = sentence_spans(pre)
    q_span = None
    for a, b in spans:
        if pre[a:b].rstrip().endswith("?"):
            q_span = (a, b)
    if q_span is None:
        return pre.strip(), ""
    question = pre[q_span[0]: q_span[1]].strip()
    stem = (pre[: q_span[0]].strip() + " " + pre[q_span[1]:].strip()).strip()
    return stem, question


def render_mcq(item: McqItem, *, mark_correct: bool = True, include_explanation: bool = True) -> str:
    """Emit the canonical text layout; inverse of parse_mcq on valid items."""
    validate_item(item)
    lines = [item.stem, "", item.question, ""]
    for i, opt in enumerate(item.options):
        suffix = " (correct)" if mark_correct and i == item.correct_index else ""
        lines.append(f"{chr(65 + i)}) {opt}{suffix}")
    if include_explanation and item.explanation:
        lines.append("")
        lines.append(f"Explanation: {item.explanation}")
    return "\n".join(lines)


def word_edit_distance(before: str, after: str) -> int:
    """Word-level Levenshtein distance over whitespace tokens, case-sensitive."""
    a = before.split()
    b = after.split()
    # trim common prefix/suffix before the DP
    while a and b and a[0] == b[0]:
        a, b = a[1:], b[1:]
    while a and b and a[-1] == b[-1]:
        a, b = a[:-1], b[:-1]
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, tok in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, other in enumerate(b, 1):
            cost = 0 if tok == other else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1]


_BLOCK_HEADER = re.compile(
    r"^\s*(?:(?:MCQ|Item|Question)\s*#?\d+|\d+)\s*[.:)]?\s*$", re.IGNORECASE
)
_RULE = re.compile(r"^\s*(?:-{3,}|={3,}|\*{3,})\s*$")


def split_mcq_blocks(text: str, expected_options: int = 5) -> list[str]:
    """Split a multi-item provider response into per-item text blocks.

    Prefers explicit numbered headers or horizontal rules; otherwise
    falls back to grouping paragraphs so each block holds one complete
    option run (trailing Explanation paragraphs stay with their block).
    """
    lines = text.splitlines()
    header_idx = [i for i, ln in enumerate(lines) if _BLOCK_HEADER.match(ln) or _RULE.match(ln)]
    if len(header_idx) >= 2 or (len(header_idx) == 1 and header_idx[0] == 0):
        blocks = []
        bounds = header_idx + [len(lines)]
        if header_idx[0] != 0 and "\n".join(lines[: header_idx[0]]).strip():
            blocks.append("\n".join(lines[: header_idx[0]]))
        for a, b in zip(bounds, bounds[1:]):
            chunk = "\n".join(lines[a + 1: b]).strip()
            if chunk:
                blocks.append(chunk)
        if blocks:
            return blocks

    labels = _option_labels(expected_options)
    paragraphs = [p for p in re.split(r"\n\s*\n", text) if p.strip()]
    blocks = []
    current: list[str] = []
    complete = False
    for para in paragraphs:
        if complete and not _EXPLANATION.match(para.strip()):
            blocks.append("\n\n".join(current))
            current = []
            complete = False
        current.append(para)
        if _find_option_chain("\n\n".join(current), labels):
            complete = True
    if current:
        blocks.append("\n\n".join(current))
    return blocks


# --- canonical line-delimited item store ---------------------------------


def item_to_dict(item: McqItem) -> dict:
    d = asdict(item)
    d["options"] = list(item.options)
    d["provenance"]["prompt_ids"] = list(item.provenance.prompt_ids)
    d["provenance"]["edits"] = [asdict(e) for e in item.provenance.edits]
    return d


def item_from_dict(d: dict) -> McqItem:
    prov = d.get("provenance") or {}
    edits = tuple(EditRecord(**e) for e in prov.get("edits", []))
    provenance = ProvenanceRecord(
        source_role=prov.get("source_role", "human"),
        session_id=prov.get("session_id"),
        prompt_ids=tuple(prov.get("prompt_ids", ())),
        created_at=prov.get("created_at", _now()),
        edits=edits,
    )
    return McqItem(
        stem=d["stem"],
        question=d["question"],
        options=tuple(d["options"]),
        correct_index=d["correct_index"],
        id=d["id"],
        explanation=d.get("explanation"),
        discipline=d.get("discipline", ""),
        education_level=d.get("education_level", ""),
        topic=d.get("topic", ""),
        provenance=provenance,
        status=d.get("status", "draft"),
    )


def save_items(items, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item_to_dict(item), ensure_ascii=False) + "\n")


def load_items(path) -> list[McqItem]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(item_from_dict(json.loads(line)))
    return out
