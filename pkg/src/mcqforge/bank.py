"""Item banks: open/secret pools, concept slots, and exam-variant assembly.

Each concept slot pairs one accepted prototype (open pool, usable for
formative practice) with a series of accepted look-alikes (secret pool,
reserved for exams). Variants draw one secret item per slot; strict mode
refuses any item reuse across variants because reused items leak.

Persistence is a bank JSON file plus the line-delimited item store; the
evidence payloads referenced from slots live in a sibling
``<bank>.evidence.json``.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import UnknownIdError, ValidationError
from .items import McqItem, item_from_dict, item_to_dict, load_items, render_mcq, save_items
from .similarity import ConceptualMatchReport


@dataclass
class ConceptSlot:
    concept: str
    prototype_id: str
    series_ids: list[str] = field(default_factory=list)
    evidence_refs: list[str] = field(default_factory=list)


@dataclass
class TestVariant:
    variant_id: str
    item_ids: list[str]


class ItemBank:
    """Mutable bank; the owning service serializes writes per bank."""

    def __init__(self, bank_id: str, discipline: str = ""):
        self.id = bank_id
        self.discipline = discipline
        self.slots: list[ConceptSlot] = []
        self.pools: dict[str, set[str]] = {"open": set(), "secret": set()}
        self.items: dict[str, McqItem] = {}
        self.evidence: dict[str, dict] = {}

    # -- structure ---------------------------------------------------------

    def slot_for(self, concept: str) -> Optional[ConceptSlot]:
        return next((s for s in self.slots if s.concept == concept), None)

    def pool_of(self, item_id: str) -> Optional[str]:
        for pool, ids in self.pools.items():
            if item_id in ids:
                return pool
        return None

    def add_prototype(self, concept: str, item: McqItem) -> ConceptSlot:
        """New concept slot seeded with an accepted prototype (open pool)."""
        if item.status != "accepted":
            raise ValidationError(f"prototype {item.id} is not accepted (status {item.status})")
        if self.slot_for(concept) is not None:
            raise ValidationError(f"concept {concept!r} already has a slot")
        if item.id in self.items:
            raise ValidationError(f"item id {item.id} already in bank")
        slot = ConceptSlot(concept=concept, prototype_id=item.id)
        self.slots.append(slot)
        self.items[item.id] = item
        self.pools["open"].add(item.id)
        return slot

    def attach_series(self, concept: str, items: Iterable[McqItem],
                      evidence: ConceptualMatchReport) -> ConceptSlot:
        """Append matched, accepted items to a slot's series (secret pool)."""
        slot = self.slot_for(concept)
        if slot is None:
            raise UnknownIdError(f"no slot for concept {concept!r}")
        items = list(items)
        if evidence.prototype_id != slot.prototype_id:
            raise ValidationError("evidence refers to a different prototype")
        for item in items:
            if item.status != "accepted":
                raise ValidationError(f"series item {item.id} is not accepted")
            if item.id in self.items:
                raise ValidationError(f"item id collision: {item.id}")
            if not evidence.same_concept.get(item.id, False):
                raise ValidationError(
                    f"item {item.id} lacks a positive conceptual match to the prototype"
                )
        ref = f"ev-{len(self.evidence) + 1:04d}"
        self.evidence[ref] = {
            "kind": "conceptual_match",
            "prototype_id": evidence.prototype_id,
            "candidate_ids": evidence.candidate_ids,
            "same_concept": evidence.same_concept,
            "concepts": evidence.concepts,
        }
        for item in items:
            self.items[item.id] = item
            self.pools["secret"].add(item.id)
            slot.series_ids.append(item.id)
        slot.evidence_refs.append(ref)
        return slot

    def store_matrix_evidence(self, concept: str, payload: dict) -> str:
        slot = self.slot_for(concept)
        if slot is None:
            raise UnknownIdError(f"no slot for concept {concept!r}")
        ref = f"ev-{len(self.evidence) + 1:04d}"
        self.evidence[ref] = {"kind": "similarity_matrix", **payload}
        slot.evidence_refs.append(ref)
        return ref

    def check_invariants(self) -> None:
        if self.pools["open"] & self.pools["secret"]:
            raise ValidationError("pools overlap: an item is both open and secret")
        labeled = self.pools["open"] | self.pools["secret"]
        if set(self.items) != labeled:
            raise ValidationError("every bank item must carry exactly one pool label")
        for slot in self.slots:
            if slot.prototype_id not in self.pools["open"]:
                raise ValidationError(f"prototype of {slot.concept!r} is not in the open pool")
            for sid in slot.series_ids:
                if sid not in self.pools["secret"]:
                    raise ValidationError(f"series item {sid} is not in the secret pool")
            for ref in slot.evidence_refs:
                if ref not in self.evidence:
                    raise ValidationError(f"dangling evidence ref {ref}")
            proto = self.items.get(slot.prototype_id)
            if proto is None or proto.status != "accepted":
                raise ValidationError(f"prototype of {slot.concept!r} missing or unaccepted")

    # -- variants ----------------------------------------------------------

    def compile_variants(self, n: int, seed: int, allow_reuse: bool = False) -> list[TestVariant]:
        """n exam variants, one secret item per slot, seeded-deterministic.

        Strict mode (default) refuses n beyond the smallest series since
        that would force reuse across variants.
        """
        if n < 1:
            raise ValidationError("variant count must be >= 1")
        if not self.slots:
            raise ValidationError("bank has no concept slots")
        for slot in self.slots:
            if not slot.series_ids:
                raise ValidationError(f"slot {slot.concept!r} has an empty series")
        if not allow_reuse:
            limiting = min(self.slots, key=lambda s: len(s.series_ids))
            if n > len(limiting.series_ids):
                raise ValidationError(
                    f"cannot build {n} variants without reuse: slot "
                    f"{limiting.concept!r} has only {len(limiting.series_ids)} series items"
                )
        rng = random.Random(seed)
        picks: dict[str, list[str]] = {}
        for slot in self.slots:
            order = list(slot.series_ids)
            rng.shuffle(order)
            if allow_reuse:
                while len(order) < n:
                    order.extend(order[: n - len(order)])
            picks[slot.concept] = order[:n]
        return [
            TestVariant(
                variant_id=f"{self.id}-v{k + 1}",
                item_ids=[picks[slot.concept][k] for slot in self.slots],
            )
            for k in range(n)
        ]

    def export_variant_sheets(self, variants: list[TestVariant], outdir) -> list[Path]:
        """Plain-text exam sheets (markers stripped) plus an answer key."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        written = []
        key_lines = []
        for variant in variants:
            lines = [f"Exam variant {variant.variant_id}", ""]
            for pos, item_id in enumerate(variant.item_ids, 1):
                item = self.items[item_id]
                lines.append(f"{pos}.")
                lines.append(render_mcq(item, mark_correct=False, include_explanation=False))
                lines.append("")
                key_lines.append(f"{variant.variant_id}\t{pos}\t{chr(65 + item.correct_index)}")
            path = outdir / f"{variant.variant_id}.txt"
            path.write_text("\n".join(lines), encoding="utf-8")
            written.append(path)
        key_path = outdir / "answer_key.txt"
        key_path.write_text("\n".join(key_lines) + "\n", encoding="utf-8")
        written.append(key_path)
        return written


# --- persistence ------------------------------------------------------------


def bank_to_dict(bank: ItemBank) -> dict:
    return {
        "id": bank.id,
        "discipline": bank.discipline,
        "slots": [
            {
                "concept": s.concept,
                "prototype_id": s.prototype_id,
                "series_ids": list(s.series_ids),
                "evidence_refs": list(s.evidence_refs),
            }
            for s in bank.slots
        ],
        "pools": {
            "open": sorted(bank.pools["open"]),
            "secret": sorted(bank.pools["secret"]),
        },
    }


def export_bank(bank: ItemBank, bank_path) -> None:
    """Write <bank>.json, <bank>.items.jsonl, and <bank>.evidence.json."""
    bank.check_invariants()
    bank_path = Path(bank_path)
    bank_path.write_text(json.dumps(bank_to_dict(bank), indent=2, ensure_ascii=False) + "\n",
                         encoding="utf-8")
    save_items(bank.items.values(), _items_path(bank_path))
    _evidence_path(bank_path).write_text(
        json.dumps(bank.evidence, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def import_bank(bank_path) -> ItemBank:
    """Load and validate a bank; any invariant violation is rejected."""
    bank_path = Path(bank_path)
    try:
        payload = json.loads(bank_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"bank file is not valid JSON: {exc}") from exc
    for key in ("id", "discipline", "slots", "pools"):
        if key not in payload:
            raise ValidationError(f"bank file missing {key!r}")
    bank = ItemBank(payload["id"], payload["discipline"])
    bank.pools = {
        "open": set(payload["pools"].get("open", [])),
        "secret": set(payload["pools"].get("secret", [])),
    }
    for s in payload["slots"]:
        bank.slots.append(
            ConceptSlot(
                concept=s["concept"],
                prototype_id=s["prototype_id"],
                series_ids=list(s.get("series_ids", [])),
                evidence_refs=list(s.get("evidence_refs", [])),
            )
        )
    items_file = _items_path(bank_path)
    if items_file.exists():
        for item in load_items(items_file):
            bank.items[item.id] = item
    evidence_file = _evidence_path(bank_path)
    if evidence_file.exists():
        bank.evidence = json.loads(evidence_file.read_text(encoding="utf-8"))
    bank.check_invariants()
    return bank


def _items_path(bank_path: Path) -> Path:
    return bank_path.with_suffix(".items.jsonl")


def _evidence_path(bank_path: Path) -> Path:
    return bank_path.with_suffix(".evidence.json")
