"""HTTP facade over sessions, quality, metrics, and banks.

JSON in/out; errors are {code, message, detail} with 400 for validation,
404 for unknown ids, 409 for gate/writer conflicts, 422 for exhausted
budgets, and 502 for provider failures. Mutating endpoints replay their
first result when called again with the same Idempotency-Key header.
Gate endpoints run provider work inline, bounded by provider timeouts.
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict
from pathlib import Path
from typing import Optional

from fastapi import Body, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .agreement import ContingencyTable, DegenerateMarginalsError, build_contingency, cohen_kappa, format_report
from .bank import ItemBank, bank_to_dict, export_bank
from .errors import (
    BudgetExhaustedError,
    McqForgeError,
    ProviderError,
    SessionConflictError,
    UnknownIdError,
    ValidationError,
    WrongGateError,
)
from .items import McqItem, item_from_dict, item_to_dict, render_mcq, word_edit_distance
from .pipeline import (
    MAX_MANUAL_WORDS,
    GateDecision,
    GenerationInput,
    Pipeline,
    PipelineSession,
)
from .providers import ProviderHub
from .quality import lint_deterministic, run_quality_checks
from .similarity import (
    ConceptualMatchReport,
    TverskyParams,
    conceptual_match,
    contextual_features,
    item_linguistic_features,
    matrix_errata,
    pairwise_matrix,
)


def _status_for(exc: McqForgeError) -> int:
    if isinstance(exc, BudgetExhaustedError):
        return 422
    if isinstance(exc, UnknownIdError):
        return 404
    if isinstance(exc, (WrongGateError, SessionConflictError)):
        return 409
    if isinstance(exc, ProviderError):
        return 502
    if isinstance(exc, ValidationError):
        return 400
    return 400


def _error_body(exc: Exception) -> dict:
    detail = None
    report = getattr(exc, "report", None)
    if report is not None:
        detail = {"missing": report.missing}
    if isinstance(exc, DegenerateMarginalsError):
        detail = {"p_o": exc.p_o, "p_e": exc.p_e}
    return {
        "code": type(exc).__name__,
        "message": str(exc),
        "detail": detail,
    }


def session_view(pipeline: Pipeline, session: PipelineSession) -> dict:
    """Pure projection of a session for the review UI; never includes
    provider credentials (the service holds none to begin with)."""
    artifacts = {
        name: {"text": artifact.text, "transcript_ids": list(artifact.transcript_ids)}
        for name, artifact in session.artifacts.items()
    }
    items = {}
    for item_id, item in session.items.items():
        verdicts = lint_deterministic(item)
        items[item_id] = {
            "id": item_id,
            "status": item.status,
            "source_role": item.provenance.source_role,
            "rendered": render_mcq(item, mark_correct=True),
            "stem": item.stem,
            "question": item.question,
            "options": list(item.options),
            "correct_index": item.correct_index,
            "deterministic_verdicts": [asdict(v) for v in verdicts],
            "budget": asdict(session.budget_for(item_id)),
        }
    return {
        "id": session.id,
        "mode": session.mode,
        "stage": session.stage,
        "pending_gate": session.current_gate,
        "selected_concept": session.selected_concept,
        "qa_candidates": [asdict(c) for c in session.qa_candidates],
        "artifacts": artifacts,
        "items": items,
        "open_item_ids": session.open_item_ids(),
        "gate_log": [asdict(d) for d in session.gate_log],
        "budgets": {k: asdict(v) for k, v in session.budgets.items()},
        "parse_reports": [r.missing for r in session.parse_reports],
        "created_at": session.created_at,
    }


class ServiceState:
    def __init__(self, hub: ProviderHub, data_dir: Optional[str] = None,
                 token: Optional[str] = None):
        self.hub = hub
        self.pipeline = Pipeline(hub)
        self.banks: dict[str, ItemBank] = {}
        self.data_dir = Path(data_dir) if data_dir else None
        self.token = token
        self.idempotency: dict[str, dict] = {}
        self.idempotency_lock = threading.Lock()

    def persist_bank(self, bank: ItemBank) -> None:
        if self.data_dir:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            export_bank(bank, self.data_dir / f"{bank.id}.json")

    def bank(self, bank_id: str) -> ItemBank:
        if bank_id not in self.banks:
            raise UnknownIdError(f"unknown bank {bank_id}")
        return self.banks[bank_id]

    def resolve_item(self, payload: dict, key_id: str = "item_id", key_inline: str = "item") -> McqItem:
        if key_inline in payload:
            return item_from_dict(payload[key_inline])
        if key_id in payload:
            _, item = self.pipeline.find_item(payload[key_id])
            return item
        raise ValidationError(f"payload needs {key_id!r} or an inline {key_inline!r}")


def create_app(hub: ProviderHub, data_dir: Optional[str] = None,
               token: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="mcqforge", version="0.1.0")
    state = ServiceState(hub, data_dir=data_dir, token=token)
    app.state.service = state
    # the review UI is a separate static page; desk-scale single-user service
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(McqForgeError)
    async def domain_error(request: Request, exc: McqForgeError):
        return JSONResponse(status_code=_status_for(exc), content=_error_body(exc))

    @app.middleware("http")
    async def auth_and_idempotency(request: Request, call_next):
        if state.token:
            header = request.headers.get("Authorization", "")
            if header != f"Bearer {state.token}":
                return JSONResponse(status_code=401, content={
                    "code": "Unauthorized", "message": "missing or wrong bearer token",
                    "detail": None,
                })
        key = request.headers.get("Idempotency-Key")
        if key and request.method == "POST":
            with state.idempotency_lock:
                cached = state.idempotency.get(key)
            if cached is not None:
                return JSONResponse(status_code=cached["status"], content=cached["body"])
            response = await call_next(request)
            chunks = [chunk async for chunk in response.body_iterator]
            body = b"".join(chunks)
            payload = json.loads(body) if body else None
            with state.idempotency_lock:
                state.idempotency[key] = {"status": response.status_code, "body": payload}
            return JSONResponse(status_code=response.status_code, content=payload)
        return await call_next(request)

    # -- sessions ---------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict = Body(...)):
        mode = payload.get("mode")
        if mode in ("prototype", "one_step"):
            raw = payload.get("input") or {}
            try:
                gen_input = GenerationInput(**raw)
            except TypeError as exc:
                raise ValidationError(f"bad input payload: {exc}")
            if mode == "prototype":
                session = state.pipeline.start_prototype_session(gen_input)
            else:
                session = state.pipeline.run_one_step(gen_input)
        elif mode in ("series_example_based", "series_concept_derived"):
            prototype = state.resolve_item(payload, "prototype_id", "prototype")
            session = state.pipeline.start_series_session(
                prototype,
                mode.removeprefix("series_"),
                count=payload.get("count", 5),
                role=payload.get("role"),
            )
        else:
            raise ValidationError(f"unknown session mode {mode!r}")
        return session_view(state.pipeline, session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return session_view(state.pipeline, state.pipeline.session(session_id))

    @app.post("/sessions/{session_id}/gate")
    def submit_gate(session_id: str, payload: dict = Body(...)):
        decision = GateDecision(
            gate=payload.get("gate", ""),
            action=payload.get("action", ""),
            reviewer=payload.get("reviewer", "reviewer"),
            text=payload.get("text"),
            selection=payload.get("selection"),
            item_id=payload.get("item_id"),
        )
        session = state.pipeline.submit_gate_decision(session_id, decision)
        return session_view(state.pipeline, session)

    @app.post("/sessions/{session_id}/resume")
    def resume(session_id: str):
        return session_view(state.pipeline, state.pipeline.resume_session(session_id))

    @app.get("/sessions/{session_id}/audit")
    def audit(session_id: str):
        return state.pipeline.audit_export(session_id)

    # -- items ------------------------------------------------------------

    @app.get("/items/{item_id}")
    def get_item(item_id: str):
        session, item = state.pipeline.find_item(item_id)
        return {
            "item": item_to_dict(item),
            "rendered": render_mcq(item, mark_correct=True),
            "session_id": session.id,
            "budget": asdict(session.budget_for(item_id)),
        }

    @app.post("/items/{item_id}/adjust")
    def adjust(item_id: str, payload: dict = Body(...)):
        session, _ = state.pipeline.find_item(item_id)
        criterion_id = payload.get("criterion_id")
        if not isinstance(criterion_id, int):
            raise ValidationError("criterion_id must be an integer 1-9")
        item = state.pipeline.apply_adjustment_prompt(session.id, item_id, criterion_id)
        return {
            "item": item_to_dict(item),
            "rendered": render_mcq(item, mark_correct=True),
            "budget": asdict(session.budget_for(item_id)),
        }

    @app.post("/items/{item_id}/edit")
    def edit(item_id: str, payload: dict = Body(...)):
        session, _ = state.pipeline.find_item(item_id)
        new_text = payload.get("new_text", "")
        if not new_text.strip():
            raise ValidationError("new_text is required")
        item = state.pipeline.apply_manual_edit(session.id, item_id, new_text)
        return {
            "item": item_to_dict(item),
            "rendered": render_mcq(item, mark_correct=True),
            "budget": asdict(session.budget_for(item_id)),
        }

    @app.post("/items/{item_id}/edit_preview")
    def edit_preview(item_id: str, payload: dict = Body(...)):
        session, item = state.pipeline.find_item(item_id)
        new_text = payload.get("new_text", "")
        delta = word_edit_distance(render_mcq(item, mark_correct=True), new_text)
        budget = session.budget_for(item_id)
        return {
            "word_delta": delta,
            "manual_words_edited": budget.manual_words_edited,
            "within_budget": budget.manual_words_edited + delta <= MAX_MANUAL_WORDS,
        }

    @app.get("/items/{item_id}/quality")
    def quality(item_id: str, policy: str = "deterministic_first",
                deterministic_only: bool = False):
        _, item = state.pipeline.find_item(item_id)
        if deterministic_only:
            verdicts = lint_deterministic(item)
            return {
                "item_id": item_id,
                "verdicts": [asdict(v) for v in verdicts],
                "accepted": None,
                "failed_ids": sorted({v.criterion for v in verdicts if not v.passed}),
                "coding": None,
            }
        report = run_quality_checks(state.hub, item, policy=policy)
        return {
            "item_id": item_id,
            "verdicts": [asdict(v) for v in report.verdicts],
            "accepted": report.accepted,
            "failed_ids": report.failed_ids,
            "coding": report.coding(),
        }

    # -- metrics ----------------------------------------------------------

    @app.post("/metrics/similarity")
    def similarity_metric(payload: dict = Body(...)):
        params = TverskyParams(**(payload.get("params") or {}))
        kind = payload.get("kind", "contextual")
        if payload.get("feature_sets"):
            sets = [
                contextual_features(fs["id"], fs["features"])
                if kind == "contextual"
                else _linguistic_from_features(fs)
                for fs in payload["feature_sets"]
            ]
        elif payload.get("item_ids"):
            if kind != "linguistic":
                raise ValidationError("item_ids input requires kind=linguistic")
            items = [state.pipeline.find_item(i)[1] for i in payload["item_ids"]]
            sets = [item_linguistic_features(item) for item in items]
        else:
            raise ValidationError("provide feature_sets or item_ids")
        matrix = pairwise_matrix(sets, kind=kind, params=params)
        body = {
            "kind": matrix.kind,
            "params": asdict(matrix.params),
            "item_ids": matrix.item_ids,
            "values": matrix.values,
            "summary": asdict(matrix.summary()),
            "csv": matrix.to_csv(precision=1),
        }
        if payload.get("reference"):
            errata = matrix_errata(matrix, payload["reference"])
            body["errata"] = [asdict(e) for e in errata]
        if payload.get("shared"):
            body["shared_features"] = _shared_features(sets)
        return body

    def _linguistic_from_features(fs: dict):
        from .similarity import FeatureSet

        return FeatureSet(fs["id"], "linguistic", frozenset(fs["features"]))

    def _shared_features(sets):
        out = {}
        for i, a in enumerate(sets):
            for j, b in enumerate(sets):
                if i < j:
                    out[f"{a.item_id}|{b.item_id}"] = {
                        "shared": sorted(a.features & b.features),
                        "only_a": sorted(a.features - b.features),
                        "only_b": sorted(b.features - a.features),
                    }
        return out

    @app.post("/metrics/kappa")
    def kappa_metric(payload: dict = Body(...)):
        if payload.get("counts"):
            counts = payload["counts"]
            table = ContingencyTable(
                a=counts.get("a", 0), b=counts.get("b", 0),
                c=counts.get("c", 0), d=counts.get("d", 0),
            )
        elif payload.get("human") is not None and payload.get("machine") is not None:
            table = build_contingency(payload["human"], payload["machine"])
        else:
            raise ValidationError("provide counts {a,b,c,d} or paired human/machine maps")
        result = cohen_kappa(table)
        return {
            "a": table.a, "b": table.b, "c": table.c, "d": table.d, "n": table.total,
            "p_o": result.p_o, "p_e": result.p_e,
            "kappa": result.kappa, "band": result.band,
            "report": format_report(table, result),
        }

    @app.post("/metrics/conceptual_match")
    def conceptual_metric(payload: dict = Body(...)):
        prototype = state.resolve_item(payload, "prototype_id", "prototype")
        candidates = [state.pipeline.find_item(i)[1] for i in payload.get("candidate_ids", [])]
        report = conceptual_match(state.hub, prototype, candidates,
                                  role=payload.get("role", "evaluator"))
        return {
            "prototype_id": report.prototype_id,
            "candidate_ids": report.candidate_ids,
            "same_concept": report.same_concept,
            "percentage": report.percentage,
            "concepts": report.concepts,
        }

    # -- banks --------------------------------------------------------------

    def bank_view(bank: ItemBank) -> dict:
        body = bank_to_dict(bank)
        body["slots"] = [
            {**slot, "series_size": len(slot["series_ids"]),
             "prototype_preview": render_mcq(bank.items[slot["prototype_id"]],
                                             mark_correct=False)
             if slot["prototype_id"] in bank.items else None}
            for slot in body["slots"]
        ]
        body["min_series_size"] = min(
            (len(s.series_ids) for s in bank.slots), default=0
        )
        return body

    @app.get("/banks")
    def list_banks():
        return {"banks": [bank_view(b) for b in state.banks.values()]}

    @app.post("/banks", status_code=201)
    def create_bank(payload: dict = Body(...)):
        bank_id = payload.get("id", "").strip()
        if not bank_id:
            raise ValidationError("bank id is required")
        if bank_id in state.banks:
            raise ValidationError(f"bank {bank_id} already exists")
        bank = ItemBank(bank_id, payload.get("discipline", ""))
        state.banks[bank_id] = bank
        state.persist_bank(bank)
        return bank_view(bank)

    @app.get("/banks/{bank_id}")
    def get_bank(bank_id: str):
        return bank_view(state.bank(bank_id))

    @app.post("/banks/{bank_id}/prototype", status_code=201)
    def add_prototype(bank_id: str, payload: dict = Body(...)):
        bank = state.bank(bank_id)
        item = state.resolve_item(payload)
        concept = payload.get("concept", "").strip()
        if not concept:
            raise ValidationError("concept is required")
        bank.add_prototype(concept, item)
        state.persist_bank(bank)
        return bank_view(bank)

    @app.post("/banks/{bank_id}/series", status_code=201)
    def attach_series(bank_id: str, payload: dict = Body(...)):
        bank = state.bank(bank_id)
        concept = payload.get("concept", "").strip()
        slot = bank.slot_for(concept)
        if slot is None:
            raise UnknownIdError(f"no slot for concept {concept!r}")
        if payload.get("items"):
            items = [item_from_dict(d) for d in payload["items"]]
        else:
            items = [state.pipeline.find_item(i)[1] for i in payload.get("item_ids", [])]
        if payload.get("auto_evidence"):
            prototype = bank.items[slot.prototype_id]
            evidence = conceptual_match(state.hub, prototype, items,
                                        role=payload.get("role", "evaluator"))
        else:
            raw = payload.get("evidence") or {}
            evidence = ConceptualMatchReport(
                prototype_id=raw.get("prototype_id", slot.prototype_id),
                candidate_ids=raw.get("candidate_ids", [i.id for i in items]),
                same_concept=raw.get("same_concept", {}),
                concepts=raw.get("concepts", ""),
            )
        bank.attach_series(concept, items, evidence)
        state.persist_bank(bank)
        return bank_view(bank)

    @app.post("/banks/{bank_id}/variants")
    def compile_variants(bank_id: str, payload: dict = Body(...)):
        bank = state.bank(bank_id)
        n = payload.get("n")
        if not isinstance(n, int):
            raise ValidationError("n must be an integer")
        variants = bank.compile_variants(
            n=n, seed=payload.get("seed", 0), allow_reuse=bool(payload.get("allow_reuse"))
        )
        sheets = {}
        key_lines = []
        for variant in variants:
            lines = [f"Exam variant {variant.variant_id}", ""]
            for pos, item_id in enumerate(variant.item_ids, 1):
                item = bank.items[item_id]
                lines.append(f"{pos}.")
                lines.append(render_mcq(item, mark_correct=False, include_explanation=False))
                lines.append("")
                key_lines.append(f"{variant.variant_id}\t{pos}\t{chr(65 + item.correct_index)}")
            sheets[f"{variant.variant_id}.txt"] = "\n".join(lines)
        if state.data_dir:
            bank.export_variant_sheets(variants, state.data_dir / f"{bank_id}-variants")
        return {
            "variants": [asdict(v) for v in variants],
            "sheets": sheets,
            "answer_key": "\n".join(key_lines) + "\n",
        }

    @app.get("/health")
    def health():
        return {"status": "ok", "roles": state.hub.configured_roles()}

    return app
