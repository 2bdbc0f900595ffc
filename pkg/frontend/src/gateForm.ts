import { ApiClient } from "./api";
import { EditPreview, RequestFailed, SessionView } from "./types";

// Mirrors the actions the service accepts at each gate; rendering and
// submit-enabling both key off this single table.
export type GateAction = "approve" | "edit" | "select" | "reject";

export interface GateFormState {
  session: SessionView;
  action: GateAction | null;
  editBuffer: string;
  selection: string | number | null;
  targetItemId: string | null;
  preview: EditPreview | null; // G3 edit budget impact, server-computed
  status: "idle" | "submitting" | "conflict" | "error" | "done";
  message: string;
}

export function newGateForm(session: SessionView): GateFormState {
  return {
    session,
    action: null,
    editBuffer: "",
    selection: null,
    targetItemId: null,
    preview: null,
    status: "idle",
    message: "",
  };
}

/** Actions the API will accept for the session's current stage. */
export function validActions(session: SessionView): GateAction[] {
  switch (session.pending_gate) {
    case "G1_concept_map":
      return ["approve", "select", "edit", "reject"];
    case "G2_question_answer": {
      const actions: GateAction[] = ["select", "edit", "reject"];
      if (session.qa_candidates.length === 1) actions.unshift("approve");
      return actions;
    }
    case "G3_item":
      return ["approve", "edit", "reject"];
    default:
      return [];
  }
}

export function canSubmit(state: GateFormState): boolean {
  const { session, action } = state;
  if (!action || !validActions(session).includes(action)) return false;
  if (action === "select" && state.selection == null) return false;
  if (action === "edit" && !state.editBuffer.trim()) return false;
  if (session.pending_gate === "G3_item" && action !== "reject" && !state.targetItemId) {
    return false;
  }
  // G3 edits must stay inside the word budget, per the server preview
  if (session.pending_gate === "G3_item" && action === "edit") {
    if (!state.preview || !state.preview.within_budget) return false;
  }
  return true;
}

export function buildDecision(state: GateFormState): Record<string, unknown> {
  const decision: Record<string, unknown> = {
    gate: state.session.pending_gate,
    action: state.action,
  };
  if (state.action === "select") decision.selection = state.selection;
  if (state.action === "edit") decision.text = state.editBuffer;
  if (state.targetItemId) decision.item_id = state.targetItemId;
  return decision;
}

export class GateFormController {
  state: GateFormState;

  constructor(
    private api: ApiClient,
    session: SessionView,
  ) {
    this.state = newGateForm(session);
  }

  choose(action: GateAction): void {
    this.state.action = action;
    this.state.message = "";
  }

  selectNode(label: string): void {
    this.state.action = "select";
    this.state.selection = label;
  }

  selectCandidate(number: number): void {
    this.state.action = "select";
    this.state.selection = number;
  }

  targetItem(itemId: string): void {
    this.state.targetItemId = itemId;
    this.state.preview = null;
  }

  /** Server-side word-delta preview for a pending G3 manual edit. */
  async previewEdit(text: string): Promise<EditPreview> {
    if (!this.state.targetItemId) {
      throw new Error("no item targeted for the edit preview");
    }
    this.state.editBuffer = text;
    const preview = await this.api.editPreview(this.state.targetItemId, text);
    this.state.preview = preview;
    if (!preview.within_budget) {
      this.state.message = `edit of ${preview.word_delta} words exceeds the remaining budget`;
    }
    return preview;
  }

  setEditBuffer(text: string): void {
    this.state.editBuffer = text;
    this.state.preview = null;
  }

  async submit(): Promise<SessionView | null> {
    if (!canSubmit(this.state)) {
      this.state.status = "error";
      this.state.message = "action is not valid for the pending gate";
      return null;
    }
    this.state.status = "submitting";
    try {
      const view = await this.api.submitGate(this.state.session.id, buildDecision(this.state));
      this.state = newGateForm(view);
      this.state.status = "done";
      return view;
    } catch (err) {
      if (err instanceof RequestFailed && err.status === 409) {
        this.state.status = "conflict";
        this.state.message = "session changed elsewhere; reload to continue";
      } else if (err instanceof RequestFailed) {
        this.state.status = "error";
        this.state.message = err.body.message;
      } else {
        this.state.status = "error";
        this.state.message = String(err);
      }
      return null;
    }
  }

  async reload(): Promise<SessionView> {
    const view = await this.api.getSession(this.state.session.id);
    this.state = newGateForm(view);
    return view;
  }
}
