import { ApiClient } from "./api";
import { parseConceptMap, ConceptNode } from "./conceptMap";
import { el } from "./dom";
import { GateFormController } from "./gateForm";
import { ItemView, SessionView, VerdictView } from "./types";

// Criterion chips show the three evaluator columns side by side so a
// human override never hides the machine verdicts it disagrees with.
const EVALUATOR_COLUMNS = ["deterministic", "automated", "human"] as const;

export function verdictChips(verdicts: VerdictView[]): HTMLElement {
  const box = el("div", { className: "criterion-chips" });
  for (let criterion = 1; criterion <= 9; criterion++) {
    const mine = verdicts.filter((v) => v.criterion === criterion);
    const chip = el("span", { className: "chip", textContent: `C${criterion}` });
    for (const column of EVALUATOR_COLUMNS) {
      const verdict = mine.filter((v) => v.evaluator.startsWith(column)).pop();
      const mark = el("span", {
        className: `chip-${column}`,
        textContent: verdict ? (verdict.verdict === "pass" ? "+" : "-") : "·",
        title: verdict ? `${verdict.evaluator}: ${verdict.rationale}` : `${column}: no verdict`,
      });
      chip.appendChild(mark);
    }
    box.appendChild(chip);
  }
  return box;
}

export class SessionReview {
  readonly root: HTMLElement;
  controller: GateFormController;
  private stageBox: HTMLElement;
  private statusBox: HTMLElement;

  constructor(api: ApiClient, session: SessionView) {
    this.controller = new GateFormController(api, session);
    this.stageBox = el("div", { className: "stage" });
    this.statusBox = el("div", { className: "gate-status" });
    this.root = el("div", { className: "session-review" }, [this.statusBox, this.stageBox]);
    this.render();
  }

  get session(): SessionView {
    return this.controller.state.session;
  }

  render(): void {
    const session = this.session;
    this.statusBox.replaceChildren(
      el("strong", { textContent: `session ${session.id}` }),
      el("span", { textContent: ` mode ${session.mode}, stage ${session.stage}` }),
    );
    if (this.controller.state.message) {
      this.statusBox.appendChild(
        el("p", { className: "gate-message", textContent: this.controller.state.message }),
      );
      if (this.controller.state.status === "conflict") {
        const reloadButton = el("button", { textContent: "reload session" });
        reloadButton.addEventListener("click", () => void this.reload());
        this.statusBox.appendChild(reloadButton);
      }
    }
    this.stageBox.replaceChildren();
    switch (session.pending_gate) {
      case "G1_concept_map":
        this.renderConceptMapGate();
        break;
      case "G2_question_answer":
        this.renderQaGate();
        break;
      case "G3_item":
        this.renderItemGate();
        break;
      default:
        this.renderClosed();
    }
  }

  private renderConceptMapGate(): void {
    const text = this.session.artifacts["concept_map"]?.text ?? "";
    const tree = parseConceptMap(text);
    const renderNode = (node: ConceptNode): HTMLElement => {
      const label = el("span", { className: "map-node", textContent: node.label });
      label.addEventListener("click", () => void this.selectConcept(node.label));
      return el("li", {}, [
        label,
        ...(node.children.length ? [el("ul", {}, node.children.map(renderNode))] : []),
      ]);
    };
    this.stageBox.append(
      el("h3", { textContent: "concept map (select a node)" }),
      el("ul", { className: "concept-tree" }, tree.map(renderNode)),
      this.rejectButton("G1_concept_map"),
    );
  }

  private renderQaGate(): void {
    const list = el("div", { className: "qa-candidates" });
    for (const candidate of this.session.qa_candidates) {
      const pick = el("button", { textContent: `select question ${candidate.number}` });
      pick.addEventListener("click", () => void this.selectQuestion(candidate.number));
      list.appendChild(
        el("div", { className: "qa-candidate" }, [
          el("p", { textContent: `Question ${candidate.number}: ${candidate.question}` }),
          el("p", { textContent: `Answer: ${candidate.answer}` }),
          pick,
        ]),
      );
    }
    this.stageBox.append(
      el("h3", { textContent: "question + answer candidates" }),
      list,
      this.rejectButton("G2_question_answer"),
    );
  }

  private renderItemGate(): void {
    this.stageBox.appendChild(el("h3", { textContent: "candidate items" }));
    for (const itemId of this.session.open_item_ids) {
      const item = this.session.items[itemId];
      this.stageBox.appendChild(this.itemCard(item));
    }
  }

  private itemCard(item: ItemView): HTMLElement {
    const approve = el("button", { textContent: "approve" });
    approve.addEventListener("click", () => void this.approveItem(item.id));
    const reject = el("button", { textContent: "reject" });
    reject.addEventListener("click", () => void this.rejectItem(item.id));
    const budget = el("span", {
      className: "budget",
      textContent:
        `budget: ${item.budget.adjustment_prompts_used}/4 prompts, ` +
        `${item.budget.manual_words_edited}/10 words`,
    });
    return el("div", { className: "item-card", id: `item-${item.id}` }, [
      el("span", { className: "item-role", textContent: item.source_role }),
      el("pre", { className: "item-text", textContent: item.rendered }),
      verdictChips(item.deterministic_verdicts),
      budget,
      approve,
      reject,
    ]);
  }

  private renderClosed(): void {
    this.stageBox.appendChild(
      el("p", { textContent: `session is ${this.session.stage}; no gate is open` }),
    );
    for (const item of Object.values(this.session.items)) {
      this.stageBox.appendChild(
        el("div", { className: "item-card closed" }, [
          el("span", { textContent: `${item.status} (${item.source_role})` }),
          el("pre", { className: "item-text", textContent: item.rendered }),
        ]),
      );
    }
  }

  private rejectButton(gate: string): HTMLElement {
    const button = el("button", { textContent: "reject and close session" });
    button.addEventListener("click", () => {
      this.controller.choose("reject");
      void this.submitAndRender();
    });
    button.dataset.gate = gate;
    return button;
  }

  // -- scripted entry points (also used by the buttons above) --------------

  async selectConcept(label: string): Promise<void> {
    this.controller.selectNode(label);
    await this.submitAndRender();
  }

  async selectQuestion(number: number): Promise<void> {
    this.controller.selectCandidate(number);
    await this.submitAndRender();
  }

  async approveItem(itemId: string): Promise<void> {
    this.controller.choose("approve");
    this.controller.targetItem(itemId);
    await this.submitAndRender();
  }

  async rejectItem(itemId: string): Promise<void> {
    this.controller.choose("reject");
    this.controller.targetItem(itemId);
    await this.submitAndRender();
  }

  async editItem(itemId: string, newText: string): Promise<void> {
    this.controller.choose("edit");
    this.controller.targetItem(itemId);
    await this.controller.previewEdit(newText);
    await this.submitAndRender();
  }

  private async submitAndRender(): Promise<void> {
    await this.controller.submit();
    this.render();
  }

  async reload(): Promise<void> {
    await this.controller.reload();
    this.render();
  }
}
