import { ApiClient } from "./api";
import { BankBrowser } from "./bankBrowser";
import { el } from "./dom";
import { HeatmapView, missingMatrixPrompt } from "./heatmap";
import { SessionReview } from "./sessionReview";
import { MatrixResponse, RequestFailed } from "./types";

// Single-page shell: connect to the service, then move between the
// session review, the similarity explorer, and the bank browser.

export class App {
  readonly root: HTMLElement;
  private api: ApiClient | null = null;
  private main: HTMLElement;
  review: SessionReview | null = null;

  constructor() {
    this.main = el("main");
    this.root = el("div", { id: "app" }, [this.connectForm(), this.main]);
  }

  private connectForm(): HTMLElement {
    const url = el("input", { value: "http://127.0.0.1:8000", size: 40 });
    const token = el("input", { placeholder: "bearer token (optional)", size: 24 });
    const status = el("span", { className: "connect-status" });
    const button = el("button", { textContent: "connect" });
    button.addEventListener("click", async () => {
      const api = new ApiClient({ baseUrl: url.value.replace(/\/$/, ""), token: token.value || undefined });
      try {
        await api.health();
        this.api = api;
        status.textContent = "connected";
        this.renderHome();
      } catch (err) {
        status.textContent = err instanceof RequestFailed ? err.message : "connection failed";
      }
    });
    return el("header", {}, [
      el("h1", { textContent: "MCQ review" }),
      url,
      token,
      button,
      status,
    ]);
  }

  private renderHome(): void {
    if (!this.api) return;
    const objective = el("textarea", { rows: 3, cols: 70 });
    const discipline = el("input", { value: "biology" });
    const level = el("input", { value: "upper secondary school" });
    const topic = el("input", { placeholder: "topic" });
    const start = el("button", { textContent: "start prototype session" });
    start.addEventListener("click", () => {
      void this.startSession({
        kind: "learning_objective",
        body: objective.value,
        topic: topic.value,
        discipline: discipline.value,
        education_level: level.value,
      });
    });
    const sessionId = el("input", { placeholder: "session id" });
    const open = el("button", { textContent: "open session" });
    open.addEventListener("click", () => void this.openSession(sessionId.value));
    const bankId = el("input", { placeholder: "bank id" });
    const browse = el("button", { textContent: "browse bank" });
    browse.addEventListener("click", () => void this.openBank(bankId.value));
    this.main.replaceChildren(
      el("section", {}, [
        el("h2", { textContent: "new session" }),
        el("label", { textContent: "learning objective " }, [objective]),
        el("label", { textContent: " discipline " }, [discipline]),
        el("label", { textContent: " level " }, [level]),
        el("label", { textContent: " topic " }, [topic]),
        start,
      ]),
      el("section", {}, [el("h2", { textContent: "resume" }), sessionId, open, bankId, browse]),
    );
  }

  async startSession(input: Record<string, unknown>): Promise<SessionReview> {
    if (!this.api) throw new Error("not connected");
    const view = await this.api.startPrototypeSession(input);
    this.review = new SessionReview(this.api, view);
    this.main.replaceChildren(this.review.root);
    return this.review;
  }

  async openSession(id: string): Promise<SessionReview> {
    if (!this.api) throw new Error("not connected");
    const view = await this.api.getSession(id);
    this.review = new SessionReview(this.api, view);
    this.main.replaceChildren(this.review.root);
    return this.review;
  }

  async openBank(id: string): Promise<BankBrowser> {
    if (!this.api) throw new Error("not connected");
    const bank = await this.api.getBank(id);
    const browser = new BankBrowser(this.api, bank);
    this.main.replaceChildren(browser.root);
    return browser;
  }

  /** Heatmap for a set of stored items, or a call-to-compute prompt. */
  showSimilarity(matrix: MatrixResponse | null, onCompute: () => void): HTMLElement {
    const panel = matrix ? new HeatmapView(matrix).root : missingMatrixPrompt(onCompute);
    this.main.replaceChildren(panel);
    return panel;
  }
}

export function mount(target: HTMLElement): App {
  const app = new App();
  target.appendChild(app.root);
  return app;
}
