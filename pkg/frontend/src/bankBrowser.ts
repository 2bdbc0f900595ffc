import { ApiClient } from "./api";
import { el } from "./dom";
import { BankView, RequestFailed, VariantsResponse } from "./types";

export interface CompileFormState {
  n: number;
  seed: number;
  error: string;
  result: VariantsResponse | null;
}

/** Client-side mirror of the server's strict no-reuse bound. */
export function compileAllowed(bank: BankView, n: number): boolean {
  return n >= 1 && bank.slots.length > 0 && n <= bank.min_series_size;
}

export class BankBrowser {
  readonly root: HTMLElement;
  state: CompileFormState = { n: 1, seed: 0, error: "", result: null };
  private slotsBox: HTMLElement;
  private compileBox: HTMLElement;
  private resultBox: HTMLElement;

  constructor(
    private api: ApiClient,
    public bank: BankView,
  ) {
    this.slotsBox = el("div", { className: "bank-slots" });
    this.compileBox = el("div", { className: "compile-form" });
    this.resultBox = el("div", { className: "compile-result" });
    this.root = el("div", { className: "bank-browser" }, [
      el("h2", { textContent: `bank ${bank.id} (${bank.discipline})` }),
      this.slotsBox,
      this.compileBox,
      this.resultBox,
    ]);
    this.renderSlots();
    this.renderCompileForm();
  }

  private renderSlots(): void {
    this.slotsBox.replaceChildren();
    for (const slot of this.bank.slots) {
      this.slotsBox.appendChild(
        el("div", { className: "slot-row" }, [
          el("strong", { textContent: slot.concept }),
          el("span", {
            textContent: ` series of ${slot.series_size}`,
            className: "series-size",
          }),
          el("pre", {
            textContent: slot.prototype_preview ?? "(prototype text unavailable)",
            className: "prototype-preview",
          }),
        ]),
      );
    }
  }

  private renderCompileForm(): void {
    this.compileBox.replaceChildren();
    const nInput = el("input", { type: "number", value: String(this.state.n) });
    const seedInput = el("input", { type: "number", value: String(this.state.seed) });
    const message = el("span", { className: "compile-message" });
    const button = el("button", { textContent: "compile variants" });
    const sync = () => {
      this.state.n = Number(nInput.value);
      this.state.seed = Number(seedInput.value);
      const ok = compileAllowed(this.bank, this.state.n);
      button.disabled = !ok;
      message.textContent = ok
        ? ""
        : `n must be between 1 and ${this.bank.min_series_size} (smallest series)`;
    };
    nInput.addEventListener("input", sync);
    seedInput.addEventListener("input", sync);
    button.addEventListener("click", () => void this.compile());
    sync();
    this.compileBox.append(
      el("label", { textContent: "variants " }, [nInput]),
      el("label", { textContent: " seed " }, [seedInput]),
      button,
      message,
    );
  }

  async compile(): Promise<VariantsResponse | null> {
    try {
      const result = await this.api.compileVariants(this.bank.id, this.state.n, this.state.seed);
      this.state.result = result;
      this.state.error = "";
      this.renderResult(result);
      return result;
    } catch (err) {
      // mirror the server refusal verbatim
      this.state.error = err instanceof RequestFailed ? err.body.message : String(err);
      this.state.result = null;
      this.resultBox.replaceChildren(
        el("p", { className: "compile-error", textContent: this.state.error }),
      );
      return null;
    }
  }

  private renderResult(result: VariantsResponse): void {
    this.resultBox.replaceChildren();
    const files: [string, string][] = [
      ...Object.entries(result.sheets),
      ["answer_key.txt", result.answer_key],
    ];
    for (const [name, content] of files) {
      const link = el("a", { textContent: `download ${name}` });
      link.href = `data:text/plain;charset=utf-8,${encodeURIComponent(content)}`;
      (link as HTMLAnchorElement).download = name;
      this.resultBox.appendChild(el("div", { className: "sheet-download" }, [link]));
    }
  }
}
