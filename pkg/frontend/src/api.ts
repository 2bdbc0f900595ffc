import {
  ApiError,
  BankView,
  EditPreview,
  ItemResponse,
  KappaResponse,
  MatrixResponse,
  QualityReportView,
  RequestFailed,
  SessionView,
  VariantsResponse,
} from "./types";

export interface ApiConfig {
  baseUrl: string;
  token?: string;
}

/** Thin fetch wrapper over the review service; one method per endpoint. */
export class ApiClient {
  constructor(private config: ApiConfig) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.config.token) {
      headers["Authorization"] = `Bearer ${this.config.token}`;
    }
    const response = await fetch(`${this.config.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const payload = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw new RequestFailed(response.status, payload as ApiError);
    }
    return payload as T;
  }

  startPrototypeSession(input: Record<string, unknown>): Promise<SessionView> {
    return this.request("POST", "/sessions", { mode: "prototype", input });
  }

  startSeriesSession(
    mode: "series_example_based" | "series_concept_derived",
    prototypeId: string,
    count = 5,
  ): Promise<SessionView> {
    return this.request("POST", "/sessions", { mode, prototype_id: prototypeId, count });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${id}`);
  }

  submitGate(id: string, decision: Record<string, unknown>): Promise<SessionView> {
    return this.request("POST", `/sessions/${id}/gate`, decision);
  }

  getItem(id: string): Promise<ItemResponse> {
    return this.request("GET", `/items/${id}`);
  }

  adjustItem(id: string, criterionId: number): Promise<ItemResponse> {
    return this.request("POST", `/items/${id}/adjust`, { criterion_id: criterionId });
  }

  editItem(id: string, newText: string): Promise<ItemResponse> {
    return this.request("POST", `/items/${id}/edit`, { new_text: newText });
  }

  editPreview(id: string, newText: string): Promise<EditPreview> {
    return this.request("POST", `/items/${id}/edit_preview`, { new_text: newText });
  }

  quality(id: string, deterministicOnly = false): Promise<QualityReportView> {
    const suffix = deterministicOnly ? "?deterministic_only=true" : "";
    return this.request("GET", `/items/${id}/quality${suffix}`);
  }

  similarity(payload: Record<string, unknown>): Promise<MatrixResponse> {
    return this.request("POST", "/metrics/similarity", payload);
  }

  kappa(payload: Record<string, unknown>): Promise<KappaResponse> {
    return this.request("POST", "/metrics/kappa", payload);
  }

  listBanks(): Promise<{ banks: BankView[] }> {
    return this.request("GET", "/banks");
  }

  createBank(id: string, discipline: string): Promise<BankView> {
    return this.request("POST", "/banks", { id, discipline });
  }

  getBank(id: string): Promise<BankView> {
    return this.request("GET", `/banks/${id}`);
  }

  addPrototype(bankId: string, concept: string, itemId: string): Promise<BankView> {
    return this.request("POST", `/banks/${bankId}/prototype`, {
      concept,
      item_id: itemId,
    });
  }

  attachSeries(
    bankId: string,
    concept: string,
    itemIds: string[],
    evidence: Record<string, unknown>,
  ): Promise<BankView> {
    return this.request("POST", `/banks/${bankId}/series`, {
      concept,
      item_ids: itemIds,
      evidence,
    });
  }

  compileVariants(bankId: string, n: number, seed: number): Promise<VariantsResponse> {
    return this.request("POST", `/banks/${bankId}/variants`, { n, seed });
  }

  audit(sessionId: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/sessions/${sessionId}/audit`);
  }

  health(): Promise<{ status: string; roles: string[] }> {
    return this.request("GET", "/health");
  }
}
