// Response shapes of the review service API. The UI renders these
// verbatim; it never computes domain metrics on its own.

export interface BudgetView {
  adjustment_prompts_used: number;
  manual_words_edited: number;
}

export interface VerdictView {
  criterion: number;
  verdict: "pass" | "fail";
  evaluator: string;
  rationale: string;
  evidence: string[];
}

export interface ItemView {
  id: string;
  status: string;
  source_role: string;
  rendered: string;
  stem: string;
  question: string;
  options: string[];
  correct_index: number;
  deterministic_verdicts: VerdictView[];
  budget: BudgetView;
}

export interface QaCandidateView {
  number: number;
  question: string;
  answer: string;
}

export interface GateDecisionView {
  gate: string;
  action: string;
  reviewer: string;
  item_id: string | null;
}

export interface SessionView {
  id: string;
  mode: string;
  stage: string;
  pending_gate: string | null;
  selected_concept: string | null;
  qa_candidates: QaCandidateView[];
  artifacts: Record<string, { text: string; transcript_ids: string[] }>;
  items: Record<string, ItemView>;
  open_item_ids: string[];
  gate_log: GateDecisionView[];
  budgets: Record<string, BudgetView>;
  parse_reports: string[][];
  created_at: string;
}

export interface EditPreview {
  word_delta: number;
  manual_words_edited: number;
  within_budget: boolean;
}

export interface QualityReportView {
  item_id: string;
  verdicts: VerdictView[];
  accepted: boolean | null;
  failed_ids: number[];
  coding: string | null;
}

export interface SimilaritySummaryView {
  mean: number;
  sd: number;
  minimum: number;
  maximum: number;
  prototype_mean: number;
  prototype_sd: number;
}

export interface SharedFeaturesView {
  shared: string[];
  only_a: string[];
  only_b: string[];
}

export interface MatrixResponse {
  kind: string;
  params: { theta: number; alpha: number; beta: number };
  item_ids: string[];
  values: number[][];
  summary: SimilaritySummaryView;
  csv: string;
  shared_features?: Record<string, SharedFeaturesView>;
  errata?: { row_id: string; col_id: string; computed: number; reference: number }[];
}

export interface KappaResponse {
  a: number;
  b: number;
  c: number;
  d: number;
  n: number;
  p_o: number;
  p_e: number;
  kappa: number;
  band: string;
  report: string;
}

export interface SlotView {
  concept: string;
  prototype_id: string;
  series_ids: string[];
  evidence_refs: string[];
  series_size: number;
  prototype_preview: string | null;
}

export interface BankView {
  id: string;
  discipline: string;
  slots: SlotView[];
  pools: { open: string[]; secret: string[] };
  min_series_size: number;
}

export interface VariantsResponse {
  variants: { variant_id: string; item_ids: string[] }[];
  sheets: Record<string, string>;
  answer_key: string;
}

export interface ItemResponse {
  item: Record<string, unknown>;
  rendered: string;
  session_id: string;
  budget: BudgetView;
}

export interface ApiError {
  code: string;
  message: string;
  detail: unknown;
}

export class RequestFailed extends Error {
  constructor(
    public status: number,
    public body: ApiError,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}
