/** Payload shapes of the review service API, mirrored verbatim. */

export const CATEGORIES = [
  "lexical",
  "literal",
  "hallucination",
  "tense_shift",
  "loanword",
  "diacritics",
] as const;

export type Category = (typeof CATEGORIES)[number];

export type Budget = "zero" | "few" | "full";

export const BUDGETS: readonly Budget[] = ["zero", "few", "full"];

export interface ReviewTask {
  caption_id: string;
  state: "open" | "done";
  status: string;
  split: string;
  source_text: string;
  raw_translation: string | null;
  current_text: string | null;
  flags: string[];
  flag_sources: Record<string, string>;
  judge_parse_error: boolean;
  suggested_fix: string | null;
  version: number;
}

export interface QueueResponse {
  budget: Budget;
  open: number;
  done: number;
  tasks: ReviewTask[];
}

export interface EditEvent {
  before: string;
  after: string;
  categories: string[];
  annotator_id: string;
  timestamp: string;
}

export interface CaptionDetail extends ReviewTask {
  history: EditEvent[];
}

export interface EditBody {
  after: string;
  categories: string[];
  annotator_id: string;
  version: number;
}

export interface ApproveBody {
  annotator_id: string;
  version: number;
}

export interface Stats {
  captions: number;
  by_status: Record<string, number>;
  flag_counts: Record<string, number>;
  history_events: number;
  judge_parse_errors: number;
  open_tasks: Record<string, number>;
}
