/** DTOs mirroring the /api/v1 session service payloads. */

export interface RuleDto {
  id: string;
  positive: string[];
  negative: string[];
  predicted_class: string;
  covered_count: number;
  order: number;
  intermediate: boolean;
  requires: string | null;
  else_branch: RuleDto | null;
}

export interface SessionSummary {
  id: string;
  digest: string;
  status: "idle" | "candidates_ready" | "complete";
  dataset: string;
  total_cases: number;
  remaining: number;
  remaining_counts: Record<string, number>;
  rules: RuleDto[];
  rules_text: string;
}

export interface PolylineDto {
  index: number;
  label: string;
  render_side: 1 | -1;
  nodes: [number, number][];
  remaining: boolean;
}

export interface ProjectionResponse {
  digest: string;
  count: number;
  decimated: boolean;
  polylines: PolylineDto[];
}

export interface CandidateDto {
  corners: [number, number, number, number];
  counts: Record<string, number>;
  purity: number | null;
  coverage: number;
}

export interface CandidatesResponse {
  digest: string;
  candidates: Record<string, CandidateDto[]>;
}

export interface RulesResponse {
  digest: string;
  rules_file: string | null;
  rules_text: string;
}

export interface ExplanationBoxDto {
  corners: [number, number, number, number];
  purity: number;
  counts: Record<string, number>;
}

export interface ExplanationPayload {
  verdict: "explained" | "no_box_found";
  predicted_class: string | null;
  resolution: number | null;
  point: number[];
  polylines: Record<string, [number, number][]>;
  boxes: ExplanationBoxDto[];
  sandwich_training?: [number[], number[]];
  sandwich_artificial?: [number[], number[]];
}

export interface ExplainResponse {
  digest: string;
  explanation: ExplanationPayload;
}

/** Pan/zoom from projection space into screen pixels. */
export interface ViewportTransform {
  scale: number;
  translateX: number;
  translateY: number;
}

export interface LayerVisibility {
  polylines: boolean;
  grid: boolean;
  candidates: boolean;
  acceptedBoxes: boolean;
  explanation: boolean;
}

export interface SelectedCandidate {
  className: string;
  index: number;
}

/** Everything the renderer needs; all numbers come from the server. */
export interface ViewState {
  digest: string;
  transform: ViewportTransform;
  layers: LayerVisibility;
  selectedCandidate: SelectedCandidate | null;
  classColors: Record<string, string>;
  readOnly: boolean;
  conflict: boolean;
}

export const DEFAULT_LAYERS: LayerVisibility = {
  polylines: true,
  grid: false,
  candidates: true,
  acceptedBoxes: true,
  explanation: true,
};

/** benign drawn green above the baseline, malignant red mirrored below */
export const DEFAULT_CLASS_COLORS: Record<string, string> = {
  benign: "#2e8b57",
  malignant: "#c0392b",
};

const FALLBACK_COLORS = ["#2e8b57", "#c0392b", "#2459a8", "#c07e10", "#7d3fa8"];

export function colorFor(classColors: Record<string, string>, label: string, ordinal: number): string {
  return classColors[label] ?? FALLBACK_COLORS[ordinal % FALLBACK_COLORS.length];
}
