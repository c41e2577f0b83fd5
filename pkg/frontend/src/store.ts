import { ApiClient, ApiError, StaleDigestError } from "./api";
import type { AcceptedBox, SceneData } from "./scene";
import type {
  CandidateDto,
  ExplanationPayload,
  PolylineDto,
  RuleDto,
  SessionSummary,
  ViewState,
} from "./types";
import { DEFAULT_CLASS_COLORS, DEFAULT_LAYERS } from "./types";

export interface CandidateRow {
  className: string;
  index: number;
  candidate: CandidateDto;
}

export type Listener = () => void;

/**
 * Authoritative-server store: every mutation round-trips to the service and
 * the view is rebuilt from the response. Nothing is computed optimistically,
 * so any action sequence replayed from the session log gives the same rules.
 */
export class SessionStore {
  view: ViewState = {
    digest: "",
    transform: { scale: 10, translateX: 24, translateY: 220 },
    layers: { ...DEFAULT_LAYERS },
    selectedCandidate: null,
    classColors: { ...DEFAULT_CLASS_COLORS },
    readOnly: false,
    conflict: false,
  };
  summary: SessionSummary | null = null;
  polylines: PolylineDto[] = [];
  candidates: CandidateRow[] = [];
  accepted: AcceptedBox[] = [];
  rulesText = "";
  explanation: ExplanationPayload | null = null;
  lastError: string | null = null;

  private listeners: Listener[] = [];

  constructor(private readonly api: ApiClient, private readonly topK = 10) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit() {
    for (const listener of this.listeners) listener();
  }

  get sessionId(): string {
    if (!this.summary) throw new Error("no session yet");
    return this.summary.id;
  }

  get classOrder(): string[] {
    return Object.keys(this.summary?.remaining_counts ?? {});
  }

  sceneData(): SceneData {
    return {
      polylines: this.polylines,
      classOrder: this.classOrder,
      candidates: this.candidates,
      accepted: this.accepted,
      explanation: this.explanation,
    };
  }

  /** Terminal rule rows for the side panel; counts are the server's. */
  ruleRows(): { id: string; text: string; covered: number; predicted: string }[] {
    const rows: { id: string; text: string; covered: number; predicted: string }[] = [];
    const walk = (rule: RuleDto) => {
      const pos = rule.positive.join(" u ");
      const neg = rule.negative.length ? ` & not ${rule.negative.join(" u ")}` : "";
      rows.push({
        id: rule.id,
        text: `x in ${pos}${neg} -> ${rule.predicted_class}`,
        covered: rule.covered_count,
        predicted: rule.predicted_class,
      });
      if (rule.else_branch) walk(rule.else_branch);
    };
    for (const rule of this.summary?.rules ?? []) walk(rule);
    return rows;
  }

  private async guard<T>(action: () => Promise<T>): Promise<T | null> {
    try {
      const result = await action();
      this.view.readOnly = false;
      this.view.conflict = false;
      this.lastError = null;
      return result;
    } catch (error) {
      if (error instanceof StaleDigestError) {
        this.view.conflict = true;
        this.lastError = error.message;
      } else if (error instanceof ApiError) {
        this.lastError = error.message;
      } else {
        // transport failure: keep the plot, block mutations
        this.view.readOnly = true;
        this.lastError = "connection lost; read-only until the service returns";
      }
      this.emit();
      return null;
    }
  }

  private applySummary(summary: SessionSummary) {
    this.summary = summary;
    this.view.digest = summary.digest;
    this.view.selectedCandidate = null;
  }

  async createSession(dataset: string, decimate = 0): Promise<void> {
    const summary = await this.guard(() => this.api.createSession(dataset));
    if (!summary) return;
    this.applySummary(summary);
    await this.refreshProjection(decimate);
    await this.refreshRules();
    this.emit();
  }

  async refreshProjection(decimate = 0): Promise<void> {
    const projection = await this.guard(() => this.api.getProjection(this.sessionId, decimate));
    if (projection) {
      this.polylines = projection.polylines;
      this.emit();
    }
  }

  async refreshCandidates(): Promise<void> {
    const response = await this.guard(() => this.api.getCandidates(this.sessionId, this.topK));
    if (!response) return;
    this.view.digest = response.digest;
    this.candidates = Object.entries(response.candidates).flatMap(([className, rows]) =>
      rows.map((candidate, index) => ({ className, index, candidate })),
    );
    this.emit();
  }

  async refreshRules(): Promise<void> {
    const rules = await this.guard(() => this.api.getRules(this.sessionId));
    if (!rules) return;
    this.rulesText = rules.rules_text;
    this.accepted = [];
    if (rules.rules_file) {
      const file = JSON.parse(rules.rules_file) as {
        boxes: Record<string, { id: string; corners: [number, number, number, number]; pair: unknown }>;
        rules: { positive: string[]; predicted_class: string }[];
      };
      for (const rule of file.rules) {
        for (const boxId of rule.positive) {
          const box = file.boxes[boxId];
          if (box && !box.pair) {
            this.accepted.push({
              id: boxId,
              corners: box.corners,
              predictedClass: rule.predicted_class,
            });
          }
        }
      }
    }
    this.emit();
  }

  private async afterMutation(summary: SessionSummary | null): Promise<boolean> {
    if (!summary) return false;
    this.applySummary(summary);
    this.candidates = [];
    await this.refreshProjection();
    await this.refreshRules();
    this.emit();
    return true;
  }

  selectCandidate(className: string, index: number) {
    this.view.selectedCandidate = { className, index };
    this.emit();
  }

  async acceptSelected(): Promise<boolean> {
    const picked = this.view.selectedCandidate;
    if (!picked || this.view.readOnly) return false;
    const row = this.candidates.find(
      (c) => c.className === picked.className && c.index === picked.index,
    );
    if (!row) return false;
    return this.accept(row.candidate.corners, row.className);
  }

  async accept(
    corners: [number, number, number, number],
    predictedClass: string,
  ): Promise<boolean> {
    if (this.view.readOnly) return false;
    const summary = await this.guard(() =>
      this.api.accept(this.sessionId, this.view.digest, corners, predictedClass),
    );
    return this.afterMutation(summary);
  }

  async undo(): Promise<boolean> {
    if (this.view.readOnly) return false;
    const summary = await this.guard(() => this.api.undo(this.sessionId, this.view.digest));
    return this.afterMutation(summary);
  }

  async prune(minCases: number, mode: "refuse" | "associate"): Promise<boolean> {
    if (this.view.readOnly) return false;
    const summary = await this.guard(() =>
      this.api.prune(this.sessionId, this.view.digest, minCases, mode),
    );
    return this.afterMutation(summary);
  }

  async join(): Promise<boolean> {
    if (this.view.readOnly) return false;
    const summary = await this.guard(() => this.api.join(this.sessionId, this.view.digest));
    return this.afterMutation(summary);
  }

  async explainPoint(point: number[]): Promise<void> {
    const response = await this.guard(() => this.api.explain(this.sessionId, point));
    if (response) {
      this.explanation = response.explanation;
      this.emit();
    }
  }

  /** Re-sync after a conflict: the server state wins, the stale view is dropped. */
  async resync(): Promise<void> {
    const summary = await this.guard(() => this.api.getSession(this.sessionId));
    if (!summary) return;
    this.applySummary(summary);
    this.view.conflict = false;
    this.candidates = [];
    await this.refreshProjection();
    await this.refreshRules();
    this.emit();
  }

  toggleLayer(name: keyof ViewState["layers"]) {
    this.view.layers[name] = !this.view.layers[name];
    this.emit();
  }
}
