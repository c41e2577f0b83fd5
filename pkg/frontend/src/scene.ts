import type {
  CandidateDto,
  ExplanationPayload,
  PolylineDto,
  ViewState,
  ViewportTransform,
} from "./types";
import { colorFor } from "./types";

export interface ScenePolyline {
  points: [number, number][];
  color: string;
  width: number;
  opacity: number;
  dash: string | null;
  role: "case" | "explain-c" | "explain-a" | "explain-b" | "explain-d" | "explain-e";
  label?: string;
}

export interface SceneRect {
  x: number;
  y: number;
  width: number;
  height: number;
  stroke: string;
  kind: "candidate" | "accepted" | "explanation";
  selected: boolean;
  badge: string;
}

export interface Scene {
  polylines: ScenePolyline[];
  rects: SceneRect[];
  baselineY: number;
}

export interface AcceptedBox {
  id: string;
  corners: [number, number, number, number];
  predictedClass: string;
}

export interface SceneData {
  polylines: PolylineDto[];
  classOrder: string[];
  candidates: { className: string; index: number; candidate: CandidateDto }[];
  accepted: AcceptedBox[];
  explanation: ExplanationPayload | null;
}

export function toScreenX(t: ViewportTransform, x: number): number {
  return t.translateX + x * t.scale;
}

export function toScreenY(t: ViewportTransform, y: number): number {
  return t.translateY - y * t.scale;
}

/** Screen rectangle for projection-space corners (x1, x2, y1, y2). */
export function boxToRect(
  t: ViewportTransform,
  corners: [number, number, number, number],
): { x: number; y: number; width: number; height: number } {
  const [x1, x2, y1, y2] = corners;
  return {
    x: toScreenX(t, x1),
    y: toScreenY(t, y2),
    width: (x2 - x1) * t.scale,
    height: (y2 - y1) * t.scale,
  };
}

/** Display formatting only; the number itself always comes from the server. */
export function formatPurity(purity: number | null): string {
  return purity === null ? "n/a" : `${(purity * 100).toFixed(2)}%`;
}

export function candidateBadge(candidate: CandidateDto): string {
  return `${formatPurity(candidate.purity)} / ${candidate.coverage}`;
}

/** Fit the projection into a width x height canvas, baseline centered. */
export function fitTransform(
  polylines: PolylineDto[],
  width: number,
  height: number,
  margin = 24,
): ViewportTransform {
  let maxX = 1;
  let maxY = 1;
  for (const p of polylines) {
    for (const [x, y] of p.nodes) {
      if (x > maxX) maxX = x;
      if (Math.abs(y) > maxY) maxY = Math.abs(y);
    }
  }
  const scale = Math.min((width - 2 * margin) / maxX, (height - 2 * margin) / (2 * maxY));
  return { scale, translateX: margin, translateY: height / 2 };
}

const EXPLAIN_STYLES: Record<string, { color: string; dash: string | null; width: number }> = {
  c: { color: "#111111", dash: null, width: 2.5 },
  a: { color: "#2e8b57", dash: "6 3", width: 1.5 },
  b: { color: "#2e8b57", dash: "2 3", width: 1.5 },
  d: { color: "#2459a8", dash: "6 3", width: 1.5 },
  e: { color: "#2459a8", dash: "2 3", width: 1.5 },
};

/**
 * Pure scene construction: polylines mirrored per class side, candidate and
 * accepted boxes as outlined rectangles with purity/coverage badges, and the
 * explanation overlay (c, a, b, d, e in distinct styles).
 */
export function buildScene(view: ViewState, data: SceneData): Scene {
  const t = view.transform;
  const scene: Scene = { polylines: [], rects: [], baselineY: toScreenY(t, 0) };

  if (view.layers.polylines) {
    for (const p of data.polylines) {
      const ordinal = Math.max(data.classOrder.indexOf(p.label), 0);
      scene.polylines.push({
        points: p.nodes.map(([x, y]) => [toScreenX(t, x), toScreenY(t, y * p.render_side)]),
        color: colorFor(view.classColors, p.label, ordinal),
        width: 0.7,
        opacity: p.remaining ? 0.45 : 0.12,
        dash: null,
        role: "case",
        label: p.label,
      });
    }
  }

  if (view.layers.candidates) {
    for (const { className, index, candidate } of data.candidates) {
      const ordinal = Math.max(data.classOrder.indexOf(className), 0);
      const rect = boxToRect(t, candidate.corners);
      scene.rects.push({
        ...rect,
        stroke: colorFor(view.classColors, className, ordinal),
        kind: "candidate",
        selected:
          view.selectedCandidate !== null &&
          view.selectedCandidate.className === className &&
          view.selectedCandidate.index === index,
        badge: candidateBadge(candidate),
      });
    }
  }

  if (view.layers.acceptedBoxes) {
    for (const box of data.accepted) {
      const ordinal = Math.max(data.classOrder.indexOf(box.predictedClass), 0);
      const rect = boxToRect(t, box.corners);
      scene.rects.push({
        ...rect,
        stroke: colorFor(view.classColors, box.predictedClass, ordinal),
        kind: "accepted",
        selected: false,
        badge: `${box.id} -> ${box.predictedClass}`,
      });
    }
  }

  if (view.layers.explanation && data.explanation && data.explanation.verdict === "explained") {
    for (const [name, nodes] of Object.entries(data.explanation.polylines)) {
      const style = EXPLAIN_STYLES[name];
      if (!style) continue;
      scene.polylines.push({
        points: nodes.map(([x, y]) => [toScreenX(t, x), toScreenY(t, y)]),
        color: style.color,
        width: style.width,
        opacity: 0.95,
        dash: style.dash,
        role: `explain-${name}` as ScenePolyline["role"],
      });
    }
    for (const box of data.explanation.boxes) {
      const rect = boxToRect(t, box.corners);
      scene.rects.push({
        ...rect,
        stroke: "#c0392b",
        kind: "explanation",
        selected: false,
        badge: formatPurity(box.purity),
      });
    }
  }

  return scene;
}
