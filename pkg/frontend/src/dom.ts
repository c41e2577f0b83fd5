import { buildScene, fitTransform, formatPurity } from "./scene";
import type { SessionStore } from "./store";

const SVG_NS = "http://www.w3.org/2000/svg";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

export function renderApp(root: HTMLElement, store: SessionStore) {
  root.innerHTML = "";
  const banner = el("div", { class: "banner hidden" });
  const plotWrap = el("div", { class: "plot" });
  const svg = svgEl("svg", { width: "900", height: "440" });
  plotWrap.appendChild(svg);
  const side = el("div", { class: "side" });
  const layers = el("div", { class: "layers" });
  const counts = el("div", { class: "counts" });
  const candidatePanel = el("div", { class: "candidates" });
  const rulePanel = el("div", { class: "rules" });
  const actions = el("div", { class: "actions" });
  side.append(counts, layers, candidatePanel, actions, rulePanel);
  root.append(banner, plotWrap, side);

  const acceptBtn = el("button", {}, "accept selected");
  const undoBtn = el("button", {}, "undo");
  const pruneRefuseBtn = el("button", {}, "prune (refuse)");
  const pruneAssocBtn = el("button", {}, "prune (associate)");
  const joinBtn = el("button", {}, "join rules");
  const candidatesBtn = el("button", {}, "search candidates");
  const minCases = el("input", { type: "number", value: "17", min: "1" }) as HTMLInputElement;
  actions.append(candidatesBtn, acceptBtn, undoBtn, minCases, pruneRefuseBtn, pruneAssocBtn, joinBtn);

  candidatesBtn.onclick = () => void store.refreshCandidates();
  acceptBtn.onclick = () => void store.acceptSelected();
  undoBtn.onclick = () => void store.undo();
  pruneRefuseBtn.onclick = () => void store.prune(Number(minCases.value), "refuse");
  pruneAssocBtn.onclick = () => void store.prune(Number(minCases.value), "associate");
  joinBtn.onclick = () => void store.join();

  for (const name of ["polylines", "candidates", "acceptedBoxes", "explanation"] as const) {
    const label = el("label", {}, name);
    const box = el("input", { type: "checkbox" }) as HTMLInputElement;
    box.checked = store.view.layers[name];
    box.onchange = () => store.toggleLayer(name);
    label.prepend(box);
    layers.appendChild(label);
  }

  svg.addEventListener("dblclick", (event) => {
    // explain the polyline nearest to the click, using its exact case values
    const rect = svg.getBoundingClientRect();
    const sx = event.clientX - rect.left;
    const sy = event.clientY - rect.top;
    let best: { d: number; index: number } | null = null;
    const t = store.view.transform;
    for (const p of store.polylines) {
      for (const [x, y] of p.nodes) {
        const dx = t.translateX + x * t.scale - sx;
        const dy = t.translateY - y * p.render_side * t.scale - sy;
        const d = dx * dx + dy * dy;
        if (!best || d < best.d) best = { d, index: p.index };
      }
    }
    if (best !== null) {
      const chosen = store.polylines.find((p) => p.index === best!.index);
      if (chosen) void store.explainPoint(chosen.nodes.length ? reconstruct(chosen) : []);
    }
  });

  // exact inverse of the default WBC partial-dynamic drawing for explain-on-click
  function reconstruct(p: { nodes: [number, number][] }): number[] {
    const values: number[] = [];
    let prev = 0;
    for (const [x, y] of p.nodes) {
      values.push(x - prev, y);
      prev = x;
    }
    values.pop(); // duplicated last attribute
    return values;
  }

  function draw() {
    banner.className = "banner" + (store.view.readOnly || store.view.conflict ? "" : " hidden");
    banner.textContent = store.view.readOnly
      ? "connection lost: read-only"
      : store.view.conflict
        ? "session changed elsewhere: refresh"
        : "";
    if (store.view.conflict) {
      const refresh = el("button", {}, "refresh");
      refresh.onclick = () => void store.resync();
      banner.appendChild(refresh);
    }

    if (store.summary && store.polylines.length && store.view.transform.scale === 10) {
      store.view.transform = fitTransform(store.polylines, 900, 440);
    }

    while (svg.firstChild) svg.removeChild(svg.firstChild);
    const scene = buildScene(store.view, store.sceneData());
    svg.appendChild(
      svgEl("line", {
        x1: "0",
        x2: "900",
        y1: String(scene.baselineY),
        y2: String(scene.baselineY),
        stroke: "#999",
        "stroke-width": "1",
      }),
    );
    for (const poly of scene.polylines) {
      const attrs: Record<string, string> = {
        points: poly.points.map(([x, y]) => `${x},${y}`).join(" "),
        fill: "none",
        stroke: poly.color,
        "stroke-width": String(poly.width),
        opacity: String(poly.opacity),
      };
      if (poly.dash) attrs["stroke-dasharray"] = poly.dash;
      svg.appendChild(svgEl("polyline", attrs));
    }
    for (const rect of scene.rects) {
      svg.appendChild(
        svgEl("rect", {
          x: String(rect.x),
          y: String(rect.y),
          width: String(Math.max(rect.width, 1)),
          height: String(Math.max(rect.height, 1)),
          fill: "none",
          stroke: rect.stroke,
          "stroke-width": rect.selected ? "2.5" : rect.kind === "accepted" ? "1.8" : "1",
          "stroke-dasharray": rect.kind === "candidate" ? "4 2" : "",
        }),
      );
      const label = svgEl("text", {
        x: String(rect.x + 2),
        y: String(rect.y - 3),
        "font-size": "9",
        fill: rect.stroke,
      });
      label.textContent = rect.badge;
      svg.appendChild(label);
    }

    counts.innerHTML = "";
    if (store.summary) {
      counts.appendChild(
        el("div", { class: "total" },
           `${store.summary.dataset}: ${store.summary.remaining} of ${store.summary.total_cases} remaining (${store.summary.status})`),
      );
      for (const [label, count] of Object.entries(store.summary.remaining_counts)) {
        counts.appendChild(el("div", { class: "count-row" }, `${label}: ${count}`));
      }
    }

    candidatePanel.innerHTML = "";
    candidatePanel.appendChild(el("h3", {}, `candidates (top ${store.candidates.length})`));
    for (const row of store.candidates) {
      const selected =
        store.view.selectedCandidate?.className === row.className &&
        store.view.selectedCandidate?.index === row.index;
      const item = el(
        "div",
        { class: "candidate" + (selected ? " selected" : "") },
        `${row.className} [${row.candidate.corners.join(", ")}] ` +
          `purity ${formatPurity(row.candidate.purity)} covers ${row.candidate.coverage}`,
      );
      item.onclick = () => store.selectCandidate(row.className, row.index);
      candidatePanel.appendChild(item);
    }

    rulePanel.innerHTML = "";
    rulePanel.appendChild(el("h3", {}, "rules"));
    for (const row of store.ruleRows()) {
      rulePanel.appendChild(
        el("div", { class: "rule" }, `${row.id}: ${row.text} (${row.covered} cases)`),
      );
    }

    const disabled = store.view.readOnly || store.view.conflict;
    for (const btn of [acceptBtn, undoBtn, pruneRefuseBtn, pruneAssocBtn, joinBtn]) {
      btn.disabled = disabled;
    }
  }

  store.subscribe(draw);
  draw();
}
