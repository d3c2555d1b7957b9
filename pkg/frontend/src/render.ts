// DOM construction for the case view. Pure functions of API payloads plus
// a little interaction state (selected chain, pending decision).

import type { AdoptionOut, CaseOut, GraphOut } from "./api.js";
import { computeLayout, type Layout } from "./layout.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderSummary(caseData: CaseOut): HTMLElement {
  const root = el("section", "case-summary");
  root.appendChild(el("h2", undefined, `Case ${caseData.case_id}`));

  const verdictRow = el("div", "verdict-row");
  const verdict = el(
    "span",
    `verdict verdict-${caseData.adjudication.verdict}`,
    caseData.adjudication.verdict,
  );
  verdict.dataset.testid = "verdict";
  const risk = el(
    "span",
    `risk-badge risk-${caseData.adjudication.risk_level}`,
    `${caseData.adjudication.risk_level} risk`,
  );
  risk.dataset.testid = "risk-badge";
  verdictRow.append(verdict, risk);
  verdictRow.appendChild(
    el("span", "source", `source: ${caseData.adjudication.source}`),
  );
  root.appendChild(verdictRow);

  const review = el("div", "review-body");
  review.appendChild(el("h3", undefined, `Review ${caseData.review.review_id}`));
  review.appendChild(el("p", "review-text", caseData.review.text || "(no text)"));
  const meta = el("p", "review-meta");
  meta.textContent =
    `item ${caseData.review.item_id} · user ${caseData.review.user_id}` +
    (caseData.review.image_refs.length
      ? ` · ${caseData.review.image_refs.length} image(s)`
      : "");
  review.appendChild(meta);
  root.appendChild(review);
  return root;
}

export function renderChains(
  caseData: CaseOut,
  onSelect: (chainText: string, index: number) => void,
): HTMLElement {
  const root = el("section", "chains");
  root.appendChild(el("h3", undefined, "Evidence chains"));
  const chains = caseData.adjudication.evidence_chains;
  if (!chains.length) {
    const empty = el("p", "empty-state", "No evidence chains for this case.");
    empty.dataset.testid = "chains-empty";
    root.appendChild(empty);
    return root;
  }
  const list = el("ol", "chain-list");
  chains.forEach((chain, index) => {
    const item = el("li", "chain-step", chain);
    item.dataset.testid = `chain-${index}`;
    item.addEventListener("click", () => {
      list.querySelectorAll(".selected").forEach((other) =>
        other.classList.remove("selected"),
      );
      item.classList.add("selected");
      onSelect(chain, index);
    });
    list.appendChild(item);
  });
  root.appendChild(list);
  return root;
}

/** Node ids mentioned by a chain, matched against the graph's node set. */
export function nodesReferencedByChain(
  chain: string,
  graph: GraphOut,
): Set<string> {
  const referenced = new Set<string>();
  for (const node of graph.nodes) {
    const bare = node.kind === "entity" ? node.entity_id ?? "" : node.id;
    if (chain.includes(node.id) || (bare && chain.includes(bare))) {
      referenced.add(node.id);
    }
  }
  return referenced;
}

export function renderGraph(graph: GraphOut, seed: string): SVGSVGElement {
  const layout: Layout = computeLayout(graph.nodes, graph.edges, seed);
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${layout.width} ${layout.height}`);
  svg.setAttribute("class", "graph");
  svg.dataset.testid = "graph";

  for (const edge of layout.edges) {
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", edge.source.x.toFixed(1));
    line.setAttribute("y1", edge.source.y.toFixed(1));
    line.setAttribute("x2", edge.target.x.toFixed(1));
    line.setAttribute("y2", edge.target.y.toFixed(1));
    line.setAttribute(
      "class",
      `edge edge-${edge.kind}` +
        (edge.weight !== undefined && edge.weight >= 0.7 ? " edge-strong" : ""),
    );
    line.dataset.source = edge.source.id;
    line.dataset.target = edge.target.id;
    if (edge.weight !== undefined) {
      const title = document.createElementNS(SVG_NS, "title");
      title.textContent = `similarity ${edge.weight.toFixed(3)}`;
      line.appendChild(title);
    }
    svg.appendChild(line);
  }

  for (const node of layout.nodes) {
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute(
      "class",
      `node node-${node.kind}` + (node.role ? ` node-${node.role}` : ""),
    );
    group.dataset.nodeId = node.id;
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", node.x.toFixed(1));
    circle.setAttribute("cy", node.y.toFixed(1));
    circle.setAttribute("r", String(node.radius));
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = node.id;
    circle.appendChild(title);
    group.appendChild(circle);
    if (node.kind === "entity" || node.role === "meta") {
      const label = document.createElementNS(SVG_NS, "text");
      label.setAttribute("x", (node.x + node.radius + 3).toFixed(1));
      label.setAttribute("y", (node.y + 3).toFixed(1));
      label.textContent = node.id;
      group.appendChild(label);
    }
    svg.appendChild(group);
  }
  return svg;
}

export function highlightNodes(svg: SVGSVGElement, nodeIds: Set<string>): void {
  svg.querySelectorAll(".node").forEach((group) => {
    const id = (group as SVGGElement).dataset.nodeId ?? "";
    group.classList.toggle("highlighted", nodeIds.has(id));
  });
  svg.querySelectorAll(".edge").forEach((line) => {
    const source = (line as SVGLineElement).dataset.source ?? "";
    const target = (line as SVGLineElement).dataset.target ?? "";
    line.classList.toggle(
      "highlighted",
      nodeIds.has(source) && nodeIds.has(target),
    );
  });
}

export function renderAdoptionWidget(metrics: AdoptionOut): HTMLElement {
  const root = el("div", "adoption-widget");
  root.dataset.testid = "adoption-widget";
  const rate =
    metrics.adoption_rate === null
      ? "n/a"
      : `${(metrics.adoption_rate * 100).toFixed(1)}%`;
  root.appendChild(el("span", "adoption-rate", `adoption ${rate}`));
  root.appendChild(
    el(
      "span",
      "adoption-counts",
      `${metrics.adopted} adopted / ${metrics.rejected} rejected ` +
        `(${metrics.decided} decided)`,
    ),
  );
  return root;
}

export interface DecisionPanelState {
  latest: string | null;
  historyLength: number;
  pendingRetry: boolean;
}

export function renderDecisionPanel(
  state: DecisionPanelState,
  onDecide: (decision: "adopted" | "rejected") => void,
  onRetry: () => void,
): HTMLElement {
  const root = el("section", "decision-panel");
  root.appendChild(el("h3", undefined, "Auditor decision"));
  const status = el(
    "p",
    "decision-status",
    state.latest
      ? `latest: ${state.latest} (${state.historyLength} in history)`
      : "no decision yet",
  );
  status.dataset.testid = "decision-status";
  root.appendChild(status);

  const buttons = el("div", "decision-buttons");
  const makeButton = (decision: "adopted" | "rejected", label: string) => {
    const button = el("button", `decide decide-${decision}`, label);
    button.dataset.testid = `decide-${decision}`;
    button.addEventListener("click", () => onDecide(decision));
    return button;
  };
  buttons.append(makeButton("adopted", "Adopt"), makeButton("rejected", "Reject"));
  root.appendChild(buttons);

  if (state.pendingRetry) {
    const banner = el(
      "div",
      "retry-banner",
      "Decision queued: the service was unreachable.",
    );
    banner.dataset.testid = "retry-banner";
    const retry = el("button", "retry", "Retry now");
    retry.addEventListener("click", onRetry);
    banner.appendChild(retry);
    root.appendChild(banner);
  }
  return root;
}

export function renderNotFound(caseId: string): HTMLElement {
  const root = el("section", "not-found");
  root.dataset.testid = "not-found";
  root.appendChild(el("h2", undefined, "Case not found"));
  root.appendChild(
    el("p", undefined, `No case ${caseId} exists on this service.`),
  );
  return root;
}

export function renderNetworkError(onRetry: () => void): HTMLElement {
  const root = el("section", "network-error");
  root.dataset.testid = "network-error";
  root.appendChild(el("p", undefined, "Could not reach the service."));
  const retry = el("button", "retry", "Retry");
  retry.addEventListener("click", onRetry);
  root.appendChild(retry);
  return root;
}
