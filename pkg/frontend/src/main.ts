// Console bootstrap: load one case (by ?case=<id>), render it, and wire the
// decision flow. Failed decision posts queue for retry; nothing is silently
// dropped.

import { ApiClient, NotFoundError, type CaseOut, type GraphOut } from "./api.js";
import {
  highlightNodes,
  nodesReferencedByChain,
  renderAdoptionWidget,
  renderChains,
  renderDecisionPanel,
  renderGraph,
  renderNetworkError,
  renderNotFound,
  renderSummary,
} from "./render.js";

interface PendingDecision {
  decision: "adopted" | "rejected";
}

export class CasePage {
  private caseData: CaseOut | null = null;
  private graph: GraphOut | null = null;
  private svg: SVGSVGElement | null = null;
  private pending: PendingDecision | null = null;
  private latestDecision: string | null = null;
  private historyLength = 0;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly caseId: string,
    private readonly auditorId: string = "console",
  ) {}

  async load(): Promise<void> {
    this.root.replaceChildren();
    try {
      const [caseData, graph] = await Promise.all([
        this.api.fetchCase(this.caseId),
        this.api.fetchGraph(this.caseId),
      ]);
      this.caseData = caseData;
      this.graph = graph;
      this.latestDecision = caseData.decision?.decision ?? null;
      this.historyLength = caseData.decision_history.length;
    } catch (err) {
      if (err instanceof NotFoundError) {
        this.root.appendChild(renderNotFound(this.caseId));
      } else {
        this.root.appendChild(renderNetworkError(() => void this.load()));
      }
      return;
    }
    this.renderAll();
    await this.refreshAdoption();
  }

  private renderAll(): void {
    if (!this.caseData || !this.graph) return;
    this.root.replaceChildren();
    this.root.appendChild(renderSummary(this.caseData));

    const columns = document.createElement("div");
    columns.className = "columns";

    const left = document.createElement("div");
    left.className = "left-column";
    left.appendChild(
      renderChains(this.caseData, (chain) => this.highlightChain(chain)),
    );
    left.appendChild(
      renderDecisionPanel(
        {
          latest: this.latestDecision,
          historyLength: this.historyLength,
          pendingRetry: this.pending !== null,
        },
        (decision) => void this.decide(decision),
        () => void this.retryPending(),
      ),
    );
    const adoptionHost = document.createElement("div");
    adoptionHost.dataset.testid = "adoption-host";
    left.appendChild(adoptionHost);
    columns.appendChild(left);

    const right = document.createElement("div");
    right.className = "right-column";
    this.svg = renderGraph(this.graph, this.caseData.case_id);
    right.appendChild(this.svg);
    columns.appendChild(right);

    this.root.appendChild(columns);
  }

  private highlightChain(chain: string): void {
    if (!this.svg || !this.graph) return;
    highlightNodes(this.svg, nodesReferencedByChain(chain, this.graph));
  }

  async refreshAdoption(): Promise<void> {
    const host = this.root.querySelector('[data-testid="adoption-host"]');
    if (!host) return;
    try {
      const metrics = await this.api.fetchAdoption();
      host.replaceChildren(renderAdoptionWidget(metrics));
    } catch {
      // widget is best-effort; the decision flow handles its own failures
    }
  }

  async decide(decision: "adopted" | "rejected"): Promise<void> {
    try {
      const reply = await this.api.submitDecision(
        this.caseId,
        decision,
        this.auditorId,
      );
      this.latestDecision = decision;
      this.historyLength = reply.history_length;
      this.pending = null;
    } catch {
      this.pending = { decision };
    }
    this.renderAll();
    await this.refreshAdoption();
  }

  async retryPending(): Promise<void> {
    if (this.pending) {
      await this.decide(this.pending.decision);
    }
  }
}

export function bootstrap(): void {
  const params = new URLSearchParams(window.location.search);
  const caseId = params.get("case");
  const root = document.getElementById("app");
  if (!root) return;
  if (!caseId) {
    root.textContent =
      "Open a case with ?case=<case_id> (case ids look like <review_id>:1).";
    return;
  }
  const page = new CasePage(root, new ApiClient(""), caseId);
  void page.load();
}

if (typeof window !== "undefined" && "document" in globalThis) {
  const auto = (globalThis as { __JARVIS_NO_AUTOBOOT__?: boolean })
    .__JARVIS_NO_AUTOBOOT__;
  if (!auto) {
    window.addEventListener("DOMContentLoaded", bootstrap);
  }
}
