// Typed client for the adjudication service. The console is read-only
// except for decisions: every rendered value comes straight from these
// responses, never from client-side re-scoring.

export interface ReviewOut {
  review_id: string;
  item_id: string;
  user_id: string;
  text: string;
  image_refs: string[];
  created_at: number;
}

export interface AdjudicationOut {
  review_id: string;
  verdict: "fraudulent" | "genuine" | "inconclusive";
  risk_level: "low" | "medium" | "high";
  evidence_chains: string[];
  source: string;
  created_at: number;
}

export interface GraphNodeOut {
  id: string;
  kind: "review" | "entity";
  role?: "meta" | "retrieved" | "expanded";
  entity_type?: string;
  entity_id?: string;
}

export interface GraphEdgeOut {
  kind: "rr" | "re" | "ee";
  source: string;
  target: string;
  weight?: number;
  relation?: string;
}

export interface GraphOut {
  meta_review_id: string;
  nodes: GraphNodeOut[];
  edges: GraphEdgeOut[];
}

export interface DecisionOut {
  adjudication_id: string;
  decision: "adopted" | "rejected";
  auditor_id: string;
  note: string | null;
  decided_at: number;
}

export interface CaseOut {
  case_id: string;
  review: ReviewOut;
  graph: GraphOut;
  adjudication: AdjudicationOut;
  timings: Record<string, number>;
  decision: DecisionOut | null;
  decision_history: DecisionOut[];
  created_at: number;
}

export interface AdoptionOut {
  adoption_rate: number | null;
  adopted: number;
  rejected: number;
  decided: number;
}

export class NotFoundError extends Error {}

async function getJson<T>(url: string): Promise<T> {
  const reply = await fetch(url);
  if (reply.status === 404) {
    throw new NotFoundError(`not found: ${url}`);
  }
  if (!reply.ok) {
    throw new Error(`GET ${url} failed: ${reply.status}`);
  }
  return (await reply.json()) as T;
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  fetchCase(caseId: string): Promise<CaseOut> {
    return getJson<CaseOut>(`${this.baseUrl}/cases/${encodeURIComponent(caseId)}`);
  }

  fetchGraph(caseId: string): Promise<GraphOut> {
    return getJson<GraphOut>(
      `${this.baseUrl}/cases/${encodeURIComponent(caseId)}/graph`,
    );
  }

  fetchAdoption(): Promise<AdoptionOut> {
    return getJson<AdoptionOut>(`${this.baseUrl}/metrics/adoption`);
  }

  async submitDecision(
    caseId: string,
    decision: "adopted" | "rejected",
    auditorId: string,
    note?: string,
  ): Promise<{ history_length: number }> {
    const reply = await fetch(
      `${this.baseUrl}/cases/${encodeURIComponent(caseId)}/decision`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ decision, auditor_id: auditorId, note: note ?? null }),
      },
    );
    if (!reply.ok) {
      throw new Error(`decision rejected: ${reply.status}`);
    }
    return (await reply.json()) as { history_length: number };
  }
}
