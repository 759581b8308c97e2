// Typed client for the session service. All numbers pass through untouched:
// the UI never rescales or re-rounds values it reports.

export interface PendingQuery {
  query_id: string;
  y1: number[];
  y2: number[];
  purpose: string;
  objective_labels: string[];
}

export interface Incumbent {
  x: number[];
  y: number[];
  utility: number;
}

export interface SessionStatus {
  session_id: string;
  lifecycle: "awaiting_comparison" | "computing" | "completed";
  stage: string;
  evaluations_used: number;
  budget: number;
  queries_answered: number;
  incumbent: Incumbent | null;
  recent_gd_evaluations: number;
  revision: number;
  objective_labels: string[];
}

export interface Candidate {
  x: number[];
  y: number[];
  utility: number;
  provenance: string;
}

export interface CreateSessionResult {
  session_id: string;
  status: SessionStatus;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parse(resp: Response): Promise<any> {
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, body.code ?? "error", body.message ?? resp.statusText);
  }
  return body;
}

export class SessionApi {
  constructor(private baseUrl: string = "") {}

  async createSession(spec: Record<string, unknown>): Promise<CreateSessionResult> {
    const resp = await fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(spec),
    });
    return parse(resp);
  }

  async getQuery(sessionId: string): Promise<PendingQuery> {
    return parse(await fetch(`${this.baseUrl}/sessions/${sessionId}/query`));
  }

  async submitComparison(sessionId: string, queryId: string, choice: 0 | 1): Promise<any> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/comparison`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ query_id: queryId, choice }),
    });
    return parse(resp);
  }

  async getStatus(sessionId: string, wait = 0, revision?: number): Promise<SessionStatus> {
    const params = new URLSearchParams();
    if (wait > 0) params.set("wait", String(wait));
    if (revision !== undefined) params.set("revision", String(revision));
    const qs = params.toString();
    return parse(
      await fetch(`${this.baseUrl}/sessions/${sessionId}/status${qs ? "?" + qs : ""}`),
    );
  }

  async getCandidates(sessionId: string, k: number): Promise<{ candidates: Candidate[] }> {
    return parse(await fetch(`${this.baseUrl}/sessions/${sessionId}/candidates?k=${k}`));
  }
}
