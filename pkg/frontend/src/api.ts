/** Typed client for the annotation service HTTP API. */

export interface WorldComponent {
  mean: [number, number];
  sigma: number;
}

export interface WorldContext {
  components: WorldComponent[];
  bounds: { lo: [number, number]; hi: [number, number] };
}

export interface BatchItem {
  sample_id: string;
  point: [number, number];
  labeled: boolean;
}

export interface Progress {
  malign_labeled: number;
  benign_labeled: number;
  quota_malign: number;
  quota_benign: number;
  presented: number;
  quota_met: boolean;
}

export interface SessionInfo {
  session_id: string;
  round: number;
  quota: { malign: number; benign: number };
  world: WorldContext;
}

export interface BatchResponse {
  items: BatchItem[];
  quota_met: boolean;
  progress: Progress;
  world: WorldContext;
}

export interface LabelSubmission {
  sample_id: string;
  y: 0 | 1;
  elapsed_ms: number;
}

export interface RoundMetrics {
  round: number;
  presented: number;
  malign_presented: number;
  eval_malign_fraction: number | null;
  [key: string]: unknown;
}

export interface RunMetrics {
  run_id: string;
  status: string;
  rounds: RoundMetrics[];
  labels_count: number;
  total_label_seconds: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(base + path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!res.ok) {
    const body = await res.text();
    throw new ApiError(res.status, `${res.status} ${path}: ${body}`);
  }
  return (await res.json()) as T;
}

export class AnnotationApi {
  constructor(private base: string = "") {}

  createSession(runId: string, round: number): Promise<SessionInfo> {
    return request(this.base, "/api/sessions", {
      method: "POST",
      body: JSON.stringify({ run_id: runId, round }),
    });
  }

  fetchBatch(sessionId: string): Promise<BatchResponse> {
    return request(this.base, `/api/sessions/${sessionId}/batch`);
  }

  submitLabels(sessionId: string, labels: LabelSubmission[]): Promise<{ stored: number; progress: Progress }> {
    return request(this.base, `/api/sessions/${sessionId}/labels`, {
      method: "POST",
      body: JSON.stringify({ labels }),
    });
  }

  complete(sessionId: string): Promise<{ round: number; metrics: RoundMetrics; run_status: string }> {
    return request(this.base, `/api/sessions/${sessionId}/complete`, { method: "POST" });
  }

  listRuns(): Promise<Array<{ run_id: string; status: string; round: number; rounds: number }>> {
    return request(this.base, "/api/runs");
  }

  runMetrics(runId: string): Promise<RunMetrics> {
    return request(this.base, `/api/runs/${runId}/metrics`);
  }
}
