/** Typed client for the coaching service REST API. Every console write goes
 *  through one of these calls, carrying the coach's author name. */

import {
  DraftRecord,
  Finding,
  HintRecord,
  PreviewResult,
  RoundManifest,
  TaskSummary,
  TrajectoryDetail,
  TrajectorySummary,
} from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`service error ${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly author: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { 'content-type': 'application/json' } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const parsed = await resp.json();
        detail = parsed.detail ?? JSON.stringify(parsed);
      } catch {
        /* non-JSON error body; keep the status text */
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  private get<T>(path: string): Promise<T> {
    return this.request<T>('GET', path);
  }

  // -- reads ------------------------------------------------------------

  health(): Promise<{ status: string; run_dir: string }> {
    return this.get('/api/health');
  }

  async rounds(): Promise<RoundManifest[]> {
    const body = await this.get<{ manifests: RoundManifest[] }>('/api/rounds');
    return body.manifests;
  }

  async tasks(): Promise<TaskSummary[]> {
    const body = await this.get<{ tasks: TaskSummary[] }>('/api/tasks');
    return body.tasks;
  }

  async trajectories(roundPrefix?: string): Promise<TrajectorySummary[]> {
    const query = roundPrefix ? `?round_prefix=${encodeURIComponent(roundPrefix)}` : '';
    const body = await this.get<{ trajectories: TrajectorySummary[] }>(
      `/api/trajectories${query}`,
    );
    return body.trajectories;
  }

  trajectory(trajectoryId: string): Promise<TrajectoryDetail> {
    return this.get(`/api/trajectories/${encodeURIComponent(trajectoryId)}`);
  }

  async findings(roundIndex?: number): Promise<Finding[]> {
    const query = roundIndex === undefined ? '' : `?round_index=${roundIndex}`;
    const body = await this.get<{ findings: Finding[] }>(`/api/findings${query}`);
    return body.findings;
  }

  hints(): Promise<{ hints: HintRecord[]; drafts: Record<string, DraftRecord> }> {
    return this.get('/api/hints');
  }

  // -- writes (each one is a single audited service call) ----------------

  async runFilters(roundIndex: number): Promise<Finding[]> {
    const body = await this.request<{ findings: Finding[] }>(
      'POST', '/api/filters/run', { round_index: roundIndex, author: this.author },
    );
    return body.findings;
  }

  async createDraft(text: string, targetFilter: string | null): Promise<string> {
    const body = await this.request<{ draft_id: string }>('POST', '/api/hints/draft', {
      text,
      target_filter: targetFilter,
      author: this.author,
    });
    return body.draft_id;
  }

  async editDraft(draftId: string, text: string, targetFilter: string | null): Promise<void> {
    await this.request('PUT', `/api/hints/draft/${encodeURIComponent(draftId)}`, {
      text,
      target_filter: targetFilter,
      author: this.author,
    });
  }

  preview(
    trajectoryId: string,
    stepIndex: number,
    hintText: string,
    model: string,
    m = 3,
  ): Promise<PreviewResult> {
    return this.request('POST', '/api/preview', {
      trajectory_id: trajectoryId,
      step_index: stepIndex,
      hint_text: hintText,
      model,
      m,
      author: this.author,
    });
  }

  async bindHint(draftId: string, filterId: string, roundIndex: number): Promise<string> {
    const body = await this.request<{ hint_id: string }>('POST', '/api/hints/bind', {
      draft_id: draftId,
      filter_id: filterId,
      round_index: roundIndex,
      author: this.author,
    });
    return body.hint_id;
  }
}
