import type {
  ChoicesResponse,
  CreateSessionResponse,
  EvaluationPayload,
  SessionRecord,
  SurveyAnswers,
  VerdictsResponse,
} from './types';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (typeof body?.detail === 'string') detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

/**
 * Thin typed client over the session API. Enforces one in-flight
 * state-changing request at a time so a double-tap can never double-submit;
 * the server's conflict responses remain the final authority.
 */
export class ApiClient {
  private inflight = false;

  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  get busy(): boolean {
    return this.inflight;
  }

  private async mutate<T>(path: string, body: unknown): Promise<T> {
    if (this.inflight) {
      throw new ApiError(409, 'a request is already in flight');
    }
    this.inflight = true;
    try {
      const response = await this.fetchFn(`${this.baseUrl}${path}`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(body),
      });
      return await asJson<T>(response);
    } finally {
      this.inflight = false;
    }
  }

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`);
    return asJson<T>(response);
  }

  createSession(answers: SurveyAnswers, seed?: number): Promise<CreateSessionResponse> {
    return this.mutate('/sessions', seed === undefined ? answers : { ...answers, seed });
  }

  submitChoices(sessionId: string, selected: string[]): Promise<ChoicesResponse> {
    return this.mutate(`/sessions/${sessionId}/choices`, { selected });
  }

  getSession(sessionId: string): Promise<SessionRecord> {
    return this.get(`/sessions/${sessionId}`);
  }

  getEvaluation(sessionId: string): Promise<EvaluationPayload> {
    return this.get(`/sessions/${sessionId}/evaluation`);
  }

  postVerdicts(sessionId: string, verdicts: Record<string, boolean>): Promise<VerdictsResponse> {
    return this.mutate(`/sessions/${sessionId}/verdicts`, { verdicts });
  }
}
