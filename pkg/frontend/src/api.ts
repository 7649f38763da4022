// Typed client for the fareopt survey service. All payloads carry {v: 1}.

export interface ParticipantMeta {
  residence: string
  prior_covid_infection: boolean
  consent: boolean
}

export type Condition = "pre_pandemic" | "post_pandemic"

export interface RiskDisplay {
  kind: "rail_occupancy" | "exposure" | "none"
  percent?: number
  minutes?: number
}

export interface OptionPayload {
  mode: "car" | "taxi" | "rail" | "walk"
  road_index: number | null
  latency: number
  cost: number
  risk: number
  risk_display: RiskDisplay
}

export interface Phase {
  name: "active" | "holdout" | "done"
  index?: number
  of?: number
}

export interface SessionCreated {
  v: 1
  session_id: string
  phase: Phase
  progress: { answered: number; total: number }
}

export interface QueryPayload {
  v: 1
  k: number
  phase: Phase
  progress: { answered: number; total: number }
  condition: Condition
  options: OptionPayload[]
}

export interface AnswerAck {
  v: 1
  phase: Phase
  answered: number
}

export interface Results {
  v: 1
  session_id: string
  condition: Condition
  holdout_accuracy: number | null
  posterior: { mean: number[]; samples: number[][]; acceptance_rate: number }
  dataset: { options: OptionPayload[]; chosen_index: number }[]
  population: unknown
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message)
  }
}

async function parse<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({}))
  if (!response.ok) {
    const err = (body as { error?: { code?: string; message?: string } }).error
    throw new ServiceError(
      response.status,
      err?.code ?? "http_error",
      err?.message ?? `HTTP ${response.status}`,
    )
  }
  return body as T
}

export class SurveyApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path
  }

  async health(): Promise<boolean> {
    try {
      const response = await this.fetchImpl(this.url("/healthz"))
      return response.ok
    } catch {
      return false
    }
  }

  createSession(meta: ParticipantMeta, condition: Condition, seed?: number): Promise<SessionCreated> {
    return this.fetchImpl(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ v: 1, meta, condition, ...(seed !== undefined ? { seed } : {}) }),
    }).then((r) => parse<SessionCreated>(r))
  }

  getQuery(sessionId: string): Promise<QueryPayload> {
    return this.fetchImpl(this.url(`/sessions/${sessionId}/query`)).then((r) =>
      parse<QueryPayload>(r),
    )
  }

  submitAnswer(sessionId: string, choice: number, k: number): Promise<AnswerAck> {
    return this.fetchImpl(this.url(`/sessions/${sessionId}/answer`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ v: 1, choice, k }),
    }).then((r) => parse<AnswerAck>(r))
  }

  getResults(sessionId: string): Promise<Results> {
    return this.fetchImpl(this.url(`/sessions/${sessionId}/results`)).then((r) =>
      parse<Results>(r),
    )
  }
}
