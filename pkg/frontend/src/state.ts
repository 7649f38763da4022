// Survey flow state machine. The service is the single source of truth:
// every transition refetches or is acknowledged by it, the session token in
// storage is the only client-side state, and at most one request is in
// flight per session (double-clicks collapse into one recorded answer).

import {
  Condition,
  ParticipantMeta,
  QueryPayload,
  Results,
  ServiceError,
  SurveyApi,
} from "./api.js"

export interface TokenStorage {
  get(): string | null
  set(token: string): void
  clear(): void
}

export const memoryStorage = (): TokenStorage => {
  let token: string | null = null
  return {
    get: () => token,
    set: (value) => {
      token = value
    },
    clear: () => {
      token = null
    },
  }
}

export type FlowState =
  | { stage: "consent" }
  | { stage: "question"; query: QueryPayload }
  | { stage: "done"; results: Results }

export class SurveyFlow {
  private busy = false

  constructor(
    private readonly api: SurveyApi,
    private readonly storage: TokenStorage,
  ) {}

  get sessionToken(): string | null {
    return this.storage.get()
  }

  /** Resume a stored session (page refresh) or fall back to consent. */
  async load(): Promise<FlowState> {
    const token = this.storage.get()
    if (token === null) {
      return { stage: "consent" }
    }
    try {
      const query = await this.api.getQuery(token)
      return { stage: "question", query }
    } catch (error) {
      if (error instanceof ServiceError && error.code === "survey_done") {
        return { stage: "done", results: await this.api.getResults(token) }
      }
      if (error instanceof ServiceError && error.status === 404) {
        this.storage.clear()
        return { stage: "consent" }
      }
      throw error
    }
  }

  async start(meta: ParticipantMeta, condition: Condition, seed?: number): Promise<FlowState> {
    if (!meta.consent) {
      throw new ServiceError(400, "consent_required", "consent checkbox is unchecked")
    }
    const created = await this.api.createSession(meta, condition, seed)
    this.storage.set(created.session_id)
    return this.load()
  }

  /**
   * Submit the answer for the currently rendered query. Returns the next
   * state; advances only on service acknowledgment. A stale-query conflict
   * (an ack the client missed) silently refetches the pending query.
   */
  async answer(query: QueryPayload, choice: number): Promise<FlowState> {
    const token = this.storage.get()
    if (token === null) {
      return { stage: "consent" }
    }
    if (this.busy) {
      return { stage: "question", query }
    }
    this.busy = true
    try {
      await this.api.submitAnswer(token, choice, query.k)
    } catch (error) {
      if (!(error instanceof ServiceError) || error.code !== "stale_query") {
        if (error instanceof ServiceError && error.code === "survey_done") {
          return { stage: "done", results: await this.api.getResults(token) }
        }
        throw error
      }
      // fall through: the service already has an answer for this k
    } finally {
      this.busy = false
    }
    return this.load()
  }

  reset(): void {
    this.storage.clear()
  }
}
