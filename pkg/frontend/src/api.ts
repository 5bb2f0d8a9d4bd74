// Typed client for the annotation server. All traffic goes through the
// documented /api endpoints; nothing else is ever requested.

export type SessionState = {
  annotator_id: string
  queue_size: number
  completed: number
  next_note_id: string | null
  done: boolean
}

export type Note = { id: string; text: string }

export type CodeEntry = { code: string; title: string }

export type AnnotationSubmission = {
  annotator_id: string
  note_id: string
  codes: string[]
  started_at: number
  submitted_at: number
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message)
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let message = `request failed with status ${response.status}`
    try {
      const body = await response.json()
      if (body && typeof body.error === "string") message = body.error
      else if (body && typeof body.detail === "string") message = body.detail
    } catch {
      // non-JSON error body: keep the generic message
    }
    throw new ApiError(response.status, message)
  }
  return (await response.json()) as T
}

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
    private readonly base = "",
  ) {}

  session(annotator: string): Promise<SessionState> {
    const query = new URLSearchParams({ annotator })
    return this.fetchFn(`${this.base}/api/session?${query}`).then((r) => asJson<SessionState>(r))
  }

  note(id: string): Promise<Note> {
    return this.fetchFn(`${this.base}/api/notes/${encodeURIComponent(id)}`).then((r) => asJson<Note>(r))
  }

  async searchCodes(query: string, limit: number): Promise<CodeEntry[]> {
    const params = new URLSearchParams({ query, limit: String(limit) })
    const body = await this.fetchFn(`${this.base}/api/codes?${params}`).then((r) =>
      asJson<{ results: CodeEntry[] }>(r),
    )
    return body.results
  }

  submit(annotation: AnnotationSubmission): Promise<{ status: string; session: SessionState }> {
    return this.fetchFn(`${this.base}/api/annotations`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(annotation),
    }).then((r) => asJson<{ status: string; session: SessionState }>(r))
  }
}
