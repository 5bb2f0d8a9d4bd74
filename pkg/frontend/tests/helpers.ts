// Test scaffolding: an in-memory annotation server behind fetch, in-memory
// storage, and manual timers.

import type { SessionState } from "../src/api.js"
import type { Timers } from "../src/debounce.js"

export type FakeNote = { id: string; text: string; referenceCodes: string[] }

export class FakeServer {
  readonly submissions: Array<{ note_id: string; codes: string[] }> = []
  requestLog: string[] = []
  failNetwork = false
  rejectNextWith: string | null = null
  private completed = 0

  constructor(
    readonly notes: FakeNote[],
    readonly codes: Array<{ code: string; title: string }>,
  ) {}

  private session(): SessionState {
    const next = this.notes[this.completed]
    return {
      annotator_id: "tester",
      queue_size: this.notes.length,
      completed: this.completed,
      next_note_id: next ? next.id : null,
      done: !next,
    }
  }

  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    this.requestLog.push(input)
    if (this.failNetwork) throw new TypeError("network down")
    const url = new URL(input, "http://test")
    if (url.pathname === "/api/session") {
      return json(this.session())
    }
    if (url.pathname.startsWith("/api/notes/")) {
      const id = decodeURIComponent(url.pathname.split("/").pop() ?? "")
      const note = this.notes.find((n) => n.id === id)
      if (!note) return json({ detail: `unknown note ${id}` }, 404)
      return json({ id: note.id, text: note.text })
    }
    if (url.pathname === "/api/codes") {
      const q = (url.searchParams.get("query") ?? "").toLowerCase()
      const limit = Number(url.searchParams.get("limit") ?? "20")
      const hits = this.codes.filter(
        (c) => !q || c.code.toLowerCase().includes(q) || c.title.toLowerCase().includes(q),
      )
      return json({ results: hits.slice(0, limit) })
    }
    if (url.pathname === "/api/annotations" && init?.method === "POST") {
      if (this.rejectNextWith) {
        const error = this.rejectNextWith
        this.rejectNextWith = null
        return json({ error }, 400)
      }
      const body = JSON.parse(String(init.body)) as { note_id: string; codes: string[] }
      this.submissions.push({ note_id: body.note_id, codes: body.codes })
      this.completed += 1
      return json({ status: "ok", session: this.session() })
    }
    return json({ detail: "no such endpoint" }, 404)
  }
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "content-type": "application/json" },
  })
}

export class MemoryStorage {
  private readonly data = new Map<string, string>()
  getItem = (k: string) => this.data.get(k) ?? null
  setItem = (k: string, v: string) => void this.data.set(k, v)
  removeItem = (k: string) => void this.data.delete(k)
}

export class ManualTimers implements Timers {
  private queue: Array<{ at: number; fn: () => void; id: number }> = []
  private now = 0
  private counter = 0

  set = (fn: () => void, ms: number): unknown => {
    const id = ++this.counter
    this.queue.push({ at: this.now + ms, fn, id })
    return id
  }

  clear = (handle: unknown): void => {
    this.queue = this.queue.filter((t) => t.id !== handle)
  }

  advance(ms: number): void {
    this.now += ms
    const due = this.queue.filter((t) => t.at <= this.now)
    this.queue = this.queue.filter((t) => t.at > this.now)
    for (const t of due) t.fn()
  }
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0))
}
