// Page wiring: left column of searchable/selectable codes, right panel with
// the current note, ordered submission with no skip control. Reference
// codes and model predictions are never requested, so they cannot appear.

import { ApiClient, ApiError, CodeEntry } from "./api.js"
import { LatestWins, Timers, debounce } from "./debounce.js"
import { SessionStore } from "./state.js"
import { VirtualList } from "./virtualList.js"

const SEARCH_DEBOUNCE_MS = 200
const SEARCH_LIMIT = 200
const ROW_HEIGHT = 44

export class App {
  readonly root: HTMLElement
  readonly store: SessionStore
  private readonly api: ApiClient
  private list!: VirtualList<CodeEntry>
  private confirmingEmpty = false
  private submitting = false
  private readonly searchRuns = new LatestWins<CodeEntry[]>()
  private readonly debouncedSearch: { call: (q: string) => void; cancel: () => void }

  private readonly els = {} as {
    progress: HTMLElement
    search: HTMLInputElement
    selected: HTMLElement
    codeViewport: HTMLElement
    noteTitle: HTMLElement
    noteText: HTMLElement
    banner: HTMLElement
    submit: HTMLButtonElement
    retry: HTMLButtonElement
  }

  constructor(root: HTMLElement, api: ApiClient, store: SessionStore, timers?: Timers) {
    this.root = root
    this.api = api
    this.store = store
    this.debouncedSearch = debounce((q: string) => void this.runSearch(q), SEARCH_DEBOUNCE_MS, timers)
    this.buildLayout()
  }

  private buildLayout(): void {
    this.root.innerHTML = `
      <header class="topbar">
        <span class="annotator">coder: ${escapeHtml(this.store.annotator)}</span>
        <span class="progress" data-role="progress"></span>
      </header>
      <div class="panes">
        <section class="code-pane">
          <input type="search" data-role="search" placeholder="search code or title" />
          <div class="selected" data-role="selected"></div>
          <div class="code-list" data-role="codes"></div>
        </section>
        <section class="note-pane">
          <h2 data-role="note-title"></h2>
          <pre class="note-text" data-role="note-text"></pre>
          <div class="banner" data-role="banner" hidden></div>
          <div class="actions">
            <button type="button" data-role="submit">Submit and next</button>
            <button type="button" data-role="retry" hidden>Retry</button>
          </div>
        </section>
      </div>`
    const q = (sel: string) => this.root.querySelector(`[data-role="${sel}"]`) as HTMLElement
    this.els.progress = q("progress")
    this.els.search = q("search") as HTMLInputElement
    this.els.selected = q("selected")
    this.els.codeViewport = q("codes")
    this.els.noteTitle = q("note-title")
    this.els.noteText = q("note-text")
    this.els.banner = q("banner")
    this.els.submit = q("submit") as HTMLButtonElement
    this.els.retry = q("retry") as HTMLButtonElement

    this.list = new VirtualList<CodeEntry>(this.els.codeViewport, ROW_HEIGHT, (item) =>
      this.renderCodeRow(item),
    )
    this.els.search.addEventListener("input", () => {
      this.store.setQuery(this.els.search.value)
      this.debouncedSearch.call(this.els.search.value)
    })
    this.els.submit.addEventListener("click", () => void this.submit())
    this.els.retry.addEventListener("click", () => void this.submit())
  }

  private renderCodeRow(item: CodeEntry): HTMLElement {
    const row = document.createElement("div")
    row.className = "code-row"
    if (this.store.isSelected(item.code)) row.classList.add("selected-row")
    row.dataset.code = item.code
    const code = document.createElement("span")
    code.className = "code-id"
    code.textContent = item.code
    const title = document.createElement("span")
    title.className = "code-title"
    title.textContent = item.title
    row.append(code, title)
    row.addEventListener("click", () => this.toggleCode(item.code))
    return row
  }

  async start(): Promise<void> {
    try {
      const session = await this.api.session(this.store.annotator)
      this.store.progress = { completed: session.completed, queueSize: session.queue_size }
      if (session.done || session.next_note_id === null) {
        this.renderCompletion()
        return
      }
      const note = await this.api.note(session.next_note_id)
      this.store.beginNote(note.id, note.text)
      this.renderNote()
      this.renderProgress()
      await this.runSearch(this.store.query)
      this.renderSelected()
    } catch (error) {
      this.showBanner(`server unreachable: ${message(error)}`, { retryable: true })
    }
  }

  async runSearch(query: string): Promise<void> {
    const results = await this.searchRuns.run(() => this.api.searchCodes(query, SEARCH_LIMIT))
    if (results === null) return // superseded by a newer query
    this.list.setItems(results)
  }

  toggleCode(code: string): void {
    this.confirmingEmpty = false
    this.store.toggle(code)
    this.renderSelected()
    this.list.refresh()
    this.resetSubmitLabel()
  }

  async submit(): Promise<void> {
    if (this.submitting || this.store.noteId === null) return
    const codes = this.store.selectedCodes()
    if (codes.length === 0 && !this.confirmingEmpty) {
      this.confirmingEmpty = true
      this.els.submit.textContent = "Submit with no codes? Click again to confirm"
      return
    }
    this.submitting = true
    this.els.submit.disabled = true
    this.hideBanner()
    try {
      const response = await this.api.submit({
        annotator_id: this.store.annotator,
        note_id: this.store.noteId,
        codes,
        started_at: this.store.startedAt,
        submitted_at: Date.now() / 1000,
      })
      this.confirmingEmpty = false
      this.store.clearAfterSubmit()
      this.store.progress = {
        completed: response.session.completed,
        queueSize: response.session.queue_size,
      }
      this.renderProgress()
      if (response.session.done || response.session.next_note_id === null) {
        this.renderCompletion()
        return
      }
      const note = await this.api.note(response.session.next_note_id)
      this.store.beginNote(note.id, note.text)
      this.renderNote()
      this.renderSelected()
      this.list.refresh()
    } catch (error) {
      if (error instanceof ApiError) {
        // validation problem: surface the server's message, keep the picks
        this.showBanner(error.message, { retryable: false })
      } else {
        this.showBanner(`submission not saved (${message(error)}); your selections are kept`, {
          retryable: true,
        })
      }
    } finally {
      this.submitting = false
      this.els.submit.disabled = false
      this.resetSubmitLabel()
    }
  }

  private resetSubmitLabel(): void {
    if (!this.confirmingEmpty) this.els.submit.textContent = "Submit and next"
  }

  private renderNote(): void {
    this.els.noteTitle.textContent = `note ${this.store.noteId ?? ""}`
    this.els.noteText.textContent = this.store.noteText
    this.hideBanner()
  }

  private renderProgress(): void {
    const { completed, queueSize } = this.store.progress
    this.els.progress.textContent = `${completed} / ${queueSize} notes`
  }

  private renderSelected(): void {
    this.els.selected.replaceChildren()
    for (const code of this.store.selectedCodes()) {
      const chip = document.createElement("button")
      chip.type = "button"
      chip.className = "chip"
      chip.textContent = `${code} ✕`
      chip.addEventListener("click", () => this.toggleCode(code))
      this.els.selected.appendChild(chip)
    }
  }

  private renderCompletion(): void {
    this.root.innerHTML = `
      <div class="completion">
        <h1>All notes completed</h1>
        <p>${this.store.progress.completed} of ${this.store.progress.queueSize} notes submitted. Thank you.</p>
      </div>`
  }

  private showBanner(text: string, opts: { retryable: boolean }): void {
    this.els.banner.hidden = false
    this.els.banner.textContent = text
    this.els.retry.hidden = !opts.retryable
  }

  private hideBanner(): void {
    this.els.banner.hidden = true
    this.els.retry.hidden = true
  }
}

function message(error: unknown): string {
  return error instanceof Error ? error.message : String(error)
}

function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (c) => `&#${c.charCodeAt(0)};`)
}

export function createApp(
  root: HTMLElement,
  annotator: string,
  fetchFn?: (input: string, init?: RequestInit) => Promise<Response>,
  storage: Pick<Storage, "getItem" | "setItem" | "removeItem"> = window.localStorage,
): App {
  const api = fetchFn ? new ApiClient(fetchFn) : new ApiClient()
  const store = new SessionStore(annotator, storage)
  return new App(root, api, store)
}
