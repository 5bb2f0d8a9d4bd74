// Session state: current note, selected code set, search query, progress.
// Selections are drafted to storage on every change so a reload lands the
// coder back on the same note with the same picks.

export type Progress = { completed: number; queueSize: number }

export type DraftRecord = { noteId: string; selected: string[]; startedAt: number }

export class SessionStore {
  noteId: string | null = null
  noteText = ""
  query = ""
  startedAt = 0
  progress: Progress = { completed: 0, queueSize: 0 }
  private readonly selected = new Set<string>()

  constructor(
    readonly annotator: string,
    private readonly storage: Pick<Storage, "getItem" | "setItem" | "removeItem">,
    private readonly now: () => number = () => Date.now() / 1000,
  ) {}

  private get draftKey(): string {
    return `rac-draft:${this.annotator}`
  }

  selectedCodes(): string[] {
    return [...this.selected].sort()
  }

  isSelected(code: string): boolean {
    return this.selected.has(code)
  }

  toggle(code: string): boolean {
    if (this.selected.has(code)) this.selected.delete(code)
    else this.selected.add(code)
    this.saveDraft()
    return this.selected.has(code)
  }

  setQuery(query: string): void {
    this.query = query
    // selections survive query changes by construction: the set is separate
  }

  beginNote(noteId: string, text: string): void {
    if (this.noteId !== noteId) {
      this.selected.clear()
      this.startedAt = this.now()
      const draft = this.loadDraft()
      if (draft && draft.noteId === noteId) {
        for (const code of draft.selected) this.selected.add(code)
        this.startedAt = draft.startedAt
      }
    }
    this.noteId = noteId
    this.noteText = text
    this.saveDraft()
  }

  clearAfterSubmit(): void {
    this.selected.clear()
    this.storage.removeItem(this.draftKey)
  }

  saveDraft(): void {
    if (this.noteId === null) return
    const draft: DraftRecord = {
      noteId: this.noteId,
      selected: this.selectedCodes(),
      startedAt: this.startedAt,
    }
    this.storage.setItem(this.draftKey, JSON.stringify(draft))
  }

  loadDraft(): DraftRecord | null {
    const raw = this.storage.getItem(this.draftKey)
    if (!raw) return null
    try {
      const parsed = JSON.parse(raw) as DraftRecord
      if (typeof parsed.noteId !== "string" || !Array.isArray(parsed.selected)) return null
      return parsed
    } catch {
      return null
    }
  }
}
