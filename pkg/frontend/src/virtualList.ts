// Windowed list rendering: the code column can hold thousands of rows, so
// only the rows inside the viewport (plus a small overscan) exist in the
// DOM at any time.

export type RenderRow<T> = (item: T, index: number) => HTMLElement

export class VirtualList<T> {
  private items: T[] = []
  private readonly spacer: HTMLElement
  private readonly window: HTMLElement

  constructor(
    readonly viewport: HTMLElement,
    private readonly rowHeight: number,
    private readonly renderRow: RenderRow<T>,
    private readonly overscan = 4,
  ) {
    viewport.classList.add("virtual-viewport")
    this.spacer = document.createElement("div")
    this.spacer.className = "virtual-spacer"
    this.window = document.createElement("div")
    this.window.className = "virtual-window"
    this.spacer.appendChild(this.window)
    viewport.appendChild(this.spacer)
    viewport.addEventListener("scroll", () => this.refresh())
  }

  setItems(items: T[]): void {
    this.items = items
    this.spacer.style.height = `${items.length * this.rowHeight}px`
    this.refresh()
  }

  get size(): number {
    return this.items.length
  }

  visibleRange(): { start: number; end: number } {
    const top = this.viewport.scrollTop
    const height = this.viewport.clientHeight || this.rowHeight * 12
    const start = Math.max(0, Math.floor(top / this.rowHeight) - this.overscan)
    const end = Math.min(this.items.length, Math.ceil((top + height) / this.rowHeight) + this.overscan)
    return { start, end }
  }

  scrollToIndex(index: number): void {
    this.viewport.scrollTop = index * this.rowHeight
    this.refresh()
  }

  refresh(): void {
    const { start, end } = this.visibleRange()
    this.window.style.transform = `translateY(${start * this.rowHeight}px)`
    this.window.replaceChildren()
    for (let i = start; i < end; i++) {
      const item = this.items[i]
      if (item === undefined) continue
      const row = this.renderRow(item, i)
      row.style.height = `${this.rowHeight}px`
      this.window.appendChild(row)
    }
  }
}
