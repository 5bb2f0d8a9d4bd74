// Debouncing with injectable timers, plus a latest-wins async guard so a
// slow stale search response can never overwrite a newer one.

export type Timers = {
  set: (fn: () => void, ms: number) => unknown
  clear: (handle: unknown) => void
}

const realTimers: Timers = {
  set: (fn, ms) => setTimeout(fn, ms),
  clear: (handle) => clearTimeout(handle as Parameters<typeof clearTimeout>[0]),
}

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
  timers: Timers = realTimers,
): { call: (...args: A) => void; cancel: () => void } {
  let pending: unknown = null
  return {
    call(...args: A) {
      if (pending !== null) timers.clear(pending)
      pending = timers.set(() => {
        pending = null
        fn(...args)
      }, waitMs)
    },
    cancel() {
      if (pending !== null) {
        timers.clear(pending)
        pending = null
      }
    },
  }
}

export class LatestWins<T> {
  private ticket = 0

  // run an async producer; resolve with null when a newer run superseded it
  async run(producer: () => Promise<T>): Promise<T | null> {
    const mine = ++this.ticket
    const value = await producer()
    return mine === this.ticket ? value : null
  }
}
