import { describe, expect, it } from "vitest"

import { LatestWins, debounce } from "../src/debounce.js"
import { ManualTimers } from "./helpers.js"

describe("debounce", () => {
  it("issues at most one call per quiet window", () => {
    const timers = new ManualTimers()
    let calls = 0
    const d = debounce(() => calls++, 200, timers)
    for (let i = 0; i < 10; i++) {
      d.call()
      timers.advance(50) // keeps typing inside the window
    }
    expect(calls).toBe(0)
    timers.advance(200)
    expect(calls).toBe(1)
  })

  it("passes the latest arguments", () => {
    const timers = new ManualTimers()
    let seen = ""
    const d = debounce((q: string) => (seen = q), 100, timers)
    d.call("sin")
    d.call("sino")
    d.call("sinoatrial")
    timers.advance(100)
    expect(seen).toBe("sinoatrial")
  })

  it("cancel drops the pending call", () => {
    const timers = new ManualTimers()
    let calls = 0
    const d = debounce(() => calls++, 100, timers)
    d.call()
    d.cancel()
    timers.advance(500)
    expect(calls).toBe(0)
  })
})

describe("LatestWins", () => {
  it("drops responses superseded by a newer run", async () => {
    const guard = new LatestWins<string>()
    let releaseFirst!: (v: string) => void
    const first = guard.run(
      () => new Promise<string>((resolve) => (releaseFirst = resolve)),
    )
    const second = guard.run(async () => "new")
    expect(await second).toBe("new")
    releaseFirst("stale")
    expect(await first).toBeNull()
  })
})
