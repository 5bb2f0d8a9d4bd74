import { createApp } from "./app.js"

function annotatorId(): string {
  const params = new URLSearchParams(window.location.search)
  const fromUrl = params.get("annotator")
  if (fromUrl) return fromUrl
  const stored = window.localStorage.getItem("rac-annotator")
  if (stored) return stored
  const entered = window.prompt("annotator id:") || "anonymous"
  window.localStorage.setItem("rac-annotator", entered)
  return entered
}

const root = document.getElementById("app")
if (root) {
  void createApp(root, annotatorId()).start()
}
