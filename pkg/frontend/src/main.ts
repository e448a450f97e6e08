// Browser entry point: connect, start or join a mission, wire the panes.

import { ArenaClient } from "./client.js";
import { buildApp } from "./dom.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

async function boot(): Promise<void> {
  const root = document.getElementById("app")!;
  const app = buildApp(root);
  const wsUrl = param("ws", "ws://127.0.0.1:8765");
  const client = new ArenaClient(wsUrl, { onChange: (vm) => app.update(vm) });

  app.banner.textContent = `connecting to ${wsUrl}`;
  await client.connect();

  const cdfId = param("cdf_id", "");
  const sessionId = param("session", "");
  if (sessionId) {
    await client.subscribe(sessionId);
  } else if (cdfId) {
    await client.startMissionById(cdfId);
  } else {
    const picker = document.createElement("div");
    picker.className = "picker";
    picker.innerHTML = `<label>mission id: <input id="cdf-id" placeholder="cdf_id"></label>
      <button id="start">start</button>`;
    root.prepend(picker);
    picker.querySelector<HTMLButtonElement>("#start")!.addEventListener("click", async () => {
      const value = picker.querySelector<HTMLInputElement>("#cdf-id")!.value.trim();
      if (value) {
        await client.startMissionById(value);
        picker.remove();
      }
    });
  }

  app.chatSend.addEventListener("click", () => {
    const text = app.chatInput.value.trim();
    if (text && !client.vm.terminated) {
      void client.sendUtterance(text);
      app.chatInput.value = "";
    }
  });
  app.chatInput.addEventListener("keydown", (event) => {
    if ((event as KeyboardEvent).key === "Enter") app.chatSend.click();
  });

  // strobe/pulse animation independent of message arrival
  const tick = () => {
    app.update(client.vm, performance.now());
    requestAnimationFrame(tick);
  };
  requestAnimationFrame(tick);

  window.addEventListener("beforeunload", () => client.close());
}

void boot();
