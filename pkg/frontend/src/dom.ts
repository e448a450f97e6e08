// DOM panels: chat, goal checklist, minimap + score, connection banner.
//
// update() is a plain projection of the view model onto the DOM, so
// tests can assert on the document after feeding messages through the
// client. Canvas painting is skipped when no 2D context is available
// (jsdom), everything else renders normally.

import type { UiViewModel } from "./viewmodel.js";
import { drawMinimap, drawScene, type DrawOptions } from "./render.js";

export interface AppHandles {
  root: HTMLElement;
  banner: HTMLElement;
  mission: HTMLElement;
  goalList: HTMLUListElement;
  scoreBox: HTMLElement;
  chatList: HTMLUListElement;
  chatInput: HTMLInputElement;
  chatSend: HTMLButtonElement;
  scene: HTMLCanvasElement;
  minimap: HTMLCanvasElement;
  update(vm: UiViewModel, timeMs?: number): void;
}

export function buildApp(root: HTMLElement, doc: Document = document): AppHandles {
  root.innerHTML = "";
  const banner = el(doc, "div", "banner");
  banner.setAttribute("data-testid", "connection");

  const mission = el(doc, "div", "mission");
  mission.setAttribute("data-testid", "mission");

  const goalList = el(doc, "ul", "goals") as HTMLUListElement;
  goalList.setAttribute("data-testid", "goals");

  const scene = el(doc, "canvas", "scene") as HTMLCanvasElement;
  const minimap = el(doc, "canvas", "minimap") as HTMLCanvasElement;
  minimap.setAttribute("data-testid", "minimap");

  const scoreBox = el(doc, "div", "score");
  scoreBox.setAttribute("data-testid", "score");

  const chatList = el(doc, "ul", "chat") as HTMLUListElement;
  chatList.setAttribute("data-testid", "chat");
  const chatInput = el(doc, "input", "chat-input") as HTMLInputElement;
  const chatSend = el(doc, "button", "chat-send") as HTMLButtonElement;
  chatSend.textContent = "Send";

  const left = el(doc, "div", "left-pane");
  left.append(mission, goalList, chatList, chatInput, chatSend);
  const right = el(doc, "div", "right-pane");
  right.append(minimap, scoreBox);  // score sits below the minimap
  const center = el(doc, "div", "center-pane");
  center.append(scene);
  root.append(banner, left, center, right);

  let lastAgentCell: [number, number] | null = null;
  let lerp: DrawOptions["agentLerp"];

  function update(vm: UiViewModel, timeMs = Date.now()): void {
    banner.textContent = vm.connection === "open"
      ? (vm.terminated ? `session over: ${vm.terminated.phase}` : "connected")
      : `connection ${vm.connection}`;
    banner.className = `banner ${vm.connection}`;

    mission.textContent = vm.missionDescription;

    syncList(doc, goalList, vm.subgoalTexts.length, "li");
    vm.subgoalTexts.forEach((text, i) => {
      const item = goalList.children[i] as HTMLElement;
      const done = vm.subgoals[i] === true;
      item.textContent = `${done ? "✓" : "•"} ${text}`;
      item.className = done ? "goal done" : "goal";
      item.setAttribute("data-done", String(done));
    });

    scoreBox.textContent = vm.score === null ? "" : `score ${vm.score}`;

    syncList(doc, chatList, vm.chat.length, "li");
    vm.chat.forEach((entry, i) => {
      const item = chatList.children[i] as HTMLElement;
      item.textContent = `${entry.speaker}: ${entry.text}${entry.pending ? " …" : ""}`;
      item.className = `chat-entry ${entry.speaker}${entry.pending ? " pending" : ""}`;
    });

    const render = vm.render;
    if (!render) return;
    const agentCell = render.agent.cell;
    if (lastAgentCell &&
        (lastAgentCell[0] !== agentCell[0] || lastAgentCell[1] !== agentCell[1])) {
      lerp = { from: lastAgentCell, startedMs: timeMs, durationMs: 200 };
    }
    lastAgentCell = [agentCell[0], agentCell[1]];

    const sceneCtx = getCtx(scene);
    if (sceneCtx) {
      const cs = 24;
      scene.width = render.size[0] * cs;
      scene.height = render.size[1] * cs;
      drawScene(sceneCtx, render, { cellSize: cs, timeMs, highlight: vm.highlight,
                                    agentLerp: lerp });
    }
    const miniCtx = getCtx(minimap);
    if (miniCtx) {
      const cs = 8;
      minimap.width = render.size[0] * cs;
      minimap.height = render.size[1] * cs;
      drawMinimap(miniCtx, render, { cellSize: cs, timeMs, agentLerp: lerp });
    }
    minimap.setAttribute("data-agent-cell", JSON.stringify(agentCell));
    minimap.setAttribute("data-agent-heading", render.agent.heading);
    minimap.setAttribute(
      "data-strobing",
      JSON.stringify(render.sticky_notes.filter((n) => !n.read).map((n) => n.instance_id)));
  }

  return { root, banner, mission, goalList, scoreBox, chatList, chatInput,
           chatSend, scene, minimap, update };
}

function el(doc: Document, tag: string, cls: string): HTMLElement {
  const node = doc.createElement(tag);
  node.className = cls;
  return node as HTMLElement;
}

function syncList(doc: Document, list: HTMLElement, want: number, tag: string): void {
  while (list.children.length > want) list.removeChild(list.lastChild!);
  while (list.children.length < want) list.appendChild(doc.createElement(tag));
}

function getCtx(canvas: HTMLCanvasElement): CanvasRenderingContext2D | null {
  try {
    return canvas.getContext("2d");
  } catch {
    return null;  // jsdom has no canvas backend
  }
}
