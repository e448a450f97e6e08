// Pure view model: a fold over the server message stream.
//
// The UI never simulates world rules; everything it shows is derived
// from received messages, so replaying a recorded stream reproduces
// identical view-model snapshots.

import type { Frame, RenderPayload, ServerMessage } from "./protocol.js";

export interface ChatEntry {
  speaker: string;
  text: string;
  pending: boolean;   // local echo not yet acknowledged
  local: boolean;     // entry originated on this client
}

export interface UiViewModel {
  connection: "connecting" | "open" | "closed";
  sessionId: string | null;
  missionDescription: string;
  subgoalTexts: string[];
  subgoals: boolean[];
  m: number;
  score: number | null;
  phase: string;
  stepsUsed: number;
  chat: ChatEntry[];
  render: RenderPayload | null;
  frameCount: number;
  lastFrame: Frame | null;
  highlight: string | null;
  terminated: { phase: string; m: number } | null;
  errors: { code: string; message: string }[];
}

export function initialViewModel(): UiViewModel {
  return {
    connection: "connecting",
    sessionId: null,
    missionDescription: "",
    subgoalTexts: [],
    subgoals: [],
    m: 0,
    score: null,
    phase: "Running",
    stepsUsed: 0,
    chat: [],
    render: null,
    frameCount: 0,
    lastFrame: null,
    highlight: null,
    terminated: null,
    errors: [],
  };
}

export function applyConnection(vm: UiViewModel, state: UiViewModel["connection"]): UiViewModel {
  return { ...vm, connection: state };
}

/** Optimistic chat echo; reconciled when the server acks the seq. */
export function applyLocalUtterance(vm: UiViewModel, text: string): UiViewModel {
  return {
    ...vm,
    chat: [...vm.chat, { speaker: "user", text, pending: true, local: true }],
  };
}

function ackPending(vm: UiViewModel): UiViewModel {
  const idx = vm.chat.findIndex((c) => c.pending);
  if (idx < 0) return vm;
  const chat = vm.chat.slice();
  chat[idx] = { ...chat[idx], pending: false };
  return { ...vm, chat };
}

function appendDialog(vm: UiViewModel, speaker: string, text: string): UiViewModel {
  if (speaker === "user") {
    // the broadcast copy of our own utterance: already shown locally
    const dup = vm.chat.find((c) => c.local && c.text === text);
    if (dup) return vm;
  }
  return { ...vm, chat: [...vm.chat, { speaker, text, pending: false, local: false }] };
}

export function applyServerMessage(vm: UiViewModel, msg: ServerMessage): UiViewModel {
  let next = vm;
  if (msg.ack !== undefined) next = ackPending(next);
  switch (msg.type) {
    case "session_started":
      return {
        ...next,
        sessionId: msg.payload.session_id,
        missionDescription: msg.payload.mission_description ?? "",
        subgoalTexts: msg.payload.subgoal_descriptions ?? [],
      };
    case "frame": {
      const frame = msg.payload as Frame;
      return {
        ...next,
        render: frame.render,
        lastFrame: frame,
        frameCount: next.frameCount + 1,
        score: frame.score,
        phase: frame.phase,
        stepsUsed: frame.steps_used,
        subgoals: frame.goal_condition_status.subgoals,
        m: frame.goal_condition_status.m,
      };
    }
    case "goal_status":
      return { ...next, subgoals: msg.payload.subgoals, m: msg.payload.m };
    case "score":
      return { ...next, score: msg.payload.score };
    case "dialog":
      return appendDialog(next, msg.payload.speaker, msg.payload.text);
    case "highlight":
      return { ...next, highlight: msg.payload.instance_id };
    case "terminated":
      return {
        ...next,
        terminated: { phase: msg.payload.phase, m: msg.payload.m },
        phase: msg.payload.phase,
      };
    case "error":
      return {
        ...next,
        errors: [...next.errors, { code: msg.payload.code, message: msg.payload.message }],
      };
    default:
      return next;
  }
}

/** Sticky notes strobe only while unread. */
export function strobingNotes(vm: UiViewModel): string[] {
  if (!vm.render) return [];
  return vm.render.sticky_notes.filter((n) => !n.read).map((n) => n.instance_id);
}

/** Stable snapshot for replay-equality checks. */
export function snapshot(vm: UiViewModel): string {
  return JSON.stringify(vm, Object.keys(vm).sort());
}
