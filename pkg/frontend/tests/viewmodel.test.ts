// Pure view-model behavior: folding the message stream is deterministic.

import { describe, expect, it } from "vitest";
import type { ServerMessage } from "../src/protocol.js";
import {
  applyLocalUtterance,
  applyServerMessage,
  initialViewModel,
  snapshot,
  strobingNotes,
} from "../src/viewmodel.js";

function frameMsg(seq: number, over: Partial<any> = {}): ServerMessage {
  return {
    protocol_version: 1,
    seq,
    session_id: "s0001",
    type: "frame",
    payload: {
      tick: over.tick ?? seq,
      agent: over.agent ?? { cell: [2, 7], heading: "E", held: null, room: "breakroom" },
      observation: [],
      goal_condition_status: over.goal ?? { subgoals: [false, false], m: 0 },
      last_action_result: { success: true, error_code: null, message: "" },
      score: over.score ?? 1000,
      phase: over.phase ?? "Running",
      steps_used: over.steps ?? 0,
      failed_steps: 0,
      render: over.render ?? {
        size: [19, 12],
        rooms: [{ name: "breakroom", rect: [1, 6, 17, 5] }],
        walls: [],
        viewpoints: [],
        agent: over.agent ?? { cell: [2, 7], heading: "E", held: null },
        objects: [],
        sticky_notes: over.notes ?? [
          { instance_id: "sticky_note_1", cell: [4, 2], read: false },
        ],
      },
    },
  };
}

const started: ServerMessage = {
  protocol_version: 1, seq: 0, ack: 1, type: "session_started",
  payload: {
    session_id: "s0001",
    mission_description: "Heat the bowl.",
    subgoal_descriptions: ["Make the bowl hot", "Deliver the bowl"],
  },
};

describe("view model fold", () => {
  it("is a pure function of the message stream", () => {
    const stream: ServerMessage[] = [
      started,
      frameMsg(1),
      { protocol_version: 1, seq: 2, type: "dialog", session_id: "s0001",
        payload: { speaker: "robot", text: "Done (5 actions)." } },
      frameMsg(3, { score: 995, steps: 5 }),
      { protocol_version: 1, seq: 4, type: "goal_status", session_id: "s0001",
        payload: { subgoals: [true, false], m: 0 } },
      { protocol_version: 1, seq: 5, type: "score", session_id: "s0001",
        payload: { score: 995 } },
      { protocol_version: 1, seq: 6, type: "terminated", session_id: "s0001",
        payload: { phase: "Succeeded", m: 1 } },
    ];
    const fold = () => stream.reduce(applyServerMessage, initialViewModel());
    expect(snapshot(fold())).toEqual(snapshot(fold()));
    const vm = fold();
    expect(vm.sessionId).toBe("s0001");
    expect(vm.subgoalTexts).toHaveLength(2);
    expect(vm.subgoals).toEqual([true, false]);
    expect(vm.score).toBe(995);
    expect(vm.frameCount).toBe(2);
    expect(vm.terminated).toEqual({ phase: "Succeeded", m: 1 });
  });

  it("never simulates: goal checkmarks only move on server messages", () => {
    let vm = [started, frameMsg(1)].reduce(applyServerMessage, initialViewModel());
    expect(vm.subgoals).toEqual([false, false]);
    vm = applyServerMessage(vm, frameMsg(2, { goal: { subgoals: [true, true], m: 1 } }));
    expect(vm.subgoals).toEqual([true, true]);
    expect(vm.m).toBe(1);
  });

  it("strobes sticky notes only while unread", () => {
    let vm = applyServerMessage(initialViewModel(), frameMsg(1));
    expect(strobingNotes(vm)).toEqual(["sticky_note_1"]);
    vm = applyServerMessage(vm, frameMsg(2, {
      notes: [{ instance_id: "sticky_note_1", cell: [4, 2], read: true }],
    }));
    expect(strobingNotes(vm)).toEqual([]);
  });

  it("marks the local echo pending until an ack arrives, without duplicates", () => {
    let vm = applyServerMessage(initialViewModel(), started);
    vm = applyLocalUtterance(vm, "heat the bowl");
    expect(vm.chat).toHaveLength(1);
    expect(vm.chat[0].pending).toBe(true);
    vm = applyServerMessage(vm, {
      protocol_version: 1, seq: 9, ack: 2, session_id: "s0001",
      type: "ack", payload: { accepted: true },
    });
    expect(vm.chat[0].pending).toBe(false);
    // the broadcast copy of the user's own line does not duplicate
    vm = applyServerMessage(vm, {
      protocol_version: 1, seq: 10, session_id: "s0001", type: "dialog",
      payload: { speaker: "user", text: "heat the bowl" },
    });
    expect(vm.chat).toHaveLength(1);
    vm = applyServerMessage(vm, {
      protocol_version: 1, seq: 11, session_id: "s0001", type: "dialog",
      payload: { speaker: "robot", text: "Done." },
    });
    expect(vm.chat).toHaveLength(2);
  });

  it("collects typed errors", () => {
    const vm = applyServerMessage(initialViewModel(), {
      protocol_version: 1, seq: 1, ack: 1, type: "error",
      payload: { code: "BadMessage", message: "nope" },
    });
    expect(vm.errors).toEqual([{ code: "BadMessage", message: "nope" }]);
  });
});
