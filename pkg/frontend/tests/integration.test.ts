// @vitest-environment jsdom
//
// End-to-end against the real Python session server: the client
// completes a heat&deliver mission through chat while the DOM shows
// goal checkmarks, per-frame minimap pose updates, the score counting
// down and sticky-note markers that strobe until read.

import { spawn, type ChildProcess } from "node:child_process";
import { readFileSync } from "node:fs";
import { join } from "node:path";
import WebSocket from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ArenaClient } from "../src/client.js";
import { buildApp, type AppHandles } from "../src/dom.js";
import type { Frame } from "../src/protocol.js";

// vitest runs with cwd = frontend/
const fixturePath = join(process.cwd(), "tests", "fixtures", "heat_mission.json");
const repoRoot = join(process.cwd(), "..");

let server: ChildProcess;
let wsUrl = "";

function startServer(): Promise<string> {
  return new Promise((resolve, reject) => {
    server = spawn("python3", ["-m", "arena.cli", "serve", "--port", "0"], {
      cwd: repoRoot,
      env: { ...process.env, PYTHONUNBUFFERED: "1" },
    });
    let buffer = "";
    const timer = setTimeout(() => reject(new Error("server did not start")), 20_000);
    server.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const m = buffer.match(/listening on (ws:\/\/[\d.]+:\d+)/);
      if (m) {
        clearTimeout(timer);
        resolve(m[1]);
      }
    });
    server.stderr!.on("data", () => undefined);
    server.on("exit", (code) => reject(new Error(`server exited early: ${code}`)));
  });
}

beforeAll(async () => {
  wsUrl = await startServer();
}, 30_000);

afterAll(() => {
  server?.kill();
});

function makeClientAndDom(): { client: ArenaClient; app: AppHandles;
                               poses: string[]; scores: number[] } {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const app = buildApp(root, document);
  const poses: string[] = [];
  const scores: number[] = [];
  let framesSeen = 0;
  const client = new ArenaClient(wsUrl, {
    socketFactory: (url) => new WebSocket(url) as any,
    onChange: (vm) => {
      app.update(vm, 0);
      if (vm.frameCount > framesSeen) {
        framesSeen = vm.frameCount;
        poses.push(app.minimap.getAttribute("data-agent-cell") ?? "");
        if (vm.score !== null) scores.push(vm.score);
      }
    },
  });
  return { client, app, poses, scores };
}

describe("web client against a live fixture server", () => {
  it("completes a heat&deliver mission via chat with full UI behavior",
     async () => {
    const cdf = JSON.parse(readFileSync(fixturePath, "utf-8"));
    const { client, app, poses, scores } = makeClientAndDom();
    await client.connect();
    expect(app.banner.textContent).toBe("connected");

    await client.startMission(cdf);
    await client.waitFor((vm) => vm.frameCount >= 1);

    // frame zero rendered: mission text, both goals unchecked, score 1000
    expect(app.mission.textContent).toContain("Heat the bowl");
    expect(app.goalList.children).toHaveLength(2);
    expect(app.goalList.children[0].getAttribute("data-done")).toBe("false");
    expect(app.scoreBox.textContent).toBe("score 1000");

    // sticky notes strobe while unread
    const strobing0 = JSON.parse(app.minimap.getAttribute("data-strobing")!);
    expect(strobing0.length).toBeGreaterThan(0);

    // ask the robot to read the nearest note: its marker stops strobing
    await client.sendUtterance("read the sticky note");
    await client.waitFor((vm) =>
      (vm.render?.sticky_notes.some((n) => n.read)) === true, 30_000);
    const strobing1 = JSON.parse(app.minimap.getAttribute("data-strobing")!);
    expect(strobing1.length).toBe(strobing0.length - 1);

    // drive the actual mission through chat
    await client.sendUtterance("heat the bowl and deliver it to the table in the quantum_lab");
    await client.waitFor((vm) => vm.terminated !== null, 30_000);

    expect(client.vm.terminated).toEqual({ phase: "Succeeded", m: 1 });
    expect(app.goalList.children[0].getAttribute("data-done")).toBe("true");
    expect(app.goalList.children[1].getAttribute("data-done")).toBe("true");
    expect(app.goalList.children[0].textContent).toContain("✓");

    // minimap pose updated on every frame and matches the frame stream
    const frames = client.messageLog.filter((m) => m.type === "frame" && !("ack" in m));
    expect(poses).toHaveLength(frames.length);
    frames.forEach((m, i) => {
      expect(poses[i]).toBe(JSON.stringify((m.payload as Frame).agent.cell));
    });
    const distinct = new Set(poses);
    expect(distinct.size).toBeGreaterThan(1);

    // score counted down by exactly one per executed action
    const last = client.vm.lastFrame!;
    expect(last.score).toBe(1000 - last.steps_used);
    for (let i = 1; i < scores.length; i++) {
      expect(scores[i]).toBeLessThanOrEqual(scores[i - 1]);
    }

    // chat shows the optimistic echo reconciled plus robot replies
    const chatText = app.chatList.textContent ?? "";
    expect(chatText).toContain("user: heat the bowl and deliver it");
    expect(chatText).toContain("robot:");
    expect(chatText).not.toContain("…");

    client.close();
  }, 60_000);

  it("supports highlight requests and rejects input after termination",
     async () => {
    const cdf = JSON.parse(readFileSync(fixturePath, "utf-8"));
    const { client } = makeClientAndDom();
    await client.connect();
    await client.startMission(cdf);
    await client.waitFor((vm) => vm.frameCount >= 1);

    await client.sendHighlightRequest("bowl_1");
    await client.waitFor((vm) => vm.highlight === "bowl_1");
    // highlights are free: still zero steps used
    expect(client.vm.lastFrame!.steps_used).toBe(0);

    await client.abort();
    await client.waitFor((vm) => vm.terminated !== null);
    await expect(client.sendUtterance("hello?")).rejects.toThrow(/SessionTerminated/);
    client.close();
  }, 60_000);

  it("resumes from the latest frame after reconnecting", async () => {
    const cdf = JSON.parse(readFileSync(fixturePath, "utf-8"));
    const { client } = makeClientAndDom();
    await client.connect();
    await client.startMission(cdf);
    await client.waitFor((vm) => vm.frameCount >= 1);
    await client.sendAction({ type: "nav", kind: "Rotate", degrees: 90 });
    await client.waitFor((vm) => vm.stepsUsed === 1);
    const tickBefore = client.vm.lastFrame!.tick;

    client.close();
    await client.waitFor((vm) => vm.connection === "closed");
    await client.reconnect();
    expect(client.vm.lastFrame!.tick).toBe(tickBefore);
    expect(client.vm.connection).toBe("open");
    client.close();
  }, 60_000);
});
