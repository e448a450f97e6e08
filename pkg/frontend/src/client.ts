// Session client: socket wiring, sequence numbers, optimistic echo.
//
// The socket is injected so the same client runs in the browser
// (native WebSocket) and under node tests (the ws package).

import { PROTOCOL_VERSION, type ServerMessage } from "./protocol.js";
import {
  applyConnection,
  applyLocalUtterance,
  applyServerMessage,
  initialViewModel,
  type UiViewModel,
} from "./viewmodel.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, handler: (event: any) => void): void;
}

export type SocketFactory = (url: string) => SocketLike;

const defaultFactory: SocketFactory = (url) =>
  new (globalThis as any).WebSocket(url) as SocketLike;

export interface ClientOptions {
  socketFactory?: SocketFactory;
  onChange?: (vm: UiViewModel) => void;
}

interface Waiter {
  type: string;
  resolve: (msg: ServerMessage) => void;
  reject: (err: Error) => void;
}

export class ArenaClient {
  vm: UiViewModel = initialViewModel();
  private url: string;
  private factory: SocketFactory;
  private onChange: (vm: UiViewModel) => void;
  private socket: SocketLike | null = null;
  private seq = 0;
  private waiters = new Map<number, Waiter>();
  readonly messageLog: ServerMessage[] = [];

  constructor(url: string, opts: ClientOptions = {}) {
    this.url = url;
    this.factory = opts.socketFactory ?? defaultFactory;
    this.onChange = opts.onChange ?? (() => undefined);
  }

  private update(vm: UiViewModel): void {
    this.vm = vm;
    this.onChange(vm);
  }

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const socket = this.factory(this.url);
      this.socket = socket;
      socket.addEventListener("open", () => {
        this.update(applyConnection(this.vm, "open"));
        resolve();
      });
      socket.addEventListener("error", (e: any) => reject(new Error(String(e?.message ?? e))));
      socket.addEventListener("close", () => {
        this.update(applyConnection(this.vm, "closed"));
      });
      socket.addEventListener("message", (event: any) => {
        this.handleRaw(typeof event.data === "string" ? event.data : event.data.toString());
      });
    });
  }

  /** Re-dial and resume the session from its latest frame. */
  async reconnect(): Promise<void> {
    const session = this.vm.sessionId;
    await this.connect();
    if (session) {
      await this.request("subscribe", {}, session, "frame");
    }
  }

  private handleRaw(raw: string): void {
    let msg: ServerMessage;
    try {
      msg = JSON.parse(raw);
    } catch {
      return;
    }
    this.messageLog.push(msg);
    this.update(applyServerMessage(this.vm, msg));
    if (msg.ack !== undefined) {
      const waiter = this.waiters.get(msg.ack);
      if (waiter && (msg.type === waiter.type || msg.type === "error")) {
        this.waiters.delete(msg.ack);
        if (msg.type === "error") {
          waiter.reject(new Error(`${msg.payload.code}: ${msg.payload.message}`));
        } else {
          waiter.resolve(msg);
        }
      }
    }
  }

  private sendEnvelope(type: string, payload: Record<string, unknown>,
                       sessionId?: string): number {
    if (!this.socket) throw new Error("not connected");
    this.seq += 1;
    const doc: Record<string, unknown> = {
      protocol_version: PROTOCOL_VERSION,
      seq: this.seq,
      type,
      payload,
    };
    if (sessionId) doc.session_id = sessionId;
    this.socket.send(JSON.stringify(doc));
    return this.seq;
  }

  private request(type: string, payload: Record<string, unknown>,
                  sessionId: string | undefined, replyType: string): Promise<ServerMessage> {
    const seq = this.sendEnvelope(type, payload, sessionId);
    return new Promise((resolve, reject) => {
      this.waiters.set(seq, { type: replyType, resolve, reject });
    });
  }

  async startMission(cdf: object): Promise<string> {
    const reply = await this.request("start_mission", { cdf }, undefined, "session_started");
    return reply.payload.session_id;
  }

  async startMissionById(cdfId: string): Promise<string> {
    const reply = await this.request("start_mission", { cdf_id: cdfId }, undefined,
                                     "session_started");
    return reply.payload.session_id;
  }

  async subscribe(sessionId: string): Promise<void> {
    await this.request("subscribe", {}, sessionId, "frame");
    this.update({ ...this.vm, sessionId });
  }

  sendUtterance(text: string): Promise<ServerMessage> {
    if (!this.vm.sessionId) throw new Error("no session");
    this.update(applyLocalUtterance(this.vm, text));
    return this.request("utterance", { text }, this.vm.sessionId, "ack");
  }

  sendExamine(instanceId: string): Promise<ServerMessage> {
    if (!this.vm.sessionId) throw new Error("no session");
    return this.request("examine_note", { instance_id: instanceId },
                        this.vm.sessionId, "ack");
  }

  sendHighlightRequest(instanceId: string): Promise<ServerMessage> {
    if (!this.vm.sessionId) throw new Error("no session");
    return this.request("request_highlight", { instance_id: instanceId },
                        this.vm.sessionId, "ack");
  }

  sendAction(action: object): Promise<ServerMessage> {
    if (!this.vm.sessionId) throw new Error("no session");
    return this.request("action", { action }, this.vm.sessionId, "ack");
  }

  abort(): Promise<ServerMessage> {
    if (!this.vm.sessionId) throw new Error("no session");
    return this.request("abort", {}, this.vm.sessionId, "ack");
  }

  /** Resolves when a predicate over the view model becomes true. */
  waitFor(predicate: (vm: UiViewModel) => boolean, timeoutMs = 30_000): Promise<void> {
    if (predicate(this.vm)) return Promise.resolve();
    return new Promise((resolve, reject) => {
      const prev = this.onChange;
      const timer = setTimeout(() => {
        this.onChange = prev;
        reject(new Error("waitFor timed out"));
      }, timeoutMs);
      this.onChange = (vm) => {
        prev(vm);
        if (predicate(vm)) {
          clearTimeout(timer);
          this.onChange = prev;
          resolve();
        }
      };
    });
  }

  close(): void {
    this.socket?.close();
  }
}
