// Wire protocol types; mirrors docs/protocol.md on the server side.

export const PROTOCOL_VERSION = 1;

export interface ClientEnvelope {
  protocol_version: number;
  seq: number;
  type: string;
  session_id?: string;
  payload?: Record<string, unknown>;
}

export interface ServerMessage {
  protocol_version: number;
  seq: number;
  ack?: number;
  session_id?: string;
  type: string;
  payload: any;
}

export interface RenderObject {
  instance_id: string;
  class_id: string;
  cell: [number, number] | null;
  held: boolean;
  hidden: boolean;
  color: string;
  badges: string[];
}

export interface RenderNote {
  instance_id: string;
  cell: [number, number] | null;
  read: boolean;
}

export interface RenderPayload {
  size: [number, number];
  rooms: { name: string; rect: [number, number, number, number] }[];
  walls: [number, number][];
  viewpoints: { name: string; cell: [number, number] }[];
  agent: { cell: [number, number]; heading: string; held: string | null };
  objects: RenderObject[];
  sticky_notes: RenderNote[];
}

export interface Frame {
  tick: number;
  agent: { cell: [number, number]; heading: string; held: string | null; room: string | null };
  observation: unknown[];
  goal_condition_status: { subgoals: boolean[]; m: number };
  last_action_result: { success: boolean; error_code: string | null; message: string };
  score: number;
  phase: string;
  steps_used: number;
  failed_steps: number;
  render: RenderPayload;
}
