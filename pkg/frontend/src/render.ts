// Canvas painting for the top-down view and the minimap.
//
// Agent motion is interpolated client-side between frames for a smooth
// feel; interpolation is cosmetic and never feeds back into state.

import type { RenderPayload } from "./protocol.js";

const ROOM_FILLS = ["#203040", "#1d3a2a", "#3a2d1d", "#2d1d3a", "#1d303a", "#3a1d2a"];

const HEADING_ANGLE: Record<string, number> = {
  N: -Math.PI / 2,
  E: 0,
  S: Math.PI / 2,
  W: Math.PI,
};

export interface DrawOptions {
  cellSize: number;
  highlight?: string | null;
  timeMs: number;                       // drives strobe + pulse phases
  agentLerp?: { from: [number, number]; startedMs: number; durationMs: number };
}

export function agentScreenPos(render: RenderPayload, opts: DrawOptions): [number, number] {
  const [ax, ay] = render.agent.cell;
  const lerp = opts.agentLerp;
  if (!lerp) return [ax, ay];
  const t = Math.min(1, (opts.timeMs - lerp.startedMs) / lerp.durationMs);
  const ease = 0.5 - 0.5 * Math.cos(Math.PI * t);
  return [lerp.from[0] + (ax - lerp.from[0]) * ease,
          lerp.from[1] + (ay - lerp.from[1]) * ease];
}

export function drawScene(ctx: CanvasRenderingContext2D, render: RenderPayload,
                          opts: DrawOptions): void {
  const cs = opts.cellSize;
  const [w, h] = render.size;
  ctx.clearRect(0, 0, w * cs, h * cs);
  ctx.fillStyle = "#10151b";
  ctx.fillRect(0, 0, w * cs, h * cs);

  render.rooms.forEach((room, i) => {
    const [x, y, rw, rh] = room.rect;
    ctx.fillStyle = ROOM_FILLS[i % ROOM_FILLS.length];
    ctx.fillRect(x * cs, y * cs, rw * cs, rh * cs);
    ctx.fillStyle = "#8fa3b8";
    ctx.font = `${Math.max(9, cs * 0.6)}px sans-serif`;
    ctx.fillText(room.name, x * cs + 3, y * cs + cs * 0.8);
  });

  ctx.fillStyle = "#45576b";
  for (const [x, y] of render.walls) {
    ctx.fillRect(x * cs, y * cs, cs, cs);
  }

  ctx.strokeStyle = "#2c3a49";
  for (const vp of render.viewpoints) {
    const [x, y] = vp.cell;
    ctx.strokeRect(x * cs + cs * 0.35, y * cs + cs * 0.35, cs * 0.3, cs * 0.3);
  }

  for (const objRec of render.objects) {
    if (!objRec.cell || objRec.held || objRec.hidden) continue;
    const [x, y] = objRec.cell;
    ctx.fillStyle = cssColor(objRec.color);
    ctx.fillRect(x * cs + cs * 0.2, y * cs + cs * 0.2, cs * 0.6, cs * 0.6);
    let bx = x * cs + cs * 0.15;
    for (const badge of objRec.badges) {
      ctx.fillStyle = badgeColor(badge);
      ctx.beginPath();
      ctx.arc(bx, y * cs + cs * 0.15, cs * 0.12, 0, Math.PI * 2);
      ctx.fill();
      bx += cs * 0.28;
    }
    if (opts.highlight === objRec.instance_id) {
      const pulse = 0.5 + 0.5 * Math.sin(opts.timeMs / 120);
      ctx.strokeStyle = `rgba(255, 230, 90, ${0.4 + 0.6 * pulse})`;
      ctx.lineWidth = 2;
      ctx.strokeRect(x * cs + 1, y * cs + 1, cs - 2, cs - 2);
      ctx.lineWidth = 1;
    }
  }

  // sticky notes strobe while unread
  for (const note of render.sticky_notes) {
    if (!note.cell) continue;
    const [x, y] = note.cell;
    const on = note.read ? 0.9 : 0.25 + 0.75 * (0.5 + 0.5 * Math.sin(opts.timeMs / 150));
    ctx.fillStyle = note.read ? "rgba(190,190,120,0.8)" : `rgba(255,255,80,${on})`;
    ctx.fillRect(x * cs + cs * 0.3, y * cs + cs * 0.3, cs * 0.4, cs * 0.4);
  }

  const [ax, ay] = agentScreenPos(render, opts);
  const angle = HEADING_ANGLE[render.agent.heading] ?? 0;
  ctx.save();
  ctx.translate((ax + 0.5) * cs, (ay + 0.5) * cs);
  ctx.rotate(angle);
  ctx.fillStyle = "#6fd3ff";
  ctx.beginPath();
  ctx.moveTo(cs * 0.42, 0);
  ctx.lineTo(-cs * 0.3, cs * 0.3);
  ctx.lineTo(-cs * 0.3, -cs * 0.3);
  ctx.closePath();
  ctx.fill();
  ctx.restore();
}

export function drawMinimap(ctx: CanvasRenderingContext2D, render: RenderPayload,
                            opts: DrawOptions): void {
  const cs = opts.cellSize;
  const [w, h] = render.size;
  ctx.clearRect(0, 0, w * cs, h * cs);
  ctx.fillStyle = "#0c0f13";
  ctx.fillRect(0, 0, w * cs, h * cs);
  render.rooms.forEach((room) => {
    const [x, y, rw, rh] = room.rect;
    ctx.strokeStyle = "#55697e";
    ctx.strokeRect(x * cs, y * cs, rw * cs, rh * cs);
  });
  for (const note of render.sticky_notes) {
    if (!note.cell) continue;
    const [x, y] = note.cell;
    if (note.read) {
      ctx.fillStyle = "rgba(170,170,110,0.7)";
    } else {
      const blink = Math.sin(opts.timeMs / 150) > 0;
      ctx.fillStyle = blink ? "#7dff6a" : "rgba(125,255,106,0.15)";
    }
    ctx.beginPath();
    ctx.arc((x + 0.5) * cs, (y + 0.5) * cs, Math.max(1.5, cs * 0.3), 0, Math.PI * 2);
    ctx.fill();
  }
  const [ax, ay] = agentScreenPos(render, opts);
  const angle = HEADING_ANGLE[render.agent.heading] ?? 0;
  ctx.save();
  ctx.translate((ax + 0.5) * cs, (ay + 0.5) * cs);
  ctx.rotate(angle);
  ctx.fillStyle = "#6fd3ff";
  ctx.beginPath();
  ctx.moveTo(cs * 0.5, 0);
  ctx.lineTo(-cs * 0.35, cs * 0.35);
  ctx.lineTo(-cs * 0.35, -cs * 0.35);
  ctx.closePath();
  ctx.fill();
  ctx.restore();
}

function cssColor(name: string): string {
  const known: Record<string, string> = {
    clear: "#cfe8f7", silver: "#c0c0c0", bronze: "#b08d57", beige: "#e6d8ad",
  };
  return known[name] ?? name ?? "#cccccc";
}

function badgeColor(badge: string): string {
  if (badge === "hot") return "#ff6a4d";
  if (badge === "cold") return "#5ab8ff";
  if (badge === "broken") return "#999999";
  if (badge === "dirty") return "#7a5c2e";
  if (badge === "open") return "#ffffff";
  if (badge === "toggled_on") return "#ffe24d";
  if (badge === "cooked") return "#d98a3d";
  if (badge.startsWith("filled:")) return "#4dc3ff";
  return "#dddddd";
}
