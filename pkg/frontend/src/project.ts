/** Orthographic projections of the streamed pose for the canvas view.
 *
 * Pure geometry only: world [mm] -> canvas pixels, plus the splay angle
 * overlay.  The hand frame has fingers along +y curling toward +z, so
 * the top view drops z and the side view drops x.
 */

import type { FrameMsg } from "./schema.js";

export type View = "top" | "side";

export interface Viewport {
  width: number;
  height: number;
  /** Pixels per millimetre. */
  scale: number;
  /** World point mapped to the canvas centre. */
  centerMm: [number, number];
}

export interface Polyline {
  finger: string;
  points: Array<[number, number]>;
}

export interface ContactMarker {
  finger: string;
  point: [number, number];
}

/** Project one world point [mm] into canvas pixels for a view. */
export function projectPoint(
  p: [number, number, number],
  view: View,
  vp: Viewport,
): [number, number] {
  const [wx, wy] = view === "top" ? [p[0], p[1]] : [p[1], p[2]];
  const x = vp.width / 2 + (wx - vp.centerMm[0]) * vp.scale;
  // canvas y grows downward
  const y = vp.height / 2 - (wy - vp.centerMm[1]) * vp.scale;
  return [x, y];
}

export function centerlinePolylines(
  frame: FrameMsg,
  view: View,
  vp: Viewport,
): Polyline[] {
  return Object.entries(frame.fingers).map(([finger, f]) => ({
    finger,
    points: f.centerline.map((p) => projectPoint(p, view, vp)),
  }));
}

export function contactMarkers(
  frame: FrameMsg,
  view: View,
  vp: Viewport,
): ContactMarker[] {
  return frame.contacts.map((c) => ({
    finger: c.finger,
    point: projectPoint(c.position, view, vp),
  }));
}

/** Index-to-little spread angle [deg] for the overlay, from the
 * service's own splay readout. */
export function splaySpreadDeg(frame: FrameMsg): number {
  const s = frame.palm.splay_deg;
  const index = s["index"] ?? 0;
  const little = s["little"] ?? 0;
  return Math.abs(index - little);
}

/** Viewport that fits every centerline point with a margin. */
export function fitViewport(
  frame: FrameMsg,
  view: View,
  width: number,
  height: number,
  marginPx = 20,
): Viewport {
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const f of Object.values(frame.fingers)) {
    for (const p of f.centerline) {
      const [wx, wy] = view === "top" ? [p[0], p[1]] : [p[1], p[2]];
      minX = Math.min(minX, wx);
      maxX = Math.max(maxX, wx);
      minY = Math.min(minY, wy);
      maxY = Math.max(maxY, wy);
    }
  }
  const spanX = Math.max(maxX - minX, 1);
  const spanY = Math.max(maxY - minY, 1);
  const scale = Math.min(
    (width - 2 * marginPx) / spanX,
    (height - 2 * marginPx) / spanY,
  );
  return {
    width,
    height,
    scale,
    centerMm: [(minX + maxX) / 2, (minY + maxY) / 2],
  };
}
