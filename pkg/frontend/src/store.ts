/** Console state: slider targets, acknowledged pressures, banners.
 *
 * The store is a pure reducer so every invariant is unit-testable.
 * Safety invariant: the pose view and pressure readouts only ever show
 * values the service acknowledged (frames / acks), never the local
 * slider positions.
 */

import { CHANNEL_COUNT, SUPPLY_KPA, channelLimit } from "./channels.js";
import type { AckMsg, ErrorMsg, FrameMsg } from "./schema.js";

export interface Banner {
  kind: "rejection" | "info";
  message: string;
  /** Channels named by a per-channel rejection, if any. */
  channels: number[];
}

export interface ConsoleState {
  /** Local slider positions [kPa target] — inputs, never display state. */
  sliders: number[];
  /** True when sliders edit duty cycles (0..1 scaled to supply). */
  dutyMode: boolean;
  /** Last acknowledged targets from the service. */
  ackedTargets: number[] | null;
  lastAckOrder: number;
  /** Last frame — the only source for rendered pressures and pose. */
  frame: FrameMsg | null;
  lastSeq: number;
  /** Wall-clock ms of the last frame arrival (staleness tracking). */
  lastFrameAtMs: number;
  banner: Banner | null;
  contactsEstablished: boolean;
}

export const STALE_AFTER_MS = 500;

export function initialState(): ConsoleState {
  return {
    sliders: new Array(CHANNEL_COUNT).fill(0),
    dutyMode: false,
    ackedTargets: null,
    lastAckOrder: 0,
    frame: null,
    lastSeq: -1,
    lastFrameAtMs: 0,
    banner: null,
    contactsEstablished: false,
  };
}

/** Clamp a slider move to the client-side safety limit (server still
 * re-checks; the clamp only keeps the control honest). */
export function setSlider(
  state: ConsoleState,
  channel: number,
  value: number,
  override = false,
): ConsoleState {
  if (channel < 0 || channel >= CHANNEL_COUNT) {
    throw new Error(`unknown channel ${channel}`);
  }
  const limit = state.dutyMode ? 1 : channelLimit(channel);
  const allowOver = override && state.contactsEstablished;
  const ceiling = allowOver ? (state.dutyMode ? 1 : SUPPLY_KPA) : limit;
  const clamped = Math.min(Math.max(value, 0), ceiling);
  const sliders = state.sliders.slice();
  sliders[channel] = clamped;
  return { ...state, sliders };
}

export function toggleDutyMode(state: ConsoleState): ConsoleState {
  // switching modes zeroes the inputs rather than guessing a conversion
  return {
    ...state,
    dutyMode: !state.dutyMode,
    sliders: new Array(CHANNEL_COUNT).fill(0),
  };
}

export function applyAck(state: ConsoleState, ack: AckMsg): ConsoleState {
  if (ack.order <= state.lastAckOrder) return state; // out-of-order ack
  return {
    ...state,
    ackedTargets: ack.applied_kpa.slice(),
    lastAckOrder: ack.order,
    banner: null,
  };
}

export function applyRejection(
  state: ConsoleState,
  error: ErrorMsg,
): ConsoleState {
  const channels = (error.errors ?? [])
    .map((e) => e.channel)
    .filter((c): c is number => c !== null);
  const detail = (error.errors ?? []).map((e) => e.reason).join("; ");
  return {
    ...state,
    banner: {
      kind: "rejection",
      message: detail.length > 0 ? detail : error.message,
      channels,
    },
  };
}

export function applyFrame(
  state: ConsoleState,
  frame: FrameMsg,
  nowMs: number,
): ConsoleState {
  if (frame.seq <= state.lastSeq) return state; // stale or duplicate
  return {
    ...state,
    frame,
    lastSeq: frame.seq,
    lastFrameAtMs: nowMs,
    contactsEstablished: frame.contacts.length > 0,
  };
}

/** True when no frame arrived for STALE_AFTER_MS of wall time. */
export function isStale(state: ConsoleState, nowMs: number): boolean {
  if (state.frame === null) return true;
  return nowMs - state.lastFrameAtMs > STALE_AFTER_MS;
}

/** Pressures to display: acknowledged frame data only. */
export function displayedPressures(state: ConsoleState): number[] | null {
  return state.frame === null ? null : state.frame.pressures_kpa;
}

/** Request body for the targets endpoint from the current sliders. */
export function targetsRequest(
  state: ConsoleState,
  override = false,
): Record<string, unknown> {
  const body: Record<string, unknown> = state.dutyMode
    ? { duties: state.sliders.slice() }
    : { targets_kpa: state.sliders.slice() };
  if (override) body.override = true;
  return body;
}
