/** Pressure snapshots and schedule validation.
 *
 * Snapshots use the same flat YAML document the CLI consumes:
 *
 *   schema: 1
 *   targets_kpa:
 *   - 0.0
 *   - ...
 *
 * The emitter/parser below covers exactly that document shape, so saved
 * files replay byte-for-byte through `softhand simulate --snapshot`.
 */

import { CHANNEL_COUNT } from "./channels.js";

export const SNAPSHOT_SCHEMA_VERSION = 1;

const PALM_CHANNEL_NAMES = new Set(["palm_a", "palm_bend", "thumb_abduction"]);

export function snapshotToYaml(targetsKpa: ReadonlyArray<number>): string {
  if (targetsKpa.length !== CHANNEL_COUNT) {
    throw new Error(`expected ${CHANNEL_COUNT} targets`);
  }
  const lines = [`schema: ${SNAPSHOT_SCHEMA_VERSION}`, "targets_kpa:"];
  for (const t of targetsKpa) {
    if (!Number.isFinite(t) || t < 0) {
      throw new Error(`invalid target ${t}`);
    }
    lines.push(`- ${formatNumber(t)}`);
  }
  return lines.join("\n") + "\n";
}

function formatNumber(v: number): string {
  return Number.isInteger(v) ? `${v}.0` : `${v}`;
}

export function snapshotFromYaml(text: string): number[] {
  const lines = text
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l.length > 0 && !l.startsWith("#"));
  const schemaLine = lines.find((l) => l.startsWith("schema:"));
  if (schemaLine === undefined) throw new Error("missing schema field");
  const schema = Number(schemaLine.slice("schema:".length).trim());
  if (schema !== SNAPSHOT_SCHEMA_VERSION) {
    throw new Error(`unsupported snapshot schema ${schema}`);
  }
  const start = lines.indexOf("targets_kpa:");
  if (start < 0) throw new Error("missing targets_kpa list");
  const targets: number[] = [];
  for (const line of lines.slice(start + 1)) {
    if (!line.startsWith("-")) break;
    const v = Number(line.slice(1).trim());
    if (!Number.isFinite(v) || v < 0) throw new Error(`bad target ${line}`);
    targets.push(v);
  }
  if (targets.length !== CHANNEL_COUNT) {
    throw new Error(
      `expected ${CHANNEL_COUNT} targets, got ${targets.length}`,
    );
  }
  return targets;
}

/** Minimal shared-schema shape of a schedule document. */
export interface ScheduleDoc {
  schema: number;
  feix_id: number;
  name: string;
  phases: Array<{ targets: Record<string, number>; duration_s: number }>;
  object: Record<string, unknown>;
}

/** Mirror of the service's palm-first rule: throws with a readable
 * message instead of uploading a schedule the server will reject. */
export function validateSchedule(doc: ScheduleDoc): void {
  if (doc.schema !== SNAPSHOT_SCHEMA_VERSION) {
    throw new Error(`unsupported schedule schema ${doc.schema}`);
  }
  if (doc.phases.length === 0) throw new Error("schedule has no phases");
  const bad = Object.keys(doc.phases[0].targets).filter(
    (name) => !PALM_CHANNEL_NAMES.has(name),
  );
  if (bad.length > 0) {
    throw new Error(
      `phase 1 must drive only palm channels, found ${bad.join(", ")}`,
    );
  }
  for (const phase of doc.phases) {
    if (phase.duration_s <= 0) throw new Error("phase duration must be > 0");
    for (const [name, v] of Object.entries(phase.targets)) {
      if (v < 0) throw new Error(`${name}: negative pressure`);
    }
  }
}
