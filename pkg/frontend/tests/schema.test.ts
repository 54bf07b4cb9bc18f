/** Shared-contract tests: every schema parses recorded service output. */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  ackSchema,
  errorSchema,
  executionSchema,
  frameSchema,
  outcomeSchema,
  progressSchema,
  sessionSchema,
  streamMessageSchema,
} from "../src/schema.js";

const FIXTURES = join(__dirname, "fixtures");

function fixture(name: string): unknown {
  return JSON.parse(readFileSync(join(FIXTURES, name), "utf-8"));
}

describe("recorded service fixtures", () => {
  it("parses a session response", () => {
    const s = sessionSchema.parse(fixture("session.json"));
    expect(s.channels).toBe(19);
  });

  it("parses a targets ack", () => {
    const ack = ackSchema.parse(fixture("ack.json"));
    expect(ack.applied_kpa).toHaveLength(19);
    expect(ack.applied_kpa[16]).toBe(90);
  });

  it("parses a limit rejection with per-channel errors", () => {
    const err = errorSchema.parse(fixture("error_limit.json"));
    expect(err.code).toBe("limit_violation");
    expect(err.errors?.[0].channel).toBe(17);
    expect(err.errors?.[0].reason).toContain("safety limit");
  });

  it("parses a not-found error", () => {
    const err = errorSchema.parse(fixture("error_not_found.json"));
    expect(err.code).toBe("not_found");
  });

  it("parses frames in all recorded states", () => {
    for (const name of [
      "frame_zero.json",
      "frame_splay90.json",
      "frame_contacts.json",
    ]) {
      const frame = frameSchema.parse(fixture(name));
      expect(frame.pressures_kpa).toHaveLength(19);
      expect(Object.keys(frame.fingers)).toHaveLength(5);
      for (const f of Object.values(frame.fingers)) {
        expect(f.centerline.length).toBeGreaterThanOrEqual(2);
      }
    }
  });

  it("frame with contacts carries contact geometry", () => {
    const frame = frameSchema.parse(fixture("frame_contacts.json"));
    expect(frame.contacts.length).toBeGreaterThanOrEqual(2);
    for (const c of frame.contacts) {
      const norm = Math.hypot(...c.normal);
      expect(norm).toBeCloseTo(1, 3);
    }
  });

  it("parses execution, progress and outcome messages", () => {
    const exe = executionSchema.parse(fixture("execution.json"));
    expect(exe.passed).toBe(true);
    const prog = progressSchema.parse(fixture("progress.json"));
    expect(prog.phase).toBeLessThanOrEqual(prog.phases);
    const outcome = outcomeSchema.parse(fixture("outcome.json"));
    expect(outcome.feix_id).toBe(14);
    expect(outcome.closure_quality).toBeGreaterThan(0);
  });

  it("stream union discriminates every stream message type", () => {
    for (const name of [
      "frame_contacts.json",
      "progress.json",
      "outcome.json",
      "error_limit.json",
    ]) {
      expect(() => streamMessageSchema.parse(fixture(name))).not.toThrow();
    }
  });

  it("rejects a frame with a wrong schema version", () => {
    const frame = fixture("frame_zero.json") as Record<string, unknown>;
    expect(() => frameSchema.parse({ ...frame, v: 2 })).toThrow();
  });
});
