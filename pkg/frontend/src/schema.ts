/** Zod schemas for every service message (JSON schema version 1). */

import { z } from "zod";

export const SCHEMA_VERSION = 1;

const vec3 = z.tuple([z.number(), z.number(), z.number()]);

export const sessionSchema = z.object({
  v: z.literal(SCHEMA_VERSION),
  type: z.literal("session"),
  session_id: z.string().min(1),
  channels: z.number().int().positive(),
});

export const ackSchema = z.object({
  v: z.literal(SCHEMA_VERSION),
  type: z.literal("ack"),
  session_id: z.string(),
  applied_kpa: z.array(z.number()),
  order: z.number().int().positive(),
});

export const errorSchema = z.object({
  v: z.literal(SCHEMA_VERSION),
  type: z.literal("error"),
  code: z.string(),
  message: z.string(),
  field: z.string().optional(),
  errors: z
    .array(
      z.object({
        channel: z.number().int().nullable(),
        reason: z.string(),
      }),
    )
    .optional(),
});

export const contactSchema = z.object({
  position: vec3,
  normal: vec3,
  finger: z.string(),
  segment: z.number().int().nonnegative(),
});

export const fingerFrameSchema = z.object({
  centerline: z.array(vec3).min(2),
  tip: vec3,
});

export const frameSchema = z.object({
  v: z.literal(SCHEMA_VERSION),
  type: z.literal("frame"),
  seq: z.number().int().nonnegative(),
  time_s: z.number().nonnegative(),
  pressures_kpa: z.array(z.number()),
  targets_kpa: z.array(z.number()),
  fingers: z.record(fingerFrameSchema),
  palm: z.object({
    splay_deg: z.record(z.number()),
    bend_deg: z.number(),
    abduction_deg: z.number(),
  }),
  contacts: z.array(contactSchema),
});

export const progressSchema = z.object({
  v: z.literal(SCHEMA_VERSION),
  type: z.literal("progress"),
  execution_id: z.string(),
  phase: z.number().int().positive(),
  phases: z.number().int().positive(),
});

export const outcomeSchema = z.object({
  v: z.literal(SCHEMA_VERSION),
  type: z.literal("outcome"),
  execution_id: z.string(),
  feix_id: z.number().int(),
  name: z.string(),
  contacts: z.number().int().nonnegative(),
  closure_quality: z.number(),
  shake_pass: z.boolean(),
  failure_reason: z.string().nullable(),
  passed: z.boolean(),
});

export const executionSchema = z.object({
  v: z.literal(SCHEMA_VERSION),
  type: z.literal("execution"),
  execution_id: z.string(),
  phases: z.number().int().positive(),
  passed: z.boolean(),
  failure_reason: z.string().nullable(),
});

export const streamMessageSchema = z.discriminatedUnion("type", [
  frameSchema,
  progressSchema,
  outcomeSchema,
  errorSchema,
]);

export type SessionMsg = z.infer<typeof sessionSchema>;
export type AckMsg = z.infer<typeof ackSchema>;
export type ErrorMsg = z.infer<typeof errorSchema>;
export type FrameMsg = z.infer<typeof frameSchema>;
export type ProgressMsg = z.infer<typeof progressSchema>;
export type OutcomeMsg = z.infer<typeof outcomeSchema>;
export type ExecutionMsg = z.infer<typeof executionSchema>;
export type StreamMsg = z.infer<typeof streamMessageSchema>;
export type Contact = z.infer<typeof contactSchema>;
