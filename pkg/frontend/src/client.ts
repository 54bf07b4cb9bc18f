/** Typed service client: REST calls plus the WebSocket frame stream.
 *
 * Transport is injected (fetch-compatible function, WebSocket factory)
 * so the protocol logic is testable without a browser or a server.
 */

import {
  ackSchema,
  errorSchema,
  executionSchema,
  sessionSchema,
  streamMessageSchema,
  type AckMsg,
  type ErrorMsg,
  type ExecutionMsg,
  type SessionMsg,
  type StreamMsg,
} from "./schema.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export interface SocketLike {
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export class ServiceRejection extends Error {
  constructor(readonly detail: ErrorMsg) {
    super(detail.message);
  }
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike,
    private readonly socketFactory: SocketFactory | null = null,
  ) {}

  private async call<T>(
    method: string,
    path: string,
    body: unknown,
    parse: (data: unknown) => T,
  ): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const data = await resp.json();
    if (resp.status >= 400) {
      throw new ServiceRejection(errorSchema.parse(data));
    }
    return parse(data);
  }

  createSession(): Promise<SessionMsg> {
    return this.call("POST", "/v1/sessions", {}, (d) =>
      sessionSchema.parse(d),
    );
  }

  deleteSession(sid: string): Promise<unknown> {
    return this.call("DELETE", `/v1/sessions/${sid}`, undefined, (d) => d);
  }

  setTargets(sid: string, body: Record<string, unknown>): Promise<AckMsg> {
    return this.call("POST", `/v1/sessions/${sid}/targets`, body, (d) =>
      ackSchema.parse(d),
    );
  }

  loadFeix(sid: string, feixId: number): Promise<ExecutionMsg> {
    return this.call(
      "POST",
      `/v1/sessions/${sid}/schedule`,
      { feix_id: feixId },
      (d) => executionSchema.parse(d),
    );
  }

  /** Open the frame stream; every message is schema-validated before it
   * reaches the handler.  Returns a close function. */
  stream(
    sid: string,
    rateHz: number,
    onMessage: (msg: StreamMsg) => void,
    onInvalid: (raw: string, error: unknown) => void = () => {},
  ): () => void {
    if (this.socketFactory === null) {
      throw new Error("no socket factory configured");
    }
    const ws = this.socketFactory(
      `${this.baseUrl.replace(/^http/, "ws")}` +
        `/v1/sessions/${sid}/stream?rate=${rateHz}`,
    );
    ws.onmessage = (ev) => {
      let parsed: StreamMsg;
      try {
        parsed = streamMessageSchema.parse(JSON.parse(ev.data));
      } catch (error) {
        onInvalid(ev.data, error);
        return;
      }
      onMessage(parsed);
    };
    return () => ws.close();
  }
}
