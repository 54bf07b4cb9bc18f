/** Browser wiring: sliders, banners, canvas views, stream loop. */

import { CHANNEL_COUNT, panelGroups } from "./channels.js";
import {
  ServiceClient,
  ServiceRejection,
  type SocketLike,
} from "./client.js";
import {
  centerlinePolylines,
  contactMarkers,
  fitViewport,
  splaySpreadDeg,
  type View,
} from "./project.js";
import type { FrameMsg } from "./schema.js";
import { snapshotFromYaml, snapshotToYaml } from "./snapshot.js";
import {
  applyAck,
  applyFrame,
  applyRejection,
  initialState,
  isStale,
  setSlider,
  targetsRequest,
  toggleDutyMode,
  type ConsoleState,
} from "./store.js";

const STREAM_RATE_HZ = 30;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

class Console {
  private state: ConsoleState = initialState();
  private readonly client: ServiceClient;
  private sid = "";
  private closeStream: (() => void) | null = null;
  private frameTimes: number[] = [];

  constructor() {
    const base = `${location.protocol}//${location.host}`;
    this.client = new ServiceClient(
      base,
      (url, init) => fetch(url, init),
      (url) => new WebSocket(url) as unknown as SocketLike,
    );
  }

  async start(): Promise<void> {
    const session = await this.client.createSession();
    this.sid = session.session_id;
    this.buildPanel();
    this.closeStream = this.client.stream(
      this.sid,
      STREAM_RATE_HZ,
      (msg) => {
        if (msg.type === "frame") {
          this.state = applyFrame(this.state, msg, performance.now());
        } else if (msg.type === "outcome") {
          el("closure").textContent =
            `ε=${msg.closure_quality.toFixed(4)} ` +
            (msg.passed ? "pass" : `fail: ${msg.failure_reason}`);
        } else if (msg.type === "error") {
          this.state = applyRejection(this.state, msg);
        }
        this.render();
      },
    );
    window.addEventListener("beforeunload", () => {
      this.closeStream?.();
      void this.client.deleteSession(this.sid);
    });
    this.wireButtons();
    requestAnimationFrame(() => this.tick());
  }

  private buildPanel(): void {
    const panel = el("panel");
    for (const [group, channels] of panelGroups()) {
      const fieldset = document.createElement("fieldset");
      const legend = document.createElement("legend");
      legend.textContent = group;
      fieldset.appendChild(legend);
      for (const ch of channels) {
        const label = document.createElement("label");
        label.textContent = `${ch.label} (≤${ch.limitKpa} kPa)`;
        const slider = document.createElement("input");
        slider.type = "range";
        slider.min = "0";
        slider.max = String(ch.limitKpa);
        slider.step = "0.5";
        slider.value = "0";
        slider.id = `ch-${ch.index}`;
        slider.addEventListener("input", () => {
          this.state = setSlider(this.state, ch.index, Number(slider.value));
          void this.pushTargets();
        });
        label.appendChild(slider);
        fieldset.appendChild(label);
      }
      panel.appendChild(fieldset);
    }
  }

  private wireButtons(): void {
    el("duty-toggle").addEventListener("click", () => {
      this.state = toggleDutyMode(this.state);
      el("duty-toggle").textContent = this.state.dutyMode
        ? "mode: duty"
        : "mode: kPa";
      this.syncSliders();
    });
    el("feix14").addEventListener("click", () => {
      void this.client
        .loadFeix(this.sid, 14)
        .catch((e: unknown) => this.showError(e));
    });
    el("save").addEventListener("click", () => {
      const targets = this.state.ackedTargets ?? this.state.sliders;
      const blob = new Blob([snapshotToYaml(targets)], {
        type: "application/yaml",
      });
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.download = "snapshot.yaml";
      a.click();
    });
    el<HTMLInputElement>("load").addEventListener("change", async (ev) => {
      const input = ev.target as HTMLInputElement;
      const file = input.files?.[0];
      if (file === undefined) return;
      try {
        const targets = snapshotFromYaml(await file.text());
        for (let c = 0; c < CHANNEL_COUNT; c += 1) {
          this.state = setSlider(this.state, c, targets[c]);
        }
        this.syncSliders();
        await this.pushTargets();
      } catch (e) {
        this.showError(e);
      }
    });
  }

  private syncSliders(): void {
    for (let c = 0; c < CHANNEL_COUNT; c += 1) {
      el<HTMLInputElement>(`ch-${c}`).value = String(this.state.sliders[c]);
    }
  }

  private async pushTargets(): Promise<void> {
    try {
      const ack = await this.client.setTargets(
        this.sid,
        targetsRequest(this.state),
      );
      this.state = applyAck(this.state, ack);
    } catch (e) {
      this.showError(e);
    }
    this.render();
  }

  private showError(e: unknown): void {
    if (e instanceof ServiceRejection) {
      this.state = applyRejection(this.state, e.detail);
    } else {
      this.state = {
        ...this.state,
        banner: { kind: "info", message: String(e), channels: [] },
      };
    }
    this.render();
  }

  private tick(): void {
    const now = performance.now();
    el("stale").hidden = !isStale(this.state, now);
    this.frameTimes = this.frameTimes.filter((t) => now - t < 1000);
    el("fps").textContent = `${this.frameTimes.length} fps`;
    requestAnimationFrame(() => this.tick());
  }

  private render(): void {
    this.frameTimes.push(performance.now());
    const banner = el("banner");
    banner.hidden = this.state.banner === null;
    banner.textContent = this.state.banner?.message ?? "";
    const frame = this.state.frame;
    if (frame === null) return;
    el("splay").textContent = `spread ${splaySpreadDeg(frame).toFixed(1)}°`;
    this.drawView("top-view", frame, "top");
    this.drawView("side-view", frame, "side");
  }

  private drawView(id: string, frame: FrameMsg, view: View): void {
    const canvas = el<HTMLCanvasElement>(id);
    const ctx = canvas.getContext("2d");
    if (ctx === null) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const vp = fitViewport(frame, view, canvas.width, canvas.height);
    for (const line of centerlinePolylines(frame, view, vp)) {
      ctx.beginPath();
      line.points.forEach(([x, y], i) =>
        i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y),
      );
      ctx.stroke();
    }
    ctx.fillStyle = "#c33";
    for (const mark of contactMarkers(frame, view, vp)) {
      ctx.beginPath();
      ctx.arc(mark.point[0], mark.point[1], 3, 0, 2 * Math.PI);
      ctx.fill();
    }
    ctx.fillStyle = "#000";
  }
}

if (typeof document !== "undefined" && document.getElementById("panel")) {
  void new Console().start();
}
