/** WebSocket frame stream with client-side backpressure etiquette.
 *
 * Pose sends are rate-capped (default 30/s, latest pose wins while the gate
 * is closed), received frames are dropped if a newer one was already shown,
 * and a lost connection triggers auto-reconnect with the last pose re-sent.
 */
import { Frame, MetaMessage, parseFrame, parseMeta } from "./protocol.js";
import type { CameraPose } from "./camera.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type ConnectionState = "connecting" | "connected" | "disconnected";

export interface StreamCallbacks {
  onFrame(frame: Frame): void;
  onMeta?(meta: MetaMessage): void;
  onConnection?(state: ConnectionState): void;
}

export interface StreamOptions {
  makeSocket: (url: string) => SocketLike;
  sendHz?: number;
  reconnectDelayMs?: number;
}

export class FrameStream {
  readonly sendIntervalMs: number;
  private socket: SocketLike | null = null;
  private nextId = 1;
  private lastShownId = 0;
  private lastSentAt = -Infinity;
  private pending: CameraPose | null = null;
  private flushTimer: ReturnType<typeof setTimeout> | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;
  private lastPose: CameraPose | null = null;
  stats = { sent: 0, shown: 0, staleDropped: 0, superseded: 0 };

  constructor(
    readonly url: string,
    readonly callbacks: StreamCallbacks,
    readonly options: StreamOptions,
  ) {
    this.sendIntervalMs = 1000 / (options.sendHz ?? 30);
    this.connect();
  }

  private connect(): void {
    this.callbacks.onConnection?.("connecting");
    const socket = this.options.makeSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.callbacks.onConnection?.("connected");
      if (this.lastPose) this.sendPose(this.lastPose);
    };
    socket.onmessage = (ev) => this.handleMessage(ev.data);
    socket.onerror = () => socket.close();
    socket.onclose = () => {
      this.socket = null;
      if (this.closed) return;
      this.callbacks.onConnection?.("disconnected");
      this.reconnectTimer = setTimeout(
        () => this.connect(),
        this.options.reconnectDelayMs ?? 1000,
      );
    };
  }

  private handleMessage(data: unknown): void {
    if (typeof data === "string") {
      const meta = parseMeta(data);
      if (meta.type === "superseded") this.stats.superseded += 1;
      this.callbacks.onMeta?.(meta);
      return;
    }
    const frame = parseFrame(data as ArrayBuffer);
    if (frame.id < this.lastShownId) {
      this.stats.staleDropped += 1;
      return;
    }
    this.lastShownId = frame.id;
    this.stats.shown += 1;
    this.callbacks.onFrame(frame);
  }

  /** Queue a pose; sends straight away when the rate gate allows it. */
  sendPose(pose: CameraPose, now: number = Date.now()): void {
    this.lastPose = pose;
    this.pending = pose;
    if (now - this.lastSentAt >= this.sendIntervalMs) {
      this.flush(now);
    } else if (this.flushTimer === null) {
      const wait = this.sendIntervalMs - (now - this.lastSentAt);
      this.flushTimer = setTimeout(() => {
        this.flushTimer = null;
        this.flush(Date.now());
      }, wait);
    }
  }

  private flush(now: number): void {
    if (this.pending === null || this.socket === null) return;
    const pose = this.pending;
    this.pending = null;
    this.lastSentAt = now;
    this.stats.sent += 1;
    this.socket.send(
      JSON.stringify({
        id: this.nextId++,
        pos: pose.pos,
        yaw: pose.yaw,
        pitch: pose.pitch,
      }),
    );
  }

  close(): void {
    this.closed = true;
    if (this.flushTimer !== null) clearTimeout(this.flushTimer);
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.socket?.close();
  }
}
