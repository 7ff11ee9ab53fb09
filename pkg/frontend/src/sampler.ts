// The 60 Hz gaze proxy: sample the mouse cursor on a timer and hand each
// position to a sink with a monotone sample index.  The client owns the
// clock; the server never samples anything itself.

export type SampleSink = (t: number, x: number, y: number) => void;

export class GazeSampler {
  private timer: ReturnType<typeof setInterval> | null = null;
  private t = 0;
  x = 0;
  y = 0;

  constructor(private sink: SampleSink, readonly hz: number = 60) {}

  /** Track the cursor; call once. */
  attach(target: EventTarget): void {
    target.addEventListener("mousemove", (ev) => {
      const e = ev as MouseEvent;
      this.x = e.clientX;
      this.y = e.clientY;
    });
  }

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => {
      this.sink(this.t++, this.x, this.y);
    }, 1000 / this.hz);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  get running(): boolean {
    return this.timer !== null;
  }

  get samplesSent(): number {
    return this.t;
  }
}
