// Annotation session state machine, kept free of DOM dependencies so the
// capture contract is testable headlessly. One session walks an ordered
// assignment queue; per sample the annotator picks a genuine/fake
// decision, paints strokes (with per-stroke start/end timestamps), and
// optionally types a rationale.

import { clipToBounds, IDENTITY, screenToImage, ViewTransform } from "./coords.js";
import type {
  AnnotationExport,
  Decision,
  ImageDims,
  Point,
  SampleDescriptor,
  StrokeRecord,
} from "./types.js";

export class SessionController {
  readonly annotatorId: string;
  private queue: SampleDescriptor[];
  private index = 0;
  private clock: () => number;

  private dims: ImageDims | null = null;
  private transform: ViewTransform = IDENTITY;
  private brushWidth = 8;
  private decision: Decision | null = null;
  private text = "";
  private strokes: StrokeRecord[] = [];
  private active: { points: [number, number][]; t_start_ms: number } | null = null;
  private lastTimestamp = 0;

  constructor(annotatorId: string, queue: SampleDescriptor[], clock: () => number = Date.now) {
    this.annotatorId = annotatorId;
    this.queue = [...queue];
    this.clock = clock;
    // Forward-only progression: resume after already-annotated samples.
    while (this.index < this.queue.length && this.queue[this.index]!.annotated) {
      this.index += 1;
    }
  }

  get current(): SampleDescriptor | null {
    return this.index < this.queue.length ? this.queue[this.index]! : null;
  }

  get remaining(): number {
    return this.queue.length - this.index;
  }

  // Called once the current sample's image is loaded and measured.
  beginSample(dims: ImageDims): void {
    this.dims = dims;
    this.resetSampleState();
  }

  setTransform(t: ViewTransform): void {
    this.transform = t;
  }

  setBrushWidth(width: number): void {
    if (width <= 0) {
      throw new Error(`brush width must be positive, got ${width}`);
    }
    this.brushWidth = width;
  }

  get currentBrushWidth(): number {
    return this.brushWidth;
  }

  setDecision(decision: Decision | null): void {
    this.decision = decision;
  }

  get currentDecision(): Decision | null {
    return this.decision;
  }

  setText(text: string): void {
    this.text = text;
  }

  private now(): number {
    // Stroke timestamps are monotonically non-decreasing even if the
    // injected clock jitters backwards.
    const t = this.clock();
    this.lastTimestamp = Math.max(this.lastTimestamp, t);
    return this.lastTimestamp;
  }

  private toImagePoint(screen: Point): [number, number] {
    if (!this.dims) {
      throw new Error("no sample is displayed");
    }
    const p = clipToBounds(screenToImage(screen, this.transform), this.dims);
    return [p.x, p.y];
  }

  pointerDown(screen: Point): void {
    if (!this.dims) {
      throw new Error("no sample is displayed");
    }
    if (this.active) {
      this.pointerUp(screen); // stray down while drawing: close the old stroke
    }
    this.active = { points: [this.toImagePoint(screen)], t_start_ms: this.now() };
  }

  pointerMove(screen: Point): void {
    if (!this.active) {
      return;
    }
    this.active.points.push(this.toImagePoint(screen));
  }

  pointerUp(screen: Point): void {
    if (!this.active) {
      return;
    }
    const p = this.toImagePoint(screen);
    const last = this.active.points[this.active.points.length - 1]!;
    if (p[0] !== last[0] || p[1] !== last[1]) {
      this.active.points.push(p);
    }
    this.strokes.push({
      points: this.active.points,
      brush_width: this.brushWidth,
      t_start_ms: this.active.t_start_ms,
      t_end_ms: this.now(),
    });
    this.active = null;
  }

  // Removes the most recent completed stroke only.
  undo(): void {
    this.strokes.pop();
  }

  get completedStrokes(): readonly StrokeRecord[] {
    return this.strokes;
  }

  get strokeInProgress(): boolean {
    return this.active !== null;
  }

  // Submission is enabled only once a decision is selected.
  get canSubmit(): boolean {
    return this.decision !== null && this.dims !== null && !this.active;
  }

  buildExport(): AnnotationExport {
    if (!this.dims || !this.current) {
      throw new Error("no sample is displayed");
    }
    if (this.decision === null) {
      throw new Error("a decision is required before submitting");
    }
    return {
      sample_id: this.current.sample_id,
      annotator_id: this.annotatorId,
      decision: this.decision,
      text_description: this.text.trim() === "" ? null : this.text,
      strokes: this.strokes.map((s) => ({ ...s, points: [...s.points] })),
      image_dims: { ...this.dims },
    };
  }

  // Advance after a successful submission acknowledgment.
  advance(): void {
    this.index += 1;
    this.dims = null;
    this.resetSampleState();
  }

  private resetSampleState(): void {
    this.strokes = [];
    this.active = null;
    this.decision = null;
    this.text = "";
  }
}
