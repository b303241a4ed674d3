// Browser wiring: one fingerprint at a time, decision + strokes + optional
// text, forward-only queue. All stroke math lives in SessionController;
// this file only translates DOM events and paints the overlay.

import { ApiClient, ServerError } from "./api.js";
import { SessionController } from "./session.js";
import type { Decision, Point } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const imageCanvas = $<HTMLCanvasElement>("image-canvas");
const overlayCanvas = $<HTMLCanvasElement>("overlay-canvas");
const statusLine = $<HTMLElement>("status");
const progressLine = $<HTMLElement>("progress");
const submitButton = $<HTMLButtonElement>("submit");
const undoButton = $<HTMLButtonElement>("undo");
const brushInput = $<HTMLInputElement>("brush");
const zoomSelect = $<HTMLSelectElement>("zoom");
const textInput = $<HTMLTextAreaElement>("text");

async function start(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const annotatorId = params.get("annotator") ?? "";
  if (!annotatorId) {
    statusLine.textContent = "Add ?annotator=<id> to the URL to begin.";
    return;
  }
  const api = new ApiClient(params.get("server") ?? "");
  let queue;
  try {
    queue = await api.fetchAssignment(annotatorId);
  } catch (err) {
    statusLine.textContent = `Could not fetch assignment: ${String(err)}`;
    return;
  }
  const session = new SessionController(annotatorId, queue);
  const image = new Image();
  let zoom = Number(zoomSelect.value) || 1;

  function redrawOverlay(): void {
    const ctx = overlayCanvas.getContext("2d")!;
    ctx.clearRect(0, 0, overlayCanvas.width, overlayCanvas.height);
    ctx.strokeStyle = "rgba(220, 40, 40, 0.55)";
    ctx.fillStyle = ctx.strokeStyle;
    ctx.lineCap = "round";
    ctx.lineJoin = "round";
    for (const stroke of session.completedStrokes) {
      ctx.lineWidth = stroke.brush_width * zoom;
      ctx.beginPath();
      stroke.points.forEach(([x, y], i) => {
        if (i === 0) ctx.moveTo(x * zoom, y * zoom);
        else ctx.lineTo(x * zoom, y * zoom);
      });
      if (stroke.points.length === 1) {
        const [x, y] = stroke.points[0]!;
        ctx.arc(x * zoom, y * zoom, (stroke.brush_width / 2) * zoom, 0, 2 * Math.PI);
        ctx.fill();
      } else {
        ctx.stroke();
      }
    }
  }

  function refreshControls(): void {
    submitButton.disabled = !session.canSubmit;
    undoButton.disabled = session.completedStrokes.length === 0;
    progressLine.textContent = session.current
      ? `sample ${session.current.sample_id} (${session.remaining} remaining)`
      : "all samples annotated";
  }

  function applyZoom(): void {
    zoom = Number(zoomSelect.value) || 1;
    if (!session.current) return;
    imageCanvas.width = overlayCanvas.width = image.width * zoom;
    imageCanvas.height = overlayCanvas.height = image.height * zoom;
    const ctx = imageCanvas.getContext("2d")!;
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(image, 0, 0, image.width * zoom, image.height * zoom);
    session.setTransform({ zoom, offsetX: 0, offsetY: 0 });
    redrawOverlay();
  }

  function loadCurrent(): void {
    if (!session.current) {
      statusLine.textContent = "Session complete. Thank you.";
      refreshControls();
      return;
    }
    statusLine.textContent = "loading image";
    image.onload = () => {
      session.beginSample({ width: image.width, height: image.height });
      textInput.value = "";
      for (const radio of document.querySelectorAll<HTMLInputElement>("input[name=decision]")) {
        radio.checked = false;
      }
      statusLine.textContent = "decide genuine or fake, then mark salient regions";
      applyZoom();
      refreshControls();
    };
    image.src = api.imageUrl(session.current.sample_id);
  }

  const pointer = (e: PointerEvent): Point => ({ x: e.offsetX, y: e.offsetY });
  overlayCanvas.addEventListener("pointerdown", (e) => {
    overlayCanvas.setPointerCapture(e.pointerId);
    session.pointerDown(pointer(e));
  });
  overlayCanvas.addEventListener("pointermove", (e) => {
    session.pointerMove(pointer(e));
    redrawOverlay();
  });
  overlayCanvas.addEventListener("pointerup", (e) => {
    session.pointerUp(pointer(e));
    redrawOverlay();
    refreshControls();
  });

  for (const radio of document.querySelectorAll<HTMLInputElement>("input[name=decision]")) {
    radio.addEventListener("change", () => {
      session.setDecision(radio.value as Decision);
      refreshControls();
    });
  }
  brushInput.addEventListener("change", () => session.setBrushWidth(Number(brushInput.value)));
  zoomSelect.addEventListener("change", applyZoom);
  undoButton.addEventListener("click", () => {
    session.undo();
    redrawOverlay();
    refreshControls();
  });
  textInput.addEventListener("input", () => session.setText(textInput.value));

  submitButton.addEventListener("click", async () => {
    if (!session.canSubmit) return;
    submitButton.disabled = true;
    try {
      await api.submitAnnotation(session.buildExport());
    } catch (err) {
      // Rejection keeps all state so the annotator can fix and retry.
      statusLine.textContent =
        err instanceof ServerError ? `submission rejected: ${err.message}` : String(err);
      submitButton.disabled = false;
      return;
    }
    session.advance();
    loadCurrent();
  });

  session.setBrushWidth(Number(brushInput.value) || 8);
  loadCurrent();
  refreshControls();
}

start();
