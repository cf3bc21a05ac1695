import { ColorCodeClient } from "../api";
import { SessionState } from "../state";
import { ApiRequestError } from "../types";

export interface CodePlaneOptions {
  steps?: number;
  lo?: number;
  hi?: number;
  alpha?: number;
  planeSize?: number;
}

/**
 * Clickable view of the 2-D code plane: a click interpolates at that code,
 * the grid button fetches the full steps x steps montage. Rows follow the
 * first code dimension, columns the second. Requires a k_m=2 model.
 */
export class CodePlane {
  readonly root: HTMLElement;
  readonly canvas: HTMLCanvasElement;
  readonly preview: HTMLImageElement;
  readonly gridButton: HTMLButtonElement;
  readonly gridContainer: HTMLElement;
  readonly banner: HTMLElement;
  readonly disabledNote: HTMLElement;

  readonly lo: number;
  readonly hi: number;
  readonly steps: number;
  readonly alpha: number;

  private enabled = false;
  private inflight: AbortController | null = null;

  constructor(
    container: HTMLElement,
    private client: ColorCodeClient,
    private state: SessionState,
    options: CodePlaneOptions = {},
  ) {
    this.lo = options.lo ?? -5;
    this.hi = options.hi ?? 5;
    this.steps = options.steps ?? 11;
    this.alpha = options.alpha ?? 0.5;
    const size = options.planeSize ?? 220;

    this.root = document.createElement("div");
    this.root.className = "code-plane";
    this.root.innerHTML = `
      <div class="banner" hidden></div>
      <div class="disabled-note" hidden></div>
      <canvas width="${size}" height="${size}"></canvas>
      <img class="preview" alt="interpolation preview" />
      <button class="grid-btn" type="button">grid</button>
      <div class="grid-thumbs"></div>`;
    container.appendChild(this.root);
    this.canvas = this.root.querySelector("canvas") as HTMLCanvasElement;
    this.preview = this.root.querySelector(".preview") as HTMLImageElement;
    this.gridButton = this.root.querySelector(".grid-btn") as HTMLButtonElement;
    this.gridContainer = this.root.querySelector(".grid-thumbs") as HTMLElement;
    this.banner = this.root.querySelector(".banner") as HTMLElement;
    this.disabledNote = this.root.querySelector(".disabled-note") as HTMLElement;

    this.canvas.addEventListener("click", (ev) => void this.onClick(ev));
    this.gridButton.addEventListener("click", () => void this.requestGrid());
    this.paintPlane();
  }

  /** Enable only for 2-D code models (per /v1/health). */
  setCodeLength(k_m: number): void {
    this.enabled = k_m === 2;
    this.disabledNote.hidden = this.enabled;
    this.gridButton.disabled = !this.enabled;
    if (!this.enabled) {
      this.disabledNote.textContent =
        `code plane needs a 2-D color code model; this checkpoint has k_m=${k_m}`;
    }
  }

  /** Canvas pixel to code-plane point: vertical axis is the first code
   * dimension, horizontal the second. */
  pixelToCode(px: number, py: number): [number, number] {
    const span = this.hi - this.lo;
    const z1 = this.lo + span * (py / this.canvas.height);
    const z2 = this.lo + span * (px / this.canvas.width);
    const clamp = (v: number) => Math.min(this.hi, Math.max(this.lo, v));
    return [clamp(z1), clamp(z2)];
  }

  private async onClick(ev: MouseEvent): Promise<void> {
    if (!this.enabled || !this.state.inputImage) return;
    const rect = this.canvas.getBoundingClientRect();
    const z = this.pixelToCode(ev.clientX - rect.left, ev.clientY - rect.top);
    await this.requestInterpolation(z);
  }

  async requestInterpolation(z: [number, number]): Promise<void> {
    const input = this.state.inputImage;
    if (!input) return;
    this.state.codePoint = z;
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const params = { image: input, z: [z[0], z[1]], alpha: this.alpha };
    try {
      const image = await this.client.interpolate(params, controller.signal);
      if (controller.signal.aborted) return;
      this.preview.src = `data:image/png;base64,${image}`;
      this.state.addHistory({ request: { kind: "interpolate", params }, thumbnail: image });
      this.hideError();
    } catch (err) {
      if ((err as Error).name === "AbortError") return;
      this.showError(err);
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }

  async requestGrid(): Promise<void> {
    const input = this.state.inputImage;
    if (!input || !this.enabled) return;
    try {
      const body = await this.client.grid({
        image: input, steps: this.steps, lo: this.lo, hi: this.hi, alpha: this.alpha,
      });
      this.renderGrid(body.images, body.center);
      this.hideError();
    } catch (err) {
      this.showError(err);
    }
  }

  private renderGrid(images: string[][], center: [number, number] | null): void {
    this.gridContainer.innerHTML = "";
    this.gridContainer.style.gridTemplateColumns = `repeat(${images[0]?.length ?? 0}, 1fr)`;
    images.forEach((row, i) => {
      row.forEach((cell, j) => {
        const img = document.createElement("img");
        img.className = "grid-cell";
        img.src = `data:image/png;base64,${cell}`;
        if (center && center[0] === i && center[1] === j) {
          img.classList.add("center-cell"); // the fixed-enhancement anchor
        }
        this.gridContainer.appendChild(img);
      });
    });
  }

  private paintPlane(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    const grad = ctx.createLinearGradient(0, 0, width, height);
    grad.addColorStop(0, "#1c3f5e");
    grad.addColorStop(1, "#3e8e7e");
    ctx.fillStyle = grad;
    ctx.fillRect(0, 0, width, height);
    ctx.strokeStyle = "rgba(255,255,255,0.6)";
    ctx.beginPath();
    ctx.moveTo(width / 2, 0);
    ctx.lineTo(width / 2, height);
    ctx.moveTo(0, height / 2);
    ctx.lineTo(width, height / 2);
    ctx.stroke();
  }

  private showError(err: unknown): void {
    this.banner.hidden = false;
    this.banner.textContent =
      err instanceof ApiRequestError
        ? `${err.body.code}: ${err.body.message}`
        : `error: ${(err as Error).message ?? err}`;
  }

  private hideError(): void {
    this.banner.hidden = true;
    this.banner.textContent = "";
  }
}
