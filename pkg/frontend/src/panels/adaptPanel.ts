import { ColorCodeClient } from "../api";
import { debounce } from "../debounce";
import { SessionState } from "../state";
import { ApiRequestError } from "../types";

const RECOMMENDED_ALPHA_MAX = 0.3;

export interface AdaptPanelOptions {
  debounceMs?: number;
}

/**
 * Side-by-side view of the fixed enhancement (baseline) and the
 * guidance-adapted result, driven by a debounced alpha slider. One request
 * in flight at a time; newer interactions cancel the older request.
 */
export class AdaptPanel {
  readonly root: HTMLElement;
  readonly baselineImg: HTMLImageElement;
  readonly resultImg: HTMLImageElement;
  readonly slider: HTMLInputElement;
  readonly banner: HTMLElement;
  readonly bandNote: HTMLElement;

  private inflight: AbortController | null = null;
  private readonly scheduleAdapt: () => void;

  constructor(
    container: HTMLElement,
    private client: ColorCodeClient,
    private state: SessionState,
    options: AdaptPanelOptions = {},
  ) {
    this.root = document.createElement("div");
    this.root.className = "adapt-panel";
    this.root.innerHTML = `
      <div class="banner" hidden></div>
      <div class="panes">
        <figure><img class="baseline" alt="fixed enhancement" /><figcaption>baseline (&alpha;=0)</figcaption></figure>
        <figure><img class="result" alt="adapted result" /><figcaption>adapted</figcaption></figure>
      </div>
      <label class="alpha-row">
        &alpha; <input class="alpha" type="range" min="0" max="1" step="0.01" value="0" />
        <span class="alpha-value">0.00</span>
        <span class="band-note" title="quality is typically best for alpha in [0, 0.3]"></span>
      </label>`;
    container.appendChild(this.root);
    this.baselineImg = this.root.querySelector(".baseline") as HTMLImageElement;
    this.resultImg = this.root.querySelector(".result") as HTMLImageElement;
    this.slider = this.root.querySelector(".alpha") as HTMLInputElement;
    this.banner = this.root.querySelector(".banner") as HTMLElement;
    this.bandNote = this.root.querySelector(".band-note") as HTMLElement;

    this.scheduleAdapt = debounce(() => void this.requestAdapt(), options.debounceMs ?? 150);
    this.slider.addEventListener("input", () => {
      this.state.alpha = Number(this.slider.value);
      (this.root.querySelector(".alpha-value") as HTMLElement).textContent =
        this.state.alpha.toFixed(2);
      this.updateBandNote();
      this.scheduleAdapt();
    });
    this.updateBandNote();
  }

  /** Load a new distorted input: fetch its baseline, then adapt. */
  async setInput(image: string): Promise<void> {
    this.state.inputImage = image;
    try {
      const baseline = await this.client.enhance(image);
      this.baselineImg.src = `data:image/png;base64,${baseline}`;
      this.hideError();
    } catch (err) {
      this.showError(err);
      return;
    }
    await this.requestAdapt();
  }

  /** Swap the guidance image and immediately re-request at the same alpha. */
  async setGuidance(image: string): Promise<void> {
    this.state.guidance = image;
    await this.requestAdapt();
  }

  async requestAdapt(): Promise<void> {
    const input = this.state.inputImage;
    if (!input) return;
    const guidance = this.state.guidance ?? input;
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const params = { image: input, guidance, alpha: this.state.alpha };
    try {
      const image = await this.client.adapt(params, controller.signal);
      if (controller.signal.aborted) return;
      this.resultImg.src = `data:image/png;base64,${image}`;
      this.state.addHistory({ request: { kind: "adapt", params }, thumbnail: image });
      this.hideError();
    } catch (err) {
      if ((err as Error).name === "AbortError") return;
      this.showError(err);
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }

  private updateBandNote(): void {
    const inBand = this.state.alpha <= RECOMMENDED_ALPHA_MAX;
    this.bandNote.textContent = inBand
      ? "inside recommended band [0, 0.3]"
      : "outside recommended band [0, 0.3]";
    this.bandNote.dataset.inBand = String(inBand);
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
