import { ColorCodeClient } from "./api";
import { SessionState } from "./state";
import { HistoryEntry } from "./types";

/** Append-only strip of past results; clicking an entry re-issues its
 * request and shows the (byte-identical, since the model is read-only)
 * response. */
export class HistoryStrip {
  readonly root: HTMLElement;

  constructor(
    container: HTMLElement,
    private client: ColorCodeClient,
    private state: SessionState,
    private onReplay: (image: string) => void,
  ) {
    this.root = document.createElement("div");
    this.root.className = "history-strip";
    container.appendChild(this.root);
  }

  refresh(): void {
    this.root.innerHTML = "";
    this.state.history.forEach((entry, index) => {
      const img = document.createElement("img");
      img.className = "history-thumb";
      img.src = `data:image/png;base64,${entry.thumbnail}`;
      img.title = `${entry.request.kind} #${index}`;
      img.addEventListener("click", () => void this.replay(entry));
      this.root.appendChild(img);
    });
  }

  async replay(entry: HistoryEntry): Promise<string> {
    const image =
      entry.request.kind === "adapt"
        ? await this.client.adapt(entry.request.params)
        : await this.client.interpolate(entry.request.params);
    this.onReplay(image);
    return image;
  }
}
