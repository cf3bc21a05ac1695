import { HistoryEntry } from "./types";

/** Per-tab session: current images, slider value, code point, and an
 * append-only history of (request, thumbnail) pairs. */
export class SessionState {
  inputImage: string | null = null;
  guidance: string | null = null;
  codePoint: [number, number] | null = null;
  private alphaValue = 0;
  private readonly entries: HistoryEntry[] = [];

  get alpha(): number {
    return this.alphaValue;
  }

  set alpha(value: number) {
    this.alphaValue = Math.min(1, Math.max(0, value));
  }

  get history(): readonly HistoryEntry[] {
    return this.entries;
  }

  addHistory(entry: HistoryEntry): void {
    this.entries.push(entry);
  }
}
