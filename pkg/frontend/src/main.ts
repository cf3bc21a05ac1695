import { ColorCodeClient } from "./api";
import { HistoryStrip } from "./history";
import { AdaptPanel } from "./panels/adaptPanel";
import { CodePlane } from "./panels/codePlane";
import { SessionState } from "./state";

/** Crop to dimensions divisible by 4 and strip the data-url prefix; the
 * service rejects other sizes. */
export function fileToBase64Png(file: File): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onerror = () => reject(reader.error);
    reader.onload = () => {
      const img = new Image();
      img.onload = () => {
        const w = img.width - (img.width % 4);
        const h = img.height - (img.height % 4);
        const canvas = document.createElement("canvas");
        canvas.width = w;
        canvas.height = h;
        const ctx = canvas.getContext("2d");
        if (!ctx) {
          reject(new Error("canvas unavailable"));
          return;
        }
        ctx.drawImage(img, 0, 0);
        resolve(canvas.toDataURL("image/png").split(",")[1]);
      };
      img.onerror = () => reject(new Error("cannot decode image"));
      img.src = reader.result as string;
    };
    reader.readAsDataURL(file);
  });
}

export function bootStudio(root: HTMLElement, client = new ColorCodeClient()): {
  state: SessionState;
  adaptPanel: AdaptPanel;
  codePlane: CodePlane;
  history: HistoryStrip;
} {
  const state = new SessionState();
  root.innerHTML = `
    <header>
      <h1>color studio</h1>
      <span class="health"></span>
    </header>
    <div class="uploads">
      <label>input <input type="file" class="pick-input" accept="image/*" /></label>
      <label>guidance <input type="file" class="pick-guidance" accept="image/*" /></label>
    </div>
    <main>
      <section class="adapt-host"></section>
      <section class="plane-host"></section>
      <section class="history-host"></section>
    </main>`;

  const adaptPanel = new AdaptPanel(root.querySelector(".adapt-host") as HTMLElement, client, state);
  const codePlane = new CodePlane(root.querySelector(".plane-host") as HTMLElement, client, state);
  const history = new HistoryStrip(
    root.querySelector(".history-host") as HTMLElement,
    client,
    state,
    (image) => {
      adaptPanel.resultImg.src = `data:image/png;base64,${image}`;
    },
  );

  const healthLabel = root.querySelector(".health") as HTMLElement;
  client
    .health()
    .then((h) => {
      healthLabel.textContent = `model k_m=${h.k_m} (${h.checkpoint_digest.slice(0, 8)})`;
      codePlane.setCodeLength(h.k_m);
    })
    .catch((err) => {
      healthLabel.textContent = `service unreachable: ${(err as Error).message}`;
      codePlane.setCodeLength(0);
    });

  (root.querySelector(".pick-input") as HTMLInputElement).addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    await adaptPanel.setInput(await fileToBase64Png(file));
    history.refresh();
  });
  (root.querySelector(".pick-guidance") as HTMLInputElement).addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    await adaptPanel.setGuidance(await fileToBase64Png(file));
    history.refresh();
  });

  return { state, adaptPanel, codePlane, history };
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  bootStudio(document.getElementById("app") as HTMLElement);
}
