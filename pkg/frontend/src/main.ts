// DOM wiring: two clickable scene panels, the sender's word banner, green
// target frame on reveal, and the running statistics bar.

import { ApiClient } from "./api.js";
import { sceneToSvg } from "./scene.js";
import {
  UiState,
  formatPValue,
  initialState,
  localSuccess,
  withChoice,
  withError,
  withRound,
  withSession,
} from "./state.js";
import type { Side } from "./types.js";

export interface AppOptions {
  serverUrl?: string;
  checkpoint?: string;
  onlineUpdate?: boolean;
  revealMs?: number;
}

export class App {
  readonly api: ApiClient;
  state: UiState = initialState();
  private busy = false;
  private revealMs: number;

  constructor(private root: Document, options: AppOptions = {}) {
    const base = options.serverUrl ?? root.location?.origin ?? "http://127.0.0.1:8765";
    this.api = new ApiClient(base);
    this.revealMs = options.revealMs ?? 650;
    this.checkpoint = options.checkpoint;
    this.onlineUpdate = options.onlineUpdate ?? false;
  }

  private checkpoint: string | undefined;
  private onlineUpdate: boolean;

  mount(): void {
    const el = this.root.getElementById("app");
    if (!el) throw new Error("missing #app container");
    el.innerHTML = `
      <header>
        <h1>Pick the picture the word refers to</h1>
        <div id="banner" class="banner">starting session...</div>
      </header>
      <main>
        <div id="panel-L" class="panel" data-side="L"></div>
        <div id="panel-R" class="panel" data-side="R"></div>
      </main>
      <footer>
        <div id="feedback" class="feedback"></div>
        <div id="stats" class="stats"></div>
        <div id="error" class="error"></div>
      </footer>
    `;
    for (const side of ["L", "R"] as Side[]) {
      this.panel(side).addEventListener("click", () => void this.pick(side));
    }
  }

  panel(side: Side): HTMLElement {
    return this.root.getElementById(`panel-${side}`) as HTMLElement;
  }

  text(id: string, value: string): void {
    const el = this.root.getElementById(id);
    if (el) el.textContent = value;
  }

  async start(): Promise<void> {
    try {
      const { session_id } = await this.api.createSession({
        checkpoint: this.checkpoint,
        online_update: this.onlineUpdate,
      });
      this.state = withSession(this.state, session_id);
      await this.nextRound();
    } catch (err) {
      this.state = withError(this.state, String(err));
      this.text("error", this.state.error ?? "");
    }
  }

  async nextRound(): Promise<void> {
    if (!this.state.sessionId) return;
    const round = await this.api.getRound(this.state.sessionId);
    this.state = withRound(this.state, round);
    this.panel("L").innerHTML = sceneToSvg(round.scenes[0]);
    this.panel("R").innerHTML = sceneToSvg(round.scenes[1]);
    this.panel("L").classList.remove("target", "picked");
    this.panel("R").classList.remove("target", "picked");
    const word = round.label ?? `symbol #${round.symbol}`;
    this.text("banner", `the sender says: "${word}"`);
    this.text("feedback", "");
  }

  async pick(side: Side): Promise<void> {
    if (this.busy || !this.state.sessionId || !this.state.round) return;
    this.busy = true;
    try {
      const resp = await this.api.submitChoice(
        this.state.sessionId,
        this.state.round.round_id,
        side,
      );
      this.state = withChoice(this.state, side, resp);
      const targetSide: Side = resp.correct ? side : side === "L" ? "R" : "L";
      this.panel(side).classList.add("picked");
      this.panel(targetSide).classList.add("target");
      this.text("feedback", resp.correct ? "correct" : "wrong");
      this.renderStats();
      await new Promise((r) => setTimeout(r, this.revealMs));
      await this.nextRound();
    } catch (err) {
      this.state = withError(this.state, String(err));
      this.text("error", this.state.error ?? "");
    } finally {
      this.busy = false;
    }
  }

  renderStats(): void {
    const s = this.state.stats;
    if (!s) return;
    const local = localSuccess(this.state);
    const rate = s.success_rate === null ? "-" : `${s.success_rate.toFixed(1)}%`;
    this.text(
      "stats",
      `rounds ${s.rounds} | wins ${s.wins} | success ${rate} | p vs chance ${formatPValue(
        s.p_value_vs_chance,
      )} | local check ${local.wins}/${local.rounds}`,
    );
  }
}

export function boot(doc: Document, options: AppOptions = {}): App {
  const app = new App(doc, options);
  app.mount();
  void app.start();
  return app;
}

declare global {
  interface Window {
    refgameApp?: App;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined" && document.getElementById("app")) {
  window.refgameApp = boot(document);
}
