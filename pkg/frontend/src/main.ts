// Page bootstrap: wires the trainer to the DOM, delegates button clicks,
// and keeps the idle countdown fresh.

import { DeckClient } from "./api.js";
import { Trainer } from "./trainer.js";

const REFRESH_MS = 1000;

export function mount(root: HTMLElement, deckId: string,
                      base = ""): Trainer {
  const trainer = new Trainer(new DeckClient(base), deckId);

  const draw = () => { root.innerHTML = trainer.render(); };

  root.addEventListener("click", async ev => {
    const el = ev.target as HTMLElement;
    if (el.matches("button.grade")) {
      await trainer.grade(el.dataset.recall === "1" ? 1 : 0);
      draw();
    } else if (el.matches("button.retry")) {
      await trainer.refresh();
      draw();
    }
  });

  // countdown and due-transition polling; cheap because stats are tiny
  setInterval(async () => {
    if (trainer.state.phase === "idle") {
      await trainer.refresh();
      draw();
    }
  }, REFRESH_MS);

  trainer.refresh().then(draw);
  draw();
  return trainer;
}

declare global {
  interface Window { memschedMount: typeof mount; }
}

if (typeof window !== "undefined") {
  window.memschedMount = mount;
}
