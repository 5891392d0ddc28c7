// Review-flow controller, kept free of direct DOM access so it can be
// driven headlessly in tests. A thin bootstrap (main.ts) binds it to the
// page and re-renders on every transition.

import { ApiError, CardStats, DeckClient, Ticket } from "./api.js";
import { renderDashboard, renderIdle, renderReviewCard } from "./views.js";

export type Phase = "loading" | "due" | "idle" | "error";

export interface TrainerState {
  phase: Phase;
  ticket: Ticket | null;
  cards: CardStats[];
  message: string;
}

export class Trainer {
  state: TrainerState = {
    phase: "loading", ticket: null, cards: [], message: "",
  };
  /** Server-reported n after each review, per card, for the sparkline. */
  nTrends = new Map<string, number[]>();

  constructor(private client: DeckClient, private deckId: string,
              private now: () => number = Date.now) {}

  /** Pull stats and the current ticket; decide between due and idle. */
  async refresh(): Promise<void> {
    try {
      const stats = await this.client.deckStats(this.deckId);
      const ticket = await this.client.nextReview(this.deckId);
      this.state = {
        phase: ticket !== null && ticket.proposed_time * 1000 <= this.now()
          ? "due" : "idle",
        ticket,
        cards: stats.cards,
        message: "",
      };
    } catch (err) {
      this.state = {
        phase: "error", ticket: null, cards: this.state.cards,
        message: err instanceof Error ? err.message : String(err),
      };
    }
  }

  /** Submit the learner's self-grade for the held ticket. An expired or
   *  superseded ticket is not an error for the learner: refetch and go on. */
  async grade(recall: 0 | 1): Promise<void> {
    const ticket = this.state.ticket;
    if (this.state.phase !== "due" || ticket === null) return;
    try {
      const result = await this.client.submitReview(
        this.deckId, ticket.ticket_id, recall);
      const trend = this.nTrends.get(result.item_id) ?? [];
      trend.push(result.n);
      this.nTrends.set(result.item_id, trend);
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 409)) {
        this.state = {
          ...this.state, phase: "error",
          message: err instanceof Error ? err.message : String(err),
        };
        return;
      }
      // conflict: ticket already redeemed or replaced; fall through to
      // refresh, which fetches the live ticket
    }
    await this.refresh();
  }

  cardFor(ticket: Ticket): CardStats | undefined {
    return this.state.cards.find(c => c.item_id === ticket.item_id);
  }

  /** Current screen as HTML; the bootstrap swaps it into the page. */
  render(): string {
    const { phase, ticket, cards, message } = this.state;
    if (phase === "loading") return `<p class="status">loading…</p>`;
    if (phase === "error") {
      return `<p class="status error">service unreachable: ` +
        `${message} <button class="retry">retry</button></p>`;
    }
    let top: string;
    if (phase === "due" && ticket !== null) {
      const card = this.cardFor(ticket);
      top = card !== undefined
        ? renderReviewCard(card, ticket)
        : `<p class="status">unknown card ${ticket.item_id}</p>`;
    } else {
      top = renderIdle(ticket, this.now());
    }
    return top + renderDashboard(cards, this.nTrends);
  }
}
