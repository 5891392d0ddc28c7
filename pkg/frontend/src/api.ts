// Typed client for the review service. The UI never computes memory math
// locally; every n, m, intensity and proposed time comes from these calls.

export interface CardSpec {
  item_id: string;
  alpha?: number;
  beta?: number;
  n0?: number;
  q?: number;
}

export interface HistoryEntry {
  at: number; // seconds since epoch
  recall: 0 | 1;
}

export interface CardStats {
  item_id: string;
  n: number;
  m: number;
  q: number;
  alpha: number;
  beta: number;
  reviews: number;
  intensity: number;
  history: HistoryEntry[];
}

export interface DeckStats {
  deck_id: string;
  created_at: number;
  seed: number;
  events: number;
  cards: CardStats[];
}

export interface Ticket {
  ticket_id: string;
  deck_id: string;
  item_id: string;
  proposed_time: number;
  issued_at: number;
  expiry: number;
}

export interface ReviewResult {
  deck_id: string;
  item_id: string;
  n: number;
  m: number;
  reviews: number;
  next: Ticket | null;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(base: string, path: string,
                          init?: RequestInit): Promise<T> {
  const res = await fetch(base + path, init);
  const body = await res.json().catch(() => ({}));
  if (!res.ok) {
    const detail = (body as { error?: string }).error ?? res.statusText;
    throw new ApiError(res.status, detail);
  }
  return body as T;
}

export class DeckClient {
  constructor(private base: string = "") {}

  createDeck(deckId: string, cards: CardSpec[],
             seed?: number): Promise<DeckStats> {
    return request<DeckStats>(this.base, "/decks", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ deck_id: deckId, cards, seed }),
    });
  }

  async nextReview(deckId: string): Promise<Ticket | null> {
    const body = await request<{ ticket: Ticket | null }>(
      this.base, `/decks/${deckId}/next`);
    return body.ticket;
  }

  submitReview(deckId: string, ticketId: string,
               recall: 0 | 1): Promise<ReviewResult> {
    return request<ReviewResult>(this.base, `/decks/${deckId}/reviews`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ ticket_id: ticketId, recall }),
    });
  }

  deckStats(deckId: string): Promise<DeckStats> {
    return request<DeckStats>(this.base, `/decks/${deckId}/stats`);
  }
}
