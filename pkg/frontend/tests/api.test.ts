import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, DeckClient } from "../src/api.js";

const jsonResponse = (body: unknown, status = 200) =>
  new Response(JSON.stringify(body), { status });

afterEach(() => vi.unstubAllGlobals());

describe("DeckClient", () => {
  it("posts deck creation with cards and seed", async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse({
      deck_id: "d1", created_at: 0, seed: 3, events: 0, cards: [],
    }, 201));
    vi.stubGlobal("fetch", fetchMock);

    const stats = await new DeckClient("http://x").createDeck(
      "d1", [{ item_id: "a" }], 3);
    expect(stats.deck_id).toBe("d1");
    const [url, init] = fetchMock.mock.calls[0];
    expect(url).toBe("http://x/decks");
    expect(JSON.parse(init.body)).toEqual(
      { deck_id: "d1", cards: [{ item_id: "a" }], seed: 3 });
  });

  it("unwraps the ticket from the next-review envelope", async () => {
    vi.stubGlobal("fetch", vi.fn().mockResolvedValue(
      jsonResponse({ ticket: null })));
    expect(await new DeckClient().nextReview("d1")).toBeNull();
  });

  it("maps error bodies to ApiError with status", async () => {
    vi.stubGlobal("fetch", vi.fn().mockResolvedValue(
      jsonResponse({ error: "no deck 'ghost'" }, 404)));
    const err = await new DeckClient().deckStats("ghost").catch(e => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(404);
    expect(err.message).toContain("ghost");
  });

  it("survives a non-JSON error body", async () => {
    vi.stubGlobal("fetch", vi.fn().mockResolvedValue(
      new Response("gateway timeout", { status: 504,
                                        statusText: "Gateway Timeout" })));
    const err = await new DeckClient().deckStats("d").catch(e => e);
    expect(err.status).toBe(504);
  });
});
