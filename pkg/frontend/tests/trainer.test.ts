import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { DeckClient } from "../src/api.js";
import { Trainer } from "../src/trainer.js";
import { FakeService } from "./fakeService.js";

let svc: FakeService;
let trainer: Trainer;

beforeEach(() => {
  svc = new FakeService();
  vi.stubGlobal("fetch", svc.fetch);
  trainer = new Trainer(new DeckClient(), "deck1",
                        () => svc.now * 1000);
});

afterEach(() => vi.unstubAllGlobals());

describe("review round trip", () => {
  // deck -> next -> incorrect doubles n and resets m -> correct halves n
  it("reflects the server's memory updates", async () => {
    await new DeckClient().createDeck("deck1",
      [{ item_id: "bonjour", alpha: 0.5, beta: 1.0 }]);
    await trainer.refresh();
    expect(trainer.state.phase).toBe("due");

    await trainer.grade(0);
    let card = svc.stats().cards[0];
    expect(card.n).toBeCloseTo(2.0); // failure doubles n (beta = 1)
    expect(card.m).toBeCloseTo(1.0);
    expect(trainer.nTrends.get("bonjour")).toEqual([2.0]);

    await trainer.grade(1);
    card = svc.stats().cards[0];
    expect(card.n).toBeCloseTo(1.0); // success halves n (alpha = 0.5)
    expect(trainer.nTrends.get("bonjour")).toEqual([2.0, 1.0]);
  });

  it("renders a history strip that matches the server event log", async () => {
    svc.addCard("bonjour");
    await trainer.refresh();
    await trainer.grade(0);
    await trainer.grade(1);
    await trainer.grade(1);

    const html = trainer.render();
    const marks = [...html.matchAll(/class="mark (\w+)" data-at="(\d+)"/g)]
      .map(m => ({ kind: m[1], at: Number(m[2]) }));
    // review card strip + dashboard strip both show the same three events
    expect(marks).toHaveLength(2 * svc.events.length);
    const log = svc.events.map(e => ({
      kind: e.recall ? "hit" : "miss", at: e.at,
    }));
    expect(marks.slice(0, 3)).toEqual(log);
    expect(marks.slice(3)).toEqual(log);
  });
});

describe("phases", () => {
  it("idles with a countdown when the sampled time is ahead", async () => {
    svc.addCard("bonjour");
    svc.proposeIn = 120;
    await trainer.refresh();
    expect(trainer.state.phase).toBe("idle");
    expect(trainer.render()).toContain("2m 0s");
  });

  it("shows the empty screen for a deck with no cards", async () => {
    await trainer.refresh();
    expect(trainer.state.ticket).toBeNull();
    expect(trainer.render()).toContain("empty");
  });

  it("recovers from a replayed ticket by refetching", async () => {
    svc.addCard("bonjour");
    await trainer.refresh();
    const stale = trainer.state.ticket!;
    // another tab redeems the same ticket first
    await new DeckClient().submitReview("deck1", stale.ticket_id, 1);

    await trainer.grade(0);
    expect(trainer.state.phase).not.toBe("error");
    expect(svc.events).toHaveLength(1); // the double grade was not applied
  });

  it("surfaces network failures with a retry control", async () => {
    svc.addCard("bonjour");
    await trainer.refresh();
    vi.stubGlobal("fetch",
                  vi.fn().mockRejectedValue(new TypeError("offline")));
    await trainer.refresh();
    expect(trainer.state.phase).toBe("error");
    expect(trainer.render()).toContain("retry");

    vi.stubGlobal("fetch", svc.fetch);
    await trainer.refresh();
    expect(trainer.state.phase).toBe("due");
  });
});
