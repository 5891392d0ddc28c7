import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from memsched.schedulers import OptimalSchedule, sample_next_review
from memsched.service import (
    SECONDS_PER_DAY,
    Conflict,
    NotFound,
    ReviewService,
    ServiceError,
    create_app,
)

EPOCH = 1_700_000_000.0


class FakeClock:
    def __init__(self, t=EPOCH):
        self.t = t

    def __call__(self):
        return self.t

    def advance_days(self, d):
        self.t += d * SECONDS_PER_DAY


def make_service(tmp_path=None):
    clock = FakeClock()
    svc = ReviewService(data_dir=tmp_path, clock=clock)
    return svc, clock


def one_card_deck(svc, deck_id="d1", q=1.0, **params):
    return svc.create_deck([{"item_id": "card1", "q": q, **params}],
                           deck_id=deck_id, seed=7)


class TestDecks:
    def test_defaults(self):
        svc, _ = make_service()
        stats = one_card_deck(svc)
        card = stats["cards"][0]
        assert card["alpha"] == 0.5 and card["beta"] == 1.0
        assert card["n"] == 1.0 and card["reviews"] == 0

    def test_duplicate_items_rejected(self):
        svc, _ = make_service()
        with pytest.raises(Conflict, match="duplicate item"):
            svc.create_deck([{"item_id": "a"}, {"item_id": "a"}])

    def test_duplicate_deck_id_rejected(self):
        svc, _ = make_service()
        one_card_deck(svc)
        with pytest.raises(Conflict, match="already exists"):
            one_card_deck(svc)

    def test_empty_deck_valid(self):
        svc, _ = make_service()
        stats = svc.create_deck([], deck_id="empty")
        assert stats["cards"] == []
        assert svc.next_review("empty") is None

    def test_unknown_deck(self):
        svc, _ = make_service()
        with pytest.raises(NotFound):
            svc.deck_stats("ghost")


class TestTicketsAndReviews:
    def test_success_halves_n_and_resets_m(self):
        svc, clock = make_service()
        one_card_deck(svc)
        clock.advance_days(2.0)
        ticket = svc.next_review("d1")
        out = svc.submit_review("d1", ticket["ticket_id"], recall=1)
        assert out["n"] == pytest.approx(0.5)  # alpha = 0.5
        assert out["m"] == pytest.approx(1.0)
        assert out["next"] is not None

    def test_failure_doubles_n(self):
        svc, clock = make_service()
        one_card_deck(svc)
        clock.advance_days(2.0)
        ticket = svc.next_review("d1")
        out = svc.submit_review("d1", ticket["ticket_id"], recall=0)
        assert out["n"] == pytest.approx(2.0)  # beta = 1

    def test_replayed_ticket_conflicts(self):
        svc, clock = make_service()
        one_card_deck(svc)
        clock.advance_days(1.0)
        ticket = svc.next_review("d1")
        svc.submit_review("d1", ticket["ticket_id"], recall=1)
        with pytest.raises(Conflict, match="redeemed|superseded"):
            svc.submit_review("d1", ticket["ticket_id"], recall=1)

    def test_bad_recall_rejected(self):
        svc, clock = make_service()
        one_card_deck(svc)
        ticket = svc.next_review("d1")
        with pytest.raises(ServiceError, match="recall"):
            svc.submit_review("d1", ticket["ticket_id"], recall=2)

    def test_ticket_stable_between_events(self):
        svc, clock = make_service()
        one_card_deck(svc)
        t1 = svc.next_review("d1")
        clock.advance_days(0.01)
        t2 = svc.next_review("d1")
        assert t1 == t2

    def test_fresh_card_intensity_zero_and_time_later(self):
        svc, _ = make_service()
        one_card_deck(svc)
        stats = svc.deck_stats("d1")
        assert stats["cards"][0]["intensity"] == 0.0  # m = 1 at creation
        ticket = svc.next_review("d1")
        assert ticket["proposed_time"] > EPOCH

    def test_tiny_q_reviews_almost_immediately(self):
        svc, clock = make_service()
        one_card_deck(svc, q=1e-8)
        clock.advance_days(5.0)  # m well below 1
        ticket = svc.next_review("d1")
        gap_days = (ticket["proposed_time"] - clock()) / SECONDS_PER_DAY
        assert gap_days < 0.05

    def test_min_over_independent_card_streams(self):
        svc, clock = make_service()
        svc.create_deck([{"item_id": "a"}, {"item_id": "b"}],
                        deck_id="d2", seed=13)
        clock.advance_days(3.0)
        ticket = svc.next_review("d2")

        deck = svc.decks["d2"]
        t_now = deck.to_days(clock())
        samples = {}
        for idx, (item_id, card) in enumerate(sorted(deck.cards.items())):
            rng = np.random.default_rng(
                np.random.SeedSequence([deck.seed, deck.events, idx]))
            horizon = 10.0 * (1.0 / card.state.n + math.sqrt(card.q))
            samples[item_id] = sample_next_review(
                OptimalSchedule(card.q), card.state, t_now,
                t_now + horizon, rng)
        assert samples["a"] != samples["b"]  # per-card streams independent
        winner = min(samples, key=samples.get)
        assert ticket["item_id"] == winner
        assert ticket["proposed_time"] == pytest.approx(
            deck.to_seconds(samples[winner]))


class TestStatsAndReplay:
    def play(self, svc, clock, deck_id="d1", rounds=5):
        outcomes = [1, 0, 1, 1, 0]
        for r in outcomes[:rounds]:
            clock.advance_days(1.5)
            ticket = svc.next_review(deck_id)
            svc.submit_review(deck_id, ticket["ticket_id"], recall=r)

    def test_counts_match_history(self):
        svc, clock = make_service()
        one_card_deck(svc)
        self.play(svc, clock)
        stats = svc.deck_stats("d1")
        card = stats["cards"][0]
        assert card["reviews"] == 5 == len(card["history"])
        assert stats["events"] == 5

    def test_stats_idempotent(self):
        svc, clock = make_service()
        one_card_deck(svc)
        self.play(svc, clock, rounds=2)
        now = clock()
        assert svc.deck_stats("d1", now=now) == svc.deck_stats("d1", now=now)

    def test_fresh_card_m_decays_from_origin(self):
        svc, clock = make_service()
        one_card_deck(svc)
        clock.advance_days(2.0)
        m = svc.deck_stats("d1")["cards"][0]["m"]
        assert m == pytest.approx(math.exp(-2.0))

    def test_restart_replay_reproduces_state(self, tmp_path):
        svc, clock = make_service(tmp_path)
        one_card_deck(svc)
        self.play(svc, clock)
        before = svc.deck_stats("d1", now=clock())
        ticket_before = svc.next_review("d1")

        svc2 = ReviewService(data_dir=tmp_path, clock=clock)
        after = svc2.deck_stats("d1", now=clock())
        assert after == before
        ticket_after = svc2.next_review("d1")
        assert ticket_after["item_id"] == ticket_before["item_id"]
        assert ticket_after["proposed_time"] == pytest.approx(
            ticket_before["proposed_time"])

    def test_decks_isolated(self):
        svc, clock = make_service()
        one_card_deck(svc, deck_id="a")
        one_card_deck(svc, deck_id="b")
        clock.advance_days(1.0)
        ticket = svc.next_review("a")
        svc.submit_review("a", ticket["ticket_id"], recall=1)
        assert svc.deck_stats("b")["events"] == 0


class TestHttpApi:
    @pytest.fixture
    def client(self, tmp_path):
        svc, clock = make_service(tmp_path)
        self.clock = clock
        return TestClient(create_app(svc))

    def create(self, client, deck_id="web1"):
        return client.post("/decks", json={
            "deck_id": deck_id, "seed": 3,
            "cards": [{"item_id": "card1"}]})

    def test_round_trip(self, client):
        r = self.create(client)
        assert r.status_code == 201
        assert r.json()["cards"][0]["n"] == 1.0

        self.clock.advance_days(2.0)
        r = client.get("/decks/web1/next")
        ticket = r.json()["ticket"]
        assert r.status_code == 200 and ticket is not None

        r = client.post("/decks/web1/reviews",
                        json={"ticket_id": ticket["ticket_id"], "recall": 0})
        assert r.status_code == 200
        body = r.json()
        assert body["n"] == pytest.approx(2.0)  # failure doubles n
        assert body["m"] == pytest.approx(1.0)

        r = client.get("/decks/web1/stats")
        assert r.status_code == 200
        assert r.json()["cards"][0]["reviews"] == 1

    def test_replay_conflict(self, client):
        self.create(client)
        self.clock.advance_days(1.0)
        ticket = client.get("/decks/web1/next").json()["ticket"]
        client.post("/decks/web1/reviews",
                    json={"ticket_id": ticket["ticket_id"], "recall": 1})
        r = client.post("/decks/web1/reviews",
                        json={"ticket_id": ticket["ticket_id"], "recall": 1})
        assert r.status_code == 409

    def test_duplicate_deck_409(self, client):
        self.create(client)
        assert self.create(client).status_code == 409

    def test_unknown_deck_404(self, client):
        assert client.get("/decks/ghost/stats").status_code == 404
        assert client.get("/decks/ghost/next").status_code == 404
