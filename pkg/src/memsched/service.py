"""Review service: decks of independently scheduled cards, sampled next-review
tickets, recall submission onto an append-only event log, and stats.

State is derived purely from (deck config, event log); restarting the service
and replaying the log reproduces identical card states and ticket times.
"""

from __future__ import annotations

import json
import math
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .memory import ItemParams, MemoryState, ModelKind, apply_review, recall_prob
from .schedulers import OptimalSchedule, intensity, sample_next_review

FORMAT_NAME = "memsched-deck"
FORMAT_VERSION = 1
SECONDS_PER_DAY = 86400.0

DEFAULT_ALPHA = 0.5
DEFAULT_BETA = 1.0
DEFAULT_N0 = 1.0
DEFAULT_Q = 1.0  # day^2; saturation intensity of 1 review/day

TICKET_SLACK = 2.0  # expiry: this many horizons past issue


class ServiceError(Exception):
    status = 400


class NotFound(ServiceError):
    status = 404


class Conflict(ServiceError):
    status = 409


@dataclass
class Card:
    item_id: str
    params: ItemParams
    q: float
    state: MemoryState
    reviews: int = 0
    history: list = field(default_factory=list)  # (at_seconds, recall)


@dataclass
class SessionTicket:
    ticket_id: str
    deck_id: str
    item_id: str
    proposed_time: float  # seconds since epoch
    issued_at: float
    expiry: float

    def as_dict(self) -> dict:
        return {"ticket_id": self.ticket_id, "deck_id": self.deck_id,
                "item_id": self.item_id, "proposed_time": self.proposed_time,
                "issued_at": self.issued_at, "expiry": self.expiry}


@dataclass
class Deck:
    deck_id: str
    seed: int
    created_at: float  # seconds since epoch; model time origin
    cards: dict[str, Card]
    events: int = 0
    ticket: Optional[SessionTicket] = None
    used_tickets: set = field(default_factory=set)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def to_days(self, ts: float) -> float:
        return (ts - self.created_at) / SECONDS_PER_DAY

    def to_seconds(self, t: float) -> float:
        return self.created_at + t * SECONDS_PER_DAY


def _expected_gap_days(card: Card) -> float:
    """Rough expected inter-review gap: ramp delay plus saturated wait."""
    return 1.0 / max(card.state.n, 1e-6) + math.sqrt(card.q)


class ReviewService:
    """In-process core behind the HTTP endpoints; one writer lock per deck."""

    def __init__(self, data_dir=None, clock=time.time):
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self.clock = clock
        self.decks: dict[str, Deck] = {}
        self._registry = threading.Lock()
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            for path in sorted(self.data_dir.glob("*.jsonl")):
                deck = _replay(path)
                self.decks[deck.deck_id] = deck

    # -- deck lifecycle

    def create_deck(self, cards: list[dict], deck_id: Optional[str] = None,
                    seed: Optional[int] = None,
                    created_at: Optional[float] = None) -> dict:
        deck_id = deck_id or uuid.uuid4().hex[:12]
        seed = int(seed) if seed is not None else 0
        created_at = created_at if created_at is not None else self.clock()

        ids = [c["item_id"] for c in cards]
        if len(set(ids)) != len(ids):
            raise Conflict("duplicate item ids in deck")

        deck_cards = {}
        for c in cards:
            params = ItemParams(alpha=float(c.get("alpha", DEFAULT_ALPHA)),
                                beta=float(c.get("beta", DEFAULT_BETA)),
                                n0=float(c.get("n0", DEFAULT_N0)))
            deck_cards[c["item_id"]] = Card(
                item_id=c["item_id"], params=params,
                q=float(c.get("q", DEFAULT_Q)),
                state=MemoryState.initial(params.n0, 0.0,
                                          ModelKind.exponential()))
        with self._registry:
            if deck_id in self.decks:
                raise Conflict(f"deck {deck_id!r} already exists")
            deck = Deck(deck_id=deck_id, seed=seed, created_at=created_at,
                        cards=deck_cards)
            self.decks[deck_id] = deck
        self._persist_header(deck, cards)
        return self.deck_stats(deck_id)

    def _deck(self, deck_id: str) -> Deck:
        try:
            return self.decks[deck_id]
        except KeyError:
            raise NotFound(f"no deck {deck_id!r}") from None

    # -- scheduling

    def next_review(self, deck_id: str,
                    now: Optional[float] = None) -> Optional[dict]:
        deck = self._deck(deck_id)
        now = now if now is not None else self.clock()
        with deck.lock:
            t = deck.ticket
            if t is not None and now < t.expiry \
                    and t.ticket_id not in deck.used_tickets:
                return t.as_dict()
            ticket = self._sample_ticket(deck, now)
            deck.ticket = ticket
            return ticket.as_dict() if ticket is not None else None

    def _sample_ticket(self, deck: Deck,
                       now: float) -> Optional[SessionTicket]:
        """Earliest sampled per-card time over each card's rolling horizon.

        The RNG is derived from (deck seed, event count, card index) so times
        are reproducible from the event log and refresh on state change.
        """
        if not deck.cards:
            return None
        t_now = deck.to_days(now)
        best = None
        horizon_best = 0.0
        for idx, (item_id, card) in enumerate(sorted(deck.cards.items())):
            horizon = 10.0 * _expected_gap_days(card)
            rng = np.random.default_rng(
                np.random.SeedSequence([deck.seed, deck.events, idx]))
            t_start = max(t_now, card.state.t_last)
            s = sample_next_review(OptimalSchedule(card.q), card.state,
                                   t_start, t_start + horizon, rng)
            if s is not None and (best is None or s < best[0]):
                best = (s, item_id)
                horizon_best = horizon
        if best is None:
            return None
        s, item_id = best
        return SessionTicket(
            ticket_id=uuid.uuid4().hex,
            deck_id=deck.deck_id, item_id=item_id,
            proposed_time=deck.to_seconds(s),
            issued_at=now,
            expiry=now + TICKET_SLACK * horizon_best * SECONDS_PER_DAY)

    # -- reviews

    def submit_review(self, deck_id: str, ticket_id: str, recall: int,
                      at: Optional[float] = None) -> dict:
        deck = self._deck(deck_id)
        if recall not in (0, 1):
            raise ServiceError("recall must be 0 or 1")
        at = at if at is not None else self.clock()
        with deck.lock:
            if ticket_id in deck.used_tickets:
                raise Conflict("ticket already redeemed")
            t = deck.ticket
            if t is None or t.ticket_id != ticket_id:
                raise Conflict("unknown or superseded ticket")
            if at > t.expiry:
                raise Conflict("ticket expired")
            card = deck.cards[t.item_id]
            summary = self._apply(deck, card, at, recall)
            deck.used_tickets.add(ticket_id)
            deck.ticket = None
            self._persist_event(deck, card.item_id, at, recall)
        nxt = self.next_review(deck_id, now=at)
        summary["next"] = nxt
        return summary

    def _apply(self, deck: Deck, card: Card, at: float,
               recall: int) -> dict:
        t = deck.to_days(at)
        # clock skew guard: reviews never rewind a card's own clock
        t = max(t, card.state.t_last)
        card.state = apply_review(card.state, t, recall, card.params)
        card.reviews += 1
        card.history.append((at, recall))
        deck.events += 1
        return {"deck_id": deck.deck_id, "item_id": card.item_id,
                "n": card.state.n,
                "m": recall_prob(card.state, t),
                "reviews": card.reviews}

    # -- stats

    def deck_stats(self, deck_id: str, now: Optional[float] = None) -> dict:
        deck = self._deck(deck_id)
        now = now if now is not None else self.clock()
        t = deck.to_days(now)
        cards = []
        for item_id, card in sorted(deck.cards.items()):
            t_eval = max(t, card.state.t_last)
            cards.append({
                "item_id": item_id,
                "n": card.state.n,
                "m": recall_prob(card.state, t_eval),
                "q": card.q,
                "alpha": card.params.alpha,
                "beta": card.params.beta,
                "reviews": card.reviews,
                "intensity": intensity(OptimalSchedule(card.q), card.state,
                                       t_eval),
                "history": [{"at": a, "recall": r} for a, r in card.history],
            })
        return {"deck_id": deck.deck_id, "created_at": deck.created_at,
                "seed": deck.seed, "events": deck.events, "cards": cards}

    # -- persistence

    def _deck_path(self, deck: Deck) -> Optional[Path]:
        if self.data_dir is None:
            return None
        return self.data_dir / f"{deck.deck_id}.jsonl"

    def _persist_header(self, deck: Deck, cards: list[dict]) -> None:
        path = self._deck_path(deck)
        if path is None:
            return
        header = {"format": FORMAT_NAME, "version": FORMAT_VERSION,
                  "deck_id": deck.deck_id, "seed": deck.seed,
                  "created_at": deck.created_at,
                  "cards": [{"item_id": c.item_id,
                             "alpha": c.params.alpha, "beta": c.params.beta,
                             "n0": c.params.n0, "q": c.q}
                            for c in deck.cards.values()]}
        with open(path, "w") as fh:
            fh.write(json.dumps(header) + "\n")

    def _persist_event(self, deck: Deck, item_id: str, at: float,
                       recall: int) -> None:
        path = self._deck_path(deck)
        if path is None:
            return
        with open(path, "a") as fh:
            fh.write(json.dumps({"item": item_id, "at": at,
                                 "recall": recall}) + "\n")


def _replay(path: Path) -> Deck:
    """Rebuild a deck from its event log; the log is the source of truth."""
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("format") != FORMAT_NAME:
            raise ValueError(f"unrecognized deck file {path}")
        if header.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported deck version in {path}")
        cards = {}
        for c in header["cards"]:
            params = ItemParams(alpha=c["alpha"], beta=c["beta"], n0=c["n0"])
            cards[c["item_id"]] = Card(
                item_id=c["item_id"], params=params, q=c["q"],
                state=MemoryState.initial(params.n0, 0.0,
                                          ModelKind.exponential()))
        deck = Deck(deck_id=header["deck_id"], seed=header["seed"],
                    created_at=header["created_at"], cards=cards)
        for line in fh:
            rec = json.loads(line)
            card = cards[rec["item"]]
            t = max(deck.to_days(rec["at"]), card.state.t_last)
            card.state = apply_review(card.state, t, rec["recall"],
                                      card.params)
            card.reviews += 1
            card.history.append((rec["at"], rec["recall"]))
            deck.events += 1
    return deck


def create_app(service: ReviewService):
    """FastAPI wiring over the in-process service."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="memsched review service")

    @app.exception_handler(ServiceError)
    async def on_service_error(request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"error": str(exc)})

    @app.post("/decks", status_code=201)
    async def create_deck(body: dict):
        return service.create_deck(
            cards=body.get("cards", []),
            deck_id=body.get("deck_id"),
            seed=body.get("seed"),
            created_at=body.get("created_at"))

    @app.get("/decks/{deck_id}/next")
    async def next_review(deck_id: str, now: Optional[float] = None):
        ticket = service.next_review(deck_id, now=now)
        return {"ticket": ticket}

    @app.post("/decks/{deck_id}/reviews")
    async def submit_review(deck_id: str, body: dict):
        return service.submit_review(
            deck_id, ticket_id=body.get("ticket_id", ""),
            recall=body.get("recall"), at=body.get("at"))

    @app.get("/decks/{deck_id}/stats")
    async def deck_stats(deck_id: str, now: Optional[float] = None):
        return service.deck_stats(deck_id, now=now)

    return app
