"""
Driving the review service in process
=====================================

Creates a two-card deck against a fake clock, plays a week of reviews by
always taking the served ticket, and prints the resulting card states.
The same flow is exposed over HTTP by `memsched serve`; this demo calls
the service object directly.
"""

from memsched import ReviewService
from memsched.service import SECONDS_PER_DAY


class FakeClock:
    def __init__(self, t=1_700_000_000.0):
        self.t = t

    def __call__(self):
        return self.t


clock = FakeClock()
svc = ReviewService(clock=clock)
svc.create_deck([{"item_id": "bonjour", "q": 0.04},
                 {"item_id": "merci", "q": 0.04}],
                deck_id="demo", seed=1)

# follow the schedule: jump the clock to each proposed time and answer
outcomes = iter([1, 1, 0, 1, 1, 1, 0, 1, 1, 1])
for step in range(10):
    ticket = svc.next_review("demo")
    clock.t = max(clock.t, ticket["proposed_time"])
    recall = next(outcomes)
    out = svc.submit_review("demo", ticket["ticket_id"], recall=recall)
    day = (clock.t - svc.decks["demo"].created_at) / SECONDS_PER_DAY
    verdict = "ok  " if recall else "miss"
    print(f"day {day:5.2f}  {out['item_id']:<8} {verdict} "
          f"n -> {out['n']:.3f}")

print()
stats = svc.deck_stats("demo")
for card in stats["cards"]:
    print(f"{card['item_id']:<8} reviews={card['reviews']} "
          f"n={card['n']:.3f} m={card['m']:.3f} "
          f"intensity={card['intensity']:.3f}")
