"""
Settling convergence bids and scoring participants
==================================================

A supply bid earns (day-ahead - real-time) per cleared MWh, a demand bid
the opposite.  Multi-step bids clear along their cumulative curve.
"""

import numpy as np

from virtualbid.market_data import (
    ConvergenceBid,
    GeneratorConfig,
    ParticipantSpec,
    PriceBidStep,
    PriceRecord,
    Side,
    generate_synthetic_market,
    parse_timestamp,
    settle_all,
    settle_bid,
)
from virtualbid.metrics import compute_shares, performance_reports, select_most_present

# one hour at one node: day-ahead 35, real-time 20
rec = PriceRecord("N1", parse_timestamp("2019-06-01T14:00Z"), 35.0, 20.0)
day = rec.timestamp.astype(object).date()

# a two-step supply bid: 20 MWh at 30 clears, 50 MWh at 40 does not
bid = ConvergenceBid("b1", "P01", "N1", day, 14, Side.SUPPLY, (PriceBidStep(20, 30.0), PriceBidStep(50, 40.0)))
s = settle_bid(bid, rec)
print("cleared", s.cleared_quantity, "MWh, net", s.net_profit)  # 20 MWh, +300

# the same steps on the demand side clear the other way
bid = ConvergenceBid("b2", "P01", "N1", day, 14, Side.DEMAND, (PriceBidStep(20, 40.0), PriceBidStep(50, 30.0)))
s = settle_bid(bid, rec)
print("cleared", s.cleared_quantity, "MWh, net", s.net_profit)  # 20 MWh, -300

# a synthetic market with three bidding styles
cfg = GeneratorConfig(n_nodes=10, n_major=2, n_days=60, participants=(
    ParticipantSpec("P01", {"price_forecasting": 12}),
    ParticipantSpec("P02", {"self_scheduling": 8}),
    ParticipantSpec("P03", {"opportunistic": 10}),
    ParticipantSpec("P04", {"price_forecasting": 2, "self_scheduling": 2}),
))
ds = generate_synthetic_market(cfg, seed=1)
sett = settle_all(ds)
print(len(ds.prices), "price records,", len(ds.bids), "bids")

shares = compute_shares(ds, sett)
for sh in shares:
    print(sh.participant_id, np.round([sh.share_submitted_count, sh.share_cleared_count,
                                       sh.share_submitted_mwh, sh.share_cleared_mwh], 1))
print("most present (top 1 per metric):", select_most_present(shares, 1))

for r in performance_reports(ds, sett):
    print(f"{r.participant_id}: CSR {r.csr:.1f}%  LPR {r.lpr:.1f}%  net {r.net_profit:,.0f}")
