"""Hand-built market fixtures with hand-computed expectations."""

from datetime import date

from virtualbid.market_data import ConvergenceBid, MarketDataset, PriceBidStep, PriceTable, Side, parse_timestamp

D1, D2 = date(2019, 6, 1), date(2019, 6, 2)


def four_participant_market() -> MarketDataset:
    """One node, hour 14 on two days: gap +15 on D1 (35/20), -10 on D2 (30/40)."""
    prices = PriceTable(
        ["N1", "N1"],
        [parse_timestamp("2019-06-01T14:00Z"), parse_timestamp("2019-06-02T14:00Z")],
        [35.0, 30.0],
        [20.0, 40.0],
    )

    def bid(bid_id, pid, day, side, q, p):
        return ConvergenceBid(bid_id, pid, "N1", day, 14, Side(side), (PriceBidStep(q, p),))

    bids = [
        bid("a1", "A", D1, "S", 50, 30),   # cleared 50, +750
        bid("a2", "A", D2, "S", 10, 25),   # cleared 10, -100
        bid("a3", "A", D1, "S", 20, 40),   # not cleared
        bid("a4", "A", D2, "D", 40, 35),   # cleared 40, +400
        bid("b1", "B", D1, "D", 30, 40),   # cleared 30, -450
        bid("b2", "B", D2, "D", 20, 20),   # not cleared
        bid("c1", "C", D1, "S", 100, 0),   # cleared 100, +1500
        bid("d1", "D", D2, "D", 5, 50),    # cleared 5, +50
        bid("d2", "D", D2, "S", 5, 50),    # not cleared
        bid("d3", "D", D1, "S", 5, 50),    # not cleared
    ]
    return MarketDataset(prices, bids, {"N1": False})


# submitted count 4/2/1/3 of 10; cleared count 3/1/1/1 of 6;
# submitted MWh 120/50/100/15 of 285; cleared MWh 100/30/100/5 of 235
EXPECTED_SHARES = {
    "A": (40.0, 50.0, 100 * 120 / 285, 100 * 100 / 235),
    "B": (20.0, 100 / 6, 100 * 50 / 285, 100 * 30 / 235),
    "C": (10.0, 100 / 6, 100 * 100 / 285, 100 * 100 / 235),
    "D": (30.0, 100 / 6, 100 * 15 / 285, 100 * 5 / 235),
}
EXPECTED_CSR = {"A": 75.0, "B": 50.0, "C": 100.0, "D": 100 / 3}
EXPECTED_LPR = {"A": 100 * 100 / 1150, "B": float("inf"), "C": 0.0, "D": 0.0}
EXPECTED_NET = {"A": 1050.0, "B": -450.0, "C": 1500.0, "D": 50.0}
# top-2 per metric: {A, D}, {A, B}, {A, C}, {A, C}; aliases follow submitted-count order
EXPECTED_TOP2 = {"A": 1, "D": 2, "B": 3, "C": 4}
