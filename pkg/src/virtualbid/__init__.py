"""Reverse engineering and backtesting of convergence-bidding strategies.

Submodules
----------
market_data
    Price/bid data model, CSV ingestion, synthetic markets, settlement.
features
    The four per-bid strategy features and their normalization.
clustering
    Mutual-reachability MST, condensed-tree cluster extraction and
    signature-based strategy labels.
metrics
    Market-share metrics, most-present participant selection, CSR and LPR.
spike
    Exact price-spike-capture optimizer, grid oracle and MILP witness checks.
bidding
    Dynamic node labeling, strategy selection, bid generation and the
    rolling backtester.
config
    Flat ``section.key = value`` run configuration.
reporting
    Figure CSVs and static SVG charts.
cli
    The ``virtualbid`` command, one subcommand per pipeline stage.
"""

__version__ = "0.1.0"

from virtualbid.market_data import (  # noqa: F401
    ConvergenceBid,
    MarketDataset,
    PriceBidStep,
    PriceRecord,
    PriceTable,
    Side,
    settle_bid,
)
from virtualbid.spike import (  # noqa: F401
    OptimizerConfig,
    SpikeInstance,
    SpikeSolution,
    solve_breakpoints,
)
