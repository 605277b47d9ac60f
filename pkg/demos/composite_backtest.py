"""
Backtesting the composite strategy
==================================

Every day each node gets a fresh spike-capture label from the previous
window; forecast accuracy then decides between forecasting, self-scheduling
and spike capture.  Tightening the loss tolerance and raising the profit
threshold labels fewer nodes.
"""

from dataclasses import replace

from virtualbid.bidding import BacktestConfig, Strategy, label_nodes, run_backtest
from virtualbid.market_data import GeneratorConfig, generate_synthetic_market
from virtualbid.spike import OptimizerConfig

ds = generate_synthetic_market(GeneratorConfig(n_nodes=30, n_major=4, n_days=200), seed=3)

labels = label_nodes(ds.prices, OptimizerConfig(theta=100), window_days=120)
both = [n for n, lb in labels.items() if lb.demand_cb and lb.supply_cb]
print(sum(lb.labeled for lb in labels.values()), "of", len(labels), "nodes labeled;", len(both), "on both sides")

# a forecaster that gets the gap sign wrong one hour in ten
base = BacktestConfig(history_window=120, accuracy_window=30, sign_error_rate=0.1)
res = run_backtest(ds, base)
print(res.summary()["choice_counts"])
for s in (Strategy.PRICE_FORECASTING, Strategy.SELF_SCHEDULING, Strategy.OPPORTUNISTIC):
    st = res.stats(s)
    print(f"{s.value:32s} bids {st['bids']:6d}  CSR {st['csr']:5.1f}%  net {st['net_profit']:12,.0f}")

print("epsilon  theta  labeled  node  day  LPR")
for eps, theta in ((0.01, 100), (0.001, 1000), (0.0001, 2000)):
    row = run_backtest(ds, replace(base, optimizer=OptimizerConfig(epsilon=eps, theta=theta))).case_row()
    print(f"{eps:<8} {theta:<6} {row['labeled_nodes']:>7} {row['node']:>5} {row['day']:>4} {row['lpr']:5.2f}")
