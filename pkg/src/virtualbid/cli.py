"""``virtualbid`` command line: one subcommand per pipeline stage.

Stages read their inputs from the configured data paths (by default the
output directory, so ``synth`` followed by the other stages with the same
``--out`` forms a pipeline) and write their outputs, plus a
``manifest_<stage>.json`` with digests and timings, to the output
directory.

Exit codes: 0 success, 2 usage error, 3 config error, 4 data error,
5 internal invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

from virtualbid import __version__
from virtualbid.bidding import (
    backtest_report,
    label_nodes,
    run_backtest,
    solve_nodes,
    spike_instance,
    write_labels_csv,
    write_solutions_csv,
    write_trades_csv,
)
from virtualbid.clustering import cluster_bids, write_clusters_csv, write_shares_csv
from virtualbid.config import ConfigError, RunConfig, defaults_help, load_config, parse_config
from virtualbid.features import extract_features, load_features_csv, write_features_csv
from virtualbid.market_data import (
    MarketDataError,
    generate_synthetic_market,
    load_dataset,
    save_dataset,
    settle_all,
    summarize_dataset,
    write_summary_csv,
)
from virtualbid.metrics import (
    bid_characteristics,
    compute_shares,
    performance_reports,
    select_most_present,
    write_characteristics_table,
    write_performance_table,
    write_shares_table,
    write_yearly_csr_table,
    yearly_csr,
)
from virtualbid.reporting import ReportInputs, emit_reports
from virtualbid.spike import encode_milp_witness, milp_lp_text, verify_milp_constraints

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 2, 3, 4, 5
STAGES = ("synth", "ingest", "features", "cluster", "metrics", "label", "backtest", "report")

log = logging.getLogger("virtualbid")


class InvariantError(RuntimeError):
    """A computed result broke one of its own guarantees."""


class UsageError(Exception):
    pass


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Stage:
    """Bookkeeping for one stage run: timings, inputs and outputs."""

    def __init__(self, name: str, config: RunConfig):
        self.name = name
        self.config = config
        self.out = config.out_dir
        self.timings = {}
        self.inputs = []
        self.outputs = []

    @contextmanager
    def step(self, label: str):
        t0 = time.perf_counter()
        yield
        self.timings[label] = round(time.perf_counter() - t0, 6)
        log.info("%s: %s done in %.2fs", self.name, label, self.timings[label])

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(p)
        return p

    def read(self, p) -> Path:
        p = Path(p)
        if not p.exists():
            raise MarketDataError(f"missing input {p}")
        self.inputs.append(p)
        return p

    def _key(self, p: Path) -> str:
        try:
            return str(p.resolve().relative_to(self.out.resolve()))
        except ValueError:
            return str(p)

    def manifest(self) -> dict:
        return {
            "stage": self.name,
            "version": __version__,
            "config_digest": self.config.digest(),
            "seed": self.config.seed,
            "inputs": {self._key(p): file_digest(p) for p in sorted(set(self.inputs))},
            "outputs": {self._key(p): file_digest(p) for p in sorted(set(self.outputs))},
            "wall_clock_seconds": self.timings,
        }

    def write_manifest(self) -> Path:
        p = self.out / f"manifest_{self.name}.json"
        with open(p, "w") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return p


def _dataset(st: Stage, need_bids: bool = True):
    cfg = st.config
    prices, reg = st.read(cfg.data_path("prices")), st.read(cfg.data_path("registry"))
    bids = cfg.data_path("bids")
    if need_bids:
        st.read(bids)
    elif bids.exists():
        st.inputs.append(bids)
    return load_dataset(prices, bids if bids.exists() else None, reg)


def stage_synth(st: Stage) -> None:
    with st.step("generate"):
        ds = generate_synthetic_market(st.config.generator, st.config.seed)
    with st.step("write"):
        st.outputs.extend(save_dataset(ds, st.out).values())


def stage_ingest(st: Stage) -> None:
    with st.step("load"):
        ds = _dataset(st, need_bids=False)
        bad = ds.unsettleable()
        if bad:
            raise MarketDataError(f"{len(bad)} bids have no price record, e.g. {bad[0].bid_id}")
    with st.step("summarize"):
        sett = settle_all(ds)
        summary = summarize_dataset(ds, sett)
        write_summary_csv(summary, st.path("summary.csv"))
        info = {
            "price_rows": len(ds.prices),
            "nodes": len(ds.prices.nodes),
            "major_nodes": len(ds.major_nodes),
            "bids": len(ds.bids),
            "participants": summary.participant_count,
            "active_nodes": summary.active_node_count,
            "first_day": str(ds.prices.days.min()) if len(ds.prices) else None,
            "last_day": str(ds.prices.days.max()) if len(ds.prices) else None,
        }
        with open(st.path("ingest.json"), "w") as fh:
            json.dump(info, fh, indent=2, sort_keys=True)
            fh.write("\n")


def stage_features(st: Stage) -> None:
    with st.step("load"):
        ds = _dataset(st)
    with st.step("extract"):
        vecs = extract_features(ds)
        write_features_csv(vecs, st.path("features.csv"))


def stage_cluster(st: Stage) -> None:
    with st.step("load"):
        ds = _dataset(st)
        fpath = st.out / "features.csv"
        vecs = load_features_csv(st.read(fpath)) if fpath.exists() else extract_features(ds)
        known = {b.bid_id for b in ds.bids}
        stray = [v.bid_id for v in vecs if v.bid_id not in known]
        if stray:
            raise MarketDataError(f"features.csv has {len(stray)} bids not in bids.csv, e.g. {stray[0]}")
    with st.step("cluster"):
        cfg = st.config.clustering
        if len(vecs) < max(2, cfg.min_cluster_size):
            log.warning("cluster: %d bids are too few to cluster", len(vecs))
            result = None
        else:
            result = cluster_bids(vecs, cfg, {b.bid_id: b.participant_id for b in ds.bids})
    with st.step("write"):
        if result is None:
            with open(st.path("clusters.csv"), "w") as fh:
                fh.write("bid_id,cluster_id,strategy_label\n")
            write_shares_csv({}, st.path("shares.csv"))
        else:
            write_clusters_csv(result, st.path("clusters.csv"))
            write_shares_csv(result.shares, st.path("shares.csv"))
            log.info("cluster: %d clusters %s", result.model.n_clusters,
                     {c: s.value for c, s in sorted(result.strategy_of_cluster.items())})


def stage_metrics(st: Stage) -> None:
    with st.step("load"):
        ds = _dataset(st)
    with st.step("settle"):
        sett = settle_all(ds)
    with st.step("tables"):
        shares = compute_shares(ds, sett)
        aliases = select_most_present(shares, st.config["metrics.top_k"]) if shares else {}
        write_shares_table(shares, aliases, st.path("market_shares.csv"))
        write_performance_table(performance_reports(ds, sett), st.path("performance.csv"))
        write_characteristics_table(bid_characteristics(ds, sett), st.path("bid_characteristics.csv"))
        write_yearly_csr_table(yearly_csr(ds, sett), st.path("yearly_csr.csv"))
        write_summary_csv(summarize_dataset(ds, sett), st.path("summary.csv"))


def stage_label(st: Stage) -> None:
    cfg = st.config
    with st.step("load"):
        ds = _dataset(st, need_bids=False)
        grid = ds.prices.to_grid()
    opt, window = cfg.optimizer, cfg["label.window_days"]
    with st.step("solve"):
        labels = label_nodes(grid, opt, window_days=window)
        rows = solve_nodes(grid, opt, window_days=window) if len(grid.days) >= window else []
    with st.step("verify"):
        lp_dir = st.out / "milp"
        if cfg["label.write_lp"]:
            lp_dir.mkdir(parents=True, exist_ok=True)
        end = grid.days[-1] + 1 if len(grid.days) else None
        for node, side, sol in rows:
            if not sol.feasible:
                continue
            inst = spike_instance(grid, node, side, end, window)
            if not opt.big_m_ok(inst):
                log.warning("label: big_m %g does not dominate prices at %s", opt.big_m, node)
                continue
            wit = encode_milp_witness(inst, sol)
            ok, violations = verify_milp_constraints(inst, wit, opt)
            if not ok:
                raise InvariantError(f"MILP witness for {node}/{side.value} violates {violations[0]}")
            if cfg["label.write_lp"]:
                with open(st.path(f"milp/{node}_{side.value}.lp"), "w") as fh:
                    fh.write(milp_lp_text(inst, opt, wit))
    with st.step("write"):
        write_labels_csv(labels, st.path("labels.csv"))
        write_solutions_csv(rows, st.path("solutions.csv"))
        log.info("label: %d of %d nodes labeled", sum(lb.labeled for lb in labels.values()), len(grid.nodes))


def stage_backtest(st: Stage) -> None:
    cfg = st.config
    with st.step("load"):
        ds = _dataset(st, need_bids=False)
    base = cfg.backtest
    results = []
    with st.step("main"):
        main = run_backtest(ds, base)
        results.append(main)
    cases = []
    for eps, theta in cfg["backtest.cases"]:
        if (eps, theta) == (base.optimizer.epsilon, base.optimizer.theta):
            cases.append(main)
            continue
        with st.step(f"case eps={eps:g} theta={theta:g}"):
            c = replace(base, optimizer=replace(base.optimizer, epsilon=eps, theta=theta))
            cases.append(run_backtest(ds, c))
    with st.step("write"):
        backtest_report(cases or [main], st.path("backtest_report.json"), main=main)
        write_trades_csv(main, st.path("trades.csv"))


def _read_rows(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def collect_report_inputs(st: Stage) -> ReportInputs:
    cfg, out = st.config, st.out
    inp = ReportInputs()
    if (out / "summary.csv").exists():
        inp.monthly = [(r["month"], float(r["cleared_mwh"]), float(r["net_profit"]))
                       for r in _read_rows(st.read(out / "summary.csv"))]
    bids_path = cfg.data_path("bids")
    if (out / "features.csv").exists() and bids_path.exists():
        feats = {r["bid_id"]: float(r["delta"]) for r in _read_rows(st.read(out / "features.csv"))}
        by_pid = {}
        for r in _read_rows(st.read(bids_path)):
            if r["bid_id"] in feats:
                by_pid.setdefault(r["participant_id"], []).append((int(r["hour"]), feats[r["bid_id"]]))
        top = sorted(by_pid, key=lambda p: (-len(by_pid[p]), p))[: cfg["report.max_participants"]]
        inp.deltas = {p: by_pid[p] for p in top}
    if (out / "trades.csv").exists():
        by_node = {}
        for r in _read_rows(st.read(out / "trades.csv")):
            if float(r["cleared_quantity"]) > 0:
                by_node.setdefault(r["node_id"], []).append((r["day"], int(r["hour"]), float(r["net_profit"])))
        top = sorted(by_node, key=lambda n: (-sum(p for _, _, p in by_node[n]), n))[: cfg["report.max_nodes"]]
        inp.profits = {n: by_node[n] for n in top}
    if (out / "shares.csv").exists():
        inp.shares = {r.pop("participant_id"): {k: float(v) for k, v in r.items()}
                      for r in _read_rows(st.read(out / "shares.csv"))}
    return inp


def stage_report(st: Stage) -> None:
    with st.step("collect"):
        inp = collect_report_inputs(st)
        if all(v is None for v in (inp.monthly, inp.deltas, inp.profits, inp.shares)):
            raise MarketDataError(f"no stage outputs to report in {st.out}")
    with st.step("emit"):
        st.outputs.extend(emit_reports(inp, st.out))


RUNNERS = {
    "synth": stage_synth,
    "ingest": stage_ingest,
    "features": stage_features,
    "cluster": stage_cluster,
    "metrics": stage_metrics,
    "label": stage_label,
    "backtest": stage_backtest,
    "report": stage_report,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="virtualbid",
        description="Convergence-bidding analysis and backtesting pipeline.",
        epilog=defaults_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"virtualbid {__version__}")
    sub = p.add_subparsers(dest="command", metavar="{" + ",".join(STAGES) + "}", parser_class=_Parser)
    for name in STAGES:
        sp = sub.add_parser(name, help=(RUNNERS[name].__doc__ or "").strip() or f"run the {name} stage",
                            epilog=defaults_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", help="flat key = value config file" + (" (optional)" if name == "report" else ""))
        sp.add_argument("--seed", type=int, help="override run.seed")
        sp.add_argument("--out", help="override paths.out")
        g = sp.add_mutually_exclusive_group()
        g.add_argument("-v", "--verbose", action="store_true")
        g.add_argument("-q", "--quiet", action="store_true")
    return p


def parse_cli(argv) -> tuple:
    """``(subcommand, RunConfig, namespace)``; raises UsageError or ConfigError."""
    argv = list(argv)
    if not argv:
        raise UsageError("no subcommand given")
    ns = build_parser().parse_args(argv)
    if ns.command is None:
        raise UsageError("no subcommand given")
    if ns.seed is not None and ns.seed < 0:
        raise UsageError("--seed must be >= 0")
    if ns.config is None:
        if ns.command != "report":
            raise UsageError(f"{ns.command} requires --config")
        cfg = parse_config("", "<defaults>")
    else:
        cfg = load_config(ns.config)
    cfg = cfg.with_overrides(**{"run.seed": ns.seed, "paths.out": ns.out})
    return ns.command, cfg, ns


def run_stage(command: str, cfg: RunConfig) -> Stage:
    st = Stage(command, cfg)
    try:
        st.out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise MarketDataError(f"cannot create output directory {st.out}: {e.strerror}") from None
    RUNNERS[command](st)
    st.write_manifest()
    return st


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        command, cfg, ns = parse_cli(argv)
    except UsageError as e:
        print(f"virtualbid: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"virtualbid: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    level = logging.DEBUG if ns.verbose else logging.WARNING if ns.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        run_stage(command, cfg)
    except ConfigError as e:
        print(f"virtualbid: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantError as e:
        print(f"virtualbid: invariant failure: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except (MarketDataError, OSError) as e:
        print(f"virtualbid: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        # settings that pass the schema but are rejected by a model, e.g. a
        # generator combination; these are configuration problems
        print(f"virtualbid: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001
        log.exception("unexpected failure")
        print(f"virtualbid: invariant failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
