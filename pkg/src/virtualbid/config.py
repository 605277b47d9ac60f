"""Flat ``section.key = value`` run configuration.

One setting per line; ``#`` starts a comment.  Every key is declared in
:data:`SCHEMA` with its type, default and admissible range, and anything
else is rejected.  The only open-ended section is ``participants``, where
``participants.<id> = archetype:bids_per_day, ...`` (optionally with
``nodes:<count>``) scripts one synthetic bidder.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path

from virtualbid.bidding import BacktestConfig
from virtualbid.clustering import ClusteringConfig
from virtualbid.market_data import ARCHETYPES, GeneratorConfig, ParticipantSpec
from virtualbid.spike import OptimizerConfig


class ConfigError(ValueError):
    """Unknown key, type mismatch or out-of-range value."""


@dataclass(frozen=True)
class Key:
    kind: str  # int, float, bool, str, date, cases
    default: object
    lo: float | None = None
    hi: float | None = None
    lo_open: bool = False
    doc: str = ""


def _f(default, lo=None, hi=None, lo_open=False, doc=""):
    return Key("float", default, lo, hi, lo_open, doc)


def _i(default, lo=None, hi=None, doc=""):
    return Key("int", default, lo, hi, False, doc)


DEFAULT_CASES = ((0.01, 100.0), (0.001, 1000.0), (0.0001, 2000.0))

SCHEMA = {
    "run.seed": _i(0, 0, None, "seed for synthesis and the synthetic forecaster"),
    "paths.data": Key("str", "", doc="directory holding prices.csv, bids.csv, node_registry.csv (default: output dir)"),
    "paths.prices": Key("str", "", doc="explicit prices.csv (overrides paths.data)"),
    "paths.bids": Key("str", "", doc="explicit bids.csv"),
    "paths.registry": Key("str", "", doc="explicit node_registry.csv"),
    "paths.out": Key("str", "out", doc="output directory"),
    "synth.n_nodes": _i(20, 1, None),
    "synth.n_major": _i(3, 0, None),
    "synth.n_days": _i(60, 1, None),
    "synth.start": Key("date", date(2019, 1, 1)),
    "synth.base_price": _f(40.0),
    "synth.daily_amplitude": _f(12.0, 0.0),
    "synth.node_spread": _f(6.0, 0.0),
    "synth.noise_scale": _f(3.0, 0.0),
    "synth.noise_clip": _f(3.0, 0.0),
    "synth.rt_noise_scale": _f(4.0, 0.0),
    "synth.spike_frequency": _f(0.01, 0.0, 1.0),
    "synth.spike_dispersion": _f(1.0, 0.0),
    "synth.major_spike_factor": _f(0.1, 0.0),
    "synth.spike_threshold": _f(4.0, 0.0),
    "synth.spike_scale": _f(40.0, 0.0),
    "synth.spike_tail": _f(2.5, 0.0, lo_open=True),
    "synth.spike_cap": _f(1000.0, 0.0),
    "synth.spike_positive_fraction": _f(0.5, 0.0, 1.0),
    "synth.rt_follow_prob": _f(0.3, 0.0, 1.0),
    "clustering.min_cluster_size": _i(50, 2, None),
    "clustering.min_samples": _i(5, 1, None),
    "clustering.small_delta": _f(5.0, 0.0),
    "clustering.large_delta": _f(25.0, 0.0),
    "clustering.opportunistic_consistency": _f(0.8, 0.0, 1.0),
    "metrics.top_k": _i(3, 1, None, "participants kept per share metric"),
    "optimizer.epsilon": _f(0.01, 0.0),
    "optimizer.m_min": _f(30.0),
    "optimizer.m_max": _f(200.0),
    "optimizer.big_m": _f(3000.0, 0.0, lo_open=True),
    "optimizer.theta": _f(100.0),
    "label.window_days": _i(365, 1, None, "trailing days used to label nodes"),
    "label.write_lp": Key("bool", False, doc="also dump each node's MILP in LP text form"),
    "backtest.tau_dlmp": _f(0.8, 0.0, 1.0),
    "backtest.tau_rtlmp": _f(0.8, 0.0, 1.0),
    "backtest.tau_sign": _f(0.8, 0.0, 1.0),
    "backtest.strategy1_margin": _f(2.0, 0.0, lo_open=True),
    "backtest.strategy2_offset": _f(500.0, 0.0, lo_open=True),
    "backtest.quantity": _f(50.0, 0.0, lo_open=True),
    "backtest.history_window": _i(365, 7, None),
    "backtest.accuracy_window": _i(30, 7, None),
    "backtest.forecast_noise": _f(1.0, 0.0, doc="forecast error std at major nodes"),
    "backtest.forecast_noise_regular": _f(6.0, 0.0, doc="forecast error std at regular nodes"),
    "backtest.sign_error_rate": _f(0.3, 0.0, 1.0, doc="probability of a flipped forecast gap sign"),
    "backtest.cases": Key("cases", DEFAULT_CASES, doc="epsilon:theta pairs, comma separated"),
    "report.max_nodes": _i(6, 1, None, "nodes with an hourly-profit figure"),
    "report.max_participants": _i(10, 1, None, "participants with a price-distance figure"),
}

DEFAULT_PARTICIPANTS = (
    ParticipantSpec("P01", {"price_forecasting": 40}),
    ParticipantSpec("P02", {"self_scheduling": 25}),
    ParticipantSpec("P03", {"opportunistic": 35}),
)


@dataclass(frozen=True)
class RunConfig:
    values: dict
    participants: tuple = ()
    source: str = ""
    text: str = ""

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["run.seed"]

    @property
    def out_dir(self) -> Path:
        return Path(self.values["paths.out"])

    def data_path(self, name: str) -> Path:
        explicit = self.values[f"paths.{name}"]
        if explicit:
            return Path(explicit)
        base = Path(self.values["paths.data"]) if self.values["paths.data"] else self.out_dir
        return base / {"prices": "prices.csv", "bids": "bids.csv", "registry": "node_registry.csv"}[name]

    def section(self, name: str) -> dict:
        p = name + "."
        return {k[len(p):]: v for k, v in self.values.items() if k.startswith(p)}

    @property
    def generator(self) -> GeneratorConfig:
        return GeneratorConfig(participants=self.participants or DEFAULT_PARTICIPANTS, **self.section("synth"))

    @property
    def clustering(self) -> ClusteringConfig:
        return ClusteringConfig(**self.section("clustering"))

    @property
    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(**self.section("optimizer"))

    @property
    def backtest(self) -> BacktestConfig:
        kw = {k: v for k, v in self.section("backtest").items() if k != "cases"}
        return BacktestConfig(optimizer=self.optimizer, forecast_seed=self.seed, **kw)

    def with_overrides(self, **kw) -> "RunConfig":
        vals = dict(self.values)
        for k, v in kw.items():
            if v is not None:
                vals[k] = v
        return replace(self, values=vals)

    def digest(self) -> str:
        """SHA-256 of the resolved settings.

        File locations are left out (inputs are digested separately), so
        the same settings run in two directories hash alike.
        """
        lines = [f"{k} = {_render(v)}" for k, v in sorted(self.values.items()) if not k.startswith("paths.")]
        lines += [f"participants.{p.participant_id} = {_render_participant(p)}" for p in self.participants]
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def _render(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(f"{e!r}:{t!r}" for e, t in v)
    return str(v)


def _render_participant(p: ParticipantSpec) -> str:
    return ", ".join([f"{a}:{n}" for a, n in p.schedule] + [f"nodes:{p.n_nodes}"])


def _parse_value(key: str, kd: Key, text: str):
    try:
        if kd.kind == "int":
            if not text.lstrip("+-").isdigit():
                raise ValueError
            v = int(text)
        elif kd.kind == "float":
            v = float(text)
            if not math.isfinite(v):
                raise ValueError
        elif kd.kind == "bool":
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            v = low in ("true", "1", "yes")
        elif kd.kind == "date":
            v = date.fromisoformat(text)
        elif kd.kind == "cases":
            v = tuple(_parse_case(part) for part in text.split(",") if part.strip())
        else:
            v = text
    except ValueError:
        raise ConfigError(f"{key}: expected {kd.kind}, got {text!r}") from None
    if kd.kind in ("int", "float"):
        _check_range(key, kd, v)
    return v


def _parse_case(part: str) -> tuple:
    eps, theta = part.split(":")
    eps, theta = float(eps), float(theta)
    if not (eps >= 0 and math.isfinite(eps) and math.isfinite(theta)):
        raise ValueError
    return (eps, theta)


def _check_range(key, kd, v):
    if kd.lo is not None and (v <= kd.lo if kd.lo_open else v < kd.lo):
        raise ConfigError(f"{key}: {v} out of range (must be {'>' if kd.lo_open else '>='} {kd.lo})")
    if kd.hi is not None and v > kd.hi:
        raise ConfigError(f"{key}: {v} out of range (must be <= {kd.hi})")


def _parse_participant(key: str, text: str) -> ParticipantSpec:
    pid = key.split(".", 1)[1]
    if not pid or "," in pid:
        raise ConfigError(f"{key}: bad participant id")
    sched, n_nodes = {}, 8
    for part in text.split(","):
        if not part.strip():
            continue
        try:
            name, count = (s.strip() for s in part.split(":"))
            count = int(count)
        except ValueError:
            raise ConfigError(f"{key}: expected archetype:count entries, got {part.strip()!r}") from None
        if name == "nodes":
            if count < 1:
                raise ConfigError(f"{key}: nodes must be >= 1")
            n_nodes = count
        elif name in ARCHETYPES:
            if count < 0:
                raise ConfigError(f"{key}: {name} must be >= 0")
            sched[name] = count
        else:
            raise ConfigError(f"{key}: unknown archetype {name!r} (expected one of {', '.join(ARCHETYPES)})")
    return ParticipantSpec(pid, sched, n_nodes)


def _cross_checks(values: dict) -> None:
    if values["optimizer.m_min"] > values["optimizer.m_max"]:
        raise ConfigError(
            f"optimizer.m_min: {values['optimizer.m_min']} out of range (must be <= optimizer.m_max = {values['optimizer.m_max']})"
        )
    if values["synth.n_major"] > values["synth.n_nodes"]:
        raise ConfigError("synth.n_major: out of range (must be <= synth.n_nodes)")
    if values["backtest.accuracy_window"] > values["backtest.history_window"]:
        raise ConfigError("backtest.accuracy_window: out of range (must be <= backtest.history_window)")
    if values["clustering.min_samples"] > values["clustering.min_cluster_size"]:
        raise ConfigError("clustering.min_samples: out of range (must be <= clustering.min_cluster_size)")
    if values["clustering.small_delta"] > values["clustering.large_delta"]:
        raise ConfigError("clustering.small_delta: out of range (must be <= clustering.large_delta)")


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    values = {k: s.default for k, s in SCHEMA.items()}
    participants = {}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"{key}: set twice ({source}:{lineno})")
        seen.add(key)
        if key.startswith("participants."):
            participants[key] = _parse_participant(key, val)
        elif key in SCHEMA:
            values[key] = _parse_value(key, SCHEMA[key], val)
        else:
            raise ConfigError(f"{key}: unknown key ({source}:{lineno})")
    _cross_checks(values)
    parts = tuple(participants[k] for k in sorted(participants))
    return RunConfig(values, parts, source, text)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text, str(path))


def defaults_help() -> str:
    """The schema as a ``--help`` epilog."""
    lines = ["configuration keys (section.key = value) and defaults:"]
    for k, s in SCHEMA.items():
        rng = ""
        if s.lo is not None or s.hi is not None:
            lo = "" if s.lo is None else f"{'>' if s.lo_open else '>='}{s.lo:g}"
            hi = "" if s.hi is None else f"<={s.hi:g}"
            rng = f" [{' '.join(x for x in (lo, hi) if x)}]"
        d = f"  {s.doc}" if s.doc else ""
        lines.append(f"  {k} = {_render(s.default) if s.default != '' else '(unset)'}{rng}{d}")
    lines.append("  participants.<id> = archetype:count, ..., nodes:<n>  (synthetic bidders; default "
                 + "; ".join(f"{p.participant_id}={_render_participant(p)}" for p in DEFAULT_PARTICIPANTS) + ")")
    return "\n".join(lines)
