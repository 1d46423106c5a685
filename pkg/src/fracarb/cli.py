"""Command line front end.

Subcommands: ``paths`` (dump driving paths or price grids), ``replay``
(full trade ledger of one scenario), ``run`` (Monte Carlo summary plus
histograms), ``sweep`` (one summary row per grid point).

Configuration comes from an optional TOML file (sections [market],
[strategy], [costs], [run], [sweep]) with command line flags overriding
file values, and every missing setting falling back to the documented
defaults.  The proportional fee p1 is given in percent at this layer (0.1
means ten basis points) and is converted to a fraction exactly once, here.
Every output file embeds the fully resolved configuration, so a result can
always be regenerated from the file alone; a JSON file holding such an
embedded block is itself accepted by --config.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .ledger import CostSchedule, run_discrete_strategy
from .market import AssetParams, MarketConfig, simulate_scenario
from .montecarlo import (
    DEFAULT_HURST_GRID,
    DEFAULT_SWEEP_SCENARIOS,
    OUTCOME_FIELDS,
    SweepAxis,
    default_order_grid,
    histogram,
    run_experiment,
    sweep,
)
from .strategy import SalopekStrategy, ShiryaevStrategy


class ConfigError(Exception):
    """A configuration value is missing, unknown, or out of domain."""


_KNOWN_KEYS = {
    "market": ("drift", "volatility", "hurst", "initial_price", "horizon", "n_periods", "n_assets"),
    "strategy": ("kind", "gamma", "alpha", "beta"),
    "costs": ("p1", "p2"),
    "run": ("n_scenarios", "generator", "seed", "output", "threads", "bins"),
    "sweep": ("axis", "grid", "n_scenarios"),
}

_PAIR_SWEEP_FIELDS = ("hurst_pair", "orders")


def _as_order(value, where: str) -> float:
    """Power order from a number or the literals "inf" / "-inf"."""
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"{where}: expected a number or 'inf'/'-inf', got {value!r}")
    try:
        out = float(value)
    except ValueError:
        raise ConfigError(f"{where}: expected a number or 'inf'/'-inf', got {value!r}") from None
    if math.isnan(out):
        raise ConfigError(f"{where}: power orders must not be nan")
    return out


def _order_json(value: float):
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def _as_float_list(value, where: str) -> list:
    if isinstance(value, str):
        value = [part for part in value.split(",") if part.strip() != ""]
    if isinstance(value, (list, tuple)):
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected numbers, got {value!r}") from None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    raise ConfigError(f"{where}: expected a number or list of numbers, got {value!r}")


def _as_float(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None


def _as_int(value, where: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if isinstance(value, str):
        try:
            value = int(value)
        except ValueError:
            raise ConfigError(f"{where}: expected an integer, got {value!r}") from None
    if isinstance(value, float):
        if value != int(value):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        value = int(value)
    if not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _parse_grid(value, field: str, where: str) -> list:
    """Normalize a sweep grid: scalars, or pairs like "a:b" / [a, b]."""
    pair_field = field in _PAIR_SWEEP_FIELDS
    if isinstance(value, str):
        value = [part for part in value.split(",") if part.strip() != ""]
    if not isinstance(value, (list, tuple)) or len(value) == 0:
        raise ConfigError(f"{where}: expected a nonempty list, got {value!r}")
    out = []
    for item in value:
        if pair_field:
            if isinstance(item, str):
                parts = item.split(":")
                if len(parts) != 2:
                    raise ConfigError(f"{where}: pair entries look like 'a:b', got {item!r}")
                item = parts
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise ConfigError(f"{where}: expected pairs, got {item!r}")
            out.append([_as_order(v, where) if isinstance(v, str) else _as_float(v, where) for v in item])
        else:
            out.append(_as_float(item, where))
    return out


@dataclass
class RunConfig:
    """Fully resolved settings for one command invocation."""

    market: MarketConfig
    spec: object            # StrategySpec
    schedule: CostSchedule  # p1 already a fraction
    n_scenarios: int
    generator: str
    output: str
    threads: int
    bins: int
    sweep_axis: SweepAxis | None
    sweep_n_scenarios: int
    resolved: dict          # canonical JSON-safe settings, embedded in outputs

    def to_dict(self) -> dict:
        return copy.deepcopy(self.resolved)


def _merge_overrides(raw: dict, overrides: dict) -> dict:
    for (section, key), value in overrides.items():
        if value is None:
            continue
        raw.setdefault(section, {})[key] = value
    return raw


def parse_config(source=None, overrides=None) -> RunConfig:
    """Build a RunConfig from an optional file plus flag overrides.

    ``source`` may be None (defaults only), a path to a TOML config, a path
    to a JSON file carrying a previously embedded config block, or an
    already loaded dict of sections.
    """
    if source is None:
        raw = {}
    elif isinstance(source, dict):
        raw = copy.deepcopy(source)
    else:
        path = os.fspath(source)
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        if path.endswith(".json"):
            with open(path, "rb") as fh:
                raw = json.load(fh)
        else:
            with open(path, "rb") as fh:
                try:
                    raw = tomllib.load(fh)
                except tomllib.TOMLDecodeError as exc:
                    raise ConfigError(f"{path}: {exc}") from None
    if "config" in raw and isinstance(raw.get("config"), dict):
        raw = raw["config"]  # a provenance block embeds the settings here
    raw = copy.deepcopy(raw)
    if overrides:
        raw = _merge_overrides(raw, overrides)

    for section, content in raw.items():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"section [{section}] must hold key = value settings")
        for key in content:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown config key [{section}] {key}")

    market_raw = raw.get("market", {})
    strat_raw = raw.get("strategy", {})
    costs_raw = raw.get("costs", {})
    run_raw = raw.get("run", {})
    sweep_raw = raw.get("sweep", {})

    kind = strat_raw.get("kind", "shiryaev")
    if kind not in ("shiryaev", "salopek"):
        raise ConfigError(f"[strategy] kind must be 'shiryaev' or 'salopek', got {kind!r}")

    drift = _as_float_list(market_raw.get("drift", 0.05), "[market] drift")
    volatility = _as_float_list(market_raw.get("volatility", 0.1), "[market] volatility")
    hurst = _as_float_list(market_raw.get("hurst", 0.6), "[market] hurst")
    initial_price = _as_float_list(market_raw.get("initial_price", 100.0), "[market] initial_price")

    lengths = sorted({len(v) for v in (drift, volatility, hurst, initial_price)} - {1})
    if len(lengths) > 1:
        raise ConfigError(
            f"[market] per-asset lists disagree on the asset count: saw lengths {lengths}"
        )
    n_assets = market_raw.get("n_assets")
    if n_assets is not None:
        n_assets = _as_int(n_assets, "[market] n_assets")
        if lengths and lengths[0] != n_assets:
            raise ConfigError(
                f"[market] n_assets = {n_assets} but per-asset lists have length {lengths[0]}"
            )
    elif lengths:
        n_assets = lengths[0]
    else:
        n_assets = 1 if kind == "shiryaev" else 2

    def broadcast(values, where):
        if len(values) == 1:
            return values * n_assets
        if len(values) != n_assets:
            raise ConfigError(f"{where}: expected 1 or {n_assets} values, got {len(values)}")
        return values

    drift = broadcast(drift, "[market] drift")
    volatility = broadcast(volatility, "[market] volatility")
    hurst = broadcast(hurst, "[market] hurst")
    initial_price = broadcast(initial_price, "[market] initial_price")

    horizon = _as_float(market_raw.get("horizon", 1.0), "[market] horizon")
    n_periods = _as_int(market_raw.get("n_periods", 250), "[market] n_periods")

    gamma = _as_float(strat_raw.get("gamma", 100.0), "[strategy] gamma")
    alpha = _as_order(strat_raw.get("alpha", -30.0), "[strategy] alpha")
    beta = _as_order(strat_raw.get("beta", 30.0), "[strategy] beta")

    p1_percent = _as_float(costs_raw.get("p1", 0.0), "[costs] p1")
    p2 = _as_float(costs_raw.get("p2", 0.0), "[costs] p2")

    n_scenarios = _as_int(run_raw.get("n_scenarios", 100_000), "[run] n_scenarios")
    generator = run_raw.get("generator", "spectral")
    if generator not in ("spectral", "exact"):
        raise ConfigError(f"[run] generator must be 'spectral' or 'exact', got {generator!r}")
    seed = _as_int(run_raw.get("seed", 42), "[run] seed")
    output = str(run_raw.get("output", "out"))
    threads = _as_int(run_raw.get("threads", 1), "[run] threads")
    bins = _as_int(run_raw.get("bins", 60), "[run] bins")

    sweep_axis = None
    sweep_n = _as_int(sweep_raw.get("n_scenarios", DEFAULT_SWEEP_SCENARIOS), "[sweep] n_scenarios")
    if sweep_raw.get("axis") is not None:
        field = str(sweep_raw["axis"])
        grid = sweep_raw.get("grid")
        if grid is None:
            if field == "hurst":
                grid = list(DEFAULT_HURST_GRID)
            elif field == "orders":
                grid = [list(p) for p in default_order_grid()]
            else:
                raise ConfigError(f"[sweep] grid is required for axis {field!r}")
        grid = _parse_grid(grid, field, "[sweep] grid")
        try:
            sweep_axis = SweepAxis(field=field, grid=tuple(
                tuple(p) if isinstance(p, list) else p for p in grid
            ))
        except ValueError as exc:
            raise ConfigError(f"[sweep] axis: {exc}") from None

    try:
        assets = tuple(
            AssetParams(drift=drift[i], volatility=volatility[i], hurst=hurst[i],
                        initial_price=initial_price[i])
            for i in range(n_assets)
        )
        market = MarketConfig(assets=assets, horizon=horizon, n_periods=n_periods,
                              master_seed=seed)
        if kind == "shiryaev":
            spec = ShiryaevStrategy(gamma=gamma)
        else:
            spec = SalopekStrategy(alpha=alpha, beta=beta, gamma=gamma)
        schedule = CostSchedule(proportional=p1_percent / 100.0, minimum_fee=p2)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    resolved = {
        "market": {
            "drift": drift, "volatility": volatility, "hurst": hurst,
            "initial_price": initial_price, "horizon": horizon,
            "n_periods": n_periods, "n_assets": n_assets,
        },
        "strategy": (
            {"kind": "shiryaev", "gamma": gamma} if kind == "shiryaev"
            else {"kind": "salopek", "gamma": gamma,
                  "alpha": _order_json(alpha), "beta": _order_json(beta)}
        ),
        "costs": {"p1": p1_percent, "p2": p2},
        "run": {"n_scenarios": n_scenarios, "generator": generator, "seed": seed,
                "output": output, "threads": threads, "bins": bins},
    }
    if sweep_axis is not None:
        resolved["sweep"] = {
            "axis": sweep_axis.field,
            "grid": [
                [_order_json(v) for v in p] if isinstance(p, tuple) else p
                for p in sweep_axis.grid
            ],
            "n_scenarios": sweep_n,
        }

    return RunConfig(
        market=market, spec=spec, schedule=schedule, n_scenarios=n_scenarios,
        generator=generator, output=output, threads=threads, bins=bins,
        sweep_axis=sweep_axis, sweep_n_scenarios=sweep_n, resolved=resolved,
    )


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _provenance_line(cfg: RunConfig, command: str, **extra) -> str:
    block = {"command": command, **extra, "config": cfg.to_dict()}
    return "# " + json.dumps(block, separators=(",", ":"))


def _write_csv(path: str, provenance: str, header: list, rows) -> str:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(provenance + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def cmd_paths(cfg: RunConfig, count: int = 1, prices: bool = False) -> list:
    """Write driving fBm paths (or price grids) for scenarios 0 .. count-1."""
    if count < 0:
        raise ConfigError(f"--count must be >= 0, got {count}")
    os.makedirs(cfg.output, exist_ok=True)
    written = []
    for idx in range(count):
        scenario = simulate_scenario(cfg.market, idx, generator=cfg.generator)
        head = _provenance_line(cfg, "paths", index=idx, prices=prices)
        if prices:
            header = ["t"] + [f"S{i + 1}" for i in range(scenario.n_assets)]
            rows = np.column_stack([scenario.times, scenario.prices.T])
            written.append(_write_csv(
                os.path.join(cfg.output, f"prices_path{idx:04d}.csv"), head, header, rows
            ))
        else:
            for a in range(scenario.n_assets):
                rows = np.column_stack([scenario.times, scenario.fbm_values[a]])
                written.append(_write_csv(
                    os.path.join(cfg.output, f"fbm_path{idx:04d}_asset{a}.csv"),
                    head, ["t", "value"], rows,
                ))
    return written


def cmd_replay(cfg: RunConfig, index: int = 0) -> list:
    """Write the full trade ledger of scenario ``index``."""
    if index < 0:
        raise ConfigError(f"--index must be >= 0, got {index}")
    os.makedirs(cfg.output, exist_ok=True)
    scenario = simulate_scenario(cfg.market, index, generator=cfg.generator)
    ledger = run_discrete_strategy(scenario, cfg.spec, cfg.schedule)
    d = scenario.n_assets
    header = (
        ["n", "t"]
        + [f"S{i + 1}" for i in range(d)]
        + [f"Phi{i}" for i in range(d + 2)]
        + ["Gamma", "L", "D", "V_Phi", "V_Psi", "m"]
    )
    n = scenario.n_periods
    rows = np.column_stack([
        np.arange(n + 1), scenario.times, scenario.prices.T, ledger.holdings,
        ledger.volumes, ledger.costs, ledger.rebalancing,
        ledger.values, ledger.continuous_values, ledger.running_min,
    ])
    path = os.path.join(cfg.output, f"ledger_path{index:04d}.csv")
    return [_write_csv(path, _provenance_line(cfg, "replay", index=index), header, rows)]


def cmd_run(cfg: RunConfig) -> list:
    """Run the Monte Carlo experiment; write summary JSON and histograms."""
    os.makedirs(cfg.output, exist_ok=True)
    outcomes, stats = run_experiment(
        cfg.market, cfg.spec, cfg.schedule, cfg.n_scenarios,
        generator=cfg.generator, n_threads=cfg.threads,
    )
    written = []
    summary = {
        "command": "run",
        "config": cfg.to_dict(),
        "results": {field: asdict(stats[field]) for field in OUTCOME_FIELDS},
    }
    path = os.path.join(cfg.output, "summary.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    written.append(path)
    for field in OUTCOME_FIELDS:
        counts, edges = histogram(outcomes.column(field), cfg.bins)
        rows = np.column_stack([edges[:-1], edges[1:], counts])
        written.append(_write_csv(
            os.path.join(cfg.output, f"hist_{field}.csv"),
            _provenance_line(cfg, "run", field=field),
            ["bin_left", "bin_right", "count"], rows,
        ))
    return written


def cmd_sweep(cfg: RunConfig) -> list:
    """Run the configured sweep; write one summary row per grid point."""
    if cfg.sweep_axis is None:
        raise ConfigError("sweep needs [sweep] axis (or --axis)")
    os.makedirs(cfg.output, exist_ok=True)
    points = sweep(
        cfg.market, cfg.spec, cfg.schedule, cfg.sweep_axis,
        n_scenarios=cfg.sweep_n_scenarios, generator=cfg.generator,
        n_threads=cfg.threads,
    )
    field = cfg.sweep_axis.field
    if field == "hurst_pair":
        value_cols = [f"hurst_{i + 1}" for i in range(cfg.market.n_assets)]
    elif field == "orders":
        value_cols = ["alpha", "beta"]
    else:
        value_cols = [field]
    header = value_cols + [
        "n_scenarios",
        "mean_terminal_discrete", "stdev_terminal_discrete", "loss_probability",
        "q05_terminal_discrete", "median_terminal_discrete", "q95_terminal_discrete",
        "mean_terminal_continuous", "mean_running_min", "mean_account_drain",
    ]
    rows = []
    for point in points:
        vd = point.stats["terminal_discrete"]
        value = list(point.value) if isinstance(point.value, tuple) else [point.value]
        rows.append(value + [
            vd.n_scenarios, vd.mean, vd.stdev, vd.loss_probability,
            vd.q05, vd.median, vd.q95,
            point.stats["terminal_continuous"].mean,
            point.stats["running_min"].mean,
            point.stats["account_drain"].mean,
        ])
    path = os.path.join(cfg.output, f"sweep_{field}.csv")
    return [_write_csv(path, _provenance_line(cfg, "sweep"), header, rows)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracarb",
        description="Monte Carlo study of discretized arbitrage strategies "
                    "in fractional Brownian motion markets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="TOML config file (or JSON with an embedded config block)")
        p.add_argument("--output", help="output directory (default: out)")
        p.add_argument("--seed", help="master seed")
        p.add_argument("--n-scenarios", dest="n_scenarios", help="number of scenarios")
        p.add_argument("--generator", choices=["spectral", "exact"], help="fBm generator")
        p.add_argument("--threads", help="worker cap for block execution")
        p.add_argument("--bins", help="histogram bin count")
        p.add_argument("--drift", help="per-asset drift (comma separated to differ)")
        p.add_argument("--volatility", help="per-asset volatility")
        p.add_argument("--hurst", help="per-asset Hurst index in (1/2, 1)")
        p.add_argument("--initial-price", dest="initial_price", help="per-asset start price")
        p.add_argument("--horizon", help="time horizon T")
        p.add_argument("--n-periods", dest="n_periods", help="trading dates N")
        p.add_argument("--n-assets", dest="n_assets", help="number of risky assets")
        p.add_argument("--strategy", choices=["shiryaev", "salopek"], help="position rule")
        p.add_argument("--gamma", help="strategy scale gamma > 0")
        p.add_argument("--alpha", help="lower power order (number or -inf)")
        p.add_argument("--beta", help="upper power order (number or inf)")
        p.add_argument("--p1", help="proportional fee in percent of volume")
        p.add_argument("--p2", help="minimum fee per trading date, in currency")

    p_paths = sub.add_parser("paths", help="write simulated paths as CSV")
    add_common(p_paths)
    p_paths.add_argument("--count", type=int, default=1, help="number of scenarios to write")
    p_paths.add_argument("--prices", action="store_true", help="write price grids instead of fBm values")

    p_replay = sub.add_parser("replay", help="write the trade ledger of one scenario")
    add_common(p_replay)
    p_replay.add_argument("--index", type=int, default=0, help="scenario index to replay")

    p_run = sub.add_parser("run", help="Monte Carlo summary and histograms")
    add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="summary row per parameter grid point")
    add_common(p_sweep)
    p_sweep.add_argument("--axis", help="swept field (drift, volatility, hurst, hurst_pair, orders, horizon, frequency)")
    p_sweep.add_argument("--grid", help="comma separated grid; pairs as a:b")
    p_sweep.add_argument("--sweep-n-scenarios", dest="sweep_n_scenarios",
                         help="scenarios per grid point")

    return parser


def _overrides_from_args(args: argparse.Namespace) -> dict:
    pairs = {
        "drift": ("market", "drift"), "volatility": ("market", "volatility"),
        "hurst": ("market", "hurst"), "initial_price": ("market", "initial_price"),
        "horizon": ("market", "horizon"), "n_periods": ("market", "n_periods"),
        "n_assets": ("market", "n_assets"),
        "strategy": ("strategy", "kind"), "gamma": ("strategy", "gamma"),
        "alpha": ("strategy", "alpha"), "beta": ("strategy", "beta"),
        "p1": ("costs", "p1"), "p2": ("costs", "p2"),
        "n_scenarios": ("run", "n_scenarios"), "generator": ("run", "generator"),
        "seed": ("run", "seed"), "output": ("run", "output"),
        "threads": ("run", "threads"), "bins": ("run", "bins"),
        "axis": ("sweep", "axis"), "grid": ("sweep", "grid"),
        "sweep_n_scenarios": ("sweep", "n_scenarios"),
    }
    return {
        target: getattr(args, dest)
        for dest, target in pairs.items()
        if getattr(args, dest, None) is not None
    }


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, _overrides_from_args(args))
        if args.command == "paths":
            written = cmd_paths(cfg, count=args.count, prices=args.prices)
        elif args.command == "replay":
            written = cmd_replay(cfg, index=args.index)
        elif args.command == "run":
            written = cmd_run(cfg)
        elif args.command == "sweep":
            written = cmd_sweep(cfg)
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
