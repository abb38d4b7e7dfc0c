"""Command-line driver: ``hexcover {fit,analyze,simulate,place,baseline,sweep}``.

Configuration files hold ``key = value`` lines with ``#`` comments; units are
part of the key names. Tables are comma-separated with a header row and
floats are written with 9 significant digits. Exit status is 0 on success,
1 on a numeric or runtime failure and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import itertools
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import analytic, baselines, interference, simulator
from .analytic import NetworkParams, OutageReport
from .simulator import SimConfig, format_value

SIM_KEYS = {
    "grid_step_m": ("grid_step", float),
    "fading_draws": ("fading_draws", int),
    "realizations": ("realizations", int),
    "sc_mode": ("sc_mode", str),
    "fading": ("fading", str),
}
_INT_PARAMS = {"reuse", "freq_slots", "poly_order", "tiers", "fit_samples"}


class UsageError(Exception):
    """Bad arguments or configuration (exit status 2)."""


def config_defaults() -> dict[str, object]:
    """Every config key with its default value, in documentation order."""
    out: dict[str, object] = dict(asdict(NetworkParams()))
    sim = SimConfig()
    for key, (attr, _) in SIM_KEYS.items():
        out[key] = getattr(sim, attr)
    out["seed"] = None
    return out


def _convert(key: str, raw: str):
    if key in SIM_KEYS:
        kind = SIM_KEYS[key][1]
    elif key == "seed" or key in _INT_PARAMS:
        kind = int
    else:
        kind = float
    try:
        return kind(raw)
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config_text(text: str, source: str = "<string>") -> dict[str, object]:
    known = config_defaults()
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise UsageError(f"{source}:{lineno}: expected 'key = value'")
        if key not in known:
            raise UsageError(f"{source}:{lineno}: unknown config key {key!r}")
        values[key] = _convert(key, raw)
    return values


@dataclass
class RunConfig:
    """Resolved settings: explicit values from the config file plus recorded defaults."""

    params: NetworkParams
    sim: SimConfig
    seed: int | None
    source: str | None = None
    explicit: tuple = field(default_factory=tuple)

    @classmethod
    def from_values(cls, values: dict, source: str | None = None) -> "RunConfig":
        net = {k: v for k, v in values.items() if k in {f.name for f in fields(NetworkParams)}}
        try:
            params = NetworkParams(**net)
            sim_kwargs = {SIM_KEYS[k][0]: v for k, v in values.items() if k in SIM_KEYS}
            seed = values.get("seed")
            sim = SimConfig(params=params, seed=seed if seed is not None else 0, **sim_kwargs)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return cls(params, sim, seed, source, tuple(sorted(values)))

    def values(self) -> dict[str, object]:
        out: dict[str, object] = dict(asdict(self.params))
        for key, (attr, _) in SIM_KEYS.items():
            out[key] = getattr(self.sim, attr)
        out["seed"] = self.seed
        return out

    def to_text(self) -> str:
        lines = []
        for k, v in self.values().items():
            if v is None:
                continue
            tag = "" if k in self.explicit else "  # default"
            lines.append(f"{k} = {v!r}{tag}" if isinstance(v, float) else f"{k} = {v}{tag}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, **values) -> "RunConfig":
        merged = {k: v for k, v in self.values().items() if k in self.explicit}
        merged.update(values)
        return RunConfig.from_values(merged, self.source)


def load_run_config(path: str | None, seed: int | None = None) -> RunConfig:
    values: dict[str, object] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"config file not found: {path}")
        values = parse_config_text(p.read_text(), str(p))
    if seed is not None:
        values["seed"] = seed
    return RunConfig.from_values(values, path)


def _help_epilog() -> str:
    rows = [f"  {k:<16} default {v}" for k, v in config_defaults().items()]
    return "config keys (key = value lines, '#' starts a comment):\n" + "\n".join(rows)


def _write_table(rows: list[list], header: list[str], out) -> None:
    lines = [",".join(header)] + [",".join(format_value(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _require_seed(rc: RunConfig, command: str) -> int:
    if rc.seed is None:
        raise UsageError(f"'{command}' is seeded: pass --seed or set 'seed' in the config")
    return rc.seed


def _parse_range(spec: str) -> list[float]:
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise UsageError(f"expected START:STOP:STEP, got {spec!r}") from None
    if not step > 0 or stop < start:
        raise UsageError(f"invalid range {spec!r}")
    n = int(math.floor(round((stop - start) / step, 9)))
    return [round(start + i * step, 12) for i in range(n + 1)]


def _parse_window(spec: str) -> tuple[float, float]:
    try:
        w, h = (float(x) for x in spec.lower().split("x"))
    except ValueError:
        raise UsageError(f"expected WIDTHxHEIGHT in meters, got {spec!r}") from None
    return w, h


# --- commands ----------------------------------------------------------------

def cmd_fit(args) -> int:
    rc = load_run_config(args.config)
    alpha = args.alpha if args.alpha is not None else rc.params.alpha
    order = args.order if args.order is not None else rc.params.poly_order
    try:
        interference.check_alpha(alpha)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    bounds = interference.fit_bounds(alpha, order, rc.params.fit_samples, rc.params.tiers)
    text = bounds.to_text()
    if args.out:
        Path(args.out).write_text(text)
    header = ["bound"] + [f"a{i}" for i in range(order + 1)]
    rows = [["lower", *bounds.lower_coeffs], ["upper", *bounds.upper_coeffs]]
    _write_table(rows, header, None)
    print(f"fit_max_rel_error,{format_value(bounds.fit_max_rel_error)}")
    return 0


def cmd_analyze(args) -> int:
    rc = load_run_config(args.config)
    c0_values = _parse_range(args.c0_sweep) if args.c0_sweep else [rc.params.c0_bps_hz]
    bounds = None
    if rc.params.reuse == 1:
        bounds = interference.load_or_fit(rc.params.alpha, rc.params.poly_order, rc.params.tiers,
                                          rc.params.fit_samples, args.cache_dir)
    rows = []
    for c0 in c0_values:
        params = rc.params.replace(c0_bps_hz=c0)
        rows.append(analytic.full_report(params, bounds).csv_row())
    _write_table(rows, OutageReport.csv_header(), args.out)
    return 0


def _sim_config(rc: RunConfig, args, seed: int) -> SimConfig:
    sim = rc.sim.replace(seed=seed)
    if getattr(args, "mode", None):
        sim = sim.replace(sc_mode=args.mode)
    if getattr(args, "realizations", None):
        sim = sim.replace(realizations=args.realizations)
    return sim


def cmd_simulate(args) -> int:
    rc = load_run_config(args.config, args.seed)
    seed = _require_seed(rc, "simulate")
    sim = _sim_config(rc, args, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_maps = sim.realizations if args.maps is None else min(args.maps, sim.realizations)

    def work(i):
        shadow = simulator.shadowing_for(sim, i)
        base = simulator.outage_map(sim, i, shadow)
        plan = simulator.place_scs(sim, i, shadow)
        cmap = base
        if sim.sc_mode != "none":
            cmap = simulator.residual_outage(sim, plan, i, shadow=shadow)[0]
        if i < n_maps:
            cmap.to_csv(out / f"map_r{i:04d}_{sim.sc_mode}.csv")
        _progress(f"realization {i + 1}/{sim.realizations} outage={base.outage_fraction:.4f}")
        return simulator.RealizationResult(i, base.outage_fraction, float(plan.weighted_count),
                                           cmap.outage_fraction)

    results = _map_realizations(work, sim.realizations, args.threads)
    row = simulator.aggregate(sim, results)
    simulator.write_table(out / "aggregate.csv", [row])
    per_real = [[r.realization, r.outage_fraction, r.weighted_count, r.residual] for r in results]
    _write_table(per_real, ["realization", "outage_fraction", "sc_weighted_count", "residual_fraction"],
                 out / "realizations.csv")
    return 0


def _map_realizations(work, n: int, threads: int):
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    if threads == 1:
        return [work(i) for i in range(n)]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, range(n)))


def cmd_place(args) -> int:
    rc = load_run_config(args.config, args.seed)
    seed = _require_seed(rc, "place")
    sim = _sim_config(rc, args, seed)
    plan = simulator.place_scs(sim, args.realization)
    rows = [[int(t), x, y, w] for t, (x, y), w in zip(plan.tiles, plan.centers, plan.weights)]
    _write_table(rows, ["tile_index", "x_m", "y_m", "edge_weight"], args.out)
    _progress(f"weighted SC count {float(plan.weighted_count):g}")
    return 0


BASELINE_HEADER = ["layout", "sites", "density_per_m2", "area_m2", "outage", "n_sc"]


def cmd_baseline(args) -> int:
    rc = load_run_config(args.config, args.seed)
    seed = _require_seed(rc, "baseline")
    p = rc.params
    realizations = args.realizations or rc.sim.realizations
    if args.kind == "ppp":
        density = args.density if args.density else 1.0 / (1.5 * math.sqrt(3) * p.r_mc_m**2)
        window = _parse_window(args.window or "30000x30000")
        outage = baselines.ppp_outage(density, window, p, seed, realizations, args.guard, args.grid_step,
                                      args.fading, args.threads)
        area = window[0] * window[1]
        rows = [["ppp", round(density * area, 9), density, area, outage,
                 baselines.sc_count_for_area(outage, area, p.r_sc_m)]]
    else:
        if args.file:
            if args.lat is None or args.lon is None or args.window is None:
                raise UsageError("site files need --lat, --lon and --window")
            if not Path(args.file).is_file():
                raise UsageError(f"site file not found: {args.file}")
            sites = baselines.load_site_set(args.file, args.lat, args.lon, _parse_window(args.window))
        else:
            sites = baselines.load_fixture(args.fixture)
        outage = baselines.siteset_outage(sites, p, seed, realizations, args.guard, args.grid_step, args.fading,
                                          args.threads)
        rows = [[sites.name, len(sites), sites.density, sites.area, outage,
                 baselines.sc_count_for_area(outage, sites.area, p.r_sc_m)]]
    _write_table(rows, BASELINE_HEADER, args.out)
    return 0


def _parse_vary(items: list[str]) -> list[tuple[str, list]]:
    known = config_defaults()
    out = []
    for item in items:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or key not in known:
            raise UsageError(f"--vary expects KEY=V1,V2,... with a known key, got {item!r}")
        out.append((key, [_convert(key, v.strip()) for v in raw.split(",") if v.strip()]))
    return out


def cmd_sweep(args) -> int:
    rc = load_run_config(args.config, args.seed)
    seed = _require_seed(rc, "sweep")
    axes = _parse_vary(args.vary or [])
    keys = [k for k, _ in axes]
    configs = []
    for combo in itertools.product(*[vals for _, vals in axes]) if axes else [()]:
        run = rc.with_overrides(**dict(zip(keys, combo)))
        configs.append(_sim_config(run, args, seed))
    rows = []
    for i, cfg in enumerate(configs):
        rows.extend(simulator.sweep([cfg], args.threads))
        _progress(f"config {i + 1}/{len(configs)} done")
    table = [[r[c] for c in simulator.SWEEP_COLUMNS] for r in rows]
    _write_table(table, list(simulator.SWEEP_COLUMNS), args.out)
    return 0


# --- parser --------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    epilog = _help_epilog()
    fmt = argparse.RawDescriptionHelpFormatter
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="base seed (required by seeded commands)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    common.add_argument("--out", help="output file (or directory for simulate)")

    parser = _Parser(prog="hexcover", description="Coverage-hole analysis for hexagonal cellular networks.",
                     epilog=epilog, formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", parents=[common], help="fit interference bounds", epilog=epilog, formatter_class=fmt)
    p.add_argument("--alpha", type=float)
    p.add_argument("--order", type=int)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("analyze", parents=[common], help="analytic outage report", epilog=epilog,
                       formatter_class=fmt)
    p.add_argument("--c0-sweep", metavar="START:STOP:STEP", help="one report row per target spectral efficiency")
    p.add_argument("--cache-dir", help="directory for cached bound fits")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo outage maps", epilog=epilog,
                       formatter_class=fmt)
    p.add_argument("--mode", choices=simulator.MODES)
    p.add_argument("--realizations", type=int)
    p.add_argument("--maps", type=int, default=1, help="number of per-realization maps to write (default 1)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("place", parents=[common], help="SC placement for one realization", epilog=epilog,
                       formatter_class=fmt)
    p.add_argument("--realization", type=int, default=0)
    p.set_defaults(func=cmd_place)

    p = sub.add_parser("baseline", parents=[common], help="PPP or site-set outage", epilog=epilog,
                       formatter_class=fmt)
    p.add_argument("kind", choices=("ppp", "sites"))
    p.add_argument("--density", type=float, help="PPP intensity per m^2 (default: lattice-matched)")
    p.add_argument("--window", help="WIDTHxHEIGHT in meters (PPP default 30000x30000)")
    p.add_argument("--file", help="site file (id,latitude_deg,longitude_deg)")
    p.add_argument("--fixture", choices=sorted(baselines.FIXTURES), default="toronto")
    p.add_argument("--lat", type=float)
    p.add_argument("--lon", type=float)
    p.add_argument("--guard", type=float)
    p.add_argument("--grid-step", type=float, default=50.0)
    p.add_argument("--fading", choices=("none", "rayleigh"), default="none")
    p.add_argument("--realizations", type=int)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep", parents=[common], help="aggregate table over config grids", epilog=epilog,
                       formatter_class=fmt)
    p.add_argument("--vary", action="append", metavar="KEY=V1,V2", help="config key to sweep (repeatable)")
    p.add_argument("--mode", choices=simulator.MODES)
    p.add_argument("--realizations", type=int)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hexcover: error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"hexcover: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
