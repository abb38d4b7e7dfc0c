"""Seeded Monte Carlo evaluation of a hexagonal macrocell with small cells.

Every realization draws a block shadowing field from ``(seed, realization)``
only, so realizations are independent work units that can run in any order on
any number of threads. Fading draws (when enabled) come from generators seeded
by ``(seed, realization, stream, chunk)`` with a fixed chunk size, and
aggregates are summed with :func:`math.fsum` in realization order, so results
are bit-identical for every thread count.

Link model
----------
Each transmitter has a band label; a link is interfered by every other
transmitter on the serving transmitter's band. With reuse 1 all BSs share band
0; with reuse 7 every BS of the two-tier layout has its own band. SC bands
depend on the mode: ``cochannel`` SCs use band 0 (the central BS band),
``orthogonal`` SCs share one dedicated band, ``orthogonal_reuse3`` SCs use one
of three bands by greedy coloring, ``isolated`` SCs each get a private band.
Thermal noise is always included.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .analytic import NetworkParams, db_to_linear
from .lattice import HexTiling, bs_positions, grid_points, hex_tiling, tile_of
from .propagation import ShadowingField, derive_seed, pathloss_db

SC_TX_BASE = 1_000_000
CHUNK = 128
MODES = ("none", "isolated", "orthogonal", "cochannel", "orthogonal_reuse3")
FADING_MODELS = ("none", "rayleigh")

_STREAM_BASE, _STREAM_PLACE, _STREAM_POINTS = 1, 2, 3
_MODE_STREAM = {m: 10 + i for i, m in enumerate(MODES)}


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    Parameters
    ----------
    params : NetworkParams
    grid_step : float, default=10.0
        Evaluation grid spacing in meters.
    fading_draws : int, default=500
        Fading draws ``K`` per point when ``fading="rayleigh"``.
    realizations : int, default=200
    seed : int, default=0
    sc_mode : {"none", "isolated", "orthogonal", "cochannel", "orthogonal_reuse3"}
    fading : {"none", "rayleigh"}, default="none"
        ``"none"`` evaluates each shadowing realization at unit fading gain,
        which is the channel the analytic outage model describes. ``"rayleigh"``
        adds i.i.d. unit-mean exponential power fading on every link.
    """

    params: NetworkParams = field(default_factory=NetworkParams)
    grid_step: float = 10.0
    fading_draws: int = 500
    realizations: int = 200
    seed: int = 0
    sc_mode: str = "none"
    fading: str = "none"

    def __post_init__(self):
        if not self.grid_step > 0:
            raise ValueError(f"grid_step must be positive, got {self.grid_step!r}")
        if self.fading_draws < 100:
            raise ValueError(f"fading_draws must be >= 100, got {self.fading_draws!r}")
        if self.realizations < 1:
            raise ValueError(f"realizations must be >= 1, got {self.realizations!r}")
        if self.sc_mode not in MODES:
            raise ValueError(f"sc_mode must be one of {MODES}, got {self.sc_mode!r}")
        if self.fading not in FADING_MODELS:
            raise ValueError(f"fading must be one of {FADING_MODELS}, got {self.fading!r}")

    def replace(self, **changes) -> "SimConfig":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return SimConfig(**data)


@dataclass
class CoverageMap:
    """Per-point service results on the evaluation grid.

    ``serving`` holds transmitter ids: 0-18 for BSs, ``SC_TX_BASE + tile`` for
    SCs. ``rop`` is the fraction of fading draws below the target spectral
    efficiency, ``se`` the mean spectral efficiency over those draws.
    """

    points: np.ndarray
    serving: np.ndarray
    rop: np.ndarray
    se: np.ndarray
    eta: float

    @property
    def outage(self) -> np.ndarray:
        return self.rop > self.eta

    @property
    def outage_fraction(self) -> float:
        return float(np.count_nonzero(self.outage)) / len(self.rop)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x_m", "y_m", "serving_id", "rop", "se_bps_hz", "outage_flag"])
            for (x, y), s, p, e, o in zip(self.points, self.serving, self.rop, self.se, self.outage):
                w.writerow([f"{x:.9g}", f"{y:.9g}", int(s), f"{p:.9g}", f"{e:.9g}", int(o)])


@dataclass(frozen=True)
class PlacementPlan:
    """SC tiles chosen for one shadowing realization."""

    seed: int
    realization: int
    tiles: np.ndarray
    centers: np.ndarray
    weights: np.ndarray
    mode: str

    @property
    def weighted_count(self) -> Fraction:
        return sum((Fraction(float(w)) for w in self.weights), Fraction(0))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tile_index", "x_m", "y_m", "edge_weight"])
            for t, (x, y), wt in zip(self.tiles, self.centers, self.weights):
                w.writerow([int(t), f"{x:.9g}", f"{y:.9g}", f"{wt:.9g}"])


@dataclass(frozen=True)
class _Transmitters:
    ids: np.ndarray
    positions: np.ndarray
    power_dbm: np.ndarray
    bands: np.ndarray


def _bs_transmitters(params: NetworkParams) -> _Transmitters:
    pos = bs_positions(params.r_mc_m, params.tiers)
    n = len(pos)
    bands = np.zeros(n, dtype=np.int64) if params.reuse == 1 else np.arange(n, dtype=np.int64)
    return _Transmitters(np.arange(n), pos, np.full(n, params.bs_power_dbm), bands)


def shadowing_for(config: SimConfig, realization: int) -> ShadowingField:
    """Block shadowing field of one realization (depends on seed and index only)."""
    p = config.params
    return ShadowingField(derive_seed(config.seed, realization), p.r_sc_m, p.sigma_l_db)


def _mean_power_mw(points, tiles_q, tiles_r, tx: _Transmitters, params: NetworkParams, shadow) -> np.ndarray:
    d = np.hypot(points[:, None, 0] - tx.positions[None, :, 0], points[:, None, 1] - tx.positions[None, :, 1])
    loss_db = pathloss_db(d, params.propagation)
    shadow_db = shadow.value_db(tx.ids[None, :], tiles_q[:, None], tiles_r[:, None])
    return db_to_linear(tx.power_dbm[None, :] - loss_db - shadow_db)


def _link_quality(power, serving_col, interf_mask, se_scale, params: NetworkParams, config: SimConfig,
                  seed_parts: tuple):
    """ROP and mean spectral efficiency per point for fixed mean powers.

    ``power`` is (n, m) in mW, ``serving_col`` (n,) column index of the
    server, ``interf_mask`` (n, m) the co-channel interferers.
    """
    n = len(power)
    noise = float(db_to_linear(params.noise_dbm))
    gap = params.snr_gap
    rows = np.arange(n)
    signal = power[rows, serving_col]
    interf = np.where(interf_mask, power, 0.0)
    if config.fading == "none":
        sinr = signal / (interf.sum(axis=1) + noise)
        se = se_scale * np.log2(1.0 + sinr / gap)
        return (se < params.c0_bps_hz).astype(float), se
    k = config.fading_draws
    rop = np.empty(n)
    se_mean = np.empty(n)
    for c, start in enumerate(range(0, n, CHUNK)):
        sl = slice(start, min(start + CHUNK, n))
        rng = np.random.default_rng(derive_seed(*seed_parts, c))
        m = power.shape[1]
        g = rng.standard_exponential((sl.stop - sl.start, k, m))
        sig = signal[sl, None] * g[np.arange(sl.stop - sl.start), :, serving_col[sl]]
        itf = np.einsum("nkm,nm->nk", g, interf[sl])
        se = se_scale[sl, None] * np.log2(1.0 + sig / (itf + noise) / gap)
        rop[sl] = np.mean(se < params.c0_bps_hz, axis=1)
        se_mean[sl] = np.mean(se, axis=1)
    return rop, se_mean


def _bs_service(points, config: SimConfig, shadow, seed_parts):
    params = config.params
    tx = _bs_transmitters(params)
    q, r = tile_of(points, params.r_sc_m)
    power = _mean_power_mw(points, q, r, tx, params, shadow)
    serving = np.argmax(power, axis=1)
    mask = tx.bands[None, :] == tx.bands[serving][:, None]
    mask[np.arange(len(points)), serving] = False
    scale = np.full(len(points), 1.0 / params.reuse)
    rop, se = _link_quality(power, serving, mask, scale, params, config, seed_parts)
    return serving, rop, se


def evaluate_points(config: SimConfig, points, realization: int, shadow=None):
    """BS-only ``(serving BS, ROP, mean spectral efficiency)`` at arbitrary points (meters)."""
    shadow = shadow if shadow is not None else shadowing_for(config, realization)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return _bs_service(pts, config, shadow, (config.seed, realization, _STREAM_POINTS))


def outage_map(config: SimConfig, realization: int, shadow=None) -> CoverageMap:
    """BS-only coverage of the central macrocell for one shadowing realization.

    Points associate with the BS of largest mean received power (path loss
    and shadowing, unit-mean fading) among the 19 BSs.
    """
    shadow = shadow if shadow is not None else shadowing_for(config, realization)
    pts = grid_points(config.params.r_mc_m, config.grid_step)
    serving, rop, se = _bs_service(pts, config, shadow, (config.seed, realization, _STREAM_BASE))
    return CoverageMap(pts, serving, rop, se, config.params.eta)


def place_scs(config: SimConfig, realization: int, shadow=None, tiling: HexTiling | None = None) -> PlacementPlan:
    """Choose the SC tiles whose center is in outage under BS-only service.

    ``shadow`` may be any object with a ``value_db(tx, q, r)`` method, which
    allows hand-built fields in tests.
    """
    params = config.params
    shadow = shadow if shadow is not None else shadowing_for(config, realization)
    tiling = tiling if tiling is not None else hex_tiling(params.r_mc_m, params.r_sc_m)
    _, rop, _ = _bs_service(tiling.centers, config, shadow, (config.seed, realization, _STREAM_PLACE))
    chosen = np.flatnonzero(rop > params.eta)
    return PlacementPlan(
        seed=config.seed,
        realization=realization,
        tiles=chosen,
        centers=tiling.centers[chosen],
        weights=tiling.edge_weight[chosen],
        mode=config.sc_mode,
    )


def greedy_colors(adjacency: dict[int, list[int]], n_colors: int = 3) -> dict[int, int]:
    """Largest-degree-first greedy coloring with a fixed palette.

    Ties in degree break by node id. When every color is used by a neighbour,
    the color shared with the fewest neighbours is taken (lowest color wins
    ties), so the result always uses at most ``n_colors`` colors.
    """
    order = sorted(adjacency, key=lambda v: (-len(adjacency[v]), v))
    colors: dict[int, int] = {}
    for v in order:
        counts = [0] * n_colors
        for u in adjacency[v]:
            if u in colors:
                counts[colors[u]] += 1
        colors[v] = min(range(n_colors), key=lambda c: (counts[c], c))
    return colors


def _sc_bands(plan: PlacementPlan, mode: str, tiling: HexTiling) -> np.ndarray:
    n = len(plan.tiles)
    if mode == "cochannel":
        return np.zeros(n, dtype=np.int64)
    if mode == "orthogonal":
        return np.full(n, -1, dtype=np.int64)
    if mode == "orthogonal_reuse3":
        colors = greedy_colors(tiling.adjacency(plan.tiles))
        return np.array([-10 - colors[int(t)] for t in plan.tiles], dtype=np.int64)
    if mode == "isolated":
        return -100 - np.arange(n, dtype=np.int64)
    raise ValueError(f"no SC band rule for mode {mode!r}")


def _evaluate_with_scs(config: SimConfig, plan: PlacementPlan, realization: int, mode: str, shadow,
                       tiling: HexTiling) -> CoverageMap:
    params = config.params
    pts = grid_points(params.r_mc_m, config.grid_step)
    bs = _bs_transmitters(params)
    sc_bands = _sc_bands(plan, mode, tiling)
    tx = _Transmitters(
        ids=np.concatenate([bs.ids, SC_TX_BASE + plan.tiles]),
        positions=np.vstack([bs.positions, plan.centers.reshape(-1, 2)]),
        power_dbm=np.concatenate([bs.power_dbm, np.full(len(plan.tiles), params.sc_power_dbm)]),
        bands=np.concatenate([bs.bands, sc_bands]),
    )
    q, r = tile_of(pts, params.r_sc_m)
    power = _mean_power_mw(pts, q, r, tx, params, shadow)
    n_bs = len(bs.ids)
    serving = np.argmax(power[:, :n_bs], axis=1)
    # points inside a chosen tile are handed to that tile's SC
    tile_idx = tiling.index_of(q, r)
    col_of_tile = {int(t): n_bs + k for k, t in enumerate(plan.tiles)}
    sc_col = np.array([col_of_tile.get(int(t), -1) for t in tile_idx], dtype=np.int64)
    on_sc = sc_col >= 0
    serving = np.where(on_sc, sc_col, serving)
    mask = tx.bands[None, :] == tx.bands[serving][:, None]
    mask[np.arange(len(pts)), serving] = False
    scale = np.where(on_sc, 1.0, 1.0 / params.reuse)
    rop, se = _link_quality(power, serving, mask, scale, params, config,
                            (config.seed, realization, _MODE_STREAM[mode]))
    return CoverageMap(pts, tx.ids[serving], rop, se, params.eta)


def residual_outage(config: SimConfig, plan: PlacementPlan, realization: int, mode: str | None = None,
                    shadow=None) -> tuple[CoverageMap, float]:
    """Coverage after deploying the planned SCs, and the residual outage fraction.

    Points inside a chosen tile are served by its SC (antenna at the tile
    center); all other points keep their BS. ``mode`` defaults to
    ``config.sc_mode``.
    """
    if plan.seed != config.seed or plan.realization != realization:
        raise ValueError(
            f"plan belongs to (seed={plan.seed}, realization={plan.realization}), "
            f"not (seed={config.seed}, realization={realization})"
        )
    mode = mode if mode is not None else config.sc_mode
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    shadow = shadow if shadow is not None else shadowing_for(config, realization)
    if mode == "none":
        cmap = outage_map(config, realization, shadow)
    else:
        tiling = hex_tiling(config.params.r_mc_m, config.params.r_sc_m)
        cmap = _evaluate_with_scs(config, plan, realization, mode, shadow, tiling)
    return cmap, cmap.outage_fraction


def ergodic_rate_map(config: SimConfig, plan: PlacementPlan, realization: int, mode: str | None = None,
                     shadow=None) -> CoverageMap:
    """Coverage map whose ``se`` field is the fading-averaged spectral efficiency."""
    return residual_outage(config, plan, realization, mode, shadow)[0]


@dataclass(frozen=True)
class RealizationResult:
    realization: int
    outage_fraction: float
    weighted_count: float
    residual: float


def run_realization(config: SimConfig, realization: int) -> RealizationResult:
    """Outage, placement and residual outage (in ``config.sc_mode``) for one realization."""
    shadow = shadowing_for(config, realization)
    base = outage_map(config, realization, shadow)
    plan = place_scs(config, realization, shadow)
    if config.sc_mode == "none":
        residual = base.outage_fraction
    else:
        residual = residual_outage(config, plan, realization, shadow=shadow)[1]
    return RealizationResult(realization, base.outage_fraction, float(plan.weighted_count), residual)


def run_realizations(config: SimConfig, threads: int = 1) -> list[RealizationResult]:
    """All realizations of ``config``; results are ordered by realization index."""
    if threads < 1:
        raise ValueError("threads must be >= 1")
    indices = range(config.realizations)
    if threads == 1:
        return [run_realization(config, i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: run_realization(config, i), indices))


SWEEP_COLUMNS = (
    "alpha", "sigma_l_db", "c0_bps_hz", "eta", "gamma_g", "reuse", "r_mc_m", "r_sc_m", "sc_mode", "fading",
    "realizations", "seed", "outage_mean", "outage_std", "sc_count_mean", "residual_mean", "residual_std",
)


def _mean_std(values) -> tuple[float, float]:
    values = list(values)
    mean = math.fsum(values) / len(values)
    var = math.fsum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(var)


def aggregate(config: SimConfig, results: list[RealizationResult]) -> dict:
    """One sweep-table row (see ``SWEEP_COLUMNS``) from per-realization results."""
    if not results:
        raise ValueError("no realization results to aggregate")
    results = sorted(results, key=lambda r: r.realization)
    p = config.params
    out_mean, out_std = _mean_std(r.outage_fraction for r in results)
    res_mean, res_std = _mean_std(r.residual for r in results)
    return {
        "alpha": p.alpha, "sigma_l_db": p.sigma_l_db, "c0_bps_hz": p.c0_bps_hz, "eta": p.eta,
        "gamma_g": p.gamma_g, "reuse": p.reuse, "r_mc_m": p.r_mc_m, "r_sc_m": p.r_sc_m,
        "sc_mode": config.sc_mode, "fading": config.fading, "realizations": len(results), "seed": config.seed,
        "outage_mean": out_mean, "outage_std": out_std,
        "sc_count_mean": math.fsum(r.weighted_count for r in results) / len(results),
        "residual_mean": res_mean, "residual_std": res_std,
    }


def sweep(configs, threads: int = 1) -> list[dict]:
    """Aggregate rows for each config, in input order."""
    configs = list(configs)
    if not configs:
        raise ValueError("sweep needs at least one config")
    return [aggregate(c, run_realizations(c, threads)) for c in configs]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def write_table(path, rows: list[dict], columns=SWEEP_COLUMNS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(row[c]) for c in columns])
