"""Benchmark BS layouts: Poisson point processes, lattices and site files.

Outage over a site set is evaluated on a user grid inside a guard-shrunk
window, with every other site acting as a reuse-1 interferer. With Rayleigh
fading the per-user outage is exact given the mean powers ``S_k``::

    P(SINR > T) = exp(-T N / S_0) * prod_{k != 0} 1 / (1 + T S_k / S_0)

so only shadowing is sampled.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .analytic import NetworkParams, db_to_linear
from .lattice import SQRT3, tile_of
from .propagation import ShadowingField, derive_seed, pathloss_db
from ._validation import check_fraction, check_positive

EARTH_RADIUS_M = 6_371_000.0
FIXTURES = {
    # name: (file, center latitude, center longitude, window width, window height)
    "toronto": ("toronto_sites.csv", 43.6671, -79.5836, 6000.0, 6000.0),
    "montreal": ("montreal_sites.csv", 45.5235, -73.6010, 8000.0, 5500.0),
}


class SiteFileError(ValueError):
    """A site file row could not be parsed."""


class EmptySiteSetError(ValueError):
    """No site fell inside the requested window."""


@dataclass(frozen=True)
class SiteSet:
    """BS sites (meters, local projection) inside a centered rectangular window.

    ``window`` is ``(width, height)``; the window spans ``[-w/2, w/2] x [-h/2, h/2]``.
    """

    name: str
    sites: np.ndarray
    window: tuple[float, float]

    def __post_init__(self):
        w, h = self.window
        if not (w > 0 and h > 0):
            raise ValueError("window sides must be positive")
        s = np.asarray(self.sites, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "sites", s)
        if np.any(np.abs(s[:, 0]) > w / 2) or np.any(np.abs(s[:, 1]) > h / 2):
            raise ValueError("all sites must lie inside the window")

    @property
    def area(self) -> float:
        return self.window[0] * self.window[1]

    @property
    def density(self) -> float:
        return len(self.sites) / self.area

    def __len__(self) -> int:
        return len(self.sites)


def _inside(points: np.ndarray, window) -> np.ndarray:
    w, h = window
    return (np.abs(points[:, 0]) <= w / 2) & (np.abs(points[:, 1]) <= h / 2)


def ppp_generate(density: float, window, seed: int, name: str = "ppp") -> SiteSet:
    """Homogeneous Poisson point process of intensity ``density`` (per m^2)."""
    check_positive(density, "density")
    w, h = window
    rng = np.random.default_rng(derive_seed(seed, 0x505050))
    n = rng.poisson(density * w * h)
    pts = np.column_stack([rng.uniform(-w / 2, w / 2, n), rng.uniform(-h / 2, h / 2, n)])
    return SiteSet(name, pts, (float(w), float(h)))


def lattice_sites(spacing: float, window, name: str = "lattice", jitter: float = 0.0,
                  seed: int | None = None) -> SiteSet:
    """Triangular BS lattice (hexagonal cells) with one site at the origin.

    ``spacing`` is the inter-site distance, ``sqrt(3) r_mc`` for cells of
    radius ``r_mc``. A non-zero ``jitter`` displaces every site by an
    isotropic Gaussian offset of that standard deviation (meters), giving a
    more irregular, real-deployment-like layout; sites pushed outside the
    window are dropped.
    """
    check_positive(spacing, "spacing")
    w, h = window
    nx = int(math.ceil(w / spacing)) + 2
    ny = int(math.ceil(h / (spacing * SQRT3 / 2))) + 2
    i, j = np.meshgrid(np.arange(-nx, nx + 1), np.arange(-ny, ny + 1))
    x = spacing * (i + j / 2.0)
    y = spacing * SQRT3 / 2 * j
    pts = np.column_stack([x.ravel(), y.ravel()])
    if jitter > 0:
        if seed is None:
            raise ValueError("a seed is required for a jittered lattice")
        rng = np.random.default_rng(derive_seed(seed, 0x4A4954))
        pts = pts + rng.normal(0.0, jitter, pts.shape)
    pts = pts[_inside(pts, window)]
    order = np.lexsort((pts[:, 0], pts[:, 1]))
    return SiteSet(name, pts[order], (float(w), float(h)))


def project(lat_deg, lon_deg, center_lat: float, center_lon: float) -> np.ndarray:
    """Equirectangular projection about the center, meters (x east, y north)."""
    lat = np.radians(np.asarray(lat_deg, dtype=float))
    lon = np.radians(np.asarray(lon_deg, dtype=float))
    lat_c, lon_c = math.radians(center_lat), math.radians(center_lon)
    x = EARTH_RADIUS_M * (lon - lon_c) * math.cos(lat_c)
    y = EARTH_RADIUS_M * (lat - lat_c)
    return np.column_stack([np.atleast_1d(x), np.atleast_1d(y)])


def unproject(points, center_lat: float, center_lon: float) -> np.ndarray:
    """Inverse of :func:`project`; returns ``(lat_deg, lon_deg)`` columns."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    lat_c, lon_c = math.radians(center_lat), math.radians(center_lon)
    lat = lat_c + p[:, 1] / EARTH_RADIUS_M
    lon = lon_c + p[:, 0] / (EARTH_RADIUS_M * math.cos(lat_c))
    return np.column_stack([np.degrees(lat), np.degrees(lon)])


def load_site_set(path, center_lat: float, center_lon: float, window, name: str | None = None) -> SiteSet:
    """Read ``id,latitude_deg,longitude_deg`` rows (one header line) into a :class:`SiteSet`.

    Sites outside the window are dropped.
    """
    path = Path(path)
    lats, lons = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                if len(row) != 3:
                    raise ValueError(f"expected 3 fields, got {len(row)}")
                lat, lon = float(row[1]), float(row[2])
                if not (-90 <= lat <= 90 and -180 <= lon <= 180):
                    raise ValueError("coordinates out of range")
            except ValueError as exc:
                raise SiteFileError(f"{path}:{lineno}: {exc}") from None
            lats.append(lat)
            lons.append(lon)
    pts = project(lats, lons, center_lat, center_lon) if lats else np.empty((0, 2))
    pts = pts[_inside(pts, window)]
    if len(pts) == 0:
        raise EmptySiteSetError(f"{path}: no sites inside the {window[0]:g} x {window[1]:g} m window")
    return SiteSet(name or path.stem, pts, (float(window[0]), float(window[1])))


def load_fixture(name: str) -> SiteSet:
    """One of the bundled synthetic site sets (``"toronto"`` or ``"montreal"``)."""
    try:
        fname, lat, lon, w, h = FIXTURES[name]
    except KeyError:
        raise ValueError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
    with resources.as_file(resources.files("hexcover") / "data" / fname) as p:
        return load_site_set(p, lat, lon, (w, h), name=name)


def default_guard(density: float) -> float:
    """Two mean nearest-neighbour spacings, ``2 / sqrt(pi density)``."""
    return 2.0 / math.sqrt(math.pi * density)


def user_grid(window, guard: float, step: float) -> np.ndarray:
    w, h = window
    if guard * 2 >= min(w, h):
        raise ValueError(f"guard margin {guard:g} m leaves no inner window inside {w:g} x {h:g} m")
    iw, ih = w - 2 * guard, h - 2 * guard
    nx = max(int(iw // step), 1)
    ny = max(int(ih // step), 1)
    xs = -iw / 2 + (np.arange(nx) + 0.5) * iw / nx
    ys = -ih / 2 + (np.arange(ny) + 0.5) * ih / ny
    xx, yy = np.meshgrid(xs, ys)
    return np.column_stack([xx.ravel(), yy.ravel()])


def _realization_outage(sites: SiteSet, users: np.ndarray, params: NetworkParams, seed: int, realization: int,
                        fading: str) -> float:
    shadow = ShadowingField(derive_seed(seed, realization), params.r_sc_m, params.sigma_l_db)
    q, r = tile_of(users, params.r_sc_m)
    ids = np.arange(len(sites))
    d = np.hypot(users[:, None, 0] - sites.sites[None, :, 0], users[:, None, 1] - sites.sites[None, :, 1])
    shadow_db = shadow.value_db(ids[None, :], q[:, None], r[:, None])
    power = db_to_linear(params.bs_power_dbm - pathloss_db(d, params.propagation) - shadow_db)
    serving = np.argmax(power, axis=1)
    rows = np.arange(len(users))
    s0 = power[rows, serving]
    noise = float(db_to_linear(params.noise_dbm))
    t = params.sinr_threshold
    ratio = power / s0[:, None]
    ratio[rows, serving] = 0.0
    if fading == "rayleigh":
        log_cov = -t * noise / s0 - np.log1p(t * ratio).sum(axis=1)
        outage = -np.expm1(log_cov)
    else:
        sinr = 1.0 / (ratio.sum(axis=1) + noise / s0)
        outage = (np.log2(1.0 + sinr / params.snr_gap) < params.c0_bps_hz).astype(float)
    return math.fsum(outage) / len(outage)


def siteset_outage(sites: SiteSet, params: NetworkParams, seed: int, realizations: int,
                   guard: float | None = None, grid_step: float = 50.0, fading: str = "none",
                   threads: int = 1) -> float:
    """Mean outage probability of users in the guard-shrunk window.

    Parameters
    ----------
    sites : SiteSet
    params : NetworkParams
        Propagation, powers and the rate target; shadowing blocks use ``r_sc_m``.
    seed, realizations : int
        Shadowing realizations ``0 .. realizations-1`` of ``seed``.
    guard : float, optional
        Margin (meters) removed from each window side; defaults to
        :func:`default_guard` of the site density.
    grid_step : float, default=50.0
        User grid spacing in meters.
    fading : {"none", "rayleigh"}
        ``"none"`` counts users whose SINR misses the target; ``"rayleigh"``
        averages the exact Rayleigh outage probability.
    threads : int, default=1
        Worker threads over realizations; the result does not depend on it.
    """
    if len(sites) == 0:
        raise EmptySiteSetError("site set is empty")
    if fading not in ("none", "rayleigh"):
        raise ValueError(f"fading must be 'none' or 'rayleigh', got {fading!r}")
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    guard = default_guard(sites.density) if guard is None else float(guard)
    users = user_grid(sites.window, guard, grid_step)

    def one(i):
        return _realization_outage(sites, users, params, seed, i, fading)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(one, range(realizations)))
    else:
        values = [one(i) for i in range(realizations)]
    return math.fsum(values) / len(values)


def ppp_rayleigh_outage(threshold: float) -> float:
    """Interference-limited nearest-BS outage of a PPP with Rayleigh fading, alpha = 4."""
    s = math.sqrt(threshold)
    return 1.0 - 1.0 / (1.0 + s * (math.pi / 2 - math.atan(1.0 / s)))


def sc_count_for_area(outage_probability: float, area_m2: float, r_sc: float) -> int:
    """SCs needed to cover ``outage_probability * area`` with hexagons of radius ``r_sc``."""
    check_fraction(outage_probability, "outage_probability")
    check_positive(area_m2, "area_m2")
    check_positive(r_sc, "r_sc")
    return int(math.ceil(round(outage_probability * area_m2 / (1.5 * SQRT3 * r_sc**2), 9)))


def ppp_outage(density: float, window, params: NetworkParams, seed: int, realizations: int,
               guard: float | None = None, grid_step: float = 50.0, fading: str = "none",
               threads: int = 1) -> float:
    """Mean outage over ``realizations`` independent PPP layouts.

    Layout ``i`` is ``ppp_generate(density, window, (seed, i))`` and carries
    shadowing realization ``i``; empty layouts count as full outage.
    """
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    guard = default_guard(density) if guard is None else float(guard)
    users = user_grid(window, guard, grid_step)

    def one(i):
        sites = ppp_generate(density, window, derive_seed(seed, i))
        if len(sites) == 0:
            return 1.0
        return _realization_outage(sites, users, params, seed, i, fading)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(one, range(realizations)))
    else:
        values = [one(i) for i in range(realizations)]
    return math.fsum(values) / len(values)
