"""Path loss, block lognormal shadowing and Rayleigh fading.

Shadowing is piecewise constant over hexagonal blocks (the SC tiling) and
independent across blocks and transmitters. Every block value is a pure
function of ``(seed, transmitter id, q, r)`` through :func:`mix64`, so a field
never needs to be stored to be reproduced and lookups may happen in any order.

Seed mixer
----------
``splitmix64(x)``::

    z = x + 0x9E3779B97F4A7C15                      (mod 2**64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9        (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB        (mod 2**64)
    return z ^ (z >> 31)

``mix64(a0, a1, ..., an)`` starts from ``h = splitmix64(a0)`` and folds each
further argument as ``h = splitmix64(h ^ ai)``, integers taken modulo 2**64
(two's complement for negatives). A block value is drawn from
``h = mix64(seed, tx, q, r)``: ``u1 = ((h >> 11) + 1) / 2**53`` and
``u2 = (splitmix64(h) >> 11) / 2**53``, then the Box-Muller normal
``sqrt(-2 ln u1) * cos(2 pi u2)`` scaled by ``sigma_l_db``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import HexTiling, tile_of

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 2.0**-53

DB_LN = 0.1 * np.log(10.0)


def _u64(x) -> np.ndarray:
    a = np.asarray(x)
    if a.dtype == np.uint64:
        return a
    return a.astype(np.int64).astype(np.uint64)


def splitmix64(x) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = _u64(x) + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def mix64(*parts) -> np.ndarray:
    """Hash integer arguments (scalars or broadcastable arrays) to uint64."""
    h = splitmix64(parts[0])
    for p in parts[1:]:
        h = splitmix64(h ^ _u64(p))
    return h


def derive_seed(*parts) -> int:
    """Scalar :func:`mix64` as a Python int, for seeding numpy generators."""
    return int(mix64(*[np.uint64(p % 2**64) if isinstance(p, int) else p for p in parts]))


def hash_normal(h: np.ndarray) -> np.ndarray:
    """Standard normal variates from uint64 hashes (Box-Muller, cosine branch)."""
    h2 = splitmix64(h)
    u1 = ((h >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_M53
    u2 = (h2 >> np.uint64(11)).astype(np.float64) * _TWO_M53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@dataclass(frozen=True)
class PropagationParams:
    """Large-scale channel parameters.

    Attributes
    ----------
    alpha : float
        Path-loss exponent, > 2.
    sigma_l_db : float
        Shadowing standard deviation in dB.
    r_ref : float
        Close-in reference distance in meters; path loss is flat below it.
    """

    alpha: float = 4.0
    sigma_l_db: float = 4.0
    r_ref: float = 1.0

    def __post_init__(self):
        if not self.alpha > 2:
            raise ValueError(f"alpha must exceed 2, got {self.alpha!r}")
        if not self.sigma_l_db >= 0:
            raise ValueError(f"sigma_l_db must be non-negative, got {self.sigma_l_db!r}")
        if not self.r_ref > 0:
            raise ValueError(f"r_ref must be positive, got {self.r_ref!r}")

    @property
    def sigma_z(self) -> float:
        """Shadowing std in natural-log units."""
        return DB_LN * self.sigma_l_db

    @property
    def shadow_mean_gain(self) -> float:
        """E[10**(-L/10)] = exp(sigma_z**2 / 2)."""
        return float(np.exp(self.sigma_z**2 / 2))


def pathloss_db(r, params: PropagationParams):
    """Close-in path loss ``10 alpha log10(max(r_ref, r))`` in dB."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be non-negative")
    out = 10.0 * params.alpha * np.log10(np.maximum(params.r_ref, r))
    return float(out) if out.ndim == 0 else out


def channel_power(r, shadow_db, fading_power, params: PropagationParams):
    """Received channel power gain ``|g|^2 10^(-(PL(r) + L)/10)``."""
    fading_power = np.asarray(fading_power, dtype=float)
    if np.any(fading_power < 0):
        raise ValueError("fading power must be non-negative")
    out = fading_power * 10.0 ** (-(np.asarray(pathloss_db(r, params)) + np.asarray(shadow_db, dtype=float)) / 10.0)
    return float(out) if np.ndim(out) == 0 else out


def rayleigh_power(rng: np.random.Generator, size) -> np.ndarray:
    """|g|^2 for g ~ CN(0, 1), i.e. unit-mean exponential draws."""
    return rng.standard_exponential(size)


@dataclass(frozen=True)
class LinkSample:
    distance: float
    shadow_db: float
    fading_power: float
    power_linear: float

    @classmethod
    def draw(cls, distance: float, shadow_db: float, fading_power: float, params: PropagationParams) -> "LinkSample":
        return cls(distance, shadow_db, fading_power, channel_power(distance, shadow_db, fading_power, params))


class ShadowingField:
    """Block shadowing realization over a hexagonal grid of radius ``tile_radius``.

    Values are generated on demand by hashing; ``values`` holds a materialized
    table for the transmitters and tiles given to :func:`sample_field`.
    """

    def __init__(self, seed: int, tile_radius: float, sigma_l_db: float, tiling: HexTiling | None = None,
                 transmitters: int = 0):
        if not tile_radius > 0:
            raise ValueError("tile_radius must be positive")
        self.seed = int(seed) % 2**64
        self.tile_radius = float(tile_radius)
        self.sigma_l_db = float(sigma_l_db)
        self.tiling = tiling
        self.transmitters = int(transmitters)
        self.values = None
        if tiling is not None and transmitters > 0:
            tx = np.arange(transmitters)[:, None]
            self.values = self.value_db(tx, tiling.axial[None, :, 0], tiling.axial[None, :, 1])

    def value_db(self, tx, q, r) -> np.ndarray:
        """Shadowing in dB for transmitter ``tx`` in tile ``(q, r)`` (broadcasting)."""
        if self.sigma_l_db == 0.0:
            return np.zeros(np.broadcast_shapes(np.shape(tx), np.shape(q), np.shape(r)))
        h = mix64(np.uint64(self.seed), tx, q, r)
        return self.sigma_l_db * hash_normal(h)

    def at_points(self, tx, points) -> np.ndarray:
        """Shadowing (dB) seen by each point from each transmitter, shape (n_points, n_tx)."""
        q, r = tile_of(points, self.tile_radius)
        tx = np.atleast_1d(np.asarray(tx))
        return self.value_db(tx[None, :], q[:, None], r[:, None])

    def to_csv(self, path, transmitters=None, tiling: HexTiling | None = None) -> None:
        """Write ``transmitter_id,tile_q,tile_r,value_db`` rows."""
        tiling = tiling if tiling is not None else self.tiling
        if tiling is None:
            raise ValueError("a tiling is required to export a field")
        if transmitters is None:
            transmitters = range(self.transmitters)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["transmitter_id", "tile_q", "tile_r", "value_db"])
            for t in transmitters:
                vals = self.value_db(int(t), tiling.axial[:, 0], tiling.axial[:, 1])
                for (q, r), v in zip(tiling.axial, np.atleast_1d(vals)):
                    w.writerow([int(t), int(q), int(r), repr(float(v))])


def read_field_csv(path) -> dict[tuple[int, int, int], float]:
    """Load an exported field as ``{(tx, q, r): value_db}``."""
    out = {}
    with open(Path(path), newline="") as fh:
        for row in csv.DictReader(fh):
            out[(int(row["transmitter_id"]), int(row["tile_q"]), int(row["tile_r"]))] = float(row["value_db"])
    return out


def sample_field(seed: int, tiling: HexTiling, transmitters: int, params: PropagationParams) -> ShadowingField:
    """Materialize a shadowing field for ``transmitters`` over ``tiling``."""
    if transmitters < 1:
        raise ValueError("transmitters must be >= 1")
    return ShadowingField(seed, tiling.tile_radius, params.sigma_l_db, tiling=tiling, transmitters=transmitters)
