"""Hexagonal geometry for a macrocell (MC) and its neighbours.

Orientation convention used throughout the package: the central base station
sits at the origin, hexagon corners lie at angles pi/6 + k*pi/3 and edge
normals at k*pi/3. The first interferer tier therefore sits on the x axis at
distance sqrt(3) (normalized to the circumscribed radius), and the fold wedge
0 <= theta <= pi/6 runs from an edge midpoint (theta = 0) to a corner
(theta = pi/6).

Small-cell (SC) tiles and shadowing blocks share the same orientation and are
addressed by axial coordinates (q, r) with centers
``s * (sqrt(3) * (q + r / 2), 1.5 * r)`` for tile radius ``s``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

SQRT3 = float(np.sqrt(3.0))

# outward edge normals, angles k*pi/3
_EDGE_NORMALS = np.array(
    [[np.cos(k * np.pi / 3), np.sin(k * np.pi / 3)] for k in range(6)]
)
# corners of the unit hexagon, angles pi/6 + k*pi/3
_CORNERS = np.array(
    [[np.cos(np.pi / 6 + k * np.pi / 3), np.sin(np.pi / 6 + k * np.pi / 3)] for k in range(6)]
)

_EPS = 1e-9


class Region(str, enum.Enum):
    """Association region of a point inside the macrocell."""

    A1 = "A1"  # center, always served by the central BS
    A2 = "A2"  # edge strip, one of two BSs
    A3 = "A3"  # corner triangle, one of three BSs


class OutOfDomainError(ValueError):
    """A point lies outside the hexagon it was required to be in."""


@dataclass(frozen=True)
class LatticeLayout:
    """Interferer positions around the central BS.

    Attributes
    ----------
    r_mc : float
        Circumscribed macrocell radius in meters.
    tiers : int
        Number of interferer tiers.
    positions : ndarray of shape (n, 2)
        Interferer coordinates normalized to ``r_mc``, sorted by distance.
    """

    r_mc: float
    tiers: int
    positions: np.ndarray = field(repr=False)

    @property
    def distances(self) -> np.ndarray:
        return np.hypot(self.positions[:, 0], self.positions[:, 1])

    def positions_m(self) -> np.ndarray:
        return self.positions * self.r_mc


def interferer_positions(r_mc: float = 1.0, tiers: int = 2) -> LatticeLayout:
    """Return the BS sites of the first ``tiers`` rings around the origin.

    Ring ``k`` of a hexagonal lattice holds ``6k`` sites; for two tiers that is
    6 sites at sqrt(3) and 12 at 3 and 2*sqrt(3) (normalized units).
    """
    if int(tiers) != tiers or tiers < 1:
        raise ValueError(f"tiers must be a positive integer, got {tiers!r}")
    if not r_mc > 0:
        raise ValueError(f"r_mc must be positive, got {r_mc!r}")
    tiers = int(tiers)
    # lattice basis of the BS grid (spacing sqrt(3) in normalized units)
    e1 = np.array([SQRT3, 0.0])
    e2 = np.array([SQRT3 / 2, 1.5])
    pts = []
    for i in range(-tiers, tiers + 1):
        for j in range(-tiers, tiers + 1):
            # hex ring index of axial coordinate (i, j)
            ring = max(abs(i), abs(j), abs(i + j))
            if 1 <= ring <= tiers:
                pts.append(i * e1 + j * e2)
    pts = np.array(pts)
    dist = np.round(np.hypot(pts[:, 0], pts[:, 1]), 12)
    ang = np.round(np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * np.pi), 12)
    order = np.lexsort((ang, dist))
    return LatticeLayout(r_mc=float(r_mc), tiers=tiers, positions=pts[order])


def bs_positions(r_mc: float, tiers: int = 2) -> np.ndarray:
    """Central BS (id 0) followed by the interferers, in meters."""
    layout = interferer_positions(r_mc, tiers)
    return np.vstack([np.zeros((1, 2)), layout.positions_m()])


def fold_to_wedge(point) -> tuple[float, float]:
    """Map a point to polar coordinates inside the wedge 0 <= theta <= pi/6.

    Uses the six-fold rotation symmetry and the mirror symmetry about
    theta = pi/6 of the lattice; the radius is preserved exactly.
    """
    x, y = float(point[0]), float(point[1])
    r = float(np.hypot(x, y))
    if r == 0.0:
        return 0.0, 0.0
    theta = float(np.mod(np.arctan2(y, x), np.pi / 3))
    if theta > np.pi / 6:
        theta = np.pi / 3 - theta
    # guard the period seam: values a rounding error below pi/3 mean 0
    if theta < 0 or np.isclose(theta, np.pi / 3, rtol=0, atol=1e-15):
        theta = 0.0
    return r, max(theta, 0.0)


def fold_points(points) -> np.ndarray:
    """Vectorized fold; returns wedge Cartesian coordinates of shape (n, 2)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.hypot(p[:, 0], p[:, 1])
    theta = np.mod(np.arctan2(p[:, 1], p[:, 0]), np.pi / 3)
    theta = np.where(theta > np.pi / 6, np.pi / 3 - theta, theta)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def in_hexagon(points, radius: float = 1.0, center=(0.0, 0.0), tol: float = 0.0) -> np.ndarray:
    """Half-plane membership test for a hexagon of circumradius ``radius``.

    Edges with normals at 0, pi/3 and 2*pi/3 are inclusive, the opposite three
    exclusive, so that points on a shared edge of a tiling belong to exactly
    one tile. ``tol`` widens every edge (use it for "inside up to rounding").
    """
    p = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(center, dtype=float)
    proj = p @ _EDGE_NORMALS.T
    limit = radius * SQRT3 / 2
    inclusive = np.all(proj[:, :3] <= limit + tol, axis=1)
    exclusive = np.all(proj[:, 3:] < limit + tol, axis=1)
    if tol > 0:
        exclusive = np.all(proj[:, 3:] <= limit + tol, axis=1)
    return inclusive & exclusive


def hexagon_area(radius: float) -> float:
    return 1.5 * SQRT3 * radius * radius


def hexagon_corners(radius: float = 1.0, center=(0.0, 0.0)) -> np.ndarray:
    return np.asarray(center, dtype=float) + radius * _CORNERS


@dataclass(frozen=True)
class RegionPartition:
    """Split of a macrocell into the A1 / A2 / A3 association regions."""

    r_mc: float
    gamma_g: float
    g: float
    b: float
    r_a1: float
    a1: float
    a2: float
    a3: float

    @classmethod
    def from_gamma(cls, r_mc: float, gamma_g: float) -> "RegionPartition":
        if not 0.0 <= gamma_g <= 1.0:
            raise ValueError(f"gamma_g must lie in [0, 1], got {gamma_g!r}")
        if not r_mc > 0:
            raise ValueError(f"r_mc must be positive, got {r_mc!r}")
        hex_area = hexagon_area(r_mc)
        return cls(
            r_mc=float(r_mc),
            gamma_g=float(gamma_g),
            g=gamma_g * SQRT3 / 2 * r_mc,
            b=(1 - gamma_g) * r_mc / 2,
            r_a1=(1 - gamma_g) * r_mc,
            a1=hex_area * (1 - gamma_g) ** 2,
            a2=hex_area * 2 * gamma_g * (1 - gamma_g),
            a3=hex_area * gamma_g**2,
        )

    @property
    def weights(self) -> tuple[float, float, float]:
        """Area fractions of A1, A2, A3."""
        gg = self.gamma_g
        return (1 - gg) ** 2, 2 * gg * (1 - gg), gg**2


def _classify_wedge(xw: np.ndarray, yw: np.ndarray, gamma_g: float) -> np.ndarray:
    """Region codes 1/2/3 for normalized points already folded into the wedge."""
    x_edge_a1 = (1 - gamma_g) * SQRT3 / 2
    y_corner_a1 = (1 - gamma_g) / 2
    code = np.full(xw.shape, 3, dtype=np.int8)
    code[yw <= y_corner_a1 + _EPS] = 2
    code[xw <= x_edge_a1 + _EPS] = 1
    return code


def region_of(point, partition: RegionPartition) -> Region:
    """Association region of a point given in meters relative to the central BS."""
    p = np.asarray(point, dtype=float).reshape(1, 2)
    if not in_hexagon(p, partition.r_mc, tol=_EPS * partition.r_mc)[0]:
        raise OutOfDomainError(f"point {tuple(p[0])} lies outside the macrocell")
    w = fold_points(p / partition.r_mc)
    code = int(_classify_wedge(w[:, 0], w[:, 1], partition.gamma_g)[0])
    return (Region.A1, Region.A2, Region.A3)[code - 1]


def region_codes(points_norm, gamma_g: float) -> np.ndarray:
    """Vectorized region classification (1, 2, 3) for normalized points."""
    w = fold_points(points_norm)
    return _classify_wedge(w[:, 0], w[:, 1], gamma_g)


def candidate_bs(points_norm) -> np.ndarray:
    """Indices into :func:`bs_positions` of the three BSs nearest each point.

    Returned columns are ordered central BS first, then the neighbour across
    the nearest edge, then the third BS sharing the nearest corner.
    """
    p = np.atleast_2d(np.asarray(points_norm, dtype=float))
    sites = bs_positions(1.0, 1)
    d = np.hypot(p[:, None, 0] - sites[None, :, 0], p[:, None, 1] - sites[None, :, 1])
    # central BS always first, then the two nearest neighbours by distance
    order = np.argsort(d[:, 1:], axis=1, kind="stable")[:, :2] + 1
    return np.column_stack([np.zeros(len(p), dtype=int), order])


# --- axial tiling -----------------------------------------------------------

_AXIAL_NEIGHBOURS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))


def axial_to_xy(q, r, tile_radius: float) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    x = tile_radius * SQRT3 * (q + r / 2)
    y = tile_radius * 1.5 * r
    return np.stack([x, y], axis=-1)


def tile_of(points, tile_radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Axial (q, r) of the tile containing each point.

    Cube rounding gives the nearest center; points on a shared edge are then
    re-assigned with the same inclusive/exclusive rule as :func:`in_hexagon`.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    fq = (SQRT3 / 3 * p[:, 0] - p[:, 1] / 3) / tile_radius
    fr = (2.0 / 3.0 * p[:, 1]) / tile_radius
    fs = -fq - fr
    q = np.round(fq)
    r = np.round(fr)
    s = np.round(fs)
    dq, dr, ds = np.abs(q - fq), np.abs(r - fr), np.abs(s - fs)
    fix_q = (dq > dr) & (dq > ds)
    fix_r = ~fix_q & (dr > ds)
    q = np.where(fix_q, -r - s, q)
    r = np.where(fix_r, -q - s, r)
    q = q.astype(np.int64)
    r = r.astype(np.int64)
    # boundary points: pick the candidate owning the point under the tie rule
    centers = axial_to_xy(q, r, tile_radius)
    own = in_hexagon(p - centers, tile_radius)
    if not np.all(own):
        for idx in np.flatnonzero(~own):
            for dq_, dr_ in _AXIAL_NEIGHBOURS:
                qq, rr = q[idx] + dq_, r[idx] + dr_
                c = axial_to_xy(qq, rr, tile_radius)
                if in_hexagon(p[idx] - c, tile_radius)[0]:
                    q[idx], r[idx] = qq, rr
                    break
    return q, r


@dataclass(frozen=True)
class HexTiling:
    """SC-sized hexagonal tiles covering the macrocell.

    Attributes
    ----------
    r_mc, tile_radius : float
        Macrocell and tile circumscribed radii in meters.
    axial : ndarray of shape (n, 2), int
        Axial coordinates of the tiles, sorted by (r, q).
    centers : ndarray of shape (n, 2)
        Tile centers in meters.
    edge_weight : ndarray of shape (n,)
        1.0 for tiles inside the macrocell, 0.5 for tiles crossing its boundary.
    overlap : ndarray of shape (n,)
        Exact fraction of each tile's area lying inside the macrocell.
    """

    r_mc: float
    tile_radius: float
    axial: np.ndarray = field(repr=False)
    centers: np.ndarray = field(repr=False)
    edge_weight: np.ndarray = field(repr=False)
    overlap: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.axial)

    @property
    def tile_area(self) -> float:
        return hexagon_area(self.tile_radius)

    def index_of(self, q, r) -> np.ndarray:
        """Tile index for axial coordinates, -1 where the tile is not in the set."""
        lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(self.axial)}
        q = np.atleast_1d(q)
        r = np.atleast_1d(r)
        return np.array([lookup.get((int(a), int(b)), -1) for a, b in zip(q, r)], dtype=int)

    def adjacency(self, indices=None) -> dict[int, list[int]]:
        """Edge-sharing neighbours among the given tile indices (default: all)."""
        if indices is None:
            indices = range(len(self))
        chosen = {(int(self.axial[i, 0]), int(self.axial[i, 1])): int(i) for i in indices}
        adj: dict[int, list[int]] = {}
        for (q, r), i in chosen.items():
            adj[i] = sorted(
                chosen[(q + dq, r + dr)]
                for dq, dr in _AXIAL_NEIGHBOURS
                if (q + dq, r + dr) in chosen
            )
        return adj


def _clip_to_hexagon(poly: np.ndarray, radius: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon against the macrocell."""
    limit = radius * SQRT3 / 2
    out = poly
    for n in _EDGE_NORMALS:
        if len(out) == 0:
            break
        d = out @ n - limit
        kept = []
        for i in range(len(out)):
            j = (i + 1) % len(out)
            if d[i] <= 0:
                kept.append(out[i])
            if d[i] * d[j] < 0:
                kept.append(out[i] + (out[j] - out[i]) * d[i] / (d[i] - d[j]))
        out = np.array(kept).reshape(-1, 2)
    return out


def _polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def hex_tiling(r_mc: float, tile_radius: float) -> HexTiling:
    """Tile the macrocell with hexagons of radius ``tile_radius``.

    One tile is centered on the BS. Every tile overlapping the macrocell with
    positive area is kept; tiles crossing the boundary (shared with a
    neighbouring cell) carry weight 1/2.
    """
    if not tile_radius > 0:
        raise ValueError(f"tile_radius must be positive, got {tile_radius!r}")
    if not r_mc > 0:
        raise ValueError(f"r_mc must be positive, got {r_mc!r}")
    if tile_radius > r_mc * (1 + 1e-12):
        raise ValueError("tile_radius must not exceed r_mc")
    n = int(np.ceil(r_mc / tile_radius)) + 2
    qq, rr = np.meshgrid(np.arange(-2 * n, 2 * n + 1), np.arange(-n, n + 1))
    qq, rr = qq.ravel(), rr.ravel()
    centers = axial_to_xy(qq, rr, tile_radius)
    # cheap prefilter: tile can only overlap if its center is within r_mc + tile_radius
    near = np.hypot(centers[:, 0], centers[:, 1]) < r_mc + tile_radius
    qq, rr, centers = qq[near], rr[near], centers[near]
    tile_area = hexagon_area(tile_radius)
    frac = np.array(
        [_polygon_area(_clip_to_hexagon(hexagon_corners(tile_radius, c), r_mc)) / tile_area for c in centers]
    )
    keep = frac > 1e-9
    qq, rr, centers, frac = qq[keep], rr[keep], centers[keep], frac[keep]
    order = np.lexsort((qq, rr))
    qq, rr, centers, frac = qq[order], rr[order], centers[order], frac[order]
    weight = np.where(frac > 1 - 1e-9, 1.0, 0.5)
    return HexTiling(
        r_mc=float(r_mc),
        tile_radius=float(tile_radius),
        axial=np.column_stack([qq, rr]).astype(np.int64),
        centers=centers,
        edge_weight=weight,
        overlap=np.minimum(frac, 1.0),
    )


def grid_points(r_mc: float, step: float) -> np.ndarray:
    """Square evaluation grid (spacing ``step``) clipped to the macrocell."""
    if not step > 0:
        raise ValueError(f"grid step must be positive, got {step!r}")
    n = int(np.ceil(r_mc / step))
    ax = (np.arange(-n, n + 1) * step).astype(float)
    xx, yy = np.meshgrid(ax, ax)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return pts[in_hexagon(pts, r_mc)]
