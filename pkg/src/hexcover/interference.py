"""Normalized average interference over the lattice and its polynomial bounds.

The shadowing-averaged interference at a point, normalized by the mean corner
signal ``P r_mc^-alpha exp(sigma_z^2/2)``, reduces to the pure lattice sum
``sum_k (r_k / r_mc)^-alpha``. It is largest along the ray towards the first
interferer (theta = 0) and smallest along the ray towards a corner
(theta = pi/6); cubic fits along these two rays bound it everywhere in the
cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_alpha, check_radii
from .lattice import SQRT3, LatticeLayout, OutOfDomainError, in_hexagon, interferer_positions
from .propagation import PropagationParams

EXTRAPOLATION_CAP = 1.2


class FitError(RuntimeError):
    """Polynomial fit could not be computed from the sample grid."""


def avg_norm_interference(points, alpha: float, layout: LatticeLayout | None = None):
    """Lattice sum ``sum_k |x - x_k|^-alpha`` at normalized points inside the cell.

    Parameters
    ----------
    points : array-like of shape (2,) or (n, 2)
        Coordinates normalized to the macrocell radius.
    alpha : float
        Path-loss exponent.
    layout : LatticeLayout, optional
        Interferer set; two tiers by default.
    """
    layout = layout if layout is not None else interferer_positions(1.0, 2)
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if not np.all(in_hexagon(p, 1.0, tol=1e-9)):
        raise OutOfDomainError("avg_norm_interference is defined inside the central hexagon only")
    d = np.hypot(p[:, None, 0] - layout.positions[None, :, 0], p[:, None, 1] - layout.positions[None, :, 1])
    out = np.sum(d ** (-alpha), axis=1)
    return float(out[0]) if single else out


def ray_extent(theta: float) -> float:
    """Distance from the center to the hexagon edge along ``theta`` in [0, pi/6]."""
    return (SQRT3 / 2) / math.cos(theta)


def ray_samples(samples: int, theta: float) -> np.ndarray:
    """Radii ``k / (samples - 1)`` that stay inside the cell along ``theta``."""
    r = np.arange(samples) / (samples - 1)
    return r[r <= ray_extent(theta) + 1e-12]


def ray_interference(r, theta: float, alpha: float, layout: LatticeLayout | None = None) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    pts = np.column_stack([r * math.cos(theta), r * math.sin(theta)])
    return avg_norm_interference(pts, alpha, layout)


@dataclass(frozen=True)
class PolyBounds:
    """Cubic (order ``P``) fits of the interference along the two extremal rays.

    Coefficients are stored highest power first, ``a_0 .. a_P``, so that
    ``value(r) = sum_i a_i r^(P - i)``.
    """

    alpha: float
    order: int
    lower_coeffs: tuple
    upper_coeffs: tuple
    fit_max_rel_error: float
    tiers: int = 2
    samples: int = 101

    def coeffs(self, which: str) -> np.ndarray:
        if which == "lower":
            return np.asarray(self.lower_coeffs, dtype=float)
        if which == "upper":
            return np.asarray(self.upper_coeffs, dtype=float)
        raise ValueError(f"which must be 'lower' or 'upper', got {which!r}")

    def __call__(self, r, which: str):
        return eval_bound(self, r, which)

    def to_text(self) -> str:
        """Line-based ``key = value`` record; floats are written losslessly."""
        lines = [
            f"alpha = {self.alpha!r}",
            f"order = {self.order}",
            f"tiers = {self.tiers}",
            f"samples = {self.samples}",
            "lower_coeffs = " + ", ".join(repr(float(c)) for c in self.lower_coeffs),
            "upper_coeffs = " + ", ".join(repr(float(c)) for c in self.upper_coeffs),
            f"fit_max_rel_error = {self.fit_max_rel_error!r}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PolyBounds":
        kv = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            kv[key.strip()] = value.strip()
        try:
            return cls(
                alpha=float(kv["alpha"]),
                order=int(kv["order"]),
                lower_coeffs=tuple(float(v) for v in kv["lower_coeffs"].split(",")),
                upper_coeffs=tuple(float(v) for v in kv["upper_coeffs"].split(",")),
                fit_max_rel_error=float(kv["fit_max_rel_error"]),
                tiers=int(kv.get("tiers", 2)),
                samples=int(kv.get("samples", 101)),
            )
        except KeyError as exc:
            raise ValueError(f"bounds record is missing key {exc.args[0]!r}") from None


def _fit_line(r: np.ndarray, v: np.ndarray, order: int) -> np.ndarray:
    if len(np.unique(r)) < order + 1:
        raise FitError(f"need at least {order + 1} distinct radii, got {len(np.unique(r))}")
    vander = np.vander(r, order + 1)
    coef, _, rank, _ = np.linalg.lstsq(vander, v, rcond=None)
    if rank < order + 1:
        raise FitError("rank-deficient sample grid")
    return coef


def fit_bounds(alpha: float, order: int = 3, samples: int = 101, tiers: int = 2) -> PolyBounds:
    """Least-squares polynomial bounds on the normalized average interference.

    Each ray is sampled at radii ``k / (samples - 1)`` that lie inside the
    cell: up to the corner (r = 1) for the lower bound at theta = pi/6, up to
    the edge midpoint (r = sqrt(3)/2) for the upper bound at theta = 0.
    """
    check_alpha(alpha)
    if int(order) != order or order < 1:
        raise ValueError(f"order must be a positive integer, got {order!r}")
    if samples < 4 * (order + 1):
        raise ValueError(f"samples must be >= 4*(order+1) = {4 * (order + 1)}, got {samples}")
    layout = interferer_positions(1.0, tiers)
    fits = {}
    worst = 0.0
    for which, theta in (("lower", math.pi / 6), ("upper", 0.0)):
        r = ray_samples(samples, theta)
        v = ray_interference(r, theta, alpha, layout)
        coef = _fit_line(r, v, int(order))
        worst = max(worst, float(np.max(np.abs(np.polyval(coef, r) / v - 1.0))))
        fits[which] = tuple(float(c) for c in coef)
    return PolyBounds(
        alpha=float(alpha),
        order=int(order),
        lower_coeffs=fits["lower"],
        upper_coeffs=fits["upper"],
        fit_max_rel_error=worst,
        tiers=int(tiers),
        samples=int(samples),
    )


def eval_bound(bounds: PolyBounds, r, which: str):
    """Evaluate the lower or upper polynomial at normalized radius ``r``."""
    r = check_radii(r, upper=EXTRAPOLATION_CAP)
    out = np.polyval(bounds.coeffs(which), r)
    return float(out) if np.ndim(out) == 0 else out


def denormalize(value, sigma_m_sq: float, r_mc: float, params: PropagationParams):
    """Convert normalized interference back to power, in the unit of ``sigma_m_sq``."""
    if not (sigma_m_sq > 0 and r_mc > 0):
        raise ValueError("sigma_m_sq and r_mc must be positive")
    return np.asarray(value) * sigma_m_sq * r_mc ** (-params.alpha) * params.shadow_mean_gain


def cache_path(cache_dir, alpha: float, order: int, tiers: int) -> Path:
    return Path(cache_dir) / f"bounds_alpha{alpha:g}_order{order}_tiers{tiers}.txt"


def load_or_fit(alpha: float, order: int = 3, tiers: int = 2, samples: int = 101, cache_dir=None) -> PolyBounds:
    """Read cached bounds for ``(alpha, order, tiers)`` or fit and cache them."""
    if cache_dir is None:
        return fit_bounds(alpha, order, samples, tiers)
    path = cache_path(cache_dir, alpha, order, tiers)
    if path.exists():
        bounds = PolyBounds.from_text(path.read_text())
        if bounds.samples == samples:
            return bounds
    bounds = fit_bounds(alpha, order, samples, tiers)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(bounds.to_text())
    return bounds


class InterferenceBoundRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_bounds`.

    The training set is generated from the lattice geometry, so ``fit``
    ignores ``X`` and ``y``. ``predict`` maps normalized radii to the pair
    ``[lower, upper]`` of interference bounds.

    Parameters
    ----------
    alpha : float, default=4.0
    order : int, default=3
    samples : int, default=101
        Radii per ray on the grid ``k / (samples - 1)``.
    tiers : int, default=2
    """

    def __init__(self, alpha=4.0, order=3, samples=101, tiers=2):
        self.alpha = alpha
        self.order = order
        self.samples = samples
        self.tiers = tiers

    def fit(self, X=None, y=None):
        self.bounds_ = fit_bounds(self.alpha, self.order, self.samples, self.tiers)
        self.coef_lower_ = np.asarray(self.bounds_.lower_coeffs)
        self.coef_upper_ = np.asarray(self.bounds_.upper_coeffs)
        self.fit_max_rel_error_ = self.bounds_.fit_max_rel_error
        return self

    def predict(self, X):
        check_is_fitted(self, "bounds_")
        r = check_radii(np.asarray(X, dtype=float).reshape(-1), upper=EXTRAPOLATION_CAP)
        return np.column_stack([np.polyval(self.coef_lower_, r), np.polyval(self.coef_upper_, r)])

    def score(self, X=None, y=None):
        """Negative max relative error of both fits against the lattice sums."""
        check_is_fitted(self, "bounds_")
        return -max_relative_error(self.bounds_)


def max_relative_error(bounds: PolyBounds, n_test: int = 1000) -> float:
    """Max relative deviation of both fitted curves from the direct lattice sums.

    Each curve is tested on ``n_test`` radii spanning its ray inside the cell.
    """
    layout = interferer_positions(1.0, bounds.tiers)
    worst = 0.0
    for which, theta in (("lower", math.pi / 6), ("upper", 0.0)):
        r = np.linspace(0.0, ray_extent(theta), n_test)
        exact = ray_interference(r, theta, bounds.alpha, layout)
        fitted = np.polyval(bounds.coeffs(which), r)
        worst = max(worst, float(np.max(np.abs(fitted / exact - 1.0))))
    return worst
