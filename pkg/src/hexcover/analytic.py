"""Analytic outage areas and small-cell counts for a hexagonal macrocell.

Replacing the instantaneous interference by its polynomial bounds turns the
SIR at normalized distance ``r`` into a lognormal variable with median
``xi(r) = r^-alpha / (exp(sigma_z^2/2) * poly(r))``. The rate outage
probability (ROP) is then a normal CDF, and the outage fraction of each
association region follows from a threshold radius (A1) or from averaging the
ROP product over the candidate servers (A2, A3).

Bound naming: ``which="lower"`` always refers to the *lower outage bound*,
computed with the lower interference polynomial (i.e. the upper SIR bound);
``which="upper"`` is the pessimistic counterpart. Only :func:`sir_bound` takes
the SIR-bound name, as in the source formulation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.optimize import bisect
from scipy.special import ndtr
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_fraction, check_points, check_positive
from .interference import PolyBounds, load_or_fit
from .lattice import SQRT3, bs_positions, candidate_bs, in_hexagon, region_codes
from .propagation import PropagationParams, pathloss_db

R_OPT_CAP = 1.2
QUAD_TOL = 1e-6


class NoCoverageError(ValueError):
    """Even the point next to the BS is in outage, so no coverage disc exists."""


class QuadratureError(ArithmeticError):
    """Gauss-Legendre quadrature did not reach the requested tolerance."""


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class NetworkParams:
    """Scenario constants. Defaults follow the reference simulation setup.

    Powers are in dBm, the SNR gap in dB; ``c0_bps_hz`` is the required
    spectral efficiency per user and ``eta`` the ROP threshold that marks a
    point as being in outage.
    """

    alpha: float = 4.0
    sigma_l_db: float = 4.0
    r_ref_m: float = 1.0
    r_mc_m: float = 1000.0
    r_sc_m: float = 150.0
    gamma_g: float = 0.25
    bs_power_dbm: float = 43.0
    sc_power_dbm: float = 20.0
    noise_dbm: float = -100.0
    snr_gap_db: float = 2.0
    c0_bps_hz: float = 1.0
    eta: float = 0.5
    reuse: int = 1
    bandwidth_hz: float = 20e6
    freq_slots: int = 100
    poly_order: int = 3
    tiers: int = 2
    fit_samples: int = 101

    def __post_init__(self):
        check_fraction(self.gamma_g, "gamma_g", open_interval=True)
        check_fraction(self.eta, "eta", open_interval=True)
        check_positive(self.c0_bps_hz, "c0_bps_hz")
        check_positive(self.r_mc_m, "r_mc_m")
        check_positive(self.r_sc_m, "r_sc_m")
        if self.r_sc_m > self.r_mc_m:
            raise ValueError("r_sc_m must not exceed r_mc_m")
        if self.reuse not in (1, 7):
            raise ValueError(f"reuse must be 1 or 7, got {self.reuse!r}")
        if not self.bandwidth_hz / self.freq_slots > 0:
            raise ValueError("per-user bandwidth must be positive")
        # validates alpha, sigma and r_ref
        self.propagation  # noqa: B018

    @property
    def propagation(self) -> PropagationParams:
        return PropagationParams(self.alpha, self.sigma_l_db, self.r_ref_m)

    @property
    def sigma_z(self) -> float:
        return self.propagation.sigma_z

    @property
    def r_ref_norm(self) -> float:
        return self.r_ref_m / self.r_mc_m

    @property
    def snr_gap(self) -> float:
        return float(db_to_linear(self.snr_gap_db))

    @property
    def per_user_bandwidth_hz(self) -> float:
        return self.bandwidth_hz / self.freq_slots

    @property
    def target_rate_bps(self) -> float:
        return self.c0_bps_hz * self.per_user_bandwidth_hz

    @property
    def sinr_threshold(self) -> float:
        """Linear SINR needed to reach ``c0_bps_hz`` (with the reuse bandwidth share)."""
        return self.snr_gap * (2.0 ** (self.reuse * self.c0_bps_hz) - 1.0)

    @property
    def rho(self) -> float:
        return math.log(self.sinr_threshold)

    def replace(self, **changes) -> "NetworkParams":
        data = asdict(self)
        data.update(changes)
        return NetworkParams(**data)


def snr_threshold_db(params: NetworkParams) -> float:
    """SINR (reuse 1) or SNR (reuse 7) in dB needed for coverage."""
    return 10.0 * math.log10(params.sinr_threshold)


@dataclass(frozen=True)
class SirLognormal:
    """``SIR = xi * z`` with ``ln z ~ N(0, sigma^2)``; ``rho`` is the log threshold."""

    xi: float
    mu: float
    sigma: float
    rho: float


def _norm_cdf_step(rho, mu, sigma):
    if sigma > 0:
        return ndtr((rho - mu) / sigma)
    return np.where(rho > mu, 1.0, np.where(rho < mu, 0.0, 0.5))


def _interference_coeffs(bounds: PolyBounds, which: str) -> np.ndarray:
    return bounds.coeffs(which)


def sir_bound(r0: float, bounds: PolyBounds, params: NetworkParams, which: str) -> SirLognormal:
    """Lognormal SIR bound at normalized distance ``r0``.

    ``which`` names the SIR bound: the upper SIR bound divides by the lower
    interference polynomial and vice versa.
    """
    if not 0 < r0 <= R_OPT_CAP + 1e-12:
        raise ValueError(f"r0 must lie in (0, {R_OPT_CAP}], got {r0!r}")
    interference = {"lower": "upper", "upper": "lower"}[which]
    poly = float(np.polyval(_interference_coeffs(bounds, interference), r0))
    xi = max(params.r_ref_norm, r0) ** (-params.alpha) / (params.propagation.shadow_mean_gain * poly)
    return SirLognormal(xi=xi, mu=math.log(xi), sigma=params.sigma_z, rho=params.rho)


def rop_point(model: SirLognormal) -> float:
    """P(SIR < threshold) = Phi((rho - mu) / sigma)."""
    return float(_norm_cdf_step(model.rho, model.mu, model.sigma))


def rop_of_distance(r_norm, bounds: PolyBounds | None, params: NetworkParams, which: str) -> np.ndarray:
    """Single-server ROP as a function of the normalized distance to that server.

    Reuse 1 uses the interference-limited SIR bound; reuse 7 the noise-limited
    SNR with the 1/7 bandwidth share folded into the threshold.
    """
    r = np.asarray(r_norm, dtype=float)
    sigma = params.sigma_z
    if params.reuse == 7:
        snr_db = params.bs_power_dbm - pathloss_db(r * params.r_mc_m, params.propagation) - params.noise_dbm
        mu = np.asarray(snr_db) * (0.1 * math.log(10.0))
    else:
        poly = np.polyval(_interference_coeffs(bounds, which), r)
        mu = -params.alpha * np.log(np.maximum(params.r_ref_norm, r)) - sigma**2 / 2 - np.log(poly)
    return _norm_cdf_step(params.rho, mu, sigma)


def solve_r_opt(bounds: PolyBounds | None, params: NetworkParams, which: str) -> float:
    """Normalized radius at which the central-BS ROP equals ``eta``.

    Bisection on the fixed bracket [0, 1.2] (the ROP grows with distance), so
    the result does not depend on the macrocell radius through the bracket.
    Returns the cap 1.2 when even that distance is covered.
    """
    def excess(r):
        return float(rop_of_distance(r, bounds, params, which)) - params.eta

    if excess(params.r_ref_norm) >= 0:
        raise NoCoverageError(
            f"ROP at the reference distance already reaches eta={params.eta}; no coverage disc exists"
        )
    if excess(R_OPT_CAP) < 0:
        return R_OPT_CAP
    return float(bisect(excess, 0.0, R_OPT_CAP, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200))


def delta1(r_opt_norm: float, gamma_g: float) -> float:
    """Outage fraction of the central hexagon A1 outside the coverage disc."""
    if r_opt_norm < 0:
        raise ValueError("r_opt_norm must be non-negative")
    u = r_opt_norm / (1.0 - gamma_g)
    if u >= 1.0:
        return 0.0
    if u <= SQRT3 / 2:
        covered = math.pi / 3
    else:
        a = math.acos(SQRT3 / (2.0 * u))
        covered = math.pi / 3 - 2.0 * (a - 0.5 * math.sin(2.0 * a))
    return 1.0 - 2.0 * u * u / SQRT3 * covered


def _gauss_tensor(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def _refined(integrate, nodes: int, tol: float, what: str) -> float:
    coarse = integrate(nodes)
    fine = integrate(2 * nodes)
    if not abs(fine - coarse) <= tol:
        raise QuadratureError(
            f"{what}: Gauss-Legendre {nodes} vs {2 * nodes} nodes differ by {abs(fine - coarse):.3e} > {tol:.1e}"
        )
    return float(fine)


def _edge_strip_rop(x, y, bounds, params, which):
    """ROP product for a point at perpendicular offset ``x`` inside the edge and
    offset ``y`` along it, origin at the edge midpoint between BS0 and BS1."""
    r0 = np.hypot(SQRT3 / 2 - x, y)
    r1 = np.hypot(SQRT3 / 2 + x, y)
    return rop_of_distance(r0, bounds, params, which) * rop_of_distance(r1, bounds, params, which)


def delta2(bounds: PolyBounds | None, params: NetworkParams, which: str, nodes: int = 64,
           tol: float = QUAD_TOL) -> float:
    """Mean ROP over the edge rectangle (one twelfth of A2).

    The rectangle spans the guard width ``g = sqrt(3) gamma_g / 2`` towards
    the BS and the half edge ``b = (1 - gamma_g) / 2`` along the cell edge.
    """
    gg = params.gamma_g
    g = SQRT3 * gg / 2
    b = (1 - gg) / 2

    def integrate(n):
        t, w = _gauss_tensor(n)
        x = g * t[:, None]
        y = b * t[None, :]
        vals = _edge_strip_rop(x, y, bounds, params, which)
        return float(w @ vals @ w)

    return _refined(integrate, nodes, tol, "delta2")


def delta3(bounds: PolyBounds | None, params: NetworkParams, which: str, nodes: int = 64,
           tol: float = QUAD_TOL) -> float:
    """Mean ROP product of the three nearest BSs over the corner triangle (one
    twelfth of A3)."""
    gg = params.gamma_g
    g = SQRT3 * gg / 2
    b = (1 - gg) / 2

    def integrate(n):
        t, w = _gauss_tensor(n)
        # x in [-g, 0]; y in [b, b + (x + g)/sqrt(3)]
        x = -g + g * t[:, None]
        height = (x + g) / SQRT3
        y = b + height * t[None, :]
        r0 = np.hypot(x + SQRT3 / 2, y)
        r1 = np.hypot(x - SQRT3 / 2, y)
        r2 = np.hypot(x, 1.5 - y)
        prod = (
            rop_of_distance(r0, bounds, params, which)
            * rop_of_distance(r1, bounds, params, which)
            * rop_of_distance(r2, bounds, params, which)
        )
        integral = g * float(w @ (prod * height) @ w)
        return integral / (SQRT3 * gg**2 / 8)

    return _refined(integrate, nodes, tol, "delta3")


def delta_mc(d1: float, d2: float, d3: float, gamma_g: float) -> float:
    """Area-weighted outage fraction of the whole macrocell."""
    for name, d in (("d1", d1), ("d2", d2), ("d3", d3)):
        check_fraction(d, name)
    return d1 * (1 - gamma_g) ** 2 + 2 * d2 * gamma_g * (1 - gamma_g) + d3 * gamma_g**2


def sc_count(delta: float, r_mc: float, r_sc: float) -> int:
    """Isolated SCs needed to cover the outage area, ``ceil(delta r_mc^2 / r_sc^2)``."""
    check_fraction(delta, "delta_mc")
    check_positive(r_mc, "r_mc")
    check_positive(r_sc, "r_sc")
    # rounding guard so exact products such as 0.25 * 4 do not ceil up
    return int(math.ceil(round(delta * r_mc**2 / r_sc**2, 9)))


def analytic_rop(points, bounds: PolyBounds | None, params: NetworkParams, which: str) -> np.ndarray:
    """ROP at points (meters) using the candidate servers of each point's region."""
    p = check_points(points) / params.r_mc_m
    if not np.all(in_hexagon(p, 1.0, tol=1e-9)):
        raise ValueError("points must lie inside the macrocell")
    codes = region_codes(p, params.gamma_g)
    cand = candidate_bs(p)
    sites = bs_positions(1.0, 1)
    out = np.ones(len(p))
    for k in range(3):
        d = np.hypot(p[:, 0] - sites[cand[:, k], 0], p[:, 1] - sites[cand[:, k], 1])
        f = rop_of_distance(d, bounds, params, which)
        out *= np.where(codes > k, f, 1.0) if k > 0 else f
    return out


def rop_reuse7(point, params: NetworkParams) -> float:
    """Noise-limited ROP of a reuse-7 macrocell at ``point`` (meters).

    Shadowing-only model: the best of the region's 1-3 candidate BSs must reach
    the SNR ``Gamma (2^(7 C0) - 1)``.
    """
    if params.reuse != 7:
        raise ValueError("rop_reuse7 requires params.reuse == 7")
    return float(analytic_rop(np.asarray(point, dtype=float).reshape(1, 2), None, params, "lower")[0])


@dataclass(frozen=True)
class BoundTriple:
    lower: float
    upper: float
    avg: float


_REPORT_FIELDS = ("delta1", "delta2", "delta3", "delta_mc", "r_opt", "n_sc")


@dataclass(frozen=True)
class OutageReport:
    """Outage fractions, threshold radius and SC count for both bounds and their mean."""

    params: NetworkParams
    r_opt: BoundTriple
    delta1: BoundTriple
    delta2: BoundTriple
    delta3: BoundTriple
    delta_mc: BoundTriple
    n_sc: BoundTriple
    fit_max_rel_error: float = field(default=float("nan"))

    @staticmethod
    def csv_header() -> list[str]:
        cols = ["alpha", "sigma_l", "c0", "eta", "gamma_g", "reuse", "r_mc", "r_sc"]
        for name in _REPORT_FIELDS:
            cols += [f"{name}_l", f"{name}_u", f"{name}_avg"]
        return cols

    def csv_row(self) -> list:
        p = self.params
        row = [p.alpha, p.sigma_l_db, p.c0_bps_hz, p.eta, p.gamma_g, p.reuse, p.r_mc_m, p.r_sc_m]
        for name in _REPORT_FIELDS:
            t = getattr(self, name)
            row += [t.lower, t.upper, t.avg]
        return row

    def to_text(self) -> str:
        lines = [f"{k} = {v!r}" for k, v in asdict(self.params).items()]
        for name in _REPORT_FIELDS:
            t = getattr(self, name)
            lines += [f"{name}_l = {t.lower!r}", f"{name}_u = {t.upper!r}", f"{name}_avg = {t.avg!r}"]
        lines.append(f"fit_max_rel_error = {self.fit_max_rel_error!r}")
        return "\n".join(lines) + "\n"


def full_report(params: NetworkParams, bounds: PolyBounds | None = None, nodes: int = 64,
                cache_dir=None) -> OutageReport:
    """Threshold radii, regional outage fractions and SC counts for both bounds."""
    if params.reuse == 1 and bounds is None:
        bounds = load_or_fit(params.alpha, params.poly_order, params.tiers, params.fit_samples, cache_dir)
    per = {}
    for which in ("lower", "upper"):
        r_opt = solve_r_opt(bounds, params, which)
        d1 = delta1(r_opt, params.gamma_g)
        d2 = delta2(bounds, params, which, nodes)
        d3 = delta3(bounds, params, which, nodes)
        dmc = delta_mc(d1, d2, d3, params.gamma_g)
        per[which] = dict(r_opt=r_opt, delta1=d1, delta2=d2, delta3=d3, delta_mc=dmc,
                          n_sc=sc_count(dmc, params.r_mc_m, params.r_sc_m))
    triples = {}
    for name in ("r_opt", "delta1", "delta2", "delta3", "delta_mc"):
        lo, hi = per["lower"][name], per["upper"][name]
        triples[name] = BoundTriple(lo, hi, (lo + hi) / 2)
    dmc_avg = triples["delta_mc"].avg
    triples["n_sc"] = BoundTriple(per["lower"]["n_sc"], per["upper"]["n_sc"],
                                  sc_count(dmc_avg, params.r_mc_m, params.r_sc_m))
    err = bounds.fit_max_rel_error if bounds is not None else float("nan")
    return OutageReport(params=params, fit_max_rel_error=err, **triples)


_PARAM_NAMES = tuple(f.name for f in fields(NetworkParams))


class OutageAreaEstimator(ClassifierMixin, BaseEstimator):
    """Estimator view of the analytic outage model.

    ``fit`` fits (or loads) the interference bounds and computes the
    :class:`OutageReport`; ``predict_proba`` returns ``[P(covered), ROP]``
    for points in meters and ``predict`` flags points whose ROP exceeds
    ``eta``.

    Parameters
    ----------
    params : NetworkParams, optional
        Scenario; defaults to ``NetworkParams()``.
    bound : {"lower", "upper", "avg"}, default="avg"
        Which outage bound ``predict_proba`` reports.
    nodes : int, default=64
        Gauss-Legendre nodes per axis for the region integrals.
    """

    def __init__(self, params=None, bound="avg", nodes=64):
        self.params = params
        self.bound = bound
        self.nodes = nodes

    def _params(self) -> NetworkParams:
        return self.params if self.params is not None else NetworkParams()

    def fit(self, X=None, y=None):
        if self.bound not in ("lower", "upper", "avg"):
            raise ValueError(f"bound must be 'lower', 'upper' or 'avg', got {self.bound!r}")
        p = self._params()
        self.bounds_ = None
        if p.reuse == 1:
            self.bounds_ = load_or_fit(p.alpha, p.poly_order, p.tiers, p.fit_samples)
        self.report_ = full_report(p, self.bounds_, self.nodes)
        self.classes_ = np.array([False, True])
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "report_")
        p = self._params()
        if self.bound == "avg":
            rop = 0.5 * (analytic_rop(X, self.bounds_, p, "lower") + analytic_rop(X, self.bounds_, p, "upper"))
        else:
            rop = analytic_rop(X, self.bounds_, p, self.bound)
        return np.column_stack([1.0 - rop, rop])

    def predict(self, X):
        return self.predict_proba(X)[:, 1] > self._params().eta
