"""Worst-case channel search, security-region maps and rate sweeps.

Only the P quadrature is modulated, so Alice and Bob can estimate T_P but
never T_Q; the amplitude-quadrature transmission is bounded solely by the
requirement that the joint trusted state stays physical.  Security analysis
therefore minimises the rate over the physically allowed T_Q interval.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import protocol
from .errors import CVQKDError, UnphysicalStateError
from .gaussian import PHYSICALITY_RTOL, is_physical
from .protocol import ChannelParams, KeyRateResult, ProtocolConfig, SourceParams

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0

# Inward shrink of interval endpoints before rate evaluation, avoiding
# clamped-spectrum artifacts exactly on the physicality boundary.
_EDGE_SHRINK = 1e-9


def loss_db_to_transmission(loss_db: float) -> float:
    return float(10.0 ** (-loss_db / 10.0))


def transmission_to_loss_db(t: float) -> float:
    return float(-10.0 * np.log10(t))


@dataclass(frozen=True)
class WorstCaseResult:
    """Outcome of the T_Q minimisation."""

    t_q_star: float
    rate_at_star: float
    boundary_hit: bool


@dataclass(frozen=True)
class RegionMap:
    """Key rate over a (T_P, T_Q) grid; rate is NaN where unphysical."""

    grid_t_p: np.ndarray
    grid_t_q: np.ndarray
    rate: np.ndarray
    physical: np.ndarray


@dataclass(frozen=True)
class OptimizeResult:
    """1-D parameter optimisation outcome."""

    argmax: float
    rate: float
    boundary_hit: bool
    unimodal: bool


@dataclass(frozen=True)
class SweepPoint:
    loss_db: float
    distance_km: float
    mu: float
    rate: float


def physical_t_q_interval(source: SourceParams, t_p: float, w_p: float, w_q: float,
                          bisect_tol: float = 1e-6,
                          phys_tol: float = 1e-9):
    """Largest T_Q interval keeping the post-channel state physical.

    T_Q = T_P is always allowed (it is a genuine quadrature-symmetric
    channel acting on a physical state) and serves as the seed; each side is
    then located by bisection to `bisect_tol`.  Returns (lo, hi), or None
    when even the seed fails the physicality test.
    """
    prepared = protocol.build_prepared_state(source)

    def physical(t_q):
        g = protocol.propagate_channel(
            prepared, ChannelParams(t_p=t_p, t_q=t_q, w_p=w_p, w_q=w_q))
        return is_physical(g, tol=phys_tol, rtol=PHYSICALITY_RTOL)

    if not physical(t_p):
        return None
    if physical(0.0):
        lo = 0.0
    else:
        a, b = 0.0, t_p
        while b - a > bisect_tol:
            m = 0.5 * (a + b)
            if physical(m):
                b = m
            else:
                a = m
        lo = b
    if physical(1.0):
        hi = 1.0
    else:
        a, b = t_p, 1.0
        while b - a > bisect_tol:
            m = 0.5 * (a + b)
            if physical(m):
                a = m
            else:
                b = m
        hi = a
    return lo, hi


def worst_case_rate(source: SourceParams, t_p: float, w_p: float, w_q: float,
                    config: ProtocolConfig, grid_points: int = 201,
                    refine_tol: float = 1e-6) -> WorstCaseResult:
    """Minimise the key rate over the physically allowed T_Q.

    Coarse scan on `grid_points` samples of the interval followed by
    golden-section refinement of the best bracket to `refine_tol`; ties
    break toward smaller T_Q (the more pessimistic channel).  Endpoints are
    shrunk inward by 1e-9 before evaluation.
    """
    if config.modulation != "single":
        raise ValueError("worst-case T_Q search applies to single-quadrature modulation")
    interval = physical_t_q_interval(source, t_p, w_p, w_q)
    if interval is None:
        raise UnphysicalStateError(
            f"empty physical T_Q interval at T_P={t_p}, W_P={w_p}, W_Q={w_q}")
    shrink = min(_EDGE_SHRINK, 0.5 * (interval[1] - interval[0]))
    lo = interval[0] + shrink
    hi = interval[1] - shrink

    prepared = protocol.build_prepared_state(source)
    dummy = protocol.solve_dummy_params(source)

    def rate(t_q):
        channel = ChannelParams(t_p=t_p, t_q=t_q, w_p=w_p, w_q=w_q)
        # the physicality slack can admit hairline-unphysical points right
        # at the interval edge whose spectra dip below the vacuum window;
        # they are not part of the searchable set
        try:
            return protocol.rate_from_prepared(
                prepared, source, channel, config, dummy=dummy).rate
        except ValueError:
            return np.inf

    if hi - lo <= refine_tol:
        t_star = lo
        r_star = rate(t_star)
    else:
        grid = np.linspace(lo, hi, grid_points)
        rates = np.array([rate(t) for t in grid])
        i = int(np.argmin(rates))  # first minimum = smallest T_Q on ties
        a = grid[max(i - 1, 0)]
        b = grid[min(i + 1, grid_points - 1)]
        t_star, r_star = _golden_min(rate, a, b, refine_tol)
        if rates[i] < r_star:
            t_star, r_star = float(grid[i]), float(rates[i])
    if not np.isfinite(r_star):
        raise UnphysicalStateError(
            f"no evaluable T_Q point inside the physical interval at T_P={t_p}")
    near = max(10.0 * refine_tol, 1e-5)
    return WorstCaseResult(
        t_q_star=float(t_star),
        rate_at_star=float(r_star),
        boundary_hit=bool(t_star - lo <= near or hi - t_star <= near),
    )


def map_region(source: SourceParams, w_p: float, w_q: float, config: ProtocolConfig,
               grid_t_p=None, grid_t_q=None, n: int = 201) -> RegionMap:
    """Evaluate the key rate over the physical subset of a (T_P, T_Q) grid."""
    grid_t_p = np.linspace(0.0, 1.0, n) if grid_t_p is None else np.asarray(grid_t_p, dtype=float)
    grid_t_q = np.linspace(0.0, 1.0, n) if grid_t_q is None else np.asarray(grid_t_q, dtype=float)
    for g in (grid_t_p, grid_t_q):
        if g.ndim != 1 or len(g) < 2 or np.any(np.diff(g) <= 0):
            raise ValueError("grids must be strictly increasing 1-D arrays")

    single = config.modulation == "single"
    if single:
        prepared = protocol.build_prepared_state(source)
        dummy = protocol.solve_dummy_params(source)

    rate = np.full((len(grid_t_p), len(grid_t_q)), np.nan)
    physical = np.zeros_like(rate, dtype=bool)
    for i, t_p in enumerate(grid_t_p):
        for j, t_q in enumerate(grid_t_q):
            channel = ChannelParams(t_p=float(t_p), t_q=float(t_q), w_p=w_p, w_q=w_q)
            if single:
                g = protocol.propagate_channel(prepared, channel)
            else:
                g = protocol.propagate_channel(
                    protocol.gaussian.epr_covariance(source.mu), channel)
            if not is_physical(g, rtol=PHYSICALITY_RTOL):
                continue
            try:
                if single:
                    r = protocol.rate_from_prepared(
                        prepared, source, channel, config, dummy=dummy).rate
                else:
                    r = protocol.dual_quadrature_key_rate(source, channel, config).rate
            except ValueError:
                continue  # hairline boundary cell, kept out of the mask
            physical[i, j] = True
            rate[i, j] = r
    return RegionMap(grid_t_p=grid_t_p, grid_t_q=grid_t_q, rate=rate, physical=physical)


def _rate_at_loss(source: SourceParams, loss_db: float, w_p: float, w_q: float,
                  config: ProtocolConfig) -> float:
    """Worst-case rate for single modulation, symmetric-channel rate for dual."""
    t = loss_db_to_transmission(loss_db)
    if config.modulation == "dual":
        channel = ChannelParams(t_p=t, t_q=t, w_p=w_p, w_q=w_q)
        return protocol.dual_quadrature_key_rate(source, channel, config).rate
    return worst_case_rate(source, t, w_p, w_q, config).rate_at_star


def _scan_and_refine(f, grid, refine_tol: float) -> OptimizeResult:
    """Maximise f over grid samples plus golden-section refinement.

    Evaluation failures count as -inf.  Non-unimodality is flagged when the
    coarse scan shows a second local maximum within 1e-6 bits of the best,
    in which case the refinement still runs around the global coarse
    maximum.
    """
    vals = np.array([_safe_rate(f, x) for x in grid])
    if not np.isfinite(vals).any():
        raise CVQKDError("optimisation target failed everywhere on the scan grid")
    i = int(np.nanargmax(np.where(np.isfinite(vals), vals, -np.inf)))
    unimodal = _secondary_peaks(vals, i) == 0
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    if b > a:
        x, fx = _golden_min(lambda v: -_safe_rate(f, v), a, b,
                            refine_tol * max(1.0, abs(b)))
        fx = -fx
    else:
        x, fx = float(grid[i]), float(vals[i])
    if vals[i] > fx:
        x, fx = float(grid[i]), float(vals[i])
    boundary = i == 0 or i == len(grid) - 1
    return OptimizeResult(argmax=float(x), rate=float(fx),
                          boundary_hit=bool(boundary), unimodal=bool(unimodal))


def optimize_mu(loss_db: float, w_p: float, w_q: float, config: ProtocolConfig,
                source_template: SourceParams,
                bounds=(1.0001, 10000.0), coarse_points: int = 48,
                refine_tol: float = 1e-4) -> OptimizeResult:
    """Modulation variance maximising the worst-case rate at a given loss.

    Log-spaced coarse scan over `bounds` with golden-section refinement;
    the rate is unimodal in mu on all tested grids, and a non-unimodal scan
    is flagged in the result rather than raised.
    """
    grid = np.geomspace(bounds[0], bounds[1], coarse_points)

    def f(mu):
        return _rate_at_loss(replace(source_template, mu=float(mu)),
                             loss_db, w_p, w_q, config)

    return _scan_and_refine(f, grid, refine_tol)


def optimize_kappa_p(loss_db: float, w_p: float, w_q: float, config: ProtocolConfig,
                     source_template: SourceParams,
                     bounds=(0.0, 50.0), coarse_points: int = 48,
                     refine_tol: float = 1e-4) -> OptimizeResult:
    """Preparation-noise level in P maximising the rate at a given loss."""
    grid = np.linspace(bounds[0], bounds[1], coarse_points)

    def f(kappa_p):
        return _rate_at_loss(replace(source_template, kappa_p=float(kappa_p)),
                             loss_db, w_p, w_q, config)

    return _scan_and_refine(f, grid, refine_tol)


def sweep_loss(loss_grid_db, source: SourceParams, w_p: float, w_q: float,
               config: ProtocolConfig, db_per_km: float = 0.2,
               optimize_modulation: bool = False, mu_bounds=(1.0001, 10000.0)):
    """Worst-case rate per loss point, with the fibre-distance conversion.

    Returns a list of SweepPoint rows.  With optimize_modulation=True the
    modulation variance is re-optimised at every loss value.
    """
    points = []
    for loss_db in loss_grid_db:
        loss_db = float(loss_db)
        if optimize_modulation:
            opt = optimize_mu(loss_db, w_p, w_q, config, source, bounds=mu_bounds)
            mu, rate = opt.argmax, opt.rate
        else:
            mu = source.mu
            rate = _rate_at_loss(source, loss_db, w_p, w_q, config)
        points.append(SweepPoint(loss_db=loss_db, distance_km=loss_db / db_per_km,
                                 mu=mu, rate=rate))
    return points


def zero_crossing_db(points) -> float | None:
    """Loss (dB) where the swept rate first crosses from positive to <= 0,
    linearly interpolated; None if the sweep never crosses."""
    for prev, cur in zip(points, points[1:]):
        if prev.rate > 0.0 >= cur.rate:
            frac = prev.rate / (prev.rate - cur.rate)
            return prev.loss_db + frac * (cur.loss_db - prev.loss_db)
    return None


def _safe_rate(f, x) -> float:
    try:
        return float(f(x))
    except CVQKDError:
        return float("-inf")


def _secondary_peaks(vals: np.ndarray, best: int, depth: float = 1e-6) -> int:
    """Count local maxima separated from the global one by a valley deeper
    than `depth` bits; zero means the scan looks unimodal."""
    count = 0
    for k in range(1, len(vals) - 1):
        if k == best or not np.isfinite(vals[k]):
            continue
        if vals[k] < vals[k - 1] or vals[k] < vals[k + 1]:
            continue
        lo_idx, hi_idx = sorted((k, best))
        between = vals[lo_idx:hi_idx + 1]
        between = between[np.isfinite(between)]
        if between.size and vals[k] - between.min() > depth:
            count += 1
    return count


def _golden_min(f, a: float, b: float, tol: float):
    """Golden-section minimum of f on [a, b]; ties keep the left interval."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return float(x), float(f(x))
