"""Seeded randomness and exact path-level sampling primitives.

Every draw comes from a `RandomSource`, a Philox counter-based stream keyed by
``(master_seed, stream_id)``. Each primitive consumes a fixed number of uniforms
(one for Gaussians, gaps, indices and bridge coins), so a stream's position is
fully determined by the operations applied to it.

Bridge helpers work on a Brownian bridge with volatility ``sigma`` pinned at
``a`` (time 0) and ``b`` (time ``t``). A constant drift does not change the
bridge law, so the same helpers serve drifted particles.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special, stats

from bdsim.core.errors import ParameterDomainError, require_positive

MASK64 = (1 << 64) - 1
TINY_UNIFORM = 2.0**-54
DEFAULT_CROSSING_TOL = 1e-6
SERIES_EPS = 1e-16


def splitmix64(value: int) -> int:
    """One round of the splitmix64 finalizer; used to derive stream keys."""
    z = (int(value) + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _role_key(stream_id: int, role: str) -> int:
    digest = hashlib.blake2b(f"{stream_id}:{role}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RandomSource:
    """Splittable, counter-based uniform stream.

    ``counter`` counts the uniforms consumed so far. Two sources with the same
    ``(master_seed, stream_id)`` produce bit-identical sequences on any host.
    """

    def __init__(self, master_seed: int, stream_id: int = 0):
        self.master_seed = int(master_seed) & MASK64
        self.stream_id = int(stream_id) & MASK64
        self.counter = 0
        key = (self.master_seed << 64) | self.stream_id
        self._generator = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:
        return f"RandomSource(master_seed={self.master_seed}, stream_id={self.stream_id}, counter={self.counter})"

    def uniform(self) -> float:
        self.counter += 1
        return float(self._generator.random())

    def uniforms(self, size: int) -> np.ndarray:
        self.counter += int(size)
        return self._generator.random(int(size))

    def child(self, role: str) -> "RandomSource":
        """Independent sub-stream for a named role ("bridge", "pilot", ...)."""
        return RandomSource(self.master_seed, _role_key(self.stream_id, role))

    def replicate(self, index: int) -> "RandomSource":
        """Stream of replicate ``index``; its stream_id is the replicate index itself."""
        return RandomSource(self.master_seed, index)

    def fork(self, role: str) -> "RandomSource":
        """Source under a derived master seed, so its replicate streams never meet this source's."""
        return RandomSource(splitmix64(self.master_seed ^ _role_key(self.stream_id, role)), 0)


def point_seed(master_seed: int, point_index: int) -> int:
    """Seed for sweep point ``point_index``: master_seed XOR splitmix64(index)."""
    return (int(master_seed) ^ splitmix64(point_index)) & MASK64


def open_uniforms(u: np.ndarray) -> np.ndarray:
    """Map [0, 1) draws into (0, 1) so inverse CDFs stay finite."""
    return np.where(u > 0.0, u, TINY_UNIFORM)


def standard_normals(src: RandomSource, size: int) -> np.ndarray:
    return special.ndtri(open_uniforms(src.uniforms(size)))


# ============== Scalar primitives ==============


def gaussian_increment(src: RandomSource, dt: float, sigma: float = 1.0) -> float:
    """Normal(0, sigma^2 dt) increment; consumes one uniform."""
    dt = require_positive("dt", dt)
    sigma = require_positive("sigma", sigma)
    u = src.uniform()
    return sigma * math.sqrt(dt) * float(special.ndtri(u if u > 0.0 else TINY_UNIFORM))


def gaussian_increments(src: RandomSource, dt: float, size: int, sigma: float = 1.0) -> np.ndarray:
    """Vector of ``size`` independent increments; consumes ``size`` uniforms."""
    dt = require_positive("dt", dt)
    sigma = require_positive("sigma", sigma)
    return sigma * math.sqrt(dt) * standard_normals(src, size)


def exponential_gap(src: RandomSource, rate: float) -> float:
    """Exponential(rate) waiting time; consumes one uniform."""
    rate = require_positive("rate", rate)
    return -math.log1p(-src.uniform()) / rate


def uniform_index(src: RandomSource, n: int) -> int:
    """Uniform index in ``range(n)``; consumes one uniform."""
    if n < 1:
        raise ParameterDomainError(f"n must be >= 1 (got {n})")
    return min(int(src.uniform() * n), n - 1)


# ============== Brownian bridge laws ==============


@dataclass(frozen=True, slots=True)
class BridgeQuery:
    """A Brownian bridge from ``start`` to ``end`` over ``duration`` against ``barrier``."""

    start: float
    end: float
    duration: float
    barrier: float = 0.0
    volatility: float = 1.0

    def __post_init__(self) -> None:
        require_positive("duration", self.duration)
        require_positive("volatility", self.volatility)


def crossing_probability(a: float, b: float, t: float, barrier: float = 0.0, sigma: float = 1.0) -> float:
    """P(bridge a -> b over t touches ``barrier``)."""
    da = a - barrier
    db = b - barrier
    if da * db <= 0.0:
        return 1.0
    return math.exp(-2.0 * da * db / (sigma * sigma * t))


def bridge_crosses_barrier(q: BridgeQuery, src: RandomSource) -> bool:
    """Exact crossing coin for the bridge; always consumes one uniform."""
    p = crossing_probability(q.start, q.end, q.duration, q.barrier, q.volatility)
    return src.uniform() < p


def bridge_first_crossing_time(q: BridgeQuery, src: RandomSource, tol: float = DEFAULT_CROSSING_TOL) -> float:
    """First barrier touch of a bridge already known to cross, resolved to ``tol``.

    Bisection: the midpoint of the current sub-bridge is drawn from its exact
    law, then the left half's crossing coin is flipped before the right half's.
    If neither half crosses the midpoint is redrawn, which conditions the
    midpoint on the crossing event. The search stops when the interval is no
    longer than ``tol`` and returns its left endpoint.
    """
    tol = require_positive("tol", tol)
    sigma2 = q.volatility * q.volatility
    lo, hi = 0.0, q.duration
    a, b = q.start, q.end
    c = q.barrier
    while hi - lo > tol:
        half = 0.5 * (hi - lo)
        scale = math.sqrt(sigma2 * half * 0.5)
        while True:
            u = src.uniforms(3)
            mid = 0.5 * (a + b) + scale * float(special.ndtri(u[0] if u[0] > 0.0 else TINY_UNIFORM))
            if u[1] < crossing_probability(a, mid, half, c, q.volatility):
                hi = lo + half
                b = mid
                break
            if u[2] < crossing_probability(mid, b, half, c, q.volatility):
                lo = lo + half
                a = mid
                break
    return lo


def first_crossing_time_cdf(q: BridgeQuery, s: float) -> float:
    """P(first touch <= s | the bridge touches the barrier), by quadrature.

    Joint density of (first touch at r, end at b) is the hitting density of the
    barrier times the free transition density over the remaining time.
    """
    if s <= 0.0:
        return 0.0
    if s >= q.duration:
        return 1.0
    sigma = q.volatility
    da = abs(q.start - q.barrier)
    db = q.end - q.barrier
    if da == 0.0:
        return 1.0
    free = stats.norm.pdf(q.end - q.start, scale=sigma * math.sqrt(q.duration))

    def density(r: float) -> float:
        hit = da / (sigma * math.sqrt(2.0 * math.pi * r**3)) * math.exp(-da * da / (2.0 * sigma * sigma * r))
        return hit * stats.norm.pdf(db, scale=sigma * math.sqrt(q.duration - r)) / free

    total = crossing_probability(q.start, q.end, q.duration, q.barrier, sigma)
    mass, _ = integrate.quad(density, 0.0, s, limit=200)
    return min(1.0, mass / total)


def bridge_maximum_sample(a: float, b: float, t: float, u: float, sigma: float = 1.0) -> float:
    """Exact inverse-CDF sample of max over [0, t] of the bridge a -> b."""
    u = u if u > 0.0 else TINY_UNIFORM
    gap = b - a
    return 0.5 * (a + b + math.sqrt(gap * gap - 2.0 * sigma * sigma * t * math.log(u)))


def _band_images(x: np.ndarray, y: np.ndarray, s2t: np.ndarray, w: np.ndarray) -> np.ndarray:
    # Method of images, normalised by the free bridge density; fast when sigma^2 t < w^2.
    def term(k: int) -> np.ndarray:
        kw = k * w
        return np.exp(-2.0 * kw * (kw + y - x) / s2t) - np.exp(-2.0 * (kw + y) * (kw + x) / s2t)

    total = term(0)
    for k in range(1, 64):
        step = term(k) + term(-k)
        total = total + step
        if np.all(np.abs(step) < SERIES_EPS):
            break
    return total


def _band_spectral(x: np.ndarray, y: np.ndarray, s2t: np.ndarray, w: np.ndarray) -> np.ndarray:
    # Sine expansion of the killed heat kernel; fast when sigma^2 t >= w^2.
    log_free = -((y - x) ** 2) / (2.0 * s2t) - 0.5 * np.log(2.0 * math.pi * s2t)
    total = np.zeros_like(x)
    for n in range(1, 64):
        decay = -(n * n) * math.pi**2 * s2t / (2.0 * w * w)
        step = (2.0 / w) * np.sin(n * math.pi * x / w) * np.sin(n * math.pi * y / w) * np.exp(decay - log_free)
        total = total + step
        if np.all(np.exp(decay - log_free) * (2.0 / w) < SERIES_EPS):
            break
    return total


def bridge_band_survival(x, y, t, width, sigma: float = 1.0):
    """P(bridge x -> y over t stays strictly inside (0, width)); vectorised.

    Short bridges (sigma^2 t < width^2) use the image series, long ones the
    sine expansion of the killed kernel. Endpoints outside the band give 0.
    """
    x, y, t, w = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(y, dtype=float), np.asarray(t, dtype=float), np.asarray(width, dtype=float)
    )
    shape = x.shape
    x, y, t, w = (arr.ravel() for arr in (x, y, t, w))
    inside = (x > 0.0) & (x < w) & (y > 0.0) & (y < w) & (t > 0.0)
    result = np.zeros(x.shape, dtype=float)
    if np.any(inside):
        xi, yi, wi = x[inside], y[inside], w[inside]
        s2t = sigma * sigma * t[inside]
        short = s2t < wi * wi
        values = np.empty(xi.shape, dtype=float)
        if np.any(short):
            values[short] = _band_images(xi[short], yi[short], s2t[short], wi[short])
        if np.any(~short):
            values[~short] = _band_spectral(xi[~short], yi[~short], s2t[~short], wi[~short])
        result[inside] = np.clip(values, 0.0, 1.0)
    return result.reshape(shape) if shape else float(result[0])


def abs_sup_survival(a, b, t, radius, sigma: float = 1.0):
    """P(sup over the bridge a -> b of |X| < radius); vectorised."""
    radius = np.asarray(radius, dtype=float)
    return bridge_band_survival(np.asarray(a) + radius, np.asarray(b) + radius, t, 2.0 * radius, sigma)


def bridge_abs_sup_sample(a: float, b: float, t: float, u: float, sigma: float = 1.0) -> float:
    """Inverse-CDF sample of sup |X| over the bridge a -> b, solved with brentq."""
    floor = max(abs(a), abs(b))
    if t <= 0.0 or u <= 0.0:
        return floor

    def excess(r: float) -> float:
        return float(abs_sup_survival(a, b, t, r, sigma)) - u

    # survival is exactly 0 at the floor, since an endpoint sits on the band edge
    upper = floor + sigma * math.sqrt(t)
    while excess(upper) < 0.0:
        upper = floor + 2.0 * (upper - floor)
    return float(optimize.brentq(excess, floor, upper, xtol=1e-12, rtol=1e-12))


# ============== Closed-form oracles ==============


def reflection_hit_probability(distance: float, t: float) -> float:
    """P(standard Brownian motion started at distance from a barrier touches it by t) = 2 Phi(-d / sqrt(t))."""
    if distance <= 0.0:
        return 1.0
    return float(2.0 * stats.norm.sf(distance / math.sqrt(t)))


def sup_abs_exceedance_probability(x: float, t: float) -> float:
    """P(sup_{s<=t} |B_s| >= x) for standard Brownian motion started at 0.

    Uses the image (Gaussian) series for small t/x^2 and the eigenfunction
    series otherwise; both converge quickly in their regime.
    """
    if x <= 0.0:
        return 1.0
    if t <= 0.0:
        return 0.0
    ratio = t / (x * x)
    if ratio < 1.0:
        root = math.sqrt(t)
        stay = 0.0
        for k in range(-50, 51):
            stay += (-1) ** abs(k) * (stats.norm.cdf((2 * k + 1) * x / root) - stats.norm.cdf((2 * k - 1) * x / root))
        return float(min(1.0, max(0.0, 1.0 - stay)))
    stay = 0.0
    for k in range(0, 200):
        odd = 2 * k + 1
        term = (-1) ** k / odd * math.exp(-(odd**2) * math.pi**2 * ratio / 8.0)
        stay += term
        if abs(term) < SERIES_EPS:
            break
    return float(min(1.0, max(0.0, 1.0 - 4.0 / math.pi * stay)))


__all__ = [
    "BridgeQuery",
    "DEFAULT_CROSSING_TOL",
    "RandomSource",
    "abs_sup_survival",
    "bridge_abs_sup_sample",
    "bridge_band_survival",
    "bridge_crosses_barrier",
    "bridge_first_crossing_time",
    "bridge_maximum_sample",
    "crossing_probability",
    "exponential_gap",
    "first_crossing_time_cdf",
    "gaussian_increment",
    "gaussian_increments",
    "open_uniforms",
    "point_seed",
    "reflection_hit_probability",
    "splitmix64",
    "standard_normals",
    "sup_abs_exceedance_probability",
    "uniform_index",
]
