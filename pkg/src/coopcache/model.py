"""Closed-form delay model for cooperative coded caching over Poisson SBSs.

Ranks 1..K are the K nearest SBSs of a user; rank K+1 is the remainder that
the nearest SBS fetches over the backhaul. Vectors indexed by rank are stored
0-based, so ``omega[K]`` is the backhaul share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .popularity import Popularity

EULER_GAMMA = 0.5772156649015329
SUM_TOL = 1e-9


class ModelValidityError(ValueError):
    """Parameter set outside the high-SINR model (non-positive spectral efficiency)."""

    def __init__(self, rank, value):
        super().__init__(f"spectral efficiency at rank {rank} is {value!r} (must be > 0)")
        self.rank = rank
        self.value = value


class InfiniteDelayError(ValueError):
    """A group with traffic was given no bandwidth."""


# unit helpers -------------------------------------------------------------

def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0


def per_km2(x):
    """Density given per square kilometre, returned per square metre."""
    return x / 1e6


def to_per_km2(x):
    return x * 1e6


# parameter containers -------------------------------------------------------

@dataclass(frozen=True)
class NetworkParams:
    """Radio and topology parameters in SI-ish internal units.

    Densities are per m^2, powers are W/MHz, ``W`` is in Hz and ``D_BH`` in
    seconds. ``I`` holds one interference density per candidate rank.
    """

    rho: float
    lam: float
    P_T: float
    alpha: float
    sigma2: float
    I: tuple
    W: float
    D_BH: float
    K: int

    def __post_init__(self):
        object.__setattr__(self, "I", tuple(float(x) for x in self.I))
        if not (self.rho > 0 and self.lam > 0 and self.P_T > 0 and self.W > 0):
            raise ValueError("rho, lam, P_T and W must be positive")
        if not self.alpha > 2:
            raise ValueError(f"path-loss exponent must exceed 2, got {self.alpha!r}")
        if self.sigma2 < 0 or self.D_BH < 0:
            raise ValueError("sigma2 and D_BH must be non-negative")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"cluster size must be a positive integer, got {self.K!r}")
        if len(self.I) != self.K:
            raise ValueError(f"need exactly K={self.K} interference values, got {len(self.I)}")
        if any(x < 0 for x in self.I):
            raise ValueError("interference densities must be non-negative")
        if any(b < a for a, b in zip(self.I, self.I[1:])):
            raise ValueError("interference must be non-decreasing in rank")

    @classmethod
    def table2(cls, K=3, interference=None, **overrides):
        """Default simulation parameters (P_T read as 1 W/MHz)."""
        I_dbm = list(interference if interference is not None else (-75.0, -70.0, -68.0))
        I_dbm = extend_interference(I_dbm, K)
        params = dict(
            rho=per_km2(50.0),
            lam=per_km2(500.0),
            P_T=1.0,
            alpha=4.0,
            sigma2=float(dbm_to_watt(-105.0)),
            I=tuple(float(x) for x in dbm_to_watt(I_dbm)),
            W=10e6,
            D_BH=0.2,
            K=K,
        )
        params.update(overrides)
        return cls(**params)

    def with_(self, **changes):
        return replace(self, **changes)


def extend_interference(values, K, policy="hold"):
    """Interference list of length ``K`` from a possibly shorter base list.

    ``policy='hold'`` repeats the last value for ranks beyond the base list;
    ``policy='strict'`` refuses to extend.
    """
    values = list(values)
    if not values:
        raise ValueError("empty interference list")
    if len(values) >= K:
        return values[:K]
    if policy == "strict":
        raise ValueError(f"interference given for {len(values)} ranks, cluster size is {K}")
    if policy != "hold":
        raise ValueError(f"unknown interference extension policy {policy!r}")
    return values + [values[-1]] * (K - len(values))


@dataclass(frozen=True, eq=False)
class FileLibrary:
    popularity: Popularity
    s: np.ndarray
    L: float

    def __post_init__(self):
        s = np.asarray(self.s)
        if s.ndim == 0:
            s = np.full(self.popularity.F, int(s))
        if s.shape != (self.popularity.F,):
            raise ValueError(f"{s.size} segment counts for {self.popularity.F} files")
        if np.any(s < 1) or np.any(s != np.round(s)):
            raise ValueError("segment counts must be positive integers")
        if not self.L >= 1:
            raise ValueError(f"segment size must be >= 1 bit, got {self.L!r}")
        s = s.astype(np.int64)
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @property
    def q(self):
        return self.popularity.q

    @property
    def F(self):
        return self.popularity.F

    @property
    def mean_segments(self):
        """Popularity-weighted mean file length, in segments."""
        return float(self.q @ self.s)

    @property
    def mean_bits(self):
        return self.mean_segments * self.L

    @property
    def total_segments(self):
        return int(self.s.sum())


@dataclass(frozen=True, eq=False)
class CachePlacement:
    c: np.ndarray
    C: int

    def __post_init__(self):
        c = np.array(self.c, dtype=np.int64)
        if c.ndim != 1:
            raise ValueError("placement must be a vector")
        if np.any(c < 0):
            raise ValueError("cached segment counts must be non-negative")
        if c.sum() > self.C:
            raise ValueError(f"placement uses {c.sum()} segments, budget is {self.C}")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    def check(self, lib: FileLibrary):
        if self.c.shape != lib.s.shape:
            raise ValueError(f"placement has {self.c.size} files, library has {lib.F}")
        if np.any(self.c > lib.s):
            f = int(np.argmax(self.c > lib.s))
            raise ValueError(f"file {f} caches {self.c[f]} of {lib.s[f]} segments")

    @property
    def used(self):
        return int(self.c.sum())


@dataclass(frozen=True, eq=False)
class GroupLoad:
    omega: np.ndarray

    def __post_init__(self):
        w = np.array(self.omega, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("group load needs K+1 >= 2 entries")
        if np.any(w < 0) or np.any(w > 1):
            raise ValueError(f"group load entries must lie in [0, 1]: {w}")
        if abs(w.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"group load sums to {w.sum()!r}")
        w.setflags(write=False)
        object.__setattr__(self, "omega", w)

    @property
    def K(self):
        return self.omega.size - 1

    @property
    def hit(self):
        return float(self.omega[:-1].sum())


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    tau: np.ndarray
    gamma_EM: float = field(default=EULER_GAMMA)

    def __post_init__(self):
        t = np.array(self.tau, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("spectral profile needs K+1 >= 2 entries")
        for k, v in enumerate(t, start=1):
            if not v > 0:
                raise ModelValidityError(k, float(v))
        if t[-1] != t[0]:
            raise ValueError("backhaul rank must reuse the nearest-SBS efficiency")
        t.setflags(write=False)
        object.__setattr__(self, "tau", t)

    @property
    def K(self):
        return self.tau.size - 1

    @property
    def inv_sqrt(self):
        return 1.0 / np.sqrt(self.tau)


@dataclass(frozen=True, eq=False)
class BandwidthAllocation:
    phi: np.ndarray

    def __post_init__(self):
        p = np.array(self.phi, dtype=float)
        if np.any(p < 0) or p.sum() > 1 + SUM_TOL:
            raise ValueError(f"infeasible bandwidth split {p}")
        p.setflags(write=False)
        object.__setattr__(self, "phi", p)


@dataclass(frozen=True)
class DelayBreakdown:
    wireless_s: float
    backhaul_s: float

    @property
    def total_s(self):
        return self.wireless_s + self.backhaul_s


# operations ---------------------------------------------------------------

def hit_ratio(c, s, k, K):
    """Share of a file's segments fetched from rank ``k`` (``k = K+1``: backhaul)."""
    if not 0 <= c <= s:
        raise ValueError(f"need 0 <= c <= s, got c={c}, s={s}")
    if not 1 <= k <= K + 1:
        raise ValueError(f"rank {k} outside 1..{K + 1}")
    if k == K + 1:
        return 1 - min(K * c, s) / s
    return (min(k * c, s) - min((k - 1) * c, s)) / s


def segment_split(c, s, K):
    """Integer segment counts per rank (shape ``(..., K+1)``) for arrays c, s."""
    c = np.asarray(c, dtype=np.int64)[..., None]
    s = np.asarray(s, dtype=np.int64)[..., None]
    k = np.arange(1, K + 1)
    cum = np.minimum(k * c, s)
    prev = np.minimum((k - 1) * c, s)
    got = cum - prev
    miss = s - cum[..., -1:]
    return np.concatenate([got, miss], axis=-1)


def hit_matrix(c, s, K):
    """Row f holds the hit ratios of file f at ranks 1..K+1."""
    s = np.asarray(s, dtype=np.int64)
    return segment_split(c, s, K) / s[..., None]


def _load_from_matrix(q, P):
    omega = q @ P
    omega[-1] = 1.0 - omega[:-1].sum()
    return np.clip(omega, 0.0, 1.0)


def group_load(placement: CachePlacement, lib: FileLibrary, K: int) -> GroupLoad:
    placement.check(lib)
    return GroupLoad(_load_from_matrix(lib.q, hit_matrix(placement.c, lib.s, K)))


def tau_values(net: NetworkParams):
    """Raw spectral-efficiency coefficients for ranks 1..K (not validated)."""
    k = np.arange(1, net.K + 1)
    harmonic = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, net.K))])
    snr = net.P_T * (math.pi * net.rho) ** (net.alpha / 2) / (net.sigma2 + np.asarray(net.I))
    path = net.alpha / (2 * math.log(2)) * (EULER_GAMMA - harmonic[k - 1])
    return net.rho / net.lam * (np.log2(snr) + path)


def spectral_profile(net: NetworkParams) -> SpectralProfile:
    tau = tau_values(net)
    for k, v in enumerate(tau, start=1):
        if not v > 0:
            raise ModelValidityError(k, float(v))
    return SpectralProfile(np.append(tau, tau[0]))


def _as_omega(omega):
    return omega.omega if isinstance(omega, GroupLoad) else np.asarray(omega, dtype=float)


def _as_tau(tau):
    return tau.tau if isinstance(tau, SpectralProfile) else np.asarray(tau, dtype=float)


def optimal_bandwidth(omega, tau) -> BandwidthAllocation:
    """Delay-optimal split: proportional to omega_k / sqrt(tau_k)."""
    w, t = _as_omega(omega), _as_tau(tau)
    if w.shape != t.shape:
        raise ValueError(f"omega has {w.size} entries, tau has {t.size}")
    weights = w / np.sqrt(t)
    total = weights.sum()
    if not total > 0:
        raise ValueError("group load is all zero")
    return BandwidthAllocation(weights / total)


def wireless_factor(omega, tau):
    """sum_k omega_k / sqrt(tau_k); squared it scales the wireless delay."""
    return float(_as_omega(omega) @ (1.0 / np.sqrt(_as_tau(tau))))


def average_delay(omega, tau, lib: FileLibrary, net: NetworkParams) -> DelayBreakdown:
    """Mean delay under the optimal bandwidth split."""
    w = _as_omega(omega)
    if w.shape != _as_tau(tau).shape:
        raise ValueError("omega and tau differ in length")
    wireless = wireless_factor(w, tau) ** 2 * lib.mean_bits / net.W
    return DelayBreakdown(wireless, net.D_BH * float(w[-1]))


def delay_with_allocation(omega, tau, phi, lib: FileLibrary, net: NetworkParams) -> float:
    """Mean delay for an arbitrary bandwidth split ``phi``."""
    w, t = _as_omega(omega), _as_tau(tau)
    p = phi.phi if isinstance(phi, BandwidthAllocation) else np.asarray(phi, dtype=float)
    active = w > 0
    if np.any(p[active] <= 0):
        ranks = (np.flatnonzero(active & (p <= 0)) + 1).tolist()
        raise InfiniteDelayError(f"ranks {ranks} carry traffic but have no bandwidth")
    wireless = np.sum(w[active] ** 2 / (net.W * t[active] * p[active])) * lib.mean_bits
    return float(wireless + net.D_BH * w[-1])


def delay_gradient_wrt_omega(omega, tau, lib: FileLibrary, net: NetworkParams, k: int) -> float:
    """d(delay)/d(omega_k) for 2 <= k <= K, the extra mass taken from the backhaul share."""
    w, t = _as_omega(omega), _as_tau(tau)
    K = w.size - 1
    if not 2 <= k <= K:
        raise ValueError(f"rank {k} outside 2..{K}")
    r = 1.0 / np.sqrt(t)
    level = np.sum((r[1:K] - r[0]) * w[1:K]) + r[0]
    return 2 * lib.mean_bits / net.W * level * (r[k - 1] - r[0]) - net.D_BH


def no_cache_delay(tau, lib: FileLibrary, net: NetworkParams) -> float:
    return lib.mean_bits / (net.W * float(_as_tau(tau)[0])) + net.D_BH
