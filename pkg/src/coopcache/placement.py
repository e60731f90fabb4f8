"""Coded content placement: marginal gains, greedy fill, baselines, exhaustive oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    BandwidthAllocation,
    CachePlacement,
    DelayBreakdown,
    FileLibrary,
    GroupLoad,
    NetworkParams,
    SpectralProfile,
    average_delay,
    hit_matrix,
    no_cache_delay,
    optimal_bandwidth,
    segment_split,
    spectral_profile,
    wireless_factor,
    _load_from_matrix,
)

BRUTE_FORCE_LIMIT = 10**7


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class DeltaDistribution:
    """Change of the group load when one more segment of a file is cached."""

    delta: tuple
    case_tag: str
    K_check: int
    K_hat: int | None

    def as_array(self):
        return np.array([float(x) for x in self.delta])


@dataclass(frozen=True, eq=False)
class PlacementResult:
    scheme: str
    placement: CachePlacement
    omega: GroupLoad
    tau: SpectralProfile
    allocation: BandwidthAllocation
    delay: DelayBreakdown
    baseline_s: float

    @property
    def objective_gain(self):
        """Delay saved relative to caching nothing (may be negative if caching hurts)."""
        return self.baseline_s - self.delay.total_s

    @property
    def hit_ratio(self):
        return self.omega.hit

    @property
    def spectral_proxy(self):
        """Effective aggregate spectral efficiency driving the wireless delay."""
        return wireless_factor(self.omega, self.tau) ** -2


def delta_distribution(c_h, s_h, q_h, K) -> DeltaDistribution:
    """Group-load change from caching segment ``c_h + 1`` of a file.

    Arithmetic stays in the numeric type of ``q_h``, so a ``Fraction`` gives
    exact results.
    """
    if not 0 <= c_h < s_h:
        raise ValueError(f"file already fully cached or bad count (c={c_h}, s={s_h})")

    def split(c):
        got = [min(k * c, s_h) - min((k - 1) * c, s_h) for k in range(1, K + 1)]
        return got + [s_h - min(K * c, s_h)]

    K_check = s_h // (c_h + 1)
    if K * (c_h + 1) <= s_h:
        unit = q_h / s_h
        return DeltaDistribution(tuple([unit] * K + [-K * unit]), "Case1", K_check, None)

    before, after = split(c_h), split(c_h + 1)
    delta = tuple(q_h * (b - a) / s_h for a, b in zip(before, after))
    K_hat = K + 1 if c_h == 0 else min(-(-s_h // c_h), K + 1)
    return DeltaDistribution(delta, "Case2", K_check, K_hat)


def _delta_rows(c, s, q, K):
    """Next-segment load change for every file (rows), float version."""
    diff = segment_split(c + 1, s, K) - segment_split(c, s, K)
    return q[:, None] * diff / s[:, None]


def marginal_gain(placement: CachePlacement, h, omega, tau, lib: FileLibrary, net: NetworkParams) -> float:
    """Delay reduction from caching one more segment of file ``h``."""
    c_h, s_h = int(placement.c[h]), int(lib.s[h])
    if c_h >= s_h:
        raise ValueError(f"file {h} is fully cached")
    w = omega.omega if isinstance(omega, GroupLoad) else np.asarray(omega, dtype=float)
    t = tau.tau if isinstance(tau, SpectralProfile) else np.asarray(tau, dtype=float)
    d = delta_distribution(c_h, s_h, float(lib.q[h]), w.size - 1).as_array()
    return _gain(w, d, 1.0 / np.sqrt(t), lib.mean_bits / net.W, net.D_BH)


def _gain(w, d, r, kappa, D):
    # D_BH (W_{K+1} - W'_{K+1}) + kappa (sum (W+W')/sqrt tau) (sum (W-W')/sqrt tau)
    return D * -d[-1] + kappa * float((2 * w + d) @ r) * float(-d @ r)


def evaluate_placement(c, lib: FileLibrary, net: NetworkParams, C=None, scheme="custom", cooperative=True,
                       tau: SpectralProfile | None = None) -> PlacementResult:
    """Group load, optimal split and delay for a given placement.

    With ``cooperative=False`` every user is served by its nearest SBS only:
    whatever the nearest cache lacks comes over the backhaul.
    """
    c = np.asarray(c, dtype=np.int64)
    placement = CachePlacement(c, int(c.sum()) if C is None else int(C))
    placement.check(lib)
    K = net.K
    tau = tau if tau is not None else spectral_profile(net)
    if cooperative:
        P = hit_matrix(c, lib.s, K)
    else:
        P1 = hit_matrix(c, lib.s, 1)
        P = np.zeros((lib.F, K + 1))
        P[:, 0], P[:, K] = P1[:, 0], P1[:, 1]
    omega = GroupLoad(_load_from_matrix(lib.q, P))
    return PlacementResult(
        scheme=scheme,
        placement=placement,
        omega=omega,
        tau=tau,
        allocation=optimal_bandwidth(omega, tau),
        delay=average_delay(omega, tau, lib, net),
        baseline_s=no_cache_delay(tau, lib, net),
    )


def _budget(C, lib):
    if C < 0:
        raise ValueError(f"cache budget must be non-negative, got {C}")
    return min(int(C), lib.total_segments)


def greedy_place(lib: FileLibrary, net: NetworkParams, C, batched=True) -> PlacementResult:
    """Fill the cache one segment at a time, always taking the largest marginal gain.

    Ties go to the lowest file index. The cache is filled to the budget even
    when the best gain is not positive. ``batched=True`` commits runs of
    identical picks at once; the result is step-for-step the same as the
    plain loop.
    """
    tau = spectral_profile(net)
    target = _budget(C, lib)
    K = net.K
    q, s = np.asarray(lib.q, dtype=float), lib.s
    r = tau.inv_sqrt
    kappa, D = lib.mean_bits / net.W, net.D_BH

    c = np.zeros(lib.F, dtype=np.int64)
    omega = np.zeros(K + 1)
    omega[K] = 1.0
    deltas = _delta_rows(c, s, q, K)
    B = deltas @ r
    m = -deltas[:, K]
    used = 0

    while used < target:
        A = float(omega @ r)
        open_ = c < s
        V = D * m - kappa * (2 * A + B) * B
        V[~open_] = -np.inf
        h = int(np.argmax(V))

        n = 1
        if batched:
            n = _batch_length(h, c, s, K, V, B, open_, A, kappa, target - used)
        for _ in range(n):
            omega += deltas[h]
        c[h] += n
        used += n
        if c[h] < s[h]:
            d = _split_diff(int(c[h]), int(s[h]), K)
            deltas[h, :K] = q[h] * np.array(d) / s[h]
            deltas[h, K] = q[h] * -sum(d) / s[h]
        else:
            deltas[h] = 0.0
        B[h] = deltas[h] @ r
        m[h] = -deltas[h, K]

    return evaluate_placement(c, lib, net, C=C, scheme="greedy", tau=tau)


def _batch_length(h, c, s, K, V, B, open_, A, kappa, room):
    """How many consecutive picks of ``h`` the plain loop would make."""
    limit = room
    # Gains are linear in A = sum omega_k / sqrt(tau_k); each pick of h moves A by B[h].
    others = open_.copy()
    others[h] = False
    if others.any():
        slope = -2 * kappa * B
        g0 = V[h] - V[others]
        rate = (slope[h] - slope[others]) * B[h]
        tol = 1e-9 * float(np.max(np.abs(V[open_])))
        falling = rate < 0
        if falling.any():
            steps = np.floor((g0[falling] - 2 * tol) / -rate[falling])
            limit = min(limit, 1 + int(max(np.min(steps), 0)))
    if limit <= 1:
        return 1
    return _constant_delta_run(int(c[h]), int(s[h]), K, limit)


def _split_diff(c, s, K):
    prev = [min(k * c, s) for k in range(K + 1)]
    nxt = [min(k * (c + 1), s) for k in range(K + 1)]
    return tuple(nxt[k] - nxt[k - 1] - prev[k] + prev[k - 1] for k in range(1, K + 1))


def _full_ranks(c, s, K):
    return K if c == 0 else min(s // c, K)


def _constant_delta_run(c_h, s_h, K, room):
    """Number of picks starting at ``c_h`` (at most ``room``) that share the same load change.

    The change depends only on how many ranks are fully covered before and
    after the pick, so a run lasts while that count stays put.
    """
    u = _full_ranks(c_h, s_h, K)
    if _full_ranks(c_h + 1, s_h, K) != u:
        return 1
    return max(1, min(room, s_h // u - c_h, s_h - c_h))


def _popularity_order(lib):
    return np.argsort(-np.asarray(lib.q), kind="stable")


def _fill(lib, C, per_file):
    c = np.zeros(lib.F, dtype=np.int64)
    left = _budget(C, lib)
    for f in _popularity_order(lib):
        if left <= 0:
            break
        take = min(int(per_file[f]), left)
        c[f] = take
        left -= take
    return c


def place_non_cooperative(lib: FileLibrary, net: NetworkParams, C) -> PlacementResult:
    """Whole files in descending popularity; users only use their nearest SBS."""
    c = _fill(lib, C, lib.s)
    return evaluate_placement(c, lib, net, C=C, scheme="noncoop", cooperative=False)


def place_hit_ratio_maximal(lib: FileLibrary, net: NetworkParams, C) -> PlacementResult:
    """ceil(s_f/K) segments per file in descending popularity, so the cluster holds whole files."""
    per_file = -(-lib.s // net.K)
    c = _fill(lib, C, per_file)
    return evaluate_placement(c, lib, net, C=C, scheme="hitmax", cooperative=net.K > 1)


def brute_force_place(lib: FileLibrary, net: NetworkParams, C, chunk=1 << 18) -> PlacementResult:
    """Exhaustive search over all placements within budget (lexicographic, first optimum wins)."""
    C = _budget(C, lib)
    K = net.K
    caps = np.minimum(lib.s, C) + 1
    size = math.prod(int(x) for x in caps)
    if size > BRUTE_FORCE_LIMIT:
        raise InstanceTooLargeError(f"{size} candidate placements exceed the limit of {BRUTE_FORCE_LIMIT}")

    tau = spectral_profile(net)
    r = tau.inv_sqrt
    kappa = lib.mean_bits / net.W
    tables = [lib.q[f] * hit_matrix(np.arange(caps[f]), np.full(caps[f], lib.s[f]), K) for f in range(lib.F)]

    best, best_c = math.inf, None
    for start in range(0, size, chunk):
        idx = np.arange(start, min(start + chunk, size))
        cs = np.stack(np.unravel_index(idx, tuple(int(x) for x in caps)), axis=1)
        ok = cs.sum(axis=1) <= C
        if not ok.any():
            continue
        cs = cs[ok]
        omega = sum(tables[f][cs[:, f]] for f in range(lib.F))
        omega[:, K] = 1.0 - omega[:, :K].sum(axis=1)
        delay = (omega @ r) ** 2 * kappa + net.D_BH * omega[:, K]
        i = int(np.argmin(delay))
        if delay[i] < best:
            best, best_c = float(delay[i]), cs[i]

    return evaluate_placement(best_c, lib, net, C=C, scheme="bruteforce", tau=tau)


SCHEMES = {
    "greedy": greedy_place,
    "noncoop": place_non_cooperative,
    "hitmax": place_hit_ratio_maximal,
}


def write_placement(result: PlacementResult, lib: FileLibrary, fh):
    """Rows ``file_id,c_f,s_f,q_f``."""
    ids = lib.popularity.ids or tuple(str(i + 1) for i in range(lib.F))
    fh.write("file_id,c_f,s_f,q_f\n")
    for ident, c, s, q in zip(ids, result.placement.c, lib.s, lib.q):
        fh.write(f"{ident},{int(c)},{int(s)},{float(q)!r}\n")
