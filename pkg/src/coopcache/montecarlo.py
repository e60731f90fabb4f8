"""Monte Carlo checks of the rate bound and the k-th-nearest-SBS distance law.

SBSs and users are independent Poisson processes on a square torus, so there
are no edge effects. Random streams come from numpy's PCG64, one child
stream per drop index (``SeedSequence(seed, spawn_key=(drop,))``), which keeps
every drop reproducible on its own.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .model import (
    EULER_GAMMA,
    CachePlacement,
    FileLibrary,
    NetworkParams,
    group_load,
    hit_matrix,
    optimal_bandwidth,
    spectral_profile,
    to_per_km2,
)

RNG_ALGORITHM = "PCG64"


@dataclass(frozen=True)
class SimConfig:
    region_side: float
    n_drops: int
    n_users_sampled: int
    seed: int = 0

    def __post_init__(self):
        if not self.region_side > 0:
            raise ValueError("region side must be positive")
        if self.n_drops < 1 or self.n_users_sampled < 1:
            raise ValueError("need at least one drop and one sampled user")

    @property
    def area(self):
        return self.region_side ** 2

    def check_window(self, net: NetworkParams, K=None):
        K = net.K if K is None else K
        expected = net.rho * self.area
        if expected < 50 * K:
            warnings.warn(f"window holds {expected:.0f} SBSs on average; want at least {50 * K}",
                          RuntimeWarning, stacklevel=3)


@dataclass(frozen=True, eq=False)
class Topology:
    sbs: np.ndarray
    users: np.ndarray
    side: float
    rng: np.random.Generator

    def tree(self):
        return cKDTree(self.sbs, boxsize=self.side)


def drop_rng(seed, drop_index) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(drop_index,))))


def sample_topology(net: NetworkParams, sim: SimConfig, drop_index) -> Topology:
    """One realisation of the SBS and user processes.

    The returned generator continues the drop's stream, for any further
    per-drop randomness.
    """
    rng = drop_rng(sim.seed, drop_index)
    side = float(sim.region_side)
    n_sbs = rng.poisson(net.rho * sim.area)
    sbs = rng.uniform(0.0, side, size=(n_sbs, 2))
    n_users = rng.poisson(net.lam * sim.area)
    users = rng.uniform(0.0, side, size=(n_users, 2))
    return Topology(sbs, users, side, rng)


# distance law ----------------------------------------------------------------

def mean_log_distance(rho, k):
    """Closed-form E[ln d_k] for the k-th nearest point of a PPP of density rho."""
    return -EULER_GAMMA / 2 - math.log(math.pi * rho) / 2 + sum(1 / (2 * m) for m in range(1, k))


def kth_distance_cdf(D, rho, k):
    """P(d_k <= D): at least k points inside the disc of radius D."""
    return stats.poisson.sf(k - 1, math.pi * rho * np.asarray(D, dtype=float) ** 2)


@dataclass(frozen=True)
class DistanceStats:
    k: int
    mean_log: float
    stderr: float
    analytic: float
    n: int
    ks: float

    @property
    def z(self):
        return (self.mean_log - self.analytic) / self.stderr


def _batch_stderr(per_drop):
    """Standard error of the grand mean, from drop-level means when there are enough drops."""
    per_drop = np.asarray(per_drop)
    if per_drop.shape[0] >= 2:
        means = per_drop.mean(axis=1)
        return float(means.std(ddof=1) / math.sqrt(means.size))
    flat = per_drop.ravel()
    return float(flat.std(ddof=1) / math.sqrt(flat.size))


def distance_samples(net: NetworkParams, sim: SimConfig, k_max):
    """Distances from uniformly placed test points to their k_max nearest SBSs.

    Shape ``(n_drops, n_users_sampled, k_max)``.
    """
    out = np.empty((sim.n_drops, sim.n_users_sampled, k_max))
    for d in range(sim.n_drops):
        topo = sample_topology(net, sim, d)
        if topo.sbs.shape[0] < k_max:
            raise ValueError(f"drop {d} has only {topo.sbs.shape[0]} SBSs")
        probes = topo.rng.uniform(0.0, topo.side, size=(sim.n_users_sampled, 2))
        dist, _ = topo.tree().query(probes, k=k_max)
        out[d] = dist.reshape(sim.n_users_sampled, k_max)
    return out


def kth_distance_stats(net: NetworkParams, sim: SimConfig, k, samples=None) -> DistanceStats:
    if k > net.rho * sim.area / 10:
        raise ValueError(f"window too small for k={k}: expected {net.rho * sim.area:.1f} SBSs")
    if samples is None:
        samples = distance_samples(net, sim, k)
    d = samples[..., k - 1]
    logs = np.log(d)
    ks = stats.kstest(d.ravel(), lambda x: kth_distance_cdf(x, net.rho, k)).statistic
    return DistanceStats(k, float(logs.mean()), _batch_stderr(logs), mean_log_distance(net.rho, k),
                         int(d.size), float(ks))


# rates -----------------------------------------------------------------------

@dataclass(frozen=True)
class RankRate:
    rank: int
    present: bool
    mean_bps: float
    stderr_bps: float
    bound_bps: float
    n: int
    mean_cell_load: float
    analytic_cell_load: float
    tagged_cell_load: float

    @property
    def rel_gap(self):
        return (self.mean_bps - self.bound_bps) / self.mean_bps


def rate_bound(net: NetworkParams, omega, rank):
    """Lower bound on the mean rate of rank-``rank`` users (bits/s)."""
    tau = spectral_profile(net)
    phi = optimal_bandwidth(omega, tau).phi
    w = omega.omega if hasattr(omega, "omega") else np.asarray(omega)
    return net.W * phi[rank - 1] * tau.tau[rank - 1] / w[rank - 1]


def _assign_groups(rng, n, omega, lib, placement, K, mode):
    if mode == "load":
        return rng.choice(K + 1, size=n, p=omega)
    if mode == "request":
        files = rng.choice(lib.F, size=n, p=lib.q)
        P = hit_matrix(placement.c, lib.s, K)
        u = rng.random(n)
        cum = np.cumsum(P[files], axis=1)
        return np.minimum((u[:, None] >= cum).sum(axis=1), K)
    raise ValueError(f"unknown group mode {mode!r}")


@dataclass(frozen=True, eq=False)
class RateSample:
    """Per tagged user (rows) and rank (columns) quantities from one drop.

    Columns of ranks without traffic hold NaN.
    """

    distance: np.ndarray
    sinr: np.ndarray
    cell_load: np.ndarray
    rate: np.ndarray
    sbs_load: np.ndarray  # mean background users per SBS, per rank

    @property
    def K(self):
        return self.distance.shape[1]


def drop_rates(net: NetworkParams, lib: FileLibrary, placement: CachePlacement, sim: SimConfig,
               drop_index, mode="load") -> RateSample:
    """Rates of ``sim.n_users_sampled`` tagged users in one drop.

    A tagged user at rank k shares the bandwidth share of rank k at its k-th
    nearest SBS with every background user of that rank attached there.
    ``mode='load'`` draws background ranks from the group load directly;
    ``mode='request'`` draws a file per user first and then its serving rank.
    """
    K = net.K
    omega = group_load(placement, lib, K).omega
    phi = optimal_bandwidth(omega, spectral_profile(net)).phi
    noise = net.sigma2 + np.asarray(net.I)

    topo = sample_topology(net, sim, drop_index)
    n_sbs = topo.sbs.shape[0]
    if n_sbs < K:
        raise ValueError(f"drop {drop_index} has only {n_sbs} SBSs for cluster size {K}")
    tree = topo.tree()
    groups = _assign_groups(topo.rng, topo.users.shape[0], omega, lib, placement, K, mode)
    probes = topo.rng.uniform(0.0, topo.side, size=(sim.n_users_sampled, 2))
    dist, idx = tree.query(probes, k=K)
    dist, idx = dist.reshape(-1, K), idx.reshape(-1, K)
    _, user_idx = tree.query(topo.users, k=K)
    user_idx = user_idx.reshape(-1, K)

    sinr = net.P_T * dist ** -net.alpha / noise
    load = np.full(dist.shape, np.nan)
    rate = np.full(dist.shape, np.nan)
    sbs_load = np.full(K, np.nan)
    for k in range(K):
        if omega[k] <= 0:
            continue
        counts = np.bincount(user_idx[groups == k, k], minlength=n_sbs)
        load[:, k] = 1 + counts[idx[:, k]]
        rate[:, k] = phi[k] * net.W / load[:, k] * np.log2(1 + sinr[:, k])
        sbs_load[k] = counts.mean()
    return RateSample(dist, sinr, load, rate, sbs_load)


def _drop_job(args):
    return drop_rates(*args)


def simulate_rate(net: NetworkParams, lib: FileLibrary, placement: CachePlacement, sim: SimConfig,
                  mode="load", workers=1) -> list[RankRate]:
    """Empirical mean rate per rank, with batch-means standard errors over drops."""
    K = net.K
    sim.check_window(net)
    omega = group_load(placement, lib, K).omega
    tau = spectral_profile(net)
    phi = optimal_bandwidth(omega, tau).phi

    jobs = [(net, lib, placement, sim, d, mode) for d in range(sim.n_drops)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            drops = list(pool.map(_drop_job, jobs))
    else:
        drops = [_drop_job(j) for j in jobs]

    out = []
    for k in range(K):
        rank = k + 1
        if omega[k] <= 0:
            out.append(RankRate(rank, False, math.nan, math.nan, math.nan, 0, math.nan, 0.0, math.nan))
            continue
        rates = np.stack([d.rate[:, k] for d in drops])
        out.append(RankRate(
            rank=rank,
            present=True,
            mean_bps=float(rates.mean()),
            stderr_bps=_batch_stderr(rates),
            bound_bps=float(net.W * phi[k] * tau.tau[k] / omega[k]),
            n=int(rates.size),
            mean_cell_load=float(np.mean([d.sbs_load[k] for d in drops])),
            analytic_cell_load=float(net.lam * omega[k] / net.rho),
            tagged_cell_load=float(np.mean([d.cell_load[:, k].mean() for d in drops])),
        ))
    return out


@dataclass(frozen=True)
class ValidationRow:
    lam: float
    rank: int
    simulated_bps: float
    stderr_bps: float
    bound_bps: float

    @property
    def ok(self):
        """Bound below the simulated mean up to two standard errors."""
        return self.bound_bps <= self.simulated_bps + 2 * self.stderr_bps

    @property
    def rel_gap(self):
        return (self.simulated_bps - self.bound_bps) / self.simulated_bps

    def csv(self):
        return (f"{to_per_km2(self.lam)!r},{self.rank},{self.simulated_bps!r},"
                f"{self.stderr_bps!r},{self.bound_bps!r}")


VALIDATION_HEADER = "lambda_per_km2,rank,simulated_rate_bps,stderr_bps,bound_rate_bps"


def validate_lemma1(net: NetworkParams, lib: FileLibrary, sim: SimConfig, lambda_sweep,
                    placement: CachePlacement, mode="load", workers=1) -> list[ValidationRow]:
    """Simulated versus bound rate per (user density, rank); densities in users/m^2.

    The placement, and so the group load, is held fixed across the sweep.
    Ranks with no traffic are left out.
    """
    rows = []
    for lam in sorted(lambda_sweep):
        if not lam > 0:
            raise ValueError(f"user density must be positive, got {lam!r}")
        for rr in simulate_rate(net.with_(lam=lam), lib, placement, sim, mode=mode, workers=workers):
            if rr.present:
                rows.append(ValidationRow(lam, rr.rank, rr.mean_bps, rr.stderr_bps, rr.bound_bps))
    return rows


def decreasing_in_lambda(rows, attr="simulated_bps"):
    """True if, for every rank, ``attr`` strictly falls as the user density grows."""
    by_rank = {}
    for row in rows:
        by_rank.setdefault(row.rank, []).append((row.lam, getattr(row, attr)))
    return all(all(b[1] < a[1] for a, b in zip(v, v[1:])) for v in (sorted(x) for x in by_rank.values()))
