"""Experiment runners behind the CLI. Each returns plain rows; the CLI formats them."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .clustering import max_cluster_size, optimal_cluster_size, prop2_lhs, with_cluster_size
from .config import ExperimentConfig
from .model import dbm_to_watt, per_km2
from .montecarlo import validate_lemma1
from .placement import SCHEMES, PlacementResult, place_non_cooperative


def run_map(fn, jobs, workers):
    """Ordered map over independent jobs, optionally on a process pool."""
    jobs = list(jobs)
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


# place -------------------------------------------------------------------------

def run_place(cfg: ExperimentConfig):
    lib, net = cfg.library(), cfg.network()
    return SCHEMES[cfg.scheme](lib, net, cfg.C), lib, net


# sweep -------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    value: object
    scheme: str
    hit_ratio: float
    spectral_proxy: float
    delay_s: float
    wireless_s: float
    backhaul_s: float
    omega: tuple
    tau: tuple


def _sweep_point(job):
    cfg, value = job
    point = cfg.with_sweep_value(value)
    lib, net = point.library(), point.network()
    ref = place_non_cooperative(lib, net, point.C).spectral_proxy
    rows = []
    for name in sorted(cfg.schemes):
        res: PlacementResult = SCHEMES[name](lib, net, point.C)
        rows.append(SweepRow(
            value=getattr(point, {"rho": "rho_per_km2", "lambda": "lambda_per_km2",
                                  "D_BH": "D_BH_ms"}.get(cfg.sweep_var, cfg.sweep_var)),
            scheme=name,
            hit_ratio=res.hit_ratio,
            spectral_proxy=res.spectral_proxy / ref,
            delay_s=res.delay.total_s,
            wireless_s=res.delay.wireless_s,
            backhaul_s=res.delay.backhaul_s,
            omega=tuple(float(x) for x in res.omega.omega),
            tau=tuple(float(x) for x in res.tau.tau),
        ))
    return rows


def run_sweep(cfg: ExperimentConfig):
    values = sorted(set(cfg.sweep_values))
    chunks = run_map(_sweep_point, [(cfg, v) for v in values], cfg.workers)
    return [row for chunk in chunks for row in chunk]


# cluster -----------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterRow:
    K: int
    admissible: bool
    lhs_s: float
    delay_s: float


@dataclass(frozen=True)
class BackhaulRow:
    D_BH_ms: float
    K_opt: int
    K_max: int
    delay_opt_s: float
    delay_K1_s: float
    fixed: tuple  # (K, delay_s) per candidate

    @property
    def reduction(self):
        return 1.0 - self.delay_opt_s / self.delay_K1_s


def _schedule(cfg, K_max):
    return tuple(float(x) for x in dbm_to_watt(cfg.interference_dbm(K_max)))


def _cluster_point(cfg: ExperimentConfig):
    lib = cfg.library()
    Ks = sorted(set(cfg.K_range))
    schedule = _schedule(cfg, Ks[-1])
    base = cfg.network(K=1)
    analysis = optimal_cluster_size(base, lib, cfg.C, Ks, schedule)
    delays = dict(zip(analysis.K_candidates, analysis.delay))
    if 1 not in delays:
        delays[1] = optimal_cluster_size(base, lib, cfg.C, [1], schedule).delay[0]
    return analysis, delays, lib, schedule


def run_cluster(cfg: ExperimentConfig):
    analysis, _, lib, schedule = _cluster_point(cfg)
    rows = []
    for K, ok, delay in analysis.rows():
        lhs = prop2_lhs(with_cluster_size(cfg.network(K=1), K, schedule), lib)
        rows.append(ClusterRow(K, bool(ok), float(lhs), float(delay)))
    return rows, analysis.K_opt


def _backhaul_point(job):
    cfg, D_ms = job
    point = dataclasses.replace(cfg, D_BH_ms=D_ms)
    analysis, delays, lib, schedule = _cluster_point(point)
    K_max = max_cluster_size(point.network(K=1), lib, schedule, max(point.K_range))
    return BackhaulRow(D_ms, analysis.K_opt, K_max, float(min(analysis.delay)), float(delays[1]),
                       tuple((int(k), float(d)) for k, d in zip(analysis.K_candidates, analysis.delay)))


def run_backhaul_sweep(cfg: ExperimentConfig):
    values = sorted(set(cfg.D_BH_sweep_ms))
    return run_map(_backhaul_point, [(cfg, v) for v in values], cfg.workers)


# validate ----------------------------------------------------------------------

def run_validate(cfg: ExperimentConfig):
    lib, net = cfg.library(), cfg.network()
    res = SCHEMES[cfg.scheme](lib, net, cfg.C)
    lambdas = [per_km2(x) for x in cfg.lambda_sweep_per_km2]
    return validate_lemma1(net, lib, cfg.sim(), lambdas, res.placement, mode=cfg.sim_mode, workers=cfg.workers)


def fixed_k_matrix(rows):
    """(D_BH values, K values, delay[D, K]) from a backhaul sweep."""
    Ks = [k for k, _ in rows[0].fixed]
    return ([r.D_BH_ms for r in rows], Ks, np.array([[d for _, d in r.fixed] for r in rows]))
