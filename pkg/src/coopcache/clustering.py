"""Cluster-size admissibility and delay-optimal cluster size."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import FileLibrary, ModelValidityError, NetworkParams, spectral_profile
from .placement import PlacementResult, greedy_place


@dataclass(frozen=True)
class ClusterAnalysis:
    K_candidates: tuple
    admissible: tuple
    delay: tuple
    K_opt: int
    results: tuple = field(default=(), repr=False, compare=False)

    def rows(self):
        return list(zip(self.K_candidates, self.admissible, self.delay))


def with_cluster_size(net: NetworkParams, K, schedule) -> NetworkParams:
    """``net`` resized to cluster size ``K``; ``schedule`` gives I_k (W/MHz) for k = 1..>=K."""
    schedule = tuple(schedule)
    if len(schedule) < K:
        raise ValueError(f"interference schedule covers {len(schedule)} ranks, need {K}")
    return net.with_(K=K, I=schedule[:K])


def prop2_lhs(net: NetworkParams, lib: FileLibrary) -> float:
    """Worst-case spectral-efficiency penalty (seconds) of serving from rank K."""
    r = spectral_profile(net).inv_sqrt
    K = net.K
    return 2 * lib.mean_bits / net.W * r[K - 1] * (r[K - 1] - r[0])


def prop2_condition(net: NetworkParams, lib: FileLibrary) -> bool:
    return prop2_lhs(net, lib) <= net.D_BH


def max_cluster_size(net_template: NetworkParams, lib: FileLibrary, I_extension, K_limit) -> int:
    """Largest K <= K_limit passing the admissibility test (at least 1).

    A cluster size whose spectral profile is not positive counts as
    inadmissible.
    """
    best = 1
    for K in range(1, K_limit + 1):
        try:
            ok = prop2_condition(with_cluster_size(net_template, K, I_extension), lib)
        except ModelValidityError:
            ok = False
        if ok:
            best = K
    return best


def optimal_cluster_size(net_template: NetworkParams, lib: FileLibrary, C, K_range, I_extension=None,
                         place=greedy_place) -> ClusterAnalysis:
    """Run the placement for every K in ``K_range`` and keep the delay-minimal one.

    Ties resolve toward the smaller K. ``I_extension`` defaults to the
    template's own interference list held at its last value.
    """
    Ks = sorted(set(int(k) for k in K_range))
    if not Ks:
        raise ValueError("empty cluster-size range")
    if I_extension is None:
        base = list(net_template.I)
        I_extension = base + [base[-1]] * max(0, Ks[-1] - len(base))

    admissible, delays, results = [], [], []
    for K in Ks:
        net = with_cluster_size(net_template, K, I_extension)
        res: PlacementResult = place(lib, net, C)
        admissible.append(prop2_condition(net, lib))
        delays.append(res.delay.total_s)
        results.append(res)

    i = int(np.argmin(delays))
    return ClusterAnalysis(tuple(Ks), tuple(admissible), tuple(delays), Ks[i], tuple(results))
