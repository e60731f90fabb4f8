import math
import warnings

import numpy as np
import pytest

from coopcache.model import EULER_GAMMA, CachePlacement, NetworkParams, per_km2
from coopcache.montecarlo import (
    SimConfig,
    decreasing_in_lambda,
    distance_samples,
    drop_rates,
    kth_distance_cdf,
    kth_distance_stats,
    mean_log_distance,
    rate_bound,
    sample_topology,
    simulate_rate,
    validate_lemma1,
)
from oracles import small_library


@pytest.fixture
def small_lib():
    return small_library([5, 3, 2], [10, 10, 10])


def test_sbs_count_is_poisson_mean(net3):
    sim = SimConfig(math.sqrt(100 / net3.rho), 1000, 1, seed=1)
    counts = [sample_topology(net3, sim, d).sbs.shape[0] for d in range(1000)]
    assert 97 <= np.mean(counts) <= 103
    users = [sample_topology(net3, sim, d).users.shape[0] for d in range(200)]
    assert np.mean(users) == pytest.approx(1000, rel=0.03)


def test_topology_is_seeded(net3):
    sim = SimConfig(1500.0, 3, 10, seed=42)
    a, b = sample_topology(net3, sim, 2), sample_topology(net3, sim, 2)
    assert np.array_equal(a.sbs, b.sbs) and np.array_equal(a.users, b.users)
    c = sample_topology(net3, SimConfig(1500.0, 3, 10, seed=43), 2)
    assert not np.array_equal(a.sbs, c.sbs)
    assert not np.array_equal(a.sbs, sample_topology(net3, sim, 1).sbs)


def test_users_independent_of_sbs(net3):
    """Cross-pair counts within radius r match the independent-process expectation."""
    sim = SimConfig(1500.0, 200, 1, seed=9)
    r = 60.0
    counts, expected = [], []
    for d in range(sim.n_drops):
        topo = sample_topology(net3, sim, d)
        tree = topo.tree()
        counts.append(sum(len(x) for x in tree.query_ball_point(topo.users, r)))
        expected.append(topo.users.shape[0] * topo.sbs.shape[0] * math.pi * r**2 / sim.area)
    ratio = np.array(counts) / np.array(expected)
    se = ratio.std(ddof=1) / math.sqrt(ratio.size)
    assert abs(ratio.mean() - 1) < 3 * se


def test_small_window_warns(net3, small_lib):
    sim = SimConfig(400.0, 1, 5, seed=0)
    with pytest.warns(RuntimeWarning):
        sim.check_window(net3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        SimConfig(2000.0, 1, 5).check_window(net3)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(100.0, 0, 5)
    with pytest.raises(ValueError):
        SimConfig(-1.0, 1, 5)


# distances ----------------------------------------------------------------------

def test_analytic_mean_log_distance():
    rho = 5e-5
    assert mean_log_distance(rho, 1) == pytest.approx(-0.5 * EULER_GAMMA - 0.5 * math.log(math.pi * rho))
    assert mean_log_distance(rho, 2) - mean_log_distance(rho, 1) == pytest.approx(0.5)
    assert mean_log_distance(rho, 4) - mean_log_distance(rho, 3) == pytest.approx(1 / 6)


def test_kth_cdf_first_neighbour():
    D = np.array([10.0, 50.0, 200.0])
    assert kth_distance_cdf(D, 5e-5, 1) == pytest.approx(1 - np.exp(-math.pi * 5e-5 * D**2))


def test_distance_law(net3):
    sim = SimConfig(2000.0, 100, 100, seed=3)
    samples = distance_samples(net3, sim, 4)
    assert np.all(np.diff(samples, axis=-1) >= 0)
    for k in range(1, 5):
        st = kth_distance_stats(net3, sim, k, samples)
        assert st.n == 10_000
        assert abs(st.mean_log - st.analytic) <= 3 * st.stderr
    assert kth_distance_stats(net3, sim, 1, samples).ks < 0.02


def test_distance_law_window_check(net3):
    with pytest.raises(ValueError, match="window too small"):
        kth_distance_stats(net3, SimConfig(300.0, 2, 5), 2)


# rates --------------------------------------------------------------------------

def test_sample_fields(net3, small_lib):
    sim = SimConfig(1500.0, 1, 200, seed=5)
    placement = CachePlacement(np.array([5, 2, 0]), 7)
    s = drop_rates(net3, small_lib, placement, sim, 0)
    assert s.K == 3
    assert np.all(np.diff(s.distance, axis=1) >= 0)
    noise = net3.sigma2 + np.array(net3.I)
    assert np.array_equal(s.sinr, net3.P_T * s.distance ** -net3.alpha / noise)
    assert np.all(s.cell_load >= 1)
    assert np.all(s.cell_load == np.round(s.cell_load))
    assert np.all(s.rate > 0)


def test_fully_cached_single_rank(small_lib):
    net = NetworkParams.table2(K=1)
    full = CachePlacement(small_lib.s.copy(), int(small_lib.s.sum()))
    rows = simulate_rate(net, small_lib, full, SimConfig(1500.0, 3, 50))
    assert [r.rank for r in rows if r.present] == [1]
    net2 = NetworkParams.table2(K=2)
    rows2 = simulate_rate(net2, small_lib, full, SimConfig(1500.0, 3, 50))
    assert rows2[1].present is False and math.isnan(rows2[1].mean_bps)
    rows_v = validate_lemma1(net2, small_lib, SimConfig(1500.0, 3, 50), [per_km2(500)], full)
    assert [r.rank for r in rows_v] == [1]


def test_cell_load_matches_density_ratio(net3, lib_table2):
    placement = CachePlacement(np.r_[np.full(160, 300), np.zeros(840, dtype=int)], 48_000)
    for r in simulate_rate(net3, lib_table2, placement, SimConfig(2000.0, 60, 50, seed=4)):
        assert r.mean_cell_load == pytest.approx(r.analytic_cell_load, rel=0.05)
        # a tagged user sees a size-biased cell, so at least one more user than the typical SBS
        assert r.tagged_cell_load >= 1 + r.mean_cell_load * 0.95


def test_request_mode_agrees_with_load_mode(net3):
    lib = small_library([5, 3, 2, 1], [12, 12, 12, 12])
    placement = CachePlacement(np.array([12, 5, 3, 0]), 20)
    sim = SimConfig(2000.0, 60, 100, seed=12)
    a = simulate_rate(net3, lib, placement, sim, mode="load")
    b = simulate_rate(net3, lib, placement, sim, mode="request")
    for x, y in zip(a, b):
        assert abs(x.mean_bps - y.mean_bps) <= 3 * math.hypot(x.stderr_bps, y.stderr_bps)
    with pytest.raises(ValueError):
        simulate_rate(net3, lib, placement, sim, mode="bogus")


def test_bound_halves_when_density_doubles(net3):
    omega = np.array([0.5, 0.2, 0.1, 0.2])
    for k in (1, 2, 3):
        a = rate_bound(net3, omega, k)
        b = rate_bound(net3.with_(lam=2 * net3.lam), omega, k)
        assert b == pytest.approx(a / 2, rel=1e-12)


def test_rates_fall_with_density(net3, lib_table2):
    placement = CachePlacement(np.r_[np.full(160, 300), np.zeros(840, dtype=int)], 48_000)
    rows = validate_lemma1(net3, lib_table2, SimConfig(2000.0, 30, 100, seed=1),
                           [per_km2(x) for x in (250, 500, 1000)], placement)
    assert {r.rank for r in rows} == {1, 2, 3}
    assert decreasing_in_lambda(rows)
    assert decreasing_in_lambda(rows, "bound_bps")
    with pytest.raises(ValueError):
        validate_lemma1(net3, lib_table2, SimConfig(2000.0, 1, 5), [0.0], placement)


def test_simulation_is_reproducible(net3, small_lib):
    placement = CachePlacement(np.array([5, 2, 1]), 8)
    sim = SimConfig(2000.0, 4, 30, seed=77)
    a = simulate_rate(net3, small_lib, placement, sim)
    b = simulate_rate(net3, small_lib, placement, sim, workers=2)
    assert a == b


def test_batch_stderr_is_sane(net3, small_lib):
    """Standard errors shrink roughly like one over the square root of the drop count."""
    placement = CachePlacement(np.array([5, 2, 1]), 8)
    few = simulate_rate(net3, small_lib, placement, SimConfig(2000.0, 10, 50, seed=2))
    many = simulate_rate(net3, small_lib, placement, SimConfig(2000.0, 40, 50, seed=2))
    ratio = few[0].stderr_bps / many[0].stderr_bps
    assert 1.0 < ratio < 4.0
