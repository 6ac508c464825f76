"""Ball measures, partition sums, cylinder masses, ray sampling.

Claims covered:
    - ball-measure weights follow the exp(-v dist) law exactly
    - partition sums: closed form on the unit rose, DP vs enumeration oracle,
      criticality flagging
    - cylinder masses: normalisation, exact additivity over one-step
      extensions (0 included), stabilisation at depth 1, null-cylinder decay
    - measured two-sided bounds around exp(-v Birkhoff sum)
    - sampler: determinism, seed sensitivity, Gibbs statistics, entry table
    - recurrence reports and ray file round trips
"""

import math

import numpy as np
import pytest

from lsrigid import coding, fixtures, psmeasure, thermo, treemetric, words
from lsrigid.errors import ResourceCapError, ValidationError
from lsrigid.psmeasure import (
    RaySample,
    ball_measure,
    cylinder_mass_bounds,
    cylinder_mass_estimate,
    entry_weight_table,
    load_ray,
    measure_mass_band,
    partition_sum_check,
    partition_sums,
    recurrence_report,
    sample_ray,
    save_ray,
)
from lsrigid.words import Word


LOG3 = math.log(3)


def test_nu_examples(unit_rose2):
    bm = ball_measure(unit_rose2, LOG3, 1)
    assert abs(bm.weight(words.identity(2)) - 3 / 7) < 1e-12
    for s in ("a", "A", "b", "B"):
        assert abs(bm.weight(Word.from_str(s, 2)) - 1 / 7) < 1e-12
    point = ball_measure(unit_rose2, LOG3, 0)
    assert point.weights == {words.identity(2): 1.0}


def test_nu_weight_law(rose12, growth12):
    bm = ball_measure(rose12, growth12.v_star, 5)
    x, y = Word.from_str("abA", 2), Word.from_str("bb", 2)
    expected = math.exp(-growth12.v_star * float(rose12.dist(x) - rose12.dist(y)))
    assert abs(bm.weight(x) / bm.weight(y) - expected) < 1e-12


def test_nu_symmetry(unit_rose2):
    bm = ball_measure(unit_rose2, LOG3, 3)
    values = {len(w): set() for w in bm.weights}
    for w, p in bm.weights.items():
        values[len(w)].add(round(p, 15))
    assert all(len(v) == 1 for v in values.values())


def test_nu_resource_cap(unit_rose2):
    with pytest.raises(ResourceCapError):
        ball_measure(unit_rose2, LOG3, 16, cap=10_000)


def test_partition_sums_closed_form(unit_rose2):
    sums = partition_sums(unit_rose2, LOG3, 12)
    for n, z in enumerate(sums):
        assert abs(z - (1 + 4 * n / 3)) < 1e-12


def test_partition_sums_dp_matches_enumeration(rose12, growth12):
    dp = partition_sums(rose12, growth12.v_star, 8)
    brute = [0.0] * 9
    for w in words.enumerate_ball(2, 8):
        brute[len(w)] += math.exp(-growth12.v_star * float(rose12.dist(w)))
    for n in range(1, 9):
        brute[n] += brute[n - 1]
    for n in range(9):
        assert abs(dp[n] - brute[n]) < 1e-9


def test_partition_sum_check_critical(unit_rose2, rose12, growth12):
    rep = partition_sum_check(unit_rose2, LOG3, 14)
    assert rep.looks_linear
    for n in range(1, 15):
        assert abs(rep.ratios[n - 1] - (4 / 3 + 1 / n)) < 1e-12
    rep12 = partition_sum_check(rose12, growth12.v_star, 14)
    assert rep12.looks_linear
    assert rep12.band[0] > 0 and rep12.c_fitted < 10


def test_partition_sum_check_off_critical(unit_rose2):
    rep = partition_sum_check(unit_rose2, LOG3 + 0.1, 14)
    assert not rep.looks_linear


def test_cylinder_mass_full_space(aug2, unit_rose2):
    est = cylinder_mass_estimate(["*"], aug2, unit_rose2, LOG3, 12)
    assert abs(est.value - 1.0) < 1e-12
    assert not est.null_cylinder


def test_cylinder_mass_generator_symmetry(aug2, unit_rose2):
    values = {
        s: cylinder_mass_estimate(["*", s], aug2, unit_rose2, LOG3, 12).value
        for s in ("a", "A", "b", "B")
    }
    assert max(values.values()) - min(values.values()) < 1e-12


def test_cylinder_mass_additive(aug2, unit_rose2, rose12, growth12):
    for metric, v in ((unit_rose2, LOG3), (rose12, growth12.v_star)):
        for prefix in (["*", "a"], ["*", "a", "b"], ["*", "B", "B", "a"]):
            last = prefix[-1]
            est = cylinder_mass_estimate(prefix, aug2, metric, v, 12)
            total = 0.0
            for t in ("a", "A", "b", "B", "0"):
                if aug2.has_edge(aug2.index(last), aug2.index(t)):
                    total += cylinder_mass_estimate(prefix + [t], aug2, metric, v, 12).value
            assert abs(est.value - total) <= 1e-10


def test_cylinder_mass_dp_matches_enumeration(aug2, rose12, growth12):
    # a bare oracle has no additive fast path, forcing full enumeration
    oracle_metric = treemetric.MetricOracle(dist=rose12.dist, rank=2, tag="slow")
    for prefix in (["*", "a"], ["*", "b", "a"]):
        fast = cylinder_mass_estimate(prefix, aug2, rose12, growth12.v_star, 8)
        slow = cylinder_mass_estimate(prefix, aug2, oracle_metric, growth12.v_star, 8)
        assert abs(fast.value - slow.value) <= 1e-10


def test_cylinder_mass_zero_extension_is_single_element(aug2, unit_rose2):
    est = cylinder_mass_estimate(["*", "a", "0", "0"], aug2, unit_rose2, LOG3, 12)
    z12 = partition_sums(unit_rose2, LOG3, 12)[12]
    assert abs(est.value - (1 / 3) / z12) < 1e-14


def test_cylinder_mass_stabilises_at_entry_depth(aug2, unit_rose2):
    for s in ("a", "b"):
        e12 = cylinder_mass_estimate(["*", s], aug2, unit_rose2, LOG3, 12).value
        e14 = cylinder_mass_estimate(["*", s], aug2, unit_rose2, LOG3, 14).value
        assert abs(e14 - e12) / e12 < 0.01


def test_null_cylinder_decays(unit_rose2):
    dead = fixtures.coding_with_dead_end(2)
    aug = coding.augment(dead)
    values = []
    for n in (6, 12, 24):
        est = cylinder_mass_estimate(["*", "d"], aug, unit_rose2, LOG3, n)
        assert est.null_cylinder
        values.append(est.value)
    assert values[2] < values[1] < values[0]
    assert values[2] < values[0] / 2


def test_mass_band_measured(aug2, unit_rose2, rose12, td_unit, td12):
    band_u = measure_mass_band(aug2, unit_rose2, td_unit, depth=4, n=12)
    band_12 = measure_mass_band(aug2, rose12, td12, depth=4, n=12)
    for band in (band_u, band_12):
        assert band.band[0] > 0
        assert band.spread < 4


def test_cylinder_mass_bounds_enclose_estimate(aug2, unit_rose2, td_unit):
    band = measure_mass_band(aug2, unit_rose2, td_unit, depth=4, n=12)
    for prefix in (("*", "a"), ("*", "b", "a", "a")):
        lo, hi = cylinder_mass_bounds(prefix, td_unit, aug2, band.band)
        est = cylinder_mass_estimate(list(prefix), aug2, unit_rose2, td_unit.v, 12)
        assert lo * (1 - 1e-9) <= est.value <= hi * (1 + 1e-9)


def test_entry_weight_table_free_coding(entry_table_unit):
    assert [p for p, _ in entry_table_unit] == [("*", "a"), ("*", "A"), ("*", "b"), ("*", "B")]
    weights = [w for _, w in entry_table_unit]
    assert max(weights) - min(weights) < 1e-12


def test_entry_weight_table_warns_on_deep_transients(unit_rose2):
    tail = coding.augment(fixtures.coding_with_tail_cycle(2))
    with pytest.warns(UserWarning):
        table = entry_weight_table(tail, unit_rose2, LOG3, max_depth=6)
    assert all(p[-1] in {"a", "A", "b", "B"} for p, _ in table)


def test_sampler_determinism_and_seed_sensitivity(aug2, comp2, td_unit, entry_table_unit):
    r1 = sample_ray(aug2, {comp2: td_unit}, entry_table_unit, 3000, seed=5)
    r2 = sample_ray(aug2, {comp2: td_unit}, entry_table_unit, 3000, seed=5)
    r3 = sample_ray(aug2, {comp2: td_unit}, entry_table_unit, 3000, seed=6)
    assert r1.states == r2.states
    assert r1.states != r3.states
    assert r1.entry_index == 1
    assert len(r1) == 3000
    assert "0" not in r1.states


def test_sampler_gibbs_statistics(aug2, comp2, td_unit, entry_table_unit, free2):
    ray = sample_ray(aug2, {comp2: td_unit}, entry_table_unit, 20_000, seed=2)
    freqs = psmeasure.empirical_pair_frequencies(ray)
    chain = td_unit.chain()
    bs = td_unit.shift
    m = len(ray.indices) - ray.entry_index - 1
    for u in range(bs.n_blocks):
        for t, p in zip(chain.targets[u], chain.probs[u]):
            expected = float(chain.pi[u] * p)
            key = (free2.states[bs.blocks[u][0]], free2.states[bs.blocks[int(t)][0]])
            sigma = math.sqrt(expected * (1 - expected) / m)
            assert abs(freqs.get(key, 0.0) - expected) <= 4 * sigma


def test_recurrence_sampled_ray(aug2, comp2, td_unit, entry_table_unit):
    ray = sample_ray(aug2, {comp2: td_unit}, entry_table_unit, 20_000, seed=4)
    rep = recurrence_report(ray, 2)
    assert rep.complete
    assert len(rep.visits) == 12
    assert all(v[0] >= 1 for v in rep.visits.values())


def test_recurrence_periodic_counterexample(aug2, comp2):
    states = ("*",) + ("a", "b") * 50
    ray = RaySample.synthetic(aug2, states, comp2)
    rep = recurrence_report(ray, 2)
    assert not rep.complete
    assert ("A", "A") in rep.unvisited
    assert rep.counts[("a", "b")] == 50


def test_recurrence_short_horizon(aug2, comp2, td_unit, entry_table_unit):
    ray = sample_ray(aug2, {comp2: td_unit}, entry_table_unit, 10, seed=4)
    rep = recurrence_report(ray, 6)
    assert rep.unvisited  # horizon too short, reported rather than an error


def test_ray_file_round_trip(aug2, comp2, td_unit, entry_table_unit, tmp_path):
    ray = sample_ray(aug2, {comp2: td_unit}, entry_table_unit, 500, seed=9)
    path = tmp_path / "ray.txt"
    save_ray(ray, path)
    again = load_ray(path, aug2)
    assert again.states == ray.states
    assert again.seed == 9
    assert again.entry_index == ray.entry_index
    assert set(again.component.states) == set(ray.component.states)


def test_sample_ray_multiple_maximal_components(unit_rose2):
    # two disjoint copies of the free coding: the sampler picks one per seed
    free = coding.build_free_group_coding(2)
    mirror_states = [s + s for s in free.states if s != "*"]
    edges = []
    for i, targets in enumerate(free.succ):
        for k, j in enumerate(targets):
            src, dst = free.states[i], free.states[j]
            src2 = src + src if src != "*" else "*"
            edges.append((src2, dst + dst, free.labels[i][k]))
    doubled = fixtures._with_extra(free, mirror_states, edges)
    aug = coding.augment(doubled)
    pot = thermo.potential_from_metric(doubled, unit_rose2, k=2)
    growth = thermo.solve_growth_rate(doubled, pot)
    assert len(growth.maximal_components) == 2
    tds = {c: thermo.pressure(c, pot, growth.v_star) for c in growth.maximal_components}
    table = entry_weight_table(aug, unit_rose2, growth.v_star)
    assert len(table) == 8
    seen = set()
    for seed in range(6):
        ray = sample_ray(aug, tds, table, 200, seed=seed)
        seen.add(ray.component.states)
        comp_states = set(ray.component.states)
        assert set(ray.states[ray.entry_index:]) <= comp_states
    assert len(seen) == 2
