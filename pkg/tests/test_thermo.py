"""Thermodynamic formalism on the coding.

Claims covered:
    - metric potentials tabulate distance increments, effective range detected
    - pressure values on roses match closed forms; strict monotonicity in v
    - growth-rate roots: log 3 for the unit rose, the cubic root for lengths
      (1,2), scaling covariance, and the ball-count slope cross-check
    - Gibbs chain weights, shift invariance, total mass
    - preimage sums against a brute-force oracle; decay on subcritical parts
    - telescoping defect of truncated potentials is finite and non-increasing
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from lsrigid import coding, fixtures, thermo, treemetric, words
from lsrigid.coding import scc_decompose
from lsrigid.errors import ValidationError
from lsrigid.thermo import (
    check_rpf_sums,
    constant_potential,
    gibbs_cylinder_weight,
    potential_from_metric,
    pressure,
    solve_growth_rate,
    sweep_telescoping,
)
from lsrigid.words import Word


def test_potential_unit_rose_constant(free2, unit_rose2):
    for k in (1, 3, 6):
        pot = potential_from_metric(free2, unit_rose2, k=k)
        assert pot.effective_range == 1
        assert set(pot.table.values()) == {1}


def test_potential_rose12_letter_weights(free2, rose12):
    pot = potential_from_metric(free2, rose12, k=1)
    for block, value in pot.table.items():
        letter = free2.label_of(block[0], block[1])
        assert value == (1 if abs(letter) == 1 else 2)


def test_potential_twisted_rose_has_depth(free2):
    subst = words.parse_substitution({"a": "aba", "b": "ba"}, 2)
    graph = treemetric.marked_rose([1, 1], subst)
    pot = potential_from_metric(free2, graph, k=4)
    assert pot.effective_range > 1
    assert min(pot.table.values()) <= 0  # prepending can shorten in the tree


def test_pressure_examples(free2, comp2, unit_rose2):
    pot1 = constant_potential(free2)
    assert abs(pressure(comp2, pot1, 0.0).pressure - math.log(3)) < 1e-12
    assert abs(pressure(comp2, pot1, math.log(3)).pressure) < 1e-12
    pot_unit = potential_from_metric(free2, unit_rose2, k=2)
    assert abs(pressure(comp2, pot_unit, 0.0).pressure - math.log(3)) < 1e-12


def test_pressure_monotone_grid(comp2, pot12):
    values = [pressure(comp2, pot12, v).pressure for v in np.linspace(0.0, 1.2, 20)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_eigen_residuals_and_positivity(comp2, pot12, growth12):
    td = pressure(comp2, pot12, growth12.v_star)
    assert td.residual_right <= 1e-10 and td.residual_left <= 1e-10
    assert td.right.min() > 0 and td.left.min() > 0


def test_growth_unit_rose(growth_unit):
    assert abs(growth_unit.v_star - math.log(3)) <= 1e-9


def test_growth_rose12_cubic_oracle(growth12):
    # the critical u = exp(-v*) solves 3u^3 + u^2 + u - 1 = 0
    roots = np.roots([3.0, 1.0, 1.0, -1.0])
    u = next(r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0)
    assert abs(growth12.v_star + math.log(u)) <= 1e-9


def test_growth_scaling_covariance(free2):
    for t in (Fraction(2), Fraction(1, 2)):
        scaled = treemetric.rose([t, 2 * t])
        pot = potential_from_metric(free2, scaled, k=2)
        v = solve_growth_rate(free2, pot).v_star
        base = solve_growth_rate(free2, potential_from_metric(free2, treemetric.rose([1, 2]), k=2)).v_star
        assert abs(v - base / t) <= 1e-9


def test_growth_rose22(free2):
    pot = potential_from_metric(free2, treemetric.rose([2, 2]), k=2)
    assert abs(solve_growth_rate(free2, pot).v_star - math.log(3) / 2) <= 1e-9


def test_growth_ball_count_slope(rose12, growth12):
    counts = treemetric.ball_counts(rose12, list(range(1, 15)))
    ts = np.arange(6, 15)
    slope = np.polyfit(ts, [math.log(counts[t - 1]) for t in ts], 1)[0]
    assert abs(slope - growth12.v_star) <= 2e-2


def test_growth_flags_maximal_components(growth_unit):
    assert [set(c.states) for c in growth_unit.maximal_components] == [{"a", "A", "b", "B"}]


def test_growth_on_doctored_structure(unit_rose2):
    tail = fixtures.coding_with_tail_cycle(2)
    pot = potential_from_metric(tail, unit_rose2, k=2)
    growth = solve_growth_rate(tail, pot)
    assert abs(growth.v_star - math.log(3)) <= 1e-9
    assert len(growth.maximal_components) == 1
    non_max = [p for states, p in growth.pressures.items() if len(states) == 2]
    assert non_max and non_max[0] < -0.5


def test_gibbs_depth1_weights(td_unit):
    for s in ("a", "A", "b", "B"):
        assert abs(gibbs_cylinder_weight(td_unit, [s]) - 0.25) < 1e-10


def test_gibbs_depth2_chain_value(td_unit):
    assert abs(gibbs_cylinder_weight(td_unit, ["a", "b"]) - 1 / 12) < 1e-12


def test_gibbs_total_mass(td_unit, td12, free2):
    for td in (td_unit, td12):
        for depth in (1, 2, 4):
            total = 0.0

            def walk(path):
                nonlocal total
                if len(path) == depth:
                    total += gibbs_cylinder_weight(td, [free2.states[i] for i in path])
                    return
                for j in free2.succ[path[-1]]:
                    if j in td.component.indices:
                        walk(path + [j])

            for s in sorted(td.component.indices):
                walk([s])
            assert abs(total - 1.0) <= 1e-10


def test_gibbs_shift_invariance(td_unit, td12, free2):
    # mu[cyl] equals the sum of mu over admissible one-step left extensions
    for td in (td_unit, td12):
        for cyl in (["a", "b"], ["b", "b", "a"]):
            mass = gibbs_cylinder_weight(td, cyl)
            first = free2.index(cyl[0])
            left = sum(
                gibbs_cylinder_weight(td, [free2.states[s]] + cyl)
                for s in sorted(td.component.indices)
                if free2.has_edge(s, first)
            )
            assert abs(mass - left) <= 1e-10


def test_gibbs_rejects_foreign_cylinders(td_unit):
    with pytest.raises(ValidationError):
        gibbs_cylinder_weight(td_unit, ["*", "a"])
    with pytest.raises(ValidationError):
        gibbs_cylinder_weight(td_unit, ["a", "A"])


def _oracle_preimage_sum(td, free2, y_state, n):
    """Brute force: enumerate all admissible pasts of length n ending at y."""
    pot = td.potential
    k = pot.effective_range
    member = td.component.indices
    total = 0.0
    y = free2.index(y_state)
    # the Birkhoff sum over z_0 .. z_{n-1} followed by the canonical tail at y
    tail = [y]
    while len(tail) < k + 1:
        tail.append(min(j for j in free2.succ[tail[-1]] if j in member))

    def walk(path):
        nonlocal total
        if len(path) == n + 1:
            if path[-1] == y:
                full = path[:-1] + tail
                total += math.exp(-td.v * float(pot.birkhoff_sum(full, n)))
            return
        for j in free2.succ[path[-1]]:
            if j in member:
                walk(path + [j])

    for s in sorted(member):
        walk([s])
    return total


def test_rpf_sums_match_bruteforce(td_unit, td12, free2):
    for td in (td_unit, td12):
        report = check_rpf_sums(td, "a", n_max=6)
        for n in range(0, 7):
            oracle = 1.0 if n == 0 else _oracle_preimage_sum(td, free2, "a", n)
            assert abs(report.values[n] - oracle) <= 1e-9 * max(1.0, oracle)


def test_rpf_sums_bounded_at_critical(td_unit):
    report = check_rpf_sums(td_unit, "a", n_max=12)
    assert report.values[0] == 1.0
    assert report.bounded
    assert 3 / 4 <= report.band[0] <= report.band[1] <= 4 / 3


def test_rpf_sums_decay_off_maximal(unit_rose2):
    tail = fixtures.coding_with_tail_cycle(2)
    pot = potential_from_metric(tail, unit_rose2, k=2)
    growth = solve_growth_rate(tail, pot)
    cycle = next(c for c in growth.report.components if not c.word_maximal)
    td = pressure(cycle.component, pot, growth.v_star)
    report = check_rpf_sums(td, cycle.states[0], n_max=10)
    assert report.theta is not None and report.theta < 1
    for n in range(1, 11):
        assert report.values[n] <= report.c_prime * report.theta**n + 1e-12
    # single preimage per step: S_n is exactly exp(-v* n)
    for n in range(1, 11):
        assert abs(report.values[n] - math.exp(-growth.v_star * n)) <= 1e-9


def test_single_cycle_transfer_is_exact(unit_rose2):
    tail = fixtures.coding_with_tail_cycle(2)
    pot = potential_from_metric(tail, unit_rose2, k=1)
    comps, _ = scc_decompose(tail)
    cycle = next(c for c in comps if set(c.states) == {"c1", "c2"})
    td = pressure(cycle, pot, 0.7)
    assert td.residual_right == 0.0
    chain = td.chain()
    assert np.allclose(chain.pi, 0.5)


def test_telescoping_sweep(free2):
    subst = words.parse_substitution({"a": "aba", "b": "ba"}, 2)
    graph = treemetric.marked_rose([1, 1], subst)
    report = sweep_telescoping(free2, graph, ks=(2, 4, 6), n_steps=60, n_paths=60, seed=5)
    defects = [report.defects[k] for k in (2, 4, 6)]
    assert all(math.isfinite(d) for d in defects)
    assert defects[0] >= defects[1] >= defects[2]
    # the unit rose telescopes exactly at every depth
    clean = sweep_telescoping(free2, treemetric.word_metric(2), ks=(1, 2), n_steps=40, n_paths=20, seed=1)
    assert clean.defects[1] == 0 and clean.defects[2] == 0
