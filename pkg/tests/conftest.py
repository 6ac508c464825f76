"""Shared session fixtures: codings, metrics, growth data, the seed-7 ray."""

import pytest

from lsrigid import coding, psmeasure, thermo, treemetric


@pytest.fixture(scope="session")
def free2():
    return coding.build_free_group_coding(2)


@pytest.fixture(scope="session")
def aug2(free2):
    return coding.augment(free2)


@pytest.fixture(scope="session")
def comp2(free2):
    comps, _ = coding.scc_decompose(free2)
    return comps[0]


@pytest.fixture(scope="session")
def unit_rose2():
    return treemetric.word_metric(2)


@pytest.fixture(scope="session")
def rose12():
    return treemetric.rose([1, 2])


@pytest.fixture(scope="session")
def pot_unit(free2, unit_rose2):
    return thermo.potential_from_metric(free2, unit_rose2, k=6)


@pytest.fixture(scope="session")
def growth_unit(free2, pot_unit):
    return thermo.solve_growth_rate(free2, pot_unit)


@pytest.fixture(scope="session")
def td_unit(comp2, pot_unit, growth_unit):
    return thermo.pressure(comp2, pot_unit, growth_unit.v_star)


@pytest.fixture(scope="session")
def pot12(free2, rose12):
    return thermo.potential_from_metric(free2, rose12, k=6)


@pytest.fixture(scope="session")
def growth12(free2, pot12):
    return thermo.solve_growth_rate(free2, pot12)


@pytest.fixture(scope="session")
def td12(comp2, pot12, growth12):
    return thermo.pressure(comp2, pot12, growth12.v_star)


@pytest.fixture(scope="session")
def entry_table_unit(aug2, unit_rose2, growth_unit):
    return psmeasure.entry_weight_table(aug2, unit_rose2, growth_unit.v_star)


@pytest.fixture(scope="session")
def ray7(aug2, comp2, td_unit, entry_table_unit):
    """The seed-7 ray of length 10^5 used across recurrence and rigidity tests."""
    return psmeasure.sample_ray(aug2, {comp2: td_unit}, entry_table_unit, 100_000, seed=7)
