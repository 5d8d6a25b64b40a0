"""Shared fixtures: parsed bundled scenarios, fresh per test."""

from __future__ import annotations

import pytest

from herdctl import bundled_scenario


@pytest.fixture
def inverse_5v5():
    return bundled_scenario("inverse_5v5")


@pytest.fixture
def exponential_5v5():
    return bundled_scenario("exponential_5v5")


@pytest.fixture
def mixed_3v3():
    return bundled_scenario("mixed_timevarying_3v3")
