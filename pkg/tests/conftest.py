"""Shared fixtures for emslab tests."""

from __future__ import annotations

import os
from typing import TYPE_CHECKING

import pytest
from scipy import stats

from emslab.config import (
    FredholmSettings,
    MonteCarloSettings,
    OutageSettings,
    PowerDPSettings,
)
from emslab.fading import tabulated_from_ppf
from emslab.models import ChannelSpec, FadingFamily
from emslab.models.channel import MIN_TABLE_KNOTS

if TYPE_CHECKING:
    from pathlib import Path


@pytest.fixture
def rayleigh_10db() -> ChannelSpec:
    return ChannelSpec(snr_db=10.0)


@pytest.fixture
def rayleigh_unit() -> ChannelSpec:
    return ChannelSpec(gamma=1.0)


@pytest.fixture(scope="session")
def nakagami_channel() -> ChannelSpec:
    """Nakagami-2 fading at mean gain 10: the power gain is Gamma(2, 5)."""
    return tabulated_from_ppf(stats.gamma(a=2.0, scale=5.0).ppf)


@pytest.fixture(scope="session")
def degenerate_channel() -> ChannelSpec:
    """Every slot has gain 3, i.e. capacity exactly 1."""
    probs = tuple(i / (MIN_TABLE_KNOTS - 1) for i in range(MIN_TABLE_KNOTS))
    return ChannelSpec(
        family=FadingFamily.TABULATED,
        probabilities=probs,
        gains=(3.0,) * MIN_TABLE_KNOTS,
    )


@pytest.fixture
def small_fredholm() -> FredholmSettings:
    return FredholmSettings(nodes=512)


@pytest.fixture
def small_outage() -> OutageSettings:
    return OutageSettings(cells=1024)


@pytest.fixture
def small_powerdp() -> PowerDPSettings:
    return PowerDPSettings(
        nodes=32,
        rho_scan=16,
        rho_rtol=1e-3,
        tolerance=1e-6,
        lambda_tolerance=1e-2,
        rate_tolerance=5e-2,
    )


@pytest.fixture
def small_mc() -> MonteCarloSettings:
    return MonteCarloSettings(chunk_size=512, trace_limit=5)


@pytest.fixture
def isolated_home(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Point HOME and the working directory at a scratch directory."""
    home = tmp_path / "home"
    home.mkdir()
    monkeypatch.setenv("HOME", str(home))
    monkeypatch.chdir(tmp_path)
    for key in list(os.environ):
        if key.startswith("EMSLAB_"):
            monkeypatch.delenv(key)
    return home
