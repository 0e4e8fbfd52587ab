import numpy as np
import pytest

from vranrl.domain import ContextBounds
from vranrl.env import LinkSpec
from vranrl.tilecoding import TileCoder, TileCoderConfig


def make_link(
    link_id=0,
    name="lte",
    kind="rb",
    rho_max=50.0,
    n_levels=10,
    n_mcs=29,
    snr50_lo=-4.0,
    snr50_step=0.75,
    slope=1.5,
    rate_lo=2500.0,
    rate_step=3200.0,
) -> LinkSpec:
    return LinkSpec(
        link_id=link_id,
        name=name,
        kind=kind,
        rho_max=rho_max,
        level_values=tuple(rho_max * (i + 1) / n_levels for i in range(n_levels)),
        rates=tuple(rate_lo + rate_step * m for m in range(n_mcs)),
        snr50=tuple(snr50_lo + snr50_step * m for m in range(n_mcs)),
        slope=tuple(slope for _ in range(n_mcs)),
    )


@pytest.fixture
def two_link_catalog():
    lte = make_link(0, "lte", "rb", 50.0, n_levels=10, n_mcs=29)
    wlan = make_link(
        1, "wlan", "airtime", 1.0, n_levels=10, n_mcs=8,
        snr50_lo=-2.0, snr50_step=2.5, rate_lo=300000.0, rate_step=340000.0,
    )
    return [lte, wlan]


@pytest.fixture
def default_bounds():
    return ContextBounds(dims=((8.0, 21.0), (0.0, 200000.0), (0.0, 1.0), (0.0, 1.0)))


@pytest.fixture
def default_coder(default_bounds):
    return TileCoder(TileCoderConfig(bounds=default_bounds, seed=7))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
