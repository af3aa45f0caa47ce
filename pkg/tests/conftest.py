import pytest

from secnet import BandConfig, OutageModel, Scenario, SizeDistribution, TrafficModel


def make_scenario(
    n_bands=5,
    ratio=50.0,
    target_rate=4.0,
    file_mean=10.0,
    session_interarrival=10.0,
    outage_interarrival=10.0,
    bs_density=1.0,
    vacancy=1.0,
    bandwidth=1.0,
):
    bands = tuple(
        BandConfig(bandwidth=bandwidth, vacancy=vacancy, bs_density=bs_density)
        for _ in range(n_bands)
    )
    traffic = TrafficModel(
        session_interarrival, SizeDistribution("exponential", file_mean)
    )
    return Scenario(
        user_density=ratio * bs_density,
        bands=bands,
        target_rate=target_rate,
        traffic=traffic,
        outage=OutageModel(outage_interarrival),
    )


@pytest.fixture
def default_scenario():
    """Five homogeneous bands, user/BS ratio 50, exponential files of mean
    10, outage interarrival 10, demand C = 1 at rate R = 4 (feasible)."""
    return make_scenario()
