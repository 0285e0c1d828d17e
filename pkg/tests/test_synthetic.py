import numpy as np
import pytest
from scipy import stats

from dygpp.events import ALIGHT, BOARD, parse_events
from dygpp.synthetic import DAY, GeneratorConfig, generate, generate_events, preset


def test_single_noise_free_commuter_over_five_weekdays():
    cfg = GeneratorConfig(n_passengers=1, n_stations=5, days=5, commuter_fraction=1.0,
                          noise_rate=0.0, seed=4)
    rows = generate_events(cfg)
    assert len(rows) == 20
    stations = rows[:, 1].reshape(5, 4)
    home, work = stations[0, 0], stations[0, 1]
    assert home != work
    assert (stations == [home, work, work, home]).all()
    assert (rows[:, 3] // DAY == np.repeat(np.arange(5), 4)).all()


def test_same_seed_same_bytes_and_header():
    cfg = preset("tiny", seed=11)
    assert generate(cfg) == generate(cfg)
    assert generate(cfg) != generate(preset("tiny", seed=12))
    assert generate(cfg, header=True).startswith("u,i,label,ts\n")


@pytest.mark.parametrize("noise", [0.0, 0.15, 1.0])
def test_output_is_valid_and_alternates(noise):
    text = generate(preset("tiny", seed=2, noise_rate=noise))
    log = parse_events(text)
    assert (np.diff(log.timestamps) >= 0).all()
    for p in range(1, log.num_passengers + 1):
        labels = log.labels[log.passengers == p]
        assert (labels[0::2] == BOARD).all() and (labels[1::2] == ALIGHT).all()


def test_full_noise_gives_uniform_station_marginals():
    cfg = GeneratorConfig(n_passengers=100, n_stations=10, days=60, noise_rate=1.0, seed=0)
    rows = generate_events(cfg)
    assert len(rows) >= 10_000
    counts = np.bincount(rows[:, 1], minlength=11)[1:]
    assert stats.chisquare(counts).pvalue > 1e-3


def test_config_validation():
    with pytest.raises(ValueError, match="2 stations"):
        GeneratorConfig(n_stations=1)
    with pytest.raises(ValueError):
        GeneratorConfig(days=0)
    with pytest.raises(ValueError, match="unknown preset"):
        preset("huge")
    desk = preset("desk")
    assert (desk.n_passengers, desk.n_stations, desk.days, desk.commuter_fraction,
            desk.noise_rate) == (200, 20, 60, 0.8, 0.15)
