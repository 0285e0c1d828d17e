"""Synthetic smart-card event logs with periodic commuting and random disruptions.

Commuters ride home -> work every weekday morning and back every evening.
Occasional riders make a round trip to one favourite station on random days.
With probability ``noise_rate`` a trip is replaced by a random trip (both
endpoints uniform, distinct), and a commuter makes a random weekend outing.
With ``noise_rate = 0`` every trip is fully determined by the passenger and
their previous station; only the timing varies.
"""
from __future__ import annotations

import io
from dataclasses import asdict, dataclass, replace

import numpy as np

from .events import ALIGHT, BOARD

HOUR = 3600
DAY = 24 * HOUR


@dataclass(frozen=True)
class GeneratorConfig:
    n_passengers: int = 200
    n_stations: int = 20
    days: int = 60
    commuter_fraction: float = 0.8
    noise_rate: float = 0.15
    seed: int = 0
    jitter_seconds: float = 900.0
    occasional_trip_prob: float = 0.3

    def __post_init__(self):
        if self.n_passengers < 1 or self.days < 1:
            raise ValueError("n_passengers and days must be >= 1")
        if self.n_stations < 2:
            raise ValueError("need at least 2 stations")
        if not 0.0 <= self.commuter_fraction <= 1.0:
            raise ValueError("commuter_fraction must lie in [0, 1]")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValueError("noise_rate must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS = {
    "desk": GeneratorConfig(),
    "tiny": GeneratorConfig(n_passengers=20, n_stations=6, days=14),
}


def preset(name: str, **overrides) -> GeneratorConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **{k: v for k, v in overrides.items() if v is not None})


class _Builder:
    def __init__(self, cfg: GeneratorConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.rows: list[tuple[int, int, int, int]] = []

    def jitter(self, base: float, lo: float, hi: float) -> float:
        return float(np.clip(base + self.rng.normal(0.0, self.cfg.jitter_seconds), lo, hi))

    def trip(self, passenger: int, origin: int, dest: int, board_t: float, ride: float) -> None:
        if self.rng.random() < self.cfg.noise_rate:
            origin, dest = (int(x) + 1 for x in self.rng.choice(self.cfg.n_stations, 2, replace=False))
        alight_t = board_t + max(60.0, ride + self.rng.normal(0.0, 120.0))
        self.rows.append((passenger, origin, BOARD, int(round(board_t))))
        self.rows.append((passenger, dest, ALIGHT, int(round(alight_t))))

    def random_trip(self, passenger: int, board_t: float, ride: float) -> None:
        origin, dest = (int(x) + 1 for x in self.rng.choice(self.cfg.n_stations, 2, replace=False))
        alight_t = board_t + max(60.0, ride + self.rng.normal(0.0, 120.0))
        self.rows.append((passenger, origin, BOARD, int(round(board_t))))
        self.rows.append((passenger, dest, ALIGHT, int(round(alight_t))))


def generate_events(config: GeneratorConfig) -> np.ndarray:
    """``(k, 4)`` array of ``[passenger, station, label, timestamp]`` rows, time-sorted."""
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    b = _Builder(cfg, rng)
    n_commuters = int(np.floor(cfg.n_passengers * cfg.commuter_fraction + 0.5))
    for p in range(1, cfg.n_passengers + 1):
        home, other = (int(x) + 1 for x in rng.choice(cfg.n_stations, 2, replace=False))
        ride = rng.uniform(15, 50) * 60
        if p <= n_commuters:
            am = 7.5 * HOUR + rng.uniform(-1, 1) * HOUR
            pm = 17.5 * HOUR + rng.uniform(-1, 1) * HOUR
            for d in range(cfg.days):
                t0 = d * DAY
                if d % 7 < 5:
                    b.trip(p, home, other, t0 + b.jitter(am, 5 * HOUR, 10 * HOUR), ride)
                    b.trip(p, other, home, t0 + b.jitter(pm, 15 * HOUR, 21 * HOUR), ride)
                elif rng.random() < cfg.noise_rate:
                    b.random_trip(p, t0 + b.jitter(11 * HOUR, 9 * HOUR, 13 * HOUR), ride)
                    b.random_trip(p, t0 + b.jitter(16 * HOUR, 14 * HOUR, 20 * HOUR), ride)
        else:
            for d in range(cfg.days):
                if rng.random() >= cfg.occasional_trip_prob:
                    continue
                out_t = d * DAY + rng.uniform(10, 13) * HOUR
                back_t = out_t + rng.uniform(2, 5) * HOUR
                b.trip(p, home, other, out_t, ride)
                b.trip(p, other, home, back_t, ride)
    rows = np.asarray(b.rows, dtype=np.int64).reshape(-1, 4)
    return rows[np.argsort(rows[:, 3], kind="stable")]


def generate(config: GeneratorConfig, header: bool = False) -> str:
    """Event-CSV text for ``config``; identical seeds give identical bytes."""
    out = io.StringIO()
    if header:
        out.write("u,i,label,ts\n")
    for row in generate_events(config).tolist():
        out.write("%d,%d,%d,%d\n" % tuple(row))
    return out.getvalue()
