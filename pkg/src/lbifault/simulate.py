"""Seeded testbench generation: random loss events on a sloped profile plus noise."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .model import EventList, FiberProfile, ModelError, SparseEstimate, synthesize

DEFAULT_SLOPE = -0.0002  # dB/sample, ~0.2 dB/km at 1 m sampling


@dataclass(frozen=True)
class NoiseConfig:
    """Zero-mean Gaussian noise in dB with ``sigma(k) = sigma0 * exp(growth * k)``."""

    kind: str = "gaussian"
    sigma0: float = 0.1
    growth: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian"):
            raise ModelError(f"unknown noise kind {self.kind!r}")
        if self.sigma0 < 0 or self.growth < 0:
            raise ModelError("noise sigma0 and growth must be non-negative")

    @classmethod
    def silent(cls) -> "NoiseConfig":
        return cls(kind="none", sigma0=0.0, growth=0.0)

    def sigma(self, n: int) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(n)
        return self.sigma0 * np.exp(self.growth * np.arange(1, n + 1))


@dataclass(frozen=True)
class TestbenchConfig:
    __test__ = False  # not a pytest class

    n_profiles: int = 100
    n: int = 15000
    n_events: int = 5
    mag_min: float = 0.1
    mag_max: float = 5.0
    slope: float = DEFAULT_SLOPE
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0
    min_separation: int = 0

    def __post_init__(self):
        if self.n_profiles < 1:
            raise ModelError("n_profiles must be >= 1")
        if self.n < 2:
            raise ModelError("profiles need N >= 2")
        if self.n_events < 0:
            raise ModelError("n_events must be >= 0")
        if not 0 < self.mag_min <= self.mag_max:
            raise ModelError("need 0 < mag_min <= mag_max")
        if self.min_separation < 0:
            raise ModelError("min_separation must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TestbenchConfig":
        d = dict(d)
        d["noise"] = NoiseConfig(**d["noise"])
        return cls(**d)


def profile_rng(seed: int, profile_index: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, profile_index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, profile_index])))


def draw_positions(rng: np.random.Generator, n: int, count: int, min_separation: int) -> np.ndarray:
    """Uniform draw of ``count`` sorted positions in 1..n with pairwise gaps >= min_separation."""
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    gap = max(int(min_separation), 1)
    span = n - (count - 1) * (gap - 1)
    if span < count:
        raise ModelError(
            f"cannot place {count} events in {n} samples with separation {min_separation}"
        )
    # choosing from the compressed range then re-expanding is uniform over valid sets
    base = np.sort(rng.choice(span, size=count, replace=False))
    return base + np.arange(count) * (gap - 1) + 1


def generate_profile(cfg: TestbenchConfig, profile_index: int) -> tuple[FiberProfile, EventList]:
    if cfg.n_events > cfg.n:
        raise ModelError(f"{cfg.n_events} events do not fit in {cfg.n} samples")
    rng = profile_rng(cfg.seed, profile_index)
    positions = draw_positions(rng, cfg.n, cfg.n_events, cfg.min_separation)
    magnitudes = -rng.uniform(cfg.mag_min, cfg.mag_max, size=cfg.n_events)
    truth = EventList(positions, magnitudes)
    y = synthesize(SparseEstimate.from_events(cfg.n, truth, cfg.slope))
    if cfg.noise.kind != "none":
        y = y + rng.standard_normal(cfg.n) * cfg.noise.sigma(cfg.n)
    meta = {"seed": cfg.seed, "profile_index": profile_index, "slope": cfg.slope,
            "noise": asdict(cfg.noise)}
    return FiberProfile(y, meta), truth


def generate_testbench(cfg: TestbenchConfig) -> list[tuple[FiberProfile, EventList]]:
    return [generate_profile(cfg, i) for i in range(cfg.n_profiles)]


def two_fault_scenario(n: int, p1: int, delta: int, m1: float, m2: float,
                       slope: float = DEFAULT_SLOPE) -> tuple[FiberProfile, EventList]:
    """Noiseless profile with steps ``m1`` at ``p1`` and ``m2`` at ``p1 + delta``."""
    p2 = p1 + delta
    if not (1 <= p1 and delta >= 1 and p2 <= n):
        raise ModelError(f"fault positions {p1}, {p2} outside 1..{n}")
    pairs = [(p1, m1)] + ([(p2, m2)] if m2 != 0 else [])
    truth = EventList.from_pairs(pairs)
    y = synthesize(SparseEstimate.from_events(n, truth, slope))
    return FiberProfile(y, {"scenario": "two-fault", "delta": delta}), truth
