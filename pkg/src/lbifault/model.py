"""Slope+step signal model ``y = A beta`` with an implicit dictionary.

Row ``k`` (1-based) of ``A`` is ``[k, 1, ..., 1, 0, ..., 0]``: the ramp entry
followed by ``k`` ones.  Candidate ``c`` (column ``c``) is therefore active for
every sample ``k >= c``.  ``A`` is only ever materialized for small ``N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s
DENSE_LIMIT = 1000


class ModelError(ValueError):
    """Raised on inconsistent model inputs (lengths, ranges, non-finite data)."""


@dataclass(frozen=True)
class FiberProfile:
    """A digitized fiber profile in dB.

    Attributes:
        samples: intensity values, length ``N >= 2``.
        meta: free-form provenance (seed, noise config, source id).
    """

    samples: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        y = np.asarray(self.samples, dtype=np.float64)
        if y.ndim != 1 or y.size < 2:
            raise ModelError(f"profile needs a 1-D vector of length >= 2, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ModelError("profile contains non-finite samples")
        object.__setattr__(self, "samples", y)

    @property
    def n(self) -> int:
        return self.samples.size

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class SparseEstimate:
    """Coefficient vector of length ``N + 1``.

    ``coeffs[0]`` is the slope in dB per sample, ``coeffs[c]`` the step (dB)
    of candidate ``c = 1..N``.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.coeffs, dtype=np.float64)
        if b.ndim != 1 or b.size < 2:
            raise ModelError(f"estimate needs a 1-D vector of length >= 2, got shape {b.shape}")
        object.__setattr__(self, "coeffs", b)

    @classmethod
    def zeros(cls, n: int) -> "SparseEstimate":
        return cls(np.zeros(n + 1))

    @classmethod
    def from_events(cls, n: int, events: "EventList", slope: float = 0.0) -> "SparseEstimate":
        b = np.zeros(n + 1)
        b[0] = slope
        for pos, mag in events:
            if not 1 <= pos <= n:
                raise ModelError(f"event position {pos} outside 1..{n}")
            b[pos] += mag
        return cls(b)

    @property
    def n(self) -> int:
        return self.coeffs.size - 1

    @property
    def slope(self) -> float:
        return float(self.coeffs[0])

    @property
    def steps(self) -> np.ndarray:
        """View of the step coefficients; ``steps[c - 1]`` is candidate ``c``."""
        return self.coeffs[1:]

    def active(self) -> np.ndarray:
        """Indices (0 = slope) of the nonzero coefficients."""
        return np.flatnonzero(self.coeffs)


@dataclass(frozen=True)
class EventList:
    """Fault events as (position, magnitude) pairs, positions 1-based and increasing."""

    positions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    magnitudes: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=np.int64).reshape(-1)
        m = np.asarray(self.magnitudes, dtype=np.float64).reshape(-1)
        if p.shape != m.shape:
            raise ModelError("positions and magnitudes differ in length")
        if p.size and (np.any(np.diff(p) <= 0) or p[0] < 1):
            raise ModelError("event positions must be strictly increasing and >= 1")
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "magnitudes", m)

    @classmethod
    def from_pairs(cls, pairs) -> "EventList":
        pairs = sorted(pairs)
        if not pairs:
            return cls()
        pos, mag = zip(*pairs)
        return cls(np.array(pos), np.array(mag))

    def __len__(self):
        return self.positions.size

    def __iter__(self):
        return iter(zip(self.positions.tolist(), self.magnitudes.tolist()))

    def __eq__(self, other):
        if not isinstance(other, EventList):
            return NotImplemented
        return np.array_equal(self.positions, other.positions) and np.array_equal(
            self.magnitudes, other.magnitudes
        )

    def check_range(self, n: int):
        if self.positions.size and self.positions[-1] > n:
            raise ModelError(f"event position {self.positions[-1]} outside 1..{n}")


# detected peaks share the event representation
PeakList = EventList


@dataclass(frozen=True)
class DictionaryRowView:
    """Row ``k`` of the ``N x (N+1)`` dictionary, stored implicitly."""

    k: int
    n: int

    @property
    def slope_entry(self) -> float:
        return float(self.k)

    @property
    def step_support(self) -> range:
        """Candidates whose column holds a 1 in this row."""
        return range(1, self.k + 1)

    @property
    def squared_norm(self) -> int:
        return self.k * self.k + self.k

    def dense(self) -> np.ndarray:
        row = np.zeros(self.n + 1)
        row[0] = self.k
        row[1 : self.k + 1] = 1.0
        return row


def design_matrix_row(k: int, n: int) -> DictionaryRowView:
    if not 1 <= k <= n:
        raise ModelError(f"row index {k} outside 1..{n}")
    return DictionaryRowView(int(k), int(n))


def dense_matrix(n: int, ramp: float = 1.0) -> np.ndarray:
    """Materialize the dictionary (slope column scaled by ``ramp``). Small ``n`` only."""
    if n > DENSE_LIMIT:
        raise ModelError(f"refusing to materialize a {n} x {n + 1} dictionary")
    a = np.tril(np.ones((n, n)))
    return np.hstack([ramp * np.arange(1, n + 1, dtype=np.float64)[:, None], a])


def synthesize(beta: SparseEstimate | np.ndarray, n: int | None = None) -> np.ndarray:
    """Evaluate ``A @ beta`` by prefix accumulation in O(N)."""
    b = beta.coeffs if isinstance(beta, SparseEstimate) else np.asarray(beta, dtype=np.float64)
    if n is None:
        n = b.size - 1
    if b.size != n + 1:
        raise ModelError(f"estimate has length {b.size}, expected {n + 1}")
    return b[0] * np.arange(1, n + 1, dtype=np.float64) + np.cumsum(b[1:])


def residual(y: FiberProfile | np.ndarray, beta: SparseEstimate | np.ndarray) -> np.ndarray:
    samples = y.samples if isinstance(y, FiberProfile) else np.asarray(y, dtype=np.float64)
    return samples - synthesize(beta, samples.size)


def samples_for_fiber(length_m: float, refractive_index: float, bandwidth_hz: float) -> int:
    """Sample count ``4 pi X c / (n dnu)``, rounded to the nearest integer.

    The expression is used as written; its units do not reduce to a pure
    count, so treat the result as a nominal figure.
    """
    if length_m <= 0 or refractive_index <= 0 or bandwidth_hz <= 0:
        raise ModelError("fiber length, refractive index and bandwidth must be positive")
    return int(round(4 * math.pi * length_m * SPEED_OF_LIGHT / (refractive_index * bandwidth_hz)))
