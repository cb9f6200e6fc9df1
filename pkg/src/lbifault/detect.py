"""Peak detection, fault-cluster shapes and the two cluster compensation routes.

The approximate deconvolution route subtracts a peak-scaled, center-zeroed
copy of the averaged cluster around each detected peak and re-detects.  The
least-squares FIR inverse of the cluster is kept as the comparison route.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy.linalg import convolution_matrix

from .lbi import SolverConfig, split_profile_path
from .model import EventList, ModelError, PeakList, SparseEstimate, synthesize
from .simulate import DEFAULT_SLOPE, profile_rng

DEFAULT_MIN_MAGNITUDE = 0.05  # dB
DEFAULT_COMP_LENGTH = 65


class ExtractionError(RuntimeError):
    pass


class DeconvolutionError(RuntimeError):
    pass


class ProvenanceWarning(UserWarning):
    """Compensation template built for a different solver configuration."""


@dataclass(frozen=True)
class ClusterShape:
    """Averaged normalized fault cluster (center tap 1, odd length)."""

    taps: np.ndarray
    alpha: int
    split_len: int
    extraction: dict = field(default_factory=dict, compare=False)
    members: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.size % 2 == 0:
            raise ModelError(f"cluster shape needs an odd number of taps, got {taps.size}")
        object.__setattr__(self, "taps", taps)

    @property
    def half_width(self) -> int:
        return self.taps.size // 2

    @classmethod
    def impulse(cls, half_width: int = 0, alpha: int = 0, split_len: int = 0) -> "ClusterShape":
        taps = np.zeros(2 * half_width + 1)
        taps[half_width] = 1.0
        return cls(taps, alpha, split_len)


@dataclass(frozen=True)
class CompensationVector:
    """Subtraction template: cluster taps with the center zeroed."""

    taps: np.ndarray
    alpha: int
    split_len: int

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.size % 2 == 0:
            raise ModelError(f"compensation vector needs odd length, got {taps.size}")
        if taps[taps.size // 2] != 0.0:
            raise ModelError("compensation vector center tap must be 0")
        object.__setattr__(self, "taps", taps)

    @property
    def half_width(self) -> int:
        return self.taps.size // 2


@dataclass(frozen=True)
class DeconvFilter:
    """FIR inverse ``g`` and the output delay it introduces relative to the input."""

    taps: np.ndarray
    delay: int = 0

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.size < 1 or not np.all(np.isfinite(taps)):
            raise ModelError("deconvolution filter needs >= 1 finite taps")
        object.__setattr__(self, "taps", taps)


def _steps(beta) -> np.ndarray:
    if isinstance(beta, SparseEstimate):
        return beta.steps
    return np.asarray(beta, dtype=np.float64)[1:]


def detect_peaks(beta, min_magnitude: float = DEFAULT_MIN_MAGNITUDE) -> PeakList:
    """Local maxima of ``|beta_j|`` over the step candidates (strict on both sides).

    Out-of-range neighbours count as 0; the slope coefficient is never a peak.
    """
    if min_magnitude < 0:
        raise ModelError("min_magnitude must be >= 0")
    steps = _steps(beta)
    mag = np.abs(steps)
    padded = np.concatenate(([0.0], mag, [0.0]))
    mid = padded[1:-1]
    hit = (mid > padded[:-2]) & (mid > padded[2:]) & (mid >= min_magnitude)
    idx = np.flatnonzero(hit)
    return PeakList(idx + 1, steps[idx])


def _single_fault_profile(n: int, pos: int, mag: float, slope: float) -> np.ndarray:
    beta = np.zeros(n + 1)
    beta[0] = slope
    beta[pos] = mag
    return synthesize(beta)


def extract_cluster_shapes(alphas, split_len: int = 4500, half_width: int = 64,
                           n_profiles: int = 100, seed: int = 0, *, n: int | None = None,
                           mag_range: tuple[float, float] = (0.1, 5.0),
                           slope: float = DEFAULT_SLOPE,
                           solver: SolverConfig | None = None) -> dict[int, ClusterShape]:
    """Average normalized clusters of noiseless single-fault runs, for several alphas at once.

    Each profile holds one loss event at a random position and magnitude. The
    window of ``2 * half_width + 1`` step coefficients around the largest
    ``|beta|`` is divided by its center value; windows are zero-padded at the
    profile edges and averaged elementwise.
    """
    if n_profiles < 1 or half_width < 1:
        raise ModelError("need n_profiles >= 1 and half_width >= 1")
    if n is None:
        n = split_len if split_len > 0 else 4500
    if n < 2 * half_width + 2:
        raise ModelError(f"profile length {n} too short for half_width {half_width}")
    alphas = [int(a) for a in alphas]
    base = solver or SolverConfig()
    cfg = SolverConfig(alpha=max(alphas), lam=base.lam, split_len=split_len,
                       shrink_slope=base.shrink_slope, ramp_gain=base.ramp_gain)
    windows = {a: [] for a in alphas}
    for i in range(n_profiles):
        rng = profile_rng(seed, i)
        pos = int(rng.integers(half_width + 1, n - half_width + 1))
        mag = -float(rng.uniform(*mag_range))
        y = _single_fault_profile(n, pos, mag, slope)
        ests, _ = split_profile_path(y, cfg, alphas)
        for a, est in zip(alphas, ests):
            steps = est.steps
            j = int(np.argmax(np.abs(steps)))
            center = steps[j]
            if center == 0.0:
                continue
            padded = np.concatenate((np.zeros(half_width), steps, np.zeros(half_width)))
            windows[a].append(padded[j : j + 2 * half_width + 1] / center)
    out = {}
    for a in alphas:
        if not windows[a]:
            raise ExtractionError(f"every extraction run at alpha={a} produced an all-zero estimate")
        members = np.array(windows[a])
        info = {"n_profiles": n_profiles, "seed": seed, "half_width": half_width,
                "used": len(members), "n": n}
        out[a] = ClusterShape(members.mean(axis=0), a, split_len, info, members)
    return out


def extract_cluster_shape(alpha: int = 350, split_len: int = 4500, half_width: int = 64,
                          n_profiles: int = 100, seed: int = 0, **kwargs) -> ClusterShape:
    return extract_cluster_shapes([alpha], split_len, half_width, n_profiles, seed, **kwargs)[alpha]


def compensation_vector(shape: ClusterShape, length: int = DEFAULT_COMP_LENGTH) -> CompensationVector:
    if length % 2 == 0 or length < 1:
        raise ModelError(f"compensation length must be odd, got {length}")
    if length > shape.taps.size:
        raise ModelError(f"compensation length {length} exceeds shape length {shape.taps.size}")
    h = length // 2
    c = shape.half_width
    taps = shape.taps[c - h : c + h + 1].copy()
    taps[h] = 0.0
    return CompensationVector(taps, shape.alpha, shape.split_len)


def build_convolution_matrix(shape, m: int) -> np.ndarray:
    """``(K + M - 1) x M`` matrix ``D`` with ``D @ g == np.convolve(shape, g)``."""
    taps = shape.taps if isinstance(shape, ClusterShape) else np.asarray(shape, dtype=np.float64)
    if m < 1:
        raise ModelError("filter length must be >= 1")
    return convolution_matrix(taps, m, mode="full")


def ls_deconv_filter(shape, m: int, target_center: int | None = None) -> DeconvFilter:
    """Least-squares FIR inverse: ``argmin_g ||D g - delta[. - target_center]||``."""
    taps = shape.taps if isinstance(shape, ClusterShape) else np.asarray(shape, dtype=np.float64)
    d = build_convolution_matrix(taps, m)
    rows = d.shape[0]
    if target_center is None:
        target_center = (rows - 1) // 2
    if not 0 <= target_center < rows:
        raise ModelError(f"target_center {target_center} outside 0..{rows - 1}")
    rank = np.linalg.matrix_rank(d)
    if rank < m:
        raise DeconvolutionError(f"convolution matrix is rank deficient ({rank} < {m})")
    target = np.zeros(rows)
    target[target_center] = 1.0
    g, *_ = np.linalg.lstsq(d, target, rcond=None)
    return DeconvFilter(g, delay=target_center - taps.size // 2)


def apply_fir_deconvolution(beta: SparseEstimate, g: DeconvFilter,
                            delay: int | None = None) -> SparseEstimate:
    """Filter the step coefficients with ``g`` and undo the filter delay."""
    delay = g.delay if delay is None else delay
    steps = beta.steps
    full = np.convolve(steps, g.taps)
    n = steps.size
    out = np.zeros(n)
    lo = max(0, -delay)
    hi = min(n, full.size - delay)
    if hi > lo:
        out[lo:hi] = full[lo + delay : hi + delay]
    return SparseEstimate(np.concatenate(([beta.slope], out)))


def approximate_deconvolution(beta_raw: SparseEstimate, comp: CompensationVector,
                              min_magnitude: float = DEFAULT_MIN_MAGNITUDE,
                              solver: SolverConfig | None = None) -> tuple[SparseEstimate, PeakList]:
    """Peak-detect, subtract ``m * comp`` around every peak, clamp sign flips, re-detect.

    Subtractions from all first-pass peaks accumulate before the clamp, so
    overlapping clusters are compensated jointly.
    """
    if solver is not None and (solver.alpha, solver.split_len) != (comp.alpha, comp.split_len):
        warnings.warn(
            f"compensation built at alpha={comp.alpha}, split={comp.split_len} applied to "
            f"alpha={solver.alpha}, split={solver.split_len}",
            ProvenanceWarning, stacklevel=2)
    raw = beta_raw.steps
    n = raw.size
    h = comp.half_width
    peaks = detect_peaks(beta_raw, min_magnitude)
    sub = np.zeros(n + 2 * h)
    for pos, mag in peaks:
        # window for peak at 1-based pos covers padded indices pos-1 .. pos-1+2h
        sub[pos - 1 : pos + 2 * h] += mag * comp.taps
    out = raw - sub[h : h + n]
    out[np.sign(out) != np.sign(raw)] = 0.0
    est = SparseEstimate(np.concatenate(([beta_raw.slope], out)))
    return est, detect_peaks(est, min_magnitude)


def spurious_peaks(peaks: PeakList, truth: EventList) -> int:
    return int(np.setdiff1d(peaks.positions, truth.positions).size)
