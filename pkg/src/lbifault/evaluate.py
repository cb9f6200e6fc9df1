"""Contingency tables, MCC scoring, event-count histograms and parameter sweeps."""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from .detect import (DEFAULT_MIN_MAGNITUDE, ClusterShape, approximate_deconvolution,
                     compensation_vector, detect_peaks)
from .lbi import SolverConfig, split_profile_path
from .model import EventList, ModelError, PeakList


@dataclass(frozen=True)
class ContingencyTable:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ModelError(f"negative contingency count in {self}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ContingencyTable") -> "ContingencyTable":
        return ContingencyTable(self.tp + other.tp, self.fp + other.fp,
                                self.fn + other.fn, self.tn + other.tn)


def _match_tolerant(detected: np.ndarray, truth: np.ndarray, tol: int) -> int:
    """Greedy nearest matching within ``tol`` samples; each truth event used once."""
    pairs = sorted((abs(int(d) - int(t)), int(d), int(t))
                   for d in detected for t in truth if abs(int(d) - int(t)) <= tol)
    used_d, used_t = set(), set()
    for _, d, t in pairs:
        if d not in used_d and t not in used_t:
            used_d.add(d)
            used_t.add(t)
    return len(used_d)


def contingency(detected: PeakList, truth: EventList, n: int, tolerance: int = 0) -> ContingencyTable:
    """Position-level confusion counts over the ``n`` step candidates.

    With ``tolerance == 0`` only exact index matches are true positives.
    """
    d = np.unique(detected.positions)
    t = np.unique(truth.positions)
    for arr in (d, t):
        if arr.size and (arr[0] < 1 or arr[-1] > n):
            raise ModelError(f"positions must lie in 1..{n}")
    if tolerance <= 0:
        tp = int(np.intersect1d(d, t).size)
    else:
        tp = _match_tolerant(d, t, tolerance)
    fp = d.size - tp
    fn = t.size - tp
    return ContingencyTable(tp, fp, fn, n - tp - fp - fn)


def mcc(t: ContingencyTable) -> float:
    """Matthews correlation coefficient; 0 when any marginal is empty."""
    num = t.tp * t.tn - t.fp * t.fn  # exact integer
    den = (t.tp + t.fp) * (t.tp + t.fn) * (t.tn + t.fp) * (t.tn + t.fn)
    if den == 0:
        return 0.0
    return num / math.sqrt(den)


def incidence_histogram(runs) -> dict[int, int]:
    """How many runs reported exactly ``c`` events, for each ``c``."""
    return dict(sorted(Counter(len(r) for r in runs).items()))


@dataclass
class SweepResult:
    """Per-axis-point MCC statistics for each method.

    ``mcc[method]`` etc. are lists aligned with ``axis``; ``histograms[method]``
    holds one incidence histogram per axis point and ``per_profile[method]``
    the raw per-profile MCC values.
    """

    axis_name: str
    axis: list
    methods: list
    mcc_mean: dict = field(default_factory=dict)
    mcc_std: dict = field(default_factory=dict)
    histograms: dict = field(default_factory=dict)
    per_profile: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)


def _profile_scores(est, truth, n, comps, min_magnitude, tolerance, compensate):
    """MCC and detections for the raw route and each compensation template."""
    out = {}
    raw_peaks = detect_peaks(est, min_magnitude)
    out["raw"] = raw_peaks
    if compensate:
        for key, comp in comps.items():
            _, peaks = approximate_deconvolution(est, comp, min_magnitude)
            out[key] = peaks
    return {k: (mcc(contingency(p, truth, n, tolerance)), p) for k, p in out.items()}


def sweep(testbench, solver: SolverConfig, *, alphas=None, coeff_lengths=(65,),
          shapes: dict[int, ClusterShape] | None = None, compensate: bool = True,
          min_magnitude: float = DEFAULT_MIN_MAGNITUDE, tolerance: int = 0,
          threads: int = 1) -> SweepResult:
    """Run raw and compensated pipelines over a testbench.

    The axis is the iteration count when several ``alphas`` are given (one
    compensation length), otherwise the compensation length at
    ``solver.alpha``.  ``shapes`` maps alpha to the cluster shape used to build
    the compensation templates; it is required when ``compensate`` is set.
    Results are reduced in profile order, so they do not depend on ``threads``.
    """
    if not testbench:
        raise ModelError("empty testbench")
    alphas = [solver.alpha] if alphas is None else [int(a) for a in alphas]
    coeff_lengths = [int(c) for c in coeff_lengths]
    if not alphas or not coeff_lengths:
        raise ModelError("empty sweep axis")
    by_iterations = len(alphas) > 1
    if by_iterations and len(coeff_lengths) != 1:
        raise ModelError("sweep either iterations or coefficient lengths, not both")
    if compensate and not shapes:
        raise ModelError("compensation requested without cluster shapes")

    comps = {}
    if compensate:
        for a in alphas:
            if a not in shapes:
                raise ModelError(f"no cluster shape for alpha={a}")
            comps[a] = {c: compensation_vector(shapes[a], c) for c in coeff_lengths}
    run_cfg = SolverConfig(alpha=max(alphas), lam=solver.lam, split_len=solver.split_len,
                           shrink_slope=solver.shrink_slope, ramp_gain=solver.ramp_gain)

    def one(item):
        y, truth = item
        ests, _ = split_profile_path(y, run_cfg, alphas)
        return [_profile_scores(est, truth, y.n, comps.get(a, {}), min_magnitude, tolerance,
                                compensate)
                for a, est in zip(alphas, ests)]

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            scored = list(pool.map(one, testbench))
    else:
        scored = [one(item) for item in testbench]

    methods = ["raw"] + (["compensated"] if compensate else [])
    axis = alphas if by_iterations else coeff_lengths
    res = SweepResult("iterations" if by_iterations else "coefficients", axis, methods)
    for m in methods:
        res.mcc_mean[m], res.mcc_std[m], res.histograms[m], res.per_profile[m] = [], [], [], []
        res.counts[m] = []
    for pi, point in enumerate(axis):
        ai = pi if by_iterations else 0
        key_len = coeff_lengths[0] if by_iterations else point
        for m in methods:
            key = "raw" if m == "raw" else key_len
            vals = np.array([s[ai][key][0] for s in scored])
            peaks = [s[ai][key][1] for s in scored]
            res.mcc_mean[m].append(float(vals.mean()))
            res.mcc_std[m].append(float(vals.std()))
            res.histograms[m].append(incidence_histogram(peaks))
            res.per_profile[m].append(vals.tolist())
            res.counts[m].append([len(p) for p in peaks])
    return res
