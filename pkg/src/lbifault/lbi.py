"""Sparse-Kaczmarz linearized Bregman iterations and the split-profile wrapper."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernel import lbi_sweeps
from .model import FiberProfile, ModelError, SparseEstimate, dense_matrix

DENSE_REFERENCE_LIMIT = 200


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    Attributes:
        alpha: sweeps over all rows (iterations per sample).
        lam: shrinkage threshold, in dB.
        split_len: block length for profile splitting; 0 solves in one block.
        shrink_slope: soft-threshold the slope coefficient like any step.
        ramp_gain: scaling of the slope column. ``None`` uses the plain ramp
            ``k``; a number ``g`` uses ``g * k / n`` for a block of ``n``
            samples so the slope column no longer dominates the row norms.
            Estimates are always reported with the slope in dB per sample.
    """

    alpha: int = 350
    lam: float = 0.5
    split_len: int = 4500
    shrink_slope: bool = True
    ramp_gain: float | None = 10.0

    def __post_init__(self):
        if self.alpha < 1:
            raise ModelError("alpha must be >= 1")
        if not self.lam > 0:
            raise ModelError("lambda must be > 0")
        if self.split_len != 0 and self.split_len < 2:
            raise ModelError("split_len must be 0 or >= 2")
        if self.ramp_gain is not None and not self.ramp_gain > 0:
            raise ModelError("ramp_gain must be positive")

    def ramp(self, n: int) -> float:
        return 1.0 if self.ramp_gain is None else self.ramp_gain / n


@dataclass
class SolverTrace:
    residual_norms: list = field(default_factory=list)
    active_sizes: list = field(default_factory=list)

    def __len__(self):
        return len(self.residual_norms)

    def extend(self, other: "SolverTrace"):
        self.residual_norms.extend(other.residual_norms)
        self.active_sizes.extend(other.active_sizes)


def shrink(x, lam):
    """Soft threshold: ``max(|x| - lam, 0) * sign(x)``; scalars or arrays."""
    if lam < 0:
        raise ModelError("lambda must be >= 0")
    out = np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def _samples(y) -> np.ndarray:
    s = y.samples if isinstance(y, FiberProfile) else np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ModelError("profile contains non-finite samples")
    return np.ascontiguousarray(s, dtype=np.float64)


class _BlockSolver:
    """Resumable LBI state for one block, so one run can report several alphas."""

    def __init__(self, y: np.ndarray, cfg: SolverConfig):
        self.y = y
        self.cfg = cfg
        self.ramp = cfg.ramp(y.size)
        self.v = np.zeros(y.size)
        self.v0 = 0.0
        self.done = 0
        self.trace = SolverTrace()

    def advance_to(self, alpha: int):
        extra = alpha - self.done
        if extra <= 0:
            return
        res = np.zeros(extra)
        act = np.zeros(extra, dtype=np.int64)
        self.v0 = lbi_sweeps(self.y, self.v, self.v0, extra, self.cfg.lam, self.ramp,
                             self.cfg.shrink_slope, res, act)
        self.done = alpha
        self.trace.residual_norms.extend(res.tolist())
        self.trace.active_sizes.extend(act.tolist())

    def estimate(self) -> np.ndarray:
        b0 = shrink(self.v0, self.cfg.lam) if self.cfg.shrink_slope else self.v0
        out = np.empty(self.y.size + 1)
        out[0] = b0 * self.ramp
        out[1:] = shrink(self.v, self.cfg.lam)
        return out


def sparse_kaczmarz(y, cfg: SolverConfig) -> tuple[SparseEstimate, SolverTrace]:
    """Single-block solve: ``alpha * N`` cyclic row updates."""
    est, traces = sparse_kaczmarz_path(y, cfg, [cfg.alpha])
    return est[0], traces


def sparse_kaczmarz_path(y, cfg: SolverConfig, alphas) -> tuple[list[SparseEstimate], SolverTrace]:
    """Estimates after each sweep count in ``alphas`` from one continued run."""
    solver = _BlockSolver(_samples(y), cfg)
    out = []
    for a in sorted(alphas):
        solver.advance_to(int(a))
        out.append(SparseEstimate(solver.estimate()))
    order = np.argsort(np.argsort(alphas))
    return [out[i] for i in order], solver.trace


def block_bounds(n: int, split_len: int) -> list[tuple[int, int]]:
    """0-based half-open block ranges; a short tail (< split_len / 2) joins the previous block."""
    if split_len <= 0 or split_len >= n:
        return [(0, n)]
    starts = list(range(0, n, split_len))
    bounds = [(s, min(s + split_len, n)) for s in starts]
    if len(bounds) > 1 and (bounds[-1][1] - bounds[-1][0]) * 2 < split_len:
        tail = bounds.pop()
        bounds[-1] = (bounds[-1][0], tail[1])
    return bounds


def split_profile_path(y, cfg: SolverConfig, alphas) -> tuple[list[SparseEstimate], list[SolverTrace]]:
    samples = _samples(y)
    n = samples.size
    bounds = block_bounds(n, cfg.split_len)
    order = sorted(int(a) for a in alphas)
    coeffs = [np.zeros(n + 1) for _ in order]
    traces = []
    for bi, (s, e) in enumerate(bounds):
        local = samples[s:e]
        if bi > 0:
            # reference each block to the last sample before it, so its first
            # candidate carries the step at the boundary rather than the level
            local = local - samples[s - 1]
        solver = _BlockSolver(np.ascontiguousarray(local), cfg)
        for i, a in enumerate(order):
            solver.advance_to(a)
            est = solver.estimate()
            if bi == 0:
                coeffs[i][0] = est[0]
            coeffs[i][1 + s : 1 + e] = est[1:]
        traces.append(solver.trace)
    by_alpha = dict(zip(order, coeffs))
    return [SparseEstimate(by_alpha[int(a)].copy()) for a in alphas], traces


def split_profile_run(y, cfg: SolverConfig) -> tuple[SparseEstimate, SolverTrace]:
    """Solve consecutive blocks independently and stitch the steps back together.

    The returned trace concatenates the per-block traces in block order.
    """
    if cfg.split_len == 0:
        return sparse_kaczmarz(y, cfg)
    ests, traces = split_profile_path(y, cfg, [cfg.alpha])
    trace = SolverTrace()
    for t in traces:
        trace.extend(t)
    return ests[0], trace


def dense_reference_solver(y, cfg: SolverConfig) -> SparseEstimate:
    """Row-by-row LBI on the materialized dictionary. Test oracle, N <= 200."""
    samples = _samples(y)
    n = samples.size
    if n > DENSE_REFERENCE_LIMIT:
        raise ModelError(f"dense reference refuses N = {n} > {DENSE_REFERENCE_LIMIT}")
    ramp = cfg.ramp(n)
    a = dense_matrix(n, ramp)
    v = np.zeros(n + 1)
    beta = np.zeros(n + 1)
    for i in range(cfg.alpha * n):
        k = i % n
        row = a[k]
        v += row * (samples[k] - row @ beta) / (row @ row)
        touched = slice(0, k + 2)  # slope plus steps 1..k+1 (1-based)
        beta[touched] = np.sign(v[touched]) * np.maximum(np.abs(v[touched]) - cfg.lam, 0.0)
        if not cfg.shrink_slope:
            beta[0] = v[0]
    beta[0] *= ramp
    return SparseEstimate(beta)
