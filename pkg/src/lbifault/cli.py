"""``lbifault`` command line: simulate, calibrate, detect, bench, hw.

Exit codes: 0 success, 2 usage error, 1 runtime error.  Data goes to files
under ``--output-dir`` (or stdout for ``hw``); progress and warnings go to
stderr.  Outputs depend only on flags and ``--seed``.
"""

from __future__ import annotations

import argparse
import logging
import os
from pathlib import Path
import sys
import time
import warnings

import numpy as np

from . import io as aio
from .detect import (DEFAULT_COMP_LENGTH, DEFAULT_MIN_MAGNITUDE, ProvenanceWarning,
                     apply_fir_deconvolution, approximate_deconvolution, compensation_vector,
                     detect_peaks, extract_cluster_shapes, ls_deconv_filter)
from .evaluate import contingency, mcc, sweep
from .hwcost import DatapathConfig, estimate_cycles, worst_case_cycles
from .lbi import SolverConfig, split_profile_run
from .model import ModelError, SparseEstimate
from .simulate import DEFAULT_SLOPE, NoiseConfig, TestbenchConfig, generate_profile

log = logging.getLogger("lbifault")


class UsageError(Exception):
    pass


def _positive_int(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _odd_int(s):
    v = _positive_int(s)
    if v % 2 == 0:
        raise argparse.ArgumentTypeError(f"must be odd, got {v}")
    return v


def _nonneg_float(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    if not v >= 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be a finite number >= 0, got {s}")
    return v


def _range_spec(s):
    """``A:B:step`` inclusive of ``B`` when it lies on the grid."""
    parts = s.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected A:B:step, got {s!r}")
    try:
        a, b, step = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers in {s!r}") from None
    if a < 1 or step < 1 or b < a:
        raise argparse.ArgumentTypeError(f"need 1 <= A <= B and step >= 1 in {s!r}")
    return list(range(a, b + 1, step))


def _odd_list(s):
    out = []
    for p in s.split(","):
        try:
            out.append(_odd_int(p.strip()))
        except argparse.ArgumentTypeError as exc:
            raise argparse.ArgumentTypeError(f"coefficient length {p!r}: {exc}") from None
    return out


def _split_len(s):
    v = _nonneg_int(s)
    if v == 1:
        raise argparse.ArgumentTypeError("split length must be 0 or >= 2")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lbifault", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    p.add_argument("--output-dir", type=Path, default=Path("."))
    p.add_argument("--delimiter", default=aio.DEFAULT_DELIMITER)
    p.add_argument("--verbose", "-v", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a testbench directory")
    s.add_argument("--profiles", type=_positive_int, default=100)
    s.add_argument("--n", type=_positive_int, default=15000)
    s.add_argument("--events", type=_nonneg_int, default=5)
    s.add_argument("--mag-min", type=_nonneg_float, default=0.1)
    s.add_argument("--mag-max", type=_nonneg_float, default=5.0)
    s.add_argument("--slope", type=float, default=DEFAULT_SLOPE)
    s.add_argument("--noise-sigma", type=_nonneg_float, default=0.1)
    s.add_argument("--noise-growth", type=_nonneg_float, default=0.0)
    s.add_argument("--min-separation", type=_nonneg_int, default=0)

    def solver_flags(q, alpha):
        q.add_argument("--iterations", type=_positive_int, default=alpha)
        q.add_argument("--split", type=_split_len, default=4500)
        q.add_argument("--lam", type=_nonneg_float, default=0.5)

    c = sub.add_parser("calibrate", help="extract the cluster shape and compensation vector")
    solver_flags(c, 350)
    c.add_argument("--shape-profiles", type=_positive_int, default=100)
    c.add_argument("--coeffs", type=_odd_int, default=DEFAULT_COMP_LENGTH)
    c.add_argument("--half-width", type=_positive_int, default=64)
    c.add_argument("--shape-n", type=_positive_int, default=None,
                   help="extraction profile length (default: the split length)")
    c.add_argument("--cache-dir", type=Path, default=None)

    d = sub.add_parser("detect", help="locate faults in one profile")
    d.add_argument("profile", type=Path)
    solver_flags(d, 200)
    g = d.add_mutually_exclusive_group()
    g.add_argument("--compensate", type=Path, metavar="FILE", help="compensation vector file")
    g.add_argument("--ls-deconv", type=Path, metavar="FILE", help="cluster shape file (LS inverse)")
    d.add_argument("--ls-length", type=_positive_int, default=DEFAULT_COMP_LENGTH)
    d.add_argument("--truth", type=Path, default=None)
    d.add_argument("--min-magnitude", type=_nonneg_float, default=DEFAULT_MIN_MAGNITUDE)
    d.add_argument("--tolerance", type=_nonneg_int, default=0,
                   help="match detections within this many samples (0 = exact)")
    d.add_argument("--overlay", action="store_true", help="also write estimate-overlay plot data")
    d.add_argument("--timing", action="store_true", help="record wall-clock time in the result")

    b = sub.add_parser("bench", help="MCC sweeps over a testbench directory")
    b.add_argument("testbench", type=Path)
    solver_flags(b, 350)
    b.add_argument("--sweep-iterations", type=_range_spec, default=None, metavar="A:B:STEP")
    b.add_argument("--sweep-coeffs", type=_odd_list, default=None, metavar="L1,L2,...")
    comp = b.add_mutually_exclusive_group()
    comp.add_argument("--with-compensation", dest="compensate", action="store_true", default=True)
    comp.add_argument("--without-compensation", dest="compensate", action="store_false")
    b.add_argument("--shape-profiles", type=_positive_int, default=100)
    b.add_argument("--half-width", type=_positive_int, default=64)
    b.add_argument("--min-magnitude", type=_nonneg_float, default=DEFAULT_MIN_MAGNITUDE)
    b.add_argument("--tolerance", type=_nonneg_int, default=0)
    b.add_argument("--cache-dir", type=Path, default=None)

    h = sub.add_parser("hw", help="cycle count of the compensation datapath")
    h.add_argument("--n", type=_positive_int, required=True)
    h.add_argument("--s", type=_positive_int, required=True)
    h.add_argument("--peaks", required=True,
                   help="peak count (worst case) or a file of peak positions (stream model)")
    return p


def _solver(a) -> SolverConfig:
    if not a.lam > 0:
        raise UsageError("--lam must be > 0")
    return SolverConfig(alpha=a.iterations, lam=a.lam, split_len=a.split)


# calibration with an on-disk cache ------------------------------------------

def _cache_path(cache_dir: Path, alpha, split, length) -> Path:
    return cache_dir / f"comp_a{alpha}_s{split}_c{length}.json"


def _shape_path(cache_dir: Path, alpha, split) -> Path:
    return cache_dir / f"shape_a{alpha}_s{split}.json"


def _shapes(alphas, solver: SolverConfig, *, half_width, n_profiles, seed, shape_n, cache_dir):
    """Cluster shapes per alpha; cached shapes are reused when their extraction settings match."""
    want = {"n_profiles": n_profiles, "seed": seed, "half_width": half_width}
    out, missing = {}, []
    for a in alphas:
        path = _shape_path(cache_dir, a, solver.split_len) if cache_dir else None
        if path and path.exists():
            shape = aio.read_cluster_shape(path)
            ext = shape.extraction
            if all(ext.get(k) == v for k, v in want.items()) and (
                    shape_n is None or ext.get("n") == shape_n):
                log.info("cluster shape for alpha=%d from cache %s", a, path)
                out[a] = shape
                continue
        missing.append(a)
    if missing:
        log.info("extracting cluster shapes for alpha=%s over %d profiles", missing, n_profiles)
        new = extract_cluster_shapes(missing, solver.split_len, half_width, n_profiles, seed,
                                     n=shape_n, solver=solver)
        for a, shape in new.items():
            out[a] = shape
            if cache_dir:
                aio.write_cluster_shape(_shape_path(cache_dir, a, solver.split_len), shape)
    return out


def cmd_simulate(a) -> int:
    if a.mag_min <= 0 or a.mag_min > a.mag_max:
        raise UsageError("need 0 < --mag-min <= --mag-max")
    noise = NoiseConfig.silent() if a.noise_sigma == 0 else NoiseConfig(
        sigma0=a.noise_sigma, growth=a.noise_growth)
    cfg = TestbenchConfig(n_profiles=a.profiles, n=a.n, n_events=a.events, mag_min=a.mag_min,
                          mag_max=a.mag_max, slope=a.slope, noise=noise, seed=a.seed,
                          min_separation=a.min_separation)
    out = a.output_dir
    out.mkdir(parents=True, exist_ok=True)
    for i in range(cfg.n_profiles):
        y, truth = generate_profile(cfg, i)
        aio.write_profile(out / f"profile_{i:04d}.csv", y, a.delimiter)
        aio.write_truth(out / f"truth_{i:04d}.csv", truth, a.delimiter, meta={"profile_index": i})
    aio.write_json(out / "testbench.json", {"format_version": aio.FORMAT_VERSION,
                                              "kind": "testbench", "config": cfg.to_dict()})
    log.info("wrote %d profiles to %s", cfg.n_profiles, out)
    return 0


def cmd_calibrate(a) -> int:
    solver = _solver(a)
    cache = a.cache_dir or a.output_dir
    cpath = _cache_path(cache, solver.alpha, solver.split_len, a.coeffs)
    shape = _shapes([solver.alpha], solver, half_width=a.half_width, n_profiles=a.shape_profiles,
                    seed=a.seed, shape_n=a.shape_n, cache_dir=cache)[solver.alpha]
    if 2 * shape.half_width + 1 < a.coeffs:
        raise UsageError(f"--coeffs {a.coeffs} exceeds the shape length {shape.taps.size}")
    comp = compensation_vector(shape, a.coeffs)
    extraction = dict(shape.extraction, length=a.coeffs)
    aio.write_compensation(cpath, comp, extraction)
    if a.cache_dir:
        # keep a copy next to the other outputs as well
        aio.write_cluster_shape(_shape_path(a.output_dir, solver.alpha, solver.split_len), shape)
        aio.write_compensation(_cache_path(a.output_dir, solver.alpha, solver.split_len, a.coeffs),
                               comp, extraction)
    log.info("compensation vector written to %s", cpath)
    return 0


def cmd_detect(a) -> int:
    solver = _solver(a)
    y = aio.read_profile(a.profile, a.delimiter)
    truth = aio.read_truth(a.truth, a.delimiter) if a.truth else None
    t0 = time.perf_counter()
    raw, _ = split_profile_run(y, solver)
    series = {"raw": raw.steps}
    if a.compensate:
        comp = aio.read_compensation(a.compensate)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ProvenanceWarning)
            est, peaks = approximate_deconvolution(raw, comp, a.min_magnitude, solver)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        mode = "compensated"
        series["compensated"] = est.steps
    elif a.ls_deconv:
        shape = aio.read_cluster_shape(a.ls_deconv)
        if (shape.alpha, shape.split_len) != (solver.alpha, solver.split_len):
            print(f"warning: cluster shape built at alpha={shape.alpha}, split={shape.split_len} "
                  f"applied to alpha={solver.alpha}, split={solver.split_len}", file=sys.stderr)
        est = apply_fir_deconvolution(raw, ls_deconv_filter(shape, a.ls_length))
        peaks = detect_peaks(est, a.min_magnitude)
        mode = "ls-deconv"
        series["ls_deconv"] = est.steps
    else:
        peaks = detect_peaks(raw, a.min_magnitude)
        mode = "raw"
    elapsed = time.perf_counter() - t0
    table = score = None
    if truth is not None:
        table = contingency(peaks, truth, y.n, a.tolerance)
        score = mcc(table)
        series = {"truth": SparseEstimate.from_events(y.n, truth).steps, **series}
    stem = a.profile.stem
    solver_doc = {"alpha": solver.alpha, "lam": solver.lam, "split_len": solver.split_len,
                  "ramp_gain": solver.ramp_gain, "min_magnitude": a.min_magnitude}
    out = a.output_dir / f"result_{stem}.json"
    aio.write_result(out, solver=solver_doc, events=peaks, mode=mode, table=table, mcc=score,
                     timing=elapsed if a.timing else None, source=a.profile.name)
    if a.overlay:
        aio.emit_plot_data("estimate-overlay", series, a.output_dir / f"overlay_{stem}.csv",
                           a.delimiter)
    log.info("%s: %d events (%s) in %.2fs", stem, len(peaks), mode, elapsed)
    return 0


def cmd_bench(a) -> int:
    solver = _solver(a)
    if a.sweep_iterations and a.sweep_coeffs and len(a.sweep_coeffs) > 1:
        raise UsageError("sweep either iterations or coefficient lengths, not both")
    alphas = a.sweep_iterations or [solver.alpha]
    coeffs = a.sweep_coeffs or [DEFAULT_COMP_LENGTH]
    pairs = aio.list_profiles(a.testbench)
    if not pairs:
        raise RuntimeError(f"no profile_*.csv files in {a.testbench}")
    testbench = []
    for p, t in pairs:
        if t is None:
            raise RuntimeError(f"no truth file for {p.name}")
        testbench.append((aio.read_profile(p, a.delimiter), aio.read_truth(t, a.delimiter)))
    shapes = None
    if a.compensate:
        need = max(coeffs) // 2
        if need > a.half_width:
            raise UsageError(f"--half-width {a.half_width} too small for {max(coeffs)} coefficients")
        shapes = _shapes(alphas, solver, half_width=a.half_width, n_profiles=a.shape_profiles,
                         seed=a.seed, shape_n=None, cache_dir=a.cache_dir)
    log.info("sweeping %d profiles", len(testbench))
    res = sweep(testbench, solver, alphas=alphas, coeff_lengths=coeffs, shapes=shapes,
                compensate=a.compensate, min_magnitude=a.min_magnitude, tolerance=a.tolerance,
                threads=a.threads)
    out = a.output_dir
    meta = {"split_len": solver.split_len, "lam": solver.lam, "profiles": len(testbench),
            "min_magnitude": a.min_magnitude, "tolerance": a.tolerance}
    aio.write_sweep_table(out / "sweep.csv", res, a.delimiter, meta)
    kind = "mcc-vs-iterations" if res.axis_name == "iterations" else "mcc-vs-coefficients"
    aio.emit_plot_data(kind, res, out / f"plot_{kind}.csv", a.delimiter)
    for i, x in enumerate(res.axis):
        hist = {m: res.histograms[m][i] for m in res.methods}
        aio.emit_plot_data("histogram", hist, out / f"histogram_{res.axis_name}_{x}.csv",
                           a.delimiter)
    for i, x in enumerate(res.axis):
        line = "  ".join(f"{m}={res.mcc_mean[m][i]:.4f}" for m in res.methods)
        log.info("%s=%s  %s", res.axis_name, x, line)
    return 0


def cmd_hw(a) -> int:
    try:
        return _hw(a)
    except ModelError as exc:
        raise UsageError(str(exc)) from exc


def _hw(a) -> int:
    peaks = a.peaks
    if peaks.strip().isdigit():
        p = int(peaks)
        odd = a.s % 2 == 1
        cfg = DatapathConfig(a.s, a.n, require_odd=False)
        total = worst_case_cycles(cfg, p)
        rows = [("model", "worst-case"), ("n", cfg.n), ("s", cfg.s), ("peaks", p),
                ("extra_cycles", total - cfg.n)]
        if not odd:
            print("warning: even shift-register length; closed-form bound only", file=sys.stderr)
    else:
        path = Path(peaks)
        if not path.exists():
            raise UsageError(f"--peaks must be a count or an existing file, got {peaks!r}")
        cfg = DatapathConfig(a.s, a.n)
        pos = _read_positions(path, a.delimiter)
        total = estimate_cycles(cfg, pos)
        rows = [("model", "stream"), ("n", cfg.n), ("s", cfg.s), ("peaks", len(pos)),
                ("extra_cycles", total - cfg.n), ("worst_case", worst_case_cycles(cfg, len(pos)))]
    print(total)
    for k, v in rows:
        print(f"{k}{a.delimiter}{v}")
    return 0


def _read_positions(path: Path, delimiter: str) -> list[int]:
    """Peak positions from an event/result file or a plain one-integer-per-line list."""
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return [int(p) for p, _ in aio.read_result(path)["events"]]
    if text.startswith("#"):
        return [int(p) for p, _ in aio.read_events(path, delimiter)]
    out = []
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split(delimiter)[0].strip()
        if not line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise aio.FormatError(path, no, f"not an integer position: {line!r}") from None
    return out


COMMANDS = {"simulate": cmd_simulate, "calibrate": cmd_calibrate, "detect": cmd_detect,
            "bench": cmd_bench, "hw": cmd_hw}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code or 0)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    log.propagate = False
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lbifault {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ModelError, aio.FormatError, RuntimeError, OSError) as exc:
        print(f"lbifault {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
