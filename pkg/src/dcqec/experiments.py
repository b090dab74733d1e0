"""Threshold scans, finite-size collapse, effective-rate curves and timing.

Instances are addressed by ``(seed, stream_index)`` with stream indices
``0 .. trials-1`` at every grid point, so two decoders scanned with the same
seed see exactly the same errors, whatever the chunking or worker count.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize

from . import __version__
from .lattice import Syndrome, ToricLattice, logical_planes, syndrome_planes
from .neural import MlpModel
from .noise import NoiseSpec, sample_depolarizing_planes
from .pipeline import DECODERS, decode_planes, decode_two_stage, measure_effective_rate
from .uf import uf_decode

__all__ = [
    "ThresholdPoint",
    "CollapseFit",
    "TimingPoint",
    "SyndromeConsistencyError",
    "run_threshold_scan",
    "count_failures",
    "fit_collapse",
    "raw_crossings",
    "run_timing_scan",
    "fit_power_law",
    "find_crossing",
    "run_effective_rate_scan",
    "write_threshold_csv",
    "read_threshold_csv",
    "write_timing_csv",
    "write_effective_rate_csv",
    "format_collapse",
    "metadata_block",
    "TABLE_VERSION",
]

TABLE_VERSION = 1
DEFAULT_CHUNK = 1000


class SyndromeConsistencyError(AssertionError):
    """A decoder returned a correction whose syndrome differs from its input."""


@dataclass(frozen=True)
class ThresholdPoint:
    decoder: str
    L: int
    p_err: float
    trials: int
    failures: int

    def __post_init__(self):
        if not 0 <= self.failures <= self.trials:
            raise ValueError("failures must lie in [0, trials]")

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0

    @property
    def standard_error(self) -> float:
        f = self.failure_rate
        return math.sqrt(f * (1 - f) / self.trials) if self.trials else 0.0


@dataclass(frozen=True)
class CollapseFit:
    p_th: float
    p_th_err: float
    nu: float
    nu_err: float
    quality: float
    coefficients: tuple[float, float, float]
    crossings: tuple = field(default=())

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")


@dataclass(frozen=True)
class TimingPoint:
    decoder: str
    L: int
    p_err: float
    instances: int
    mean_us: float
    var_us: float


# ---------------------------------------------------------------- threshold


def count_failures(decoder: str, L: int, p_err: float, seed: int, start: int, count: int,
                   model: MlpModel | None = None) -> tuple[int, int]:
    """Decode streams ``start .. start+count-1``; returns ``(failures, consistency_violations)``."""
    lat = ToricLattice(L)
    x, z = sample_depolarizing_planes(NoiseSpec(p_err, seed), lat, start, count)
    vd, pd = syndrome_planes(x, z, lat)
    cx, cz = decode_planes(decoder, vd, pd, lat, model)
    sv, sp = syndrome_planes(cx, cz, lat)
    bad = (sv != vd).any(axis=1) | (sp != pd).any(axis=1)
    failed = logical_planes(x ^ cx, z ^ cz, lat).any(axis=1)
    return int(np.count_nonzero(failed & ~bad)), int(np.count_nonzero(bad))


def _chunk_task(args):
    decoder, L, p, seed, start, count, model = args
    return (L, p) + count_failures(decoder, L, p, seed, start, count, model)


def _tasks(decoder, sizes, p_grid, trials, seed, model, chunk):
    for L in sizes:
        for p in p_grid:
            for start in range(0, trials, chunk):
                yield (decoder, int(L), float(p), seed, start, min(chunk, trials - start), model)


def _run_tasks(fn, tasks, workers):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def run_threshold_scan(decoder: str, sizes: Sequence[int], p_grid: Sequence[float], trials: int,
                       seed: int = 0, model: MlpModel | None = None, workers: int = 1,
                       chunk: int = DEFAULT_CHUNK) -> list[ThresholdPoint]:
    """Logical failure counts on every (L, p) grid point.

    Raises :class:`SyndromeConsistencyError` if any correction fails to
    reproduce its syndrome.
    """
    if decoder not in DECODERS:
        raise ValueError(f"unknown decoder {decoder!r}")
    if not sizes or not p_grid:
        raise ValueError("size and p grids must be nonempty")
    if decoder == "ml+uf" and model is None:
        raise ValueError("the ml+uf decoder needs a model")
    totals: dict[tuple[int, float], list[int]] = {(int(L), float(p)): [0, 0] for L in sizes for p in p_grid}
    for L, p, failures, violations in _run_tasks(_chunk_task, _tasks(decoder, sizes, p_grid, trials, seed, model, chunk), workers):
        totals[(L, p)][0] += failures
        totals[(L, p)][1] += violations
    bad = {k: v[1] for k, v in totals.items() if v[1]}
    if bad:
        raise SyndromeConsistencyError(f"syndrome-inconsistent corrections: {bad}")
    return [ThresholdPoint(decoder, L, p, trials, totals[(L, p)][0]) for L in map(int, sizes) for p in map(float, p_grid)]


# ---------------------------------------------------------------- collapse


def _collapse_arrays(points):
    L = np.array([pt.L for pt in points], dtype=float)
    p = np.array([pt.p_err for pt in points], dtype=float)
    n = np.array([pt.trials for pt in points], dtype=float)
    f = np.array([pt.failure_rate for pt in points], dtype=float)
    return L, p, n, f


def _sigma(f, n):
    # floor at one event so points with zero or all failures keep a finite weight
    g = np.clip(f, 1.0 / n, 1.0 - 1.0 / n)
    return np.sqrt(g * (1 - g) / n)


def _chi2(params, L, p, f, sigma, return_coef=False):
    p_th, nu = params
    if nu <= 0.05:
        return np.inf
    x = (p - p_th) * L ** (1.0 / nu)
    A = np.stack([np.ones_like(x), x, x * x], axis=1) / sigma[:, None]
    b = f / sigma
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    r = A @ coef - b
    chi2 = float(r @ r)
    return (chi2, coef) if return_coef else chi2


def _fit_once(L, p, f, sigma, start=None):
    if start is None:
        best = None
        for p0 in np.linspace(p.min(), p.max(), 13):
            for nu0 in (0.8, 1.0, 1.3, 1.6, 2.0, 2.5):
                c = _chi2((p0, nu0), L, p, f, sigma)
                if best is None or c < best[0]:
                    best = (c, (p0, nu0))
        start = best[1]
    res = optimize.minimize(_chi2, x0=np.asarray(start, dtype=float), args=(L, p, f, sigma),
                            method="Nelder-Mead", options={"xatol": 1e-7, "fatol": 1e-9, "maxiter": 4000})
    return res.x


def raw_crossings(points: Iterable[ThresholdPoint]) -> tuple[tuple[int, int, float], ...]:
    """Linear-interpolated crossing p of failure curves for each pair of consecutive sizes."""
    points = list(points)
    sizes = sorted({pt.L for pt in points})
    curves = {L: sorted((pt.p_err, pt.failure_rate) for pt in points if pt.L == L) for L in sizes}
    out = []
    for a, b in zip(sizes, sizes[1:]):
        pa = dict(curves[a])
        pb = dict(curves[b])
        ps = sorted(set(pa) & set(pb))
        d = [pb[q] - pa[q] for q in ps]
        for i in range(len(ps) - 1):
            if d[i] <= 0 < d[i + 1]:
                t = -d[i] / (d[i + 1] - d[i])
                out.append((a, b, ps[i] + t * (ps[i + 1] - ps[i])))
                break
    return tuple(out)


def fit_collapse(points: Iterable[ThresholdPoint], bootstrap: int = 200, seed: int = 0) -> CollapseFit:
    """Fit failure rates to a quadratic master curve in ``(p - p_th) L^(1/nu)``.

    The weighted scatter about the curve is minimised over ``(p_th, nu)``;
    error bars are the standard deviation over parametric binomial bootstrap
    resamples.  ``quality`` is the reduced chi-square of the best fit.
    """
    points = sorted(points, key=lambda pt: (pt.L, pt.p_err))
    sizes = sorted({pt.L for pt in points})
    if len(sizes) < 3:
        raise ValueError("collapse needs at least 3 system sizes")
    for L in sizes:
        if len({pt.p_err for pt in points if pt.L == L}) < 5:
            raise ValueError(f"collapse needs at least 5 error rates per size (L={L})")
    L, p, n, f = _collapse_arrays(points)
    if np.ptp(p) == 0 or np.ptp(f) == 0:
        raise ValueError("degenerate collapse: no variation in error rate or failure rate")
    sigma = _sigma(f, n)
    p_th, nu = _fit_once(L, p, f, sigma)
    chi2, coef = _chi2((p_th, nu), L, p, f, sigma, return_coef=True)
    if not np.isfinite(chi2) or nu <= 0:
        raise ValueError("collapse fit failed")
    dof = max(len(points) - 5, 1)

    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(bootstrap):
        fb = rng.binomial(n.astype(np.int64), f) / n
        samples.append(_fit_once(L, p, fb, _sigma(fb, n), start=(p_th, nu)))
    samples = np.array(samples).reshape(-1, 2)
    p_err = float(samples[:, 0].std(ddof=1)) if bootstrap > 1 else float("nan")
    nu_err = float(samples[:, 1].std(ddof=1)) if bootstrap > 1 else float("nan")
    return CollapseFit(float(p_th), p_err, float(nu), nu_err, chi2 / dof, tuple(float(c) for c in coef),
                       raw_crossings(points))


# ---------------------------------------------------------------- timing


def _time_instances(decoder, lat, vd, pd, model, skip=0):
    times = np.empty(vd.shape[0] - skip)
    for i in range(vd.shape[0]):
        syn = Syndrome(vd[i], pd[i])
        t0 = time.perf_counter_ns()
        if decoder == "uf":
            uf_decode(syn, lat)
            dt = time.perf_counter_ns() - t0
        else:
            dt = decode_two_stage(syn, model, lat).total_us * 1e3
        if i >= skip:
            times[i - skip] = dt / 1e3
    return times


def run_timing_scan(decoder: str, sizes: Sequence[int], p_list: Sequence[float], instances: int,
                    seed: int = 0, model: MlpModel | None = None, warmup: int = 10,
                    chunk: int = 500) -> list[TimingPoint]:
    """Mean and variance of per-instance decode time in microseconds.

    Only decoding is timed; sampling and syndrome extraction happen up front
    for each chunk of instances.  The first ``warmup`` instances at each grid
    point are decoded but not counted (they use streams beyond ``instances``,
    so the timed set is the same with any warmup).
    """
    if warmup < 10:
        raise ValueError("at least 10 warmup instances are required")
    if decoder not in DECODERS:
        raise ValueError(f"unknown decoder {decoder!r}")
    if decoder == "ml+uf" and model is None:
        raise ValueError("the ml+uf decoder needs a model")
    out = []
    for L in sizes:
        lat = ToricLattice(int(L))
        for p in p_list:
            spec = NoiseSpec(float(p), seed)
            wx, wz = sample_depolarizing_planes(spec, lat, instances, warmup)
            vd, pd = syndrome_planes(wx, wz, lat)
            _time_instances(decoder, lat, vd, pd, model, skip=warmup)
            parts = []
            for start in range(0, instances, chunk):
                x, z = sample_depolarizing_planes(spec, lat, start, min(chunk, instances - start))
                vd, pd = syndrome_planes(x, z, lat)
                parts.append(_time_instances(decoder, lat, vd, pd, model))
            t = np.concatenate(parts)
            out.append(TimingPoint(decoder, int(L), float(p), instances, float(t.mean()), float(t.var(ddof=1)) if t.size > 1 else 0.0))
    return out


def fit_power_law(points: Sequence[TimingPoint]) -> tuple[float, float]:
    """Least-squares slope and intercept of log(mean time) against log(2 L^2)."""
    n = np.array([2 * pt.L**2 for pt in points], dtype=float)
    t = np.array([pt.mean_us for pt in points], dtype=float)
    slope, intercept = np.polyfit(np.log(n), np.log(t), 1)
    return float(slope), float(intercept)


def find_crossing(uf_table: Sequence[TimingPoint], ml_table: Sequence[TimingPoint], p_err: float) -> int | None:
    """Smallest L on the shared grid where ML+UF is faster than bare UF at ``p_err``."""
    uf = {pt.L: pt.mean_us for pt in uf_table if math.isclose(pt.p_err, p_err)}
    ml = {pt.L: pt.mean_us for pt in ml_table if math.isclose(pt.p_err, p_err)}
    shared = sorted(set(uf) & set(ml))
    if not shared:
        raise ValueError(f"tables share no lattice sizes at p={p_err}")
    for L in shared:
        if ml[L] < uf[L]:
            return L
    return None


# ---------------------------------------------------------------- effective rate


def run_effective_rate_scan(p_grid: Sequence[float], model: MlpModel, L: int, trials: int, seed: int = 0):
    lat = ToricLattice(L)
    return [measure_effective_rate(float(p), model, lat, trials, seed) for p in p_grid]


# ---------------------------------------------------------------- output


def metadata_block(config: dict) -> str:
    lines = [f"# dcqec {__version__}", f"# table_version: {TABLE_VERSION}"]
    for key in sorted(config):
        lines.append(f"# {key}: {config[key]}")
    return "\n".join(lines) + "\n"


def _write_table(fh, header, rows, metadata):
    if metadata is not None:
        fh.write(metadata_block(metadata))
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def write_threshold_csv(fh, points: Sequence[ThresholdPoint], metadata: dict | None = None) -> None:
    _write_table(
        fh,
        ["decoder", "L", "p", "trials", "failures", "failure_rate", "stderr"],
        [[pt.decoder, pt.L, repr(pt.p_err), pt.trials, pt.failures, repr(pt.failure_rate), repr(pt.standard_error)] for pt in points],
        metadata,
    )


def read_threshold_csv(fh) -> list[ThresholdPoint]:
    rows = csv.DictReader(line for line in fh if not line.startswith("#"))
    return [ThresholdPoint(r["decoder"], int(r["L"]), float(r["p"]), int(r["trials"]), int(r["failures"])) for r in rows]


def write_timing_csv(fh, points: Sequence[TimingPoint], metadata: dict | None = None) -> None:
    _write_table(
        fh,
        ["decoder", "L", "p", "instances", "mean_us", "var_us"],
        [[pt.decoder, pt.L, repr(pt.p_err), pt.instances, f"{pt.mean_us:.3f}", f"{pt.var_us:.3f}"] for pt in points],
        metadata,
    )


def write_effective_rate_csv(fh, points, metadata: dict | None = None) -> None:
    _write_table(
        fh,
        ["p_err", "p_eff", "ratio", "trials"],
        [[repr(pt.p_err), repr(pt.p_eff), "" if pt.ratio is None else repr(pt.ratio), pt.trials] for pt in points],
        metadata,
    )


def format_collapse(fit: CollapseFit) -> str:
    lines = [
        f"table_version: {TABLE_VERSION}",
        f"p_th: {fit.p_th!r}",
        f"p_th_err: {fit.p_th_err!r}",
        f"nu: {fit.nu!r}",
        f"nu_err: {fit.nu_err!r}",
        f"quality: {fit.quality!r}",
    ]
    for a, b, pc in fit.crossings:
        lines.append(f"crossing_L{a}_L{b}: {pc!r}")
    return "\n".join(lines) + "\n"
