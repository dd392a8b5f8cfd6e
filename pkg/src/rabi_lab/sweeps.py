"""Grid sweeps over coupling, truncation and level splitting.

Every sweep evaluates independent grid points, so the work is farmed out
to a process pool and merged back in grid order; output is identical for
any worker count because each point's result depends only on its inputs.
Worker count resolution: an explicit request is capped by the
RABI_LAB_THREADS environment variable (0 means the CPU count), default 1.

Each point is guarded by a truncation sentinel: the summed photon
population of every retained state beyond 0.9 * n_trunc must stay below
SENTINEL_THRESHOLD.  Failing points are kept in the output with their
sentinel column cleared, never dropped, and the indices are listed in the
result metadata so callers can escalate.
"""

from __future__ import annotations

import math
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .eigensolve import SolverError, Spectrum, eig_sym_dense, eig_sym_tridiag
from .model import (
    ModelParams,
    Truncation,
    build_hamiltonian,
    critical_coupling,
    sector_hamiltonian,
    shifted_energy,
)
from .parity import (
    DEFAULT_EPS_PAR,
    fock_populations,
    min_pair_parity_curves,
    pair_report,
)

__all__ = [
    "PARITY_COLUMNS",
    "CONVERGENCE_COLUMNS",
    "PHASE_COLUMNS",
    "SENTINEL_THRESHOLD",
    "SentinelResult",
    "SweepResult",
    "convergence_sentinel",
    "convergence_sweep",
    "coupling_sweep",
    "grid_values",
    "phase_boundary_scan",
    "resolve_workers",
    "solve_point",
    "tail_population",
]

SENTINEL_THRESHOLD = 1e-12

PARITY_COLUMNS = (
    "g",
    "g_over_gc",
    "level",
    "energy",
    "energy_shifted",
    "parity",
    "pair_index",
    "pair_gap_shifted",
    "pair_parity_sum",
    "p_even",
    "p_odd",
    "sentinel",
)

CONVERGENCE_COLUMNS = (
    "g",
    "g_over_gc",
    "n_trunc",
    "level",
    "energy",
    "abs_diff_vs_ref",
    "sentinel",
)

PHASE_COLUMNS = (
    "delta",
    "g_c",
    "pair_index",
    "onset_g",
    "onset_g_over_gc",
    "grid_step",
    "found",
    "degenerate",
)


@dataclass
class SweepResult:
    """Tabular sweep output: column names, rows in grid order, metadata."""

    columns: tuple[str, ...]
    rows: list[tuple]
    meta: dict


@dataclass(frozen=True)
class SentinelResult:
    passed: bool
    max_tail_population: float
    threshold: float
    tail_start: int
    n_trunc: int


def grid_values(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive uniform grid start, start+step, ... up to stop.

    The end point is included within a small relative guard so ranges like
    0:2:0.01 land on the intended 201 points despite binary rounding.
    """
    start, stop, step = float(start), float(stop), float(step)
    if not all(map(math.isfinite, (start, stop, step))):
        raise ValueError("grid bounds and step must be finite")
    if step <= 0:
        raise ValueError(f"grid step must be > 0, got {step}")
    if stop < start:
        raise ValueError(f"grid stop {stop} is below start {start}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def tail_start_index(n_trunc: int) -> int:
    """First photon index counted as tail: ceil(0.9 * n_trunc), exactly."""
    return (9 * n_trunc + 9) // 10


def tail_population(vectors: np.ndarray, trunc: Truncation) -> float:
    """Largest tail photon population over the given full-basis columns."""
    v = np.asarray(vectors, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] != trunc.dim:
        raise ValueError(f"vectors have length {v.shape[0]}, expected {trunc.dim}")
    v2 = v * v
    pops = v2[0::2, :] + v2[1::2, :]
    t0 = tail_start_index(trunc.n_trunc)
    if t0 >= trunc.n_trunc:
        return 0.0
    return float(pops[t0:, :].sum(axis=0).max())


def sector_tail_population(vectors: np.ndarray, trunc: Truncation) -> float:
    """Same check for sector eigenvectors, which are photon-indexed directly."""
    v = np.asarray(vectors, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] != trunc.n_trunc:
        raise ValueError(f"vectors have length {v.shape[0]}, expected {trunc.n_trunc}")
    t0 = tail_start_index(trunc.n_trunc)
    if t0 >= trunc.n_trunc:
        return 0.0
    return float((v[t0:, :] ** 2).sum(axis=0).max())


def solve_point(params: ModelParams, trunc: Truncation, n_levels: int) -> Spectrum:
    """Dense full-operator solve for the lowest n_levels at one parameter point."""
    if not 1 <= n_levels <= trunc.dim:
        raise ValueError(f"n_levels must be in [1, {trunc.dim}], got {n_levels}")
    return eig_sym_dense(build_hamiltonian(params, trunc), n_levels)


def convergence_sentinel(
    params: ModelParams, trunc: Truncation, n_levels: int = 8
) -> SentinelResult:
    """Solve one point and check that no retained state leaks into the tail."""
    spectrum = solve_point(params, trunc, n_levels)
    worst = tail_population(spectrum.eigenvectors, trunc)
    return SentinelResult(
        passed=worst < SENTINEL_THRESHOLD,
        max_tail_population=worst,
        threshold=SENTINEL_THRESHOLD,
        tail_start=tail_start_index(trunc.n_trunc),
        n_trunc=trunc.n_trunc,
    )


def resolve_workers(workers: Optional[int] = None) -> int:
    """Effective worker count: requested (default 1) capped by RABI_LAB_THREADS."""
    if workers is None:
        workers = 1
    workers = int(workers)
    if workers < 0:
        raise ValueError(f"workers must be >= 0, got {workers}")
    if workers == 0:
        workers = os.cpu_count() or 1
    env = os.environ.get("RABI_LAB_THREADS", "").strip()
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(f"RABI_LAB_THREADS must be an integer, got {env!r}") from None
        if cap < 0:
            raise ValueError(f"RABI_LAB_THREADS must be >= 0, got {cap}")
        if cap == 0:
            cap = os.cpu_count() or 1
        workers = min(workers, cap)
    return max(1, workers)


def _run_jobs(worker, jobs: list, workers: int) -> list:
    """Map jobs to results preserving order; pool only when workers > 1."""
    if workers <= 1 or len(jobs) <= 1:
        return [worker(job) for job in jobs]
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs)), mp_context=ctx) as pool:
        return list(pool.map(worker, jobs, chunksize=1))


def _coupling_point(job: tuple) -> tuple[list[tuple], bool]:
    index, delta, g, gc, n_trunc, n_levels, eps_par = job
    params = ModelParams(delta, g)
    trunc = Truncation(n_trunc)
    try:
        spectrum = solve_point(params, trunc, n_levels)
    except SolverError as exc:
        raise SolverError(f"grid index {index} (delta={delta!r}, g={g!r}): {exc}") from exc
    ok = tail_population(spectrum.eigenvectors, trunc) < SENTINEL_THRESHOLD
    pairs = pair_report(spectrum, params, trunc, eps_par)
    rows = []
    for pair in pairs:
        for side in (0, 1):
            rows.append(
                (
                    g,
                    g / gc,
                    2 * pair.pair_index + side,
                    pair.energies[side],
                    pair.energies_shifted[side],
                    pair.parity[side],
                    pair.pair_index,
                    pair.gap_shifted,
                    pair.parity_sum,
                    pair.p_even[side],
                    pair.p_odd[side],
                    int(ok),
                )
            )
    return rows, ok


def coupling_sweep(
    delta: float,
    g_grid: Optional[Sequence[float]] = None,
    *,
    ratio_grid: Optional[Sequence[float]] = None,
    n_levels: int = 8,
    trunc: Truncation = Truncation(1000),
    eps_par: float = DEFAULT_EPS_PAR,
    workers: Optional[int] = None,
) -> SweepResult:
    """Parity diagnostics for the lowest levels along a coupling grid.

    Exactly one of ``g_grid`` (absolute) or ``ratio_grid`` (units of g_c)
    selects the axis.  Emits two rows per pair and point in the pinned
    parity table layout.
    """
    t0 = time.perf_counter()
    if (g_grid is None) == (ratio_grid is None):
        raise ValueError("provide exactly one of g_grid or ratio_grid")
    gc = critical_coupling(delta)
    if ratio_grid is not None:
        grid = np.asarray(ratio_grid, dtype=float) * gc
    else:
        grid = np.asarray(g_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("coupling grid must be a non-empty 1-d sequence")
    if not np.isfinite(grid).all() or (grid < 0).any():
        raise ValueError("coupling grid values must be finite and >= 0")
    if n_levels % 2 or n_levels < 2:
        raise ValueError(f"n_levels must be even and >= 2, got {n_levels}")
    effective = resolve_workers(workers)
    jobs = [
        (i, float(delta), float(g), gc, trunc.n_trunc, n_levels, float(eps_par))
        for i, g in enumerate(grid)
    ]
    results = _run_jobs(_coupling_point, jobs, effective)
    rows: list[tuple] = []
    failures = []
    for i, (block, ok) in enumerate(results):
        rows.extend(block)
        if not ok:
            failures.append(i)
    return SweepResult(
        columns=PARITY_COLUMNS,
        rows=rows,
        meta={
            "kind": "coupling_sweep",
            "delta": float(delta),
            "g_c": gc,
            "grid_points": len(grid),
            "g_first": float(grid[0]),
            "g_last": float(grid[-1]),
            "n_trunc": trunc.n_trunc,
            "n_levels": n_levels,
            "eps_par": float(eps_par),
            "workers": effective,
            "sentinel_failures": failures,
            "wall_time_s": time.perf_counter() - t0,
        },
    )


def _sector_first_index(vector: np.ndarray, sector: int) -> int:
    idx = np.flatnonzero(np.abs(vector) > 1e-12)
    if not idx.size:
        return 2 * len(vector)
    n0 = int(idx[0])
    s0 = sector * (1 if n0 % 2 == 0 else -1)
    return 2 * n0 + (0 if s0 == 1 else 1)


def merged_sector_levels(
    params: ModelParams, trunc: Truncation, n_levels: int
) -> tuple[np.ndarray, float]:
    """Lowest n_levels of the union of both parity sectors.

    Returns (energies ascending, max tail population over the kept
    states).  Exact cross-sector ties are ordered by the full-basis index
    of the first nonzero component, the same rule the dense path applies.
    """
    if not 1 <= n_levels <= trunc.dim:
        raise ValueError(f"n_levels must be in [1, {trunc.dim}], got {n_levels}")
    per_sector = min(n_levels, trunc.n_trunc)
    entries = []
    for sector in (1, -1):
        diag, off = sector_hamiltonian(params, trunc, sector)
        spec = eig_sym_tridiag(diag, off, per_sector)
        for i in range(per_sector):
            vec = spec.eigenvectors[:, i]
            entries.append(
                (float(spec.eigenvalues[i]), _sector_first_index(vec, sector), sector, vec)
            )
    entries.sort(key=lambda item: (item[0], item[1]))
    kept = entries[:n_levels]
    energies = np.array([item[0] for item in kept])
    tails = [sector_tail_population(item[3], trunc) for item in kept]
    return energies, max(tails)


def _convergence_point(job: tuple) -> tuple[list[tuple], list[int]]:
    index, delta, g, gc, trunc_list, ref_trunc, n_levels = job
    params = ModelParams(delta, g)
    try:
        ref_energies, ref_tail = merged_sector_levels(
            params, Truncation(ref_trunc), n_levels
        )
        rows = []
        bad = []
        for n in trunc_list:
            energies, tail = merged_sector_levels(params, Truncation(n), n_levels)
            ok = tail < SENTINEL_THRESHOLD
            if not ok:
                bad.append(n)
            for level in range(n_levels):
                rows.append(
                    (
                        g,
                        g / gc,
                        n,
                        level,
                        energies[level],
                        abs(energies[level] - ref_energies[level]),
                        int(ok),
                    )
                )
    except SolverError as exc:
        raise SolverError(f"grid index {index} (delta={delta!r}, g={g!r}): {exc}") from exc
    if ref_tail >= SENTINEL_THRESHOLD:
        bad.append(ref_trunc)
    return rows, bad


def convergence_sweep(
    delta: float,
    g_grid: Optional[Sequence[float]] = None,
    *,
    ratio_grid: Optional[Sequence[float]] = None,
    trunc_list: Sequence[int] = (200, 400, 1000),
    ref_trunc: int = 2000,
    n_levels: int = 8,
    workers: Optional[int] = None,
) -> SweepResult:
    """Truncation-convergence table |E_i(N) - E_i(N_ref)| along a coupling grid.

    All energies come from the merged parity-sector path, so the study
    isolates the Fock cutoff and every truncation goes through the same
    solver.  The reference must not be smaller than any candidate.
    """
    t0 = time.perf_counter()
    if (g_grid is None) == (ratio_grid is None):
        raise ValueError("provide exactly one of g_grid or ratio_grid")
    trunc_list = [int(n) for n in trunc_list]
    if not trunc_list:
        raise ValueError("trunc_list must not be empty")
    ref_trunc = int(ref_trunc)
    if ref_trunc < max(trunc_list):
        raise ValueError(
            f"reference truncation {ref_trunc} is below max candidate {max(trunc_list)}"
        )
    gc = critical_coupling(delta)
    if ratio_grid is not None:
        grid = np.asarray(ratio_grid, dtype=float) * gc
    else:
        grid = np.asarray(g_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("coupling grid must be a non-empty 1-d sequence")
    if not np.isfinite(grid).all() or (grid < 0).any():
        raise ValueError("coupling grid values must be finite and >= 0")
    effective = resolve_workers(workers)
    jobs = [
        (i, float(delta), float(g), gc, tuple(trunc_list), ref_trunc, int(n_levels))
        for i, g in enumerate(grid)
    ]
    results = _run_jobs(_convergence_point, jobs, effective)
    rows: list[tuple] = []
    failures = []
    for i, (block, bad) in enumerate(results):
        rows.extend(block)
        if bad:
            failures.append({"grid_index": i, "n_trunc": sorted(set(bad))})
    return SweepResult(
        columns=CONVERGENCE_COLUMNS,
        rows=rows,
        meta={
            "kind": "convergence_sweep",
            "delta": float(delta),
            "g_c": gc,
            "grid_points": len(grid),
            "g_first": float(grid[0]),
            "g_last": float(grid[-1]),
            "trunc_list": trunc_list,
            "ref_trunc": ref_trunc,
            "n_levels": int(n_levels),
            "workers": effective,
            "sentinel_failures": failures,
            "wall_time_s": time.perf_counter() - t0,
        },
    )


def _phase_point(job: tuple) -> list[tuple]:
    delta, ratios, pairs, eps_par, n_trunc = job
    trunc = Truncation(n_trunc)
    gc = critical_coupling(delta)
    grid = np.asarray(ratios, dtype=float) * gc
    params0 = ModelParams(delta, float(grid[0]))
    try:
        first = solve_point(params0, trunc, 2 * max(pairs) + 2)
        curves = min_pair_parity_curves(
            delta, grid, pairs, trunc, eps_par, stop_when_all_found=True
        )
    except SolverError as exc:
        raise SolverError(f"delta={delta!r}: {exc}") from exc
    step = float(grid[1] - grid[0]) if len(grid) > 1 else math.nan
    rows = []
    for pair in pairs:
        degenerate = bool(first.near_degenerate[2 * pair])
        onset_idx = next(
            (i for i, v in enumerate(curves[pair]) if v < 1.0 - eps_par), None
        )
        if onset_idx is None:
            rows.append((delta, gc, pair, math.nan, math.nan, step, 0, int(degenerate)))
        else:
            g = float(grid[onset_idx])
            rows.append((delta, gc, pair, g, g / gc, step, 1, int(degenerate)))
    return rows


def phase_boundary_scan(
    delta_grid: Sequence[float],
    pair_indices: Sequence[int] = (0, 1),
    *,
    ratio_grid: Optional[Sequence[float]] = None,
    eps_par: float = DEFAULT_EPS_PAR,
    trunc: Truncation = Truncation(1000),
    workers: Optional[int] = None,
) -> SweepResult:
    """Irregularity onset per (delta, pair) over a shared g/g_c grid.

    Rows where the pair is already degenerate at the smallest coupling of
    the grid carry a degenerate flag: their per-state parities are
    solver-arbitrary from the start and the onset column is not a
    boundary in any physical sense there.
    """
    t0 = time.perf_counter()
    deltas = [float(d) for d in delta_grid]
    if not deltas:
        raise ValueError("delta_grid must not be empty")
    for d in deltas:
        if not (math.isfinite(d) and d >= 0):
            raise ValueError(f"delta values must be finite and >= 0, got {d}")
    pairs = sorted(set(int(p) for p in pair_indices))
    if not pairs or pairs[0] < 0:
        raise ValueError(f"pair indices must be non-negative, got {pair_indices!r}")
    if ratio_grid is None:
        ratio_grid = grid_values(0.0, 2.5, 0.01)
    ratios = np.asarray(ratio_grid, dtype=float)
    if ratios.ndim != 1 or ratios.size < 2:
        raise ValueError("ratio_grid must contain at least two points")
    effective = resolve_workers(workers)
    jobs = [
        (d, tuple(float(r) for r in ratios), tuple(pairs), float(eps_par), trunc.n_trunc)
        for d in deltas
    ]
    results = _run_jobs(_phase_point, jobs, effective)
    rows: list[tuple] = []
    for block in results:
        rows.extend(block)
    return SweepResult(
        columns=PHASE_COLUMNS,
        rows=rows,
        meta={
            "kind": "phase_boundary_scan",
            "deltas": deltas,
            "pairs": pairs,
            "ratio_first": float(ratios[0]),
            "ratio_last": float(ratios[-1]),
            "grid_points": len(ratios),
            "eps_par": float(eps_par),
            "n_trunc": trunc.n_trunc,
            "workers": effective,
            "wall_time_s": time.perf_counter() - t0,
        },
    )
