"""Per-eigenstate parity diagnostics and the irregularity onset locator.

The conserved parity P is diagonal in the working basis, so expectation
values reduce to sign-weighted sums of squared amplitudes.  Eigenvalues
come in pairs (2k, 2k+1) of opposite parity whose splitting collapses
with coupling; once it falls to the solver's resolution the returned
eigenvectors are arbitrary mixtures within the pair and per-state <P>
wanders off +-1.  The two-dimensional trace of P over the pair span is
basis independent and stays at zero through that regime, which is the
invariant worth testing against.

A state is called regular when |<P>| >= 1 - eps_par for a configurable
threshold eps_par; the onset coupling of a pair is the smallest grid
point at which either member turns irregular, reported together with the
grid resolution (no root polishing between grid points).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .eigensolve import Spectrum, eig_sym_dense
from .model import (
    ModelParams,
    Truncation,
    build_hamiltonian,
    critical_coupling,
    parity_diagonal,
    shifted_energy,
)

__all__ = [
    "DEFAULT_EPS_PAR",
    "STATE_NORM_TOL",
    "FockPopulations",
    "OnsetResult",
    "PairParity",
    "fock_populations",
    "onset_coupling",
    "pair_report",
    "parity_expectation",
    "sector_weights",
    "subspace_parity_trace",
]

DEFAULT_EPS_PAR = 0.1
STATE_NORM_TOL = 1e-10


def _checked_state(state, trunc: Truncation) -> np.ndarray:
    v = np.asarray(state, dtype=float).ravel()
    if v.size != trunc.dim:
        raise ValueError(f"state length {v.size} does not match dimension {trunc.dim}")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > STATE_NORM_TOL:
        raise ValueError(f"state norm {norm!r} deviates from 1 beyond {STATE_NORM_TOL}")
    return v


def parity_expectation(state, trunc: Truncation) -> float:
    """<P> of a normalized state vector; always lands in [-1, 1]."""
    v = _checked_state(state, trunc)
    value = float(np.dot(parity_diagonal(trunc), v * v))
    return max(-1.0, min(1.0, value))


def sector_weights(state, trunc: Truncation) -> tuple[float, float]:
    """Weights (w_plus, w_minus) carried by the two parity sectors."""
    v = _checked_state(state, trunc)
    mask = parity_diagonal(trunc) > 0
    v2 = v * v
    w_plus = float(v2[mask].sum())
    w_minus = float(v2[~mask].sum())
    return w_plus, w_minus


def subspace_parity_trace(vectors: np.ndarray, trunc: Truncation) -> float:
    """Trace of P restricted to the span of the given orthonormal columns.

    For a pair of opposite-parity levels this is zero regardless of how a
    solver rotated the two vectors inside their shared eigenspace.
    """
    v = np.asarray(vectors, dtype=float)
    if v.ndim != 2 or v.shape[0] != trunc.dim:
        raise ValueError(f"expected column vectors of length {trunc.dim}, got shape {v.shape}")
    p = parity_diagonal(trunc)
    return float(np.einsum("i,ij,ij->", p, v, v))


@dataclass(frozen=True)
class FockPopulations:
    """Photon-number populations of one state, summed over spin."""

    populations: np.ndarray
    p_even: float
    p_odd: float


def fock_populations(state, trunc: Truncation) -> FockPopulations:
    v = _checked_state(state, trunc)
    v2 = v * v
    pops = v2[0::2] + v2[1::2]
    p_even = float(pops[0::2].sum())
    p_odd = float(pops[1::2].sum())
    pops.flags.writeable = False
    return FockPopulations(populations=pops, p_even=p_even, p_odd=p_odd)


@dataclass(frozen=True)
class PairParity:
    """Diagnostics for one opposite-parity doublet (levels 2k, 2k+1)."""

    pair_index: int
    energies: tuple[float, float]
    energies_shifted: tuple[float, float]
    parity: tuple[float, float]
    gap_raw: float
    gap_shifted: float
    parity_sum: float
    p_even: tuple[float, float]
    p_odd: tuple[float, float]
    regular: bool
    degenerate: bool


def pair_report(
    spectrum: Spectrum,
    params: ModelParams,
    trunc: Truncation,
    eps_par: float = DEFAULT_EPS_PAR,
) -> list[PairParity]:
    """Pairwise parity report over consecutive levels of a sorted spectrum.

    ``parity_sum`` is the subspace trace, not the sum of rounded per-state
    values, so it stays meaningful when the pair is solver-mixed.  The
    ``regular`` flag applies the eps_par threshold to both members.
    """
    if not 0.0 < eps_par < 1.0:
        raise ValueError(f"eps_par must be in (0, 1), got {eps_par}")
    if spectrum.k < 2:
        raise ValueError("need at least two levels to form a pair")
    n_pairs = spectrum.k // 2
    out = []
    for k in range(n_pairs):
        lo, hi = 2 * k, 2 * k + 1
        e_lo, e_hi = float(spectrum.eigenvalues[lo]), float(spectrum.eigenvalues[hi])
        es_lo = float(shifted_energy(e_lo, params))
        es_hi = float(shifted_energy(e_hi, params))
        p_lo = parity_expectation(spectrum.eigenvectors[:, lo], trunc)
        p_hi = parity_expectation(spectrum.eigenvectors[:, hi], trunc)
        f_lo = fock_populations(spectrum.eigenvectors[:, lo], trunc)
        f_hi = fock_populations(spectrum.eigenvectors[:, hi], trunc)
        out.append(
            PairParity(
                pair_index=k,
                energies=(e_lo, e_hi),
                energies_shifted=(es_lo, es_hi),
                parity=(p_lo, p_hi),
                gap_raw=e_hi - e_lo,
                gap_shifted=es_hi - es_lo,
                parity_sum=subspace_parity_trace(spectrum.eigenvectors[:, lo : hi + 1], trunc),
                p_even=(f_lo.p_even, f_hi.p_even),
                p_odd=(f_lo.p_odd, f_hi.p_odd),
                regular=min(abs(p_lo), abs(p_hi)) >= 1.0 - eps_par,
                degenerate=bool(spectrum.near_degenerate[lo]),
            )
        )
    return out


@dataclass(frozen=True)
class OnsetResult:
    """First grid coupling at which a pair turns irregular."""

    pair_index: int
    g_onset: float
    g_over_gc: float
    grid_index: int
    grid_step: float
    eps_par: float
    min_parity_at_onset: float


def min_pair_parity_curves(
    delta: float,
    g_grid: Sequence[float],
    pair_indices: Sequence[int],
    trunc: Truncation,
    eps_par: float = DEFAULT_EPS_PAR,
    stop_when_all_found: bool = True,
) -> dict[int, list[float]]:
    """min(|<P>|) per pair along a coupling grid, one solve per point.

    Shared workhorse for onset_coupling and the phase-boundary scan.  When
    ``stop_when_all_found`` is set the scan ends at the first grid point
    where every requested pair has already turned irregular; the returned
    curves then cover only the visited prefix of the grid.
    """
    pairs = sorted(set(int(p) for p in pair_indices))
    if not pairs or pairs[0] < 0:
        raise ValueError(f"pair indices must be non-negative, got {pair_indices!r}")
    grid = np.asarray(g_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("g_grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("g_grid must be strictly increasing")
    if grid[0] < 0 or not np.isfinite(grid).all():
        raise ValueError("g_grid values must be finite and >= 0")
    k = 2 * pairs[-1] + 2
    if k > trunc.dim:
        raise ValueError(f"pair {pairs[-1]} needs {k} levels but dimension is {trunc.dim}")
    threshold = 1.0 - eps_par
    curves: dict[int, list[float]] = {p: [] for p in pairs}
    found = {p: False for p in pairs}
    for g in grid:
        spectrum = eig_sym_dense(build_hamiltonian(ModelParams(delta, float(g)), trunc), k)
        for p in pairs:
            v = min(
                abs(parity_expectation(spectrum.eigenvectors[:, 2 * p], trunc)),
                abs(parity_expectation(spectrum.eigenvectors[:, 2 * p + 1], trunc)),
            )
            curves[p].append(v)
            if v < threshold:
                found[p] = True
        if stop_when_all_found and all(found.values()):
            break
    return curves


def onset_coupling(
    delta: float,
    pair_index: int,
    g_grid: Sequence[float],
    eps_par: float = DEFAULT_EPS_PAR,
    trunc: Truncation = Truncation(1000),
) -> Optional[OnsetResult]:
    """Smallest grid coupling where pair ``pair_index`` turns irregular.

    Scans the grid in ascending order and stops at the first point where
    min(|<P>|) over the two pair members drops below 1 - eps_par; returns
    None when the whole grid stays regular.  Resolution is the grid step;
    no interpolation or bisection is attempted between points.
    """
    if not 0.0 < eps_par < 1.0:
        raise ValueError(f"eps_par must be in (0, 1), got {eps_par}")
    curve = min_pair_parity_curves(
        delta, g_grid, [pair_index], trunc, eps_par, stop_when_all_found=True
    )[int(pair_index)]
    grid = np.asarray(g_grid, dtype=float)
    threshold = 1.0 - eps_par
    for i, value in enumerate(curve):
        if value < threshold:
            g = float(grid[i])
            step = float(grid[i] - grid[i - 1]) if i > 0 else (
                float(grid[1] - grid[0]) if grid.size > 1 else math.nan
            )
            return OnsetResult(
                pair_index=int(pair_index),
                g_onset=g,
                g_over_gc=g / critical_coupling(delta),
                grid_index=i,
                grid_step=step,
                eps_par=float(eps_par),
                min_parity_at_onset=float(value),
            )
    return None
