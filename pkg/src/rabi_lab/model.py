"""Quantum Rabi model operators in a truncated Fock basis.

The Hamiltonian of a single bosonic mode coupled to a two-level system,

    H = a^dag a + (delta/2) sigma_x + g sigma_z (a + a^dag),

is written in units of the mode frequency, so ``delta`` and ``g`` are
dimensionless.  Everything here is built in the sigma_x eigenbasis, where
the conserved parity operator

    P = sigma_x exp(i pi a^dag a)

is diagonal.  Basis states are labeled (n, s) with n the Fock number and
s = +1/-1 the sigma_x eigenvalue; the flattened index is

    i = 2 n + (0 if s == +1 else 1)

so photon number is the major axis and spin the minor one.  The parity of
basis state (n, s) is s * (-1)**n, giving the diagonal pattern
(+1, -1, -1, +1, +1, -1, ...).  The coupling term flips s and shifts n by
one, which preserves that label, so H never connects opposite parities
and the commutator [H, P] vanishes identically even at finite truncation.

Restricting to a fixed parity p forces s = p * (-1)**n and leaves a real
symmetric tridiagonal matrix in n alone:

    diag[n]    = n + p * (-1)**n * delta / 2
    offdiag[n] = g * sqrt(n + 1)

The normal/superradiant crossover reference coupling is

    g_c = sqrt(1 + sqrt(1 + delta**2 / 16))

and reported energies are conventionally shifted by +g**2 so the deep
strong coupling ladder sits near the integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelParams",
    "Truncation",
    "basis_index",
    "basis_labels",
    "build_hamiltonian",
    "build_parity",
    "critical_coupling",
    "parity_diagonal",
    "sector_hamiltonian",
    "shifted_energy",
]


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless model parameters: level splitting and coupling."""

    delta: float
    g: float

    def __post_init__(self) -> None:
        for name in ("delta", "g"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.g < 0:
            raise ValueError(f"g must be >= 0, got {self.g}")
        # normalize numpy scalars so dataclass equality and repr stay plain
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "g", float(self.g))

    @classmethod
    def from_ratio(cls, delta: float, g_over_gc: float) -> "ModelParams":
        """Build parameters from the coupling expressed in units of g_c."""
        return cls(delta=delta, g=g_over_gc * critical_coupling(delta))

    @property
    def g_over_gc(self) -> float:
        return self.g / critical_coupling(self.delta)


@dataclass(frozen=True)
class Truncation:
    """Fock-space cutoff: photon numbers 0 .. n_trunc - 1 are retained."""

    n_trunc: int

    def __post_init__(self) -> None:
        if not isinstance(self.n_trunc, (int, np.integer)):
            raise ValueError(f"n_trunc must be an integer, got {self.n_trunc!r}")
        if self.n_trunc < 2:
            raise ValueError(f"n_trunc must be >= 2, got {self.n_trunc}")
        object.__setattr__(self, "n_trunc", int(self.n_trunc))

    @property
    def dim(self) -> int:
        """Full two-component dimension, photons times spin."""
        return 2 * self.n_trunc


def critical_coupling(delta: float) -> float:
    """Reference coupling g_c separating the normal and superradiant regimes."""
    delta = float(delta)
    if not math.isfinite(delta) or delta < 0:
        raise ValueError(f"delta must be finite and >= 0, got {delta!r}")
    return math.sqrt(1.0 + math.sqrt(1.0 + delta * delta / 16.0))


def shifted_energy(energy, params: ModelParams):
    """Energy with the deep-strong-coupling offset +g**2 added."""
    return energy + params.g * params.g


def basis_index(n: int, s: int) -> int:
    """Flattened index of basis state (n, s); s must be +1 or -1."""
    if s not in (1, -1):
        raise ValueError(f"s must be +1 or -1, got {s!r}")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return 2 * n + (0 if s == 1 else 1)


def basis_labels(trunc: Truncation) -> tuple[np.ndarray, np.ndarray]:
    """Per-index photon numbers and spin labels, each of length ``trunc.dim``."""
    n = np.repeat(np.arange(trunc.n_trunc), 2)
    s = np.tile(np.array([1, -1]), trunc.n_trunc)
    return n, s


def parity_diagonal(trunc: Truncation) -> np.ndarray:
    """Diagonal of the parity operator: s * (-1)**n per basis state."""
    n, s = basis_labels(trunc)
    return (s * (1 - 2 * (n % 2))).astype(float)


def build_parity(trunc: Truncation) -> np.ndarray:
    """Parity operator as a dense diagonal matrix with entries +1/-1."""
    return np.diag(parity_diagonal(trunc))


def build_hamiltonian(params: ModelParams, trunc: Truncation) -> np.ndarray:
    """Dense Hamiltonian in the interleaved (n, s) basis.

    Real symmetric by construction: the returned array equals its own
    transpose bitwise.  Diagonal entries are n + s * delta / 2; the
    coupling g * sqrt(n + 1) joins (n, s) to (n + 1, -s).
    """
    dim = trunc.dim
    h = np.zeros((dim, dim))
    n = np.arange(trunc.n_trunc)
    h[2 * n, 2 * n] = n + 0.5 * params.delta
    h[2 * n + 1, 2 * n + 1] = n - 0.5 * params.delta
    if trunc.n_trunc > 1:
        m = np.arange(trunc.n_trunc - 1)
        c = params.g * np.sqrt(m + 1.0)
        # (n, +1) <-> (n+1, -1) sits at (2n, 2n+3); (n, -1) <-> (n+1, +1) at (2n+1, 2n+2)
        h[2 * m, 2 * m + 3] = c
        h[2 * m + 3, 2 * m] = c
        h[2 * m + 1, 2 * m + 2] = c
        h[2 * m + 2, 2 * m + 1] = c
    return h


def sector_hamiltonian(
    params: ModelParams, trunc: Truncation, sector: int
) -> tuple[np.ndarray, np.ndarray]:
    """Tridiagonal Hamiltonian restricted to one parity sector.

    Returns (diag, offdiag) with diag of length n_trunc and offdiag of
    length n_trunc - 1.  Within sector p the spin label is fixed to
    s = p * (-1)**n, so the photon index alone spans the block.
    """
    if sector not in (1, -1):
        raise ValueError(f"sector must be +1 or -1, got {sector!r}")
    n = np.arange(trunc.n_trunc)
    sign = 1.0 - 2.0 * (n % 2)
    diag = n + sector * sign * (0.5 * params.delta)
    offdiag = params.g * np.sqrt(n[:-1] + 1.0)
    return diag, offdiag
