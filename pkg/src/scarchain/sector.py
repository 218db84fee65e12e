"""Symmetry-reduced basis for the spin-1/2 chain.

Basis states are N-bit integers, bit j = site j, 0 = up.  The reduction
group is generated by translation by 4 sites and the bond-centered mirror
j -> (1 - j) mod N; both leave the TI and IS product configurations
pointwise invariant.  The sector kept is the character-trivial one: each
group orbit of computational states contributes the single symmetrized
combination sum_x |x> / sqrt(|orbit|).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

SUPPORTED_GENERATORS = ("translation4", "mirror")
DEFAULT_MAX_SITES = 20


class SectorError(ValueError):
    """Invalid sector request or out-of-budget size."""


def translate_states(states: np.ndarray, shift: int, n_sites: int) -> np.ndarray:
    """Cyclic site shift j -> j + shift on bit-encoded states."""
    shift %= n_sites
    if shift == 0:
        return states.copy()
    mask = np.uint64((1 << n_sites) - 1)
    left = np.uint64(shift)
    right = np.uint64(n_sites - shift)
    return ((states << left) | (states >> right)) & mask


def reverse_states(states: np.ndarray, n_sites: int) -> np.ndarray:
    """Bit order reversal j -> N - 1 - j."""
    out = np.zeros_like(states)
    one = np.uint64(1)
    for j in range(n_sites):
        bit = (states >> np.uint64(j)) & one
        out |= bit << np.uint64(n_sites - 1 - j)
    return out


def mirror_states(states: np.ndarray, n_sites: int) -> np.ndarray:
    """Bond-centered mirror j -> (1 - j) mod N."""
    return translate_states(reverse_states(states, n_sites), 2, n_sites)


def group_images(states: np.ndarray, n_sites: int) -> list[np.ndarray]:
    """Images of each state under all N/2 group elements."""
    rev = reverse_states(states, n_sites)
    images = []
    for m in range(n_sites // 4):
        images.append(translate_states(states, 4 * m, n_sites))
        # mirror composed with translation-by-4m acts as a rotation of the
        # reversed word: mirror(t_{4m}(x)) = t_{2-4m}(reverse(x))
        images.append(translate_states(rev, (2 - 4 * m) % n_sites, n_sites))
    return images


@dataclass(frozen=True)
class SymmetrySector:
    """Orbit representatives, their sizes, and the state -> orbit lookup."""

    n_sites: int
    representatives: np.ndarray
    orbit_sizes: np.ndarray
    orbit_index: np.ndarray
    generators: tuple = SUPPORTED_GENERATORS

    @property
    def dimension(self) -> int:
        return len(self.representatives)

    @property
    def norms(self) -> np.ndarray:
        """Per-representative normalization 1/sqrt(|orbit|)."""
        return 1.0 / np.sqrt(self.orbit_sizes)

    def metadata(self) -> dict:
        return {
            "N": self.n_sites,
            "dimension": self.dimension,
            "generators": list(self.generators),
        }


def build_sector(
    n_sites: int,
    generators=SUPPORTED_GENERATORS,
    max_sites: int = DEFAULT_MAX_SITES,
) -> SymmetrySector:
    """Construct the trivial-character sector containing the TI/IS states.

    Representatives are the minimal integer labels of each group orbit.
    Raises for n_sites not divisible by 4 or beyond the memory budget.
    """
    if tuple(generators) != SUPPORTED_GENERATORS:
        raise SectorError(f"unsupported generators {generators!r}")
    if n_sites < 4 or n_sites % 4 != 0:
        raise SectorError(f"sector needs n_sites divisible by 4, got {n_sites}")
    if n_sites > max_sites:
        raise SectorError(
            f"n_sites = {n_sites} exceeds the configured budget of {max_sites} "
            f"(2^{n_sites} states would be enumerated)"
        )
    states = np.arange(1 << n_sites, dtype=np.uint64)
    canonical = states.copy()
    for image in group_images(states, n_sites):
        np.minimum(canonical, image, out=canonical)
    representatives = np.unique(canonical)
    orbit_index = np.searchsorted(representatives, canonical).astype(np.int64)
    orbit_sizes = np.bincount(orbit_index, minlength=len(representatives)).astype(float)
    return SymmetrySector(
        n_sites=n_sites,
        representatives=representatives,
        orbit_sizes=orbit_sizes,
        orbit_index=orbit_index,
        generators=tuple(generators),
    )


def expand_to_full(sector: SymmetrySector, amplitudes: np.ndarray) -> np.ndarray:
    """Full 2^N amplitude vector of a sector-basis vector."""
    scaled = np.asarray(amplitudes) * sector.norms
    return scaled[sector.orbit_index]


def project_from_full(sector: SymmetrySector, full: np.ndarray) -> np.ndarray:
    """Sector components <O_a|psi> of a full-space vector."""
    full = np.asarray(full)
    dim = sector.dimension
    if np.iscomplexobj(full):
        re = np.bincount(sector.orbit_index, weights=full.real, minlength=dim)
        im = np.bincount(sector.orbit_index, weights=full.imag, minlength=dim)
        acc = re + 1j * im
    else:
        acc = np.bincount(sector.orbit_index, weights=full, minlength=dim)
    return acc * sector.norms


def sector_basis_matrix(sector: SymmetrySector) -> sparse.csr_matrix:
    """Sparse (2^N, dim) isometry B with columns the symmetrized basis states."""
    n_full = 1 << sector.n_sites
    data = sector.norms[sector.orbit_index]
    rows = np.arange(n_full)
    return sparse.csr_matrix(
        (data, (rows, sector.orbit_index)), shape=(n_full, sector.dimension)
    )
