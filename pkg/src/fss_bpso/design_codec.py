"""
Meta-atom designs under eight-fold (dihedral-4) symmetry.

An 18x18 binary pixel grid that is invariant under horizontal reflection,
vertical reflection and transposition is fully described by 45 bits: one
per symmetry orbit. The fundamental domain is the upper-left 9x9 quadrant,
restricted to cells with ``row <= col`` and enumerated row-major::

    (0,0) (0,1) ... (0,8) (1,1) (1,2) ... (8,8)

Octant designs are ``uint8`` arrays of shape ``(45,)``; grids are ``uint8``
arrays of shape ``(18, 18)``. Batches stack along a leading axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import SymmetryViolation

GRID_SIZE = 18
HALF = GRID_SIZE // 2
N_BITS = 45
N_CELLS = GRID_SIZE * GRID_SIZE
# adjacent (row and column) cell pairs in the grid
N_ADJACENT_PAIRS = 2 * (GRID_SIZE - 1) * GRID_SIZE

_FOUR_NEIGHBOURS = ndimage.generate_binary_structure(2, 1)


def _build_orbit_index() -> tuple[np.ndarray, np.ndarray]:
    reps = [(r, c) for r in range(HALF) for c in range(r, HALF)]
    rep_to_bit = {rc: k for k, rc in enumerate(reps)}
    index = np.empty((GRID_SIZE, GRID_SIZE), dtype=np.intp)
    for i in range(GRID_SIZE):
        for j in range(GRID_SIZE):
            a = min(i, GRID_SIZE - 1 - i)
            b = min(j, GRID_SIZE - 1 - j)
            index[i, j] = rep_to_bit[(min(a, b), max(a, b))]
    return index, np.array(reps, dtype=np.intp)


#: ORBIT_INDEX[i, j] is the octant bit that controls grid cell (i, j).
ORBIT_INDEX, REPRESENTATIVES = _build_orbit_index()
ORBIT_SIZES = np.bincount(ORBIT_INDEX.ravel(), minlength=N_BITS)
_FLAT_INDEX = ORBIT_INDEX.ravel()


@dataclass(frozen=True)
class DesignFeatures:
    fill_fraction: float
    connectivity: float
    roughness: float


def as_octant(bits) -> np.ndarray:
    """Coerce a sequence or a '0'/'1' string to a validated octant array."""
    if isinstance(bits, str):
        bits = [int(ch) for ch in bits]
    arr = np.asarray(bits)
    if arr.shape != (N_BITS,):
        raise ValueError(f"octant design must have {N_BITS} bits, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("octant design bits must be 0 or 1")
    return arr.astype(np.uint8)


def expand_octant(octant) -> np.ndarray:
    """Expand one octant (45,) or a batch (n, 45) into 18x18 grids."""
    octant = np.asarray(octant, dtype=np.uint8)
    return octant[..., ORBIT_INDEX]


def fold_grid(grid) -> np.ndarray:
    """Inverse of :func:`expand_octant`.

    Raises SymmetryViolation if any orbit of the grid holds mixed values.
    """
    grid = np.asarray(grid)
    if grid.shape != (GRID_SIZE, GRID_SIZE):
        raise ValueError(f"grid must be {GRID_SIZE}x{GRID_SIZE}, got {grid.shape}")
    flat = grid.ravel().astype(np.intp)
    ones = np.bincount(_FLAT_INDEX, weights=flat, minlength=N_BITS)
    mixed = (ones != 0) & (ones != ORBIT_SIZES)
    if mixed.any():
        raise SymmetryViolation(f"grid is not dihedral-symmetric in orbits {np.flatnonzero(mixed).tolist()}")
    return (ones > 0).astype(np.uint8)


def random_design(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw octant designs with each bit independently 1 with probability 0.5."""
    shape = (N_BITS,) if size is None else (size, N_BITS)
    return rng.integers(0, 2, size=shape, dtype=np.uint8)


def dihedral_images(grid: np.ndarray) -> list[np.ndarray]:
    """All 8 images of a grid under the dihedral-4 group."""
    images = []
    g = np.asarray(grid)
    for _ in range(4):
        images.append(g)
        images.append(g.T)
        g = np.rot90(g)
    return images


def fill_fraction(octants: np.ndarray) -> np.ndarray:
    """Metallic fraction of the expanded grid, straight from octant bits."""
    return np.asarray(octants, dtype=float) @ ORBIT_SIZES / N_CELLS


def features(grid) -> DesignFeatures:
    grid = np.asarray(grid, dtype=np.uint8)
    n_metal = int(grid.sum())
    if n_metal == 0:
        connectivity = 0.0
    else:
        labels, n_comp = ndimage.label(grid, structure=_FOUR_NEIGHBOURS)
        largest = np.bincount(labels.ravel())[1:].max()
        connectivity = largest / n_metal
    transitions = np.count_nonzero(np.diff(grid, axis=0)) + np.count_nonzero(np.diff(grid, axis=1))
    return DesignFeatures(
        fill_fraction=n_metal / N_CELLS,
        connectivity=float(connectivity),
        roughness=transitions / N_ADJACENT_PAIRS,
    )


def to_bitstring(octant) -> str:
    return "".join("1" if b else "0" for b in np.asarray(octant).ravel())


def from_bitstring(s: str) -> np.ndarray:
    return as_octant(s.strip())


def hamming(a, b) -> np.ndarray:
    return np.count_nonzero(np.asarray(a) != np.asarray(b), axis=-1)
