"""Molecular systems, solute/solvent surfaces, and dielectric/ion-coefficient maps."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid3D, ScalarField


class Region(enum.Enum):
    SOLUTE = "solute"
    SOLVENT = "solvent"


@dataclass(frozen=True)
class Atom:
    """Point charge with a van der Waals radius (Angstroms, e_c)."""

    center: tuple[float, float, float]
    charge: float
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not all(np.isfinite(self.center)):
            raise ValueError("atom center must be finite")
        if not np.isfinite(self.charge):
            raise ValueError("atom charge must be finite")
        if not (self.radius > 0):
            raise ValueError(f"atom radius must be positive, got {self.radius}")


@dataclass
class MolecularSystem:
    atoms: list[Atom] = field(default_factory=list)
    label: str = "system"

    def __len__(self):
        return len(self.atoms)

    def total_charge(self) -> float:
        return float(sum(a.charge for a in self.atoms))


@dataclass(frozen=True)
class AnalyticSphere:
    """Solute region = closed ball of radius R centered at the origin."""

    R: float

    def __post_init__(self):
        if not (self.R > 0):
            raise ValueError("sphere radius must be positive")

    def solute_mask(self, pts: np.ndarray) -> np.ndarray:
        r2 = np.sum(np.asarray(pts, float) ** 2, axis=-1)
        return r2 <= self.R * self.R


@dataclass(frozen=True)
class UnionOfSpheres:
    """Solute region = union of per-atom balls inflated by ``probe_inflation``.

    Stand-in for an externally generated molecular surface; the solvers only
    ever see the resulting region maps.
    """

    system: MolecularSystem
    probe_inflation: float = 0.0

    def __post_init__(self):
        if self.probe_inflation < 0:
            raise ValueError("probe_inflation must be >= 0")

    def solute_mask(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, float)
        mask = np.zeros(pts.shape[:-1], dtype=bool)
        for atom in self.system.atoms:
            d2 = np.sum((pts - np.asarray(atom.center)) ** 2, axis=-1)
            rr = atom.radius + self.probe_inflation
            mask |= d2 <= rr * rr
        return mask


Surface = AnalyticSphere | UnionOfSpheres


def classify(point, surface: Surface) -> Region:
    """Solute iff the point is on or inside the surface (boundary ties -> solute)."""
    inside = surface.solute_mask(np.asarray(point, float).reshape(1, 3))[0]
    return Region.SOLUTE if inside else Region.SOLVENT


@dataclass
class RegionMap:
    """Dielectric values at nodes and half-edge midpoints, plus nodal kappa_bar^2.

    eps_half_x has shape (nx-1, ny, nz): entry [i, j, k] is the dielectric at
    the midpoint between nodes (i, j, k) and (i+1, j, k); y and z likewise.
    kappa2 is 0 at solute nodes and the solvent ion coefficient elsewhere.
    """

    grid: Grid3D
    eps_node: ScalarField
    eps_half_x: np.ndarray
    eps_half_y: np.ndarray
    eps_half_z: np.ndarray
    kappa2: ScalarField

    def eps_half(self, axis: int) -> np.ndarray:
        return (self.eps_half_x, self.eps_half_y, self.eps_half_z)[axis]


def _coords_1d(grid: Grid3D, axis: int, half: bool) -> np.ndarray:
    c = grid.axis_coords(axis)
    return c[:-1] + 0.5 * grid.h if half else c


def _eps_on_mesh(surface, grid, eps_m, eps_s, half_axis=None) -> np.ndarray:
    axes = []
    for d in range(3):
        axes.append(_coords_1d(grid, d, half=(d == half_axis)))
    X, Y, Z = np.meshgrid(*axes, indexing="ij", sparse=True)
    shape = (len(axes[0]), len(axes[1]), len(axes[2]))
    pts = np.empty(shape + (3,))
    pts[..., 0] = X
    pts[..., 1] = Y
    pts[..., 2] = Z
    mask = surface.solute_mask(pts)
    return np.where(mask, eps_m, eps_s)


def build_region_maps(grid: Grid3D, surface: Surface, eps_m: float, eps_s: float,
                      kappa2_solvent: float) -> RegionMap:
    """Classify nodes and half-edge midpoints into solute/solvent coefficient maps.

    Half-edge dielectrics come from classifying the literal midpoint
    coordinate, not from averaging endpoint values.
    """
    if eps_m <= 0 or eps_s <= 0:
        raise ValueError("dielectric constants must be positive")
    if kappa2_solvent < 0:
        raise ValueError("kappa2_solvent must be >= 0")
    eps_node = _eps_on_mesh(surface, grid, eps_m, eps_s)
    kappa2 = np.where(eps_node == eps_m, 0.0, kappa2_solvent)
    return RegionMap(
        grid=grid,
        eps_node=ScalarField(grid, eps_node),
        eps_half_x=_eps_on_mesh(surface, grid, eps_m, eps_s, half_axis=0),
        eps_half_y=_eps_on_mesh(surface, grid, eps_m, eps_s, half_axis=1),
        eps_half_z=_eps_on_mesh(surface, grid, eps_m, eps_s, half_axis=2),
        kappa2=ScalarField(grid, kappa2),
    )


def uniform_region(grid: Grid3D, eps: float, kappa2: float = 0.0) -> RegionMap:
    """Single-medium map: eps everywhere, constant kappa2 (vacuum runs, tests)."""
    full = np.full(grid.shape, float(eps))
    return RegionMap(
        grid=grid,
        eps_node=ScalarField(grid, full),
        eps_half_x=np.full((grid.nx - 1, grid.ny, grid.nz), float(eps)),
        eps_half_y=np.full((grid.nx, grid.ny - 1, grid.nz), float(eps)),
        eps_half_z=np.full((grid.nx, grid.ny, grid.nz - 1), float(eps)),
        kappa2=ScalarField(grid, np.full(grid.shape, float(kappa2))),
    )


def parse_pqr(text) -> MolecularSystem:
    """Parse ATOM/HETATM records from PQR text.

    The last five whitespace-separated fields of each record must be numeric:
    x, y, z, charge, radius.  Other lines (REMARK, comments, ...) are ignored.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    atoms = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields or fields[0] not in ("ATOM", "HETATM"):
            continue
        if len(fields) < 6:
            raise ValueError(f"PQR line {lineno}: record has too few fields")
        try:
            x, y, z, q, r = (float(v) for v in fields[-5:])
        except ValueError:
            raise ValueError(
                f"PQR line {lineno}: last five fields are not all numeric"
            ) from None
        atoms.append(Atom((x, y, z), q, r))
    if not atoms:
        raise ValueError("no atoms parsed from PQR input")
    return MolecularSystem(atoms, label="pqr")


def parse_system_table(text, label: str = "synthetic") -> MolecularSystem:
    """Parse the toy-system syntax: one ``atom x y z q r`` line per atom.

    Blank lines and ``#`` comments are allowed.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    atoms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] != "atom" or len(fields) != 6:
            raise ValueError(f"system line {lineno}: expected 'atom x y z q r'")
        try:
            x, y, z, q, r = (float(v) for v in fields[1:])
        except ValueError:
            raise ValueError(f"system line {lineno}: non-numeric field") from None
        atoms.append(Atom((x, y, z), q, r))
    if not atoms:
        raise ValueError("no atoms parsed from system input")
    return MolecularSystem(atoms, label=label)
