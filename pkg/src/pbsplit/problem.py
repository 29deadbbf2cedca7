"""Assembly of complete marching problems: constants, boundaries, benchmarks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import C_ES, KCAL_PER_DIMENSIONLESS, KAPPA2_PER_MOLAR, PhysicalConstants
from .geometry import (AnalyticSphere, Atom, MolecularSystem, RegionMap,
                       UnionOfSpheres, build_region_maps, uniform_region)
from .grid import FOUR_PI, Grid3D, ScalarField, deposit_charges, make_grid

__all__ = [
    "C_ES", "KCAL_PER_DIMENSIONLESS", "KAPPA2_PER_MOLAR", "PhysicalConstants",
    "BoundarySpec", "NPBProblem", "coulomb_screened_boundary", "sphere_exact",
    "sphere_exact_field", "default_sphere_grid", "sphere_benchmark",
    "protein_problem", "make_vacuum_problem", "parse_config",
]


@dataclass
class BoundarySpec:
    """Dirichlet data on the six grid faces.

    ``values`` is a full grid-shaped array whose face entries hold the data
    (interior entries are ignored).  ``shared`` records that the same values
    apply to every intermediate stage field of a split time step.
    """

    grid: Grid3D
    values: np.ndarray
    shared: bool = True

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError("boundary values must be grid shaped")
        mask = self.grid.boundary_mask()
        if not np.all(np.isfinite(self.values[mask])):
            raise ValueError("boundary values must be finite")

    @classmethod
    def from_function(cls, grid: Grid3D, fn) -> "BoundarySpec":
        """Evaluate ``fn(points) -> values`` on the face nodes only."""
        values = np.zeros(grid.shape)
        coords = [grid.x, grid.y, grid.z]
        for d in range(3):
            perp = [p for p in range(3) if p != d]
            A, B = np.meshgrid(coords[perp[0]], coords[perp[1]], indexing="ij")
            pts = np.zeros(A.shape + (3,))
            pts[..., perp[0]] = A
            pts[..., perp[1]] = B
            for side, coord in ((0, coords[d][0]), (-1, coords[d][-1])):
                pts[..., d] = coord
                vals = fn(pts.reshape(-1, 3)).reshape(A.shape)
                sl = [slice(None)] * 3
                sl[d] = side
                values[tuple(sl)] = vals
        return cls(grid, values)

    def apply(self, data: np.ndarray) -> None:
        """Overwrite the six faces of ``data`` with the Dirichlet values."""
        for d in range(3):
            sl = [slice(None)] * 3
            for side in (0, -1):
                sl[d] = side
                data[tuple(sl)] = self.values[tuple(sl)]
            sl[d] = slice(None)


@dataclass
class NPBProblem:
    """A fully assembled pseudo-time marching problem."""

    grid: Grid3D
    region: RegionMap
    rho: ScalarField
    qfrac: ScalarField
    boundary: BoundarySpec
    alpha: float
    initial: ScalarField
    eps_m: float = 1.0
    eps_s: float = 80.0
    kappa_bar: float = 0.0
    system: MolecularSystem | None = None
    label: str = "problem"

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        mask = self.grid.boundary_mask()
        if np.any(self.rho.data[mask] != 0.0):
            raise ValueError("source must vanish at boundary nodes")


def coulomb_screened_boundary(point, system: MolecularSystem, eps_s: float,
                              kappa_bar: float) -> float:
    """Screened-Coulomb dimensionless potential of all partial charges at a point."""
    vals = coulomb_screened_values(np.asarray(point, float).reshape(1, 3),
                                   system, eps_s, kappa_bar)
    return float(vals[0])


def coulomb_screened_values(points: np.ndarray, system: MolecularSystem,
                            eps_s: float, kappa_bar: float) -> np.ndarray:
    """Vectorized screened Coulomb sum C_es * sum_i q_i/(eps_s d_i) e^{-k d_i/sqrt(eps_s)}."""
    points = np.asarray(points, float)
    total = np.zeros(points.shape[0])
    damp = kappa_bar / math.sqrt(eps_s)
    for atom in system.atoms:
        d = np.sqrt(np.sum((points - np.asarray(atom.center)) ** 2, axis=-1))
        if np.any(d == 0.0):
            raise ValueError("boundary point coincides with an atom center")
        total += atom.charge / d * np.exp(-damp * d)
    return (C_ES / eps_s) * total


def sphere_exact(point, eps_ratio: float, R: float) -> float:
    """Closed-form potential of a centered unit charge in a dielectric sphere.

    Inside (r < R): 1/(eps*R) - 1/R + 1/r; outside: 1/(eps*r);
    eps is the solvent/solute dielectric ratio.  Singular at the origin.
    """
    r = float(np.linalg.norm(np.asarray(point, float)))
    if r == 0.0:
        raise ValueError("potential is singular at the origin")
    return float(_sphere_exact_radial(np.asarray([r]), eps_ratio, R)[0])


def _sphere_exact_radial(r: np.ndarray, eps: float, R: float) -> np.ndarray:
    inside = 1.0 / (eps * R) - 1.0 / R + 1.0 / r
    outside = 1.0 / (eps * r)
    return np.where(r < R, inside, outside)


def sphere_exact_field(grid: Grid3D, eps_ratio: float, R: float,
                       r_floor: float | None = None) -> ScalarField:
    """Nodal exact solution; the origin-node radius is floored at h/2 by default."""
    if r_floor is None:
        r_floor = grid.h / 2.0
    r = grid.radii(floor=r_floor)
    return ScalarField(grid, _sphere_exact_radial(r, eps_ratio, R))


def default_sphere_grid(h: float, extent: float = 3.0) -> Grid3D:
    return make_grid((-extent,) * 3, (extent,) * 3, h)


def sphere_benchmark(grid: Grid3D, H: float, eps_m: float = 1.0, eps_s: float = 80.0,
                     kappa_bar: float = 1.0, alpha: float = 1.0, R: float = 1.0) -> NPBProblem:
    """Dielectric-sphere problem with a known steady solution.

    One unit charge sits on the origin node; the deposited singular source has
    PDE strength 4*pi*eps_m (the benchmark's own nondimensionalization, no
    C_es factor).  Solvent nodes additionally carry the smooth source
    kappa_bar^2 * sinh(1/(eps*r)) that makes the closed-form potential the
    steady state.  The initial field is the cosine hump of magnitude H plus
    1/(eps*r) with the origin-node radius floored at h/2.
    """
    origin = grid.origin_index()
    eps = eps_s / eps_m
    surface = AnalyticSphere(R)
    region = build_region_maps(grid, surface, eps_m, eps_s, kappa_bar**2)

    system = MolecularSystem([Atom((0.0, 0.0, 0.0), 1.0, R)], label="unit-sphere")
    qfrac, _ = deposit_charges(system, grid, prefactor=FOUR_PI * eps_m)
    rho = (FOUR_PI * eps_m / grid.h**3) * qfrac.data

    r = grid.radii(floor=grid.h / 2.0)
    smooth = kappa_bar**2 * np.sinh(1.0 / (eps * r))
    solvent = region.kappa2.data > 0.0
    rho = rho + np.where(solvent, smooth, 0.0)
    mask = grid.boundary_mask()
    rho[mask] = 0.0

    exact_on_faces = lambda pts: _sphere_exact_radial(
        np.sqrt(np.sum(pts**2, axis=-1)), eps, R)
    boundary = BoundarySpec.from_function(grid, exact_on_faces)

    X, Y, Z = grid.node_mesh()
    hump = H * np.cos(np.pi * X / 6.0) * np.cos(np.pi * Y / 6.0) * np.cos(np.pi * Z / 6.0)
    initial = hump + 1.0 / (eps * r)

    return NPBProblem(
        grid=grid, region=region, rho=ScalarField(grid, rho), qfrac=qfrac,
        boundary=boundary, alpha=alpha, initial=ScalarField(grid, initial),
        eps_m=eps_m, eps_s=eps_s, kappa_bar=kappa_bar, system=system,
        label="sphere-benchmark",
    )


def protein_problem(system: MolecularSystem, h: float = 0.5, padding: float = 6.0,
                    kappa_bar: float = 0.1261, eps_m: float = 1.0, eps_s: float = 80.0,
                    alpha: float = 1.0, probe_inflation: float = 0.0) -> NPBProblem:
    """Assemble a molecular solvation problem on a padded bounding-box grid.

    The box is the atom bounding box expanded by ``padding`` per side and
    snapped outward to a multiple of h.  Rejected if any atom ends up within
    2h of a face.  The initial field is zero in the interior with the
    screened-Coulomb Dirichlet values on the faces.
    """
    if not system.atoms:
        raise ValueError("system has no atoms")
    pos = np.array([a.center for a in system.atoms])
    lo = pos.min(axis=0) - padding
    hi = pos.max(axis=0) + padding
    cells = np.maximum(2, np.ceil((hi - lo) / h - 1e-12).astype(int))
    hi = lo + cells * h
    grid = make_grid(lo, hi, h)

    margin_lo = pos - lo
    margin_hi = hi - pos
    if np.any(margin_lo < 2 * h) or np.any(margin_hi < 2 * h):
        bad = int(np.argmax(np.any((margin_lo < 2 * h) | (margin_hi < 2 * h), axis=1)))
        raise ValueError(
            f"padding too small: atom {bad} lies within 2h of a grid face"
        )

    surface = UnionOfSpheres(system, probe_inflation)
    region = build_region_maps(grid, surface, eps_m, eps_s, kappa_bar**2)
    qfrac, rho = deposit_charges(system, grid, prefactor=FOUR_PI * C_ES)
    boundary = BoundarySpec.from_function(
        grid, lambda pts: coulomb_screened_values(pts, system, eps_s, kappa_bar))

    initial = np.zeros(grid.shape)
    boundary.apply(initial)

    return NPBProblem(
        grid=grid, region=region, rho=rho, qfrac=qfrac, boundary=boundary,
        alpha=alpha, initial=ScalarField(grid, initial), eps_m=eps_m, eps_s=eps_s,
        kappa_bar=kappa_bar, system=system, label=system.label,
    )


def make_vacuum_problem(problem: NPBProblem) -> NPBProblem:
    """Companion uniform-dielectric problem: eps = eps_m everywhere, no ions.

    Same grid and deposited source; Dirichlet values recomputed as the plain
    Coulomb potential with eps_m (screening off).
    """
    if problem.system is None:
        raise ValueError("vacuum companion needs the originating molecular system")
    grid = problem.grid
    region = uniform_region(grid, problem.eps_m, kappa2=0.0)
    boundary = BoundarySpec.from_function(
        grid,
        lambda pts: coulomb_screened_values(pts, problem.system, problem.eps_m, 0.0))
    initial = np.zeros(grid.shape)
    boundary.apply(initial)
    return NPBProblem(
        grid=grid, region=region, rho=problem.rho, qfrac=problem.qfrac,
        boundary=boundary, alpha=problem.alpha, initial=ScalarField(grid, initial),
        eps_m=problem.eps_m, eps_s=problem.eps_m, kappa_bar=0.0,
        system=problem.system, label=problem.label + "-vacuum",
    )


_FLOAT_KEYS = {"h", "padding", "eps_m", "eps_s", "kappa_bar", "alpha", "dt", "T", "H"}
_CONFIG_KEYS = _FLOAT_KEYS | {"scheme", "domain"}


def parse_config(text) -> dict:
    """Parse the line-oriented ``key = value`` problem configuration format."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in _FLOAT_KEYS:
            try:
                out[key] = float(value)
            except ValueError:
                raise ValueError(f"config line {lineno}: non-numeric value for {key}") from None
        elif key == "domain":
            parts = value.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(f"config line {lineno}: domain needs two numbers")
            out[key] = (float(parts[0]), float(parts[1]))
        else:
            out[key] = value
    return out
