"""Uniform 3D grids, scalar fields, relative error norms, charge deposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import C_ES

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class Grid3D:
    """Uniform Cartesian grid over a box, boundary nodes included.

    Fields are indexed ``data[i, j, k]`` with i along x, j along y, k along
    z; the flat index of node (i, j, k) is ``(i*ny + j)*nz + k`` (C order).
    The spacing ``h`` is identical along all three axes, so
    ``hi[d] - lo[d] == h*(n_d - 1)``.
    """

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    h: float
    nx: int
    ny: int
    nz: int

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def num_nodes(self) -> int:
        return self.nx * self.ny * self.nz

    def axis_coords(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        return self.lo[axis] + self.h * np.arange(n)

    @property
    def x(self) -> np.ndarray:
        return self.axis_coords(0)

    @property
    def y(self) -> np.ndarray:
        return self.axis_coords(1)

    @property
    def z(self) -> np.ndarray:
        return self.axis_coords(2)

    def node_mesh(self):
        """Sparse (broadcastable) coordinate mesh (X, Y, Z)."""
        return np.meshgrid(self.x, self.y, self.z, indexing="ij", sparse=True)

    def radii(self, floor: float = 0.0) -> np.ndarray:
        """Distance of every node from the coordinate origin, optionally floored."""
        X, Y, Z = self.node_mesh()
        r = np.sqrt(X * X + Y * Y + Z * Z)
        if floor > 0.0:
            r = np.maximum(r, floor)
        return r

    def flat_index(self, i, j, k):
        return (np.asarray(i) * self.ny + np.asarray(j)) * self.nz + np.asarray(k)

    def unflatten(self, flat):
        flat = np.asarray(flat)
        k = flat % self.nz
        ij = flat // self.nz
        return ij // self.ny, ij % self.ny, k

    def origin_index(self) -> tuple[int, int, int]:
        """Index triple of the node at (0, 0, 0).

        Raises ValueError if the origin is not a grid node.
        """
        idx = []
        for d in range(3):
            t = -self.lo[d] / self.h
            i = int(round(t))
            if abs(t - i) > 1e-9 or not (0 <= i < self.shape[d]):
                raise ValueError("coordinate origin is not a grid node")
            idx.append(i)
        return tuple(idx)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for d in range(3):
            sl = [slice(None)] * 3
            sl[d] = 0
            mask[tuple(sl)] = True
            sl[d] = -1
            mask[tuple(sl)] = True
        return mask


def make_grid(lo, hi, h: float) -> Grid3D:
    """Build a uniform grid with node coordinates ``lo + i*h``.

    Rejects bounds that are not commensurate with the spacing (the number of
    cells per axis must be an integer to within 1e-9).
    """
    lo = tuple(float(v) for v in lo)
    hi = tuple(float(v) for v in hi)
    if h <= 0:
        raise ValueError(f"spacing must be positive, got h={h}")
    counts = []
    for d in range(3):
        if hi[d] <= lo[d]:
            raise ValueError(f"axis {d}: hi={hi[d]} must exceed lo={lo[d]}")
        cells = (hi[d] - lo[d]) / h
        n_cells = round(cells)
        if abs(cells - n_cells) > 1e-9:
            raise ValueError(
                f"axis {d}: extent {hi[d] - lo[d]} is not an integer multiple "
                f"of h={h} (got {cells} cells)"
            )
        if n_cells < 2:
            raise ValueError(f"axis {d}: need at least 2 cells (3 nodes), got {n_cells}")
        counts.append(int(n_cells) + 1)
    return Grid3D(lo, hi, h, counts[0], counts[1], counts[2])


@dataclass
class ScalarField:
    """Node-indexed real field over a Grid3D.

    ``diverged`` marks fields produced by a marching run that blew up; such
    fields may contain non-finite entries.
    """

    grid: Grid3D
    data: np.ndarray
    diverged: bool = False

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.shape != self.grid.shape:
            raise ValueError(
                f"data shape {self.data.shape} does not match grid {self.grid.shape}"
            )

    @classmethod
    def zeros(cls, grid: Grid3D) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.data.copy(), self.diverged)


@dataclass(frozen=True)
class NormPair:
    l2: float
    linf: float


def _relative_norms_arrays(exact: np.ndarray, approx: np.ndarray) -> NormPair:
    diff = exact - approx
    max_exact = np.max(np.abs(exact))
    if max_exact == 0.0:
        raise ValueError("relative norms undefined: exact field is identically zero")
    l2 = float(np.sqrt(np.sum(diff * diff) / np.sum(exact * exact)))
    linf = float(np.max(np.abs(diff)) / max_exact)
    return NormPair(l2, linf)


def relative_norms(exact: ScalarField, approx: ScalarField, exclude=None) -> NormPair:
    """Relative L2 and Linf errors of ``approx`` against ``exact``.

    l2 = sqrt(sum|exact-approx|^2 / sum|exact|^2), linf = max|exact-approx|
    / max|exact|, over all nodes.  ``exclude`` optionally gives a boolean
    mask of nodes to leave out (e.g. a singular source node).
    """
    if exact.grid != approx.grid:
        raise ValueError("fields live on different grids")
    e = exact.data
    a = approx.data
    if exclude is not None:
        keep = ~np.asarray(exclude, dtype=bool)
        e = e[keep]
        a = a[keep]
    return _relative_norms_arrays(np.asarray(e, float), np.asarray(a, float))


def trilinear_weights(frac: np.ndarray):
    """Per-corner weights for fractional offsets ``frac`` in [0, 1]^3.

    Yields ((di, dj, dk), w) for the 8 cell corners; the weights are the
    tensor products of (1-s) and s per axis and sum to 1.
    """
    fx, fy, fz = frac[..., 0], frac[..., 1], frac[..., 2]
    for di in (0, 1):
        wx = fx if di else 1.0 - fx
        for dj in (0, 1):
            wy = fy if dj else 1.0 - fy
            for dk in (0, 1):
                wz = fz if dk else 1.0 - fz
                yield (di, dj, dk), wx * wy * wz


def deposit_charges(system, grid: Grid3D, prefactor: float = FOUR_PI * C_ES):
    """Spread point charges onto grid nodes with trilinear weights.

    Returns ``(qfrac, rho)``: ``qfrac`` holds per-node charge fractions in
    e_c (sum over nodes equals the total charge), ``rho`` the PDE source
    ``(prefactor / h^3) * qfrac``.  Every atom must sit strictly inside the
    grid interior so no weight lands on a boundary node.

    Parameters
    ----------
    system : MolecularSystem
        Provides ``.atoms`` with ``center`` and ``charge``.
    grid : Grid3D
    prefactor : float
        PDE scaling of the deposited density; defaults to 4*pi*e_c^2/(k_B T).
    """
    atoms = system.atoms
    if not atoms:
        raise ValueError("system has no atoms")
    pos = np.array([a.center for a in atoms], dtype=float)
    charges = np.array([a.charge for a in atoms], dtype=float)

    t = (pos - np.asarray(grid.lo)) / grid.h
    cell = np.floor(t).astype(np.int64)
    frac = t - cell
    n = np.asarray(grid.shape)

    # Snap razor-edge fractions so an atom exactly h from the high face
    # deposits on one interior node instead of spilling onto the boundary.
    snap_hi = frac >= 1.0 - 1e-12
    cell[snap_hi] += 1
    frac[snap_hi] = 0.0

    bad_low = cell < 1
    bad_high = (cell > n - 3) & ~((cell == n - 2) & (frac == 0.0))
    bad = np.any(bad_low | bad_high, axis=1)
    if np.any(bad):
        a = int(np.argmax(bad))
        raise ValueError(
            f"atom {a} at {tuple(pos[a])} is not strictly inside the grid interior"
        )

    qfrac = np.zeros(grid.shape)
    for (di, dj, dk), w in trilinear_weights(frac):
        np.add.at(qfrac, (cell[:, 0] + di, cell[:, 1] + dj, cell[:, 2] + dk), charges * w)

    rho = (prefactor / grid.h**3) * qfrac
    return ScalarField(grid, qfrac), ScalarField(grid, rho)


def dump_field_csv(field: ScalarField, path) -> None:
    """Write one node per line as ``i,j,k,x,y,z,value`` with 12+ significant digits."""
    g = field.grid
    xs, ys, zs = g.x, g.y, g.z
    with open(path, "w") as fh:
        fh.write("i,j,k,x,y,z,value\n")
        for i in range(g.nx):
            for j in range(g.ny):
                for k in range(g.nz):
                    fh.write(
                        f"{i},{j},{k},{xs[i]:.12e},{ys[j]:.12e},{zs[k]:.12e},"
                        f"{field.data[i, j, k]:.12e}\n"
                    )
