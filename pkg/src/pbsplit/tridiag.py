"""Thomas tridiagonal solver and assembly of 1D implicit grid-line systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an install-time choice
    _HAVE_NUMBA = False

PIVOT_FLOOR = 1e-300


@dataclass
class TriDiagSystem:
    """Tridiagonal system: sub[0] and sup[n-1] are unused."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        n = len(self.diag)
        for name in ("sub", "diag", "sup", "rhs"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have length {n}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
            setattr(self, name, arr)
        if n < 1:
            raise ValueError("system must have at least one unknown")

    def dense(self) -> np.ndarray:
        n = len(self.diag)
        a = np.diag(self.diag)
        if n > 1:
            a += np.diag(self.sub[1:], -1) + np.diag(self.sup[:-1], 1)
        return a


def thomas_solve(system: TriDiagSystem) -> np.ndarray:
    """Solve the tridiagonal system by forward elimination + back substitution.

    O(n); rejects systems that hit a near-zero pivot during elimination.
    """
    sub, diag, sup, rhs = system.sub, system.diag, system.sup, system.rhs
    n = len(diag)
    cp = np.empty(n)
    dp = np.empty(n)
    piv = diag[0]
    if abs(piv) < PIVOT_FLOOR:
        raise ValueError("singular tridiagonal system (zero pivot at row 0)")
    cp[0] = sup[0] / piv if n > 1 else 0.0
    dp[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - sub[i] * cp[i - 1]
        if abs(piv) < PIVOT_FLOOR:
            raise ValueError(f"singular tridiagonal system (zero pivot at row {i})")
        cp[i] = sup[i] / piv if i < n - 1 else 0.0
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / piv
    x = dp
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x


def assemble_line(axis: int, line_index, region, scale: float, dt: float,
                  alpha: float, rhs_line, boundary_values) -> TriDiagSystem:
    """Build the interior-node system (1 - scale*dt/alpha * d2_axis) x = rhs.

    ``line_index`` gives the two perpendicular node indices (j, k order with
    the axis removed).  Dirichlet endpoint contributions are folded into the
    rhs, which keeps the system unconditionally diagonally dominant.
    """
    grid = region.grid
    n = grid.shape[axis]
    m = n - 2
    if m < 1:
        raise ValueError("line has no interior nodes")
    rhs_line = np.asarray(rhs_line, dtype=np.float64)
    if rhs_line.shape != (m,):
        raise ValueError(f"rhs_line must have length {m}")

    eps = region.eps_half(axis)
    p, q = line_index
    idx_minus = [None, None, None]
    idx_plus = [None, None, None]
    perp = [d for d in range(3) if d != axis]
    idx_minus[axis] = slice(0, m)
    idx_plus[axis] = slice(1, m + 1)
    for d, v in zip(perp, (p, q)):
        idx_minus[d] = v
        idx_plus[d] = v
    e_minus = eps[tuple(idx_minus)]
    e_plus = eps[tuple(idx_plus)]

    f = scale * dt / (alpha * grid.h**2)
    diag = 1.0 + f * (e_plus + e_minus)
    sub = -f * e_minus
    sup = -f * e_plus
    rhs = rhs_line.copy()
    b_low, b_high = boundary_values
    rhs[0] += f * e_minus[0] * b_low
    rhs[-1] += f * e_plus[-1] * b_high
    return TriDiagSystem(sub, diag, sup, rhs)


# ---------------------------------------------------------------------------
# Batched prefactored sweeps: one factorization per (axis, coefficient),
# reused for every line and every time step of a march.


def _solve_batch_numpy(sub, cp, inv, rhs, dp, out):
    m = rhs.shape[0]
    dp[0] = rhs[0] * inv[0]
    for i in range(1, m):
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) * inv[i]
    out[m - 1] = dp[m - 1]
    for i in range(m - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]


def _solve_batch_loops(sub, cp, inv, rhs, dp, out):
    m, L = rhs.shape
    for l in range(L):
        dp[0, l] = rhs[0, l] * inv[0, l]
    for i in range(1, m):
        for l in range(L):
            dp[i, l] = (rhs[i, l] - sub[i, l] * dp[i - 1, l]) * inv[i, l]
    for l in range(L):
        out[m - 1, l] = dp[m - 1, l]
    for i in range(m - 2, -1, -1):
        for l in range(L):
            out[i, l] = dp[i, l] - cp[i, l] * out[i + 1, l]


if _HAVE_NUMBA:
    _solve_batch = njit(cache=True)(_solve_batch_loops)
else:
    _solve_batch = _solve_batch_numpy


class LineSweepSolver:
    """Prefactored (1 - factor*d2_axis) solver over all interior grid lines.

    ``factor`` is c*dt/alpha; the 1/h^2 of the difference operator is applied
    internally.  Scratch buffers are allocated once, so repeated sweeps do no
    per-line allocation.  Single-threaded and deterministic.
    """

    def __init__(self, region, boundary_values: np.ndarray, axis: int, factor: float):
        grid = region.grid
        self.grid = grid
        self.axis = axis
        self.factor = float(factor)
        n = grid.shape[axis]
        self.m = n - 2
        f = self.factor / grid.h**2

        eps = region.eps_half(axis)
        sl_m = [slice(1, -1)] * 3
        sl_p = [slice(1, -1)] * 3
        sl_m[axis] = slice(0, self.m)
        sl_p[axis] = slice(1, self.m + 1)
        e_minus = np.moveaxis(eps[tuple(sl_m)], axis, 0)
        e_plus = np.moveaxis(eps[tuple(sl_p)], axis, 0)
        self.block_shape = e_minus.shape
        L = e_minus.shape[1] * e_minus.shape[2]

        e_minus = np.ascontiguousarray(e_minus.reshape(self.m, L))
        e_plus = np.ascontiguousarray(e_plus.reshape(self.m, L))
        diag = 1.0 + f * (e_plus + e_minus)
        self.sub = -f * e_minus
        sup = -f * e_plus

        # Thomas LU factors (diagonal dominance rules out zero pivots).
        self.cp = np.empty_like(diag)
        self.inv = np.empty_like(diag)
        self.inv[0] = 1.0 / diag[0]
        self.cp[0] = sup[0] * self.inv[0]
        for i in range(1, self.m):
            piv = diag[i] - self.sub[i] * self.cp[i - 1]
            self.inv[i] = 1.0 / piv
            self.cp[i] = sup[i] * self.inv[i]

        # Static Dirichlet fold-in terms for the first/last interior rows.
        lo_face = [slice(1, -1)] * 3
        hi_face = [slice(1, -1)] * 3
        lo_face[axis] = 0
        hi_face[axis] = -1
        bvals = boundary_values
        self.fold_low = (f * e_minus[0].reshape(self.block_shape[1:])
                         * bvals[tuple(lo_face)]).reshape(L)
        self.fold_high = (f * e_plus[-1].reshape(self.block_shape[1:])
                          * bvals[tuple(hi_face)]).reshape(L)

        self._rhs = np.empty((self.m, L))
        self._dp = np.empty((self.m, L))
        self._out = np.empty((self.m, L))

    def solve_block(self, rhs_block: np.ndarray) -> np.ndarray:
        """Solve all lines; rhs_block is interior-shaped with the sweep axis first.

        Returns a buffer shaped like rhs_block that is overwritten by the next
        call; callers copy it out immediately.
        """
        m, L = self._rhs.shape
        self._rhs[:] = rhs_block.reshape(m, L)
        self._rhs[0] += self.fold_low
        self._rhs[-1] += self.fold_high
        _solve_batch(self.sub, self.cp, self.inv, self._rhs, self._dp, self._out)
        return self._out.reshape(self.block_shape)
