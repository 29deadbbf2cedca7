"""Regression against reference error values for the dielectric-sphere
benchmark (steady-state relative L2 errors at dt = h^2/20, T = 10, H = 1)."""

import numpy as np
import pytest

from pbsplit.grid import relative_norms
from pbsplit.problem import default_sphere_grid, sphere_benchmark, sphere_exact_field
from pbsplit.schemes import MarchConfig, march

CASES = [
    # (scheme, h, reference L2)
    ("LODCN1", 0.5, 1.91e-1),
    ("AOSIE1", 0.5, 4.06e-1),
    ("AOSIE2", 0.5, 2.80e-1),
    ("AOSCN1", 0.5, 2.88e-1),
    ("AOSCN2", 0.5, 2.38e-1),
    ("MAOSIE", 0.5, 2.61e-1),
    ("MAOSCN", 0.5, 2.27e-1),
    ("AOSCN2", 0.25, 1.47e-1),
]


@pytest.mark.parametrize("scheme,h,ref_l2", CASES)
def test_sphere_benchmark_reference_l2(scheme, h, ref_l2):
    grid = default_sphere_grid(h)
    prob = sphere_benchmark(grid, H=1.0)
    exact = sphere_exact_field(grid, 80.0, 1.0)
    excl = np.zeros(grid.shape, dtype=bool)
    excl[grid.origin_index()] = True
    rep = march(prob, MarchConfig(dt=h * h / 20.0, T=10.0, variant=scheme))
    assert not rep.diverged
    l2 = relative_norms(exact, rep.final, exclude=excl).l2
    assert l2 == pytest.approx(ref_l2, rel=0.10)
