import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbsplit.constants import C_ES
from pbsplit.geometry import Atom, MolecularSystem
from pbsplit.grid import (FOUR_PI, Grid3D, ScalarField, deposit_charges,
                          dump_field_csv, make_grid, relative_norms)


def test_make_grid_benchmark_box():
    g = make_grid((-3, -3, -3), (3, 3, 3), 0.5)
    assert g.shape == (13, 13, 13)
    assert np.allclose(g.x, -3 + 0.5 * np.arange(13))


def test_make_grid_minimal():
    g = make_grid((0, 0, 0), (1, 1, 1), 0.5)
    assert g.shape == (3, 3, 3)


def test_make_grid_rejects_noncommensurate():
    with pytest.raises(ValueError, match="integer multiple"):
        make_grid((0, 0, 0), (1, 1, 1), 0.3)


def test_make_grid_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        make_grid((0, 0, 0), (-1, 1, 1), 0.5)


def test_grid_spacing_identity():
    g = make_grid((-2, 0, 1), (2, 2, 3), 0.25)
    for d in range(3):
        assert g.hi[d] - g.lo[d] == pytest.approx(g.h * (g.shape[d] - 1), rel=1e-12)


def test_flat_index_roundtrip_everywhere():
    g = make_grid((0, 0, 0), (2, 1.5, 1), 0.5)
    i, j, k = np.meshgrid(np.arange(g.nx), np.arange(g.ny), np.arange(g.nz),
                          indexing="ij")
    flat = g.flat_index(i, j, k)
    assert np.array_equal(np.sort(flat.ravel()), np.arange(g.num_nodes))
    ii, jj, kk = g.unflatten(flat)
    assert np.array_equal(ii, i) and np.array_equal(jj, j) and np.array_equal(kk, k)


class TestRelativeNorms:
    def grid(self):
        return make_grid((0, 0, 0), (1, 1, 1), 0.5)

    def test_identity_is_zero(self):
        g = self.grid()
        f = ScalarField(g, np.random.default_rng(0).standard_normal(g.shape))
        n = relative_norms(f, f)
        assert n.l2 == 0.0 and n.linf == 0.0

    def test_double_field(self):
        g = self.grid()
        f = ScalarField(g, np.random.default_rng(1).standard_normal(g.shape))
        n = relative_norms(f, ScalarField(g, 2.0 * f.data))
        assert n.linf == pytest.approx(1.0)
        assert n.l2 == pytest.approx(1.0)

    def test_two_node_hand_value(self):
        # exact = (1, 2, 0, ...), approx = (1, 1, 0, ...):
        # l2 = sqrt(1 / (1+4)), linf = 1/2, worked out by hand.
        g = self.grid()
        e = np.zeros(g.shape)
        a = np.zeros(g.shape)
        e[0, 0, 0], e[1, 0, 0] = 1.0, 2.0
        a[0, 0, 0], a[1, 0, 0] = 1.0, 1.0
        n = relative_norms(ScalarField(g, e), ScalarField(g, a))
        assert n.l2 == pytest.approx(np.sqrt(1.0 / 5.0), rel=1e-14)
        assert n.linf == pytest.approx(0.5, rel=1e-14)

    def test_zero_exact_rejected(self):
        g = self.grid()
        with pytest.raises(ValueError, match="identically zero"):
            relative_norms(ScalarField.zeros(g), ScalarField.zeros(g))

    def test_exclusion_mask(self):
        g = self.grid()
        e = np.ones(g.shape)
        a = np.ones(g.shape)
        a[0, 0, 0] = 100.0
        mask = np.zeros(g.shape, dtype=bool)
        mask[0, 0, 0] = True
        n = relative_norms(ScalarField(g, e), ScalarField(g, a), exclude=mask)
        assert n.l2 == 0.0 and n.linf == 0.0


def _one_atom(center, q=1.0, r=1.0):
    return MolecularSystem([Atom(center, q, r)], label="probe")


class TestDeposit:
    def grid(self):
        return make_grid((-2, -2, -2), (2, 2, 2), 0.5)

    def test_charge_on_node(self):
        g = self.grid()
        qfrac, rho = deposit_charges(_one_atom((0.0, 0.0, 0.0)), g)
        assert qfrac.data[4, 4, 4] == 1.0
        assert np.sum(qfrac.data != 0) == 1
        assert rho.data[4, 4, 4] == pytest.approx(FOUR_PI * C_ES / g.h**3)

    def test_charge_at_cell_center(self):
        g = self.grid()
        qfrac, _ = deposit_charges(_one_atom((0.25, 0.25, 0.25)), g)
        nz = qfrac.data[qfrac.data != 0]
        assert len(nz) == 8
        assert np.allclose(nz, 0.125)

    def test_fractional_offsets_match_tensor_product_oracle(self):
        # independent 8-weight oracle: products of (1-s), s per axis
        g = self.grid()
        s = np.array([0.25, 0.5, 0.75])
        pos = tuple(-2 + 0.5 * 3 + 0.5 * s[d] for d in range(3))
        qfrac, _ = deposit_charges(_one_atom(pos, q=2.0), g)
        expected = np.zeros(g.shape)
        for di in (0, 1):
            for dj in (0, 1):
                for dk in (0, 1):
                    w = ((s[0] if di else 1 - s[0]) * (s[1] if dj else 1 - s[1])
                         * (s[2] if dk else 1 - s[2]))
                    expected[3 + di, 3 + dj, 3 + dk] = 2.0 * w
        assert np.allclose(qfrac.data, expected, atol=1e-15)

    def test_atom_outside_interior_rejected(self):
        g = self.grid()
        with pytest.raises(ValueError, match="atom 0"):
            deposit_charges(_one_atom((-1.8, 0.0, 0.0)), g)

    @settings(max_examples=50, deadline=None, derandomize=True)
    @given(st.lists(
        st.tuples(st.floats(-1.2, 1.2), st.floats(-1.2, 1.2), st.floats(-1.2, 1.2),
                  st.floats(-2.0, 2.0)),
        min_size=1, max_size=6))
    def test_charge_conservation(self, spec):
        g = self.grid()
        atoms = [Atom((x, y, z), q, 1.0) for x, y, z, q in spec]
        qfrac, _ = deposit_charges(MolecularSystem(atoms), g)
        total = sum(q for _, _, _, q in spec)
        assert np.sum(qfrac.data) == pytest.approx(total, abs=1e-12 * max(1, abs(total)))


def test_dump_field_csv_format(tmp_path):
    g = make_grid((0, 0, 0), (1, 1, 1), 0.5)
    f = ScalarField(g, np.arange(27, dtype=float).reshape(g.shape))
    path = tmp_path / "field.csv"
    dump_field_csv(f, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,k,x,y,z,value"
    assert len(lines) == 1 + g.num_nodes
    first = lines[1].split(",")
    assert first[:3] == ["0", "0", "0"]
    assert float(first[6]) == 0.0
    # 12+ significant digits in scientific notation
    assert "e" in first[6]
