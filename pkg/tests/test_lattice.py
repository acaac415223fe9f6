import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgeqed.lattice import (LatticeSpec, QubitArrangement, SiteMap,
                             attach_qubits, build_bath_hamiltonian,
                             neighbor_counts, site_positions)


def brute_force_bonds(spec):
    """Independent geometric oracle: bonds are exactly the site pairs at
    unit euclidean distance (minimum image along e2 when periodic)."""
    pos = site_positions(spec)
    shifts = [np.zeros(2)]
    if spec.periodic:
        e2 = np.array([0.0, np.sqrt(3.0)])
        shifts += [spec.n2 * e2, -spec.n2 * e2]
    bonds = set()
    for s in shifts:
        diff = pos[:, None, :] - pos[None, :, :] + s
        d2 = (diff ** 2).sum(axis=2)
        ii, jj = np.nonzero(np.abs(d2 - 1.0) < 1e-9)
        for i, j in zip(ii, jj):
            if i < j:
                bonds.add((int(i), int(j)))
    return bonds


class TestSpecValidation:
    def test_rejects_small_lattice(self):
        with pytest.raises(ValueError):
            LatticeSpec(n1=1, n2=10)
        with pytest.raises(ValueError):
            LatticeSpec(n1=10, n2=1)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            LatticeSpec(n1=4, n2=4, beta=0.0)
        with pytest.raises(ValueError):
            LatticeSpec(n1=4, n2=4, beta=-1.0)
        with pytest.raises(ValueError):
            LatticeSpec(n1=4, n2=4, j=0.0)
        with pytest.raises(ValueError):
            LatticeSpec(n1=4, n2=4, boundary_e2="twisted")


class TestSiteMap:
    @given(st.integers(2, 12), st.integers(2, 12), st.booleans())
    @settings(max_examples=40, deadline=None)
    def test_index_round_trip(self, n1, n2, periodic):
        spec = LatticeSpec(n1=n1, n2=n2,
                           boundary_e2="periodic" if periodic else "open")
        smap = SiteMap(spec)
        for i in range(spec.nsites):
            s = smap.site(i)
            assert smap.index(s.n, s.m, s.sublattice) == i

    def test_qubit_slots(self):
        spec = LatticeSpec(n1=3, n2=4)
        smap = SiteMap(spec, qubit_positions=(0, 2))
        assert smap.dimension == spec.nsites + 2
        assert smap.qubit_slot(1) == spec.nsites + 1
        assert smap.site(spec.nsites) == ("qubit", 0)

    def test_periodic_wrap(self):
        spec = LatticeSpec(n1=3, n2=4)
        smap = SiteMap(spec)
        assert smap.index(0, 4, "A") == smap.index(0, 0, "A")
        open_map = SiteMap(LatticeSpec(n1=3, n2=4, boundary_e2="open"))
        with pytest.raises(IndexError):
            open_map.index(0, 4, "A")


class TestBathHamiltonian:
    def test_structural_hermiticity(self):
        for spec in (LatticeSpec(n1=2, n2=2),
                     LatticeSpec(n1=5, n2=3, delta=0.3, beta=1.7),
                     LatticeSpec(n1=4, n2=6, boundary_e2="open")):
            h = build_bath_hamiltonian(spec)
            assert h.is_structurally_hermitian()

    def test_diagonal_is_sublattice_staggered(self):
        spec = LatticeSpec(n1=4, n2=4, delta=0.3)
        d = build_bath_hamiltonian(spec).diagonal().real
        assert np.all(d[0::2] == 0.3)
        assert np.all(d[1::2] == -0.3)
        assert set(np.round(d, 12)) == {0.3, -0.3}

    def test_bonds_match_geometric_oracle(self):
        for spec in (LatticeSpec(n1=4, n2=5),
                     LatticeSpec(n1=3, n2=4, boundary_e2="open"),
                     LatticeSpec(n1=5, n2=4, beta=0.6)):
            h = build_bath_hamiltonian(spec)
            m = h.matrix.tocoo()
            built = {(int(i), int(j)) for i, j, v in zip(m.row, m.col, m.data)
                     if i < j and v != 0}
            assert built == brute_force_bonds(spec)

    def test_edge_coordination(self):
        # zigzag termination: outermost A row has 2 neighbours, far B row 2,
        # everything else 3 (periodic along the edge)
        spec = LatticeSpec(n1=4, n2=5)
        counts = neighbor_counts(build_bath_hamiltonian(spec))
        smap = SiteMap(spec)
        for m in range(spec.n2):
            assert counts[smap.index(0, m, "A")] == 2
            assert counts[smap.index(0, m, "B")] == 3
            assert counts[smap.index(spec.n1 - 1, m, "B")] == 2
            assert counts[smap.index(spec.n1 - 1, m, "A")] == 3
        for n in range(1, spec.n1 - 1):
            for m in range(spec.n2):
                assert counts[smap.index(n, m, "A")] == 3
                assert counts[smap.index(n, m, "B")] == 3

    def test_open_boundary_corner_has_one_neighbor(self):
        spec = LatticeSpec(n1=4, n2=5, boundary_e2="open")
        counts = neighbor_counts(build_bath_hamiltonian(spec))
        smap = SiteMap(spec)
        assert counts[smap.index(0, 0, "A")] == 1
        assert set(counts) <= {1, 2, 3}

    def test_chiral_symmetry_spectrum(self):
        # bipartite hopping at delta=0: spectrum symmetric about zero
        spec = LatticeSpec(n1=6, n2=6, beta=1.4)
        w = np.linalg.eigvalsh(build_bath_hamiltonian(spec).to_dense())
        np.testing.assert_allclose(w + w[::-1], 0.0, atol=1e-10)

    def test_chiral_anticommutation(self):
        spec = LatticeSpec(n1=4, n2=4)
        h = build_bath_hamiltonian(spec).to_dense()
        sign = np.diag([1.0 if i % 2 == 0 else -1.0 for i in range(len(h))])
        np.testing.assert_allclose(sign @ h + h @ sign, 0.0, atol=0.0)

    def test_large_lattice_counts(self):
        # 600x600 cells: dimension and bond-count bookkeeping
        spec = LatticeSpec(n1=600, n2=600)
        h = build_bath_hamiltonian(spec)
        assert h.dimension == 720000
        assert h.nnz <= 6 * 720000
        n_bonds = 3 * 600 * 600 - 600  # e1 bonds missing on the last row
        assert h.nnz == 2 * n_bonds

    def test_matrix_market_round_trip(self, tmp_path):
        import scipy.io
        spec = LatticeSpec(n1=3, n2=3, delta=0.1)
        h = build_bath_hamiltonian(spec)
        path = tmp_path / "bath.mtx"
        h.export_matrix_market(path)
        back = scipy.io.mmread(str(path)).tocsr()
        assert abs(back - h.matrix).max() == 0.0


class TestAttachQubits:
    def test_single_qubit_row(self):
        spec = LatticeSpec(n1=4, n2=6)
        bath = build_bath_hamiltonian(spec)
        arr = QubitArrangement(positions=(0,), g=0.05, detuning=0.0)
        h = attach_qubits(bath, arr)
        assert h.dimension == bath.dimension + 1
        row = h.matrix.getrow(h.site_map.qubit_slot(0)).toarray().ravel()
        nz = np.nonzero(row)[0]
        assert list(nz) == [h.site_map.index(0, 0, "A")]
        assert row[nz[0]] == 0.05
        assert h.is_structurally_hermitian()

    def test_two_qubits(self):
        spec = LatticeSpec(n1=4, n2=6)
        bath = build_bath_hamiltonian(spec)
        arr = QubitArrangement(positions=(0, 2), g=0.05, detuning=0.1)
        h = attach_qubits(bath, arr)
        assert h.dimension == bath.dimension + 2
        for j, m in enumerate(arr.positions):
            slot = h.site_map.qubit_slot(j)
            row = h.matrix.getrow(slot).toarray().ravel()
            assert row[slot] == pytest.approx(0.1)
            assert row[h.site_map.index(0, m, "A")] == pytest.approx(0.05)

    def test_bath_unchanged_and_identity_case(self):
        spec = LatticeSpec(n1=3, n2=3)
        bath = build_bath_hamiltonian(spec)
        nnz_before = bath.nnz
        attach_qubits(bath, QubitArrangement(positions=(1,), g=1.0))
        assert bath.nnz == nnz_before
        assert attach_qubits(bath, None) is bath

    def test_duplicate_and_out_of_range_positions(self):
        spec = LatticeSpec(n1=3, n2=4)
        bath = build_bath_hamiltonian(spec)
        with pytest.raises(ValueError):
            QubitArrangement(positions=(1, 1), g=0.05)
        # distinct before wrapping, identical after
        arr = QubitArrangement(positions=(0, 4), g=0.05)
        with pytest.raises(ValueError):
            attach_qubits(bath, arr)
        open_bath = build_bath_hamiltonian(
            LatticeSpec(n1=3, n2=4, boundary_e2="open"))
        with pytest.raises(IndexError):
            attach_qubits(open_bath, QubitArrangement(positions=(7,), g=0.05))

    def test_empty_arrangement_rejected(self):
        with pytest.raises(ValueError, match="at least one qubit"):
            QubitArrangement(positions=(), g=0.05)


def test_gershgorin_contains_spectrum():
    spec = LatticeSpec(n1=5, n2=5, delta=0.4, beta=1.3)
    h = build_bath_hamiltonian(spec)
    lo, hi = h.gershgorin_bounds()
    w = np.linalg.eigvalsh(h.to_dense())
    assert lo <= w.min() and w.max() <= hi
