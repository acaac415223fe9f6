"""Honeycomb lattice with a zigzag edge and its sparse single-excitation Hamiltonians.

The unit cell at (n, m) holds one A and one B resonator.  Row n = 0 is the
zigzag edge (its A sites are the outermost, two-coordinated sites where
emitters attach); n increases toward the bulk and m runs along the edge.
B(n, m) couples to A(n, m) and A(n, m+1) at rate J and to A(n+1, m) at rate
beta*J, so every bulk site has coordination 3.  Site energies are +delta on
the A sublattice and -delta on B.  Energies are in units of J throughout.

The strip is always open along e1 (rows); the far row n = n1-1 is a
B-terminated boundary that hosts its own edge modes, so dynamical scenarios
must keep n1 large enough that the far edge stays out of play.
"""

import numpy as np
import scipy.io
import scipy.sparse as sp
from dataclasses import dataclass

SUBLATTICES = ("A", "B")
BOUNDARIES = ("periodic", "open")

# Primitive vectors and B-site offset for unit nearest-neighbour distance.
E1 = np.array([1.5, np.sqrt(3.0) / 2.0])
E2 = np.array([0.0, np.sqrt(3.0)])
D_B = np.array([0.5, np.sqrt(3.0) / 2.0])


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry and physical parameters of one zigzag-terminated lattice."""

    n1: int
    n2: int
    delta: float = 0.0
    beta: float = 1.0
    j: float = 1.0
    boundary_e2: str = "periodic"

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError(f"need n1 >= 2 and n2 >= 2, got {self.n1}x{self.n2}")
        if self.beta <= 0.0:
            raise ValueError(f"anisotropy beta must be > 0, got {self.beta}")
        if self.j <= 0.0:
            raise ValueError(f"hopping j must be > 0, got {self.j}")
        if self.boundary_e2 not in BOUNDARIES:
            raise ValueError(f"boundary_e2 must be one of {BOUNDARIES}")

    @property
    def nsites(self) -> int:
        return 2 * self.n1 * self.n2

    @property
    def periodic(self) -> bool:
        return self.boundary_e2 == "periodic"


@dataclass(frozen=True)
class SiteIndex:
    n: int
    m: int
    sublattice: str


@dataclass(frozen=True)
class QubitArrangement:
    """Emitters attached to edge resonators a(0, m).

    All qubits share the coupling g and the detuning (the single-detuning
    restriction is deliberate; the effective model is derived for it).
    Positions must map to distinct edge cells.
    """

    positions: tuple
    g: float
    detuning: float = 0.0

    def __post_init__(self):
        positions = tuple(int(m) for m in self.positions)
        object.__setattr__(self, "positions", positions)
        if len(positions) == 0:
            raise ValueError("at least one qubit required")
        if len(set(positions)) != len(positions):
            raise ValueError(f"duplicate qubit positions in {positions}")
        if self.g <= 0.0:
            raise ValueError(f"coupling g must be > 0, got {self.g}")

    @property
    def nqubits(self) -> int:
        return len(self.positions)

    def separations(self):
        """|m_i - m_j| matrix."""
        pos = np.asarray(self.positions)
        return np.abs(pos[:, None] - pos[None, :])


class SiteMap:
    """Bijection between (n, m, sublattice) / qubit labels and linear indices.

    Lattice sites occupy [0, 2*n1*n2) with index = 2*(n*n2 + m) + s, s = 0
    for A and 1 for B; qubit j sits at 2*n1*n2 + j.
    """

    def __init__(self, spec: LatticeSpec, qubit_positions=()):
        self.spec = spec
        self.qubit_positions = tuple(int(m) for m in qubit_positions)
        self._nlattice = spec.nsites

    @property
    def nqubits(self) -> int:
        return len(self.qubit_positions)

    @property
    def dimension(self) -> int:
        return self._nlattice + self.nqubits

    @property
    def nlattice(self) -> int:
        return self._nlattice

    def wrap_m(self, m: int) -> int:
        spec = self.spec
        if spec.periodic:
            return m % spec.n2
        if not 0 <= m < spec.n2:
            raise IndexError(f"m={m} outside open lattice of n2={spec.n2}")
        return m

    def index(self, n: int, m: int, sublattice: str) -> int:
        spec = self.spec
        if not 0 <= n < spec.n1:
            raise IndexError(f"n={n} outside lattice of n1={spec.n1}")
        s = SUBLATTICES.index(sublattice)
        return 2 * (n * spec.n2 + self.wrap_m(m)) + s

    def site(self, i: int):
        """Inverse map; returns SiteIndex for lattice slots, ("qubit", j) above."""
        if i < 0 or i >= self.dimension:
            raise IndexError(f"index {i} outside dimension {self.dimension}")
        if i >= self._nlattice:
            return ("qubit", i - self._nlattice)
        cell, s = divmod(i, 2)
        n, m = divmod(cell, self.spec.n2)
        return SiteIndex(n, m, SUBLATTICES[s])

    def qubit_slot(self, j: int) -> int:
        if not 0 <= j < self.nqubits:
            raise IndexError(f"qubit {j} of {self.nqubits}")
        return self._nlattice + j

    def embed_lattice_vector(self, values):
        """Pad a lattice-only vector with zero qubit amplitudes."""
        values = np.asarray(values)
        if values.shape != (self._nlattice,):
            raise ValueError("lattice vector has wrong length")
        out = np.zeros(self.dimension, dtype=complex)
        out[:self._nlattice] = values
        return out


def site_positions(spec: LatticeSpec) -> np.ndarray:
    """Euclidean positions of every site (unit nearest-neighbour distance),
    ordered by linear site index.  Used by geometry oracles and the circuit
    neighbour-shell classifier."""
    n = np.arange(spec.n1)
    m = np.arange(spec.n2)
    cell = n[:, None, None] * E1[None, None, :] + m[None, :, None] * E2[None, None, :]
    pos = np.empty((spec.n1, spec.n2, 2, 2))
    pos[:, :, 0, :] = cell
    pos[:, :, 1, :] = cell + D_B
    return pos.reshape(spec.nsites, 2)


def bond_arrays(spec: LatticeSpec):
    """All nearest-neighbour bonds as (i_a, i_b, rate) index arrays.

    Bond families: intra-cell A(n,m)-B(n,m) and zigzag A(n,m+1)-B(n,m) at
    rate J, row-to-row A(n+1,m)-B(n,m) at rate beta*J.
    """
    n1, n2 = spec.n1, spec.n2
    cell = np.arange(n1)[:, None] * n2 + np.arange(n2)[None, :]
    a_idx = 2 * cell
    b_idx = a_idx + 1

    ia, ib, rate = [], [], []

    ia.append(a_idx.ravel())
    ib.append(b_idx.ravel())
    rate.append(np.full(a_idx.size, spec.j))

    if spec.periodic:
        a_right = 2 * (np.arange(n1)[:, None] * n2 + (np.arange(n2)[None, :] + 1) % n2)
        ia.append(a_right.ravel())
        ib.append(b_idx.ravel())
        rate.append(np.full(a_right.size, spec.j))
    else:
        ia.append(a_idx[:, 1:].ravel())
        ib.append(b_idx[:, :-1].ravel())
        rate.append(np.full(a_idx[:, 1:].size, spec.j))

    ia.append(a_idx[1:, :].ravel())
    ib.append(b_idx[:-1, :].ravel())
    rate.append(np.full(a_idx[1:, :].size, spec.beta * spec.j))

    return np.concatenate(ia), np.concatenate(ib), np.concatenate(rate)


class SparseHermitian:
    """Hermitian operator in CSR form together with its site map.

    The matrix is immutable once assembled (CSR with sorted indices,
    complex128) and safe to share across threads.  For the lattices built
    here all entries are real; a cached real view accelerates matrix-vector
    products without changing the stored layout.
    """

    def __init__(self, matrix: sp.csr_matrix, site_map: SiteMap):
        matrix = matrix.tocsr().astype(np.complex128)
        matrix.sum_duplicates()
        matrix.sort_indices()
        self.matrix = matrix
        self.site_map = site_map
        self._real_matrix = None
        if matrix.nnz == 0 or np.all(matrix.data.imag == 0.0):
            self._real_matrix = sp.csr_matrix(
                (matrix.data.real.copy(), matrix.indices, matrix.indptr),
                shape=matrix.shape)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if self._real_matrix is not None and np.iscomplexobj(v):
            return self._real_matrix @ v.real + 1j * (self._real_matrix @ v.imag)
        return self.matrix @ v

    def __matmul__(self, v):
        return self.matvec(v)

    def is_structurally_hermitian(self) -> bool:
        """Bit-exact check that every stored (i, j, v) has (j, i, conj v)."""
        diff = self.matrix - self.matrix.conjugate().transpose().tocsr()
        return diff.nnz == 0 or np.max(np.abs(diff.data)) == 0.0

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def gershgorin_bounds(self):
        """Real interval guaranteed to contain the spectrum."""
        d = self.matrix.diagonal().real
        radii = np.asarray(np.abs(self.matrix).sum(axis=1)).ravel() - np.abs(d)
        return float(np.min(d - radii)), float(np.max(d + radii))

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def export_matrix_market(self, path) -> None:
        scipy.io.mmwrite(str(path), self.matrix.tocoo())


def build_bath_hamiltonian(spec: LatticeSpec) -> SparseHermitian:
    """Assemble the bare-lattice Hamiltonian.

    Diagonal +delta on A sites and -delta on B sites; every bond stored in
    both triangles so Hermiticity holds structurally.
    """
    ia, ib, rate = bond_arrays(spec)
    rows = np.concatenate([ia, ib])
    cols = np.concatenate([ib, ia])
    vals = np.concatenate([rate, rate]).astype(np.complex128)

    if spec.delta != 0.0:
        diag_idx = np.arange(spec.nsites)
        diag_val = np.where(diag_idx % 2 == 0, spec.delta, -spec.delta)
        rows = np.concatenate([rows, diag_idx])
        cols = np.concatenate([cols, diag_idx])
        vals = np.concatenate([vals, diag_val.astype(np.complex128)])

    matrix = sp.coo_matrix((vals, (rows, cols)),
                           shape=(spec.nsites, spec.nsites)).tocsr()
    return SparseHermitian(matrix, SiteMap(spec))


def attach_qubits(h: SparseHermitian, qubits: QubitArrangement) -> SparseHermitian:
    """Extend a bath Hamiltonian with emitter rows.

    Qubit j gets diagonal `detuning` and one off-diagonal g to a(0, m_j).
    Accepts only a bath-only operator; returns a new operator (the input is
    untouched).  An empty arrangement is not constructible, so the zero-qubit
    identity case is simply `h` itself.
    """
    if qubits is None or (hasattr(qubits, "nqubits") and qubits.nqubits == 0):
        return h
    smap = h.site_map
    if smap.nqubits:
        raise ValueError("hamiltonian already carries qubits")
    spec = smap.spec

    wrapped = [smap.wrap_m(m) for m in qubits.positions]
    if len(set(wrapped)) != len(wrapped):
        raise ValueError(f"qubit positions {qubits.positions} collide after wrapping")

    nq = qubits.nqubits
    nl = smap.nlattice
    dim = nl + nq
    edge_idx = np.array([smap.index(0, m, "A") for m in qubits.positions])
    qubit_idx = nl + np.arange(nq)

    base = h.matrix.tocoo()
    rows = np.concatenate([base.row, qubit_idx, edge_idx])
    cols = np.concatenate([base.col, edge_idx, qubit_idx])
    vals = np.concatenate([base.data,
                           np.full(nq, qubits.g, dtype=np.complex128),
                           np.full(nq, qubits.g, dtype=np.complex128)])
    if qubits.detuning != 0.0:
        rows = np.concatenate([rows, qubit_idx])
        cols = np.concatenate([cols, qubit_idx])
        vals = np.concatenate([vals, np.full(nq, qubits.detuning, dtype=np.complex128)])

    matrix = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    return SparseHermitian(matrix, SiteMap(spec, qubits.positions))


def neighbor_counts(h: SparseHermitian) -> np.ndarray:
    """Number of off-diagonal couplings per row (coordination numbers)."""
    m = h.matrix.copy()
    m.setdiag(0.0)
    m.eliminate_zeros()
    return np.diff(m.indptr)
