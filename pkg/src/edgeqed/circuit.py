"""Capacitively coupled LC-resonator realization of the lattice.

Each site is an inductor Lg and capacitor Cg to ground; neighbours couple
through Cc (beta-scaled on the row-to-row bond).  Edge and corner sites get
their ground capacitance adjusted so that every diagonal of the capacitance
matrix equals C_Sigma = Cg + (2 + beta) Cc, keeping on-site frequencies
uniform.  Collective modes follow from the generalized symmetric problem
L^-1 v = omega^2 C v, which avoids explicit matrix square roots.

Inverting C generates second- and third-neighbour hoppings even though only
nearest neighbours are physically coupled; those terms, and on-site
frequency disorder, break chiral symmetry and give the flat band a finite
spectral width.
"""

import numpy as np
import scipy.linalg
from dataclasses import dataclass

from .lattice import LatticeSpec, SiteMap, bond_arrays, site_positions, E1, E2


@dataclass(frozen=True)
class CircuitSpec:
    """Electrical parameters for one lattice geometry."""

    lattice: LatticeSpec
    lg: float                 # henry
    cg: float                 # farad
    cc: float                 # farad
    sigma_rel: float = 0.0    # relative std of the on-site frequency
    seed: int = 0

    def __post_init__(self):
        if self.lg <= 0 or self.cg <= 0:
            raise ValueError("Lg and Cg must be positive")
        if self.cc < 0:
            raise ValueError("Cc must be >= 0")
        if self.sigma_rel < 0:
            raise ValueError("sigma_rel must be >= 0")

    @property
    def c_sigma(self) -> float:
        return self.cg + (2.0 + self.lattice.beta) * self.cc

    @property
    def coupling_ratio(self) -> float:
        return self.cc / self.c_sigma

    @property
    def omega_r(self) -> float:
        return 1.0 / np.sqrt(self.lg * self.c_sigma)


def _torus_bond_arrays(spec: LatticeSpec):
    """Bonds of the fully periodic lattice: the strip bonds plus the e1 wrap
    B(n1-1, m) - A(0, m).  Used for hopping extraction, where an edge would
    only pollute the fit."""
    if not spec.periodic:
        raise ValueError("torus construction requires periodic boundary_e2")
    ia, ib, rate = bond_arrays(spec)
    m = np.arange(spec.n2)
    a_wrap = 2 * m
    b_wrap = 2 * ((spec.n1 - 1) * spec.n2 + m) + 1
    ia = np.concatenate([ia, a_wrap])
    ib = np.concatenate([ib, b_wrap])
    rate = np.concatenate([rate, np.full(spec.n2, spec.beta * spec.j)])
    return ia, ib, rate


def build_capacitance_matrix(cs: CircuitSpec, torus: bool = False) -> np.ndarray:
    """Dense symmetric capacitance matrix: diagonal C_Sigma, off-diagonal
    -Cc on J-bonds and -beta*Cc on the e1 bonds.  Positive definite whenever
    Cg > 0 (diagonal dominance)."""
    spec = cs.lattice
    n = spec.nsites
    bonds = _torus_bond_arrays(spec) if torus else bond_arrays(spec)
    ia, ib, rate = bonds
    c = np.zeros((n, n))
    weight = rate / spec.j  # 1 on J-bonds, beta on the e1 bond
    np.add.at(c, (ia, ib), -cs.cc * weight)
    np.add.at(c, (ib, ia), -cs.cc * weight)
    np.fill_diagonal(c, cs.c_sigma)
    return c


def _inverse_inductances(cs: CircuitSpec, rng=None) -> np.ndarray:
    """Per-site 1/Lg with frequency disorder applied through Lg: a site with
    frequency factor f = 1 + sigma_rel * xi has Lg -> Lg / f^2."""
    n = cs.lattice.nsites
    if cs.sigma_rel == 0.0 or rng is None:
        return np.full(n, 1.0 / cs.lg)
    f = 1.0 + cs.sigma_rel * rng.standard_normal(n)
    return f * f / cs.lg


def circuit_modes(cs: CircuitSpec, torus: bool = False, rng=None,
                  max_sites: int = 10000):
    """Collective mode frequencies (ascending) and flux eigenvectors from
    the generalized eigenproblem diag(1/Lg) v = omega^2 C v."""
    if cs.lattice.nsites > max_sites:
        raise ValueError(f"{cs.lattice.nsites} sites exceed dense limit {max_sites}")
    c = build_capacitance_matrix(cs, torus=torus)
    linv = np.diag(_inverse_inductances(cs, rng))
    w2, vecs = scipy.linalg.eigh(linv, c)
    return np.sqrt(np.clip(w2, 0.0, None)), vecs


def mode_hamiltonian(cs: CircuitSpec, torus: bool = False) -> np.ndarray:
    """Clean-lattice mode matrix sqrt(L^-1 C^-1) in the site basis, computed
    through the eigendecomposition of C (L is uniform here)."""
    c = build_capacitance_matrix(cs, torus=torus)
    evals, evecs = scipy.linalg.eigh(c)
    cinv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
    return cinv_sqrt / np.sqrt(cs.lg)


def neighbor_shells(spec: LatticeSpec, torus: bool = False, tol: float = 1e-6):
    """Index pairs of the first three neighbour shells, classified by the
    minimum-image euclidean distance (squared distances 1, 3, 4)."""
    pos = site_positions(spec)
    shifts = [np.zeros(2)]
    images_2 = [-1, 0, 1] if spec.periodic else [0]
    images_1 = [-1, 0, 1] if torus else [0]
    shifts = [i1 * spec.n1 * E1 + i2 * spec.n2 * E2
              for i1 in images_1 for i2 in images_2]
    n = len(pos)
    d2 = np.full((n, n), np.inf)
    for s in shifts:
        diff = pos[:, None, :] - pos[None, :, :] + s
        np.minimum(d2, (diff ** 2).sum(axis=2), out=d2)
    shells = []
    for target in (1.0, 3.0, 4.0):
        mask = np.abs(d2 - target) < tol
        np.fill_diagonal(mask, False)
        shells.append(np.nonzero(mask))
    return shells


@dataclass(frozen=True)
class HoppingFit:
    j1: float
    j2: float
    j3: float
    omega0: float
    residual: float  # Frobenius norm of H - fit, relative to ||H - omega0 I||


def extract_hoppings(cs: CircuitSpec, n_cells: int = 8) -> HoppingFit:
    """Least-squares fit of the circuit mode matrix to a tight-binding
    template with first/second/third-neighbour couplings.

    Runs on an n_cells x n_cells torus so every site sees the same
    environment; the shells have disjoint supports, so the fit decouples
    into shell averages.  Requires a clean lattice.
    """
    if cs.sigma_rel != 0.0:
        raise ValueError("hopping extraction expects a clean lattice")
    spec = LatticeSpec(n1=n_cells, n2=n_cells, delta=0.0,
                       beta=cs.lattice.beta, j=cs.lattice.j,
                       boundary_e2="periodic")
    fit_cs = CircuitSpec(lattice=spec, lg=cs.lg, cg=cs.cg, cc=cs.cc)
    h = mode_hamiltonian(fit_cs, torus=True)
    omega0 = float(np.mean(np.diag(h)))
    rem = h - omega0 * np.eye(len(h))
    base = np.linalg.norm(rem)
    js = []
    for rows, cols in neighbor_shells(spec, torus=True):
        if len(rows) == 0:
            raise ValueError("torus too small to separate neighbour shells")
        val = float(np.mean(h[rows, cols]))
        js.append(val)
        rem[rows, cols] -= val
    residual = float(np.linalg.norm(rem) / base) if base > 0 else 0.0
    return HoppingFit(j1=js[0], j2=js[1], j3=js[2], omega0=omega0,
                      residual=residual)


def edge_mode_weights(spec: LatticeSpec, vectors: np.ndarray) -> np.ndarray:
    """Weight of each eigenvector on the two terminating rows (n = 0 and
    n = n1 - 1), the natural localization measure for the zigzag strip."""
    smap = SiteMap(spec)
    idx = []
    for n in (0, spec.n1 - 1):
        for m in range(spec.n2):
            idx.append(smap.index(n, m, "A"))
            idx.append(smap.index(n, m, "B"))
    idx = np.array(sorted(set(idx)))
    w = vectors ** 2
    return w[idx, :].sum(axis=0) / w.sum(axis=0)


@dataclass
class DisorderStats:
    sigma_rel: float
    widths: np.ndarray          # rad/s, one entry per realization
    cluster_sizes: np.ndarray
    failures: int               # realizations without an identifiable cluster
    threshold: float = None
    below_threshold: bool = None

    @property
    def mean_width(self) -> float:
        return float(np.mean(self.widths)) if len(self.widths) else np.nan

    @property
    def std_width(self) -> float:
        return float(np.std(self.widths)) if len(self.widths) else np.nan


def disorder_flatband_width(cs: CircuitSpec, realizations: int,
                            threshold: float = None,
                            edge_threshold: float = 0.5) -> DisorderStats:
    """Monte-Carlo spectral width of the edge-mode cluster under on-site
    frequency disorder.

    Per realization the cluster is the set of modes with edge weight above
    `edge_threshold`; its width is max - min of their frequencies.  Seeding
    is hierarchical (one child seed per realization), so runs are
    reproducible bit-for-bit for a fixed master seed.  Realizations where no
    cluster is identifiable (strong-disorder localization) are counted as
    failures rather than raising.
    """
    if realizations < 1:
        raise ValueError("need at least one realization")
    spec = cs.lattice
    seeds = np.random.SeedSequence(cs.seed).spawn(realizations)
    widths, sizes = [], []
    failures = 0
    for seq in seeds:
        rng = np.random.default_rng(seq)
        freqs, vecs = circuit_modes(cs, rng=rng)
        weights = edge_mode_weights(spec, vecs)
        cluster = freqs[weights > edge_threshold]
        if len(cluster) < 2:
            failures += 1
            continue
        widths.append(float(np.max(cluster) - np.min(cluster)))
        sizes.append(len(cluster))
    stats = DisorderStats(sigma_rel=cs.sigma_rel,
                          widths=np.array(widths),
                          cluster_sizes=np.array(sizes, dtype=int),
                          failures=failures,
                          threshold=threshold)
    if threshold is not None and len(stats.widths):
        stats.below_threshold = bool(stats.mean_width <= threshold)
    return stats
