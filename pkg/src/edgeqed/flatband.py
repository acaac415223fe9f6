"""Flat-band machinery: the emergent cavity mode, projector blocks, and the
compact-state obstruction.

An emitter on edge cell m0 couples to one particular superposition of the
flat-band edge modes.  Its real amplitude on site a(n, m) is

    c(n, m) = (-1)^n / pi * int_t^pi dk  N_k^2 cos(k (m + n/2)) (2 cos(k/2)/beta)^n,

with t = 2 arccos(beta/2) and N_k^2 = (beta^2 - 2 - 2 cos k)/beta^2.  On the
edge row this integral has closed forms, which coincide with the matrix
elements P(m) of the flat-band projector between edge sites; the inverse of
P(0) is the cavity volume A that normalizes the mode.  For beta >= 2 the
support covers the whole zone and P becomes strictly compact (nonzero only
for |m| <= 1).
"""

import math

import numpy as np
import scipy.integrate
import scipy.linalg
from dataclasses import dataclass

from .lattice import LatticeSpec
from .spectra import ModeField, edge_normalization_sq, support_boundary
from .util import ConvergenceError


def _sinc_t(x: float, t: float) -> float:
    """sin(t x)/(t x), the rescaled cardinal sine of the support boundary."""
    if x == 0:
        return 1.0
    return math.sin(t * x) / (t * x)


def cavity_edge_amplitude(m: int, beta: float) -> float:
    """Closed-form edge-row amplitude c(0, m); equals the projector element
    P(m) between edge sites separated by m cells."""
    if beta <= 0:
        raise ValueError("beta must be > 0")
    m = abs(int(m))
    b2 = beta * beta
    if beta >= 2.0:
        if m == 0:
            return 1.0 - 2.0 / b2
        if m == 1:
            return -1.0 / b2
        return 0.0
    t = support_boundary(beta)
    if m == 0:
        return (2.0 * math.sin(t) + (b2 - 2.0) * (math.pi - t)) / (b2 * math.pi)
    if m == 1:
        return ((1.0 - b2 / 2.0) * math.sin(t) - (math.pi - t)) / (b2 * math.pi)
    s = _sinc_t
    return (t / (b2 * math.pi)) * ((2.0 - b2) * s(m, t) + s(m + 1, t) + s(m - 1, t))


def projector_element(m: int, beta: float) -> float:
    """Alias stressing the projector reading of the edge amplitude."""
    return cavity_edge_amplitude(m, beta)


def projector_element_quadrature(m: int, beta: float, tol: float = 1e-12) -> float:
    """Independent oracle for P(m): direct adaptive quadrature of

        P(m) = 1/(beta^2 pi) int_t^pi dk (beta^2 - 2 - 2 cos k) cos(k m).
    """
    t = support_boundary(beta)
    m = abs(int(m))

    def integrand(k):
        return (beta ** 2 - 2.0 - 2.0 * np.cos(k)) * np.cos(k * m)

    val, _ = scipy.integrate.quad(integrand, t, np.pi,
                                  epsabs=tol, epsrel=tol, limit=400)
    return val / (beta ** 2 * np.pi)


def cavity_volume(beta: float) -> float:
    """2D cavity volume A = 1/P(0); sets the Rabi coupling g/sqrt(A)."""
    return 1.0 / cavity_edge_amplitude(0, beta)


def cavity_amplitude(n: int, m: int, beta: float, tol: float = 1e-10) -> float:
    """Adaptive quadrature of c(n, m) for a single site (oracle path; the
    square-root-free integrand has only a linear zero at k = t, softened
    further by the k = t + u^2 substitution)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    t = support_boundary(beta)
    phase = m + n / 2.0

    def integrand_u(u):
        k = t + u * u
        nsq = edge_normalization_sq(k, beta)
        decay = (2.0 * np.cos(k / 2.0) / beta) ** n if n else 1.0
        return 2.0 * u * nsq * np.cos(k * phase) * decay

    umax = math.sqrt(math.pi - t)
    val, err = scipy.integrate.quad(integrand_u, 0.0, umax,
                                    epsabs=tol / 10.0, epsrel=1e-12, limit=800)
    if err > max(tol, 1e-13):
        raise ConvergenceError(
            f"cavity amplitude quadrature at (n={n}, m={m}): error {err:.2e}")
    return ((-1.0) ** n / math.pi) * val


def _gauss_nodes(t: float, nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = (math.pi - t) / 2.0
    return t + half * (x + 1.0), half * w


def _cavity_rows(spec: LatticeSpec, m_offsets: np.ndarray, nodes: int) -> np.ndarray:
    """Fixed-order Gauss-Legendre evaluation of c(n, m) for all rows n and
    the given column offsets, vectorized over the k nodes."""
    t = support_boundary(spec.beta)
    k, w = _gauss_nodes(t, nodes)
    nsq = edge_normalization_sq(k, spec.beta)
    ratio = np.maximum(2.0 * np.cos(k / 2.0) / spec.beta, 0.0)

    cos_km = np.cos(np.outer(k, m_offsets))          # (nodes, nm)
    sin_km = np.sin(np.outer(k, m_offsets))
    out = np.empty((spec.n1, m_offsets.size))
    decay = np.ones_like(k)
    for n in range(spec.n1):
        base = w * nsq * decay
        cn = base * np.cos(k * (n / 2.0))
        sn = base * np.sin(k * (n / 2.0))
        # cos(k (m + n/2)) = cos(km) cos(kn/2) - sin(km) sin(kn/2)
        out[n] = ((-1.0) ** n / math.pi) * (cn @ cos_km - sn @ sin_km)
        decay = decay * ratio
    return out


def cavity_field(spec: LatticeSpec, m0=None, tol: float = 1e-9,
                 start_nodes: int = None, max_nodes: int = 1 << 17) -> ModeField:
    """Emergent cavity mode seeded at edge cell m0 on a finite lattice.

    Amplitudes live on the A sublattice only (B amplitudes are exactly zero).
    The k integral is evaluated with Gauss-Legendre rules of doubling order
    until every amplitude moves by less than `tol`; non-convergence reports
    the worst offending site.
    """
    if m0 is None:
        m0 = spec.n2 // 2
    m0 = int(m0)
    m_offsets = np.arange(spec.n2, dtype=float) - m0
    if spec.periodic:
        # minimum-image column offsets; the mode is seeded on a ring
        m_offsets = (m_offsets + spec.n2 / 2.0) % spec.n2 - spec.n2 / 2.0
    span = float(np.max(np.abs(m_offsets)) + spec.n1 / 2.0)
    if start_nodes is None:
        start_nodes = 256
        while start_nodes < 4.0 * span:
            start_nodes *= 2
    nodes = min(start_nodes, max_nodes)

    prev = _cavity_rows(spec, m_offsets, nodes)
    while True:
        nodes *= 2
        if nodes > max_nodes:
            worst = np.unravel_index(np.argmax(np.abs(cur - prev)), prev.shape)
            raise ConvergenceError(
                f"cavity field quadrature stalled at (n={worst[0]}, "
                f"m={worst[1]}) with {nodes // 2} nodes")
        cur = _cavity_rows(spec, m_offsets, nodes)
        if np.max(np.abs(cur - prev)) < tol:
            break
        prev = cur

    values = np.zeros(spec.nsites, dtype=complex)
    values[0::2] = cur.ravel()
    return ModeField(spec, values)


@dataclass(frozen=True)
class ProjectorBlock:
    """Flat-band projector restricted to a set of edge positions, with its
    principal symmetric square root M (M @ M.T == P)."""

    positions: tuple
    p: np.ndarray
    m: np.ndarray

    @property
    def nqubits(self) -> int:
        return len(self.positions)


def orthonormalize(positions, beta: float) -> ProjectorBlock:
    """Build P_ij = c(0, m_i - m_j) and its symmetric square root.

    The symmetric (eigendecomposition) root is required: for two mirror-
    symmetric emitters it keeps equal diagonals and equal off-diagonals,
    which a Cholesky factor would not.
    """
    positions = tuple(int(m) for m in positions)
    if len(set(positions)) != len(positions):
        raise ValueError(f"duplicate positions {positions}")
    npos = len(positions)
    p = np.empty((npos, npos))
    for i in range(npos):
        for j in range(npos):
            p[i, j] = cavity_edge_amplitude(positions[i] - positions[j], beta)
    evals, evecs = scipy.linalg.eigh(p)
    if np.min(evals) <= 1e-12 * np.max(evals):
        raise ValueError(
            f"projector block for positions {positions} is not positive "
            f"definite (degenerate placement); eigenvalues {evals}")
    m = (evecs * np.sqrt(evals)) @ evecs.T
    return ProjectorBlock(positions=positions, p=p, m=m)


class CompactStateTable:
    """Candidate compact state for the full flat band (beta >= 2 regime).

    Row n of the would-be compact state carries integer weights given by the
    binomial coefficients C(n, m0 - m) on m in [m0 - n, m0]; the physical
    amplitude also carries the sign/decay prefactor (-1)^n / beta^(n+1).
    Row support grows linearly with n, so no compact (or, at beta = 2,
    normalizable) state exists.
    """

    def __init__(self, n_max: int, m0: int = 0):
        if n_max < 0:
            raise ValueError("n_max must be >= 0")
        self.n_max = int(n_max)
        self.m0 = int(m0)

    def row(self, n: int) -> dict:
        """Integer weights {m: C(n, m0 - m)} of row n (exact arithmetic)."""
        if not 0 <= n <= self.n_max:
            raise ValueError(f"row {n} outside tabulated range")
        return {self.m0 - r: math.comb(n, r) for r in range(n + 1)}

    def nonzero_count(self, n: int) -> int:
        return len(self.row(n))

    def amplitude(self, n: int, m: int, beta: float) -> float:
        r = self.m0 - m
        if r < 0 or r > n:
            return 0.0
        return ((-1.0) ** n) * math.comb(n, r) / beta ** (n + 1)

    def row_norm_sq(self, n: int, beta: float) -> float:
        # sum_r C(n, r)^2 = C(2n, n)
        return math.comb(2 * n, n) / beta ** (2 * n + 2)

    def partial_norms(self, beta: float) -> np.ndarray:
        """Cumulative squared norm over rows 0..n; unbounded at beta = 2."""
        rows = np.array([self.row_norm_sq(n, beta) for n in range(self.n_max + 1)])
        return np.cumsum(rows)


def compact_state_amplitudes(n_max: int, m_range=None, m0: int = 0) -> CompactStateTable:
    """Tabulate the candidate compact state.  `m_range` is accepted for
    callers that want a fixed window, but rows are generated exactly and
    trimmed lazily, so it only matters for presentation."""
    table = CompactStateTable(n_max, m0)
    if m_range is not None:
        lo, hi = min(m_range), max(m_range)
        if hi < m0 - n_max or lo > m0:
            raise ValueError("m_range does not intersect the state support")
    return table


def compact_state_quadrature(n: int, m: int, m0: int = 0, tol: float = 1e-10) -> float:
    """Oracle for the binomial table: direct Fourier integral

        phi(n, m) = 1/pi int_0^pi dk (2 cos(k/2))^n cos(k (m - m0 + n/2)).
    """
    phase = (m - m0) + n / 2.0

    def integrand(k):
        return (2.0 * np.cos(k / 2.0)) ** n * np.cos(k * phase)

    val, _ = scipy.integrate.quad(integrand, 0.0, np.pi,
                                  epsabs=tol, epsrel=tol, limit=400)
    return val / np.pi
