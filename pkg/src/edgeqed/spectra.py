"""Exact normal-mode analysis of the zigzag strip.

Enforcing periodicity along the edge maps the lattice onto uncoupled
two-band chains labelled by the edge momentum k, with intra-cell hopping
2*J*cos(k/2) and inter-cell hopping beta*J.  That gives closed forms for the
bulk dispersion and for the dispersionless edge modes living at frequency
delta on the A sublattice for 2*arccos(beta/2) <= |k| <= pi.
"""

import numpy as np
import scipy.linalg
from dataclasses import dataclass

from .lattice import LatticeSpec, SiteMap, SparseHermitian


def support_boundary(beta: float) -> float:
    """Lower edge-momentum bound of the flat band (0 when it spans the zone)."""
    if beta <= 0:
        raise ValueError("beta must be > 0")
    if beta >= 2.0:
        return 0.0
    return 2.0 * np.arccos(beta / 2.0)


@dataclass(frozen=True)
class FlatBandSupport:
    k_min: float
    k_max: float
    full_zone: bool


def flat_band_support(beta: float) -> FlatBandSupport:
    """Momentum interval |k| in [k_min, k_max] hosting edge modes."""
    t = support_boundary(beta)
    return FlatBandSupport(k_min=t, k_max=np.pi, full_zone=(beta >= 2.0))


def intracell_hopping(k, j=1.0):
    return 2.0 * j * np.cos(np.asarray(k, dtype=float) / 2.0)


def bulk_dispersion(k, q, spec: LatticeSpec):
    """Two bulk bands (omega_plus, omega_minus) at momenta (k, q)."""
    k = np.asarray(k, dtype=float)
    q = np.asarray(q, dtype=float)
    jt = intracell_hopping(k, spec.j)
    bj = spec.beta * spec.j
    rad = np.sqrt(spec.delta ** 2 + bj ** 2 + jt ** 2 + 2.0 * bj * jt * np.cos(q))
    return rad, -rad


def edge_normalization_sq(k, beta: float):
    """N_k^2 = (beta^2 - 2 - 2 cos k) / beta^2; positive inside the support."""
    k = np.asarray(k, dtype=float)
    return (beta ** 2 - 2.0 - 2.0 * np.cos(k)) / beta ** 2


@dataclass(frozen=True)
class EdgeMode:
    k: float
    normalization: float      # N_k
    penetration: float        # lambda_k, rows
    frequency: float          # = delta of the hosting lattice


def edge_mode(k: float, spec: LatticeSpec) -> EdgeMode:
    """Edge-mode bookkeeping for one momentum; rejects k outside the support."""
    t = support_boundary(spec.beta)
    ak = abs(float(k))
    if ak < t - 1e-14 or ak > np.pi + 1e-14:
        raise ValueError(
            f"k={k} outside the flat-band support "
            f"{t:.6f} = 2*arccos(beta/2) <= |k| <= pi (beta={spec.beta})")
    nsq = float(edge_normalization_sq(k, spec.beta))
    if nsq <= 0.0:
        raise ValueError(f"k={k} sits on the support boundary; the mode degenerates")
    ratio = float(intracell_hopping(k, 1.0)) / spec.beta  # exp(-1/lambda_k)
    lam = np.inf if ratio >= 1.0 else (0.0 if ratio <= 0.0 else -1.0 / np.log(ratio))
    return EdgeMode(k=float(k), normalization=np.sqrt(nsq),
                    penetration=lam, frequency=spec.delta)


class ModeField:
    """Complex amplitude on every lattice site of one spec.

    Stores a flat vector aligned with the lattice part of the site map; A- and
    B-sublattice views are exposed as (n1, n2) arrays.
    """

    def __init__(self, spec: LatticeSpec, values: np.ndarray):
        values = np.asarray(values)
        if values.shape != (spec.nsites,):
            raise ValueError("field length does not match lattice")
        self.spec = spec
        self.values = values

    @property
    def a_amplitudes(self):
        return self.values[0::2].reshape(self.spec.n1, self.spec.n2)

    @property
    def b_amplitudes(self):
        return self.values[1::2].reshape(self.spec.n1, self.spec.n2)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def normalized(self) -> "ModeField":
        return ModeField(self.spec, self.values / self.norm())

    def overlap(self, other) -> complex:
        other_values = other.values if isinstance(other, ModeField) else np.asarray(other)
        return complex(np.vdot(self.values, other_values))

    def eigen_residual(self, h: SparseHermitian, eigenvalue: float) -> float:
        """Relative residual ||H psi - E psi|| / ||psi||."""
        if h.site_map.nqubits:
            raise ValueError("residual check expects a bath-only hamiltonian")
        r = h.matvec(self.values.astype(complex)) - eigenvalue * self.values
        return float(np.linalg.norm(r) / np.linalg.norm(self.values))


def edge_mode_field(k: float, spec: LatticeSpec, normalized: bool = False) -> ModeField:
    """Real-space edge mode: amplitude on A sites only,

        eps_k(n, m) = N_k/sqrt(2 pi) * (-1)^n exp(-i k (m + n/2)) exp(-n/lambda_k),

    with exp(-1/lambda_k) = 2 cos(k/2)/beta.  Raw amplitudes follow the
    infinite-strip convention; pass normalized=True for unit norm on the
    finite lattice (the natural choice for projector sums).
    """
    mode = edge_mode(k, spec)  # validates the support
    n = np.arange(spec.n1)
    m = np.arange(spec.n2)
    ratio = float(intracell_hopping(k, 1.0)) / spec.beta
    ratio = max(ratio, 0.0)
    with np.errstate(divide="ignore"):
        radial = np.where(n == 0, 1.0, ratio ** n) * (-1.0) ** n
    phase = np.exp(-1j * k * (m[None, :] + n[:, None] / 2.0))
    amp_a = (mode.normalization / np.sqrt(2.0 * np.pi)) * radial[:, None] * phase

    values = np.zeros(spec.nsites, dtype=complex)
    values[0::2] = amp_a.ravel()
    field = ModeField(spec, values)
    return field.normalized() if normalized else field


def commensurate_support_grid(spec: LatticeSpec, max_penetration=None):
    """Edge momenta k = 2 pi p / n2 inside the flat-band support.

    Only these momenta respect the periodic boundary, which makes finite-
    lattice orthogonality exact.  Momenta whose penetration length exceeds
    `max_penetration` are returned separately instead of silently degrading
    the caller's projector; by default nothing is skipped.

    Returns (kept_k, skipped_k) arrays.
    """
    if not spec.periodic:
        raise ValueError("commensurate grid requires periodic boundary along the edge")
    t = support_boundary(spec.beta)
    p = np.arange(-(spec.n2 // 2) + 1, spec.n2 // 2 + 1)
    k = 2.0 * np.pi * p / spec.n2
    inside = (np.abs(k) > t + 1e-12) & (np.abs(k) <= np.pi + 1e-12)
    k = k[inside]
    if max_penetration is None:
        return k, np.array([])
    lam = np.array([edge_mode(kk, spec).penetration for kk in k])
    keep = lam <= max_penetration
    return k[keep], k[~keep]


def flat_band_projection(spec: LatticeSpec, values: np.ndarray, max_penetration=None):
    """Apply the finite-lattice flat-band projector (sum of edge-mode dyads
    over the commensurate support grid) to a lattice vector.

    Returns (projected_values, skipped_k).
    """
    values = np.asarray(values, dtype=complex)
    k_keep, k_skip = commensurate_support_grid(spec, max_penetration)
    out = np.zeros_like(values)
    for k in k_keep:
        mode = edge_mode_field(k, spec, normalized=True).values
        out += mode * np.vdot(mode, values)
    return out, k_skip


def flat_band_basis(spec: LatticeSpec, max_penetration=None) -> np.ndarray:
    """Orthonormal finite-lattice edge modes as columns of an (nsites, r)
    matrix; spans the flat band exactly on the commensurate grid."""
    k_keep, _ = commensurate_support_grid(spec, max_penetration)
    cols = [edge_mode_field(k, spec, normalized=True).values for k in k_keep]
    return np.stack(cols, axis=1)


def dense_spectrum(h: SparseHermitian, max_dimension: int = 20000) -> np.ndarray:
    """Full sorted eigenvalue list by dense diagonalization (oracle path)."""
    if h.dimension > max_dimension:
        raise ValueError(
            f"dimension {h.dimension} exceeds dense limit {max_dimension}")
    return scipy.linalg.eigvalsh(h.to_dense())


def dense_eigensystem(h: SparseHermitian, max_dimension: int = 20000):
    if h.dimension > max_dimension:
        raise ValueError(
            f"dimension {h.dimension} exceeds dense limit {max_dimension}")
    return scipy.linalg.eigh(h.to_dense())


def locate_band_touching(spec: LatticeSpec, nk: int = 801, nq: int = 401):
    """Grid minimizer of |omega_plus| over (k, q); at delta = 0 and beta < 2
    this lands on the band-touching points k = +-2 arccos(beta/2), q = pi."""
    k = np.linspace(0.0, np.pi, nk)
    q = np.linspace(0.0, np.pi, nq)
    wp, _ = bulk_dispersion(k[:, None], q[None, :], spec)
    flat = np.argmin(np.abs(wp))
    ik, iq = np.unravel_index(flat, wp.shape)
    return float(k[ik]), float(q[iq]), float(wp[ik, iq])


def edge_weight(spec: LatticeSpec, vectors: np.ndarray, rows=(0,)) -> np.ndarray:
    """Probability weight of each eigenvector column on the given rows."""
    smap = SiteMap(spec)
    idx = []
    for n in rows:
        for m in range(spec.n2):
            idx.append(smap.index(n, m, "A"))
            idx.append(smap.index(n, m, "B"))
    idx = np.array(idx)
    w = np.abs(vectors) ** 2
    return w[idx, :].sum(axis=0) / w.sum(axis=0)
