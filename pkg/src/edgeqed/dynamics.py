"""Time evolution engines.

Exact dynamics propagates exp(-i H t) on the full sparse qubit+lattice
Hamiltonian, either by Chebyshev expansion (spectral bounds from Gershgorin)
or by restarted Lanczos; both are matvec-only and deterministic.  The
effective model evolves the (2 Nq)-dimensional single-excitation sector of
the emitter + cavity-mode description under the non-Hermitian Hamiltonian

    H_NH = [[detuning I - i gamma/2 ,  g M],
            [        g M            ,   0 ]],

whose recycling counterpart contributes nothing in this sector, so the
master equation reduces to a Schroedinger equation with decaying norm.
Closed-form solutions (damped vacuum Rabi, resonant two-qubit beating) are
provided for cross-validation.
"""

import math

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.special
from dataclasses import dataclass, field

from .emitters import EffectiveModel
from .lattice import SparseHermitian
from .util import ConvergenceError, IntegratorError, parabolic_peak


@dataclass
class TimeSeries:
    """Sampled observables over a time grid (times in units of 1/J)."""

    times: np.ndarray
    channels: dict
    meta: dict = field(default_factory=dict)

    def channel(self, name: str) -> np.ndarray:
        return self.channels[name]

    def __contains__(self, name: str) -> bool:
        return name in self.channels

    @property
    def nsamples(self) -> int:
        return len(self.times)


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 2:
        raise ValueError("need a 1D grid of at least two times")
    if np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("times must be increasing and nonnegative")
    return times


# ---------------------------------------------------------------------------
# Chebyshev propagation

def _chebyshev_coeffs(z: float, tol: float):
    """Coefficients c_n = (2 - delta_n0) (-i)^n J_n(z), truncated when the
    Bessel tail falls below tol/1000 (the tail bounds the step error)."""
    n_hi = int(z) + 60 + int(12.0 * math.sqrt(max(z, 1.0)))
    n = np.arange(n_hi)
    bess = scipy.special.jv(n, z)
    cutoff = tol * 1e-3
    above = np.nonzero(np.abs(bess) >= cutoff)[0]
    n_terms = int(above[-1]) + 2 if above.size else 2
    n_terms = min(max(n_terms, 2), n_hi)
    coeff = bess[:n_terms].astype(complex) * (-1j) ** np.arange(n_terms)
    coeff[1:] *= 2.0
    return coeff


def _chebyshev_step(h_scaled, psi, coeff, phase):
    t_prev = psi
    t_cur = h_scaled.matvec(psi)
    acc = coeff[0] * t_prev + coeff[1] * t_cur
    for c in coeff[2:]:
        t_next = 2.0 * h_scaled.matvec(t_cur) - t_prev
        acc += c * t_next
        t_prev, t_cur = t_cur, t_next
    return phase * acc


class _ScaledOperator:
    def __init__(self, h: SparseHermitian, center: float, half: float):
        self.h = h
        self.center = center
        self.half = half

    def matvec(self, v):
        return (self.h.matvec(v) - self.center * v) / self.half


# ---------------------------------------------------------------------------
# Lanczos propagation

def _lanczos_step(h: SparseHermitian, psi, dt: float, tol: float,
                  m_min: int = 12, m_max: int = 60, _depth: int = 0):
    """One step of exp(-i H dt) psi with an adaptively sized Krylov space
    (full reorthogonalization); splits the step when m_max is not enough."""
    norm0 = np.linalg.norm(psi)
    if norm0 == 0.0:
        return psi
    v = np.empty((m_max + 1, psi.size), dtype=complex)
    v[0] = psi / norm0
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max + 1)
    m_used = m_max
    for j in range(m_max):
        w = h.matvec(v[j])
        if j > 0:
            w -= beta[j] * v[j - 1]
        alpha[j] = np.vdot(v[j], w).real
        w -= alpha[j] * v[j]
        # two-pass reorthogonalization keeps the basis orthonormal
        for _ in range(2):
            proj = v[:j + 1].conj() @ w
            w -= proj @ v[:j + 1]
        beta[j + 1] = np.linalg.norm(w)
        happy = beta[j + 1] < 1e-14
        if j + 1 >= m_min or happy or j + 1 == m_max:
            u = _tridiag_expm(alpha[:j + 1], beta[1:j + 1], dt)
            err = beta[j + 1] * abs(u[-1]) * abs(dt)
            if happy or err < tol:
                return norm0 * (v[:j + 1].T @ u)
        v[j + 1] = w / beta[j + 1]
    if _depth >= 20:
        raise ConvergenceError("Lanczos step kept failing after 20 bisections")
    half = _lanczos_step(h, psi, dt / 2.0, tol / 2.0, m_min, m_max, _depth + 1)
    return _lanczos_step(h, half, dt / 2.0, tol / 2.0, m_min, m_max, _depth + 1)


def _tridiag_expm(alpha, beta_off, dt):
    """exp(-i T dt) e_1 for the real symmetric tridiagonal T."""
    if len(alpha) == 1:
        return np.array([np.exp(-1j * alpha[0] * dt)])
    evals, evecs = scipy.linalg.eigh_tridiagonal(alpha, beta_off)
    return (evecs * np.exp(-1j * evals * dt)) @ evecs[0].conj()


# ---------------------------------------------------------------------------
# Full-model evolution

def echo_time(spec) -> float:
    """Earliest return of an emitted wavefront to the edge, in units 1/J.

    Maximal group velocity is 3 J a / 2 (a the nearest-neighbour distance);
    the far termination sits n1 rows of pitch 3a/2 away (round trip 2 n1 / J)
    and the periodic edge direction wraps after n2 * sqrt(3) a, i.e.
    2 n2 / (sqrt(3) J).  Full-lattice observables are trustworthy only below
    this bound; sampled runs report, and acceptance checks window, on it.
    """
    t_far = 2.0 * spec.n1 / spec.j
    t_wrap = 2.0 * spec.n2 / (np.sqrt(3.0) * spec.j)
    return min(t_far, t_wrap)


def propagate_state(h: SparseHermitian, psi: np.ndarray, t: float,
                    method: str = "chebyshev", tol: float = 1e-9) -> np.ndarray:
    """Single application of exp(-i H t) to a state; the low-level engine
    entry point used for engine cross-checks."""
    psi = np.asarray(psi, dtype=complex)
    if method == "chebyshev":
        lo, hi = h.gershgorin_bounds()
        center = 0.5 * (hi + lo)
        half = max(0.5 * (hi - lo), 1e-12)
        op = _ScaledOperator(h, center, half)
        return _chebyshev_step(op, psi, _chebyshev_coeffs(half * t, tol),
                               np.exp(-1j * center * t))
    if method == "krylov":
        return _lanczos_step(h, psi, t, tol)
    raise ValueError(f"unknown propagation method {method!r}")


def qubit_excited_state(h: SparseHermitian, which: int = 0) -> np.ndarray:
    """Initial state: qubit `which` excited, lattice in vacuum, phase 0."""
    psi = np.zeros(h.dimension, dtype=complex)
    psi[h.site_map.qubit_slot(which)] = 1.0
    return psi


def evolve_full(h: SparseHermitian, initial: np.ndarray, times,
                method: str = "chebyshev", tol: float = 1e-9,
                projections: dict = None) -> TimeSeries:
    """Propagate |psi(t)> = exp(-i H t) |psi(0)> and sample populations.

    Channels: p_q{j} and complex amp_q{j} per qubit, p_field (all photonic
    weight), norm, plus |<mode|psi>|^2 for every entry of `projections`
    (vectors in the full qubit+lattice index space; a (dim, r) matrix with
    orthonormal columns projects onto the spanned subspace).
    """
    times = _check_times(times)
    psi = np.asarray(initial, dtype=complex).copy()
    if psi.shape != (h.dimension,):
        raise ValueError("initial state has wrong dimension")
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"initial state norm {nrm} is not 1")
    projections = {name: np.asarray(vec) for name, vec in
                   (projections or {}).items()}
    for name, vec in projections.items():
        if vec.shape[0] != h.dimension or vec.ndim > 2:
            raise ValueError(f"projection {name!r} has wrong dimension")

    if method == "chebyshev":
        lo, hi = h.gershgorin_bounds()
        center = 0.5 * (hi + lo)
        half = max(0.5 * (hi - lo), 1e-12)
        op = _ScaledOperator(h, center, half)
        stepper = lambda psi, dt: _chebyshev_step(
            op, psi, _chebyshev_coeffs(half * dt, tol),
            np.exp(-1j * center * dt))
    elif method == "krylov":
        stepper = lambda psi, dt: _lanczos_step(h, psi, dt, tol)
    else:
        raise ValueError(f"unknown propagation method {method!r}")

    nq = h.site_map.nqubits
    qslots = [h.site_map.qubit_slot(j) for j in range(nq)]
    nsamples = len(times)
    pq = np.empty((nq, nsamples))
    aq = np.empty((nq, nsamples), dtype=complex)
    norms = np.empty(nsamples)
    proj_vals = {name: np.empty(nsamples) for name in projections}

    def record(i, psi):
        for j, slot in enumerate(qslots):
            aq[j, i] = psi[slot]
            pq[j, i] = abs(psi[slot]) ** 2
        norms[i] = np.linalg.norm(psi)
        for name, vec in projections.items():
            if vec.ndim == 1:
                proj_vals[name][i] = abs(np.vdot(vec, psi)) ** 2
            else:
                proj_vals[name][i] = float(np.sum(np.abs(vec.conj().T @ psi) ** 2))

    t_prev = 0.0
    for i, t in enumerate(times):
        dt = t - t_prev
        if dt > 0:
            psi = stepper(psi, dt)
        record(i, psi)
        t_prev = t

    channels = {"norm": norms}
    for j in range(nq):
        channels[f"p_q{j + 1}"] = pq[j]
        channels[f"amp_q{j + 1}"] = aq[j]
    channels["p_field"] = np.clip(norms ** 2 - pq.sum(axis=0), 0.0, None)
    for name, vals in proj_vals.items():
        channels[f"p_{name}"] = vals
    return TimeSeries(times=times, channels=channels,
                      meta={"method": method, "tol": tol,
                            "dimension": h.dimension})


# ---------------------------------------------------------------------------
# Effective-model evolution

def nonhermitian_hamiltonian(model: EffectiveModel) -> np.ndarray:
    nq = model.nqubits
    h = np.zeros((2 * nq, 2 * nq), dtype=complex)
    h[:nq, :nq] = np.eye(nq) * model.detuning - 0.5j * model.gamma
    h[:nq, nq:] = model.g * model.m
    h[nq:, :nq] = model.g * model.m
    return h


def evolve_effective(model: EffectiveModel, times, initial=None,
                     rtol: float = 1e-12, atol: float = 1e-13) -> TimeSeries:
    """Integrate i d psi/dt = H_NH psi in the qubit + cavity-mode sector.

    The default initial state excites qubit 1 with all modes empty.  Total
    probability must not grow; a rise beyond 1e-8 flags an integrator fault.
    """
    import scipy.integrate

    times = _check_times(times)
    nq = model.nqubits
    h = nonhermitian_hamiltonian(model)
    if initial is None:
        psi0 = np.zeros(2 * nq, dtype=complex)
        psi0[0] = 1.0
    else:
        psi0 = np.asarray(initial, dtype=complex)
        if psi0.shape != (2 * nq,):
            raise ValueError("initial state has wrong dimension")

    t_eval = times
    t0 = 0.0
    sol = scipy.integrate.solve_ivp(
        lambda t, y: -1j * (h @ y), (t0, times[-1]), psi0,
        t_eval=t_eval, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegratorError(f"effective-model integration failed: {sol.message}")
    psi_t = sol.y

    norms = np.linalg.norm(psi_t, axis=0)
    rises = np.diff(norms ** 2)
    if rises.size and np.max(rises) > 1e-8:
        raise IntegratorError(
            f"total probability grew by {np.max(rises):.2e} between samples")

    channels = {"norm": norms,
                "p_bulk": np.clip(1.0 - norms ** 2, 0.0, None)}
    for j in range(nq):
        channels[f"p_q{j + 1}"] = np.abs(psi_t[j]) ** 2
        channels[f"amp_q{j + 1}"] = psi_t[j]
        channels[f"p_mode{j + 1}"] = np.abs(psi_t[nq + j]) ** 2
    return TimeSeries(times=times, channels=channels,
                      meta={"rtol": rtol, "atol": atol, "nqubits": nq})


# ---------------------------------------------------------------------------
# Closed forms

def rabi_closed_form(omega: float, detuning: float, gamma: float,
                     times) -> TimeSeries:
    """Weak-coupling damped vacuum Rabi oscillations,

        p_e(t) = exp(-gamma t / 2) [1 - (4 Omega^2/Omega_R^2) sin^2(Omega_R t/2)],

    with Omega_R = sqrt(detuning^2 + 4 Omega^2).  Near resonance this is the
    leading-order envelope; rabi_exact keeps the full two-level solution.
    """
    times = _check_times(times)
    omega_r = math.sqrt(detuning ** 2 + 4.0 * omega ** 2)
    if omega_r == 0.0:
        pe = np.exp(-gamma * times / 2.0)
    else:
        contrast = 4.0 * omega ** 2 / omega_r ** 2
        pe = np.exp(-gamma * times / 2.0) * (
            1.0 - contrast * np.sin(omega_r * times / 2.0) ** 2)
    return TimeSeries(times=times, channels={"p_q1": pe},
                      meta={"omega": omega, "detuning": detuning,
                            "gamma": gamma, "omega_r": omega_r})


def rabi_exact(omega: float, detuning: float, gamma: float, times) -> TimeSeries:
    """Exact single-emitter solution of the dissipative two-level reduction:
    amplitude c_e(t) = e^{-mu t/2} [cos(w t/2) - (mu/w) sin(w t/2)] with
    mu = i detuning + gamma/2 and w = sqrt(4 Omega^2 - mu^2)."""
    times = _check_times(times)
    mu = 1j * detuning + gamma / 2.0
    w = np.sqrt(4.0 * omega ** 2 - mu ** 2 + 0j)
    if abs(w) < 1e-300:
        ce = np.exp(-mu * times / 2.0) * (1.0 - mu * times / 2.0)
    else:
        half = w * times / 2.0
        ce = np.exp(-mu * times / 2.0) * (np.cos(half) - (mu / w) * np.sin(half))
    return TimeSeries(times=times,
                      channels={"p_q1": np.abs(ce) ** 2, "amp_q1": ce},
                      meta={"omega": omega, "detuning": detuning, "gamma": gamma})


def two_qubit_beating(g0: float, g1: float, times) -> TimeSeries:
    """Resonant two-emitter exchange through two overlapping cavity modes:
    P1 = cos^2(g0 t) cos^2(g1 t), P2 = sin^2(g0 t) sin^2(g1 t), where
    g0 = g M11 and g1 = g M12."""
    times = _check_times(times)
    p1 = np.cos(g0 * times) ** 2 * np.cos(g1 * times) ** 2
    p2 = np.sin(g0 * times) ** 2 * np.sin(g1 * times) ** 2
    return TimeSeries(times=times, channels={"p_q1": p1, "p_q2": p2},
                      meta={"g0": g0, "g1": g1})


# ---------------------------------------------------------------------------
# Analysis

@dataclass(frozen=True)
class PeakResult:
    t_peak: float
    p_peak: float
    at_boundary: bool


def transfer_fidelity(series: TimeSeries, channel: str = "p_q2",
                      window=None) -> PeakResult:
    """Global maximum of a population channel with parabolic refinement
    between samples; peaks at the window boundary are flagged."""
    if channel not in series:
        raise KeyError(f"channel {channel!r} not in series")
    times = series.times
    values = np.asarray(series.channel(channel), dtype=float)
    if window is not None:
        lo, hi = window
        mask = (times >= lo) & (times <= hi)
        if mask.sum() < 3:
            raise ValueError("window contains fewer than 3 samples")
        times, values = times[mask], values[mask]
    idx = int(np.argmax(values))
    if idx == 0 or idx == len(values) - 1:
        return PeakResult(float(times[idx]), float(values[idx]), True)
    t_peak, p_peak = parabolic_peak(times, values, idx)
    return PeakResult(t_peak, p_peak, False)


def compare_models(full: TimeSeries, effective: TimeSeries,
                   channels=None) -> dict:
    """Per-channel max and RMS deviation on a common time grid."""
    if full.nsamples != effective.nsamples or not np.allclose(
            full.times, effective.times, rtol=0, atol=1e-12):
        raise ValueError("time grids differ")
    if channels is None:
        channels = sorted(set(full.channels) & set(effective.channels)
                          - {"norm"})
        channels = [c for c in channels if not c.startswith("amp_")]
        if not channels:
            raise ValueError("no common population channels")
    report = {}
    for name in channels:
        if name not in full or name not in effective:
            raise KeyError(f"channel {name!r} missing from one series")
        d = np.asarray(full.channel(name)) - np.asarray(effective.channel(name))
        report[name] = {"max": float(np.max(np.abs(d))),
                        "rms": float(np.sqrt(np.mean(d * d)))}
    return report


def leakage_rate(times, p_excited, p_bulk, t_min=None, t_max=None) -> float:
    """Markovian emission rate from the population balance
    d p_bulk/dt = gamma p_excited, estimated as the regression slope of
    p_bulk against the cumulative integral of p_excited.  Averages over
    Rabi oscillations and is insensitive to the oscillation phase at the
    window ends."""
    import scipy.integrate

    times = np.asarray(times, dtype=float)
    mask = np.ones_like(times, dtype=bool)
    if t_min is not None:
        mask &= times >= t_min
    if t_max is not None:
        mask &= times <= t_max
    if mask.sum() < 8:
        raise ValueError("window contains too few samples")
    x = scipy.integrate.cumulative_trapezoid(
        np.asarray(p_excited)[mask], times[mask], initial=0.0)
    y = np.asarray(p_bulk)[mask]
    return float(np.cov(x, y)[0, 1] / np.var(x))


def fit_two_mode(times, amplitudes):
    """Fit a complex amplitude series by two damped exponentials
    a1 e^{-i l1 t} + a2 e^{-i l2 t} via linear prediction (least-squares
    Prony on a uniform grid).

    Returns the pair (l1, l2) sorted by real part; Re l are the quasimode
    frequencies (their difference is the Rabi frequency) and -2 Im l are the
    population decay rates (their sum is the total emission rate).
    """
    times = np.asarray(times, dtype=float)
    c = np.asarray(amplitudes, dtype=complex)
    if len(c) < 8:
        raise ValueError("need at least 8 samples")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-12):
        raise ValueError("two-mode fit needs a uniform time grid")
    # c[i+2] = a c[i+1] + b c[i]
    lhs = np.stack([c[1:-1], c[:-2]], axis=1)
    coef, *_ = np.linalg.lstsq(lhs, c[2:], rcond=None)
    roots = np.roots([1.0, -coef[0], -coef[1]])
    lam = 1j * np.log(roots) / dt
    order = np.argsort(lam.real)
    return lam[order]
