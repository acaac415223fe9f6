import math

import numpy as np
import pytest

from edgeqed.dynamics import (PeakResult, TimeSeries, compare_models,
                              evolve_effective, evolve_full, fit_two_mode,
                              leakage_rate, nonhermitian_hamiltonian,
                              propagate_state, qubit_excited_state,
                              rabi_closed_form, rabi_exact, transfer_fidelity,
                              two_qubit_beating)
from edgeqed.emitters import build_effective_model
from edgeqed.lattice import (LatticeSpec, QubitArrangement, attach_qubits,
                             build_bath_hamiltonian)
from edgeqed.util import IntegratorError


def small_system(detuning=0.0, positions=(0,), n=20, g=0.05, **kw):
    spec = LatticeSpec(n1=n, n2=n, **kw)
    arr = QubitArrangement(positions=positions, g=g, detuning=detuning)
    h = attach_qubits(build_bath_hamiltonian(spec), arr)
    return h, arr


class TestClosedForms:
    def test_rabi_initial_value(self):
        ts = rabi_closed_form(0.02, 0.1, 1e-4, [1e-12, 1.0])
        assert ts.channel("p_q1")[0] == pytest.approx(1.0, abs=1e-10)

    def test_rabi_resonant_zero(self):
        omega = 0.02
        t = math.pi / (2 * omega)
        ts = rabi_closed_form(omega, 0.0, 0.0, [t / 2, t])
        assert ts.channel("p_q1")[-1] == pytest.approx(0.0, abs=1e-12)

    def test_rabi_contrast(self):
        omega = 0.01
        detuning = 4 * omega
        times = np.linspace(0.01, 4 * math.pi / omega, 4000)
        ts = rabi_closed_form(omega, detuning, 0.0, times)
        assert ts.channel("p_q1").min() == pytest.approx(0.8, abs=1e-4)

    def test_exact_equals_weak_coupling_on_resonance(self):
        times = np.linspace(0.1, 500.0, 700)
        a = rabi_closed_form(0.023, 0.0, 0.0, times).channel("p_q1")
        b = rabi_exact(0.023, 0.0, 0.0, times).channel("p_q1")
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_exact_bare_decay_limit(self):
        # no coupling: population decays at the full rate gamma
        times = np.linspace(1.0, 300.0, 50)
        p = rabi_exact(0.0, 0.2, 1e-3, times).channel("p_q1")
        np.testing.assert_allclose(p, np.exp(-1e-3 * times), rtol=1e-9)

    def test_beating_formula(self):
        times = np.linspace(0.5, 400.0, 900)
        ts = two_qubit_beating(0.022, 0.0078, times)
        np.testing.assert_allclose(
            ts.channel("p_q1"),
            np.cos(0.022 * times) ** 2 * np.cos(0.0078 * times) ** 2)
        assert np.all(ts.channel("p_q2") <= 1.0)


class TestEffectiveEvolution:
    def test_single_qubit_matches_exact_solution(self):
        arr = QubitArrangement(positions=(0,), g=0.05, detuning=0.0)
        model = build_effective_model(arr)
        times = np.linspace(0.5, 400.0, 400)
        eff = evolve_effective(model, times)
        exact = rabi_exact(model.omega, 0.0, 0.0, times)
        np.testing.assert_allclose(eff.channel("p_q1"),
                                   exact.channel("p_q1"), atol=1e-8)
        # no dissipation at zero detuning: norm conserved to 1e-10
        assert np.max(np.abs(eff.channel("norm") - 1.0)) < 1e-10

    def test_single_qubit_detuned_matches_exact_solution(self):
        arr = QubitArrangement(positions=(0,), g=0.05, detuning=0.2)
        model = build_effective_model(arr)
        times = np.linspace(0.5, 600.0, 600)
        eff = evolve_effective(model, times)
        exact = rabi_exact(model.omega, 0.2, model.gamma[0, 0], times)
        np.testing.assert_allclose(eff.channel("p_q1"),
                                   exact.channel("p_q1"), atol=1e-8)
        assert np.all(np.diff(eff.channel("norm")) <= 1e-12)

    def test_two_qubit_beating_structure(self):
        arr = QubitArrangement(positions=(0, 2), g=0.05, detuning=0.0)
        model = build_effective_model(arr)
        g0 = 0.05 * model.m[0, 0]
        g1 = 0.05 * model.m[0, 1]
        times = np.linspace(0.5, 500.0, 800)
        eff = evolve_effective(model, times)
        beat = two_qubit_beating(g0, g1, times)
        np.testing.assert_allclose(eff.channel("p_q1"),
                                   beat.channel("p_q1"), atol=1e-8)
        np.testing.assert_allclose(eff.channel("p_q2"),
                                   beat.channel("p_q2"), atol=1e-8)

    def test_detuned_envelope_rate_via_prony(self):
        # quasimode rates of the integrated solution sum to gamma (trace of
        # the non-Hermitian generator), at detuning 0.2 via exponential fit
        arr = QubitArrangement(positions=(0,), g=0.05, detuning=0.2)
        model = build_effective_model(arr)
        times = np.arange(1.0, 800.0, 1.0)
        eff = evolve_effective(model, times)
        lam = fit_two_mode(times, eff.channel("amp_q1"))
        assert -2 * (lam[0].imag + lam[1].imag) == pytest.approx(
            model.gamma[0, 0], rel=1e-8)
        assert lam[1].real - lam[0].real == pytest.approx(model.omega_r,
                                                          rel=1e-6)

    def test_nonhermitian_structure(self):
        arr = QubitArrangement(positions=(0, 2), g=0.05, detuning=0.1)
        model = build_effective_model(arr)
        h = nonhermitian_hamiltonian(model)
        np.testing.assert_allclose(h[:2, 2:], 0.05 * model.m, atol=1e-15)
        np.testing.assert_allclose(np.diag(h)[:2],
                                   0.1 - 0.5j * np.diag(model.gamma))
        assert np.all(np.diag(h)[2:] == 0.0)

    def test_norm_growth_flagged(self):
        arr = QubitArrangement(positions=(0,), g=0.05, detuning=0.1)
        model = build_effective_model(arr)
        bad = build_effective_model(arr)
        object.__setattr__(bad, "gamma", -model.gamma)  # unphysical gain
        with pytest.raises(IntegratorError):
            evolve_effective(bad, np.linspace(1.0, 400.0, 200))


class TestFullEvolution:
    def test_decoupled_qubit_stays_excited(self):
        h, _ = small_system(g=1e-12)
        times = np.linspace(1.0, 50.0, 25)
        ts = evolve_full(h, qubit_excited_state(h), times)
        np.testing.assert_allclose(ts.channel("p_q1"), 1.0, atol=1e-9)

    def test_norm_conservation_both_engines(self):
        h, _ = small_system(detuning=0.1, n=24)
        times = np.linspace(5.0, 100.0, 20)
        for method in ("chebyshev", "krylov"):
            ts = evolve_full(h, qubit_excited_state(h), times, method=method)
            assert np.max(np.abs(ts.channel("norm") - 1.0)) <= 1e-9

    def test_engines_agree_on_random_state(self):
        rng = np.random.default_rng(11)
        h, _ = small_system(detuning=0.1, n=24, delta=0.2)
        psi = rng.standard_normal(h.dimension) + 1j * rng.standard_normal(h.dimension)
        psi /= np.linalg.norm(psi)
        a = propagate_state(h, psi, 31.7, method="chebyshev", tol=1e-10)
        b = propagate_state(h, psi, 31.7, method="krylov", tol=1e-10)
        assert np.linalg.norm(a - b) <= 1e-8

    def test_against_dense_expm(self):
        import scipy.linalg
        h, _ = small_system(detuning=0.05, n=6)
        psi = qubit_excited_state(h)
        t = 17.3
        expected = scipy.linalg.expm(-1j * h.to_dense() * t) @ psi
        for method in ("chebyshev", "krylov"):
            got = propagate_state(h, psi, t, method=method, tol=1e-11)
            assert np.linalg.norm(got - expected) <= 1e-9

    def test_projection_channels(self):
        h, _ = small_system(n=12)
        vec = np.zeros(h.dimension, dtype=complex)
        vec[h.site_map.qubit_slot(0)] = 1.0
        mat = np.zeros((h.dimension, 2), dtype=complex)
        mat[0, 0] = 1.0
        mat[h.site_map.qubit_slot(0), 1] = 1.0
        times = np.linspace(1.0, 40.0, 10)
        ts = evolve_full(h, qubit_excited_state(h), times,
                         projections={"qubit": vec, "pair": mat})
        np.testing.assert_allclose(ts.channel("p_qubit"),
                                   ts.channel("p_q1"), atol=1e-12)
        assert np.all(ts.channel("p_pair") >= ts.channel("p_qubit") - 1e-12)

    def test_input_validation(self):
        h, _ = small_system(n=8)
        good = qubit_excited_state(h)
        with pytest.raises(ValueError):
            evolve_full(h, 2.0 * good, [1.0, 2.0])
        with pytest.raises(ValueError):
            evolve_full(h, good, [2.0, 1.0])
        with pytest.raises(ValueError):
            evolve_full(h, good, [1.0, 2.0], method="magnus")


class TestAnalysis:
    def test_transfer_fidelity_refines_peak(self):
        times = np.linspace(0.0, 10.0, 101)
        p = np.sin(0.4 * times) ** 2
        ts = TimeSeries(times=times, channels={"p_q2": p})
        peak = transfer_fidelity(ts, "p_q2")
        assert not peak.at_boundary
        assert peak.t_peak == pytest.approx(math.pi / 0.8, abs=5e-3)
        assert peak.p_peak == pytest.approx(1.0, abs=1e-4)

    def test_transfer_fidelity_flags_boundary(self):
        times = np.linspace(0.0, 1.0, 11)
        ts = TimeSeries(times=times, channels={"p_q2": times ** 2})
        peak = transfer_fidelity(ts, "p_q2")
        assert peak.at_boundary
        assert peak == PeakResult(1.0, 1.0, True)

    def test_compare_models_zero_for_identical(self):
        times = np.linspace(0.1, 5.0, 20)
        a = TimeSeries(times=times, channels={"p_q1": np.cos(times) ** 2})
        b = TimeSeries(times=times, channels={"p_q1": np.cos(times) ** 2})
        rep = compare_models(a, b)
        assert rep["p_q1"]["max"] == 0.0
        assert rep["p_q1"]["rms"] == 0.0

    def test_compare_models_requires_common_grid(self):
        a = TimeSeries(times=np.array([1.0, 2.0]), channels={"p_q1": np.ones(2)})
        b = TimeSeries(times=np.array([1.0, 3.0]), channels={"p_q1": np.ones(2)})
        with pytest.raises(ValueError):
            compare_models(a, b)

    def test_fit_two_mode_recovers_parameters(self):
        times = np.arange(0.0, 400.0, 0.5)
        lam1, lam2 = 0.05 - 1e-4j, 0.11 - 3e-4j
        c = 0.7 * np.exp(-1j * lam1 * times) + 0.3 * np.exp(-1j * lam2 * times)
        lam = fit_two_mode(times, c)
        assert lam[0] == pytest.approx(lam1, rel=1e-9)
        assert lam[1] == pytest.approx(lam2, rel=1e-9)

    def test_leakage_rate_linear_model(self):
        times = np.linspace(0.0, 200.0, 400)
        pe = 0.8 + 0.1 * np.cos(0.3 * times)
        gamma = 2.5e-4
        import scipy.integrate
        pbulk = gamma * scipy.integrate.cumulative_trapezoid(
            pe, times, initial=0.0) + 0.01
        # the regression averages the oscillation; residual covariance over
        # a non-integer number of periods leaves a sub-percent bias
        assert leakage_rate(times, pe, pbulk) == pytest.approx(gamma, rel=0.01)


class TestFullVsEffectiveSmall:
    @pytest.mark.slow
    def test_resonant_rabi_tracks_effective(self):
        # modest lattice, short window (well inside the echo guard)
        h, arr = small_system(n=60)
        model = build_effective_model(arr)
        times = np.arange(2.0, 80.0, 2.0)
        full = evolve_full(h, qubit_excited_state(h), times)
        eff = evolve_effective(model, times)
        rep = compare_models(full, eff, ["p_q1"])
        assert rep["p_q1"]["rms"] <= 5e-3
