"""Scenario-driven command line.

Subcommands map onto the library: `spectra`, `cavity`, `projector`,
`effective-model`, `evolve`, `circuit`, `validate`, and `run <scenario>`
for the packaged figure-reproduction scenarios.  Every run writes its
artifacts plus a manifest recording the fully resolved configuration, so a
directory is always sufficient to repeat the run.  Exit codes: 0 ok,
2 config error, 3 numerical-convergence failure.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (ConfigError, circuit_spec, lattice_spec, load,
                     qubit_arrangement)
from .circuit import disorder_flatband_width, extract_hoppings, circuit_modes
from .dynamics import (compare_models, evolve_effective, evolve_full,
                       fit_two_mode, qubit_excited_state, rabi_closed_form,
                       rabi_exact, transfer_fidelity, two_qubit_beating)
from .emitters import build_effective_model, dispersive_potential
from .flatband import (cavity_edge_amplitude, cavity_field, cavity_volume,
                       orthonormalize)
from .lattice import LatticeSpec, QubitArrangement, attach_qubits, \
    build_bath_hamiltonian
from .spectra import (bulk_dispersion, edge_mode, flat_band_support,
                      support_boundary)
from .util import ConvergenceError, IntegratorError, fit_power_law

FLOAT_FMT = "{:.12e}"


# ---------------------------------------------------------------------------
# artifact helpers

def _write_csv(path, columns, header_meta):
    path = Path(path)
    names = list(columns)
    arrays = [np.asarray(columns[name]) for name in names]
    length = len(arrays[0])
    with open(path, "w") as fh:
        for key, value in header_meta.items():
            fh.write(f"# {key}={value}\n")
        fh.write(",".join(names) + "\n")
        for i in range(length):
            row = []
            for arr in arrays:
                v = arr[i]
                if isinstance(v, (np.integer, int)):
                    row.append(str(int(v)))
                else:
                    row.append(FLOAT_FMT.format(float(v)))
            fh.write(",".join(row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)) or obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _series_columns(series, g=None):
    cols = {"t": series.times}
    if g:
        cols["gt"] = series.times * g
    for name in sorted(series.channels):
        data = series.channels[name]
        if np.iscomplexobj(data):
            cols[f"{name}_re"] = data.real
            cols[f"{name}_im"] = data.imag
        else:
            cols[name] = data
    return cols


def _emit(out_dir, name, cfg, args, summary, tables=None):
    """Write summary + manifest (+ CSV/JSON tables) into out_dir/name."""
    target = Path(out_dir) / name
    target.mkdir(parents=True, exist_ok=True)
    fmt = getattr(args, "format", "csv")
    for fname, (columns, meta) in (tables or {}).items():
        if fmt == "csv":
            _write_csv(target / f"{fname}.csv", columns, meta)
        else:
            _write_json(target / f"{fname}.json",
                        {"meta": meta, "columns": columns})
    _write_json(target / "summary.json", summary)
    _write_json(target / "manifest.json", {
        "tool": "edgeqed", "version": __version__, "scenario": name,
        "argv": list(getattr(args, "_argv", [])), "config": cfg,
    })
    return target


def _time_grid(cfg):
    g = cfg["qubits"]["g"]
    gt = np.arange(0.0, cfg["run"]["gt_max"] + 1e-12, cfg["run"]["sample_gdt"])
    if gt[0] == 0.0:
        gt = gt[1:]
    return gt / g


def _check_resources(cfg):
    sites = 2 * cfg["lattice"]["n1"] * cfg["lattice"]["n2"]
    cap = cfg["run"]["max_sites"]
    if sites > cap:
        side = int((cap / 2) ** 0.5)
        raise ConfigError(
            [f"lattice of {sites} sites exceeds run.max_sites = {cap}; "
             f"try n1 = n2 <= {side} or raise the cap"])


# ---------------------------------------------------------------------------
# scenarios

def scenario_rabi_fig2c(cfg, args):
    _check_resources(cfg)
    spec = lattice_spec(cfg)
    q = qubit_arrangement(cfg)
    arrangement = QubitArrangement(positions=q.positions[:1], g=q.g,
                                   detuning=q.detuning)
    model = build_effective_model(arrangement, beta=spec.beta)
    gamma = float(model.gamma[0, 0])

    h = attach_qubits(build_bath_hamiltonian(spec), arrangement)
    times = _time_grid(cfg)
    mode = cavity_field(spec, m0=h.site_map.wrap_m(arrangement.positions[0]))
    cavity_vec = h.site_map.embed_lattice_vector(mode.normalized().values)
    full = evolve_full(h, qubit_excited_state(h), times,
                       method=cfg["run"]["engine"], tol=cfg["run"]["tol"],
                       projections={"cavity": cavity_vec})
    eff = evolve_effective(model, times)
    exact = rabi_exact(model.omega, model.detuning, gamma, times)
    weak = rabi_closed_form(model.omega, model.detuning, gamma, times)

    dev_exact = np.asarray(full.channel("p_q1")) - exact.channel("p_q1")
    report = compare_models(full, eff, channels=["p_q1"])
    omega_r_fit = gamma_fit = None
    if len(times) >= 8:
        lam = fit_two_mode(times, full.channel("amp_q1"))
        omega_r_fit = float(lam[1].real - lam[0].real)
        gamma_fit = float(-2.0 * (lam[0].imag + lam[1].imag))

    summary = {
        "omega": model.omega, "omega_r": model.omega_r, "gamma": gamma,
        "omega_r_fit": omega_r_fit, "gamma_fit": gamma_fit,
        "rms_vs_exact": float(np.sqrt(np.mean(dev_exact ** 2))),
        "max_vs_exact": float(np.max(np.abs(dev_exact))),
        "rms_vs_effective": report["p_q1"]["rms"],
        "min_population": float(np.min(full.channel("p_q1"))),
        "norm_drift": float(np.max(np.abs(full.channel("norm") - 1.0))),
    }
    cols = _series_columns(full, g=q.g)
    cols["p_q1_exact"] = exact.channel("p_q1")
    cols["p_q1_weak"] = weak.channel("p_q1")
    cols["p_q1_effective"] = eff.channel("p_q1")
    meta = {"scenario": "rabi_fig2c", "detuning": q.detuning, "g": q.g,
            "beta": spec.beta, "n1": spec.n1, "n2": spec.n2,
            "units": "t in 1/J, populations dimensionless"}
    return summary, {"timeseries": (cols, meta)}


def _transfer(cfg, args, positions):
    _check_resources(cfg)
    spec = lattice_spec(cfg)
    q = qubit_arrangement(cfg)
    arrangement = QubitArrangement(positions=positions, g=q.g,
                                   detuning=q.detuning)
    model = build_effective_model(arrangement, beta=spec.beta)
    h = attach_qubits(build_bath_hamiltonian(spec), arrangement)
    times = _time_grid(cfg)
    full = evolve_full(h, qubit_excited_state(h), times,
                       method=cfg["run"]["engine"], tol=cfg["run"]["tol"])
    eff = evolve_effective(model, times)
    peak = transfer_fidelity(full, "p_q2")
    report = compare_models(full, eff, channels=["p_q1", "p_q2"])

    summary = {
        "positions": list(arrangement.positions),
        "beta": spec.beta, "detuning": q.detuning, "g": q.g,
        "g0": float(q.g * model.m[0, 0]), "g1": float(q.g * model.m[0, 1]),
        "peak_population": peak.p_peak, "peak_gt": peak.t_peak * q.g,
        "peak_at_boundary": peak.at_boundary,
        "rms_vs_effective": {k: v["rms"] for k, v in report.items()},
    }
    cols = _series_columns(full, g=q.g)
    cols["p_q1_effective"] = eff.channel("p_q1")
    cols["p_q2_effective"] = eff.channel("p_q2")
    if q.detuning == 0.0:
        beat = two_qubit_beating(summary["g0"], summary["g1"], times)
        cols["p_q2_beating"] = beat.channel("p_q2")
        dev = np.max(np.abs(beat.channel("p_q2") - eff.channel("p_q2")))
        summary["beating_vs_effective_max"] = float(dev)
    meta = {"beta": spec.beta, "positions": list(arrangement.positions),
            "g": q.g, "detuning": q.detuning, "n1": spec.n1, "n2": spec.n2}
    return summary, {"timeseries": (cols, meta)}


def scenario_transfer_fig2de(cfg, args):
    q = cfg["qubits"]["positions"]
    positions = tuple(q) if len(q) == 2 else (0, 2)
    return _transfer(cfg, args, positions)


def scenario_anisotropy_fig3df(cfg, args):
    q = cfg["qubits"]["positions"]
    positions = tuple(q) if len(q) == 2 else (0, 6)
    return _transfer(cfg, args, positions)


def scenario_cavity_profile_fig2ab(cfg, args):
    _check_resources(cfg)
    spec = lattice_spec(cfg)
    field = cavity_field(spec, m0=spec.n2 // 2)
    amp = field.a_amplitudes.real
    m0 = spec.n2 // 2

    n_idx, m_idx = np.meshgrid(np.arange(spec.n1), np.arange(spec.n2) - m0,
                               indexing="ij")
    cols = {"n": n_idx.ravel(), "m": m_idx.ravel(), "c": amp.ravel()}

    slope_edge = slope_bulk = None
    if spec.beta < 2.0 and spec.n1 > 20 and spec.n2 > 40:
        # power-law tails exist only for the partial flat band
        ms = np.arange(10, min(100, spec.n2 // 2 - 1) + 1)
        edge_vals = np.array([cavity_edge_amplitude(m, spec.beta) for m in ms])
        slope_edge, _, _ = fit_power_law(
            ms, edge_vals,
            drop_below=1e-4 * abs(cavity_edge_amplitude(0, spec.beta)))
        ns = np.arange(10, min(100, spec.n1 - 1) + 1)
        slope_bulk, _, _ = fit_power_law(
            ns, amp[ns, m0],
            drop_below=1e-4 * abs(cavity_edge_amplitude(0, spec.beta)))

    summary = {"beta": spec.beta, "volume": cavity_volume(spec.beta),
               "c00": cavity_edge_amplitude(0, spec.beta),
               "edge_slope": slope_edge, "bulk_slope": slope_bulk,
               "sum_c_squared": float(np.sum(amp ** 2))}
    tables = {"cavity": (cols, {"beta": spec.beta, "m0": m0,
                                "n1": spec.n1, "n2": spec.n2})}

    if spec.delta > 0 and abs(cfg["qubits"]["detuning"]) < spec.delta:
        dq = cfg["qubits"]["detuning"]
        vm = np.array([dispersive_potential(m, dq, spec.delta)
                       for m in range(0, 61)])
        tables["potential"] = ({"m": np.arange(0, 61), "v": vm},
                               {"delta": spec.delta, "detuning": dq})
        slope_v, _, _ = fit_power_law(np.arange(10, 61), vm[10:],
                                      drop_below=1e-4 * abs(vm[0]))
        summary["potential_slope"] = slope_v
    return summary, tables


def scenario_effective_params(cfg, args):
    spec = lattice_spec(cfg)
    arrangement = qubit_arrangement(cfg)
    with_k = spec.delta > 0 and abs(arrangement.detuning) < spec.delta
    model = build_effective_model(arrangement, beta=spec.beta,
                                  delta=spec.delta, with_dispersive=with_k)
    summary = {
        "positions": list(model.positions), "g": model.g,
        "detuning": model.detuning, "beta": model.beta,
        "omega": model.omega, "omega_r": model.omega_r,
        "volume": model.volume, "m": model.m, "gamma": model.gamma,
    }
    if model.k is not None:
        summary["k"] = model.k
    return summary, {}


def scenario_circuit_report(cfg, args):
    import dataclasses
    cs = circuit_spec(cfg)
    fit = extract_hoppings(dataclasses.replace(cs, sigma_rel=0.0))
    freqs, vecs = circuit_modes(cs)
    stats = disorder_flatband_width(cs, cfg["circuit"]["realizations"])
    summary = {
        "omega_r": cs.omega_r, "coupling_ratio": cs.coupling_ratio,
        "j1": fit.j1, "j2": fit.j2, "j3": fit.j3,
        "j2_over_j1": fit.j2 / fit.j1 if fit.j1 else None,
        "j3_over_j1": fit.j3 / fit.j1 if fit.j1 else None,
        "fit_residual": fit.residual,
        "tight_binding_j": cs.coupling_ratio * cs.omega_r / 2.0,
        "sigma_rel": cs.sigma_rel,
        "flatband_width_mean": stats.mean_width,
        "flatband_width_std": stats.std_width,
        "cluster_failures": stats.failures,
    }
    cols = {"index": np.arange(len(freqs)), "omega": freqs}
    return summary, {"modes": (cols, {"n1": cs.lattice.n1,
                                      "n2": cs.lattice.n2,
                                      "sigma_rel": 0.0})}


def scenario_spectra(cfg, args):
    spec = lattice_spec(cfg)
    ks = np.linspace(-np.pi, np.pi, 121)
    qs = np.linspace(0.0, np.pi, 61)
    kk, qq = np.meshgrid(ks, qs, indexing="ij")
    wp, wm = bulk_dispersion(kk, qq, spec)
    band_cols = {"k": kk.ravel(), "q": qq.ravel(),
                 "omega_plus": wp.ravel(), "omega_minus": wm.ravel()}

    support = flat_band_support(spec.beta)
    t = support.k_min
    kgrid = np.linspace(t + 1e-6, np.pi, 401)
    modes = [edge_mode(k, spec) for k in kgrid]
    edge_cols = {"k": kgrid,
                 "lambda_k": np.array([m.penetration for m in modes]),
                 "n_k": np.array([m.normalization for m in modes]),
                 "frequency": np.array([m.frequency for m in modes])}
    summary = {"beta": spec.beta, "delta": spec.delta,
               "support_k_min": support.k_min, "support_k_max": support.k_max,
               "full_zone": support.full_zone}
    meta = {"beta": spec.beta, "delta": spec.delta, "j": spec.j}
    return summary, {"bands": (band_cols, meta), "edge_modes": (edge_cols, meta)}


def scenario_convergence_study(cfg, args):
    """Deviation of the single-emitter population between lattice sizes;
    justifies the desk-scale default against larger strips."""
    sizes = [100, 150, 200, 300]
    sizes = sorted(set(min(s, cfg["lattice"]["n1"]) for s in sizes))
    q = qubit_arrangement(cfg)
    arrangement = QubitArrangement(positions=q.positions[:1], g=q.g,
                                   detuning=q.detuning)
    gt = np.arange(0.1, 10.0 + 1e-12, 0.1)
    times = gt / q.g
    curves = {}
    for s in sizes:
        spec = LatticeSpec(n1=s, n2=s, delta=cfg["lattice"]["delta"],
                           beta=cfg["lattice"]["beta"], j=cfg["lattice"]["j"])
        h = attach_qubits(build_bath_hamiltonian(spec), arrangement)
        full = evolve_full(h, qubit_excited_state(h), times,
                           method=cfg["run"]["engine"], tol=cfg["run"]["tol"])
        curves[s] = np.asarray(full.channel("p_q1"))
    deviations = {f"{a}->{b}": float(np.max(np.abs(curves[b] - curves[a])))
                  for a, b in zip(sizes, sizes[1:])}
    cols = {"t": times, "gt": gt}
    for s in sizes:
        cols[f"p_q1_n{s}"] = curves[s]
    summary = {"sizes": sizes, "max_deviation": deviations}
    return summary, {"timeseries": (cols, {"scenario": "convergence_study"})}


SCENARIOS = {
    "rabi_fig2c": scenario_rabi_fig2c,
    "transfer_fig2de": scenario_transfer_fig2de,
    "anisotropy_fig3df": scenario_anisotropy_fig3df,
    "cavity_profile_fig2ab": scenario_cavity_profile_fig2ab,
    "effective_params": scenario_effective_params,
    "circuit_report": scenario_circuit_report,
    "spectra": scenario_spectra,
    "convergence_study": scenario_convergence_study,
}


# ---------------------------------------------------------------------------
# argument plumbing

def _overrides_from_args(args):
    over = {"lattice": {}, "qubits": {}, "run": {}, "circuit": {}}
    if getattr(args, "n", None):
        over["lattice"]["n1"] = args.n
        over["lattice"]["n2"] = args.n
    if getattr(args, "beta", None) is not None:
        over["lattice"]["beta"] = args.beta
    if getattr(args, "lattice_delta", None) is not None:
        over["lattice"]["delta"] = args.lattice_delta
    if getattr(args, "delta", None) is not None:
        over["qubits"]["detuning"] = args.delta
    if getattr(args, "g", None) is not None:
        over["qubits"]["g"] = args.g
    if getattr(args, "positions", None):
        over["qubits"]["positions"] = [int(x) for x in
                                       args.positions.split(",")]
    if getattr(args, "engine", None):
        over["run"]["engine"] = args.engine
    if getattr(args, "gt_max", None) is not None:
        over["run"]["gt_max"] = args.gt_max
    if getattr(args, "sample_gdt", None) is not None:
        over["run"]["sample_gdt"] = args.sample_gdt
    if getattr(args, "seed", None) is not None:
        over["circuit"]["seed"] = args.seed
    return {k: v for k, v in over.items() if v}


def _load_cfg(args):
    return load(getattr(args, "config", None), _overrides_from_args(args))


def _print_summary(name, summary):
    print(f"[{name}]")
    for key, value in summary.items():
        if isinstance(value, (int, float, str, bool)) or value is None:
            print(f"  {key} = {value}")


def cmd_run(args):
    if args.scenario not in SCENARIOS:
        raise ConfigError([f"unknown scenario {args.scenario!r}; choose from "
                           f"{sorted(SCENARIOS)}"])
    cfg = _load_cfg(args)
    cfg["run"]["scenario"] = args.scenario
    summary, tables = SCENARIOS[args.scenario](cfg, args)
    target = _emit(args.out, args.scenario, cfg, args, summary, tables)
    _print_summary(args.scenario, summary)
    print(f"artifacts in {target}")
    return 0


def cmd_validate(args):
    cfg = load(args.path, None)
    print(json.dumps(_jsonable(cfg), indent=2, sort_keys=True))
    return 0


def cmd_spectra(args):
    cfg = _load_cfg(args)
    summary, tables = scenario_spectra(cfg, args)
    _emit(args.out, "spectra", cfg, args, summary, tables)
    _print_summary("spectra", summary)
    return 0


def cmd_cavity(args):
    cfg = _load_cfg(args)
    summary, tables = scenario_cavity_profile_fig2ab(cfg, args)
    _emit(args.out, "cavity", cfg, args, summary, tables)
    _print_summary("cavity", summary)
    return 0


def cmd_projector(args):
    cfg = _load_cfg(args)
    positions = cfg["qubits"]["positions"]
    beta = cfg["lattice"]["beta"]
    block = orthonormalize(positions, beta)
    summary = {"positions": list(block.positions), "beta": beta,
               "p": block.p, "m": block.m}
    _emit(args.out, "projector", cfg, args, summary, {})
    print(json.dumps(_jsonable(summary), indent=2))
    return 0


def cmd_effective_model(args):
    cfg = _load_cfg(args)
    summary, tables = scenario_effective_params(cfg, args)
    _emit(args.out, "effective_params", cfg, args, summary, tables)
    print(json.dumps(_jsonable(summary), indent=2))
    return 0


def cmd_evolve(args):
    cfg = _load_cfg(args)
    positions = tuple(cfg["qubits"]["positions"])
    summary, tables = _transfer(cfg, args, positions) if len(positions) > 1 \
        else scenario_rabi_fig2c(cfg, args)
    target = _emit(args.out, "evolve", cfg, args, summary, tables)
    _print_summary("evolve", summary)
    print(f"artifacts in {target}")
    return 0


def cmd_circuit(args):
    cfg = _load_cfg(args)
    summary, tables = scenario_circuit_report(cfg, args)
    _emit(args.out, "circuit", cfg, args, summary, tables)
    _print_summary("circuit", summary)
    return 0


def _add_common(parser, dynamics=False):
    parser.add_argument("--config", help="TOML or JSON config file")
    parser.add_argument("--out", default="edgeqed-out",
                        help="artifact directory (default: edgeqed-out)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--threads", type=int, default=None,
                        help="pin BLAS/OpenMP thread count")
    parser.add_argument("--n", type=int, help="lattice size n1 = n2 = N")
    parser.add_argument("--beta", type=float, help="hopping anisotropy")
    parser.add_argument("--lattice-delta", type=float, dest="lattice_delta",
                        help="on-site +-delta of the lattice")
    parser.add_argument("--delta", type=float,
                        help="qubit detuning from the flat band")
    parser.add_argument("--g", type=float, help="qubit coupling")
    parser.add_argument("--positions", help="comma-separated edge cells, e.g. 0,2")
    if dynamics:
        parser.add_argument("--engine", choices=("chebyshev", "krylov"))
        parser.add_argument("--gt-max", type=float, dest="gt_max")
        parser.add_argument("--sample-gdt", type=float, dest="sample_gdt")
    parser.add_argument("--seed", type=int, help="circuit disorder seed")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="edgeqed",
        description="Emitters on the zigzag edge of a honeycomb resonator "
                    "lattice: exact dynamics and the emergent cavity model.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a packaged scenario")
    p.add_argument("scenario", help=f"one of {sorted(SCENARIOS)}")
    _add_common(p, dynamics=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="validate a config file and echo "
                                        "the resolved defaults")
    p.add_argument("path", help="config file")
    p.set_defaults(func=cmd_validate)

    for name, func, dyn in (
            ("spectra", cmd_spectra, False),
            ("cavity", cmd_cavity, False),
            ("projector", cmd_projector, False),
            ("effective-model", cmd_effective_model, False),
            ("evolve", cmd_evolve, True),
            ("circuit", cmd_circuit, False)):
        p = sub.add_parser(name)
        _add_common(p, dynamics=dyn)
        p.set_defaults(func=func)
    return parser


def _pin_threads(n):
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(n)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = argv
    _pin_threads(getattr(args, "threads", None))
    try:
        return args.func(args)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, IntegratorError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
