"""Strict config parsing for the CLI.

Configs are TOML or JSON with sections [lattice], [qubits], [run], and
[circuit].  Unknown sections or keys are rejected, and every diagnostic is
collected before failing so a bad file is reported in one pass.
"""

import json
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .circuit import CircuitSpec
from .lattice import LatticeSpec, QubitArrangement


class ConfigError(Exception):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


DEFAULTS = {
    "lattice": {
        "n1": 300, "n2": 300, "delta": 0.0, "beta": 1.0, "j": 1.0,
        "boundary": "periodic",
    },
    "qubits": {
        "positions": [0], "g": 0.05, "detuning": 0.0,
    },
    "run": {
        "scenario": "rabi_fig2c", "engine": "chebyshev",
        "gt_max": 40.0, "sample_gdt": 0.1, "tol": 1e-9,
        "max_sites": 2_000_000,
    },
    "circuit": {
        "lg": 2e-9, "cg": 300e-15, "cc": 17.6e-15,
        "sigma_rel": 0.002, "realizations": 20, "seed": 1234,
        "n1": 10, "n2": 16,
    },
}

_NUMERIC = (int, float)

_CHECKS = {
    ("lattice", "n1"): (int, lambda v: v >= 2, "n1 must be an integer >= 2"),
    ("lattice", "n2"): (int, lambda v: v >= 2, "n2 must be an integer >= 2"),
    ("lattice", "delta"): (_NUMERIC, None, "delta must be a number"),
    ("lattice", "beta"): (_NUMERIC, lambda v: v > 0, "beta must be > 0"),
    ("lattice", "j"): (_NUMERIC, lambda v: v > 0, "j must be > 0"),
    ("lattice", "boundary"): (str, lambda v: v in ("periodic", "open"),
                              "boundary must be 'periodic' or 'open'"),
    ("qubits", "positions"): (list, lambda v: len(v) >= 1
                              and all(isinstance(x, int) for x in v),
                              "at least one qubit required (a non-empty list "
                              "of integer edge cells)"),
    ("qubits", "g"): (_NUMERIC, lambda v: v > 0, "g must be > 0"),
    ("qubits", "detuning"): (_NUMERIC, None, "detuning must be a number"),
    ("run", "scenario"): (str, None, "scenario must be a string"),
    ("run", "engine"): (str, lambda v: v in ("chebyshev", "krylov"),
                        "engine must be 'chebyshev' or 'krylov'"),
    ("run", "gt_max"): (_NUMERIC, lambda v: v > 0, "gt_max must be > 0"),
    ("run", "sample_gdt"): (_NUMERIC, lambda v: v > 0, "sample_gdt must be > 0"),
    ("run", "tol"): (_NUMERIC, lambda v: 0 < v <= 1e-3,
                     "tol must be in (0, 1e-3]"),
    ("run", "max_sites"): (int, lambda v: v >= 1000,
                           "max_sites must be an integer >= 1000"),
    ("circuit", "lg"): (_NUMERIC, lambda v: v > 0, "lg must be > 0"),
    ("circuit", "cg"): (_NUMERIC, lambda v: v > 0, "cg must be > 0"),
    ("circuit", "cc"): (_NUMERIC, lambda v: v >= 0, "cc must be >= 0"),
    ("circuit", "sigma_rel"): (_NUMERIC, lambda v: v >= 0,
                               "sigma_rel must be >= 0"),
    ("circuit", "realizations"): (int, lambda v: v >= 1,
                                  "realizations must be an integer >= 1"),
    ("circuit", "seed"): (int, None, "seed must be an integer"),
    ("circuit", "n1"): (int, lambda v: v >= 2, "circuit n1 must be >= 2"),
    ("circuit", "n2"): (int, lambda v: v >= 2, "circuit n2 must be >= 2"),
}


def _read_file(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: invalid JSON: {exc}"]) from exc
    try:
        return tomllib.loads(text.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: invalid TOML: {exc}"]) from exc


def resolve(raw: dict = None):
    """Merge a raw config over the defaults, validating strictly.

    Returns the fully resolved config dict; raises ConfigError carrying every
    diagnostic at once.
    """
    raw = raw or {}
    errors = []
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a table/object"])
    resolved = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    for section, content in raw.items():
        if section not in DEFAULTS:
            errors.append(f"unknown section [{section}]")
            continue
        if not isinstance(content, dict):
            errors.append(f"section [{section}] must be a table/object")
            continue
        for key, value in content.items():
            if key not in DEFAULTS[section]:
                errors.append(f"unknown key {section}.{key}")
                continue
            typ, cond, msg = _CHECKS[(section, key)]
            if isinstance(value, bool) or not isinstance(value, typ):
                errors.append(f"{section}.{key}: {msg} (got {value!r})")
                continue
            if cond is not None and not cond(value):
                errors.append(f"{section}.{key}: {msg} (got {value!r})")
                continue
            resolved[section][key] = value

    positions = resolved["qubits"]["positions"]
    if isinstance(positions, list) and len(set(positions)) != len(positions):
        errors.append(f"qubits.positions: duplicate entries in {positions}")
    if errors:
        raise ConfigError(errors)
    return resolved


def load(path=None, overrides=None):
    """Read (optional) file, apply (optional) {section: {key: value}}
    overrides from the command line, and resolve."""
    raw = _read_file(path) if path else {}
    if overrides:
        for section, content in overrides.items():
            raw.setdefault(section, {})
            if not isinstance(raw[section], dict):
                raise ConfigError([f"section [{section}] must be a table"])
            raw[section].update(content)
    return resolve(raw)


def lattice_spec(cfg) -> LatticeSpec:
    lat = cfg["lattice"]
    return LatticeSpec(n1=lat["n1"], n2=lat["n2"], delta=lat["delta"],
                       beta=lat["beta"], j=lat["j"],
                       boundary_e2=lat["boundary"])


def qubit_arrangement(cfg) -> QubitArrangement:
    q = cfg["qubits"]
    return QubitArrangement(positions=tuple(q["positions"]), g=q["g"],
                            detuning=q["detuning"])


def circuit_spec(cfg) -> CircuitSpec:
    c = cfg["circuit"]
    lat = cfg["lattice"]
    geometry = LatticeSpec(n1=c["n1"], n2=c["n2"], delta=0.0,
                           beta=lat["beta"], j=lat["j"],
                           boundary_e2="periodic")
    return CircuitSpec(lattice=geometry, lg=c["lg"], cg=c["cg"], cc=c["cc"],
                       sigma_rel=c["sigma_rel"], seed=c["seed"])
