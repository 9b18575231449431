"""Batch command-line surface over the toolkit.

Single-process batch runs: every command resolves a full configuration
(file values overridden by flags, defaults filled in), computes, writes
one results file plus a manifest echoing the resolved configuration and
the toolkit version. Identical configurations produce byte-identical
result files. Exit codes: 0 success, 2 configuration error, 3 capacity
error, 4 numerical-validation failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import (
    CapacityError,
    ConfigError,
    DegenerateInputError,
    NumericalValidationError,
    TruncationError,
    UndefinedParameterError,
    ZeroProbabilityBranchError,
)
from . import area_law, dmrg, measures, models, protocols
from .io import write_csv, write_json
from .states import PureState, RegionPartition, reduce_to_sites

OUTPUT_DIR_ENV = "ENTLAB_OUTPUT_DIR"

COMMANDS = (
    "measure",
    "scan-area",
    "scan-transition",
    "chsh",
    "distill",
    "mps-solve",
    "swap-purity",
)


# ---------------------------------------------------------------------------
# Option schema and parsing


def _cast_int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {text!r}")


def _cast_float(key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}")


def _cast_bool(key, text):
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {text!r}")


def _cast_int_list(key, text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    if not parts:
        raise ConfigError(f"{key} must list integers, got {text!r}")
    return [_cast_int(key, p) for p in parts]


def _cast_float_list(key, text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    if not parts:
        raise ConfigError(f"{key} must list numbers, got {text!r}")
    return [_cast_float(key, p) for p in parts]


def _cast_block_range(key, text):
    """'1..6' or a comma list of block lengths."""
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    text = str(text).strip()
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = _cast_int(key, lo_s), _cast_int(key, hi_s)
        if hi < lo:
            raise ConfigError(f"{key} range {text!r} is empty")
        return list(range(lo, hi + 1))
    return _cast_int_list(key, text)


def _cast_grid(key, text):
    """'start:stop:step' (inclusive) or a comma list of values."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{key} grid must be start:stop:step, got {text!r}")
        start, stop, step = (_cast_float(key, p) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigError(f"{key} grid {text!r} is not increasing")
        count = int(round((stop - start) / step)) + 1
        return [start + k * step for k in range(count)]
    return _cast_float_list(key, text)


def _cast_str(key, text):
    return str(text)


@dataclass
class Option:
    cast: object
    default: object = None
    required: bool = False
    choices: tuple = ()
    check: object = None  # (value) -> error string or None


_MODEL_OPTIONS = {
    "model": Option(_cast_str, "transverse-ising", choices=("transverse-ising", "heisenberg", "majumdar-ghosh", "mg", "ising")),
    "n": Option(_cast_int, required=True, check=lambda v: None if v >= 2 else "must be >= 2"),
    "b": Option(_cast_float, 0.0),
    "boundary": Option(_cast_str, "periodic", choices=("periodic", "open")),
}

_COMMON_OPTIONS = {
    "seed": Option(_cast_int, 0),
    "output": Option(_cast_str, None),
    "format": Option(_cast_str, None, choices=("csv", "json")),
}

SCHEMAS: dict[str, dict[str, Option]] = {
    "chsh": {
        **_COMMON_OPTIONS,
        "strategy": Option(_cast_str, "quantum", choices=("quantum", "best-classical")),
        "rounds": Option(_cast_int, 0, check=lambda v: None if v >= 0 else "must be >= 0"),
    },
    "distill": {
        **_COMMON_OPTIONS,
        "theta": Option(_cast_float_list, [math.pi / 6.0]),
    },
    "measure": {
        **_COMMON_OPTIONS,
        **_MODEL_OPTIONS,
        "measure": Option(
            _cast_str,
            required=True,
            choices=(
                "entropy",
                "renyi",
                "negativity",
                "mutual-information",
                "concurrence",
                "mes-fidelity",
                "spin-squeezing",
            ),
        ),
        "t": Option(_cast_float, 0.0, check=lambda v: None if v >= 0 else "must be >= 0"),
        "region-a": Option(_cast_int_list, None),
        "alpha": Option(_cast_float, 2.0, check=lambda v: None if v > 0 else "must satisfy alpha > 0"),
        "restarts": Option(_cast_int, 16),
    },
    "scan-area": {
        **_COMMON_OPTIONS,
        **_MODEL_OPTIONS,
        "blocks": Option(_cast_block_range, None),
        "t": Option(_cast_float, None, check=lambda v: None if v is None or v > 0 else "must satisfy T > 0"),
        "bound-check": Option(_cast_bool, False),
    },
    "scan-transition": {
        **_COMMON_OPTIONS,
        **_MODEL_OPTIONS,
        "b-grid": Option(_cast_grid, required=True),
        "epsilon": Option(_cast_float, 1e-3, check=lambda v: None if v >= 0 else "must be >= 0"),
        "pair": Option(_cast_int_list, [0, 1]),
    },
    "mps-solve": {
        **_COMMON_OPTIONS,
        **_MODEL_OPTIONS,
        "bond-d": Option(_cast_int, 8, check=lambda v: None if v >= 1 else "must be >= 1"),
        "sweeps": Option(_cast_int, 30, check=lambda v: None if v >= 1 else "must be >= 1"),
        "tol": Option(_cast_float, 1e-10, check=lambda v: None if v > 0 else "must be > 0"),
        "compare-exact": Option(_cast_bool, False),
    },
    "swap-purity": {
        **_COMMON_OPTIONS,
        **_MODEL_OPTIONS,
        "t": Option(_cast_float, 0.0, check=lambda v: None if v >= 0 else "must be >= 0"),
        "mode": Option(_cast_str, "exact", choices=("exact", "sampled")),
        "shots": Option(_cast_int, 1000, check=lambda v: None if v >= 1 else "must be >= 1"),
    },
}

_DEFAULT_FORMAT = {
    "chsh": "json",
    "distill": "json",
    "measure": "json",
    "scan-area": "csv",
    "scan-transition": "csv",
    "mps-solve": "json",
    "swap-purity": "json",
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def to_record(self) -> dict:
        return {"command": self.command, **{k: self.values[k] for k in sorted(self.values)}}


def read_config_file(path) -> dict[str, str]:
    """Parse `key = value` lines; later duplicates win with a warning."""
    values: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"line {lineno}: expected key = value, got {text!r}")
            key, _, raw = text.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key in values:
                print(f"warning: duplicate key {key!r}, using the last value", file=sys.stderr)
            values[key] = raw
    return values


def resolve_config(command: str, file_values: dict | None = None, flag_values: dict | None = None) -> RunConfig:
    """Merge defaults, file values and flags; reject unknown keys."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    schema = SCHEMAS[command]
    file_values = dict(file_values or {})
    flag_values = dict(flag_values or {})
    for key in file_values:
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for command {command}")
    resolved = {}
    for key, opt in schema.items():
        if key in flag_values and flag_values[key] is not None:
            raw = flag_values[key]
        elif key in file_values:
            raw = file_values[key]
        else:
            raw = None
        if raw is None:
            if opt.required:
                raise ConfigError(f"missing required key {key!r}")
            resolved[key] = opt.default
            continue
        value = opt.cast(key, raw) if isinstance(raw, str) else raw
        if opt.choices and value not in opt.choices:
            raise ConfigError(f"{key} must be one of {opt.choices}, got {value!r}")
        if opt.check is not None and value is not None:
            msg = opt.check(value)
            if msg:
                raise ConfigError(f"{key} {msg}, got {value!r}")
        resolved[key] = value
    if resolved.get("format") is None:
        resolved["format"] = _DEFAULT_FORMAT[command]
    if resolved.get("model") in ("mg",):
        resolved["model"] = "majumdar-ghosh"
    if resolved.get("model") in ("ising",):
        resolved["model"] = "transverse-ising"
    return RunConfig(command, resolved)


# ---------------------------------------------------------------------------
# Command implementations


def _output_path(config: RunConfig) -> str:
    out = config.values.get("output")
    if out:
        return out
    ext = config.values["format"]
    outdir = os.environ.get(OUTPUT_DIR_ENV, ".")
    return os.path.join(outdir, f"{config.command}.{ext}")


def _deterministic_ground(h: models.LocalHamiltonian, kind: str) -> PureState:
    if kind == "majumdar-ghosh":
        return models.dimer_state(h.space.n_sites, covering=0)
    res = models.ground_state(h)
    vec = models._parity_even_ground_vector(h, res)
    return PureState.from_vector(h.space, vec, normalize=True)


def _build_state(config: RunConfig):
    kind = config["model"]
    h = models.build_model(kind, config["n"], config.values.get("b", 0.0), config["boundary"])
    t = config.values.get("t") or 0.0
    if t > 0:
        return h, models.gibbs_state(h, t)
    return h, _deterministic_ground(h, kind)


def _run_chsh(config: RunConfig):
    if config["strategy"] == "quantum":
        strategy = protocols.quantum_game_strategy()
    else:
        strategy, _ = protocols.best_classical_value()
    rounds = config["rounds"]
    if rounds:
        result = protocols.chsh_play(strategy, rounds=rounds, seed=config["seed"])
    else:
        result = protocols.chsh_play(strategy)
    record = {"command": "chsh", "strategy": config["strategy"], **result.to_record()}
    return record, None


def _run_distill(config: RunConfig):
    rows = []
    for theta in config["theta"]:
        result = protocols.filter_distill(float(theta), seed=config["seed"])
        success, failure = result.branches
        rows.append(
            (
                theta,
                success.probability,
                success.mes_fidelity,
                failure.probability,
                failure.residual_entanglement if failure.residual_entanglement is not None else 0.0,
            )
        )
    header = (
        "theta",
        "success_probability",
        "success_mes_fidelity",
        "failure_probability",
        "failure_entanglement_bits",
    )
    record = {
        "command": "distill",
        "rows": [dict(zip(header, row)) for row in rows],
    }
    return record, (header, rows)


def _region_partition(config: RunConfig, h, state) -> RegionPartition:
    region = config.values.get("region-a")
    n = state.space.n_sites
    if region is None:
        region = list(range(n // 2))
    return RegionPartition(n, tuple(region), h.adjacency)


def _run_measure(config: RunConfig):
    h, state = _build_state(config)
    name = config["measure"]
    params = {"model": config["model"], "n": config["n"], "b": config["b"], "t": config.values.get("t", 0.0)}
    part = None
    if name == "entropy":
        if not isinstance(state, PureState):
            raise ConfigError("t must be 0 for the pure-state entropy measure")
        part = _region_partition(config, h, state)
        value = measures.entanglement_entropy(state, part)
    elif name == "renyi":
        rho = state.to_density() if isinstance(state, PureState) else state
        region = config.values.get("region-a")
        if region:
            rho = reduce_to_sites(rho, tuple(sorted(region)))
            part = RegionPartition(config["n"], tuple(region), h.adjacency)
        value = measures.renyi_entropy(rho, config["alpha"])
        params["alpha"] = config["alpha"]
    elif name == "negativity":
        rho = state.to_density() if isinstance(state, PureState) else state
        part = _region_partition(config, h, state)
        value = measures.negativity(rho, part)
    elif name == "mutual-information":
        rho = state.to_density() if isinstance(state, PureState) else state
        part = _region_partition(config, h, state)
        value = measures.mutual_information(rho, part)
    elif name == "concurrence":
        if not isinstance(state, PureState) or state.space.dims != (2, 2):
            raise ConfigError("concurrence needs n = 2 and t = 0")
        value = measures.concurrence_2q(state)
    elif name == "mes-fidelity":
        part = _region_partition(config, h, state)
        value = measures.mes_fidelity(state, part, restarts=config["restarts"], seed=config["seed"])
        params["restarts"] = config["restarts"]
    elif name == "spin-squeezing":
        report = measures.spin_squeezing(state)
        value = report.xi
        params["mean_spin"] = list(report.mean_spin)
        params["variance_z"] = report.variance_z
    else:  # pragma: no cover - guarded by the schema
        raise ConfigError(f"unknown measure {name!r}")
    report = measures.MeasureReport(
        name,
        float(value),
        list(part.region_a) if part is not None else None,
        params,
        {},
    )
    return {"command": "measure", **report.to_record()}, None


def _run_scan_area(config: RunConfig):
    kind = config["model"]
    n = config["n"]
    h = models.build_model(kind, n, config["b"], config["boundary"])
    t = config.values.get("t")
    periodic = config["boundary"] == "periodic"
    if t:
        records = area_law.mutual_info_area_check(h, t)
        header = ["start", "length", "n_boundary", "mutual_info_bits", "bound_bits", "intermediate_bits"]
        if config["bound-check"]:
            header.append("pass")
        rows = []
        for rec in records:
            region = rec.region_a
            start, length = region[0], len(region)
            row = [start, length, rec.boundary_count, rec.mutual_info, rec.bound, rec.intermediate]
            if config["bound-check"]:
                row.append(1 if rec.passed else 0)
            rows.append(tuple(row))
        record = {"command": "scan-area", "mode": "thermal-bound", "rows": len(rows)}
        return record, (tuple(header), rows)
    blocks = config.values.get("blocks") or list(range(1, n // 2 + 1))
    psi = _deterministic_ground(h, kind)
    records = area_law.block_entropy_scan(psi, blocks, periodic=periodic)
    header = ("start", "length", "n_boundary", "entropy_bits")
    rows = [(r.start, r.length, r.boundary_count, r.value) for r in records]
    record = {"command": "scan-area", "mode": "block-entropy", "rows": len(rows)}
    return record, (header, rows)


def _run_scan_transition(config: RunConfig):
    kind = config["model"]
    grid = config["b-grid"]
    overlaps = models.overlap_scan(kind, config["n"], grid, config["epsilon"], config["boundary"])
    pairs = models.two_site_entanglement_scan(
        kind, config["n"], grid, tuple(config["pair"]), config["boundary"]
    )
    header = ("b", "overlap", "degenerate", "pair_negativity", "dneg_db")
    rows = [
        (o.b, 0.0 if math.isnan(o.overlap) else o.overlap, 1 if o.degenerate else 0, p.value, p.derivative)
        for o, p in zip(overlaps, pairs)
    ]
    record = {"command": "scan-transition", "rows": len(rows)}
    return record, (header, rows)


def _run_mps_solve(config: RunConfig):
    kind = config["model"]
    h = models.build_model(kind, config["n"], config["b"], "open")
    solver_h = dmrg.block_pair_sites(h) if kind == "majumdar-ghosh" else h
    mps, energies = dmrg.variational_ground_search(
        solver_h,
        bond_dim=config["bond-d"],
        sweeps=config["sweeps"],
        tol=config["tol"],
        seed=config["seed"],
    )
    record = {
        "command": "mps-solve",
        "model": kind,
        "n": config["n"],
        "b": config["b"],
        "bond_d": config["bond-d"],
        "energy": energies[-1],
        "n_updates": len(energies),
        "energy_trace": energies,
        "bond_dims": list(mps.bond_dims),
    }
    if config["compare-exact"]:
        exact = models.ground_state(h).ground_energy
        record["exact_energy"] = exact
        record["abs_error"] = abs(energies[-1] - exact)
    return record, None


def _run_swap_purity(config: RunConfig):
    h, state = _build_state(config)
    rho = state.to_density() if isinstance(state, PureState) else state
    record = {
        "command": "swap-purity",
        "model": config["model"],
        "n": config["n"],
        "t": config.values.get("t", 0.0),
        "mode": config["mode"],
        "purity_spectrum": rho.purity(),
    }
    if config["mode"] == "exact":
        record["purity_swap"] = area_law.purity_via_swap(rho, mode="exact")
    else:
        estimate, err = area_law.purity_via_swap(
            rho, mode="sampled", shots=config["shots"], seed=config["seed"]
        )
        record["purity_swap"] = estimate
        record["std_error"] = err
        record["shots"] = config["shots"]
    return record, None


_RUNNERS = {
    "chsh": _run_chsh,
    "distill": _run_distill,
    "measure": _run_measure,
    "scan-area": _run_scan_area,
    "scan-transition": _run_scan_transition,
    "mps-solve": _run_mps_solve,
    "swap-purity": _run_swap_purity,
}


def run(config: RunConfig) -> str:
    """Execute one resolved configuration; returns the results file path."""
    record, table = _RUNNERS[config.command](config)
    path = _output_path(config)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    if config.values["format"] == "csv":
        if table is None:
            header = tuple(sorted(k for k in record if not isinstance(record[k], (list, dict))))
            rows = [tuple(record[k] for k in header)]
            write_csv(path, header, rows)
        else:
            write_csv(path, *table)
    else:
        if table is not None:
            header, rows = table
            record = dict(record)
            record["rows"] = [dict(zip(header, row)) for row in rows]
        write_json(path, record)
    manifest = {
        "command": config.command,
        "config": config.to_record(),
        "version": __version__,
        "results": os.path.basename(path),
    }
    write_json(path + ".manifest.json", manifest)
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entlab",
        description="Batch runs over the entanglement toolkit (results + manifest files).",
    )
    parser.add_argument("--version", action="version", version=f"entlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, schema in SCHEMAS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", help="key = value file; flags override it")
        for key, opt in schema.items():
            if opt.cast is _cast_bool:
                p.add_argument(f"--{key}", dest=key, default=None, nargs="?", const="true")
            else:
                p.add_argument(f"--{key}", dest=key, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    try:
        file_values = read_config_file(config_path) if config_path else {}
        config = resolve_config(command, file_values, args)
        path = run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except (
        NumericalValidationError,
        DegenerateInputError,
        TruncationError,
        UndefinedParameterError,
        ZeroProbabilityBranchError,
        ValueError,
    ) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 4
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
