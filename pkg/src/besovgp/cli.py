"""Batch command-line front end.

Four subcommands: constants (evaluate a named constant), sample (draw and
persist a path ensemble), verify (deterministic identity and bound checks),
experiment (statistical norm suites).  Every run is a pure function of its
argv and config file; file-producing commands also write a run manifest
with content digests.  Exit codes: 0 success/PASS, 1 verification FAIL,
2 usage or config error, 3 unsupported parameter region.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .decomposition import (
    make_decomposition,
    verify_covariance_identity,
    verify_G_against_heat,
)
from .experiments import (
    EXPERIMENT_KINDS,
    ExperimentConfig,
    run_experiment,
    verify_increment_variance_bounds,
    verify_moment_formula,
)
from .kernels import FAMILIES, ProcessSpec
from .sampling import (
    SAMPLER_POLICIES,
    FactorizationError,
    Grid,
    sample_process,
    save_ensemble,
)
from .specialfn import (
    DECOMPOSITION_NAMES,
    DomainError,
    UnsupportedRegionError,
    _kappa,
    _lambda,
    decomposition_constants,
    eval_CK,
    eval_CK_quadrature,
    eval_cp,
    eval_CprimeK,
)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_UNSUPPORTED = 3

CONSTANT_NAMES = ("CK", "CprimeK", "cp", "c1", "c2", "a", "b", "c3", "c4",
                  "kappa", "lambda", "alpha")

VERIFY_CHECKS = ("decomposition", "increment-bounds", "moments", "g-heat",
                 "ck-quadrature")


class ConfigError(ValueError):
    """Unusable config file or missing required key."""


def _json_17g(value) -> str:
    """Render a JSON document with floats printed as %.17g.

    The stable 17-significant-digit form re-parses to the identical double,
    so numeric output can be diffed and replayed bit-faithfully.
    """
    if value is None or isinstance(value, bool):
        return json.dumps(value)
    if isinstance(value, np.bool_):
        return json.dumps(bool(value))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        inner = ", ".join(f"{json.dumps(str(k))}: {_json_17g(v)}"
                          for k, v in sorted(value.items()))
        return "{" + inner + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_json_17g(v) for v in value) + "]"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v) or math.isinf(v):
            return json.dumps(v)
        return "%.17g" % v
    if isinstance(value, np.ndarray):
        return _json_17g(value.tolist())
    raise TypeError(f"cannot render {type(value).__name__} as JSON")


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Provenance record written next to every produced artifact set.

    The manifest carries timestamps and wall time, so it is the one output
    file that is not byte-stable across reruns; the digests inside it are.
    """

    command: str
    argv: tuple
    config: dict
    seed: int | None
    version: str
    created_utc: str
    elapsed_seconds: float
    outputs: dict

    def to_json(self) -> str:
        return _json_17g({
            "command": self.command,
            "argv": list(self.argv),
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "created_utc": self.created_utc,
            "elapsed_seconds": self.elapsed_seconds,
            "outputs": self.outputs,
        })


def _write_manifest(path, command, argv, config, seed, started, outputs):
    manifest = RunManifest(
        command=command, argv=tuple(argv), config=config, seed=seed,
        version=__version__,
        created_utc=datetime.now(timezone.utc).isoformat(),
        elapsed_seconds=time.monotonic() - started, outputs=outputs)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json() + "\n")


def _int_list(text):
    return tuple(int(token) for token in str(text).split(","))


def _float_list(text):
    return tuple(float(token) for token in str(text).split(","))


_REGISTRIES = {
    "constants": {"name": str, "H": float, "K": float, "gamma": float,
                  "p": float},
    "sample": {"process": str, "H": float, "K": float, "gamma": float,
               "levels": int, "paths": int, "seed": int, "sampler": str,
               "out": str, "format": str},
    "verify": {"check": str, "name": str, "H": float, "K": float,
               "gamma": float, "level": int, "slack": float, "tol": float,
               "paths": int, "seed": int},
    "experiment": {"experiment": str, "process": str, "H": float, "K": float,
                   "gamma": float, "levels": _int_list, "paths": int,
                   "seed": int, "alphas": _float_list, "p_max": int,
                   "out": str},
}


def _load_section(path, section):
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}")
    except configparser.Error as exc:
        raise ConfigError(f"config parse error in {path!r}: {exc}")
    if not parser.has_section(section):
        return {}
    return dict(parser.items(section))


def _apply_config(ns, command):
    if not getattr(ns, "config", None):
        return
    registry = _REGISTRIES[command]
    raw = _load_section(ns.config, command)
    unknown = sorted(set(raw) - set(registry))
    if unknown:
        raise ConfigError(
            f"unknown config key {unknown[0]!r} in section [{command}]")
    for key, convert in registry.items():
        if getattr(ns, key, None) is None and key in raw:
            try:
                setattr(ns, key, convert(raw[key]))
            except ValueError as exc:
                raise ConfigError(f"config key {key!r}: {exc}")


def _required(ns, key, context):
    value = getattr(ns, key, None)
    if value is None:
        raise ConfigError(f"missing required key {key!r} for {context}")
    return value


def _resolved(ns, command):
    return {key: getattr(ns, key) for key in _REGISTRIES[command]
            if getattr(ns, key, None) is not None}


def _build_spec(ns, context) -> ProcessSpec:
    family = _required(ns, "process", context)
    return ProcessSpec(family, H=ns.H, K=ns.K, gamma=ns.gamma)


def cmd_constants(ns) -> int:
    name = _required(ns, "name", "constants")
    error = None
    if name in ("CK", "CprimeK", "c2"):
        K = _required(ns, "K", f"constants --name {name}")
        if name == "CK":
            value, validity = eval_CK(K), "0 < K < 2"
        elif name == "CprimeK":
            value, validity = eval_CprimeK(K), "0 < K < 2"
        else:
            if not 0.0 < K < 2.0:
                raise DomainError("c2 requires 0 < K < 2")
            value, validity = 2.0 ** (0.5 * (1.0 - K)), "0 < K < 2"
        params = {"K": K}
    elif name == "cp":
        p = _required(ns, "p", "constants --name cp")
        value, validity, params = eval_cp(p), "p >= 1", {"p": p}
    elif name == "c1":
        H = _required(ns, "H", "constants --name c1")
        K = _required(ns, "K", "constants --name c1")
        value = decomposition_constants("bfbm-low-k", H=H, K=K)["c1"]
        validity, params = "0 < H < 1 and 0 < K < 1", {"H": H, "K": K}
    elif name in ("a", "b"):
        H = _required(ns, "H", f"constants --name {name}")
        K = _required(ns, "K", f"constants --name {name}")
        value = decomposition_constants("bfbm-high-k", H=H, K=K)[name]
        validity = "0 < H < 1, 1 < K < 2, HK < 1"
        params = {"H": H, "K": K}
    elif name in ("c3", "c4"):
        H = _required(ns, "H", f"constants --name {name}")
        which = "sfbm-low-h" if name == "c3" else "sfbm-high-h"
        value = decomposition_constants(which, H=H)[name]
        validity = "0 < H < 1/2" if name == "c3" else "1/2 < H < 1"
        params = {"H": H}
    elif name == "kappa":
        gamma = _required(ns, "gamma", "constants --name kappa")
        value, error = _kappa(gamma)
        validity, params = "0 < gamma < 2", {"gamma": gamma}
    elif name == "lambda":
        H = _required(ns, "H", "constants --name lambda")
        gamma = _required(ns, "gamma", "constants --name lambda")
        if not 0.0 < gamma < 2.0:
            raise DomainError("lambda requires 0 < gamma < 2")
        value, error = _lambda(H, gamma)
        validity = "0 < H < 1 and 0 < gamma < 2"
        params = {"H": H, "gamma": gamma}
    else:
        H = _required(ns, "H", "constants --name alpha")
        gamma = _required(ns, "gamma", "constants --name alpha")
        if not 0.5 < H < 1.0:
            raise DomainError("alpha requires 1/2 < H < 1")
        if not 0.0 < gamma < 2.0 * H:
            raise DomainError("alpha requires 0 < gamma < 2H")
        value = 2.0 * H - gamma
        validity = "1/2 < H < 1 and 0 < gamma < 2H; decompositions need alpha < 1/2"
        params = {"H": H, "gamma": gamma}
    envelope = {
        "command": "constants",
        "name": name,
        "parameters": params,
        "value": value,
        "validity": validity,
        "quadrature_error": error,
    }
    print(_json_17g(envelope))
    return EXIT_PASS


def cmd_sample(ns) -> int:
    started = time.monotonic()
    spec = _build_spec(ns, "sample")
    level = _required(ns, "levels", "sample")
    paths = _required(ns, "paths", "sample")
    seed = _required(ns, "seed", "sample")
    policy = ns.sampler if ns.sampler is not None else "auto"
    fmt = ns.format if ns.format is not None else "csv"
    if fmt not in ("csv", "bin"):
        raise ConfigError(f"unknown format {fmt!r}; expected csv or bin")
    out = ns.out if ns.out is not None else "ensemble"

    ensemble = sample_process(spec, Grid(level), paths, seed, policy)
    data_path = f"{out}.{fmt}"
    save_ensemble(ensemble, data_path, fmt)
    outputs = {data_path: _sha256(data_path),
               data_path + ".json": _sha256(data_path + ".json")}
    config = _resolved(ns, "sample")
    _write_manifest(f"{out}.manifest.json", "sample", ns.argv, config, seed,
                    started, outputs)
    print(_json_17g({"command": "sample", "config": config,
                     "process": spec.label(), "outputs": outputs}))
    return EXIT_PASS


def cmd_verify(ns) -> int:
    check = _required(ns, "check", "verify")
    if check == "decomposition":
        name = _required(ns, "name", "verify --check decomposition")
        dec = make_decomposition(name, H=ns.H, K=ns.K, gamma=ns.gamma)
        level = ns.level if ns.level is not None else 6
        report = verify_covariance_identity(dec, Grid(level))
        payload, passed = json.loads(report.to_json()), report.passed
    elif check == "g-heat":
        H = _required(ns, "H", "verify --check g-heat")
        gamma = _required(ns, "gamma", "verify --check g-heat")
        level = ns.level if ns.level is not None else 3
        report = verify_G_against_heat(H, gamma, Grid(level))
        payload, passed = json.loads(report.to_json()), report.passed
    elif check == "increment-bounds":
        H = _required(ns, "H", "verify --check increment-bounds")
        K = _required(ns, "K", "verify --check increment-bounds")
        slack = ns.slack if ns.slack is not None else 1e-12
        report = verify_increment_variance_bounds(H, K, slack=slack)
        payload, passed = json.loads(report.to_json()), report.passed
    elif check == "moments":
        H = _required(ns, "H", "verify --check moments")
        K = _required(ns, "K", "verify --check moments")
        paths = ns.paths if ns.paths is not None else 20000
        seed = ns.seed if ns.seed is not None else 0
        report = verify_moment_formula(H, K, n_paths=paths, seed=seed)
        payload, passed = json.loads(report.to_json()), report.passed
    elif check == "ck-quadrature":
        K = _required(ns, "K", "verify --check ck-quadrature")
        tol = ns.tol if ns.tol is not None else 1e-8
        closed = eval_CK(K)
        quad = eval_CK_quadrature(K)
        rel_error = float(abs(quad.value - closed) / abs(closed))
        passed = bool(rel_error <= tol)
        payload = {"K": K, "closed_form": closed, "quadrature": quad.value,
                   "error_estimate": quad.error_estimate,
                   "rel_error": rel_error, "tolerance": tol, "pass": passed}
    else:
        raise ConfigError(f"unknown check {check!r}; expected one of "
                          f"{', '.join(VERIFY_CHECKS)}")
    envelope = {"command": "verify", "check": check,
                "config": _resolved(ns, "verify"), "report": payload,
                "pass": passed}
    print(_json_17g(envelope))
    return EXIT_PASS if passed else EXIT_FAIL


def _experiment_passed(kind, report) -> bool:
    if kind == "regularity":
        return bool(report.stability_pass
                    and report.divergence_pass is not False)
    return bool(report.passed)


def cmd_experiment(ns) -> int:
    started = time.monotonic()
    kind = _required(ns, "experiment", "experiment")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment {kind!r}; expected one of "
                          f"{', '.join(EXPERIMENT_KINDS)}")
    if kind == "regularity":
        spec = _build_spec(ns, "experiment --experiment regularity")
    else:
        H = _required(ns, "H", f"experiment --experiment {kind}")
        K = _required(ns, "K", f"experiment --experiment {kind}")
        spec = ProcessSpec("xhk", H=H, K=K)
    levels = ns.levels if ns.levels is not None else (8, 10, 12)
    paths = ns.paths if ns.paths is not None \
        else (20000 if kind == "moment" else 256)
    seed = ns.seed if ns.seed is not None else 0
    config = ExperimentConfig(
        experiment=kind, spec=spec, levels=levels, n_paths=paths, seed=seed,
        alpha_list=ns.alphas,
        p_max=ns.p_max if ns.p_max is not None else 256)
    report = run_experiment(config)
    passed = _experiment_passed(kind, report)

    out = ns.out if ns.out is not None else "experiment"
    json_path, csv_path = f"{out}.json", f"{out}.csv"
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(_json_17g(json.loads(report.to_json())) + "\n")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    outputs = {json_path: _sha256(json_path), csv_path: _sha256(csv_path)}
    resolved = _resolved(ns, "experiment")
    _write_manifest(f"{out}.manifest.json", "experiment", ns.argv, resolved,
                    seed, started, outputs)
    print(_json_17g({"command": "experiment", "experiment": kind,
                     "config": resolved, "outputs": outputs, "pass": passed}))
    return EXIT_PASS if passed else EXIT_FAIL


def _add_common(parser):
    parser.add_argument("--config", help="INI config file; flags override it")
    parser.add_argument("--threads", type=int,
                        help="BLAS thread cap; never affects numerical results")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="besovgp",
        description="Gaussian process sampling, covariance identity checks, "
                    "and Besov-Orlicz path-norm experiments")
    parser.add_argument("--version", action="version",
                        version=f"besovgp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="evaluate a named constant")
    p.add_argument("--name", choices=CONSTANT_NAMES)
    p.add_argument("--H", type=float)
    p.add_argument("--K", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--p", type=float)
    _add_common(p)

    p = sub.add_parser("sample", help="draw a path ensemble and persist it")
    p.add_argument("--process", choices=FAMILIES)
    p.add_argument("--H", type=float)
    p.add_argument("--K", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--levels", type=int, help="dyadic grid level J")
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sampler", choices=SAMPLER_POLICIES)
    p.add_argument("--out", help="output basename (default: ensemble)")
    p.add_argument("--format", choices=("csv", "bin"))
    _add_common(p)

    p = sub.add_parser("verify", help="deterministic identity and bound checks")
    p.add_argument("--check", choices=VERIFY_CHECKS)
    p.add_argument("--name", choices=DECOMPOSITION_NAMES)
    p.add_argument("--H", type=float)
    p.add_argument("--K", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--level", type=int)
    p.add_argument("--slack", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    _add_common(p)

    p = sub.add_parser("experiment", help="statistical norm suites")
    p.add_argument("--experiment", choices=EXPERIMENT_KINDS)
    p.add_argument("--process", choices=FAMILIES)
    p.add_argument("--H", type=float)
    p.add_argument("--K", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--levels", type=_int_list,
                   help="comma-separated dyadic levels, e.g. 8,10,12")
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--alphas", type=_float_list,
                   help="comma-separated smoothness indices")
    p.add_argument("--p-max", dest="p_max", type=int)
    p.add_argument("--out", help="report basename (default: experiment)")
    _add_common(p)

    return parser


_HANDLERS = {
    "constants": cmd_constants,
    "sample": cmd_sample,
    "verify": cmd_verify,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    argv = [str(a) for a in argv]
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code in (0, None) else EXIT_USAGE
    ns.argv = tuple(argv)
    try:
        _apply_config(ns, ns.command)
        handler = _HANDLERS[ns.command]
        if getattr(ns, "threads", None):
            with threadpool_limits(limits=ns.threads):
                return handler(ns)
        return handler(ns)
    except UnsupportedRegionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FactorizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
