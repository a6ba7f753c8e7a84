"""Command-line interface: JSON experiment configs in, CSV and JSON reports out.

Subcommands
-----------
validate  check the boundary model and both ends, exit 0 or 1
ends      extended kernels, trace spaces and lagrangian defects (ends.json)
eigen     eigenvalues at one neck parameter (spectrum.csv, eigvecs.csv)
sweep     sweep over the neck parameter (sweep.csv, report.json)
check     run the acceptance suite on the built-in models

Exit codes: 0 ok, 1 validation failure, 2 numeric failure, 3 acceptance
failure.
"""
from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from . import eigen
from .analysis import Tolerances, auto_schedule, run_sweep
from .boundary import BoundaryModel, is_lagrangian, spectral_decompose, validate
from .ends import (
    DEFAULT_STEP,
    CapPotential,
    EndModel,
    default_cut,
    difference_kernel,
    extended_kernel,
    validate_end,
)
from .glue import assemble
from .necks import NeckPerturbation
from .subspaces import Frame

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2
EXIT_ACCEPTANCE = 3
CHECK_BUDGET = 180.0


class ConfigError(ValueError):
    """Malformed experiment configuration; the message names the field."""


# ---------------------------------------------------------------------------
# matrices as nested [re, im] pairs


def _is_pair(x) -> bool:
    return (
        isinstance(x, (list, tuple))
        and len(x) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x)
    )


def _scalar(x, where: str) -> complex:
    if isinstance(x, bool):
        raise ConfigError(f"{where}: expected a number or an [re, im] pair, got {x!r}")
    if isinstance(x, (int, float)):
        return complex(float(x), 0.0)
    if _is_pair(x):
        return complex(float(x[0]), float(x[1]))
    raise ConfigError(f"{where}: expected a number or an [re, im] pair, got {x!r}")


def parse_matrix(data, where: str, shape: tuple | None = None) -> np.ndarray:
    """Row-major nested list of ``[re, im]`` pairs (or plain numbers) to a complex matrix."""
    if not isinstance(data, list) or not data or not all(isinstance(row, list) for row in data):
        raise ConfigError(f"{where}: expected a non-empty list of rows")
    width = len(data[0])
    out = np.zeros((len(data), width), dtype=complex)
    for i, row in enumerate(data):
        if len(row) != width:
            raise ConfigError(f"{where}: row {i} has {len(row)} entries, expected {width}")
        for j, x in enumerate(row):
            out[i, j] = _scalar(x, f"{where}[{i}][{j}]")
    if shape is not None and out.shape != shape:
        raise ConfigError(f"{where}: expected shape {shape}, got {out.shape}")
    return out


def encode_matrix(m) -> list:
    """Complex matrix to nested ``[re, im]`` pairs."""
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


# ---------------------------------------------------------------------------
# configuration


NUMERICS_DEFAULTS = {
    "step": DEFAULT_STEP,
    "scan_step": None,
    "bisect_tol": eigen.DEFAULT_BISECT_TOL,
    "rank_tol": 1e-9,
    "resid_tol": eigen.DEFAULT_RESID_TOL,
    "split_convention": "frozen",
    "split_window": None,
    "fd_oracle": False,
    "fd_h": 0.05,
}
EIGEN_DEFAULTS = {"r": 4.0, "window": None, "eigenvectors": False}
SWEEP_DEFAULT = [2.0, 4.0, 6.0, 8.0, 10.0]
_SIDES = {"end1": "right_infinite", "end2": "left_infinite"}


@dataclass
class ExperimentConfig:
    """A parsed experiment; :meth:`echo` gives the config with all defaults filled in."""

    boundary: BoundaryModel
    end1: EndModel
    end2: EndModel
    r_list: list
    c0: object
    delta: object
    numerics: dict
    eigen: dict
    name: str = ""

    def tolerances(self) -> Tolerances:
        nm = self.numerics
        return Tolerances(
            step=nm["step"],
            scan_step=nm["scan_step"],
            bisect_tol=nm["bisect_tol"],
            rank_tol=nm["rank_tol"],
            resid_tol=nm["resid_tol"],
            convention=nm["split_convention"],
            split_window=nm["split_window"],
        )

    def schedule(self):
        return auto_schedule(self.end1, self.end2, self.c0, self.delta, r_ref=self.r_list[0])

    def echo(self) -> dict:
        b = self.boundary
        return {
            "name": self.name,
            "boundary": {
                "n": b.n,
                "D": encode_matrix(b.D),
                "J": encode_matrix(b.J),
                "C": None if b.C is None else encode_matrix(b.C),
            },
            "end1": _echo_end(self.end1),
            "end2": _echo_end(self.end2),
            "sweep": {"r_list": list(self.r_list)},
            "threshold": {"c0": self.c0, "delta": self.delta},
            "numerics": dict(self.numerics),
            "eigen": dict(self.eigen),
        }


def _echo_end(end: EndModel) -> dict:
    cap = end.cap_potential
    neck = end.neck
    return {
        "side": end.side,
        "cap_length": end.cap_length,
        "cap_potential": "zero" if cap is None else {
            "nodes": [float(x) for x in cap.nodes],
            "values": [encode_matrix(v) for v in cap.values],
        },
        "lagrangian": encode_matrix(end.boundary_lagrangian.columns),
        "perturbation": None if neck is None else {
            "A0": encode_matrix(neck.A0),
            "lambda": neck.decay_lambda,
            "amplitude": neck.amplitude,
        },
    }


def _get(block: dict, key: str, where: str, default=..., kind=None):
    if key not in block:
        if default is ...:
            raise ConfigError(f"{where}.{key}: missing required field")
        return default
    value = block[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{where}.{key}: must be finite")
    return value


def _check_keys(block, allowed, where: str) -> None:
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = sorted(set(block) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(extra)}")


def _parse_end(block, key: str, boundary: BoundaryModel) -> EndModel:
    n = boundary.n
    _check_keys(block, ("side", "cap_length", "cap_potential", "lagrangian", "perturbation"), key)
    side = _get(block, "side", key, _SIDES[key])
    if side != _SIDES[key]:
        raise ConfigError(f"{key}.side: must be {_SIDES[key]!r}")
    cap_length = _get(block, "cap_length", key, 0.0, float)
    if cap_length < 0:
        raise ConfigError(f"{key}.cap_length: must be non-negative")
    cap_raw = _get(block, "cap_potential", key, "zero")
    cap = None
    if cap_raw not in ("zero", None):
        _check_keys(cap_raw, ("nodes", "values"), f"{key}.cap_potential")
        nodes = _get(cap_raw, "nodes", f"{key}.cap_potential")
        values = _get(cap_raw, "values", f"{key}.cap_potential")
        if not isinstance(nodes, list) or not isinstance(values, list) or len(nodes) != len(values) or not nodes:
            raise ConfigError(f"{key}.cap_potential: nodes and values must be lists of equal length")
        mats = [parse_matrix(v, f"{key}.cap_potential.values[{i}]", (n, n)) for i, v in enumerate(values)]
        try:
            cap = CapPotential(np.array(nodes, dtype=float), np.array(mats))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}.cap_potential: {exc}") from None
    lam = parse_matrix(_get(block, "lagrangian", key), f"{key}.lagrangian")
    if lam.shape != (n, n // 2):
        raise ConfigError(f"{key}.lagrangian: expected shape {(n, n // 2)}, got {lam.shape}")
    q, s, _ = np.linalg.svd(lam, full_matrices=False)
    if s[-1] <= 1e-12 * max(1.0, s[0]):
        raise ConfigError(f"{key}.lagrangian: columns are linearly dependent")
    neck = None
    pert = _get(block, "perturbation", key, None)
    if pert is not None:
        where = f"{key}.perturbation"
        _check_keys(pert, ("A0", "lambda", "amplitude"), where)
        a0 = parse_matrix(_get(pert, "A0", where), f"{where}.A0", (n, n))
        try:
            neck = NeckPerturbation(
                a0, _get(pert, "lambda", where, kind=float), _get(pert, "amplitude", where, kind=float)
            )
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    return EndModel(boundary, side, Frame(q), cap_length, cap, neck)


def _parse_r_list(block) -> list:
    if block is None:
        return list(SWEEP_DEFAULT)
    if isinstance(block, list):
        block = {"r_list": block}
    if not isinstance(block, dict):
        raise ConfigError("sweep: expected an object or a list")
    if "r_list" in block:
        _check_keys(block, ("r_list",), "sweep")
        r_list = block["r_list"]
        if not isinstance(r_list, list) or not r_list:
            raise ConfigError("sweep.r_list: expected a non-empty list of numbers")
        out = [float(_scalar(x, f"sweep.r_list[{i}]").real) for i, x in enumerate(r_list)]
    else:
        _check_keys(block, ("r_min", "r_max", "step"), "sweep")
        lo = _get(block, "r_min", "sweep", kind=float)
        hi = _get(block, "r_max", "sweep", kind=float)
        step = _get(block, "step", "sweep", 1.0, float)
        if step <= 0 or hi < lo:
            raise ConfigError("sweep: need step > 0 and r_max >= r_min")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        out = [lo + k * step for k in range(count)]
    if any(b <= a for a, b in zip(out[:-1], out[1:])):
        raise ConfigError("sweep.r_list: values must be increasing")
    if out[0] < 1:
        raise ConfigError("sweep.r_list: values must be at least 1")
    return out


def _parse_auto(block, key: str):
    value = block.get(key, "auto")
    if value == "auto":
        return "auto"
    value = _get(block, key, "threshold", kind=float)
    if value <= 0:
        raise ConfigError(f"threshold.{key}: must be positive or \"auto\"")
    return value


def parse_config(data: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from decoded JSON; raises ``ConfigError``."""
    _check_keys(data, ("name", "boundary", "end1", "end2", "sweep", "threshold", "numerics", "eigen"), "config")
    bblock = _get(data, "boundary", "config")
    _check_keys(bblock, ("n", "D", "J", "C"), "boundary")
    n = _get(bblock, "n", "boundary")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError(f"boundary.n: expected a positive integer, got {n!r}")
    D = parse_matrix(_get(bblock, "D", "boundary"), "boundary.D", (n, n))
    J = parse_matrix(_get(bblock, "J", "boundary"), "boundary.J", (n, n))
    C_raw = bblock.get("C")
    C = None if C_raw is None else parse_matrix(C_raw, "boundary.C", (n, n))
    boundary = BoundaryModel(D, J, C)
    end1 = _parse_end(_get(data, "end1", "config"), "end1", boundary)
    end2 = _parse_end(_get(data, "end2", "config"), "end2", boundary)
    r_list = _parse_r_list(data.get("sweep"))
    thr = data.get("threshold", {})
    _check_keys(thr, ("c0", "delta"), "threshold")
    numerics = dict(NUMERICS_DEFAULTS)
    nblock = data.get("numerics", {})
    _check_keys(nblock, NUMERICS_DEFAULTS, "numerics")
    for key, value in nblock.items():
        if key == "split_convention":
            if value not in ("frozen", "window"):
                raise ConfigError("numerics.split_convention: expected \"frozen\" or \"window\"")
        elif key == "fd_oracle":
            if not isinstance(value, bool):
                raise ConfigError("numerics.fd_oracle: expected true or false")
        elif value is None and NUMERICS_DEFAULTS[key] is None:
            pass
        else:
            value = _get(nblock, key, "numerics", kind=float)
            if value <= 0:
                raise ConfigError(f"numerics.{key}: must be positive")
        numerics[key] = value
    eblock = data.get("eigen", {})
    _check_keys(eblock, EIGEN_DEFAULTS, "eigen")
    eig = dict(EIGEN_DEFAULTS)
    if "r" in eblock:
        eig["r"] = _get(eblock, "r", "eigen", kind=float)
        if eig["r"] < 1:
            raise ConfigError("eigen.r: must be at least 1")
    if eblock.get("window") is not None:
        eig["window"] = _get(eblock, "window", "eigen", kind=float)
        if eig["window"] <= 0:
            raise ConfigError("eigen.window: must be positive")
    if "eigenvectors" in eblock:
        if not isinstance(eblock["eigenvectors"], bool):
            raise ConfigError("eigen.eigenvectors: expected true or false")
        eig["eigenvectors"] = eblock["eigenvectors"]
    name = data.get("name", "")
    if not isinstance(name, str):
        raise ConfigError("name: expected a string")
    return ExperimentConfig(
        boundary, end1, end2, r_list, _parse_auto(thr, "c0"), _parse_auto(thr, "delta"),
        numerics, eig, name,
    )


def load_config(path: str) -> ExperimentConfig:
    """Read and parse a JSON config; syntax errors report line and column."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(data)


def config_from_ends(end1: EndModel, end2: EndModel, name: str = "", **sections) -> dict:
    """Echoed config dict for a pair of ends (used to write sample configs)."""
    cfg = ExperimentConfig(
        end1.boundary, end1, end2, list(SWEEP_DEFAULT), "auto", "auto",
        dict(NUMERICS_DEFAULTS), dict(EIGEN_DEFAULTS), name,
    )
    out = cfg.echo()
    for key, value in sections.items():
        out[key].update(value)
    return out


def validation_report(cfg: ExperimentConfig) -> list[str]:
    """All invariant violations of the boundary model and both ends."""
    out = [str(v) for v in validate(cfg.boundary)]
    if out:
        return out
    if cfg.boundary.C is not None:
        try:
            spectral_decompose(cfg.boundary)
        except ValueError as exc:
            out.append(str(exc))
    for key, end in (("end1", cfg.end1), ("end2", cfg.end2)):
        out.extend(f"{key}: {msg}" for msg in validate_end(end))
    return out


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return format(float(x), ".17g")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    _atomic_write(path, buf.getvalue())


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _finite(x):
    """Replace non-finite floats by strings so the output is strict JSON."""
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    if isinstance(x, (float, np.floating)) and not math.isfinite(x):
        return str(float(x))
    return x


def write_json(path: str, data) -> None:
    _atomic_write(path, json.dumps(_finite(data), indent=2, default=_json_default) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(cfg: ExperimentConfig, args) -> int:
    problems = validation_report(cfg)
    if problems:
        for msg in problems:
            print(f"invalid: {msg}")
        return EXIT_VALIDATION
    sd = spectral_decompose(cfg.boundary)
    print(f"valid: n = {cfg.boundary.n}, gamma = {sd.gamma:.6g}, dim ker D = {sd.kernel.dim}, "
          f"graded = {cfg.boundary.C is not None}")
    return EXIT_OK


def cmd_ends(cfg: ExperimentConfig, args) -> int:
    tol = cfg.tolerances()
    sd = spectral_decompose(cfg.boundary)
    kernels = {}
    out = {"config": cfg.echo(), "dim_H": sd.kernel.dim, "gamma": sd.gamma}
    for key, end in (("end1", cfg.end1), ("end2", cfg.end2)):
        k = extended_kernel(end, default_cut(end, tol.rank_tol), tol.step, tol.rank_tol)
        kernels[key] = k
        defect = is_lagrangian(k.traces, sd.kernel, cfg.boundary).defect if sd.kernel.dim else 0.0
        out[key] = {
            "kappa": k.kappa,
            "dim_L": k.traces.dim,
            "L": encode_matrix(k.traces.columns) if k.traces.dim else [],
            "lagrangian_defect": defect,
            "T_cut": k.T_cut,
            "trace_error_bound": k.trace_error_bound,
        }
    dk = difference_kernel(kernels["end1"], kernels["end2"], sd, tol.rank_tol)
    out["dim_Lsum"] = dk.L_sum.dim
    out["dim_Lcap"] = dk.L_cap.dim
    out["dim_K_inf"] = dk.dim_K_inf
    path = os.path.join(args.out, "ends.json")
    write_json(path, out)
    print(f"kappa = ({out['end1']['kappa']}, {out['end2']['kappa']}), dim K_inf = {dk.dim_K_inf}; wrote {path}")
    return EXIT_OK


def cmd_eigen(cfg: ExperimentConfig, args) -> int:
    tol = cfg.tolerances()
    r = args.r if args.r is not None else cfg.eigen["r"]
    problem = assemble(cfg.end1, cfg.end2, r, tol.step)
    window = cfg.eigen["window"] or eigen.default_window(problem)
    res = eigen.find_eigenvalues(problem, window, tol.scan_step, tol.bisect_tol, tol.rank_tol)
    res = eigen.with_eigenvectors(problem, res, tol.resid_tol)
    write_csv(
        os.path.join(args.out, "spectrum.csv"),
        ["lambda", "multiplicity", "residual"],
        zip(res.eigenvalues, res.multiplicities, res.residuals),
    )
    if cfg.eigen["eigenvectors"] and res.eigenvectors:
        vals = res.vectors()
        grid = res.eigenvectors[0].grid
        header = ["t"]
        for j in range(vals.shape[2]):
            for c in range(vals.shape[1]):
                header += [f"v{j}_{c}_re", f"v{j}_{c}_im"]
        rows = []
        for i, t in enumerate(grid):
            flat = vals[i].T.reshape(-1)
            rows.append([t] + [x for z in flat for x in (z.real, z.imag)])
        write_csv(os.path.join(args.out, "eigvecs.csv"), header, rows)
    for w in res.warnings:
        print(f"warning: {w}")
    print(f"r = {r:g}, L_tot = {problem.total_length:.6g}: {res.dimension} eigenvalue(s) in (-{window:.4g}, {window:.4g})")
    if args.fd_oracle or cfg.numerics["fd_oracle"]:
        fd = eigen.fd_oracle(problem, cfg.numerics["fd_h"], window)
        ref = res.spectrum
        if fd.size == ref.size:
            diff = float(np.max(np.abs(fd - ref))) if fd.size else 0.0
            print(f"box-scheme oracle (h = {cfg.numerics['fd_h']:g}): max |difference| = {diff:.3e}")
        else:
            print(f"box-scheme oracle found {fd.size} eigenvalues, shooting found {ref.size}")
            return EXIT_NUMERIC
    return EXIT_OK


SWEEP_COLUMNS = [
    "r", "dim_ktilde", "kappa1", "kappa2", "dim_Lsum", "dim_Lcap", "lambda_min_abs",
    "exactness_gap", "glue_residual_max", "graded_even", "graded_odd",
]


def _fd_check(cfg: ExperimentConfig, r: float) -> dict:
    problem = assemble(cfg.end1, cfg.end2, r, cfg.numerics["step"])
    window = eigen.default_window(problem)
    ref = eigen.find_eigenvalues(problem, window).spectrum
    fd = eigen.fd_oracle(problem, cfg.numerics["fd_h"], window)
    diff = float(np.max(np.abs(fd - ref))) if fd.size == ref.size and fd.size else None
    return {"r": r, "h": cfg.numerics["fd_h"], "count_shooting": int(ref.size),
            "count_fd": int(fd.size), "max_abs_difference": diff}


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    rep = run_sweep(cfg.end1, cfg.end2, cfg.schedule(), cfg.r_list, cfg.tolerances(), jobs=args.jobs)
    rows = []
    for row in rep.rows:
        dims = row.graded["ktilde_dims"] if row.graded else (None, None)
        rows.append([
            row.r, row.dim_ktilde, row.kappa1, row.kappa2, row.dim_Lsum, row.dim_Lcap,
            row.lambda_min_abs, row.exactness_gap, row.glue_residual_max, dims[0], dims[1],
        ])
    write_csv(os.path.join(args.out, "sweep.csv"), SWEEP_COLUMNS, rows)
    report = rep.as_dict()
    report["config"] = cfg.echo()
    if args.fd_oracle or cfg.numerics["fd_oracle"]:
        report["fd_oracle"] = [_fd_check(cfg, r) for r in cfg.r_list]
    write_json(os.path.join(args.out, "report.json"), report)
    for note in rep.warnings:
        print(f"row failure: {note}")
    verdicts = ", ".join(f"{k} {v}" for k, v in rep.verdicts.items())
    print(f"{len(rep.rows)} rows; {verdicts}; wrote sweep.csv and report.json to {args.out}")
    return EXIT_NUMERIC if any(not row.ok for row in rep.rows) else EXIT_OK


def cmd_check(args) -> int:
    from . import acceptance

    start = time.perf_counter()
    results = []
    for fn in acceptance.CRITERIA:
        kwargs = {"seed": args.seed} if args.seed is not None and "seed" in inspect.signature(fn).parameters else {}
        res = fn(**kwargs)
        print(res.line(), flush=True)
        results.append(res)
    total = time.perf_counter() - start
    budget_ok = total < CHECK_BUDGET
    print(f"criterion 10 [{'PASS' if budget_ok else 'FAIL'}] full check runtime: "
          f"{total:.1f} s (budget {CHECK_BUDGET:g} s)")
    if args.out:
        write_json(os.path.join(args.out, "check.json"), {
            "criteria": [
                {"number": r.number, "name": r.name, "passed": r.passed, "detail": r.detail, "seconds": r.seconds}
                for r in results
            ],
            "runtime": total,
        })
    passed = budget_ok and all(r.passed for r in results)
    return EXIT_OK if passed else EXIT_ACCEPTANCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neckglue", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=("validate", "ends", "eigen", "sweep", "check"))
    parser.add_argument("--config", help="experiment config (JSON)")
    parser.add_argument("--out", default=None, help="output directory (default: current directory)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    parser.add_argument("--seed", type=int, default=None, help="seed for the randomized checks")
    parser.add_argument("--fd-oracle", action="store_true", help="compare with the box-scheme oracle")
    parser.add_argument("--r", type=float, default=None, help="neck parameter for `eigen`")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_VALIDATION
    if args.command == "check":
        return cmd_check(args)
    if args.out is None:
        args.out = "."
    if not args.config:
        print(f"error: `{args.command}` needs --config", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.command == "validate":
        return cmd_validate(cfg, args)
    problems = validation_report(cfg)
    if problems:
        for msg in problems:
            print(f"invalid: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    handler = {"ends": cmd_ends, "eigen": cmd_eigen, "sweep": cmd_sweep}[args.command]
    try:
        return handler(cfg, args)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
