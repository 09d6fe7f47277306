"""Batch command line front end.

Every subcommand writes a report (JSON and CSV) plus task data files when
``--out`` names a directory, and prints the report JSON otherwise.  Exit
status: 0 when every check passes, 2 when a check fails, 1 on bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .algebra import (
    AlgebraError,
    Multivector,
    element_from_json,
    phi,
    sample_imaginary_sphere,
)
from .fixtures import named_operator
from .operators import (
    MEMBERSHIP_RTOL,
    OperatorError,
    RightLinearOperator,
    SingularDelta,
    delta,
    norm_upper,
    operator_from_json,
    operator_to_json,
    relative_min_singular,
    relative_residual,
    sectorial_probe,
    spherical_C,
    spherical_Q,
    spherical_spectrum,
)
from .quadrature import QuadratureError
from .report import SemigroupReport
from .semigroup import (
    ContourError,
    ContourSpec,
    contour_semigroup,
    contour_semigroup_slice,
    exp_semigroup,
    growth_bound_check,
    laplace_transform,
    resolvent_slice_power,
    resolvent_stem,
    semigroup_law_check,
)
from .stems import StemError, induce
from . import suite

TASKS = ("spectrum", "resolvent", "semigroup", "contour", "laplace", "law", "probe", "yosida",
         "scan", "suite", "ij_swap", "growth")
THREADS_ENV = "SLICEREG_THREADS"


class InputError(ValueError):
    """Malformed configuration or arguments."""


@dataclass
class JobConfig:
    tasks: list[str]
    operator: RightLinearOperator | None
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    tol: float | None = None
    out: Path | None = None
    timing: bool = False


@dataclass
class TaskResult:
    report: SemigroupReport
    artifacts: dict[str, str] = field(default_factory=dict)


# parsing -------------------------------------------------------------------

def _load_json_arg(text: str) -> Any:
    """Inline JSON, or @path / an existing file path holding JSON."""
    path = Path(text[1:]) if text.startswith("@") else Path(text)
    try:
        if text.startswith("@") or (not text.lstrip().startswith(("{", "[")) and path.is_file()):
            return json.loads(path.read_text())
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read JSON from {text!r}: {exc}") from exc


def parse_operator(spec: Any, base: Path | None = None) -> RightLinearOperator:
    """Operator from a bundled name, {"name": ...}, {"file": ...} or inline {"n", "m", "entries"}."""
    if isinstance(spec, str):
        try:
            return named_operator(spec)
        except KeyError:
            pass
        spec = _load_json_arg(str(base / spec) if base and not Path(spec).is_absolute() else spec)
    if not isinstance(spec, dict):
        raise InputError("operator must be a name or a JSON object")
    if "name" in spec:
        try:
            return named_operator(spec["name"])
        except KeyError as exc:
            raise InputError(str(exc)) from exc
    if "file" in spec:
        path = Path(spec["file"])
        if base is not None and not path.is_absolute():
            path = base / path
        return parse_operator(_load_json_arg(str(path)))
    return operator_from_json(spec)


def parse_element(value: Any, sig, axis: Multivector | None = None) -> Multivector:
    """A number, [r, s] (point of the slice through ``axis``), a full coefficient list or element JSON."""
    if isinstance(value, Multivector):
        return value
    if isinstance(value, (int, float)):
        return Multivector.scalar(sig, float(value))
    if isinstance(value, dict):
        return element_from_json(value, sig.n)
    if isinstance(value, (list, tuple)):
        values = [float(v) for v in value]
        if len(values) == 2:
            axis = axis if axis is not None else Multivector.blade(sig, 1)
            return phi(sig, axis, complex(values[0], values[1]))
        if len(values) == sig.dim:
            return Multivector(sig, values)
    raise InputError(f"cannot read an algebra element from {value!r}")


def _axis(params: dict, sig) -> Multivector | None:
    return parse_element(params["axis"], sig) if "axis" in params else None


# output --------------------------------------------------------------------

def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _dumps(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n"


# tasks ---------------------------------------------------------------------

def _require_operator(cfg: JobConfig) -> RightLinearOperator:
    if cfg.operator is None:
        raise InputError("this task needs an operator")
    return cfg.operator


def _resolvent_row(a: RightLinearOperator, q: Multivector) -> tuple[float, float]:
    dm = delta(a, q)
    sv = np.linalg.svd(dm, compute_uv=False)
    if sv[-1] <= MEMBERSHIP_RTOL * sv[0]:
        return float(sv[-1]), math.inf
    return float(sv[-1]), norm_upper(spherical_C(a, q), a.sig, a.m)


def task_spectrum(cfg: JobConfig) -> TaskResult:
    a = _require_operator(cfg)
    axis = _axis(cfg.params, a.sig) or Multivector.blade(a.sig, 1)
    rows = []
    report = SemigroupReport()
    for r, s in spherical_spectrum(a):
        sv, norm = _resolvent_row(a, phi(a.sig, axis, complex(r, s)))
        rows.append([r, s, sv, norm])
    worst = max((relative_min_singular(delta(a, phi(a.sig, axis, complex(r, s)))) for r, s in
                 spherical_spectrum(a)), default=0.0)
    report.record("operators.spectrum_circles", worst, MEMBERSHIP_RTOL,
                  operands={"components": len(rows)})
    return TaskResult(report, {"spectrum.csv": _csv(["r", "s", "min_singular_value", "resolvent_norm"], rows)})


def task_ij_swap(cfg: JobConfig) -> TaskResult:
    inner = JobConfig(["spectrum"], named_operator("ij_swap"), {})
    out = task_spectrum(inner)
    report = suite.ij_swap_checks()
    return TaskResult(report, {"ij_swap_spectrum.csv": out.artifacts["spectrum.csv"]})


def task_resolvent(cfg: JobConfig) -> TaskResult:
    a = _require_operator(cfg)
    q = parse_element(cfg.params.get("q", [1.0, 1.0]), a.sig, _axis(cfg.params, a.sig))
    k = int(cfg.params.get("k", 1))
    report = SemigroupReport()
    c = spherical_C(a, q)
    stem_value = induce(resolvent_stem(a), q)
    report.record("stems.resolvent_stem", relative_residual(stem_value, c, a.sig, a.m), 1e-10)
    value = resolvent_slice_power(a, q, k) if k > 1 else c
    data = {"q": list(map(float, q.coeff)), "k": k,
            "C": operator_to_json(RightLinearOperator.from_embedding(a.sig, a.m, value, tol=None)),
            "Q": operator_to_json(RightLinearOperator.from_embedding(a.sig, a.m, spherical_Q(a, q), tol=None))}
    return TaskResult(report, {"resolvent.json": _dumps(data)})


def _contour_spec(params: dict, a: RightLinearOperator, tol: float | None) -> ContourSpec:
    axis = _axis(params, a.sig) or sample_imaginary_sphere(a.sig, 0, 1)[0]
    return ContourSpec(axis=axis, r=float(params.get("r", 1.0)), eta=float(params.get("eta", 0.55 * math.pi)),
                       omega=float(params.get("omega", 0.0)), tol=tol or 1e-10)


def task_semigroup(cfg: JobConfig) -> TaskResult:
    """T(t) or T(q) by the exponential series and by the contour integral, compared."""
    a = _require_operator(cfg)
    params = cfg.params
    q = parse_element(params.get("q", params.get("t", 1.0)), a.sig, _axis(params, a.sig))
    spec = _contour_spec(params, a, cfg.tol)
    report = SemigroupReport()
    series = exp_semigroup(a, q)
    contour = contour_semigroup_slice(a, spec, None, q)
    report.record("semigroup.contour[q]", relative_residual(contour, series, a.sig, a.m),
                  float(params.get("check_tol", 1e-6)), operands={"q": list(map(float, q.coeff))})
    data = {"q": list(map(float, q.coeff)),
            "T": operator_to_json(RightLinearOperator.from_embedding(a.sig, a.m, series, tol=None))}
    return TaskResult(report, {"semigroup.json": _dumps(data)})


def task_contour(cfg: JobConfig) -> TaskResult:
    a = _require_operator(cfg)
    ts = [float(t) for t in cfg.params.get("t", [0.1, 0.5, 1.0, 2.0])]
    spec = _contour_spec(cfg.params, a, cfg.tol)
    report = SemigroupReport()
    worst = max(relative_residual(contour_semigroup(a, spec, t), exp_semigroup(a, t), a.sig, a.m) for t in ts)
    report.record("semigroup.contour[t]", worst, float(cfg.params.get("check_tol", 1e-6)), operands={"t": ts})
    return TaskResult(report)


def task_laplace(cfg: JobConfig) -> TaskResult:
    a = _require_operator(cfg)
    q = parse_element(cfg.params.get("q", [1.0, 2.0]), a.sig, _axis(cfg.params, a.sig))
    ks = cfg.params.get("k", [1, 2, 3])
    ks = [int(k) for k in (ks if isinstance(ks, list) else [ks])]
    report = SemigroupReport()
    quad_tol = cfg.tol or 1e-11
    for k in ks:
        lap = laplace_transform(a, q, k, tol=quad_tol)
        res = resolvent_slice_power(a, q, k)
        report.record(f"semigroup.laplace[k{k}]", relative_residual(lap, res, a.sig, a.m),
                      float(cfg.params.get("check_tol", 1e-6)), operands={"q": list(map(float, q.coeff)), "k": k})
    return TaskResult(report)


def task_law(cfg: JobConfig) -> TaskResult:
    a = _require_operator(cfg)
    axis = _axis(cfg.params, a.sig)
    p = parse_element(cfg.params.get("p", [0.3, 0.2]), a.sig, axis)
    q = parse_element(cfg.params.get("q", [0.1, 0.5]), a.sig, axis)
    return TaskResult(semigroup_law_check(a, p, q, cfg.tol or 1e-8))


def task_probe(cfg: JobConfig) -> TaskResult:
    a = _require_operator(cfg)
    omega = float(cfg.params.get("omega", 0.0))
    delta_angle = float(cfg.params.get("delta", math.pi / 4))
    result = sectorial_probe(a, omega, delta_angle, samples=int(cfg.params.get("samples", 4)), seed=cfg.seed)
    report = SemigroupReport()
    report.record("operators.sectorial", result.K, float(cfg.params.get("k_cap", 1e6)),
                  passed=result.ok and result.K < float(cfg.params.get("k_cap", 1e6)),
                  operands={"omega": omega, "delta": delta_angle, "probes": result.probes,
                            "spectrum_clear": result.spectrum_clear, "failures": len(result.failures)})
    axis = _axis(cfg.params, a.sig) or Multivector.blade(a.sig, 1)
    rows = []
    for r, s in sorted(set(result.failures)):
        sv, norm = _resolvent_row(a, phi(a.sig, axis, complex(r, s)))
        rows.append([r, s, sv, norm])
    return TaskResult(report, {"probe.csv": _csv(["r", "s", "min_singular_value", "resolvent_norm"], rows)})


def emit_sector_scan(a: RightLinearOperator, omega: float, grid: list[complex],
                     axis: Multivector | None = None) -> str:
    """CSV rows (Re q, s, ||C_q||, |q - omega| ||C_q||, status) sorted by (Re q, s)."""
    axis = axis or Multivector.blade(a.sig, 1)
    rows = []
    for z in sorted(grid, key=lambda w: (w.real, w.imag)):
        q = phi(a.sig, axis, z)
        _, norm = _resolvent_row(a, q)
        if math.isinf(norm):
            rows.append([z.real, z.imag, math.inf, math.inf, "singular"])
        else:
            rows.append([z.real, z.imag, norm, abs(z - omega) * norm, "ok"])
    return _csv(["re_q", "s", "c_norm", "scaled_norm", "status"], rows)


def sector_grid(omega: float, half_angle: float, radii: list[float], angles: int) -> list[complex]:
    thetas = np.linspace(0.0, half_angle, angles)
    return [omega + rho * complex(math.cos(t), math.sin(t)) for t in thetas for rho in radii]


def task_scan(cfg: JobConfig) -> TaskResult:
    a = _require_operator(cfg)
    params = cfg.params
    omega = float(params.get("omega", 0.0))
    if "grid" in params:
        grid = [complex(float(r), float(s)) for r, s in params["grid"]]
    else:
        radii = [float(r) for r in params.get("radii", list(np.geomspace(0.1, 10.0, 9)))]
        grid = sector_grid(omega, float(params.get("half_angle", 0.75 * math.pi)), radii, int(params.get("angles", 7)))
    text = emit_sector_scan(a, omega, grid, _axis(params, a.sig))
    report = SemigroupReport()
    singular = text.count(",singular")
    report.record("operators.scan.singular_points", float(singular), None, passed=True,
                  operands={"points": len(grid)}, diagnostic=True)
    return TaskResult(report, {"scan.csv": text})


def task_yosida(cfg: JobConfig) -> TaskResult:
    params = cfg.params
    target = params.get("target")
    return TaskResult(suite.yosida_checks(operators=int(params.get("operators", 5)), seed=cfg.seed,
                                          target=None if target is None else float(target)))


def task_growth(cfg: JobConfig) -> TaskResult:
    a = _require_operator(cfg)
    spec = _contour_spec(cfg.params, a, cfg.tol)
    deltas = [float(d) for d in cfg.params.get("delta_prime", [0.05, 0.1, 0.15])]
    return TaskResult(growth_bound_check(a, spec, deltas, float(cfg.params.get("omega", spec.omega)), seed=cfg.seed))


def task_suite(cfg: JobConfig) -> TaskResult:
    full = bool(cfg.params.get("full", False))
    return TaskResult(suite.run_suite(seed=cfg.seed, quad_tol=cfg.tol or 1e-10, full=full))


TASK_RUNNERS: dict[str, Callable[[JobConfig], TaskResult]] = {
    "spectrum": task_spectrum,
    "resolvent": task_resolvent,
    "semigroup": task_semigroup,
    "contour": task_contour,
    "laplace": task_laplace,
    "law": task_law,
    "probe": task_probe,
    "yosida": task_yosida,
    "scan": task_scan,
    "suite": task_suite,
    "ij_swap": task_ij_swap,
    "growth": task_growth,
}


# job -----------------------------------------------------------------------

def load_job(path: Path) -> dict:
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError("a job must be a JSON object")
    return data


def job_from_dict(data: dict, base: Path | None = None, seed: int | None = None, tol: float | None = None,
                  out: Path | None = None, timing: bool = False) -> JobConfig:
    """Validate a job before any computation; unknown or missing tasks are input errors."""
    if "tasks" in data:
        tasks = data["tasks"]
    elif "task" in data:
        tasks = [data["task"]]
    else:
        raise InputError("job has no 'task' or 'tasks' entry")
    if not isinstance(tasks, list) or not all(isinstance(t, str) for t in tasks):
        raise InputError("'tasks' must be a list of task names")
    if not tasks:
        raise InputError("the task list is empty")
    unknown = [t for t in tasks if t not in TASK_RUNNERS]
    if unknown:
        raise InputError(f"unknown task(s) {unknown}; known: {', '.join(TASKS)}")
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise InputError("'params' must be an object")
    operator = parse_operator(data["operator"], base) if data.get("operator") is not None else None
    out_value = out or (Path(data["out"]) if data.get("out") else None)
    return JobConfig(tasks=list(dict.fromkeys(tasks)), operator=operator, params=params,
                     seed=int(seed if seed is not None else data.get("seed", 0)),
                     tol=tol if tol is not None else (float(data["tol"]) if data.get("tol") is not None else None),
                     out=out_value, timing=timing)


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise InputError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc


def _run_task(name: str, cfg: JobConfig) -> TaskResult:
    try:
        return TASK_RUNNERS[name](cfg)
    except QuadratureError as exc:
        # an unreachable tolerance is a failed check, not an input error
        report = SemigroupReport()
        report.record(f"{name}.quadrature", math.inf, cfg.tol, passed=False, operands={"error": str(exc)})
        return TaskResult(report)


def run(cfg: JobConfig, stdout=None) -> int:
    """Execute every task, write artifacts, return the exit code."""
    stdout = stdout or sys.stdout
    workers = min(_threads(), len(cfg.tasks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: _run_task(t, cfg), cfg.tasks))
    else:
        results = [_run_task(t, cfg) for t in cfg.tasks]
    report = SemigroupReport()
    artifacts: dict[str, str] = {}
    for res in results:
        report.extend(res.report)
        artifacts.update(res.artifacts)
    report_json = _dumps({"tasks": cfg.tasks, "seed": cfg.seed, **report.to_json(cfg.timing)})
    if cfg.out is not None:
        atomic_write(cfg.out / "report.json", report_json)
        atomic_write(cfg.out / "report.csv", report.to_csv())
        for name, text in artifacts.items():
            atomic_write(cfg.out / name, text)
    else:
        stdout.write(report_json)
        for name, text in artifacts.items():
            if name.endswith(".csv"):
                stdout.write(f"# {name}\n{text}")
    for rec in report.failures():
        print(f"FAIL {rec.check_id}: residual {rec.residual!r}, tol {rec.tol!r}", file=sys.stderr)
    return 0 if report.passed else 2


# argparse ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1; status 2 is reserved for failed checks."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _global_flags(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--config", type=Path, default=default, help="job JSON file (runs its tasks)")
    parser.add_argument("--seed", type=int, default=default, help="random seed (default 0)")
    parser.add_argument("--tol", type=float, default=default, help="quadrature / check tolerance override")
    parser.add_argument("--out", type=Path, default=default, help="output directory for report and data files")
    parser.add_argument("--timing", action="store_true", default=default, help="include wall times in report JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slicereg", description="Slice-regular operator calculus checks.")
    _global_flags(parser, None)
    # the same flags are accepted after the subcommand
    shared = argparse.ArgumentParser(add_help=False)
    _global_flags(shared, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def with_operator(p, required=True):
        p.add_argument("--operator", "-A", required=required,
                       help="bundled name, JSON file or inline JSON {n, m, entries}")
        p.add_argument("--axis", help="imaginary unit for [r, s] points, as JSON")
        return p

    with_operator(sub.add_parser("spectrum", parents=[shared], help="spherical spectrum as CSV"))
    p = with_operator(sub.add_parser("resolvent", parents=[shared], help="C_q(A) and its slice powers"))
    p.add_argument("--q", required=True, help="cone element as JSON ([r, s], coefficients or element)")
    p.add_argument("--k", type=int, default=1)
    p = with_operator(sub.add_parser("semigroup", parents=[shared], help="T(q) by series and by contour integral"))
    p.add_argument("--q", default="1.0")
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.55 * math.pi)
    p.add_argument("--omega", type=float, default=0.0)
    p = with_operator(sub.add_parser("laplace", parents=[shared], help="Laplace transform against resolvent slice powers"))
    p.add_argument("--q", required=True)
    p.add_argument("--k", type=int, nargs="+", default=[1, 2, 3])
    p = with_operator(sub.add_parser("law", parents=[shared], help="semigroup law for commuting p, q"))
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)
    p = with_operator(sub.add_parser("probe", parents=[shared], help="sectoriality probe"))
    p.add_argument("--omega", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=math.pi / 4)
    p.add_argument("--samples", type=int, default=4)
    p = sub.add_parser("suite", parents=[shared], help="all verification families")
    p.add_argument("--full", action="store_true", help="acceptance-size samples")
    p = with_operator(sub.add_parser("scan", parents=[shared], help="sector scan of ||C_q(A)|| as CSV"))
    p.add_argument("--omega", type=float, default=0.0)
    p.add_argument("--half-angle", type=float, default=0.75 * math.pi)
    p.add_argument("--radii", type=float, nargs="+")
    p.add_argument("--angles", type=int, default=7)
    p = sub.add_parser("run", parents=[shared], help="run a job JSON file")
    p.add_argument("job", type=Path)
    return parser


def _json_param(text: str | None) -> Any:
    if text is None:
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"cannot parse {text!r} as JSON: {exc}") from exc


def config_from_args(args: argparse.Namespace) -> JobConfig:
    if args.command == "run" or (args.command is None and args.config is not None):
        path = args.job if args.command == "run" else args.config
        return job_from_dict(load_job(path), path.parent, args.seed, args.tol, args.out, bool(args.timing))
    if args.command is None:
        raise InputError("give a subcommand or --config")
    params: dict[str, Any] = {}
    if args.config is not None:
        params.update(load_job(args.config).get("params", {}))
    for key in ("q", "p", "axis"):
        value = _json_param(getattr(args, key, None))
        if value is not None:
            params[key] = value
    for key in ("k", "r", "eta", "omega", "delta", "samples", "half_angle", "angles", "radii", "full"):
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    command = args.command
    data = {"task": command, "params": params}
    operator = getattr(args, "operator", None)
    if operator is not None:
        data["operator"] = operator if not operator.lstrip().startswith("{") else _json_param(operator)
    return job_from_dict(data, Path.cwd(), args.seed, args.tol, args.out, bool(args.timing))


INPUT_ERRORS = (InputError, OperatorError, AlgebraError, StemError, ContourError, SingularDelta,
                KeyError, TypeError, ValueError, OSError)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return run(cfg)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
