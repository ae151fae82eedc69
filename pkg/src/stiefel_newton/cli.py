"""``stiefel-newton`` command line front end.

Problem files are JSON documents::

    {
      "problem": "brockett",
      "matrices": {"A": {"diag": [1, 2, 3, 4]}, "N": {"diag": [1, 2]}},
      "initial": {"random": 0},
      "options": {"max_iters": 100, "grad_tol": 1e-10},
      "output": {"classify": true}
    }

Matrices are row-major nested lists or ``{"diag": [...]}``. The initial point
is ``{"random": seed}``, ``{"matrix": [[...]]}`` or ``{"census_index": k}``
(Brockett only). ``problem`` is one of procrustes (A, B), penrose (A, B, C),
brockett (A, N) or custom-expression (numpy expressions in ``U`` and the
named matrices, see README).

Reports go to stdout as JSON, floats written with 17 significant digits.
Exit codes: 0 success, 1 non-convergence or failed checks, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import costs
from .errors import DimensionError, ParseError, StiefelError
from .frame import build_frame
from .newton import NewtonOptions, Status, enumerate_brockett_critical_points, newton_solve
from .optimality import (
    assemble_frame_hessian,
    classify_critical_point,
    embedded_gradient,
    is_critical,
    sigma_matrix,
)
from .oracle import audit_frame, check_model, compare, fd_riemannian_quadform
from .stiefel import make_stiefel_point, random_stiefel

MAX_DIM = 2000
PROBLEMS = {
    "procrustes": ("A", "B"),
    "penrose": ("A", "B", "C"),
    "brockett": ("A", "N"),
    "custom-expression": (),
}
COMMANDS = ("solve", "classify", "enumerate", "check")


@dataclass
class ProblemSpec:
    problem: str
    matrices: dict
    initial: dict
    options: NewtonOptions
    output: dict = field(default_factory=dict)
    expression: dict = field(default_factory=dict)
    source: str = ""

    def to_dict(self):
        return {
            "problem": self.problem,
            "matrices": {k: v.tolist() for k, v in self.matrices.items()},
            "initial": {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.initial.items()},
            "options": self.options.to_dict(),
            "output": dict(self.output),
            **({"expression": dict(self.expression)} if self.expression else {}),
        }


def _parse_matrix(name, raw):
    if isinstance(raw, dict):
        if set(raw) != {"diag"}:
            raise ParseError(f"matrices.{name}: object form must be {{\"diag\": [...]}}, got keys {sorted(raw)}")
        try:
            M = np.diag(np.asarray(raw["diag"], dtype=float))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"matrices.{name}.diag: {exc}") from None
    else:
        try:
            M = np.asarray(raw, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"matrices.{name}: not a numeric matrix ({exc})") from None
        if M.ndim == 1:
            M = M.reshape(-1, 1)
    if M.ndim != 2:
        raise ParseError(f"matrices.{name}: expected a 2-D array")
    if max(M.shape) > MAX_DIM:
        raise DimensionError(f"matrices.{name}: dimension {max(M.shape)} exceeds the limit {MAX_DIM}")
    if not np.all(np.isfinite(M)):
        raise ParseError(f"matrices.{name}: non-finite entries")
    return M


def spec_from_dict(doc: dict, source: str = "") -> ProblemSpec:
    if not isinstance(doc, dict):
        raise ParseError("top level must be a JSON object")
    problem = doc.get("problem")
    if problem not in PROBLEMS:
        raise ParseError(f"problem: expected one of {sorted(PROBLEMS)}, got {problem!r}")
    raw = doc.get("matrices", {})
    if not isinstance(raw, dict):
        raise ParseError("matrices: expected an object mapping names to matrices")
    matrices = {name: _parse_matrix(name, val) for name, val in raw.items()}
    missing = [name for name in PROBLEMS[problem] if name not in matrices]
    if missing:
        raise DimensionError(f"problem {problem!r} is missing matrices: {', '.join(missing)}")

    initial = doc.get("initial", {"random": 0})
    if not isinstance(initial, dict) or len(initial) != 1:
        raise ParseError("initial: expected exactly one of random / matrix / census_index")
    (kind, val), = initial.items()
    if kind == "random":
        if not isinstance(val, int) or isinstance(val, bool) or val < 0:
            raise ParseError("initial.random: seed must be a nonnegative integer")
    elif kind == "matrix":
        val = _parse_matrix("initial", val)
    elif kind == "census_index":
        if problem != "brockett":
            raise ParseError("initial.census_index is only available for brockett problems")
        if not isinstance(val, int) or val < 0:
            raise ParseError("initial.census_index: expected a nonnegative integer")
    else:
        raise ParseError(f"initial: unknown kind {kind!r}")
    initial = {kind: val}

    raw_opts = doc.get("options", {})
    known = {f.name for f in fields(NewtonOptions)}
    unknown = set(raw_opts) - known
    if unknown:
        raise ParseError(f"options: unknown fields {sorted(unknown)}")
    try:
        options = NewtonOptions(**raw_opts)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"options: {exc}") from None

    output = {"classify": True, **doc.get("output", {})}
    expression = doc.get("expression", {}) if problem == "custom-expression" else {}
    if problem == "custom-expression":
        for key in ("value", "gradient", "shape"):
            if key not in expression:
                raise ParseError(f"expression.{key}: required for custom-expression problems")
    spec = ProblemSpec(problem, matrices, initial, options, output, expression, source)
    build_model(spec)
    return spec


def parse_problem_spec(path) -> ProblemSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return spec_from_dict(doc, source=str(path))


_SAFE_NAMES = {
    name: getattr(np, name)
    for name in ("trace", "sum", "diag", "eye", "exp", "log", "sin", "cos", "sqrt", "abs", "kron", "outer", "dot")
}


def _expression_model(spec: ProblemSpec):
    ex = spec.expression
    env = {"np": np, **_SAFE_NAMES, **spec.matrices}
    try:
        value_code = compile(ex["value"], "<expression.value>", "eval")
        grad_code = compile(ex["gradient"], "<expression.gradient>", "eval")
    except SyntaxError as exc:
        raise ParseError(f"expression: {exc.msg} in {exc.text!r}") from None

    def evaluate(code, field, U):
        try:
            return eval(code, {"__builtins__": {}}, {**env, "U": U})
        except Exception as exc:
            raise ParseError(f"expression.{field}: {type(exc).__name__}: {exc}") from None

    def value_fn(U):
        return evaluate(value_code, "value", U)

    def gradient_fn(U):
        return evaluate(grad_code, "gradient", U)

    shape = tuple(ex["shape"])
    return costs.custom_model(value_fn, gradient_fn, shape=shape, name="custom-expression")


def build_model(spec: ProblemSpec):
    M = spec.matrices
    if spec.problem == "procrustes":
        return costs.procrustes_model(M["A"], M["B"])
    if spec.problem == "penrose":
        return costs.penrose_model(M["A"], M["B"], M["C"])
    if spec.problem == "brockett":
        return costs.brockett_model(M["A"], M["N"])
    return _expression_model(spec)


def initial_point(spec: ProblemSpec, model, seed=None):
    n, p = model.shape
    (kind, val), = spec.initial.items()
    if kind == "random":
        return random_stiefel(n, p, seed=val if seed is None else seed)
    if kind == "matrix":
        if val.shape != (n, p):
            raise DimensionError(f"initial matrix is {val.shape}, problem needs {(n, p)}")
        return make_stiefel_point(val)
    census = enumerate_brockett_critical_points(model)
    if val >= len(census):
        raise DimensionError(f"census_index {val} out of range (census has {len(census)} points)")
    return census[val].point


# -- serialization -------------------------------------------------------


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if all(ch not in s for ch in ".eEn"):
        s += ".0"
    return s


def dumps(obj, indent=None, _level=0) -> str:
    """JSON text with floats written at 17 significant digits."""
    nl = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    sep = ", " if indent is None else ","
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{nl}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{nl}{dumps(v, indent, _level + 1)}" for v in obj]
        return "[" + sep.join(items) + end + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


# -- commands ------------------------------------------------------------


def _point_summary(model, P, tol):
    crit = is_critical(model, P, tol)
    return {
        "point": P.U.tolist(),
        "value": model.value(P.U),
        "criticality": crit.to_dict(),
    }


def _cmd_solve(spec, model, args):
    opts = spec.options
    if args.tol is not None:
        opts = replace(opts, grad_tol=args.tol)
    if args.max_iters is not None:
        opts = replace(opts, max_iters=args.max_iters)
    if args.pure_newton:
        opts = replace(opts, fallback=False)
    if args.seed is not None:
        opts = replace(opts, seed=args.seed)
    P0 = initial_point(spec, model, args.seed)
    res = newton_solve(model, P0, opts, classify=bool(spec.output.get("classify", True)))
    result = {
        "status": res.status.value,
        "message": res.message,
        "iterations": res.iterations,
        "point": res.point.U.tolist(),
        "value": res.value,
        "criticality": res.criticality.to_dict(),
        "classification": res.classification.to_dict() if res.classification else None,
    }
    if spec.problem == "brockett":
        census = enumerate_brockett_critical_points(model)
        dists = [float(np.linalg.norm(e.point.U - res.point.U)) for e in census]
        i = int(np.argmin(dists))
        result["nearest_census"] = {"index": i, "distance": dists[i], "value": census[i].value}
    trace = [r.to_dict() for r in res.trace]
    code = 0 if res.status == Status.CONVERGED else 1
    return code, result, trace, {"options": opts.to_dict()}


def _cmd_classify(spec, model, args):
    tol = args.tol if args.tol is not None else 1e-8
    P = initial_point(spec, model, args.seed)
    cls = classify_critical_point(model, P, tol_crit=tol)
    result = _point_summary(model, P, tol)
    result["sigma"] = sigma_matrix(model, P).tolist()
    result["classification"] = cls.to_dict()
    return 0, result, None, {"tol_crit": tol}


def _cmd_enumerate(spec, model, args):
    if spec.problem != "brockett":
        raise ParseError("enumerate is only defined for brockett problems")
    tol = args.tol if args.tol is not None else 1e-10
    census = enumerate_brockett_critical_points(model, tol=tol)
    rows = [
        {
            "index": k,
            "columns": [int(i) + 1 for i in e.indices],
            "signs": list(e.signs),
            "value": e.value,
            "kind": e.classification.kind.value,
            "eigenvalues": [float(x) for x in e.classification.eigenvalues],
        }
        for k, e in enumerate(census)
    ]
    return 0, {"count": len(rows), "points": rows}, None, {"tol": tol}


def _cmd_check(spec, model, args):
    seed = args.seed if args.seed is not None else 0
    reports = list(check_model(model, n_probes=10, seed=seed))
    P = initial_point(spec, model, args.seed)
    F = build_frame(P)
    reports += audit_frame(F)
    dG = embedded_gradient(model, P)
    g = model.gradient(P.U)
    for k in range(F.dim):
        reports.append(
            compare(
                f"frame coordinate {k} equals <grad, D>",
                dG.inner(F.tangent(k)),
                float(np.sum(g * F.vectors[k])),
                1e-12,
            )
        )
    crit = is_critical(model, P, 1e-8)
    if crit.is_critical:
        FH = assemble_frame_hessian(model, P, F)
        for k in range(F.dim):
            reports.append(
                compare(
                    f"Riemannian Hessian along frame vector {k} vs retraction curve",
                    FH.H[k, k],
                    fd_riemannian_quadform(model, P, F.vectors[k]),
                    1e-4,
                )
            )
    passed = all(r.passed for r in reports)
    result = {"passed": passed, "checks": [r.to_dict() for r in reports]}
    return (0 if passed else 1), result, None, {"seed": seed}


HANDLERS = {"solve": _cmd_solve, "classify": _cmd_classify, "enumerate": _cmd_enumerate, "check": _cmd_check}

HINTS = {
    "DimensionError": "check that the named matrices have compatible shapes",
    "ParseError": "fix the problem file at the indicated field",
    "BadWeights": "N must be diagonal with 0 <= mu_1 <= ... <= mu_p",
    "NotSymmetric": "A must be symmetric for brockett problems",
    "NotCritical": "classify needs a critical point; run `solve` first or use a census_index",
    "ConstraintViolation": "the initial matrix must have orthonormal columns",
    "DegenerateSpectrum": "enumeration needs A with distinct eigenvalues",
    "ValidationFailure": "the expression gradient does not match finite differences of the value",
}


def run(command: str, spec: ProblemSpec, args=None):
    """Execute ``command`` on ``spec``; returns ``(exit_code, report_dict)``."""
    args = args or argparse.Namespace(seed=None, tol=None, max_iters=None, pure_newton=False, trace=False)
    if command not in HANDLERS:
        raise ValueError(f"unknown command {command!r}")
    t0 = time.perf_counter()
    report = {"command": command, "spec": spec.to_dict()}
    try:
        model = build_model(spec)
        code, result, trace, resolved = HANDLERS[command](spec, model, args)
    except StiefelError as exc:
        name = type(exc).__name__
        report["error"] = {"type": name, "message": str(exc), "hint": HINTS.get(name, "")}
        report["timing"] = {"seconds": time.perf_counter() - t0}
        return 2, report
    report["resolved"] = resolved
    report["result"] = result
    if trace is not None and getattr(args, "trace", False):
        report["trace"] = trace
    report["timing"] = {"seconds": time.perf_counter() - t0}
    return code, report


def render_pretty(report) -> str:
    lines = [f"command: {report['command']}  problem: {report['spec']['problem']}"]
    if "error" in report:
        err = report["error"]
        lines.append(f"error: {err['type']}: {err['message']}")
        if err["hint"]:
            lines.append(f"hint: {err['hint']}")
        return "\n".join(lines)
    res = report["result"]
    cmd = report["command"]
    if cmd == "enumerate":
        lines.append(f"{res['count']} critical points")
        lines.append(f"{'#':>3}  {'columns':<10} {'signs':<10} {'value':>10}  kind")
        for row in res["points"]:
            cols = ",".join(f"e{i}" for i in row["columns"])
            signs = ",".join("+" if s > 0 else "-" for s in row["signs"])
            lines.append(f"{row['index']:>3}  {cols:<10} {signs:<10} {row['value']:>10.6g}  {row['kind']}")
    elif cmd == "check":
        lines.append("all checks passed" if res["passed"] else "SOME CHECKS FAILED")
        for c in res["checks"]:
            status = "PASS" if c["passed"] else "FAIL"
            lines.append(f"[{status}] {c['quantity']}: rel_err={c['rel_error']:.3e} (tol {c['tol']:.1e})")
    else:
        if cmd == "solve":
            lines.append(f"status: {res['status']} after {res['iterations']} iterations")
        lines.append(f"value: {res['value']:.12g}")
        crit = res["criticality"]
        lines.append(
            f"|dG|_F = {crit['embedded_grad_norm']:.3e}  sym = {crit['sym_residual']:.3e}  "
            f"range = {crit['range_residual']:.3e}"
        )
        cls = res.get("classification")
        if cls:
            ev = ", ".join(f"{x:.6g}" for x in cls["eigenvalues"])
            lines.append(f"classification: {cls['kind']}  eigenvalues: [{ev}]")
        if "nearest_census" in res:
            nc = res["nearest_census"]
            lines.append(f"nearest census point #{nc['index']} (distance {nc['distance']:.2e}, value {nc['value']:.6g})")
        lines.append("point:")
        for row in res["point"]:
            lines.append("  " + "  ".join(f"{x: .10f}" for x in row))
        for rec in report.get("trace", []):
            lines.append(
                f"  k={rec['k']:>3} G={rec['cost']:.12g} |dG|={rec['grad_norm']:.3e} step={rec['step']}"
                f" backtracks={rec['backtracks']}"
            )
    lines.append(f"time: {report['timing']['seconds']:.3f} s")
    return "\n".join(lines)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stiefel-newton", description="Newton optimization and critical-point analysis on Stiefel manifolds"
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--spec", required=True, help="problem file (JSON)")
    parser.add_argument("--pretty", action="store_true", help="human-readable output instead of JSON")
    parser.add_argument("--trace", action="store_true", help="include the per-iteration trace")
    parser.add_argument("--seed", type=int, default=None, help="overrides the random initial-point seed")
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--max-iters", type=int, default=None)
    parser.add_argument("--pure-newton", action="store_true", help="disable the gradient fallback")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return 2
    try:
        spec = parse_problem_spec(args.spec)
    except StiefelError as exc:
        name = type(exc).__name__
        print(f"error: {name}: {exc}", file=sys.stderr)
        if HINTS.get(name):
            print(f"hint: {HINTS[name]}", file=sys.stderr)
        return 2
    code, report = run(args.command, spec, args)
    if args.pretty:
        print(render_pretty(report))
    else:
        print(dumps(report, indent=2))
    return code


if __name__ == "__main__":
    sys.exit(main())
