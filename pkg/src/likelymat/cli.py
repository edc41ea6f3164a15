"""Command-line front end: read a problem file, classify, solve, count, verify.

Problem files are JSON documents::

    {
      "shape": {"rows": 10, "cols": 10},
      "row_sums": {"kind": "upper", "values": [20, 20, 24, ...]},
      "col_sums": {"kind": "equal", "sparse": [{"index": 0, "value": 5}]},
      "total": {"kind": "equal", "value": 275},
      "element_bounds": [{"i": 0, "j": 1, "ub": 2.5}],
      "fixed_blocks": [{"indices": [0, 3], "matrix": [[0, 1], [1, 0]]}],
      "symmetric": false
    }

All keys except ``shape`` are optional; unknown keys are rejected.  A
``fixed_blocks`` object ``{"diagonal_prefix": m, "values": [...]}`` pins the
first m diagonal entries.  3-D specs give ``slices`` in the shape and nested
per-slice value lists.  Results are emitted as JSON (or CSV for the bare
matrix) with every numeric field in shortest round-trip decimal form.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .constraints import (
    ElementBound,
    FixedBlock,
    MarginalConstraint,
    ProblemSpec,
    Shape,
    SolverCase,
    TotalConstraint,
    classify,
    consistency_check_blocks,
    validate_spec,
)
from .counting import exact_realizations, count_feasible_row_bounded, log10_realizations
from .errors import LikelymatError
from .oracle import brute_force_most_likely, numeric_maxent, verify_kkt
from .solution import Solution, TensorSolution
from .solve import solve
from .symmetric import RootProblem, series_approx_xi

__all__ = ["main", "load_problem"]


class UsageError(Exception):
    """Malformed input document or flags (exit code 2)."""


# ----------------------------------------------------------------------
# Problem-file parsing
# ----------------------------------------------------------------------

_TOP_KEYS = {
    "shape", "row_sums", "col_sums", "total", "element_bounds",
    "fixed_blocks", "symmetric",
}


def _require_keys(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise UsageError(f"unknown keys {sorted(unknown)} in {where}")


def _parse_marginals(doc, axis: str, shape: Shape) -> list[MarginalConstraint]:
    _require_keys(doc, {"kind", "values", "sparse"}, f"{axis}_sums")
    kind = doc.get("kind")
    if kind not in ("equal", "upper"):
        raise UsageError(f"{axis}_sums.kind must be 'equal' or 'upper'")
    out: list[MarginalConstraint] = []
    if "values" in doc:
        values = doc["values"]
        if shape.is_3d:
            for i, per_slice in enumerate(values):
                for k, v in enumerate(per_slice):
                    if v is not None:
                        out.append(MarginalConstraint(axis, i, kind, float(v), k))
        else:
            for i, v in enumerate(values):
                if v is not None:
                    out.append(MarginalConstraint(axis, i, kind, float(v)))
    elif "sparse" in doc:
        for entry in doc["sparse"]:
            _require_keys(entry, {"index", "value", "slice"}, f"{axis}_sums.sparse")
            out.append(
                MarginalConstraint(
                    axis, int(entry["index"]), kind, float(entry["value"]),
                    int(entry["slice"]) if "slice" in entry else None,
                )
            )
    else:
        raise UsageError(f"{axis}_sums needs 'values' or 'sparse'")
    return out


def _parse_blocks(doc, shape: Shape) -> list[FixedBlock]:
    if isinstance(doc, dict):
        _require_keys(doc, {"diagonal_prefix", "values"}, "fixed_blocks")
        m = int(doc["diagonal_prefix"])
        values = doc.get("values", 0.0)
        if not isinstance(values, list):
            values = [values] * m
        if len(values) != m:
            raise UsageError("diagonal_prefix and values length disagree")
        return [
            FixedBlock((i,), ((float(v),),)) for i, v in enumerate(values)
        ]
    out = []
    for entry in doc:
        _require_keys(entry, {"indices", "matrix"}, "fixed_blocks[]")
        out.append(
            FixedBlock(
                tuple(int(i) for i in entry["indices"]),
                tuple(tuple(float(v) for v in row) for row in entry["matrix"]),
            )
        )
    return out


def load_problem(doc: dict) -> ProblemSpec:
    """Build a (validated) spec from a parsed problem document."""
    if not isinstance(doc, dict) or "shape" not in doc:
        raise UsageError("problem document must be an object with a 'shape' key")
    _require_keys(doc, _TOP_KEYS, "problem document")
    sh = doc["shape"]
    _require_keys(sh, {"rows", "cols", "slices"}, "shape")
    shape = Shape(
        int(sh["rows"]), int(sh["cols"]),
        int(sh["slices"]) if sh.get("slices") is not None else None,
    )
    marginals: list[MarginalConstraint] = []
    if "row_sums" in doc:
        marginals += _parse_marginals(doc["row_sums"], "row", shape)
    if "col_sums" in doc:
        marginals += _parse_marginals(doc["col_sums"], "col", shape)
    total = None
    if "total" in doc:
        _require_keys(doc["total"], {"kind", "value"}, "total")
        total = TotalConstraint(doc["total"]["kind"], float(doc["total"]["value"]))
    elements = [
        ElementBound(int(e["i"]), int(e["j"]), float(e["ub"]))
        for e in doc.get("element_bounds", ())
    ]
    for e in doc.get("element_bounds", ()):
        _require_keys(e, {"i", "j", "ub"}, "element_bounds[]")
    blocks = _parse_blocks(doc.get("fixed_blocks", []), shape)
    spec = ProblemSpec(
        shape=shape,
        marginals=tuple(marginals),
        total=total,
        element_bounds=tuple(elements),
        fixed_blocks=tuple(blocks),
        symmetric=bool(doc.get("symmetric", False)),
    )
    return validate_spec(spec)


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise UsageError(f"{path} is not valid JSON: {e}") from e


# ----------------------------------------------------------------------
# Result emission
# ----------------------------------------------------------------------


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _residuals(spec: ProblemSpec, X: np.ndarray) -> dict:
    eq_res, bound_res = 0.0, 0.0
    for c in spec.marginals:
        ax = 1 if c.axis == "row" else 0
        if spec.shape.is_3d:
            val = float(X[:, :, c.slice_index].sum(axis=ax)[c.index])
        else:
            val = float(X.sum(axis=ax)[c.index])
        scale = max(1.0, abs(c.value))
        if c.kind == "equal":
            eq_res = max(eq_res, abs(val - c.value) / scale)
        else:
            bound_res = max(bound_res, (val - c.value) / scale)
    if spec.total is not None:
        val = float(X.sum())
        scale = max(1.0, abs(spec.total.value))
        if spec.total.kind == "equal":
            eq_res = max(eq_res, abs(val - spec.total.value) / scale)
        else:
            bound_res = max(bound_res, (val - spec.total.value) / scale)
    for e in spec.element_bounds:
        bound_res = max(bound_res, (float(X[e.i, e.j]) - e.ub) / max(1.0, e.ub))
    return {"max_equality": eq_res, "max_bound_violation": max(0.0, bound_res)}


def _series_payload(sol: Solution, spec: ProblemSpec, order: int):
    if sol.lam is None:
        return None
    kinds = spec.axis_kinds("row")
    u = np.array(spec.axis_values("row", kind=next(iter(kinds))))
    s = float(u.sum())
    fixed = {b.index_set[0]: float(b.matrix[0][0]) for b in spec.fixed_blocks
             if len(b.index_set) == 1}
    if len(fixed) != len(spec.fixed_blocks):
        return None
    r = [(u[i] - fixed.get(i, 0.0)) / s if i in fixed else u[i] / s
         for i in range(u.size)]
    r_sorted = sorted(range(u.size), key=lambda i: i not in fixed)
    problem = RootProblem(
        r=tuple(r[i] for i in r_sorted), m=len(fixed)
    )
    xi0 = 9.0 / (4.0 * problem.sigma)
    state = series_approx_xi(problem, xi0, order)
    return {
        "order": order,
        "xi0": xi0,
        "delta": state.delta,
        "terms": list(state.terms[: order + 1]),
        "value": state.value,
    }


def _solution_payload(sol, spec: ProblemSpec, series_order: int | None) -> dict:
    out: dict = {"case": sol.case.value, "total": _jsonable(sol.total)}
    if isinstance(sol, TensorSolution):
        K = sol.values.shape[2]
        out["slices"] = [sol.values[:, :, k].tolist() for k in range(K)]
        out["lambda"] = [_jsonable(v) for v in sol.lam]
        out["xi"] = [_jsonable(v) for v in sol.xi]
        X = sol.values
    else:
        out["matrix"] = sol.matrix.tolist()
        out["k"] = sol.k
        out["lambda"] = _jsonable(sol.lam)
        out["xi"] = _jsonable(sol.xi)
        multipliers = {}
        if sol.row_multipliers is not None:
            multipliers["row"] = _jsonable(sol.row_multipliers)
        if sol.col_multipliers is not None:
            multipliers["col"] = _jsonable(sol.col_multipliers)
        if multipliers:
            out["multipliers"] = multipliers
        X = sol.matrix
    out["log10_realizations"] = log10_realizations(X).log10
    out["residuals"] = _residuals(spec, X)
    if sol.notes:
        out["notes"] = list(sol.notes)
    if series_order is not None and isinstance(sol, Solution):
        try:
            series = _series_payload(sol, spec, series_order)
        except LikelymatError:
            series = None  # expansion point inadmissible; solve output stands
        if series is not None:
            out["series"] = series
    return out


def _emit(payload, args) -> None:
    if getattr(args, "format", "json") == "csv":
        if "matrix" in payload:
            sheets = [payload["matrix"]]
        elif "slices" in payload:
            sheets = payload["slices"]
        else:
            raise UsageError("csv format applies only to solve results")
        chunks = []
        for sheet in sheets:
            chunks.append("\n".join(",".join(repr(float(v)) for v in row) for row in sheet))
        text = ("\n\n").join(chunks) + "\n"
    else:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------


def _cmd_solve(args) -> int:
    spec = load_problem(_read_json(args.file))
    sol = solve(spec, tol=args.tol)
    _emit(_solution_payload(sol, spec, args.series_order), args)
    return 0


def _cmd_check(args) -> int:
    spec = load_problem(_read_json(args.file))
    case = classify(spec)
    payload: dict = {"valid": True, "case": case.value}
    if spec.fixed_blocks:
        kinds = spec.axis_kinds("row")
        u = spec.axis_values("row", kind=next(iter(kinds)) if kinds else None)
        s = float(sum(u))
        report = consistency_check_blocks(u, spec.fixed_blocks, s)
        payload["consistency"] = {
            "ok": report.ok,
            "violations": [
                {"indices": list(v[0]), "outgoing": v[1], "limit": v[2]}
                for v in report.violations
            ],
        }
        if not report.ok:
            _emit(payload, args)
            indices = list(report.first_violation[0])
            print(f"consistency violation at index set {indices}", file=sys.stderr)
            return 1
    _emit(payload, args)
    return 0


def _cmd_count(args) -> int:
    doc = _read_json(args.file)
    if isinstance(doc, dict) and "shape" in doc:
        spec = load_problem(doc)
        kinds = spec.axis_kinds("row")
        if kinds and spec.axis_complete("row") and not spec.has_axis("col") \
                and spec.total is None and not spec.element_bounds \
                and not spec.fixed_blocks and not spec.shape.is_3d:
            u = spec.axis_values("row")
            m = spec.shape.cols
            payload = {
                "feasible_saturated": count_feasible_row_bounded(u, m, True).value,
            }
            if kinds == {"upper"}:
                payload["feasible_under_bounds"] = count_feasible_row_bounded(
                    u, m, False
                ).value
            _emit(payload, args)
            return 0
        raise UsageError("count on a problem file needs a row-sums-only spec")
    if isinstance(doc, dict):
        matrix = doc["slices"] if "slices" in doc else doc["matrix"]
    else:
        matrix = doc
    X = np.asarray(matrix, dtype=float)
    payload = {"log10_realizations": log10_realizations(X).log10, "total": float(X.sum())}
    if args.exact or np.allclose(X, np.rint(X), rtol=0, atol=1e-9):
        payload["exact"] = exact_realizations(X).value
    _emit(payload, args)
    return 0


_H_CASES = {
    SolverCase.GRAVITY_PARTIAL_COLS,
    SolverCase.TOTAL_ROW_BOUNDS,
    SolverCase.SYM_TOTAL_ROW_COL_BOUNDS,
    SolverCase.SYM_3D_FIXED_DIAGONAL,
}


def _oracle_objective(spec: ProblemSpec, case: SolverCase) -> str:
    if case in _H_CASES:
        return "H"
    if case in (SolverCase.SYM_FIXED_DIAGONAL, SolverCase.SYM_BLOCK_DIAGONAL):
        return "H" if spec.axis_kinds("row") == {"equal"} else "G"
    return "G"


def _cmd_oracle(args) -> int:
    spec = load_problem(_read_json(args.file))
    case = classify(spec)
    sol = solve(spec, tol=args.tol)
    objective = _oracle_objective(spec, case)
    result = numeric_maxent(spec, objective, tol=min(1e-9, args.tol * 1e3))
    analytic = sol.values if isinstance(sol, TensorSolution) else sol.matrix
    gap = float(np.abs(analytic - result.matrix).max())
    payload = {
        "case": case.value,
        "objective": objective,
        "linf_gap": gap,
        "oracle_objective_value": result.objective_value,
        "converged": result.converged,
        "iterations": result.iterations,
        "residual": result.residual,
    }
    if isinstance(sol, Solution):
        report = verify_kkt(sol, spec)
        payload["kkt_ok"] = report.ok
        payload["kkt_violations"] = list(report.violations)
    _emit(payload, args)
    return 0


def _cmd_brute(args) -> int:
    spec = load_problem(_read_json(args.file))
    result = brute_force_most_likely(spec)
    payload = {
        "n_feasible": result.n_feasible,
        "max_realizations": result.count.value,
        "argmax": [M.tolist() for M in result.argmax],
    }
    _emit(payload, args)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="likelymat",
        description="Most-likely matrices from sums, bounds, and fixed blocks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, extra in (
        ("solve", _cmd_solve, "solve a problem file and emit the matrix"),
        ("count", _cmd_count, "realization counts for a matrix or problem file"),
        ("check", _cmd_check, "validate a problem file and run consistency checks"),
        ("oracle", _cmd_oracle, "compare the closed form against the numerical optimizer"),
        ("brute", _cmd_brute, "enumerate small integer instances exhaustively"),
    ):
        p = sub.add_parser(name, help=extra)
        p.add_argument("file", help="path to a JSON problem (or matrix) document")
        p.add_argument("--out", default=None, help="write the result here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--tol", type=float, default=1e-12, help="numeric tolerance")
        p.add_argument(
            "--series-order", type=int, choices=(0, 1, 2), default=None,
            help="also report the power-series root approximation of this order",
        )
        p.add_argument(
            "--exact", action="store_true",
            help="force exact big-integer counting where applicable",
        )
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except LikelymatError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
