"""Independent verification: numerical optimization, enumeration, KKT checks.

Nothing here reuses the closed forms.  :func:`numeric_maxent` maximizes the
entropy (or, when the total is unknown, the entropy-difference objective)
over the problem's linear constraints by solving the smooth dual with L-BFGS-B
plus a projected-Newton polish; :func:`brute_force_most_likely` enumerates
small integer instances outright; :func:`verify_kkt` checks feasibility,
product form, multiplier ranges, and complementary slackness of any solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize

from .constraints import REL_TOL, ProblemSpec, validate_spec
from .counting import ExactCount
from .errors import Infeasible, LikelymatError, NotConverged, SearchSpaceTooLarge
from .solution import Solution, TensorSolution

__all__ = [
    "OracleResult",
    "BruteForceResult",
    "KktReport",
    "numeric_maxent",
    "brute_force_most_likely",
    "verify_kkt",
    "entropy",
    "entropy_difference",
]

# The dual parameterization keeps every free cell strictly positive; final
# output snaps entries below this threshold to exact zeros.
ZERO_REPORT = 1e-9


def entropy(x) -> float:
    """Combinatorial entropy -sum(x ln x), with 0 ln 0 = 0."""
    v = np.asarray(x, dtype=float).ravel()
    pos = v[v > 0]
    return float(-(pos * np.log(pos)).sum())


def entropy_difference(x) -> float:
    """(sum x) ln (sum x) - sum(x ln x): the objective when the total is free."""
    v = np.asarray(x, dtype=float).ravel()
    s = float(v.sum())
    return (s * math.log(s) if s > 0 else 0.0) + entropy(v)


@dataclass(frozen=True)
class OracleResult:
    matrix: np.ndarray
    objective: str
    objective_value: float
    converged: bool
    iterations: int
    residual: float


@dataclass(frozen=True)
class BruteForceResult:
    """All most-likely integer matrices, their shared count, and the number
    of feasible matrices enumerated."""

    argmax: tuple[np.ndarray, ...]
    count: ExactCount
    n_feasible: int


@dataclass(frozen=True)
class KktReport:
    feasible: bool
    product_form: bool
    multiplier_range: bool
    complementary_slackness: bool
    max_residual: float
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return (
            self.feasible
            and self.product_form
            and self.multiplier_range
            and self.complementary_slackness
        )


# ----------------------------------------------------------------------
# Constraint extraction shared by the optimizer and the enumerator
# ----------------------------------------------------------------------


@dataclass
class _Program:
    shape: tuple[int, ...]
    cells: list[tuple[int, ...]]  # free cells, row-major
    index: dict[tuple[int, ...], int]
    fixed: dict[tuple[int, ...], float]
    eq: list[tuple[list[int], float, str]]
    ub: list[tuple[list[int], float, str]]

    @property
    def n(self) -> int:
        return len(self.cells)

    def assemble(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.shape)
        for cell, v in self.fixed.items():
            out[cell] = v
        for cell, v in zip(self.cells, x):
            out[cell] = v
        return out


def _build_program(spec: ProblemSpec) -> _Program:
    spec = validate_spec(spec)
    sh = spec.shape
    shape = (sh.rows, sh.cols, sh.slices) if sh.is_3d else (sh.rows, sh.cols)

    fixed: dict[tuple[int, ...], float] = {}
    if sh.is_3d:
        for i in range(sh.rows):
            for k in range(sh.slices):
                fixed[(i, i, k)] = 0.0
    for b in spec.fixed_blocks:
        if sh.is_3d:
            continue  # only the zero diagonal, already pinned above
        for a, i in enumerate(b.index_set):
            for c, j in enumerate(b.index_set):
                fixed[(i, j)] = float(b.matrix[a][c])
    # Zero element caps pin the cell outright; keeping them as inequality
    # constraints would push the dual to infinity.
    for e in spec.element_bounds:
        if e.ub == 0.0:
            if fixed.get((e.i, e.j), 0.0) != 0.0:
                raise Infeasible(f"cell ({e.i},{e.j}) is fixed above its zero cap")
            fixed[(e.i, e.j)] = 0.0

    cells = [c for c in np.ndindex(*shape) if c not in fixed]
    index = {c: i for i, c in enumerate(cells)}

    eq: list[tuple[list[int], float, str]] = []
    ub: list[tuple[list[int], float, str]] = []

    def _add(kind: str, members: list[int], target: float, label: str) -> None:
        if target < -REL_TOL:
            raise Infeasible(f"{label}: fixed values exceed the stated sum")
        target = max(target, 0.0)
        (eq if kind == "equal" else ub).append((members, target, label))

    def _axis_cells(axis: str, idx: int, slice_idx) -> tuple[list[int], float]:
        members, pinned = [], 0.0
        for cell in np.ndindex(*shape):
            i, j = cell[0], cell[1]
            if sh.is_3d and cell[2] != slice_idx:
                continue
            if (axis == "row" and i != idx) or (axis == "col" and j != idx):
                continue
            if cell in fixed:
                pinned += fixed[cell]
            else:
                members.append(index[cell])
        return members, pinned

    stated = {(c.axis, c.index, c.slice_index) for c in spec.marginals}
    for c in spec.marginals:
        members, pinned = _axis_cells(c.axis, c.index, c.slice_index)
        _add(c.kind, members, c.value - pinned, f"{c.axis} {c.index}/{c.slice_index}")
        if spec.symmetric:
            other = "col" if c.axis == "row" else "row"
            if (other, c.index, c.slice_index) not in stated:
                members, pinned = _axis_cells(other, c.index, c.slice_index)
                _add(c.kind, members, c.value - pinned, f"{other} {c.index}/{c.slice_index} (mirror)")

    if spec.total is not None:
        pinned = sum(fixed.values())
        _add(
            spec.total.kind,
            list(range(len(cells))),
            spec.total.value - pinned,
            "total",
        )

    for e in spec.element_bounds:
        if e.ub > 0.0 and math.isfinite(e.ub) and (e.i, e.j) in index:
            ub.append(([index[(e.i, e.j)]], e.ub, f"element ({e.i},{e.j})"))

    return _Program(shape, cells, index, fixed, eq, ub)


# ----------------------------------------------------------------------
# Dual entropy maximization
# ----------------------------------------------------------------------


def _dual_solve(program: _Program, extra_eq=None, theta0=None, tol: float = 1e-9):
    """Maximize entropy over the program's constraints via the dual.

    The stationary primal point is x_c = exp(-1 - sum of multipliers over
    constraints containing c); the dual is smooth and convex with bound
    constraints only (inequality multipliers stay nonnegative), solved by
    L-BFGS-B and polished with a projected Newton step.  Returns the primal
    vector, the multipliers, the KKT residual, and the iteration count.
    """
    eq = program.eq + (extra_eq or [])
    ub = program.ub
    n = program.n
    n_eq, n_ub = len(eq), len(ub)
    rows = []
    targets = np.empty(n_eq + n_ub)
    for i, (members, target, _) in enumerate(eq + ub):
        rows.append(np.asarray(members, dtype=int))
        targets[i] = target
    M = np.zeros((n_eq + n_ub, n))
    for i, members in enumerate(rows):
        M[i, members] = 1.0

    def primal(theta: np.ndarray) -> np.ndarray:
        return np.exp(np.clip(-1.0 - M.T @ theta, -700.0, 700.0))

    def value_grad(theta: np.ndarray):
        x = primal(theta)
        return float(x.sum() + theta @ targets), targets - M @ x

    def kkt_residual(theta: np.ndarray) -> float:
        _, g = value_grad(theta)
        res = float(np.max(np.abs(g[:n_eq]), initial=0.0))
        for j in range(n_ub):
            gj = g[n_eq + j]
            res = max(res, abs(gj) if theta[n_eq + j] > 1e-14 else max(0.0, -gj))
        return res

    theta = np.zeros(n_eq + n_ub) if theta0 is None else np.asarray(theta0, float)
    bounds = [(None, None)] * n_eq + [(0.0, None)] * n_ub
    res = minimize(
        value_grad,
        theta,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": 500, "maxfun": 5000, "ftol": 1e-16, "gtol": 1e-12},
    )
    theta = res.x
    iters = int(res.nit)

    best = theta.copy()
    best_res = kkt_residual(theta)
    for _ in range(40):
        if best_res <= tol * 1e-3:
            break
        x = primal(theta)
        grad = targets - M @ x
        active = np.zeros(theta.size, dtype=bool)
        for j in range(n_ub):
            if theta[n_eq + j] <= 1e-14 and grad[n_eq + j] >= 0:
                active[n_eq + j] = True
        free = ~active
        H = (M[free] * x) @ M[free].T
        step = np.zeros_like(theta)
        step[free] = np.linalg.lstsq(H, -grad[free], rcond=None)[0]
        alpha, improved = 1.0, False
        for _ in range(30):
            cand = theta + alpha * step
            cand[n_eq:] = np.maximum(cand[n_eq:], 0.0)
            cand_res = kkt_residual(cand)
            if cand_res < best_res:
                theta, best, best_res, improved = cand, cand.copy(), cand_res, True
                break
            alpha *= 0.5
        iters += 1
        if not improved:
            break
    return primal(best), best, best_res, iters


def _max_total(program: _Program) -> float:
    """Largest feasible total of the free cells (linear program)."""
    n = program.n
    if n == 0:
        return 0.0
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for members, target, _ in program.ub:
        row = np.zeros(n)
        row[members] = 1.0
        A_ub.append(row)
        b_ub.append(target)
    for members, target, _ in program.eq:
        row = np.zeros(n)
        row[members] = 1.0
        A_eq.append(row)
        b_eq.append(target)
    res = linprog(
        -np.ones(n),
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=(0, None),
        method="highs",
    )
    if res.status == 3:
        raise Infeasible("the total sum is unbounded under these constraints")
    if not res.success:
        raise Infeasible(f"no feasible matrix: {res.message}")
    return float(-res.fun)


def numeric_maxent(spec: ProblemSpec, objective: str = "H", tol: float = 1e-9) -> OracleResult:
    """Numerically maximize H (known total) or G (unknown total) over a spec.

    The G path reduces to a line of H problems: the value of the G program
    restricted to a fixed total S is concave in S with derivative
    ln S + 1 + (total multiplier), so the optimal total is found by
    monotone bisection, checking the largest feasible total first.
    """
    if objective not in ("H", "G"):
        raise ValueError(f"objective must be 'H' or 'G', got {objective!r}")
    program = _build_program(spec)
    if program.n == 0:
        X = program.assemble(np.zeros(0))
        return OracleResult(X, objective, _objective_value(objective, X), True, 0, 0.0)

    if objective == "H":
        x, _, residual, iters = _dual_solve(program, tol=tol)
        X = program.assemble(_floor_small(x))
        converged = residual <= tol
        if not converged and residual > 1e3 * tol:
            raise NotConverged(
                f"dual residual {residual} above tolerance {tol}", residual
            )
        return OracleResult(X, "H", _objective_value("H", X), converged, iters, residual)

    s_hi = _max_total(program)
    if s_hi <= 0:
        X = program.assemble(np.zeros(program.n))
        return OracleResult(X, "G", 0.0, True, 0, 0.0)

    total_members = list(range(program.n))
    theta_warm = None
    iters_total = 0

    def solve_at(s: float):
        nonlocal theta_warm, iters_total
        x, theta, residual, iters = _dual_solve(
            program,
            extra_eq=[(total_members, s, "total (search)")],
            theta0=theta_warm,
            tol=tol,
        )
        theta_warm = theta
        iters_total += iters
        slope = math.log(s) + 1.0 + theta[len(program.eq)]
        return x, residual, slope

    # Probe the slope strictly inside the boundary: at the largest total the
    # active bounds tile every cell and the total multiplier is not unique,
    # so its value there cannot be trusted for the sign test.
    s_probe = s_hi * (1.0 - 1e-9)
    _, _, slope = solve_at(s_probe)
    if slope >= -tol:
        x, residual, _ = solve_at(s_hi)
    else:
        lo, hi = s_hi * 1e-9, s_probe
        x, residual, slope_lo = solve_at(lo)
        if slope_lo > 0:
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                x_mid, res_mid, slope_mid = solve_at(mid)
                if slope_mid >= 0:
                    lo = mid
                    x, residual = x_mid, res_mid
                else:
                    hi = mid
    X = program.assemble(_floor_small(x))
    converged = residual <= tol
    if not converged and residual > 1e3 * tol:
        raise NotConverged(f"dual residual {residual} above tolerance {tol}", residual)
    return OracleResult(X, "G", _objective_value("G", X), converged, iters_total, residual)


def _floor_small(x: np.ndarray) -> np.ndarray:
    out = np.asarray(x, dtype=float).copy()
    out[out < ZERO_REPORT] = 0.0
    return out


def _objective_value(objective: str, X: np.ndarray) -> float:
    return entropy(X) if objective == "H" else entropy_difference(X)


# ----------------------------------------------------------------------
# Brute-force enumeration
# ----------------------------------------------------------------------


def brute_force_most_likely(spec: ProblemSpec, limit: int = 10_000_000) -> BruteForceResult:
    """Enumerate every integer matrix satisfying the problem.

    Returns all matrices tied for the maximal realization count, the count
    itself, and how many feasible matrices exist.  Guarded: an estimate of
    the search space above ``limit`` raises before any work is done.
    """
    program = _build_program(spec)
    eq, ub = program.eq, program.ub
    for members, target, label in eq + ub:
        if abs(target - round(target)) > 1e-9:
            raise LikelymatError(f"enumeration needs integer data ({label} = {target})")
    for cell, v in program.fixed.items():
        if abs(v - round(v)) > 1e-9:
            raise LikelymatError(f"enumeration needs integer data (fixed {cell} = {v})")

    n = program.n
    caps = np.full(n, np.inf)
    for members, target, _ in eq + ub:
        for c in members:
            caps[c] = min(caps[c], target)
    if np.any(np.isinf(caps)):
        raise SearchSpaceTooLarge("some cell has no finite cap; enumeration is infinite")
    caps = caps.astype(int)

    space = 1.0
    for c in caps:
        space *= c + 1
        if space > limit:
            raise SearchSpaceTooLarge(f"search space above the {limit} guard")

    eq_members = [np.asarray(m, dtype=int) for m, _, _ in eq]
    eq_targets = [int(round(t)) for _, t, _ in eq]
    ub_members = [np.asarray(m, dtype=int) for m, _, _ in ub]
    ub_targets = [int(round(t)) for _, t, _ in ub]

    # remaining_cap[i][c]: how much constraint i can still absorb from cells >= c
    suffix_cap = []
    for members, _, _ in eq:
        marks = np.zeros(n + 1, dtype=np.int64)
        for c in members:
            marks[c] = caps[c]
        suffix_cap.append(np.flip(np.cumsum(np.flip(marks))))

    x = np.zeros(n, dtype=int)
    eq_running = [0] * len(eq)
    ub_running = [0] * len(ub)
    eq_by_cell = [[] for _ in range(n)]
    ub_by_cell = [[] for _ in range(n)]
    for i, members in enumerate(eq_members):
        for c in members:
            eq_by_cell[c].append(i)
    for i, members in enumerate(ub_members):
        for c in members:
            ub_by_cell[c].append(i)

    best_count = -1
    argmax: list[np.ndarray] = []
    n_feasible = 0
    log_fact = None  # exact integer counting below

    def realization_count(vec: np.ndarray) -> int:
        running, out = 0, 1
        for v in [int(round(f)) for f in program.fixed.values()] + list(vec):
            running += v
            out *= math.comb(running, v)
        return out

    def rec(c: int):
        nonlocal best_count, argmax, n_feasible
        if c == n:
            n_feasible += 1
            cnt = realization_count(x)
            if cnt > best_count:
                best_count = cnt
                argmax = [program.assemble(x.astype(float))]
            elif cnt == best_count:
                argmax.append(program.assemble(x.astype(float)))
            return
        hi = int(caps[c])
        for i in eq_by_cell[c]:
            hi = min(hi, eq_targets[i] - eq_running[i])
        for i in ub_by_cell[c]:
            hi = min(hi, ub_targets[i] - ub_running[i])
        if hi < 0:
            return
        for v in range(hi + 1):
            for i in eq_by_cell[c]:
                eq_running[i] += v
            for i in ub_by_cell[c]:
                ub_running[i] += v
            # an equality must still be reachable from the remaining cells
            ok = all(
                eq_running[i] + suffix_cap[i][c + 1] >= eq_targets[i]
                for i in range(len(eq))
            )
            if ok:
                x[c] = v
                rec(c + 1)
            for i in eq_by_cell[c]:
                eq_running[i] -= v
            for i in ub_by_cell[c]:
                ub_running[i] -= v
        x[c] = 0

    rec(0)
    if best_count < 0:
        raise Infeasible("no integer matrix satisfies the constraints")
    return BruteForceResult(tuple(argmax), ExactCount(best_count), n_feasible)


# ----------------------------------------------------------------------
# KKT verification
# ----------------------------------------------------------------------


def verify_kkt(solution, spec: ProblemSpec, tol: float = 1e-6) -> KktReport:
    """Check a solution against the optimality structure of its spec.

    Verifies (a) feasibility of every stated constraint, (b) the product
    form: the log of each positive free entry is a sum of one factor per
    constraint touching it, (c) reported bound multipliers lie in (0, 1],
    and (d) complementary slackness: a slack bound carries multiplier 1.
    """
    spec = validate_spec(spec)
    program = _build_program(spec)
    X = solution.values if isinstance(solution, TensorSolution) else solution.matrix
    X = np.asarray(X, dtype=float)
    violations: list[str] = []
    max_res = 0.0

    def scale(v: float) -> float:
        return max(1.0, abs(v))

    if np.any(X < -tol):
        violations.append("negative entries")

    for cell, v in program.fixed.items():
        err = abs(X[cell] - v)
        max_res = max(max_res, err)
        if err > tol * scale(v):
            violations.append(f"fixed cell {cell}: {X[cell]} != {v}")

    achieved: dict[tuple, float] = {}
    for c in spec.marginals:
        ax = 1 if c.axis == "row" else 0
        if spec.shape.is_3d:
            sub = X[:, :, c.slice_index]
            val = float(sub.sum(axis=ax)[c.index])
        else:
            val = float(X.sum(axis=ax)[c.index])
        achieved[(c.axis, c.index, c.slice_index)] = val
        err = val - c.value
        if c.kind == "equal":
            max_res = max(max_res, abs(err))
            if abs(err) > tol * scale(c.value):
                violations.append(f"{c.axis} {c.index}: sum {val} != {c.value}")
        elif err > tol * scale(c.value):
            max_res = max(max_res, err)
            violations.append(f"{c.axis} {c.index}: sum {val} > bound {c.value}")
    if spec.total is not None:
        val = float(X.sum())
        err = val - spec.total.value
        if spec.total.kind == "equal":
            max_res = max(max_res, abs(err))
            if abs(err) > tol * scale(spec.total.value):
                violations.append(f"total {val} != {spec.total.value}")
        elif err > tol * scale(spec.total.value):
            violations.append(f"total {val} > bound {spec.total.value}")
    for e in spec.element_bounds:
        if X[e.i, e.j] > e.ub + tol * scale(e.ub):
            violations.append(f"element ({e.i},{e.j}) exceeds its bound")
    feasible = not violations

    product_form, pf_res = _product_form_ok(spec, program, X, tol)
    if not product_form:
        violations.append(f"product form residual {pf_res}")
    max_res = max(max_res, pf_res)

    multiplier_range, slackness = True, True
    if isinstance(solution, Solution):
        for axis, mult in (("row", solution.row_multipliers), ("col", solution.col_multipliers)):
            if mult is None:
                continue
            kinds = {c.kind for c in spec.marginals if c.axis == axis}
            if spec.symmetric and not kinds:
                kinds = {c.kind for c in spec.marginals if c.axis == "row"}
            if kinds != {"upper"}:
                continue
            bounds = (
                spec.axis_values("row") if spec.symmetric and axis == "col"
                else spec.axis_values(axis)
            )
            for i, f in enumerate(np.asarray(mult, dtype=float)):
                if not 0.0 < f <= 1.0 + tol:
                    multiplier_range = False
                    violations.append(f"{axis} {i}: multiplier {f} outside (0, 1]")
                bound = bounds[i]
                if not math.isfinite(bound):
                    continue
                key = (axis, i, None)
                real = achieved.get(key)
                if real is None and spec.symmetric:
                    real = float(X.sum(axis=1 if axis == "row" else 0)[i])
                if real is None:
                    continue
                slack = bound - real
                if slack > tol * scale(bound) and abs(f - 1.0) > tol:
                    slackness = False
                    violations.append(
                        f"{axis} {i}: slack bound but multiplier {f} != 1"
                    )

    return KktReport(
        feasible=feasible,
        product_form=product_form,
        multiplier_range=multiplier_range,
        complementary_slackness=slackness,
        max_residual=max_res,
        violations=tuple(violations),
    )


def _product_form_ok(spec, program: _Program, X: np.ndarray, tol: float):
    """Least-squares fit of log-entries on per-constraint indicators."""
    features: list[tuple] = []
    for c in spec.marginals:
        features.append(("m", c.axis, c.index, c.slice_index))
        if spec.symmetric:
            other = "col" if c.axis == "row" else "row"
            features.append(("m", other, c.index, c.slice_index))
    features = sorted(set(features))
    if spec.total is not None:
        features.append(("total",))
    for e in spec.element_bounds:
        features.append(("e", e.i, e.j))
    fidx = {f: i for i, f in enumerate(features)}

    rows, rhs = [], []
    for cell in program.cells:
        v = X[cell]
        if v <= ZERO_REPORT:
            continue
        i, j = cell[0], cell[1]
        sl = cell[2] if len(cell) == 3 else None
        row = np.zeros(len(features))
        for f in (("m", "row", i, sl), ("m", "col", j, sl), ("total",), ("e", i, j)):
            if f in fidx:
                row[fidx[f]] = 1.0
        rows.append(row)
        rhs.append(math.log(v))
    if not rows:
        return True, 0.0
    A = np.array(rows)
    b = np.array(rhs)
    theta, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = float(np.max(np.abs(A @ theta - b)))
    return resid <= max(tol, 1e-7), resid
