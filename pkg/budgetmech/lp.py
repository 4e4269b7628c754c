"""
Linear programs and a two-phase dense simplex solver.

The solver works on Python floats (FLOAT mode, tolerance 1e-9) or on
``fractions.Fraction`` (EXACT mode, no tolerance). It always returns a basic
feasible solution, which the rounding code relies on.

Pricing uses the largest reduced cost and switches to Bland's rule after a
run of degenerate pivots. Ties are broken by the lowest index everywhere, so
a given LP always produces the same vertex.

Example:
    >>> lp = LinearProgram("toy")
    >>> x = lp.add_variable("x", lower=0, upper=math.inf, objective=1)
    >>> lp.add_constraint({x: 1}, Sense.LE, 1)
    0
    >>> solution = solve_lp(lp)
    >>> solution.status, solution.values
    (<LpStatus.OPTIMAL: 'optimal'>, (1.0,))
"""

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .config import get_solver_config
from .exceptions import IterationLimitError, LpFormatError, SizeLimitError
from .logging import get_logger, get_solver_logger, log_function_call
from .numeric import Arithmetic, ArithmeticMode, Number, arithmetic

logger = get_logger(__name__)


class Sense(Enum):
    """Constraint sense."""

    LE = "<="
    EQ = "="
    GE = ">="


class LpStatus(Enum):
    """Outcome of a solve."""

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class Constraint:
    """Sparse row ``sum coefficients[k] * x_k  <sense>  rhs``."""

    coefficients: Tuple[Tuple[int, Number], ...]
    sense: Sense
    rhs: Number
    name: str


class LinearProgram:
    """
    A maximization LP with bounded variables and sparse constraint rows.

    Variables default to ``0 <= x <= +inf``. Use ``-math.inf`` / ``math.inf``
    for missing bounds.
    """

    def __init__(self, name: str = "lp"):
        self.name = name
        self.lower: List[Number] = []
        self.upper: List[Number] = []
        self.objective: List[Number] = []
        self.names: List[str] = []
        self.constraints: List[Constraint] = []

    @property
    def variable_count(self) -> int:
        return len(self.objective)

    @property
    def constraint_count(self) -> int:
        return len(self.constraints)

    def add_variable(
        self,
        name: Optional[str] = None,
        lower: Number = 0,
        upper: Number = math.inf,
        objective: Number = 0,
    ) -> int:
        """Add a variable and return its index."""
        index = len(self.objective)
        self.names.append(name if name is not None else f"x{index}")
        self.lower.append(lower)
        self.upper.append(upper)
        self.objective.append(objective)
        return index

    def set_objective_coefficient(self, index: int, value: Number) -> None:
        self._check_index(index)
        self.objective[index] = value

    def add_constraint(
        self,
        coefficients: Union[Mapping[int, Number], Iterable[Tuple[int, Number]]],
        sense: Sense,
        rhs: Number,
        name: Optional[str] = None,
    ) -> int:
        """
        Add a constraint row and return its index.

        Repeated variable indices are summed.
        """
        items = coefficients.items() if isinstance(coefficients, Mapping) else coefficients
        merged: Dict[int, Number] = {}
        for index, value in items:
            self._check_index(index)
            merged[index] = merged.get(index, 0) + value
        row = Constraint(
            coefficients=tuple(sorted(merged.items())),
            sense=Sense(sense),
            rhs=rhs,
            name=name if name is not None else f"c{len(self.constraints)}",
        )
        self.constraints.append(row)
        return len(self.constraints) - 1

    def _check_index(self, index: int) -> None:
        if not isinstance(index, int) or not 0 <= index < len(self.objective):
            raise LpFormatError(f"variable index {index!r} out of range")

    def check(self) -> None:
        """Raise LpFormatError unless every bound pair is ordered and finite where required."""
        for k, (lo, up) in enumerate(zip(self.lower, self.upper)):
            if lo == math.inf or up == -math.inf:
                raise LpFormatError(f"variable {self.names[k]} has an infinite bound on the wrong side")
            if lo > up:
                raise LpFormatError(f"variable {self.names[k]} has lower {lo} > upper {up}")
        for row in self.constraints:
            for index, _ in row.coefficients:
                self._check_index(index)

    def evaluate_objective(
        self, values: Sequence[Number], arith: Optional[Arithmetic] = None
    ) -> Number:
        convert = arith.convert if arith else (lambda v: v)
        total: Number = 0
        for c, x in zip(self.objective, values):
            if c:
                total = total + convert(c) * x
        return total

    def row_activity(
        self, row: Constraint, values: Sequence[Number], arith: Optional[Arithmetic] = None
    ) -> Number:
        convert = arith.convert if arith else (lambda v: v)
        total: Number = 0
        for index, coefficient in row.coefficients:
            total = total + convert(coefficient) * values[index]
        return total

    def max_violation(
        self, values: Sequence[Number], arith: Optional[Arithmetic] = None
    ) -> Number:
        """
        Largest amount by which ``values`` break a constraint or bound.

        Zero means feasible; this is the re-substitution certificate attached
        to every optimal solution.
        """
        convert = arith.convert if arith else (lambda v: v)
        worst: Number = 0
        for row in self.constraints:
            activity = self.row_activity(row, values, arith)
            rhs = convert(row.rhs)
            if row.sense is Sense.LE:
                gap = activity - rhs
            elif row.sense is Sense.GE:
                gap = rhs - activity
            else:
                gap = abs(activity - rhs)
            worst = max(worst, gap)
        for k, x in enumerate(values):
            if self.lower[k] != -math.inf:
                worst = max(worst, convert(self.lower[k]) - x)
            if self.upper[k] != math.inf:
                worst = max(worst, x - convert(self.upper[k]))
        return worst

    def count_tight(self, values: Sequence[Number], tolerance: Number = 0) -> int:
        """Number of constraints and finite bounds holding with equality at ``values``."""
        tight = 0
        for row in self.constraints:
            if abs(self.row_activity(row, values) - row.rhs) <= tolerance:
                tight += 1
        for k, x in enumerate(values):
            if self.lower[k] != -math.inf and abs(x - self.lower[k]) <= tolerance:
                tight += 1
            if self.upper[k] != math.inf and abs(self.upper[k] - x) <= tolerance:
                tight += 1
        return tight

    def to_text(self) -> str:
        """Human-readable dump, one constraint per line."""

        def linear(terms: Iterable[Tuple[int, Number]]) -> str:
            parts = [f"{coef} {self.names[index]}" for index, coef in terms if coef != 0]
            return " + ".join(parts).replace("+ -", "- ") if parts else "0"

        lines = [f"\\ {self.name}", "maximize"]
        lines.append("  obj: " + linear(enumerate(self.objective)))
        lines.append("subject to")
        for row in self.constraints:
            lines.append(f"  {row.name}: {linear(row.coefficients)} {row.sense.value} {row.rhs}")
        lines.append("bounds")
        for k, name in enumerate(self.names):
            lo, up = self.lower[k], self.upper[k]
            if lo == -math.inf and up == math.inf:
                lines.append(f"  {name} free")
            elif up == math.inf:
                lines.append(f"  {name} >= {lo}")
            elif lo == -math.inf:
                lines.append(f"  {name} <= {up}")
            else:
                lines.append(f"  {lo} <= {name} <= {up}")
        lines.append("end")
        return "\n".join(lines) + "\n"

    def dump(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text())


@dataclass(frozen=True)
class LpSolution:
    """
    Result of ``solve_lp``.

    ``values`` and ``objective_value`` are only meaningful when the status is
    OPTIMAL; ``max_violation`` is the re-substitution check of those values.
    """

    status: LpStatus
    values: Tuple[Number, ...]
    objective_value: Optional[Number]
    mode: ArithmeticMode
    pivots: int = 0
    max_violation: Optional[Number] = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Tableau:
    """Dense simplex tableau over one number type; artificial columns come last."""

    def __init__(self, rows: List[List[Number]], basis: List[int], structural: int, arith: Arithmetic):
        self.rows = rows
        self.basis = basis
        self.enter_limit = structural
        self.arith = arith
        self.objective: List[Number] = []
        self.pivots = 0
        config = get_solver_config()
        self.max_pivots = config.max_pivots
        self.bland_after = config.bland_after_degenerate
        self._drop = 0 if arith.exact else 1e-13

    def _entering(self, bland: bool) -> Optional[int]:
        tol = self.arith.tol
        best: Optional[int] = None
        best_value: Number = tol
        for j in range(self.enter_limit):
            d = self.objective[j]
            if d > best_value:
                if bland:
                    return j
                best, best_value = j, d
        return best

    def _leaving(self, col: int) -> Optional[int]:
        tol = self.arith.tol
        best: Optional[int] = None
        best_ratio: Number = 0
        for i, row in enumerate(self.rows):
            a = row[col]
            if a <= tol:
                continue
            rhs = row[-1]
            ratio = (rhs if rhs > 0 else rhs * 0) / a
            if best is None or ratio < best_ratio - tol:
                best, best_ratio = i, ratio
            elif abs(ratio - best_ratio) <= tol and self.basis[i] < self.basis[best]:
                best, best_ratio = i, min(ratio, best_ratio)
        return best

    def pivot(self, r: int, c: int) -> None:
        prow = self.rows[r]
        piv = prow[c]
        if piv != 1:
            for k in range(len(prow)):
                if prow[k]:
                    prow[k] = prow[k] / piv
        prow[c] = piv / piv
        support = [k for k, v in enumerate(prow) if v]
        drop = self._drop
        for i, row in enumerate(self.rows):
            if i == r:
                continue
            self._eliminate(row, prow, support, c, drop)
        self._eliminate(self.objective, prow, support, c, drop)
        self.basis[r] = c
        self.pivots += 1

    @staticmethod
    def _eliminate(row: List[Number], prow: List[Number], support: List[int], c: int, drop: float) -> None:
        f = row[c]
        if not f:
            return
        for k in support:
            value = row[k] - f * prow[k]
            if drop and -drop < value < drop:
                value = value * 0
            row[k] = value
        row[c] = f * 0

    def run(self, phase: str) -> LpStatus:
        degenerate = 0
        bland = self.bland_after == 0
        start = self.pivots
        while True:
            col = self._entering(bland)
            if col is None:
                return LpStatus.OPTIMAL
            row = self._leaving(col)
            if row is None:
                return LpStatus.UNBOUNDED
            if self.pivots - start >= self.max_pivots:
                raise IterationLimitError(self.pivots - start, phase)
            if self.rows[row][-1] <= self.arith.tol:
                degenerate += 1
                if degenerate >= self.bland_after:
                    bland = True
            else:
                degenerate = 0
            self.pivot(row, col)

    def price(self, costs: Sequence[Number]) -> None:
        """Rebuild the reduced-cost row for column costs ``costs`` (length enter_limit)."""
        width = len(self.rows[0]) if self.rows else self.enter_limit + 1
        zero = self.arith.zero()
        objective = [zero] * width
        for j in range(self.enter_limit):
            objective[j] = costs[j]
        for i, row in enumerate(self.rows):
            cb = costs[self.basis[i]] if self.basis[i] < self.enter_limit else zero
            if not cb:
                continue
            for k, v in enumerate(row):
                if v:
                    objective[k] = objective[k] - cb * v
        # basic columns price to zero exactly
        for b in self.basis:
            if b < self.enter_limit:
                objective[b] = zero
        self.objective = objective


def _standard_form(lp: LinearProgram, arith: Arithmetic):
    """Shift/split variables to x >= 0 and return rows, column map and objective."""
    column_count = 0
    var_map: List[Tuple[Number, List[Tuple[int, int]]]] = []
    rows: List[Tuple[Dict[int, Number], Sense, Number]] = []
    zero = arith.zero()

    for k in range(lp.variable_count):
        lo, up = lp.lower[k], lp.upper[k]
        if lo != -math.inf:
            offset = arith.convert(lo)
            var_map.append((offset, [(column_count, 1)]))
            if up != math.inf:
                rows.append(({column_count: arith.convert(1)}, Sense.LE, arith.convert(up) - offset))
            column_count += 1
        elif up != math.inf:
            var_map.append((arith.convert(up), [(column_count, -1)]))
            column_count += 1
        else:
            var_map.append((zero, [(column_count, 1), (column_count + 1, -1)]))
            column_count += 2

    for constraint in lp.constraints:
        coefficients: Dict[int, Number] = {}
        rhs = arith.convert(constraint.rhs)
        for k, raw in constraint.coefficients:
            a = arith.convert(raw)
            if not a:
                continue
            offset, terms = var_map[k]
            rhs = rhs - a * offset
            for col, sign in terms:
                coefficients[col] = coefficients.get(col, zero) + a * sign
        rows.append((coefficients, constraint.sense, rhs))

    costs = [zero] * column_count
    constant = zero
    for k in range(lp.variable_count):
        c = arith.convert(lp.objective[k])
        if not c:
            continue
        offset, terms = var_map[k]
        constant = constant + c * offset
        for col, sign in terms:
            costs[col] = costs[col] + c * sign

    return column_count, var_map, rows, costs, constant


@log_function_call
def solve_lp(
    lp: LinearProgram,
    mode: Union[ArithmeticMode, str, None] = None,
    *,
    max_cells: Optional[int] = None,
) -> LpSolution:
    """
    Maximize ``lp`` with the two-phase simplex method.

    Args:
        lp: The program to solve
        mode: FLOAT or EXACT arithmetic (defaults to the configured mode)
        max_cells: Cap on tableau rows * columns in EXACT mode

    Returns:
        LpSolution with status OPTIMAL, INFEASIBLE or UNBOUNDED

    Raises:
        LpFormatError: If the LP is malformed
        SizeLimitError: If an EXACT tableau would exceed ``max_cells``
        IterationLimitError: If a phase exceeds the configured pivot budget
    """
    lp.check()
    arith = arithmetic(mode)
    zero = arith.zero()
    one = arith.convert(1)

    structural, var_map, raw_rows, costs, constant = _standard_form(lp, arith)

    # Orient rows so every right-hand side is non-negative
    oriented = []
    for coefficients, sense, rhs in raw_rows:
        if rhs < 0:
            coefficients = {col: -a for col, a in coefficients.items()}
            rhs = -rhs
            sense = {Sense.LE: Sense.GE, Sense.GE: Sense.LE, Sense.EQ: Sense.EQ}[sense]
        oriented.append((coefficients, sense, rhs))

    slack_count = sum(1 for _, sense, _ in oriented if sense is not Sense.EQ)
    artificial_count = sum(1 for _, sense, _ in oriented if sense is not Sense.LE)
    real_columns = structural + slack_count
    width = real_columns + artificial_count + 1

    if arith.exact:
        cells = len(oriented) * width
        limit = max_cells if max_cells is not None else get_solver_config().exact_lp_max_cells
        if cells > limit:
            raise SizeLimitError("exact simplex tableau", cells, limit)

    rows: List[List[Number]] = []
    basis: List[int] = []
    artificial_rows: List[int] = []
    next_slack = structural
    next_artificial = real_columns
    for i, (coefficients, sense, rhs) in enumerate(oriented):
        row = [zero] * width
        for col, a in coefficients.items():
            row[col] = a
        row[-1] = rhs
        if sense is Sense.LE:
            row[next_slack] = one
            basis.append(next_slack)
            next_slack += 1
        else:
            if sense is Sense.GE:
                row[next_slack] = -one
                next_slack += 1
            row[next_artificial] = one
            basis.append(next_artificial)
            artificial_rows.append(i)
            next_artificial += 1
        rows.append(row)

    tableau = _Tableau(rows, basis, real_columns, arith)
    solver_logger = get_solver_logger()

    if artificial_rows:
        # Phase one: maximize -(sum of artificials)
        objective = [zero] * width
        for i in artificial_rows:
            for k in range(real_columns):
                if rows[i][k]:
                    objective[k] = objective[k] + rows[i][k]
            objective[-1] = objective[-1] + rows[i][-1]
        tableau.objective = objective
        tableau.run("phase one")

        scale = max([abs(row[-1]) for row in rows] + [one])
        if tableau.objective[-1] > arith.tol * scale:
            solver_logger.log_lp_solve("infeasible", len(rows), width, tableau.pivots, arith.mode.value)
            return LpSolution(LpStatus.INFEASIBLE, (), None, arith.mode, tableau.pivots)

        _drive_out_artificials(tableau, real_columns)

    tableau.price(costs + [zero] * slack_count)
    status = tableau.run("phase two")
    solver_logger.log_lp_solve(status.value, len(tableau.rows), width, tableau.pivots, arith.mode.value)
    if status is LpStatus.UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, (), None, arith.mode, tableau.pivots)

    column_values = [zero] * real_columns
    for i, b in enumerate(tableau.basis):
        if b < real_columns:
            value = tableau.rows[i][-1]
            column_values[b] = value if value > 0 else zero
    values = []
    for offset, terms in var_map:
        x = offset
        for col, sign in terms:
            x = x + sign * column_values[col]
        values.append(x)

    objective_value = lp.evaluate_objective(values, arith)
    violation = lp.max_violation(values, arith)
    if violation > arith.tol:
        logger.warning(
            f"LP '{lp.name}' solution violates constraints by {violation}",
            extra={"context": {"pivots": tableau.pivots}},
        )
    return LpSolution(
        LpStatus.OPTIMAL,
        tuple(values),
        objective_value,
        arith.mode,
        tableau.pivots,
        violation,
    )


def _drive_out_artificials(tableau: _Tableau, real_columns: int) -> None:
    """Pivot zero-valued artificials out of the basis; drop rows that are redundant."""
    tol = tableau.arith.tol
    keep: List[int] = []
    for i in range(len(tableau.rows)):
        if tableau.basis[i] < real_columns:
            keep.append(i)
            continue
        row = tableau.rows[i]
        best: Optional[int] = None
        for j in range(real_columns):
            if abs(row[j]) > tol and (best is None or abs(row[j]) > abs(row[best])):
                best = j
        if best is None:
            continue
        tableau.pivot(i, best)
        keep.append(i)
    tableau.rows = [tableau.rows[i] for i in keep]
    tableau.basis = [tableau.basis[i] for i in keep]


def format_lp(lp: LinearProgram) -> str:
    """Render ``lp`` as text (same format as ``LinearProgram.dump``)."""
    return lp.to_text()
