"""Exterior algebra over a coordinate chart: forms, wedge products, exterior
derivatives, commutators, closure tests, homotopy antiderivatives, and
numerical integration of forms over parametrized cells.

Multi-indices are strictly increasing tuples of axis indices; coefficients
are ScalarExpr trees.  Absent indices mean zero, and literal-zero
coefficients are never stored.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import expr as ex
from .expr import (ChartMismatchError, Const, CoordinateChart, DomainError,
                   ExformError, ScalarExpr)

Index = tuple[int, ...]

DEFAULT_QUAD_ORDER = 16


class DegreeError(ExformError):
    """Operation applied to a form of the wrong degree."""


class NotClosedError(ExformError):
    """Antiderivative requested for a form that fails the closure test."""


class QuadratureError(ExformError):
    """1-D quadrature failed its self-consistency (convergence) check."""


def _check_index(index: Index, degree: int, dim: int) -> None:
    if len(index) != degree:
        raise ValueError(f"index {index} does not have degree {degree}")
    if any(not 0 <= i < dim for i in index):
        raise ValueError(f"index {index} out of range for dimension {dim}")
    if any(a >= b for a, b in zip(index, index[1:])):
        raise ValueError(f"index {index} is not strictly increasing")


def merge_indices(a: Index, b: Index) -> tuple[int, Index] | None:
    """Merge two increasing multi-indices; None if an axis repeats.

    Returns (sign, merged) where sign is the parity of the permutation that
    sorts the concatenation a + b.
    """
    if set(a) & set(b):
        return None
    inversions = 0
    for x in a:
        for y in b:
            if x > y:
                inversions += 1
    merged = tuple(sorted(a + b))
    return (-1) ** inversions, merged


def insert_axis(axis: int, index: Index) -> tuple[int, Index] | None:
    """Wedge dx^axis onto the front of dx^index; None if the axis repeats."""
    if axis in index:
        return None
    pos = sum(1 for i in index if i < axis)
    merged = tuple(sorted((axis,) + index))
    return (-1) ** pos, merged


@dataclass(frozen=True)
class DifferentialForm:
    """Degree-p skew-symmetric form: map from increasing multi-indices to
    coefficient expressions.

    ``beyond_top`` marks the zero result of differentiating a top-degree
    form; such a form has no coefficients and is vacuously closed.
    """

    chart: CoordinateChart
    degree: int
    coeffs: Mapping[Index, ScalarExpr] = field(default_factory=dict)
    beyond_top: bool = False

    def __post_init__(self):
        n = self.chart.dim
        if self.beyond_top:
            if self.coeffs:
                raise ValueError("beyond-top forms must be empty")
            object.__setattr__(self, "degree", n)
            object.__setattr__(self, "coeffs", {})
            return
        if not 0 <= self.degree <= n:
            raise ValueError(f"degree {self.degree} out of range for n={n}")
        normalized: dict[Index, ScalarExpr] = {}
        for index, coeff in self.coeffs.items():
            index = tuple(index)
            _check_index(index, self.degree, n)
            if isinstance(coeff, (int, float)):
                coeff = Const(self.chart, float(coeff))
            if coeff.chart != self.chart:
                raise ChartMismatchError(
                    f"coefficient at {index} is over {coeff.chart.names}")
            coeff = ex.simplify(coeff)
            if not ex.is_zero_const(coeff):
                normalized[index] = coeff
        object.__setattr__(self, "coeffs", dict(sorted(normalized.items())))

    def coeff(self, index: Index) -> ScalarExpr:
        return self.coeffs.get(tuple(index), Const(self.chart, 0.0))

    def indices(self) -> list[Index]:
        return list(self.coeffs)

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def __str__(self) -> str:
        if self.is_zero:
            return "0"
        names = self.chart.names
        parts = []
        for index, coeff in self.coeffs.items():
            basis = "^".join(f"d{names[i]}" for i in index)
            parts.append(f"({coeff}) {basis}".strip())
        return "  +  ".join(parts)


def zero_form(chart: CoordinateChart, degree: int) -> DifferentialForm:
    if degree > chart.dim:
        return DifferentialForm(chart, chart.dim, {}, beyond_top=True)
    return DifferentialForm(chart, degree, {})


def scalar_form(e: ScalarExpr) -> DifferentialForm:
    """Wrap a scalar expression as a 0-form."""
    return DifferentialForm(e.chart, 0, {(): e})


def basis_one_form(chart: CoordinateChart, axis: int) -> DifferentialForm:
    return DifferentialForm(chart, 1, {(axis,): Const(chart, 1.0)})


def one_form(chart: CoordinateChart, components: Sequence[ScalarExpr | float]) -> DifferentialForm:
    if len(components) != chart.dim:
        raise ValueError("need one component per coordinate")
    return DifferentialForm(chart, 1, {(i,): c for i, c in enumerate(components)})


def _accumulate(bucket: dict[Index, ScalarExpr], chart: CoordinateChart,
                index: Index, sign: int, contribution: ScalarExpr) -> None:
    term = contribution if sign > 0 else ex.Unary(chart, "neg", contribution)
    if index in bucket:
        bucket[index] = ex.Binary(chart, "+", bucket[index], term)
    else:
        bucket[index] = term


def add_forms(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    _check_same_chart(a, b)
    if a.degree != b.degree:
        raise DegreeError(f"cannot add degrees {a.degree} and {b.degree}")
    merged: dict[Index, ScalarExpr] = dict(a.coeffs)
    for index, coeff in b.coeffs.items():
        merged[index] = ex.Binary(a.chart, "+", merged[index], coeff) \
            if index in merged else coeff
    return DifferentialForm(a.chart, a.degree, merged,
                            beyond_top=a.beyond_top and b.beyond_top)


def subtract_forms(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    _check_same_chart(a, b)
    if a.degree != b.degree:
        raise DegreeError(f"cannot subtract degrees {a.degree} and {b.degree}")
    merged: dict[Index, ScalarExpr] = dict(a.coeffs)
    for index, coeff in b.coeffs.items():
        if index in merged:
            merged[index] = ex.Binary(a.chart, "-", merged[index], coeff)
        else:
            merged[index] = ex.Unary(a.chart, "neg", coeff)
    return DifferentialForm(a.chart, a.degree, merged)


def scale_form(factor: ScalarExpr | float, form: DifferentialForm) -> DifferentialForm:
    if isinstance(factor, (int, float)):
        factor = Const(form.chart, float(factor))
    return DifferentialForm(form.chart, form.degree,
                            {i: ex.Binary(form.chart, "*", factor, c)
                             for i, c in form.coeffs.items()},
                            beyond_top=form.beyond_top)


def _check_same_chart(a: DifferentialForm, b: DifferentialForm) -> None:
    if a.chart != b.chart:
        raise ChartMismatchError(
            f"charts differ: {a.chart.names} vs {b.chart.names}")


def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    """Exterior product; repeated axes drop, merged indices carry parity signs."""
    _check_same_chart(a, b)
    degree = a.degree + b.degree
    if degree > a.chart.dim or a.beyond_top or b.beyond_top:
        return zero_form(a.chart, degree)
    bucket: dict[Index, ScalarExpr] = {}
    for ia, ca in a.coeffs.items():
        for ib, cb in b.coeffs.items():
            merged = merge_indices(ia, ib)
            if merged is None:
                continue
            sign, index = merged
            _accumulate(bucket, a.chart, index, sign,
                        ex.Binary(a.chart, "*", ca, cb))
    return DifferentialForm(a.chart, degree, bucket)


def exterior_derivative(theta: DifferentialForm) -> DifferentialForm:
    """d(theta): degree p+1, coefficients are signed sums of partials."""
    chart = theta.chart
    n = chart.dim
    if theta.beyond_top or theta.degree == n:
        return zero_form(chart, theta.degree + 1)
    bucket: dict[Index, ScalarExpr] = {}
    for index, coeff in theta.coeffs.items():
        for axis in range(n):
            inserted = insert_axis(axis, index)
            if inserted is None:
                continue
            sign, new_index = inserted
            derivative = ex.partial(coeff, axis)
            if ex.is_zero_const(derivative):
                continue
            _accumulate(bucket, chart, new_index, sign, derivative)
    return DifferentialForm(chart, theta.degree + 1, bucket)


@dataclass(frozen=True)
class Commutator1:
    """Antisymmetric coefficient array of d(theta) for a 1-form theta.

    Entries are stored once for i < j; access through k(i, j) applies the
    antisymmetry sign.
    """

    chart: CoordinateChart
    entries: Mapping[tuple[int, int], ScalarExpr]

    def __post_init__(self):
        for (i, j) in self.entries:
            if not (0 <= i < j < self.chart.dim):
                raise ValueError(f"entry ({i},{j}) must satisfy 0 <= i < j < n")

    def k(self, i: int, j: int) -> ScalarExpr:
        if i == j:
            return Const(self.chart, 0.0)
        if i < j:
            return self.entries.get((i, j), Const(self.chart, 0.0))
        entry = self.entries.get((j, i))
        if entry is None:
            return Const(self.chart, 0.0)
        return ex.simplify(ex.Unary(self.chart, "neg", entry))

    def to_two_form(self) -> DifferentialForm:
        return DifferentialForm(self.chart, 2, dict(self.entries))

    def values_at(self, point: Sequence[float]) -> dict[tuple[int, int], float]:
        return {ij: ex.evaluate(e, point) for ij, e in self.entries.items()}


def commutator_1form(theta: DifferentialForm) -> Commutator1:
    """Antisymmetrized partials of the components of a 1-form."""
    if theta.degree != 1:
        raise DegreeError(f"commutator needs a 1-form, got degree {theta.degree}")
    chart = theta.chart
    entries: dict[tuple[int, int], ScalarExpr] = {}
    for i in range(chart.dim):
        for j in range(i + 1, chart.dim):
            a_i = theta.coeff((i,))
            a_j = theta.coeff((j,))
            k = ex.simplify(ex.Binary(chart, "-",
                                      ex.partial(a_j, i), ex.partial(a_i, j)))
            if not ex.is_zero_const(k):
                entries[(i, j)] = k
    return Commutator1(chart, entries)


def form_probably_zero(form: DifferentialForm, trials: int = ex.DEFAULT_TRIALS,
                       tol: float = ex.DEFAULT_TOL,
                       seed: int = ex.DEFAULT_SEED) -> bool:
    """True iff every stored coefficient passes probably_zero."""
    return all(ex.probably_zero(c, trials, tol, seed)
               for c in form.coeffs.values())


def is_closed(theta: DifferentialForm, trials: int = ex.DEFAULT_TRIALS,
              tol: float = ex.DEFAULT_TOL, seed: int = ex.DEFAULT_SEED) -> bool:
    """True iff every coefficient of d(theta) passes probably_zero."""
    return form_probably_zero(exterior_derivative(theta), trials, tol, seed)


def closure_residual(theta: DifferentialForm, trials: int = ex.DEFAULT_TRIALS,
                     seed: int = ex.DEFAULT_SEED) -> float:
    """Max |coefficient of d(theta)| over the sampling cloud."""
    d = exterior_derivative(theta)
    if d.is_zero:
        return 0.0
    return max(ex.sampled_abs_max(c, trials, seed) for c in d.coeffs.values())


# ---------------------------------------------------------------------------
# homotopy (cone) antiderivative on a star-shaped domain


def _gauss01(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


@dataclass(frozen=True)
class HomotopyField:
    """Numerically evaluable (p-1)-form H(theta) with d(H theta) = theta.

    Coefficients at x are 1-D quadratures along the segment from the base
    point to x, so the construction is valid on domains star-shaped about
    the base.  For p = 1 the single coefficient is the potential, gauge
    fixed to vanish at the base.
    """

    source: DifferentialForm
    base: tuple[float, ...]
    quad_order: int = 48

    @property
    def degree(self) -> int:
        return self.source.degree - 1

    @property
    def chart(self) -> CoordinateChart:
        return self.source.chart

    def indices(self) -> list[Index]:
        n = self.chart.dim
        return [tuple(c) for c in itertools.combinations(range(n), self.degree)]

    def coefficient(self, index: Index, point: Sequence[float],
                    order: int | None = None) -> float:
        index = tuple(index)
        _check_index(index, self.degree, self.chart.dim)
        value = self._coefficient(index, point, order or self.quad_order)
        check = self._coefficient(index, point, 2 * (order or self.quad_order))
        if abs(value - check) > 1e-9 * max(1.0, abs(check)):
            raise QuadratureError(
                f"quadrature for coefficient {index} did not converge "
                f"(order {order or self.quad_order}: {value}, doubled: {check})")
        return check

    def _coefficient(self, index: Index, point, order: int) -> float:
        p = self.source.degree
        x = np.asarray(point, dtype=np.float64)
        base = np.asarray(self.base, dtype=np.float64)
        v = x - base
        t, w = _gauss01(order)
        segment = base[None, :] + t[:, None] * v[None, :]
        weight = w * t ** (p - 1)
        total = 0.0
        for src_index, coeff in self.source.coeffs.items():
            for q, axis in enumerate(src_index):
                remainder = src_index[:q] + src_index[q + 1:]
                if remainder != index:
                    continue
                samples = ex.evaluate_many(coeff, segment)
                integral = float(np.dot(weight, samples))
                total += (-1) ** q * integral * v[axis]
        return total

    def coefficients_at(self, point: Sequence[float]) -> dict[Index, float]:
        return {index: self.coefficient(index, point) for index in self.indices()}

    def __call__(self, point: Sequence[float]) -> float:
        if self.degree != 0:
            raise DegreeError("only a degree-0 field evaluates to a scalar")
        return self.coefficient((), point)


def antiderivative(theta: DifferentialForm, base: Sequence[float],
                   trials: int = ex.DEFAULT_TRIALS, tol: float = ex.DEFAULT_TOL,
                   seed: int = ex.DEFAULT_SEED,
                   quad_order: int = 48) -> HomotopyField:
    """Invert d on a closed form via the cone construction about `base`."""
    if theta.degree < 1:
        raise DegreeError("antiderivative needs degree >= 1")
    if len(base) != theta.chart.dim:
        raise ValueError("base point has wrong dimension")
    if not is_closed(theta, trials, tol, seed):
        raise NotClosedError("input form fails the closure test")
    return HomotopyField(theta, tuple(float(b) for b in base), quad_order)


# ---------------------------------------------------------------------------
# cells and integration


_DUMMY_PARAM = CoordinateChart(("_s",))


def param_chart(k: int) -> CoordinateChart:
    if k == 0:
        return _DUMMY_PARAM
    return CoordinateChart(tuple(f"s{i + 1}" for i in range(k)))


@dataclass(frozen=True)
class Cell:
    """Oriented smooth image of the unit cube [0,1]^k in the chart.

    The parametrization is one expression per target coordinate over the
    parameter chart s1..sk.  Degree-0 cells are points: their maps may not
    reference any parameter.
    """

    chart: CoordinateChart
    k: int
    maps: tuple[ScalarExpr, ...]
    orientation: int = 1

    def __post_init__(self):
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        if self.k < 0:
            raise ValueError("cell degree must be >= 0")
        if len(self.maps) != self.chart.dim:
            raise ValueError("need one coordinate map per target coordinate")
        pchart = param_chart(self.k)
        for m in self.maps:
            if m.chart != pchart:
                raise ChartMismatchError(
                    f"cell map must be over parameters {pchart.names}")
            if self.k == 0 and ex.free_axes(m):
                raise ValueError("a point cell's maps may not reference parameters")

    @classmethod
    def from_text(cls, chart: CoordinateChart, k: int, maps: Sequence[str],
                  orientation: int = 1) -> "Cell":
        pchart = param_chart(k)
        return cls(chart, k, tuple(ex.parse_expr(m, pchart) for m in maps),
                   orientation)

    @classmethod
    def point(cls, chart: CoordinateChart, coords: Sequence[float],
              orientation: int = 1) -> "Cell":
        maps = tuple(Const(_DUMMY_PARAM, float(c)) for c in coords)
        return cls(chart, 0, maps, orientation)

    def at(self, params: Sequence[float]) -> np.ndarray:
        pt = (0.0,) if self.k == 0 else tuple(params)
        return np.array([ex.evaluate(m, pt) for m in self.maps])


def boundary(cell: Cell) -> list[Cell]:
    """The 2k oriented faces of the cell, alternating-sign cube convention."""
    if cell.k == 0:
        raise DegreeError("a point cell has no boundary")
    k = cell.k
    sub_chart = param_chart(k - 1)
    faces: list[Cell] = []
    for axis in range(k):
        for side in (0, 1):
            replacements: list[ScalarExpr] = []
            keep = 0
            for a in range(k):
                if a == axis:
                    replacements.append(Const(sub_chart, float(side)))
                else:
                    replacements.append(ex.Coord(sub_chart, keep) if k > 1
                                        else Const(sub_chart, 0.0))
                    keep += 1
            maps = tuple(ex.compose(m, sub_chart, replacements)
                         for m in cell.maps)
            sign = cell.orientation * (-1) ** ((axis + 1) + side)
            faces.append(Cell(cell.chart, k - 1, maps, sign))
    return faces


def _jacobian_minor(cell: Cell, index: Index) -> ScalarExpr:
    """det of d(maps[index])/d(s) as a symbolic expression over the parameters."""
    k = cell.k
    pchart = param_chart(k)
    partials = [[ex.partial(cell.maps[i], c) for c in range(k)] for i in index]
    total: ScalarExpr | None = None
    for perm in itertools.permutations(range(k)):
        inversions = sum(1 for a in range(k) for b in range(a + 1, k)
                         if perm[a] > perm[b])
        prod: ScalarExpr | None = None
        for row, col in enumerate(perm):
            factor = partials[row][col]
            prod = factor if prod is None else ex.Binary(pchart, "*", prod, factor)
        if inversions % 2:
            prod = ex.Unary(pchart, "neg", prod)
        total = prod if total is None else ex.Binary(pchart, "+", total, prod)
    return ex.simplify(total)


def pullback_integrand(theta: DifferentialForm, cell: Cell) -> ScalarExpr:
    """Pull theta back through the cell parametrization; a scalar over s1..sk."""
    pchart = param_chart(cell.k)
    total: ScalarExpr | None = None
    for index, coeff in theta.coeffs.items():
        composed = ex.compose(coeff, pchart, list(cell.maps))
        minor = _jacobian_minor(cell, index)
        term = ex.Binary(pchart, "*", composed, minor)
        total = term if total is None else ex.Binary(pchart, "+", total, term)
    if total is None:
        return Const(pchart, 0.0)
    return ex.simplify(total)


def integrate_form(theta: DifferentialForm, cell: Cell,
                   quadrature_order: int = DEFAULT_QUAD_ORDER) -> float:
    """Integrate a degree-k form over a degree-k cell (tensor Gauss-Legendre)."""
    if theta.chart != cell.chart:
        raise ChartMismatchError("form and cell charts differ")
    if theta.degree != cell.k:
        raise DegreeError(
            f"degree mismatch: form {theta.degree}, cell {cell.k}")
    if quadrature_order < 1:
        raise ValueError("quadrature order must be >= 1")
    if cell.k == 0:
        point = cell.at(())
        return cell.orientation * ex.evaluate(theta.coeff(()), point)
    integrand = pullback_integrand(theta, cell)
    if ex.is_zero_const(integrand):
        return 0.0
    nodes, weights = _gauss01(quadrature_order)
    grids = np.meshgrid(*([nodes] * cell.k), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    w = weights
    for _ in range(cell.k - 1):
        w = np.multiply.outer(w, weights)
    values = ex.evaluate_many(integrand, points)
    return cell.orientation * float(np.dot(w.ravel(), values))


def boundary_integral(theta: DifferentialForm, cell: Cell,
                      quadrature_order: int = DEFAULT_QUAD_ORDER) -> float:
    return sum(integrate_form(theta, face, quadrature_order)
               for face in boundary(cell))


def stokes_residual(theta: DifferentialForm, cell: Cell,
                    quadrature_order: int = DEFAULT_QUAD_ORDER) -> float:
    """|integral of d(theta) over the cell - integral of theta over its boundary|."""
    if theta.degree != cell.k - 1:
        raise DegreeError(
            f"need deg(theta) = deg(cell) - 1, got {theta.degree} and {cell.k}")
    inner = integrate_form(exterior_derivative(theta), cell, quadrature_order)
    outer = boundary_integral(theta, cell, quadrature_order)
    return abs(inner - outer)
