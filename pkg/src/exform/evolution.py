"""Connections and the commutator machinery for forms on deforming bases:
torsion and curvature arrays, the two-term commutator of a 1-form carrying a
connection correction, residuals of relations d(psi) = omega that need not
hold identically, degeneracy indicators, and the diagnostic record captured
when a degeneracy event creates a conserved pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from . import expr as ex
from . import forms
from .expr import ChartMismatchError, Const, CoordinateChart, ExformError, ScalarExpr
from .forms import Commutator1, DifferentialForm


class DegenerateCurveError(ExformError):
    """Curve restriction hit a sample where the tangent vanishes."""


@dataclass(frozen=True)
class Connection:
    """Christoffel-type coefficient array Gamma[rho, mu, nu]; zeros implicit."""

    chart: CoordinateChart
    gamma: Mapping[tuple[int, int, int], ScalarExpr] = field(default_factory=dict)

    def __post_init__(self):
        n = self.chart.dim
        cleaned: dict[tuple[int, int, int], ScalarExpr] = {}
        for key, coeff in self.gamma.items():
            rho, mu, nu = key
            if not all(0 <= i < n for i in (rho, mu, nu)):
                raise ValueError(f"index {key} out of range for n={n}")
            if isinstance(coeff, (int, float)):
                coeff = Const(self.chart, float(coeff))
            if coeff.chart != self.chart:
                raise ChartMismatchError(f"gamma{key} is over {coeff.chart.names}")
            coeff = ex.simplify(coeff)
            if not ex.is_zero_const(coeff):
                cleaned[(rho, mu, nu)] = coeff
        object.__setattr__(self, "gamma", dict(sorted(cleaned.items())))

    def coeff(self, rho: int, mu: int, nu: int) -> ScalarExpr:
        return self.gamma.get((rho, mu, nu), Const(self.chart, 0.0))

    def is_symmetric(self, trials: int = ex.DEFAULT_TRIALS,
                     tol: float = ex.DEFAULT_TOL,
                     seed: int = ex.DEFAULT_SEED) -> bool:
        t = torsion(self)
        n = self.chart.dim
        return all(ex.probably_zero(t[r][m][nu], trials, tol, seed)
                   for r in range(n) for m in range(n) for nu in range(n))


def torsion(conn: Connection):
    """T[rho][mu][nu] = Gamma[rho,mu,nu] - Gamma[rho,nu,mu], simplified;
    antisymmetric in (mu, nu) by construction."""
    n = conn.chart.dim
    return tuple(
        tuple(
            tuple(ex.simplify(ex.Binary(conn.chart, "-",
                                        conn.coeff(r, m, nu),
                                        conn.coeff(r, nu, m)))
                  for nu in range(n))
            for m in range(n))
        for r in range(n))


def curvature(conn: Connection):
    """Standard affine curvature array R[mu][nu][rho][sigma]:

        d Gamma[mu,nu,sigma]/dx^rho - d Gamma[mu,nu,rho]/dx^sigma
        + sum_lam (Gamma[mu,lam,rho] Gamma[lam,nu,sigma]
                   - Gamma[mu,lam,sigma] Gamma[lam,nu,rho])

    antisymmetric in (rho, sigma).
    """
    chart = conn.chart
    n = chart.dim

    def entry(mu, nu, rho, sigma):
        total: ScalarExpr = ex.Binary(
            chart, "-",
            ex.partial(conn.coeff(mu, nu, sigma), rho),
            ex.partial(conn.coeff(mu, nu, rho), sigma))
        for lam in range(n):
            quad = ex.Binary(
                chart, "-",
                ex.Binary(chart, "*", conn.coeff(mu, lam, rho), conn.coeff(lam, nu, sigma)),
                ex.Binary(chart, "*", conn.coeff(mu, lam, sigma), conn.coeff(lam, nu, rho)))
            total = ex.Binary(chart, "+", total, quad)
        return ex.simplify(total)

    return tuple(
        tuple(
            tuple(
                tuple(entry(mu, nu, rho, sigma) for sigma in range(n))
                for rho in range(n))
            for nu in range(n))
        for mu in range(n))


@dataclass(frozen=True)
class EvolutionaryCommutator:
    """Two-term commutator of a 1-form on a connected basis: the flat term
    (antisymmetrized coefficient partials) plus the basis term contributed
    by the connection's torsion contracted with the coefficients."""

    flat: Commutator1
    basis: Commutator1

    @property
    def chart(self) -> CoordinateChart:
        return self.flat.chart

    def total_entry(self, i: int, j: int) -> ScalarExpr:
        return ex.simplify(ex.Binary(self.chart, "+",
                                     self.flat.k(i, j), self.basis.k(i, j)))

    def total(self) -> Commutator1:
        n = self.chart.dim
        entries = {}
        for i in range(n):
            for j in range(i + 1, n):
                e = self.total_entry(i, j)
                if not ex.is_zero_const(e):
                    entries[(i, j)] = e
        return Commutator1(self.chart, entries)


def evolutionary_commutator(omega: DifferentialForm, conn: Connection) -> EvolutionaryCommutator:
    """Commutator of a 1-form with the connection correction.

    Entry (i, j) is (da_j/dx^i - da_i/dx^j) + sum_s (Gamma[s,j,i] -
    Gamma[s,i,j]) a_s; for a symmetric connection the second term cancels
    and the result reduces to the flat commutator.
    """
    if omega.degree != 1:
        raise forms.DegreeError("evolutionary commutator needs a 1-form")
    if omega.chart != conn.chart:
        raise ChartMismatchError("form and connection charts differ")
    chart = omega.chart
    n = chart.dim
    flat = forms.commutator_1form(omega)
    basis_entries: dict[tuple[int, int], ScalarExpr] = {}
    for i in range(n):
        for j in range(i + 1, n):
            acc: ScalarExpr | None = None
            for s in range(n):
                a_s = omega.coeff((s,))
                if ex.is_zero_const(a_s):
                    continue
                torsion_piece = ex.Binary(chart, "-",
                                          conn.coeff(s, j, i), conn.coeff(s, i, j))
                term = ex.Binary(chart, "*", torsion_piece, a_s)
                acc = term if acc is None else ex.Binary(chart, "+", acc, term)
            if acc is not None:
                entry = ex.simplify(acc)
                if not ex.is_zero_const(entry):
                    basis_entries[(i, j)] = entry
    return EvolutionaryCommutator(flat, Commutator1(chart, basis_entries))


# ---------------------------------------------------------------------------
# relations d(psi) = omega


@dataclass(frozen=True)
class NonidenticalRelation:
    """A (p-1)-form psi paired with a p-form omega; the relation d(psi) =
    omega is identical exactly when the residual d(psi) - omega vanishes,
    which requires omega to be closed."""

    psi: DifferentialForm
    omega: DifferentialForm
    connection: Connection | None = None

    def __post_init__(self):
        if self.psi.chart != self.omega.chart:
            raise ChartMismatchError("psi and omega charts differ")
        if self.omega.degree != self.psi.degree + 1:
            raise forms.DegreeError(
                f"need deg(omega) = deg(psi) + 1, got {self.omega.degree} "
                f"and {self.psi.degree}")
        if self.connection is not None and self.connection.chart != self.psi.chart:
            raise ChartMismatchError("connection chart differs")

    def residual_form(self) -> DifferentialForm:
        return forms.subtract_forms(forms.exterior_derivative(self.psi), self.omega)

    def is_identical(self, trials: int = ex.DEFAULT_TRIALS,
                     tol: float = ex.DEFAULT_TOL,
                     seed: int = ex.DEFAULT_SEED) -> bool:
        return forms.form_probably_zero(self.residual_form(), trials, tol, seed)


def relation_indices(rel: NonidenticalRelation) -> list[tuple[int, ...]]:
    """All increasing multi-indices of the omega degree, lexicographic."""
    import itertools
    n = rel.omega.chart.dim
    return [tuple(c) for c in itertools.combinations(range(n), rel.omega.degree)]


def relation_residual(rel: NonidenticalRelation, point: Sequence[float]) -> np.ndarray:
    """Coefficient vector of d(psi) - omega at the point, ordered over all
    increasing multi-indices of the omega degree."""
    residual = rel.residual_form()
    return np.array([ex.evaluate(residual.coeff(i), point)
                     for i in relation_indices(rel)])


def restrict_relation_to_curve(rel: NonidenticalRelation, curve: "forms.Cell",
                               samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Residual trace of the relation restricted to a parametrized path.

    r(t) = <d(psi) - omega at gamma(t), gamma'(t)> for t on a uniform grid
    in [0, 1].  A small max |r| certifies the relation holds along the path
    even when the unrestricted residual is nonzero.
    """
    if rel.omega.degree != 1 or rel.psi.degree != 0:
        raise forms.DegreeError("curve restriction needs deg(psi)=0, deg(omega)=1")
    if curve.k != 1:
        raise forms.DegreeError("curve must be a degree-1 cell")
    if curve.chart != rel.omega.chart:
        raise ChartMismatchError("curve and relation charts differ")
    if samples < 2:
        raise ValueError("need at least 2 samples")
    pchart = forms.param_chart(1)
    residual = rel.residual_form()
    velocity = [ex.partial(m, 0) for m in curve.maps]
    integrand: ScalarExpr | None = None
    speed2: ScalarExpr | None = None
    for axis in range(curve.chart.dim):
        coeff = residual.coeff((axis,))
        pulled = ex.compose(coeff, pchart, list(curve.maps))
        term = ex.Binary(pchart, "*", pulled, velocity[axis])
        integrand = term if integrand is None else ex.Binary(pchart, "+", integrand, term)
        v2 = ex.Binary(pchart, "*", velocity[axis], velocity[axis])
        speed2 = v2 if speed2 is None else ex.Binary(pchart, "+", speed2, v2)
    ts = np.linspace(0.0, 1.0, samples)
    pts = ts.reshape(-1, 1)
    speeds = np.sqrt(ex.evaluate_many(ex.simplify(speed2), pts))
    if np.any(speeds < 1e-12):
        bad = int(np.argmin(speeds))
        raise DegenerateCurveError(
            f"curve tangent vanishes at t={ts[bad]:.6g} (|gamma'|={speeds[bad]:.3g})")
    values = ex.evaluate_many(ex.simplify(integrand), pts)
    return ts, values


# ---------------------------------------------------------------------------
# degeneracy events and the captured record


def degeneracy_indicator(matrix_field: Sequence[Sequence[ScalarExpr]],
                         point: Sequence[float]) -> float:
    """Determinant of the matrix evaluated at the point (LAPACK LU with
    partial pivoting); a near-zero value flags a degeneracy event."""
    rows = [[ex.evaluate(entry, point) for entry in row] for row in matrix_field]
    m = np.asarray(rows, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    return float(np.linalg.det(m))


@dataclass(frozen=True)
class Pseudostructure:
    """Descriptor of a lower-dimensional locus on which an otherwise
    unclosed form becomes a differential: a family of characteristics, a
    level set, or a direction field."""

    kind: str  # characteristic-family | level-set | direction-field
    data: Any = None
    dim: int = 1

    _KINDS = ("characteristic-family", "level-set", "direction-field")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"kind must be one of {self._KINDS}")


@dataclass(frozen=True)
class DegeneracyEvent:
    """A point where a degeneracy indicator vanished, with the commutator
    term values of the attached 1-form at that point."""

    point: tuple[float, ...]
    indicator: float = 0.0
    flat_terms: Mapping[tuple[int, int], float] | None = None
    basis_terms: Mapping[tuple[int, int], float] | None = None


@dataclass(frozen=True)
class BiStructure:
    """Diagnostic record captured when a degeneracy event pairs a conserved
    quantity with the surface carrying it.

    discrete_change is the flat commutator term and deformation_measure the
    basis (connection) term, both read at the event point from the
    max-magnitude component of the total commutator; their sum is the
    recorded total.
    """

    pseudostructure: Pseudostructure
    point: tuple[float, ...]
    component: tuple[int, int]
    closed_form_value: float | None
    discrete_change: float
    deformation_measure: float

    @property
    def total_commutator(self) -> float:
        return self.discrete_change + self.deformation_measure

    def to_json_obj(self) -> dict:
        return {
            "pseudostructure": {"kind": self.pseudostructure.kind,
                                "dim": self.pseudostructure.dim},
            "point": list(self.point),
            "component": list(self.component),
            "closed_form_value": self.closed_form_value,
            "discrete_change": self.discrete_change,
            "deformation_measure": self.deformation_measure,
            "total_commutator": self.total_commutator,
        }


def commutator_event(comm: EvolutionaryCommutator, point: Sequence[float],
                     indicator: float = 0.0) -> DegeneracyEvent:
    """Package the commutator term values at a point into an event."""
    flat = comm.flat.values_at(point)
    basis = comm.basis.values_at(point)
    return DegeneracyEvent(tuple(float(x) for x in point), indicator, flat, basis)


def capture_bistructure(event: DegeneracyEvent, omega: DifferentialForm,
                        conn: Connection | None,
                        pseudostructure: Pseudostructure,
                        psi: DifferentialForm | None = None) -> BiStructure:
    """Record the commutator split at a degeneracy event.

    If the event does not already carry term values they are computed from
    omega and the connection at the event point.  The reported component is
    the one where |flat + basis| is largest.
    """
    flat = event.flat_terms
    basis = event.basis_terms
    if flat is None or basis is None:
        comm = evolutionary_commutator(
            omega, conn if conn is not None else Connection(omega.chart))
        flat = comm.flat.values_at(event.point)
        basis = comm.basis.values_at(event.point)
    keys = sorted(set(flat) | set(basis))
    if keys:
        best = max(keys, key=lambda k: abs(flat.get(k, 0.0) + basis.get(k, 0.0)))
        discrete = float(flat.get(best, 0.0))
        deformation = float(basis.get(best, 0.0))
    else:
        best = (0, 1) if omega.chart.dim > 1 else (0, 0)
        discrete = deformation = 0.0
    value: float | None = None
    if psi is not None:
        if psi.degree == 0:
            value = ex.evaluate(psi.coeff(()), event.point)
        else:
            coeffs = [abs(ex.evaluate(c, event.point)) for c in psi.coeffs.values()]
            value = max(coeffs) if coeffs else 0.0
    return BiStructure(pseudostructure, event.point, best, value,
                       discrete, deformation)


def write_event_log(records: Sequence[BiStructure], path) -> None:
    """Emit one JSON object per line, one line per captured record.

    Written atomically (write-then-rename), creating parent directories.
    """
    import os
    from pathlib import Path
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(r.to_json_obj(), sort_keys=True) for r in records]
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    os.replace(tmp, path)
