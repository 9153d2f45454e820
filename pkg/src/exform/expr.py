"""Symbolic scalar expressions over a named coordinate chart.

The expression grammar is deliberately small and closed under exact
partial differentiation: constants, coordinates, + - * /, integer powers,
and sin/cos/exp/ln/sqrt.  Identity checking is done by seeded numeric
sampling (`probably_zero`), not by canonical-form rewriting.

All values are immutable; every operation returns a new tree.  Numeric
evaluation is routed through the compiled tape kernels in `_kernels`, so
scalar and batched evaluation share one arithmetic path.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import _kernels, tape

DEFAULT_TRIALS = 64
DEFAULT_TOL = 1e-9
DEFAULT_SEED = 42
SAMPLE_BOX = 2.0          # probably_zero samples uniform in [-2, 2]^n
RESAMPLE_CAP_FACTOR = 50  # max total draws = factor * trials

FUNCTION_NAMES = ("sin", "cos", "exp", "ln", "sqrt")

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class ExformError(Exception):
    """Base class for all package errors."""


class ChartMismatchError(ExformError):
    """Two expressions or forms over different charts were combined."""


class ParseError(ExformError):
    def __init__(self, message: str, text: str, pos: int):
        self.pos = pos
        super().__init__(f"{message} at position {pos}: {text!r}")


class DomainError(ExformError):
    """Evaluation hit a point outside the expression's domain (1/0, ln<=0, sqrt<0)."""


class ResampleExhaustedError(ExformError):
    """probably_zero could not collect enough in-domain sample points."""


@dataclass(frozen=True)
class CoordinateChart:
    """Ordered list of coordinate names; the dimension is the list length."""

    names: tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise ValueError("chart needs at least one coordinate")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate coordinate names: {self.names}")
        for name in self.names:
            if not _IDENT_RE.fullmatch(name):
                raise ValueError(f"invalid coordinate name {name!r}")
            if name in FUNCTION_NAMES:
                raise ValueError(f"coordinate name {name!r} collides with a function")

    @property
    def dim(self) -> int:
        return len(self.names)

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"{name!r} is not a coordinate of {self.names}") from None


def chart(*names: str) -> CoordinateChart:
    return CoordinateChart(tuple(names))


@dataclass(frozen=True)
class ScalarExpr:
    """Base node; concrete nodes are Const, Coord, Binary, Power, Unary."""

    chart: CoordinateChart

    # -- construction helpers ------------------------------------------

    def _coerce(self, other) -> "ScalarExpr":
        if isinstance(other, ScalarExpr):
            if other.chart != self.chart:
                raise ChartMismatchError(
                    f"charts differ: {self.chart.names} vs {other.chart.names}")
            return other
        if isinstance(other, (int, float)):
            return Const(self.chart, float(other))
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else Binary(self.chart, "+", self, o)

    def __radd__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else Binary(self.chart, "+", o, self)

    def __sub__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else Binary(self.chart, "-", self, o)

    def __rsub__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else Binary(self.chart, "-", o, self)

    def __mul__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else Binary(self.chart, "*", self, o)

    def __rmul__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else Binary(self.chart, "*", o, self)

    def __truediv__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else Binary(self.chart, "/", self, o)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else Binary(self.chart, "/", o, self)

    def __pow__(self, exponent):
        if not isinstance(exponent, int):
            raise TypeError("exponent must be a plain integer")
        return Power(self.chart, self, exponent)

    def __neg__(self):
        return Unary(self.chart, "neg", self)

    def __call__(self, point: Sequence[float]) -> float:
        return evaluate(self, point)

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Const(ScalarExpr):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite constant {self.value}")


@dataclass(frozen=True)
class Coord(ScalarExpr):
    axis: int

    def __post_init__(self):
        if not 0 <= self.axis < self.chart.dim:
            raise ValueError(f"axis {self.axis} out of range for {self.chart.names}")


@dataclass(frozen=True)
class Binary(ScalarExpr):
    op: str  # one of + - * /
    left: ScalarExpr
    right: ScalarExpr


@dataclass(frozen=True)
class Power(ScalarExpr):
    base: ScalarExpr
    exponent: int

    def __post_init__(self):
        if abs(self.exponent) > 2**31:
            raise ValueError("exponent out of range")


@dataclass(frozen=True)
class Unary(ScalarExpr):
    fn: str  # sin cos exp ln sqrt neg
    arg: ScalarExpr


def const(ch: CoordinateChart, value: float) -> Const:
    return Const(ch, float(value))


def coord(ch: CoordinateChart, axis: int) -> Coord:
    return Coord(ch, axis)


def variable(ch: CoordinateChart, name: str) -> Coord:
    return Coord(ch, ch.axis(name))


def coords(ch: CoordinateChart) -> tuple[Coord, ...]:
    return tuple(Coord(ch, i) for i in range(ch.dim))


def sin(e: ScalarExpr) -> ScalarExpr:
    return Unary(e.chart, "sin", e)


def cos(e: ScalarExpr) -> ScalarExpr:
    return Unary(e.chart, "cos", e)


def exp(e: ScalarExpr) -> ScalarExpr:
    return Unary(e.chart, "exp", e)


def ln(e: ScalarExpr) -> ScalarExpr:
    return Unary(e.chart, "ln", e)


def sqrt(e: ScalarExpr) -> ScalarExpr:
    return Unary(e.chart, "sqrt", e)


def free_axes(e: ScalarExpr) -> frozenset[int]:
    """Set of coordinate axes the expression actually references."""
    match e:
        case Const():
            return frozenset()
        case Coord(axis=a):
            return frozenset((a,))
        case Binary(left=l, right=r):
            return free_axes(l) | free_axes(r)
        case Power(base=b):
            return free_axes(b)
        case Unary(arg=a):
            return free_axes(a)
    raise TypeError(f"not a ScalarExpr node: {e!r}")


# ---------------------------------------------------------------------------
# parsing


_TOKEN_NUM = re.compile(r"(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?")


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens: list[tuple[str, object, int]] = []
        self._run()

    def _run(self):
        text = self.text
        n = len(text)
        i = 0
        while i < n:
            c = text[i]
            if c.isspace():
                i += 1
                continue
            if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
                m = _TOKEN_NUM.match(text, i)
                end = m.end()
                if end < n and (text[end].isalnum() or text[end] in "._"):
                    raise ParseError("malformed number", text, i)
                self.tokens.append(("num", float(m.group()), i))
                i = end
                continue
            if c.isalpha() or c == "_":
                m = _IDENT_RE.match(text, i)
                self.tokens.append(("ident", m.group(), i))
                i = m.end()
                continue
            if c in "+-*/^()":
                self.tokens.append((c, c, i))
                i += 1
                continue
            raise ParseError(f"unexpected character {c!r}", text, i)
        self.tokens.append(("end", None, n))


class _Parser:
    """Precedence climbing: ^  >  unary -  >  * /  >  + -, binaries left-assoc."""

    def __init__(self, text: str, ch: CoordinateChart):
        self.text = text
        self.chart = ch
        self.tokens = _Tokenizer(text).tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str):
        tok = self.advance()
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}", self.text, tok[2])
        return tok

    def parse(self) -> ScalarExpr:
        e = self.additive()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", self.text, tok[2])
        return e

    def additive(self) -> ScalarExpr:
        e = self.multiplicative()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            rhs = self.multiplicative()
            e = Binary(self.chart, op, e, rhs)
        return e

    def multiplicative(self) -> ScalarExpr:
        e = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            rhs = self.unary()
            e = Binary(self.chart, op, e, rhs)
        return e

    def unary(self) -> ScalarExpr:
        if self.peek()[0] == "-":
            self.advance()
            operand = self.unary()
            # a negated numeric literal is a negative constant
            if isinstance(operand, Const):
                return Const(self.chart, -operand.value)
            return Unary(self.chart, "neg", operand)
        return self.power()

    def power(self) -> ScalarExpr:
        base = self.atom()
        if self.peek()[0] == "^":
            self.advance()
            return Power(self.chart, base, self.exponent())
        return base

    def exponent(self) -> int:
        # constant integer exponents only; general powers go through exp/ln
        tok = self.peek()
        if tok[0] == "(":
            self.advance()
            k = self.exponent()
            self.expect(")")
            return k
        neg = False
        if tok[0] == "-":
            self.advance()
            neg = True
            tok = self.peek()
        if tok[0] != "num":
            raise ParseError("exponent must be a constant integer", self.text, tok[2])
        self.advance()
        value = tok[1]
        if value != int(value):
            raise ParseError("exponent must be a constant integer", self.text, tok[2])
        return -int(value) if neg else int(value)

    def atom(self) -> ScalarExpr:
        tok = self.advance()
        kind, value, pos = tok
        if kind == "num":
            return Const(self.chart, value)
        if kind == "(":
            e = self.additive()
            self.expect(")")
            return e
        if kind == "ident":
            if value in FUNCTION_NAMES:
                self.expect("(")
                arg = self.additive()
                self.expect(")")
                return Unary(self.chart, value, arg)
            try:
                axis = self.chart.axis(value)
            except KeyError:
                raise ParseError(f"unknown identifier {value!r}", self.text, pos) from None
            return Coord(self.chart, axis)
        raise ParseError(f"unexpected token {value!r}", self.text, pos)


def parse_expr(text: str, ch: CoordinateChart) -> ScalarExpr:
    """Parse expression text over the chart.  Whitespace-insensitive."""
    return _Parser(text, ch).parse()


# ---------------------------------------------------------------------------
# printing (round-trips through parse_expr with identical structure)


_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(e: ScalarExpr) -> int:
    match e:
        case Binary(op="+") | Binary(op="-"):
            return _PREC_ADD
        case Binary():
            return _PREC_MUL
        case Unary(fn="neg"):
            return _PREC_NEG
        case Const(value=v) if v < 0:
            # prints with a leading minus, so binds like a negation
            return _PREC_NEG
        case Power():
            return _PREC_POW
        case _:
            return _PREC_ATOM


def _fmt_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_text(e: ScalarExpr) -> str:
    match e:
        case Const(value=v):
            return f"-{_fmt_const(-v)}" if v < 0 else _fmt_const(v)
        case Coord(axis=a):
            return e.chart.names[a]
        case Binary(op=op, left=l, right=r):
            my = _prec(e)
            ls = to_text(l)
            rs = to_text(r)
            if _prec(l) < my:
                ls = f"({ls})"
            # parenthesize right operands of equal precedence so the printed
            # text re-parses to the identical tree (left-assoc grammar)
            if _prec(r) <= my:
                rs = f"({rs})"
            return f"{ls} {op} {rs}"
        case Power(base=b, exponent=k):
            bs = to_text(b)
            if _prec(b) <= _PREC_POW:
                bs = f"({bs})"
            return f"{bs}^{k}" if k >= 0 else f"{bs}^(-{-k})"
        case Unary(fn="neg", arg=a):
            s = to_text(a)
            if _prec(a) < _PREC_NEG:
                s = f"({s})"
            return f"-{s}"
        case Unary(fn=fn, arg=a):
            return f"{fn}({to_text(a)})"
    raise TypeError(f"not a ScalarExpr node: {e!r}")


# ---------------------------------------------------------------------------
# simplification


def _is_const(e: ScalarExpr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def _fold_binary(op: str, a: float, b: float) -> float | None:
    if op == "+":
        v = a + b
    elif op == "-":
        v = a - b
    elif op == "*":
        v = a * b
    else:
        if b == 0.0:
            return None
        v = a / b
    return v if math.isfinite(v) else None


_UNARY_FOLD = {
    "neg": lambda x: -x,
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
}


def _rewrite(e: ScalarExpr) -> ScalarExpr:
    """One local rewriting step on a node whose children are simplified."""
    ch = e.chart
    match e:
        case Binary(op=op, left=l, right=r):
            if isinstance(l, Const) and isinstance(r, Const):
                v = _fold_binary(op, l.value, r.value)
                if v is not None:
                    return Const(ch, 0.0 if v == 0.0 else v)
            if op == "+":
                if _is_const(l, 0.0):
                    return r
                if _is_const(r, 0.0):
                    return l
                if isinstance(l, Unary) and l.fn == "neg":
                    return Binary(ch, "-", r, l.arg)
                if isinstance(r, Unary) and r.fn == "neg":
                    return Binary(ch, "-", l, r.arg)
            elif op == "-":
                if _is_const(r, 0.0):
                    return l
                if _is_const(l, 0.0):
                    return Unary(ch, "neg", r)
                if isinstance(r, Unary) and r.fn == "neg":
                    return Binary(ch, "+", l, r.arg)
                if l == r:
                    return Const(ch, 0.0)
                # a*b - b*a cancels exactly (IEEE multiplication commutes)
                if (isinstance(l, Binary) and isinstance(r, Binary)
                        and l.op == "*" and r.op == "*"
                        and l.left == r.right and l.right == r.left):
                    return Const(ch, 0.0)
            elif op == "*":
                if _is_const(l, 0.0) or _is_const(r, 0.0):
                    return Const(ch, 0.0)
                if _is_const(l, 1.0):
                    return r
                if _is_const(r, 1.0):
                    return l
            else:  # /
                if _is_const(l, 0.0):
                    return Const(ch, 0.0)
                if _is_const(r, 1.0):
                    return l
            return e
        case Power(base=b, exponent=k):
            if k == 0:
                return Const(ch, 1.0)
            if k == 1:
                return b
            if isinstance(b, Const) and not (b.value == 0.0 and k < 0):
                v = b.value**k
                if math.isfinite(v):
                    return Const(ch, v)
            return e
        case Unary(fn="neg", arg=Unary(fn="neg", arg=inner)):
            return inner
        case Unary(fn=fn, arg=Const(value=v)):
            if fn in _UNARY_FOLD:
                try:
                    folded = _UNARY_FOLD[fn](v)
                except OverflowError:
                    return e
                if math.isfinite(folded):
                    return Const(ch, folded)
            elif fn == "ln" and v > 0.0:
                return Const(ch, math.log(v))
            elif fn == "sqrt" and v >= 0.0:
                return Const(ch, math.sqrt(v))
            return e
        case _:
            return e


def simplify(e: ScalarExpr) -> ScalarExpr:
    """Constant folding, 0/1 identities, double negation; idempotent."""
    match e:
        case Const() | Coord():
            node = e
        case Binary(op=op, left=l, right=r):
            node = Binary(e.chart, op, simplify(l), simplify(r))
        case Power(base=b, exponent=k):
            node = Power(e.chart, simplify(b), k)
        case Unary(fn=fn, arg=a):
            node = Unary(e.chart, fn, simplify(a))
        case _:
            raise TypeError(f"not a ScalarExpr node: {e!r}")
    while True:
        rewritten = _rewrite(node)
        if rewritten == node:
            return node
        node = rewritten


# ---------------------------------------------------------------------------
# differentiation


def partial(e: ScalarExpr, axis: int) -> ScalarExpr:
    """Exact partial derivative with respect to the given axis, simplified."""
    if not 0 <= axis < e.chart.dim:
        raise ValueError(f"axis {axis} out of range for {e.chart.names}")
    return simplify(_diff(e, axis))


def _diff(e: ScalarExpr, axis: int) -> ScalarExpr:
    ch = e.chart
    zero = Const(ch, 0.0)
    match e:
        case Const():
            return zero
        case Coord(axis=a):
            return Const(ch, 1.0) if a == axis else zero
        case Binary(op="+", left=l, right=r):
            return Binary(ch, "+", _diff(l, axis), _diff(r, axis))
        case Binary(op="-", left=l, right=r):
            return Binary(ch, "-", _diff(l, axis), _diff(r, axis))
        case Binary(op="*", left=l, right=r):
            return Binary(ch, "+",
                          Binary(ch, "*", _diff(l, axis), r),
                          Binary(ch, "*", l, _diff(r, axis)))
        case Binary(op="/", left=l, right=r):
            num = Binary(ch, "-",
                         Binary(ch, "*", _diff(l, axis), r),
                         Binary(ch, "*", l, _diff(r, axis)))
            return Binary(ch, "/", num, Power(ch, r, 2))
        case Power(base=b, exponent=k):
            if k == 0:
                return zero
            scaled = Binary(ch, "*", Const(ch, float(k)), Power(ch, b, k - 1))
            return Binary(ch, "*", scaled, _diff(b, axis))
        case Unary(fn="neg", arg=a):
            return Unary(ch, "neg", _diff(a, axis))
        case Unary(fn="sin", arg=a):
            return Binary(ch, "*", Unary(ch, "cos", a), _diff(a, axis))
        case Unary(fn="cos", arg=a):
            return Unary(ch, "neg",
                         Binary(ch, "*", Unary(ch, "sin", a), _diff(a, axis)))
        case Unary(fn="exp", arg=a):
            return Binary(ch, "*", Unary(ch, "exp", a), _diff(a, axis))
        case Unary(fn="ln", arg=a):
            return Binary(ch, "/", _diff(a, axis), a)
        case Unary(fn="sqrt", arg=a):
            denom = Binary(ch, "*", Const(ch, 2.0), Unary(ch, "sqrt", a))
            return Binary(ch, "/", _diff(a, axis), denom)
    raise TypeError(f"not a ScalarExpr node: {e!r}")


# ---------------------------------------------------------------------------
# substitution


def compose(e: ScalarExpr, new_chart: CoordinateChart,
            replacements: Sequence[ScalarExpr]) -> ScalarExpr:
    """Rebuild `e` over `new_chart`, replacing coordinate i by replacements[i]."""
    if len(replacements) != e.chart.dim:
        raise ValueError("need one replacement per source coordinate")
    for r in replacements:
        if r.chart != new_chart:
            raise ChartMismatchError("replacement is not over the target chart")
    return _compose(e, new_chart, tuple(replacements))


def _compose(e, new_chart, repl):
    match e:
        case Const(value=v):
            return Const(new_chart, v)
        case Coord(axis=a):
            return repl[a]
        case Binary(op=op, left=l, right=r):
            return Binary(new_chart, op,
                          _compose(l, new_chart, repl), _compose(r, new_chart, repl))
        case Power(base=b, exponent=k):
            return Power(new_chart, _compose(b, new_chart, repl), k)
        case Unary(fn=fn, arg=a):
            return Unary(new_chart, fn, _compose(a, new_chart, repl))
    raise TypeError(f"not a ScalarExpr node: {e!r}")


# ---------------------------------------------------------------------------
# numeric evaluation


@lru_cache(maxsize=4096)
def _tape_for(e: ScalarExpr) -> tape.Tape:
    return tape.compile_expr(e)


_ERR_MESSAGES = {
    tape.ERR_DIV: "division by zero",
    tape.ERR_LN: "ln of non-positive argument",
    tape.ERR_SQRT: "sqrt of negative argument",
    tape.ERR_POW: "zero base with negative exponent",
}


def evaluate(e: ScalarExpr, point: Sequence[float]) -> float:
    """Evaluate at a single point; domain violations raise DomainError."""
    pts = np.asarray(point, dtype=np.float64).reshape(1, -1)
    if pts.shape[1] != e.chart.dim:
        raise ValueError(
            f"point has {pts.shape[1]} components, chart has {e.chart.dim}")
    vals, errs = _kernels.eval_tape(_tape_for(e), pts)
    if errs[0]:
        raise DomainError(f"{_ERR_MESSAGES[int(errs[0])]} at point {tuple(point)}")
    return float(vals[0])


def evaluate_many(e: ScalarExpr, points: np.ndarray) -> np.ndarray:
    """Evaluate at an (m, dim) array of points; any domain violation raises."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != e.chart.dim:
        raise ValueError(f"expected (m, {e.chart.dim}) points, got {pts.shape}")
    vals, errs = _kernels.eval_tape(_tape_for(e), pts)
    bad = np.nonzero(errs)[0]
    if bad.size:
        k = int(bad[0])
        raise DomainError(
            f"{_ERR_MESSAGES[int(errs[k])]} at point {tuple(pts[k])}")
    return vals


def evaluate_masked(e: ScalarExpr, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate at points, returning (values, ok_mask) instead of raising."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    vals, errs = _kernels.eval_tape(_tape_for(e), pts)
    return vals, errs == 0


def sample_points(ch: CoordinateChart, count: int, seed: int) -> np.ndarray:
    """The deterministic sampling cloud used by probably_zero."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-SAMPLE_BOX, SAMPLE_BOX, size=(count, ch.dim))


def probably_zero(e: ScalarExpr, trials: int = DEFAULT_TRIALS,
                  tol: float = DEFAULT_TOL, seed: int = DEFAULT_SEED) -> bool:
    """Seeded randomized zero test: true iff |e| <= tol at `trials` points.

    Points are drawn uniformly from [-2, 2]^n; points where the expression
    is undefined are skipped and redrawn, up to a cap.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    cap = RESAMPLE_CAP_FACTOR * trials
    remaining = trials
    drawn = 0
    while remaining > 0:
        batch = rng.uniform(-SAMPLE_BOX, SAMPLE_BOX, size=(remaining, e.chart.dim))
        drawn += remaining
        vals, ok = evaluate_masked(e, batch)
        good = vals[ok]
        if good.size and np.max(np.abs(good)) > tol:
            return False
        remaining -= int(ok.sum())
        if remaining > 0 and drawn >= cap:
            raise ResampleExhaustedError(
                f"could not collect {trials} in-domain points after {drawn} draws")
    return True


def sampled_abs_max(e: ScalarExpr, trials: int = DEFAULT_TRIALS,
                    seed: int = DEFAULT_SEED) -> float:
    """Max |e| over the probably_zero sampling cloud (skipping bad points)."""
    rng = np.random.default_rng(seed)
    cap = RESAMPLE_CAP_FACTOR * trials
    remaining = trials
    drawn = 0
    worst = 0.0
    while remaining > 0:
        batch = rng.uniform(-SAMPLE_BOX, SAMPLE_BOX, size=(remaining, e.chart.dim))
        drawn += remaining
        vals, ok = evaluate_masked(e, batch)
        good = vals[ok]
        if good.size:
            worst = max(worst, float(np.max(np.abs(good))))
        remaining -= int(ok.sum())
        if remaining > 0 and drawn >= cap:
            raise ResampleExhaustedError(
                f"could not collect {trials} in-domain points after {drawn} draws")
    return worst


def is_zero_const(e: ScalarExpr) -> bool:
    return isinstance(e, Const) and e.value == 0.0
