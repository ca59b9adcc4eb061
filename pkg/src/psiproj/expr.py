"""Immutable scalar expression DAGs over phase-space coordinates.

Nodes are hash-consed: structurally equal expressions are the same object,
and every node gets an id larger than the ids of its children.  Sorting a
node set by id therefore yields a valid evaluation order, which is what
:class:`Evaluator` relies on.

Construction goes through canonicalising builders (``add``, ``mul``,
``power``, ``sqrt`` ...) that fold constants, merge like terms and merge
powers of identical factors.  There is no canonical simplifier beyond that;
zero tests are done numerically by sampling.
"""
from __future__ import annotations

import itertools
import math
import sys
import weakref
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

sys.setrecursionlimit(max(sys.getrecursionlimit(), 50000))

CONST, VAR, PARAM, ADD, MUL, SQRT, SIN, COS, EXP = range(9)
_FUNC_NAMES = {SQRT: "sqrt", SIN: "sin", COS: "cos", EXP: "exp"}

# variable codes: x^a -> a-1, xi_a -> XI_OFFSET + a-1
XI_OFFSET = 16
# sums with more terms than this are kept as opaque children instead of being
# merged into the parent sum; keeps construction linear and preserves sharing
FLATTEN_LIMIT = 12
MAX_DIM = 16


class DomainError(ArithmeticError):
    """Raised when an expression is evaluated outside its domain."""

    def __init__(self, message: str, node: "Expr | None" = None):
        super().__init__(message)
        self.node = node


class UnboundParameterError(KeyError):
    pass


def _norm(c) -> complex:
    c = complex(c)
    return complex(c.real + 0.0, c.imag + 0.0)


_ids = itertools.count()
_table: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()


class Expr:
    __slots__ = ("kind", "args", "payload", "id", "vmask", "real", "_d", "_conj", "_key", "__weakref__")

    kind: int
    args: tuple
    payload: object
    id: int
    vmask: int
    real: bool

    def __new__(cls, kind, args=(), payload=None):
        key = (kind, payload, tuple(a.id for a in args))
        node = _table.get(key)
        if node is not None:
            return node
        node = object.__new__(cls)
        node.kind = kind
        node.args = tuple(args)
        node.payload = payload
        node.id = next(_ids)
        node._key = key
        node._d = None
        node._conj = None
        vm = 0
        real = True
        for a in args:
            vm |= a.vmask
            real = real and a.real
        if kind == VAR:
            vm = 1 << payload
        elif kind == CONST:
            real = payload.imag == 0.0
        elif kind == ADD:
            real = real and payload[0].imag == 0.0 and all(c.imag == 0.0 for c in payload[1])
        node.vmask = vm
        node.real = real
        _table[key] = node
        return node

    def __reduce__(self):
        raise TypeError("Expr nodes are process-local and not picklable")

    # arithmetic sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(-1, as_expr(other)))

    def __rsub__(self, other):
        return add(other, scale(-1, self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), -1))

    def __rtruediv__(self, other):
        return mul(other, power(self, -1))

    def __neg__(self):
        return scale(-1, self)

    def __pow__(self, n):
        if isinstance(n, Fraction) and n.denominator == 2:
            return power(sqrt(self), n.numerator)
        if not float(n).is_integer():
            raise TypeError("only integer (or half-integer) powers are supported")
        return power(self, int(n))

    def __repr__(self):
        return f"Expr({render(self, max_nodes=40)})"

    def __str__(self):
        return render(self)

    # structural queries -----------------------------------------------
    def is_const(self) -> bool:
        return self.kind == CONST

    def is_zero(self) -> bool:
        return self.kind == CONST and self.payload == 0

    @property
    def value(self) -> complex:
        if self.kind != CONST:
            raise ValueError("not a constant")
        return self.payload

    def depends_on(self, v: "Expr") -> bool:
        return bool(self.vmask & v.vmask)


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, Fraction):
        v = float(v)
    if isinstance(v, (int, float, complex, np.number)):
        return Expr(CONST, (), _norm(v))
    raise TypeError(f"cannot convert {type(v).__name__} to Expr")


def const(v) -> Expr:
    return as_expr(v)


ZERO = const(0)
ONE = const(1)
I_UNIT = const(1j)


def x(alpha: int) -> Expr:
    """Chart coordinate x^alpha (1-based)."""
    if not 1 <= alpha <= MAX_DIM:
        raise ValueError("coordinate index out of range")
    return Expr(VAR, (), alpha - 1)


def xi(alpha: int) -> Expr:
    """Momentum coordinate xi_alpha (1-based)."""
    if not 1 <= alpha <= MAX_DIM:
        raise ValueError("momentum index out of range")
    return Expr(VAR, (), XI_OFFSET + alpha - 1)


def param(name: str) -> Expr:
    return Expr(PARAM, (), str(name))


def var_name(code: int) -> str:
    if code >= XI_OFFSET:
        return f"xi{code - XI_OFFSET + 1}"
    return f"x{code + 1}"


# builders ------------------------------------------------------------------

def add(*items) -> Expr:
    if len(items) == 1 and not isinstance(items[0], (Expr, int, float, complex)):
        items = tuple(items[0])
    c0 = 0j
    acc: dict[int, list] = {}
    for it in items:
        e = as_expr(it)
        k = e.kind
        if k == CONST:
            c0 += e.payload
        elif k == ADD and len(e.args) <= FLATTEN_LIMIT:
            c0 += e.payload[0]
            for c, t in zip(e.payload[1], e.args):
                slot = acc.get(t.id)
                if slot is None:
                    acc[t.id] = [c, t]
                else:
                    slot[0] += c
        else:
            slot = acc.get(e.id)
            if slot is None:
                acc[e.id] = [1 + 0j, e]
            else:
                slot[0] += 1
    terms = sorted((s for s in acc.values() if s[0] != 0), key=lambda s: s[1].id)
    if not terms:
        return const(c0)
    if c0 == 0 and len(terms) == 1 and terms[0][0] == 1:
        return terms[0][1]
    return Expr(ADD, tuple(t for _, t in terms), (_norm(c0), tuple(_norm(c) for c, _ in terms)))


def scale(c, e: Expr) -> Expr:
    c = _norm(c)
    if c == 0:
        return ZERO
    if c == 1:
        return e
    return add_terms(0, [(c, e)])


def add_terms(c0, pairs: Iterable[tuple]) -> Expr:
    """Linear combination ``c0 + sum(c * e)`` without creating scaled nodes."""
    acc: dict[int, list] = {}
    c0 = complex(c0)
    for c, it in pairs:
        if c == 0:
            continue
        e = as_expr(it)
        k = e.kind
        if k == CONST:
            c0 += c * e.payload
        elif k == ADD and len(e.args) <= FLATTEN_LIMIT:
            c0 += c * e.payload[0]
            for ci, t in zip(e.payload[1], e.args):
                slot = acc.get(t.id)
                if slot is None:
                    acc[t.id] = [c * ci, t]
                else:
                    slot[0] += c * ci
        else:
            slot = acc.get(e.id)
            if slot is None:
                acc[e.id] = [complex(c), e]
            else:
                slot[0] += c
    terms = sorted((s for s in acc.values() if s[0] != 0), key=lambda s: s[1].id)
    if not terms:
        return const(c0)
    if c0 == 0 and len(terms) == 1 and terms[0][0] == 1:
        return terms[0][1]
    return Expr(ADD, tuple(t for _, t in terms), (_norm(c0), tuple(_norm(c) for c, _ in terms)))


def _split_coef(e: Expr) -> tuple[complex, Expr]:
    """Write e as coef * core with core not a pure scaling."""
    if e.kind == CONST:
        return e.payload, ONE
    if e.kind == ADD and e.payload[0] == 0 and len(e.args) == 1:
        return e.payload[1][0], e.args[0]
    return 1 + 0j, e


def mul(*items) -> Expr:
    if len(items) == 1 and not isinstance(items[0], (Expr, int, float, complex)):
        items = tuple(items[0])
    coef = 1 + 0j
    pw: dict[int, list] = {}

    def put(f: Expr, p: int):
        slot = pw.get(f.id)
        if slot is None:
            pw[f.id] = [p, f]
        else:
            slot[0] += p

    for it in items:
        e = as_expr(it)
        c, core = _split_coef(e)
        coef *= c
        if coef == 0:
            return ZERO
        if core.kind == CONST:
            continue
        if core.kind == MUL:
            for f, p in zip(core.args, core.payload):
                put(f, p)
        else:
            put(core, 1)
    return _assemble(coef, pw)


def _assemble(coef: complex, pw: dict) -> Expr:
    changed = True
    # sqrt(u)^p -> u^(p//2) * sqrt(u)^(p%2); may cascade into u's factors
    while changed:
        changed = False
        for key in list(pw):
            slot = pw.get(key)
            if slot is None:
                continue
            p, f = slot
            if f.kind == SQRT and (p >= 2 or p <= -2):
                q, r = divmod(p, 2)
                slot[0] = r
                u = f.args[0]
                c, core = _split_coef(u)
                if c != 1:
                    coef *= c ** q
                if core.kind == MUL:
                    for g, pg in zip(core.args, core.payload):
                        s2 = pw.get(g.id)
                        if s2 is None:
                            pw[g.id] = [pg * q, g]
                        else:
                            s2[0] += pg * q
                elif core.kind != CONST:
                    s2 = pw.get(core.id)
                    if s2 is None:
                        pw[core.id] = [q, core]
                    else:
                        s2[0] += q
                changed = True
    factors = sorted((s for s in pw.values() if s[0] != 0), key=lambda s: s[1].id)
    if not factors:
        return const(coef)
    if len(factors) == 1 and factors[0][0] == 1:
        core = factors[0][1]
    else:
        core = Expr(MUL, tuple(f for _, f in factors), tuple(int(p) for p, _ in factors))
    return scale(coef, core)


def power(e, n: int) -> Expr:
    e = as_expr(e)
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return e
    if e.kind == CONST:
        if e.payload == 0 and n < 0:
            raise DomainError("reciprocal of zero constant", e)
        return const(e.payload ** n)
    c, core = _split_coef(e)
    if core.kind == MUL:
        pw = {f.id: [p * n, f] for f, p in zip(core.args, core.payload)}
    else:
        pw = {core.id: [n, core]}
    return _assemble(c ** n, pw)


def reciprocal(e) -> Expr:
    return power(e, -1)


def sqrt(e) -> Expr:
    e = as_expr(e)
    if e.kind == CONST:
        v = e.payload
        if v.imag == 0 and v.real < 0:
            raise DomainError("sqrt of negative real constant", e)
        return const(np.sqrt(v) if v.imag else math.sqrt(v.real))
    return Expr(SQRT, (e,), None)


def sin(e) -> Expr:
    e = as_expr(e)
    if e.kind == CONST:
        v = e.payload
        return const(math.sin(v.real) if v.imag == 0 else np.sin(v))
    return Expr(SIN, (e,), None)


def cos(e) -> Expr:
    e = as_expr(e)
    if e.kind == CONST:
        v = e.payload
        return const(math.cos(v.real) if v.imag == 0 else np.cos(v))
    return Expr(COS, (e,), None)


def exp(e) -> Expr:
    e = as_expr(e)
    if e.kind == CONST:
        v = e.payload
        return const(math.exp(v.real) if v.imag == 0 else np.exp(v))
    return Expr(EXP, (e,), None)


# differentiation -------------------------------------------------------------

def diff(e: Expr, v: Expr, n: int = 1) -> Expr:
    """Exact partial derivative of ``e`` with respect to the coordinate ``v``."""
    if v.kind != VAR:
        raise TypeError("can only differentiate with respect to x^a or xi_a")
    code = v.payload
    for _ in range(n):
        e = _diff(e, code, 1 << code)
    return e


def _diff(e: Expr, code: int, bit: int) -> Expr:
    if not (e.vmask & bit):
        return ZERO
    cache = e._d
    if cache is None:
        cache = e._d = {}
    else:
        hit = cache.get(code)
        if hit is not None:
            return hit
    k = e.kind
    if k == VAR:
        r = ONE
    elif k == ADD:
        r = add_terms(0, [(c, _diff(t, code, bit)) for c, t in zip(e.payload[1], e.args)])
    elif k == MUL:
        pairs = []
        for f, p in zip(e.args, e.payload):
            if f.vmask & bit:
                pairs.append((p, mul(e, power(f, -1), _diff(f, code, bit))))
        r = add_terms(0, pairs)
    else:
        u = e.args[0]
        du = _diff(u, code, bit)
        if k == SQRT:
            r = mul(0.5, du, power(e, -1))
        elif k == SIN:
            r = mul(cos(u), du)
        elif k == COS:
            r = scale(-1, mul(sin(u), du))
        elif k == EXP:
            r = mul(e, du)
        else:  # pragma: no cover
            raise AssertionError(k)
    cache[code] = r
    return r


def conj(e: Expr) -> Expr:
    """Complex conjugate, treating coordinates and parameters as real."""
    if e.real:
        return e
    if e._conj is not None:
        return e._conj
    k = e.kind
    if k == CONST:
        r = const(e.payload.conjugate())
    elif k == ADD:
        r = add_terms(e.payload[0].conjugate(), [(c.conjugate(), conj(t)) for c, t in zip(e.payload[1], e.args)])
    elif k == MUL:
        r = mul([power(conj(f), p) for f, p in zip(e.args, e.payload)])
    else:
        r = {SQRT: sqrt, SIN: sin, COS: cos, EXP: exp}[k](conj(e.args[0]))
    e._conj = r
    return r


def simplify(e: Expr) -> Expr:
    """Rebuild ``e`` bottom-up through the canonicalising builders.

    Best effort only: folds constants inside function calls, re-merges like
    terms and powers that became combinable after a child changed.
    """
    memo: dict[int, Expr] = {}
    for node in _topo([e]):
        k = node.kind
        if k in (CONST, VAR, PARAM):
            r = node
        elif k == ADD:
            r = add_terms(node.payload[0], [(c, memo[t.id]) for c, t in zip(node.payload[1], node.args)])
        elif k == MUL:
            r = mul([power(memo[f.id], p) for f, p in zip(node.args, node.payload)])
        else:
            r = {SQRT: sqrt, SIN: sin, COS: cos, EXP: exp}[k](memo[node.args[0].id])
        memo[node.id] = r
    return memo[e.id]


def _topo(roots: Iterable[Expr], skip=()) -> list[Expr]:
    """Nodes reachable from ``roots`` (not descending into ids in ``skip``), children first."""
    seen: dict[int, Expr] = {}
    stack = [r for r in roots if r.id not in skip]
    while stack:
        n = stack.pop()
        if n.id in seen:
            continue
        seen[n.id] = n
        for a in n.args:
            if a.id not in seen and a.id not in skip:
                stack.append(a)
    return [seen[i] for i in sorted(seen)]


def count_nodes(roots: Iterable[Expr]) -> int:
    return len(_topo(roots))


def free_params(e: Expr) -> set[str]:
    return {n.payload for n in _topo([e]) if n.kind == PARAM}


# evaluation ----------------------------------------------------------------

@dataclass(frozen=True)
class PhasePoint:
    """A point (x, xi) of the cotangent bundle minus the zero section."""

    x: tuple
    xi: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "xi", tuple(float(v) for v in self.xi))
        if len(self.x) != len(self.xi):
            raise ValueError("x and xi must have the same dimension")
        if not any(self.xi):
            raise ValueError("xi must be nonzero")


class Evaluator:
    """Vectorised evaluation of many expressions over one batch of points.

    Values are cached per node id, so expressions sharing subtrees are
    evaluated once.  With ``strict=False`` points where some subexpression is
    undefined are marked in :attr:`invalid` (and carry NaN) instead of raising.
    """

    def __init__(self, xs, xis, params: Mapping[str, float] | None = None, strict: bool = True):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        xis = np.atleast_2d(np.asarray(xis, dtype=float))
        if xs.shape != xis.shape:
            raise ValueError("x and xi batches must have matching shapes")
        self.n = xs.shape[0]
        self.dim = xs.shape[1]
        self.xs = xs
        self.xis = xis
        self.params = dict(params or {})
        self.strict = strict
        self.invalid = np.zeros(self.n, dtype=bool)
        self.first_bad: Expr | None = None
        self._cache: dict[int, np.ndarray] = {}

    @classmethod
    def at(cls, point: PhasePoint, params=None) -> "Evaluator":
        return cls([point.x], [point.xi], params)

    def _bad(self, node: Expr, mask: np.ndarray, what: str):
        if not mask.any():
            return
        if self.strict:
            raise DomainError(f"{what} in subexpression {render(node, max_nodes=30)}", node)
        self.invalid |= mask
        if self.first_bad is None:
            self.first_bad = node

    def values(self, exprs: Sequence[Expr]) -> list[np.ndarray]:
        cache = self._cache
        todo = _topo([as_expr(e) for e in exprs], cache)
        with np.errstate(all="ignore"):
            for n in todo:
                cache[n.id] = self._compute(n)
        return [cache[as_expr(e).id] for e in exprs]

    def value(self, e: Expr) -> np.ndarray:
        return self.values([e])[0]

    def _compute(self, n: Expr) -> np.ndarray:
        k = n.kind
        c = self._cache
        if k == CONST:
            return np.full(self.n, n.payload, dtype=complex)
        if k == VAR:
            code = n.payload
            if code >= XI_OFFSET:
                a = code - XI_OFFSET
                if a >= self.dim:
                    raise ValueError(f"{var_name(code)} exceeds point dimension {self.dim}")
                return self.xis[:, a].astype(complex)
            if code >= self.dim:
                raise ValueError(f"{var_name(code)} exceeds point dimension {self.dim}")
            return self.xs[:, code].astype(complex)
        if k == PARAM:
            if n.payload not in self.params:
                raise UnboundParameterError(n.payload)
            return np.full(self.n, self.params[n.payload], dtype=complex)
        if k == ADD:
            out = np.full(self.n, n.payload[0], dtype=complex)
            for coef, t in zip(n.payload[1], n.args):
                out += coef * c[t.id]
            return out
        if k == MUL:
            out = None
            for f, p in zip(n.args, n.payload):
                v = c[f.id]
                if p < 0:
                    zero = v == 0
                    if zero.any():
                        self._bad(f, zero, "division by zero")
                        v = np.where(zero, np.nan, v)
                    v = 1.0 / v
                    p = -p
                if p != 1:
                    v = v * v if p == 2 else v ** p
                out = v if out is None else out * v
            return out
        u = c[n.args[0].id]
        if k == SQRT:
            neg = (u.imag == 0) & (u.real < 0)
            if neg.any():
                self._bad(n, neg, "sqrt of negative real")
                u = np.where(neg, np.nan, u)
            return np.sqrt(u)
        if k == SIN:
            return np.sin(u)
        if k == COS:
            return np.cos(u)
        if k == EXP:
            return np.exp(u)
        raise AssertionError(k)  # pragma: no cover


def evaluate(e: Expr, p: PhasePoint, params: Mapping[str, float] | None = None) -> complex:
    """Value of ``e`` at a single phase-space point."""
    return complex(Evaluator.at(p, params).value(as_expr(e))[0])


# homogeneity -----------------------------------------------------------------

@dataclass
class HomogeneityResult:
    passed: bool
    max_residual: float
    samples: int
    skipped: int


def euler_defect(e: Expr, degree, dim: int) -> Expr:
    """sum_a xi_a d e/d xi_a - degree * e; vanishes iff e is homogeneous."""
    terms = [(1, mul(xi(a), diff(e, xi(a)))) for a in range(1, dim + 1)]
    terms.append((-float(degree), e))
    return add_terms(0, terms)


def check_homogeneity(e: Expr, degree, samples: int = 50, seed: int = 0, dim: int | None = None,
                      tol: float = 1e-10, box: float = math.pi, params=None) -> HomogeneityResult:
    """Sample the Euler identity for positive homogeneity of ``degree`` in xi.

    Residuals are relative to ``max(1, |e|)``.
    """
    e = as_expr(e)
    if dim is None:
        dim = max(1, max(((c % XI_OFFSET) + 1 for c in range(2 * XI_OFFSET) if e.vmask >> c & 1), default=1))
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-box, box, size=(samples, dim))
    xis = rng.normal(size=(samples, dim))
    xis /= np.linalg.norm(xis, axis=1, keepdims=True)
    ev = Evaluator(xs, xis, params, strict=False)
    val, defect = ev.values([e, euler_defect(e, degree, dim)])
    ok = ~ev.invalid & np.isfinite(val) & np.isfinite(defect)
    if not ok.any():
        return HomogeneityResult(False, math.inf, samples, samples)
    res = np.abs(defect[ok]) / np.maximum(1.0, np.abs(val[ok]))
    worst = float(res.max())
    return HomogeneityResult(worst <= tol, worst, samples, int((~ok).sum()))


# rendering -------------------------------------------------------------------

def _fmt_const(c: complex) -> str:
    def num(v: float) -> str:
        if float(v).is_integer() and abs(v) < 1e15:
            return str(int(v))
        return repr(float(v))

    if c.imag == 0:
        return num(c.real)
    if c.real == 0:
        return f"{num(c.imag)}*I" if c.imag not in (1, -1) else ("I" if c.imag == 1 else "-I")
    return f"({num(c.real)}{'+' if c.imag >= 0 else '-'}{num(abs(c.imag))}*I)"


def _render_node(n: Expr, sub) -> str:
    k = n.kind
    if k == CONST:
        return _fmt_const(n.payload)
    if k == VAR:
        return var_name(n.payload)
    if k == PARAM:
        return n.payload
    if k == ADD:
        parts = []
        c0 = n.payload[0]
        for c, t in zip(n.payload[1], n.args):
            s = sub(t)
            if c == 1:
                parts.append(s)
            elif c == -1:
                parts.append("-" + s)
            else:
                parts.append(f"{_fmt_const(c)}*{s}")
        if c0 != 0:
            parts.append(_fmt_const(c0))
        out = " + ".join(parts).replace("+ -", "- ")
        return f"({out})" if len(parts) > 1 else out
    if k == MUL:
        parts = []
        for f, p in zip(n.args, n.payload):
            s = sub(f)
            parts.append(s if p == 1 else f"{s}^{p}" if p > 0 else f"{s}^({p})")
        return "*".join(parts)
    return f"{_FUNC_NAMES[k]}({sub(n.args[0])})"


def render(e: Expr, max_nodes: int | None = None, cse_threshold: int = 2000) -> str:
    """Human-readable form of ``e``.

    Small trees are printed inline.  If the expanded tree would exceed
    ``cse_threshold`` characters, shared subexpressions that are used more
    than once are bound to names ``t<k>`` listed before the result.
    """
    e = as_expr(e)
    nodes = _topo([e])
    if max_nodes is not None and len(nodes) > max_nodes:
        return f"<{len(nodes)}-node expression>"
    uses: dict[int, int] = {}
    for n in nodes:
        for a in n.args:
            uses[a.id] = uses.get(a.id, 0) + 1
    inline: dict[int, str] = {}
    for n in nodes:
        inline[n.id] = _render_node(n, lambda t: inline[t.id])
        if len(inline[n.id]) > cse_threshold:
            break
    else:
        return inline[e.id]
    names: dict[int, str] = {}
    lines: list[str] = []
    text: dict[int, str] = {}
    for n in nodes:
        s = _render_node(n, lambda t: names.get(t.id) or text[t.id])
        if n is not e and uses.get(n.id, 0) > 1 and n.kind not in (CONST, VAR, PARAM):
            name = f"t{len(names)}"
            names[n.id] = name
            lines.append(f"{name} = {s}")
        text[n.id] = s
    lines.append(text[e.id])
    return "\n".join(lines)
