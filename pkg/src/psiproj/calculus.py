"""Polyhomogeneous matrix symbols in left quantization.

A :class:`SymbolExpansion` stores the components c_0, c_1, ..., c_K of a
classical symbol, c_k homogeneous of degree ``top - k`` in xi.  Every
operation propagates the depth to which its output can be trusted; asking
for a component below that depth raises :class:`TruncationError`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import expr as ex
from .expr import Expr


class TruncationError(IndexError):
    """A component below the trusted truncation depth was requested."""


class MatrixFn:
    """An m x m matrix of expressions (no homogeneity degree attached)."""

    __slots__ = ("rows", "m")

    def __init__(self, rows):
        rows = tuple(tuple(ex.as_expr(v) for v in r) for r in rows)
        m = len(rows)
        if any(len(r) != m for r in rows):
            raise ValueError("MatrixFn must be square")
        self.rows = rows
        self.m = m

    @classmethod
    def zeros(cls, m: int) -> "MatrixFn":
        return cls([[ex.ZERO] * m for _ in range(m)])

    @classmethod
    def identity(cls, m: int) -> "MatrixFn":
        return cls([[ex.ONE if i == j else ex.ZERO for j in range(m)] for i in range(m)])

    @classmethod
    def constant(cls, array) -> "MatrixFn":
        a = np.asarray(array, dtype=complex)
        return cls([[ex.const(v) for v in row] for row in a])

    @classmethod
    def scalar(cls, e, m: int) -> "MatrixFn":
        e = ex.as_expr(e)
        return cls([[e if i == j else ex.ZERO for j in range(m)] for i in range(m)])

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def entries(self) -> list[Expr]:
        return [v for r in self.rows for v in r]

    def is_zero(self) -> bool:
        """Structural zero test (no sampling)."""
        return all(v.is_zero() for r in self.rows for v in r)

    def __add__(self, other: "MatrixFn") -> "MatrixFn":
        return MatrixFn([[ex.add(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)])

    def __sub__(self, other: "MatrixFn") -> "MatrixFn":
        return MatrixFn([[ex.add_terms(0, [(1, a), (-1, b)]) for a, b in zip(ra, rb)]
                         for ra, rb in zip(self.rows, other.rows)])

    def __neg__(self) -> "MatrixFn":
        return self.scale(-1)

    def scale(self, c) -> "MatrixFn":
        if isinstance(c, Expr) and not c.is_const():
            return MatrixFn([[ex.mul(c, v) for v in r] for r in self.rows])
        c = complex(c.value if isinstance(c, Expr) else c)
        return MatrixFn([[ex.scale(c, v) for v in r] for r in self.rows])

    __mul__ = scale
    __rmul__ = scale

    def __matmul__(self, other: "MatrixFn") -> "MatrixFn":
        m = self.m
        if other.m != m:
            raise ValueError("dimension mismatch")
        out = []
        cols = list(zip(*other.rows))
        for r in self.rows:
            row = []
            for col in cols:
                terms = [ex.mul(a, b) for a, b in zip(r, col) if not (a.is_zero() or b.is_zero())]
                row.append(ex.add(terms) if terms else ex.ZERO)
            out.append(row)
        return MatrixFn(out)

    @property
    def H(self) -> "MatrixFn":
        """Conjugate transpose."""
        return MatrixFn([[ex.conj(self.rows[j][i]) for j in range(self.m)] for i in range(self.m)])

    @property
    def T(self) -> "MatrixFn":
        return MatrixFn([[self.rows[j][i] for j in range(self.m)] for i in range(self.m)])

    def diff(self, v: Expr) -> "MatrixFn":
        return MatrixFn([[ex.diff(e, v) for e in r] for r in self.rows])

    def map(self, f) -> "MatrixFn":
        return MatrixFn([[f(e) for e in r] for r in self.rows])

    def trace(self) -> Expr:
        return ex.add([self.rows[i][i] for i in range(self.m)])

    def evaluate(self, ev: ex.Evaluator) -> np.ndarray:
        """Values on the evaluator's batch, shape (N, m, m)."""
        vals = ev.values(self.entries())
        return np.stack(vals, axis=-1).reshape(ev.n, self.m, self.m)

    def __repr__(self):
        return f"MatrixFn({[[ex.render(v, max_nodes=12) for v in r] for r in self.rows]})"


def matsum(mats: Iterable, m: int | None = None) -> MatrixFn:
    """Entrywise sum of MatrixFns (or (coef, MatrixFn) pairs) in one pass."""
    pairs = [(1, a) if isinstance(a, MatrixFn) else a for a in mats]
    if not pairs:
        if m is None:
            raise ValueError("empty sum needs m")
        return MatrixFn.zeros(m)
    m = pairs[0][1].m
    entries = [[[] for _ in range(m)] for _ in range(m)]
    for c, a in pairs:
        for i in range(m):
            for j in range(m):
                v = a.rows[i][j]
                if not v.is_zero():
                    entries[i][j].append((c, v))
    return MatrixFn([[ex.add_terms(0, entries[i][j]) for j in range(m)] for i in range(m)])


def commutator_matrix(a: MatrixFn, b: MatrixFn) -> MatrixFn:
    return a @ b - b @ a


def _xs(d):
    return [ex.x(a) for a in range(1, d + 1)]


def _xis(d):
    return [ex.xi(a) for a in range(1, d + 1)]


def poisson(b: MatrixFn, c: MatrixFn, d: int) -> MatrixFn:
    """Matrix Poisson bracket sum_a (b_{x^a} c_{xi_a} - b_{xi_a} c_{x^a}); order of products kept."""
    terms = []
    for xa, xia in zip(_xs(d), _xis(d)):
        terms += [(1, b.diff(xa) @ c.diff(xia)), (-1, b.diff(xia) @ c.diff(xa))]
    return matsum(terms, b.m)


def generalized_poisson(b: MatrixFn, c: MatrixFn, e: MatrixFn, d: int) -> MatrixFn:
    """sum_a (b_{x^a} c e_{xi_a} - b_{xi_a} c e_{x^a})."""
    terms = []
    for xa, xia in zip(_xs(d), _xis(d)):
        terms += [(1, b.diff(xa) @ c @ e.diff(xia)), (-1, b.diff(xia) @ c @ e.diff(xa))]
    return matsum(terms, b.m)


def mixed_laplacian(b: MatrixFn, d: int) -> MatrixFn:
    """sum_a d^2 b / dx^a dxi_a."""
    return matsum([b.diff(xa).diff(xia) for xa, xia in zip(_xs(d), _xis(d))], b.m)


@dataclass(frozen=True)
class SymbolExpansion:
    """Truncated classical symbol c_0 + c_1 + ... with deg c_k = top - k.

    ``depth`` is the relative order down to which the expansion is trusted;
    stored ``components`` may be shorter (missing ones are zero).
    """

    top: Fraction
    components: tuple
    depth: int
    d: int

    def __post_init__(self):
        object.__setattr__(self, "top", Fraction(self.top))
        comps = tuple(self.components)
        if not comps:
            raise ValueError("need at least one component to fix the matrix size")
        m = comps[0].m
        if any(c.m != m for c in comps):
            raise ValueError("components must share the matrix dimension")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        comps = comps[: self.depth + 1]
        # drop structurally zero trailing components
        while len(comps) > 1 and comps[-1].is_zero():
            comps = comps[:-1]
        object.__setattr__(self, "components", comps)

    @property
    def m(self) -> int:
        return self.components[0].m

    @property
    def bottom(self) -> Fraction:
        return self.top - self.depth

    @classmethod
    def single(cls, comp: MatrixFn, degree, depth: int, d: int) -> "SymbolExpansion":
        return cls(Fraction(degree), (comp,), depth, d)

    @classmethod
    def identity(cls, m: int, depth: int, d: int) -> "SymbolExpansion":
        return cls(Fraction(0), (MatrixFn.identity(m),), depth, d)

    @classmethod
    def zero(cls, m: int, top, depth: int, d: int) -> "SymbolExpansion":
        return cls(Fraction(top), (MatrixFn.zeros(m),), depth, d)

    def component(self, k: int) -> MatrixFn:
        return extract_component(self, k)

    def at_degree(self, degree) -> MatrixFn:
        k = self.top - Fraction(degree)
        if k.denominator != 1:
            raise ValueError("degree not on this expansion's ladder")
        return extract_component(self, int(k))

    def truncate(self, depth: int) -> "SymbolExpansion":
        if depth > self.depth:
            raise TruncationError(f"cannot extend depth {self.depth} to {depth}")
        return SymbolExpansion(self.top, self.components, depth, self.d)

    def relabel(self, top) -> "SymbolExpansion":
        """Same components regarded with a different leading degree.

        Used when the leading components vanish identically, e.g. a
        commutator [A, P] read as an operator one order lower.
        """
        shift = self.top - Fraction(top)
        if shift.denominator != 1 or shift < 0:
            raise ValueError("can only drop an integer number of leading components")
        s = int(shift)
        comps = [extract_component(self, k) for k in range(s, min(self.depth, len(self.components) - 1 + s) + 1)]
        if not comps:
            comps = [MatrixFn.zeros(self.m)]
        return SymbolExpansion(Fraction(top), tuple(comps), self.depth - s, self.d)

    def __add__(self, other: "SymbolExpansion") -> "SymbolExpansion":
        return combine([(1, self), (1, other)])

    def __sub__(self, other: "SymbolExpansion") -> "SymbolExpansion":
        return combine([(1, self), (-1, other)])

    def __neg__(self) -> "SymbolExpansion":
        return self.scale(-1)

    def scale(self, c) -> "SymbolExpansion":
        return SymbolExpansion(self.top, tuple(comp.scale(c) for comp in self.components), self.depth, self.d)

    def map(self, f) -> "SymbolExpansion":
        return SymbolExpansion(self.top, tuple(f(c) for c in self.components), self.depth, self.d)


def extract_component(b: SymbolExpansion, k: int) -> MatrixFn:
    """Component of degree ``b.top - k`` (zero if not stored but within depth)."""
    if k < 0 or k > b.depth:
        raise TruncationError(f"component {k} requested from expansion trusted to depth {b.depth}")
    if k < len(b.components):
        return b.components[k]
    return MatrixFn.zeros(b.m)


def combine(items: Sequence[tuple]) -> SymbolExpansion:
    """Linear combination sum(c_i * B_i) of expansions on a common degree ladder."""
    items = [(c, b) for c, b in items]
    if not items:
        raise ValueError("empty combination")
    m, d = items[0][1].m, items[0][1].d
    top = max(b.top for _, b in items)
    bottom = max(b.bottom for _, b in items)
    for _, b in items:
        if (top - b.top).denominator != 1:
            raise ValueError("expansions live on different degree ladders")
        if b.m != m:
            raise ValueError("dimension mismatch")
    depth = int(top - bottom)
    comps = []
    for k in range(depth + 1):
        deg = top - k
        entries = [[[] for _ in range(m)] for _ in range(m)]
        for c, b in items:
            kb = b.top - deg
            if kb < 0 or kb >= len(b.components):
                continue
            comp = b.components[int(kb)]
            for i in range(m):
                for j in range(m):
                    v = comp.rows[i][j]
                    if not v.is_zero():
                        entries[i][j].append((c, v))
        comps.append(MatrixFn([[ex.add_terms(0, entries[i][j]) for j in range(m)] for i in range(m)]))
    return SymbolExpansion(top, tuple(comps), depth, d)


def _multi_indices(d: int, order: int):
    """Yield (sorted variable-index tuple, 1/alpha!) for |alpha| = order."""
    for combo in itertools.combinations_with_replacement(range(d), order):
        fact = 1
        for a in set(combo):
            fact *= math.factorial(combo.count(a))
        yield combo, 1.0 / fact


class _DerivCache:
    def __init__(self, d: int):
        self.d = d
        self.cache: dict = {}

    def get(self, comp: MatrixFn, combo: tuple, kind: str) -> MatrixFn:
        key = (id(comp), combo, kind)
        hit = self.cache.get(key)
        if hit is not None:
            return hit[1]
        if not combo:
            res = comp
        else:
            prev = self.get(comp, combo[:-1], kind)
            a = combo[-1] + 1
            res = prev.diff(ex.xi(a) if kind == "xi" else ex.x(a))
        self.cache[key] = (comp, res)  # keep comp alive so id() stays unique
        return res


def _compose_n(b: SymbolExpansion, c: SymbolExpansion, n: int, dc: _DerivCache) -> MatrixFn:
    terms: list = []
    for order in range(n + 1):
        phase = (-1j) ** order
        for i in range(n - order + 1):
            j = n - order - i
            if i >= len(b.components) or j >= len(c.components):
                continue
            bi, cj = b.components[i], c.components[j]
            if bi.is_zero() or cj.is_zero():
                continue
            for combo, inv_fact in _multi_indices(b.d, order):
                db = dc.get(bi, combo, "xi")
                if db.is_zero():
                    continue
                dcj = dc.get(cj, combo, "x")
                if dcj.is_zero():
                    continue
                terms.append((phase * inv_fact, db @ dcj))
    return matsum(terms, b.m)


def _check_pair(b: SymbolExpansion, c: SymbolExpansion):
    if b.m != c.m or b.d != c.d:
        raise ValueError("dimension mismatch")


def compose(b: SymbolExpansion, c: SymbolExpansion, depth: int | None = None) -> SymbolExpansion:
    """Left symbol of the product BC: sum_alpha (1/alpha!) d_xi^alpha b * D_x^alpha c, D_x = -i d_x."""
    _check_pair(b, c)
    limit = min(b.depth, c.depth)
    depth = limit if depth is None else depth
    if depth > limit:
        raise TruncationError(f"composition trusted only to depth {limit}, {depth} requested")
    dc = _DerivCache(b.d)
    comps = [_compose_n(b, c, n, dc) for n in range(depth + 1)]
    return SymbolExpansion(b.top + c.top, tuple(comps), depth, b.d)


def compose_component(b: SymbolExpansion, c: SymbolExpansion, k: int) -> MatrixFn:
    """extract_component(compose(b, c), k) without building the other components."""
    _check_pair(b, c)
    if k < 0 or k > min(b.depth, c.depth):
        raise TruncationError(f"composition trusted only to depth {min(b.depth, c.depth)}, {k} requested")
    return _compose_n(b, c, k, _DerivCache(b.d))


def adjoint(b: SymbolExpansion, depth: int | None = None) -> SymbolExpansion:
    """Left symbol of the formal adjoint: sum_alpha (1/alpha!) d_xi^alpha D_x^alpha (b^H)."""
    depth = b.depth if depth is None else depth
    if depth > b.depth:
        raise TruncationError(f"adjoint trusted only to depth {b.depth}")
    d = b.d
    dc = _DerivCache(d)
    hs = [comp.H for comp in b.components]
    comps = []
    for n in range(depth + 1):
        terms: list = []
        for order in range(n + 1):
            i = n - order
            if i >= len(hs) or hs[i].is_zero():
                continue
            phase = (-1j) ** order
            for combo, inv_fact in _multi_indices(d, order):
                t = dc.get(hs[i], combo, "x")
                if t.is_zero():
                    continue
                t = dc.get(t, combo, "xi")
                if t.is_zero():
                    continue
                terms.append((phase * inv_fact, t))
        comps.append(matsum(terms, b.m))
    return SymbolExpansion(b.top, tuple(comps), depth, d)


def commutator(b: SymbolExpansion, c: SymbolExpansion, depth: int | None = None) -> SymbolExpansion:
    return compose(b, c, depth) - compose(c, b, depth)


def symmetrize(b: SymbolExpansion, depth: int | None = None) -> SymbolExpansion:
    """(B + B*)/2, self-adjoint to the given depth."""
    depth = b.depth if depth is None else depth
    return combine([(0.5, b.truncate(depth)), (0.5, adjoint(b, depth))])


def subprincipal(b: SymbolExpansion) -> MatrixFn:
    """c_1 + (i/2) sum_a d^2 c_0 / dx^a dxi_a."""
    if b.depth < 1:
        raise TruncationError("subprincipal symbol needs depth >= 1")
    return extract_component(b, 1) + mixed_laplacian(extract_component(b, 0), b.d).scale(0.5j)


def differential_symbol(coeffs: dict, m: int, d: int) -> SymbolExpansion:
    """Symbol of sum_beta a_beta(x) d_x^beta from a {multi-index tuple: MatrixFn} map.

    Multi-indices are tuples of 1-based coordinate indices, e.g. (1, 2) for
    d^2/dx^1 dx^2.  d_x^beta has symbol (i xi)^beta.
    """
    order = max((len(k) for k in coeffs), default=0)
    comps = []
    for deg in range(order, -1, -1):
        terms = []
        for beta, a in coeffs.items():
            if len(beta) != deg:
                continue
            mono = ex.mul([ex.xi(b) for b in beta]) if beta else ex.ONE
            terms.append(a.scale(ex.mul((1j) ** deg, mono)))
        comps.append(matsum(terms, m))
    return SymbolExpansion(Fraction(order), tuple(comps), order, d)


def with_depth(b: SymbolExpansion, depth: int) -> SymbolExpansion:
    """Declare an exactly known (finite) symbol trusted to a larger depth."""
    return SymbolExpansion(b.top, b.components, depth, b.d)
