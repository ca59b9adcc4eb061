"""Riemannian and Weitzenboeck geometry of a framed chart, as exact expressions.

Index conventions: ``g[a][b]`` is g_{ab}; ``christoffel[a][b][c]`` is
Gamma^a_{bc}; ``weitzenbock[a][b][c]`` is Upsilon^a_{bc} and likewise for the
contorsion.  Coordinates are 0-based in the arrays and 1-based in ``ex.x``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import expr as ex
from .sampling import Sampler


class FramingError(ValueError):
    """Framing is not orthonormal or not positively oriented."""


def _det(mat):
    n = len(mat)
    if n == 1:
        return mat[0][0]
    terms = []
    for perm in itertools.permutations(range(n)):
        sign = np.linalg.det(np.eye(n)[list(perm)])
        terms.append((round(sign), ex.mul(*[mat[i][perm[i]] for i in range(n)])))
    return ex.add_terms(0, terms)


def _minor(mat, i, j):
    return [[v for c, v in enumerate(r) if c != j] for k, r in enumerate(mat) if k != i]


def inverse(mat):
    """Exact inverse of a small square matrix of expressions (adjugate formula)."""
    n = len(mat)
    det = _det(mat)
    if n == 1:
        return [[ex.reciprocal(det)]]
    inv_det = ex.reciprocal(det)
    return [[ex.mul((-1) ** (i + j), _det(_minor(mat, j, i)), inv_det) for j in range(n)] for i in range(n)]


def levi_civita(d):
    """Permutation symbol as a dict {index tuple: sign}."""
    out = {}
    for perm in itertools.permutations(range(d)):
        out[perm] = round(np.linalg.det(np.eye(d)[list(perm)]))
    return out


@dataclass
class Framing:
    """Orthonormal framing e_j^a (``e[j][a]``) of a chart with metric ``g``."""

    d: int
    g: list
    e: list
    box: tuple
    name: str = ""
    params: dict = field(default_factory=dict)

    def validate(self, samples: int = 20, seed: int = 0, tol: float = 1e-9) -> None:
        s = Sampler(self.box, samples, seed, self.params)
        d = self.d
        gram = [[ex.add_terms(0, [(1, ex.mul(self.g[a][b], self.e[i][a], self.e[j][b]))
                                  for a in range(d) for b in range(d)]) for j in range(d)] for i in range(d)]
        vals, bad = s.scalar_values([gram[i][j] for i in range(d) for j in range(d)] + [_det(self.e)])
        G = np.stack(vals[:-1], axis=-1).reshape(-1, d, d)
        err = np.abs(G - np.eye(d))[~bad].max()
        if err > tol:
            raise FramingError(f"framing not orthonormal (max defect {err:.3e})")
        if (vals[-1].real[~bad] <= 0).any():
            raise FramingError("framing not positively oriented in this chart")


def flat_metric(d):
    return [[ex.ONE if a == b else ex.ZERO for b in range(d)] for a in range(d)]


def constant_framing(d: int, box=None) -> Framing:
    box = box or tuple((0.0, 2 * np.pi) for _ in range(d))
    return Framing(d, flat_metric(d), flat_metric(d), box, name="constant")


def rotating_framing_t2(theta: ex.Expr) -> Framing:
    """e_1 = (cos t, sin t), e_2 = (-sin t, cos t) on the flat 2-torus."""
    c, s = ex.cos(theta), ex.sin(theta)
    return Framing(2, flat_metric(2), [[c, s], [ex.scale(-1, s), c]], ((0.0, 2 * np.pi),) * 2, name="rotating")


def twisted_framing_t3(theta: ex.Expr) -> Framing:
    """Frame rotating in the (x1, x2)-plane by angle theta(x) on the flat 3-torus."""
    c, s = ex.cos(theta), ex.sin(theta)
    e = [[c, s, ex.ZERO], [ex.scale(-1, s), c, ex.ZERO], [ex.ZERO, ex.ZERO, ex.ONE]]
    return Framing(3, flat_metric(3), e, ((0.0, 2 * np.pi),) * 3, name="twisted")


def s3_framing(flip: bool | None = None) -> Framing:
    """Round S^3 in stereographic coordinates with the left-invariant ambient framing.

    Chart: y -> ((2y, |y|^2 - 1) / (1 + |y|^2)), projecting from the north pole.
    The third coordinate is reflected when needed so that the framing is
    positively oriented with respect to the chart (``flip=None`` decides).
    """
    if flip is None:
        for f in (False, True):
            fr = s3_framing(f)
            try:
                fr.validate(samples=8)
                return fr
            except FramingError:
                continue
        raise FramingError("no orientation makes the S^3 framing positive")  # pragma: no cover
    sgn = -1 if flip else 1
    z = [ex.x(a) for a in (1, 2, 3)]
    y = [z[0], z[1], ex.scale(sgn, z[2])]
    r2 = ex.add([ex.power(v, 2) for v in y])
    one_r2 = ex.add(1, r2)
    inv = ex.reciprocal(one_r2)
    X = [ex.mul(2, v, inv) for v in y] + [ex.mul(ex.add(r2, -1), inv)]
    x1, x2, x3, x4 = X
    neg = lambda v: ex.scale(-1, v)  # noqa: E731
    ambient = [
        [neg(x4), neg(x3), x2, x1],
        [x3, neg(x4), neg(x1), x2],
        [neg(x2), x1, neg(x4), x3],
    ]
    half = ex.scale(0.5, one_r2)
    e = []
    for V in ambient:
        comps = [ex.simplify(ex.mul(half, ex.add(V[i], ex.mul(y[i], V[3])))) for i in range(3)]
        comps[2] = ex.scale(sgn, comps[2])
        e.append(comps)
    conf = ex.mul(4, ex.power(one_r2, -2))
    g = [[conf if a == b else ex.ZERO for b in range(3)] for a in range(3)]
    return Framing(3, g, e, ((-1.0, 1.0),) * 3, name="s3-stereographic" + ("-flipped" if flip else ""))


class Geometry:
    """All derived tensors of a framed chart, computed lazily as exact expressions."""

    def __init__(self, fr: Framing):
        self.fr = fr
        self.d = fr.d
        self.g = fr.g

    @cached_property
    def g_inv(self):
        return inverse(self.g)

    @cached_property
    def det_g(self):
        return ex.simplify(_det(self.g))

    @cached_property
    def rho(self):
        return ex.sqrt(self.det_g)

    @cached_property
    def coframe(self):
        """e^j_a = delta^{jk} g_{ab} e_k^b, stored as coframe[j][a]."""
        d, g, e = self.d, self.g, self.fr.e
        return [[ex.add([ex.mul(g[a][b], e[j][b]) for b in range(d)]) for a in range(d)] for j in range(d)]

    @cached_property
    def christoffel(self):
        d, g, gi = self.d, self.g, self.g_inv
        X = [ex.x(a + 1) for a in range(d)]
        dg = [[[ex.diff(g[a][b], X[c]) for c in range(d)] for b in range(d)] for a in range(d)]
        out = []
        for a in range(d):
            out.append([[ex.add_terms(0, [(0.5, ex.mul(gi[a][dd], ex.add_terms(0, [
                (1, dg[dd][c][b]), (1, dg[dd][b][c]), (-1, dg[b][c][dd])])))
                for dd in range(d)]) for c in range(d)] for b in range(d)])
        return out

    @cached_property
    def weitzenbock(self):
        """Upsilon^a_{bc} = -e^j_c d_b e_j^a."""
        d, e, co = self.d, self.fr.e, self.coframe
        X = [ex.x(a + 1) for a in range(d)]
        return [[[ex.add_terms(0, [(-1, ex.mul(co[j][c], ex.diff(e[j][a], X[b]))) for j in range(d)])
                  for c in range(d)] for b in range(d)] for a in range(d)]

    @cached_property
    def contorsion(self):
        d, U, G = self.d, self.weitzenbock, self.christoffel
        return [[[ex.add_terms(0, [(1, U[a][b][c]), (-1, G[a][b][c])]) for c in range(d)] for b in range(d)]
                for a in range(d)]

    def lower_first(self, T):
        d, g = self.d, self.g
        return [[[ex.add([ex.mul(g[a][mu], T[mu][b][c]) for mu in range(d)]) for c in range(d)]
                 for b in range(d)] for a in range(d)]

    @cached_property
    def contorsion_lowered(self):
        return self.lower_first(self.contorsion)

    @cached_property
    def E(self):
        """Levi-Civita density rho * epsilon as {index tuple: expr}."""
        return {k: ex.scale(s, self.rho) for k, s in levi_civita(self.d).items()}

    @cached_property
    def kstar(self):
        """K*_{ab} = 1/2 K^mu_a^nu E_{mu nu b} (d = 3)."""
        if self.d != 3:
            raise ValueError("dual contorsion is defined for d = 3")
        d, K, gi, E = self.d, self.contorsion, self.g_inv, self.E
        # K^mu_a^nu = K^mu_{a l} g^{l nu}
        Kr = [[[ex.add([ex.mul(K[mu][a][l], gi[l][nu]) for l in range(d)]) for nu in range(d)]
               for a in range(d)] for mu in range(d)]
        out = [[None] * d for _ in range(d)]
        for a in range(d):
            for b in range(d):
                terms = [(0.5, ex.mul(Kr[mu][a][nu], E[(mu, nu, b)])) for mu in range(d) for nu in range(d)
                         if (mu, nu, b) in E]
                out[a][b] = ex.add_terms(0, terms)
        return out

    @cached_property
    def kstar_mixed(self):
        """K*^a_b = g^{a mu} K*_{mu b}."""
        d, gi, Ks = self.d, self.g_inv, self.kstar
        return [[ex.add([ex.mul(gi[a][mu], Ks[mu][b]) for mu in range(d)]) for b in range(d)] for a in range(d)]

    @cached_property
    def kstar_trace(self):
        return ex.add([self.kstar_mixed[a][a] for a in range(self.d)])

    @cached_property
    def torsion(self):
        U, d = self.weitzenbock, self.d
        return [[[ex.add_terms(0, [(1, U[a][b][c]), (-1, U[a][c][b])]) for c in range(d)] for b in range(d)]
                for a in range(d)]

    @cached_property
    def torsion_covector(self):
        """t_a = 1/2 T_a^{bc} E_{bc} (d = 2)."""
        if self.d != 2:
            raise ValueError("torsion covector is defined for d = 2")
        d, g, gi, T, E = self.d, self.g, self.g_inv, self.torsion, self.E
        out = []
        for a in range(d):
            terms = []
            for b, c in E:
                for mu in range(d):
                    for k in range(d):
                        for l in range(d):
                            terms.append((0.5, ex.mul(g[a][mu], T[mu][k][l], gi[k][b], gi[l][c], E[(b, c)])))
            out.append(ex.add_terms(0, terms))
        return out

    @cached_property
    def torsion_vector(self):
        d, gi, t = self.d, self.g_inv, self.torsion_covector
        return [ex.add([ex.mul(gi[a][b], t[b]) for b in range(d)]) for a in range(d)]

    @cached_property
    def riemann(self):
        """R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb} + Gamma^a_{ck} Gamma^k_{db} - Gamma^a_{dk} Gamma^k_{cb}."""
        n, G = self.d, self.christoffel
        X = [ex.x(a + 1) for a in range(n)]
        R = [[[[None] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
        for a, b, c, dd in itertools.product(range(n), repeat=4):
            terms = [(1, ex.diff(G[a][dd][b], X[c])), (-1, ex.diff(G[a][c][b], X[dd]))]
            for k in range(n):
                terms += [(1, ex.mul(G[a][c][k], G[k][dd][b])), (-1, ex.mul(G[a][dd][k], G[k][c][b]))]
            R[a][b][c][dd] = ex.add_terms(0, terms)
        return R

    @cached_property
    def ricci(self):
        """Ric_{bd} = R^a_{bad}."""
        n, R = self.d, self.riemann
        return [[ex.add([R[a][b][a][dd] for a in range(n)]) for dd in range(n)] for b in range(n)]

    @cached_property
    def ricci_mixed(self):
        """Ric^a_b."""
        n, gi, Ric = self.d, self.g_inv, self.ricci
        return [[ex.add([ex.mul(gi[a][c], Ric[c][b]) for c in range(n)]) for b in range(n)] for a in range(n)]


def geometry_from_framing(fr: Framing, validate: bool = True) -> Geometry:
    if validate:
        fr.validate()
    return Geometry(fr)
