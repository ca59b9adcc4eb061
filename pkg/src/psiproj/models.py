"""Built-in operators with closed-form spectral data of their principal symbols."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import expr as ex
from . import geometry as geo_mod
from .calculus import (MatrixFn, SymbolExpansion, combine, compose, differential_symbol, matsum, mixed_laplacian,
                       subprincipal, symmetrize, with_depth)
from .spectral import SpectralData

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
EPS = np.array([[0, 1], [-1, 0]], dtype=complex)

MODEL_NAMES = ("dirac-s3", "dirac-t3", "lame-t2", "random2x2", "scalar-trivial")


class ModelError(ValueError):
    """Invalid model parameters."""


@dataclass
class ModelSpec:
    name: str
    d: int
    m: int
    s: Fraction
    A: SymbolExpansion
    spectral: SpectralData
    box: tuple
    chart: str = ""
    params: dict = field(default_factory=dict)
    geometry: object = None
    expected: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return self.A.depth

    @property
    def A_prin(self) -> MatrixFn:
        return self.A.component(0)

    @property
    def A_sub(self) -> MatrixFn:
        return subprincipal(self.A)

    def negated(self) -> "ModelSpec":
        return replace(self, name=f"-({self.name})", A=self.A.scale(-1), spectral=self.spectral.negated(),
                       expected={})


def _euclid_h(d):
    return ex.sqrt(ex.add([ex.power(ex.xi(a), 2) for a in range(1, d + 1)]))


def _metric_h2(geom, d):
    gi = geom.g_inv
    return ex.add([ex.mul(gi[a][b], ex.xi(a + 1), ex.xi(b + 1)) for a in range(d) for b in range(d)])


def dirac_model(geom: geo_mod.Geometry, depth: int = 3, name: str = "dirac") -> ModelSpec:
    """Massless Dirac operator of a framed Riemannian 3-manifold chart."""
    if geom.d != 3:
        raise ModelError("the Dirac model needs d = 3")
    d, e, g, Gam = 3, geom.fr.e, geom.g, geom.christoffel
    X = [ex.x(a + 1) for a in range(d)]
    pauli = [MatrixFn.constant(s) for s in PAULI]
    sig_up = [matsum([pauli[j].scale(e[j][a]) for j in range(d)]) for a in range(d)]
    sig_dn = [matsum([sig_up[c].scale(g[b][c]) for c in range(d)]) for b in range(d)]
    prin = matsum([sig_up[a].scale(ex.xi(a + 1)) for a in range(d)])
    terms = []
    for a in range(d):
        for b in range(d):
            inner = matsum([sig_up[b].diff(X[a])] + [sig_up[c].scale(Gam[b][a][c]) for c in range(d)])
            terms.append((0.25, sig_up[a] @ sig_dn[b] @ inner))
            terms.append((-0.5, sig_up[a].scale(Gam[b][a][b])))
    deg0 = matsum(terms).scale(-1j)
    A = SymbolExpansion(1, (prin, deg0), depth, d)
    h = ex.sqrt(_metric_h2(geom, d))
    I2 = MatrixFn.identity(2)
    over_h = prin.scale(ex.reciprocal(h))
    spectral = SpectralData([(1, h, (I2 + over_h).scale(0.5)), (-1, ex.scale(-1, h), (I2 - over_h).scale(0.5))], 1)
    Kmix = geom.kstar_mixed
    modulus_sub = matsum([sig_up[b].scale(ex.mul(Kmix[a][b], ex.xi(a + 1))) for a in range(d) for b in range(d)])
    expected = {
        "sub": MatrixFn.scalar(ex.scale(-0.5, geom.kstar_trace), 2),
        "modulus_sub": modulus_sub.scale(ex.mul(-0.5, ex.reciprocal(h))),
    }
    return ModelSpec(name, d, 2, Fraction(1), A, spectral, geom.fr.box, chart=geom.fr.name, params={},
                     geometry=geom, expected=expected)


def dirac_s3(depth: int = 3) -> ModelSpec:
    geom = geo_mod.geometry_from_framing(geo_mod.s3_framing())
    model = dirac_model(geom, depth, "dirac-s3")
    d = 3
    kg = [[ex.add(geom.kstar[a][b], geom.g[a][b]) for b in range(d)] for a in range(d)]
    model.expected["kstar_plus_g"] = MatrixFn(kg)
    model.expected["sub_s3"] = MatrixFn.scalar(1.5, 2)
    model.expected["modulus_sub_s3"] = model.A_prin.scale(ex.reciprocal(ex.scale(2, model.spectral.h(1))))
    return model


def dirac_t3(twist: float = 1.0, depth: int = 3) -> ModelSpec:
    """Flat 3-torus; the frame rotates by twist * (sin x3 + cos x1) about the x3 axis."""
    if twist == 0:
        fr = geo_mod.constant_framing(3)
    else:
        theta = ex.scale(twist, ex.add(ex.sin(ex.x(3)), ex.cos(ex.x(1))))
        fr = geo_mod.twisted_framing_t3(theta)
    model = dirac_model(geo_mod.geometry_from_framing(fr), depth, "dirac-t3")
    model.params = {"twist": twist}
    return model


def _fmul(f, B: SymbolExpansion) -> SymbolExpansion:
    """Left multiplication by the scalar function f (exact in left quantization)."""
    return B.map(lambda comp: comp.scale(f))


def lame_operator(geom: geo_mod.Geometry, lam: float, mu: float, depth: int) -> SymbolExpansion:
    """Left symbol of L v = -mu (nabla_b nabla^b v + Ric v) - (lam + mu) grad div v on vector fields."""
    d, gi, Gam = geom.d, geom.g_inv, geom.christoffel
    I = MatrixFn.identity(d)
    depth = max(depth, 2)
    N = []
    for b in range(d):
        Gb = MatrixFn([[Gam[a][b][c] for c in range(d)] for a in range(d)])
        N.append(with_depth(differential_symbol({(b + 1,): I, (): Gb}, d, d), depth))
    parts = []
    for c in range(d):
        for b in range(d):
            if gi[c][b].is_zero():
                continue
            # nabla_c nabla_b = N_c N_b - Gamma^k_{cb} N_k
            parts.append((1, _fmul(gi[c][b], compose(N[c], N[b]))))
            parts += [(-1, _fmul(ex.mul(gi[c][b], Gam[k][c][b]), N[k])) for k in range(d)]
    lap = combine(parts)
    ones_col = {}
    for k in range(d):
        ones_col[(k + 1,)] = MatrixFn([[ex.ONE if c == k else ex.ZERO for c in range(d)] for _ in range(d)])
    div0 = MatrixFn([[ex.add([Gam[b][b][k] for b in range(d)]) for k in range(d)] for _ in range(d)])
    ones_col[()] = div0
    div = with_depth(differential_symbol(ones_col, d, d), depth)
    grad = with_depth(differential_symbol(
        {(c + 1,): MatrixFn([[gi[a][c] if a == b else ex.ZERO for b in range(d)] for a in range(d)])
         for c in range(d)}, d, d), depth)
    graddiv = compose(grad, div)
    ric = SymbolExpansion(0, (MatrixFn(geom.ricci_mixed),), depth, d)
    return combine([(-mu, lap), (-mu, ric), (-(lam + mu), graddiv)])


def lame_model(geom: geo_mod.Geometry, lam: float = 1.0, mu: float = 1.0, depth: int = 3,
               name: str = "lame") -> ModelSpec:
    """Elasticity operator in framing components, acting on half-densities."""
    if geom.d != 2:
        raise ModelError("the Lame model needs d = 2")
    if not (mu > 0 and lam + mu > 0):
        raise ModelError(f"Lame parameters must satisfy mu > 0, lam + mu > 0 (got lam={lam}, mu={mu})")
    d, e, co = 2, geom.fr.e, geom.coframe
    depth = max(depth, 2)
    L = lame_operator(geom, lam, mu, depth)
    rho_half = ex.sqrt(geom.rho)
    B = MatrixFn([[e[j][a] for j in range(d)] for a in range(d)]).scale(ex.reciprocal(rho_half))
    Binv = MatrixFn([[co[j][a] for a in range(d)] for j in range(d)]).scale(rho_half)
    left = SymbolExpansion(0, (Binv,), depth, d)
    right = SymbolExpansion(0, (B,), depth, d)
    A = compose(left, compose(L, right))
    A = A.map(lambda c: c.map(ex.simplify))
    h2 = _metric_h2(geom, d)
    exi = [ex.add([ex.mul(e[j][a], ex.xi(a + 1)) for a in range(d)]) for j in range(d)]
    ppT_h2 = MatrixFn([[ex.mul(exi[i], exi[j]) for j in range(d)] for i in range(d)])
    ppT = ppT_h2.scale(ex.reciprocal(h2))
    I2 = MatrixFn.identity(2)
    spectral = SpectralData([(1, ex.scale(mu, h2), I2 - ppT), (2, ex.scale(lam + 2 * mu, h2), ppT)], 2)
    t_up = geom.torsion_vector
    t_xi = ex.add([ex.mul(t_up[a], ex.xi(a + 1)) for a in range(d)])
    t = geom.torsion_covector
    expected = {
        "prin": MatrixFn.scalar(ex.scale(mu, h2), 2) + ppT_h2.scale(lam + mu),
        "sub": MatrixFn.constant(EPS).scale(ex.scale(1j * (lam + 3 * mu), t_xi)),
        "proj_sub": MatrixFn.zeros(2),
        "dt": MatrixFn([[ex.add_terms(0, [(1, ex.diff(t[1], ex.x(1))), (-1, ex.diff(t[0], ex.x(2)))])]]),
    }
    return ModelSpec(name, d, 2, Fraction(2), A, spectral, geom.fr.box, chart=geom.fr.name,
                     params={"lambda": lam, "mu": mu}, geometry=geom, expected=expected)


def lame_t2(lam: float = 1.0, mu: float = 1.0, twist: float = 1.0, depth: int = 3) -> ModelSpec:
    """Flat 2-torus; the frame rotates by twist * (cos x1 + sin x2 / 2)."""
    if twist == 0:
        fr = geo_mod.constant_framing(2)
    else:
        theta = ex.scale(twist, ex.add(ex.cos(ex.x(1)), ex.scale(0.5, ex.sin(ex.x(2)))))
        fr = geo_mod.rotating_framing_t2(theta)
    model = lame_model(geo_mod.geometry_from_framing(fr), lam, mu, depth, "lame-t2")
    model.params["twist"] = twist
    return model


def _seeded_hermitian(rng, scale=1.0):
    M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    return scale * 0.5 * (M + M.conj().T)


def random_first_order(seed: int = 0, twist: float = 1.0, depth: int = 3) -> ModelSpec:
    """Random 2x2 first-order system on the flat 2-torus with simple eigenvalues (beta +- alpha) h."""
    rng = np.random.default_rng(seed)
    x1, x2 = ex.x(1), ex.x(2)
    xi1, xi2 = ex.xi(1), ex.xi(2)
    r = rng.uniform(-1, 1, 6)
    a = ex.add(r[0], ex.scale(twist * r[1], ex.sin(ex.add(x1, x2))), ex.scale(twist * r[2], ex.cos(x2)))
    b = ex.add(r[3], ex.scale(twist * r[4], ex.cos(x1)), ex.scale(twist * r[5], ex.sin(ex.add_terms(0, [(1, x1), (-2, x2)]))))
    c = ex.add(ex.mul(a, xi1), ex.mul(b, xi2))
    h = _euclid_h(2)
    norm = ex.sqrt(ex.add(ex.power(xi1, 2), ex.power(xi2, 2), ex.power(c, 2)))
    pauli = [MatrixFn.constant(s) for s in PAULI]
    nsig = matsum([pauli[0].scale(xi1), pauli[1].scale(xi2), pauli[2].scale(c)]).scale(ex.reciprocal(norm))
    alpha = ex.add(2, ex.sin(x1))
    beta = ex.scale(0.5, ex.cos(x2))
    I2 = MatrixFn.identity(2)
    prin = I2.scale(ex.mul(beta, h)) + nsig.scale(ex.mul(alpha, h))
    funcs = [ex.ONE, ex.sin(x1), ex.cos(x2), ex.sin(ex.add(x1, x2)), ex.mul(xi1, ex.reciprocal(h))]
    a_sub = matsum([MatrixFn.constant(_seeded_hermitian(rng, 0.7)).scale(f) for f in funcs])
    deg0 = a_sub - mixed_laplacian(prin, 2).scale(0.5j)
    A0 = SymbolExpansion(1, (prin, deg0), depth, 2)
    A = symmetrize(A0, depth)
    spectral = SpectralData([(1, ex.mul(ex.add(beta, alpha), h), (I2 + nsig).scale(0.5)),
                             (-1, ex.mul(ex.add_terms(0, [(1, beta), (-1, alpha)]), h), (I2 - nsig).scale(0.5))], 1)
    expected = {"sub": a_sub, "gap_over_h": MatrixFn([[ex.scale(2, alpha)]])}
    return ModelSpec("random2x2", 2, 2, Fraction(1), A, spectral, ((0.0, 2 * np.pi),) * 2, chart="flat",
                     params={"seed": seed, "twist": twist}, expected=expected)


def scalar_trivial(depth: int = 3) -> ModelSpec:
    """A scalar first-order operator; its only projection is the identity."""
    x1, x2 = ex.x(1), ex.x(2)
    h = _euclid_h(2)
    prin = MatrixFn([[ex.mul(ex.add(2, ex.sin(x1)), h)]])
    A0 = SymbolExpansion(1, (prin, MatrixFn([[ex.cos(x2)]])), depth, 2)
    A = symmetrize(A0, depth)
    spectral = SpectralData([(1, prin[0, 0], MatrixFn.identity(1))], 1)
    return ModelSpec("scalar-trivial", 2, 1, Fraction(1), A, spectral, ((0.0, 2 * np.pi),) * 2, chart="flat")


def build_model(name: str, depth: int = 3, lam: float = 1.0, mu: float = 1.0, twist: float = 1.0,
                seed: int = 0) -> ModelSpec:
    if name == "dirac-s3":
        return dirac_s3(depth)
    if name == "dirac-t3":
        return dirac_t3(twist, depth)
    if name == "lame-t2":
        return lame_t2(lam, mu, twist, depth)
    if name == "random2x2":
        return random_first_order(seed, twist, depth)
    if name == "scalar-trivial":
        return scalar_trivial(depth)
    raise ModelError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
