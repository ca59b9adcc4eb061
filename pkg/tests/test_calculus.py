import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from psiproj import expr as ex
from psiproj.calculus import (MatrixFn, SymbolExpansion, TruncationError, adjoint, combine, commutator, compose,
                              differential_symbol, extract_component, generalized_poisson, poisson, subprincipal,
                              symmetrize, with_depth)
from psiproj.sampling import Sampler
from randsym import random_expansion, random_matrix

X, XI = ex.x(1), ex.xi(1)
PAULI = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.array([[1, 0], [0, -1]])]


def scalar(e, top, depth=1, d=1):
    return SymbolExpansion(top, (MatrixFn.scalar(e, 1),), depth, d)


def values(mat, d=2, n=50, seed=7, box=None):
    s = Sampler(box or [(-3, 3)] * d, n, seed)
    return mat.evaluate(s.evaluator())


def max_diff(a, b, d=2):
    return float(np.abs(values(a, d) - values(b, d)).max())


def test_extract_component_examples():
    B = SymbolExpansion.single(MatrixFn.scalar(XI, 2), 1, 2, 1)
    assert extract_component(B, 0) is B.components[0]
    assert extract_component(B, 2).is_zero()
    with pytest.raises(TruncationError):
        extract_component(B, 3)


def test_difference_with_shared_principal_part():
    prin = MatrixFn.scalar(ex.mul(X, XI), 1)
    B = SymbolExpansion(1, (prin, MatrixFn.scalar(ex.sin(X), 1)), 1, 1)
    C = SymbolExpansion(1, (prin, MatrixFn.scalar(ex.cos(X), 1)), 1, 1)
    D = B - C
    assert D.component(0).is_zero()
    assert max_diff(D.component(1), MatrixFn.scalar(ex.add(ex.sin(X), ex.scale(-1, ex.cos(X))), 1), d=1) < 1e-15


def test_compose_with_identity():
    B = random_expansion(3, depth=2)
    out = compose(SymbolExpansion.identity(2, 2, 2), B)
    for k in range(3):
        assert max_diff(out.component(k), B.component(k)) == 0


def test_compose_leibniz_example():
    out = compose(scalar(XI, 1), scalar(ex.mul(X, XI), 1), 1)
    assert max_diff(out.component(0), MatrixFn.scalar(ex.mul(X, XI, XI), 1), d=1) < 1e-14
    assert max_diff(out.component(1), MatrixFn.scalar(ex.scale(-1j, XI), 1), d=1) < 1e-14


def test_compose_beyond_depth_is_an_error():
    with pytest.raises(TruncationError):
        compose(random_expansion(0, depth=1), random_expansion(1, depth=2), 2)


def test_adjoint_examples():
    assert max_diff(adjoint(scalar(XI, 1)).component(1), MatrixFn.zeros(1), d=1) == 0
    adj = adjoint(scalar(ex.mul(X, XI), 1))
    assert max_diff(adj.component(0), MatrixFn.scalar(ex.mul(X, XI), 1), d=1) == 0
    assert max_diff(adj.component(1), MatrixFn.scalar(ex.const(-1j), 1), d=1) == 0


def test_commutator_with_itself_vanishes():
    B = random_expansion(11, depth=2)
    C = commutator(B, B)
    for k in range(3):
        assert np.abs(values(C.component(k))).max() < 1e-12


def test_scalar_commutator_is_bracket():
    b = random_expansion(4, m=1, depth=1)
    c = random_expansion(5, m=1, top=0, depth=1)
    C = commutator(b, c)
    assert np.abs(values(C.component(0))).max() < 1e-12
    # -i times the bracket in the (xi-first) convention, i.e. +i {b, c} with poisson's x-first ordering
    expected = poisson(c.component(0), b.component(0), 2).scale(-1j)
    assert max_diff(C.component(1), expected) < 1e-12
    assert max_diff(C.component(1), poisson(b.component(0), c.component(0), 2).scale(1j)) < 1e-12


def test_poisson_examples():
    f = MatrixFn.scalar(ex.mul(ex.sin(X), XI), 1)
    assert np.abs(values(poisson(f, f, 1), d=1)).max() == 0
    F = MatrixFn.constant(PAULI[0]).scale(X) + MatrixFn.constant(PAULI[1]).scale(XI)
    oracle = PAULI[0] @ PAULI[1] - PAULI[1] @ PAULI[0]
    assert np.allclose(oracle, 2j * PAULI[2])
    assert np.abs(values(poisson(F, F, 1), d=1) - oracle).max() < 1e-15
    C = random_matrix(np.random.default_rng(0), 2, 2, 1)
    assert poisson(MatrixFn.identity(2), C, 2).is_zero()


def test_generalized_poisson_examples():
    rng = np.random.default_rng(1)
    B, D = random_matrix(rng, 2, 2, 1), random_matrix(rng, 2, 2, 0)
    assert max_diff(generalized_poisson(B, MatrixFn.identity(2), D, 2), poisson(B, D, 2)) == 0
    I = MatrixFn.identity(2)
    assert generalized_poisson(I, random_matrix(rng, 2, 2, 0), I, 2).is_zero()


def test_generalized_poisson_against_numeric_oracle():
    rng = np.random.default_rng(2)
    B, C, D = (random_matrix(rng, 2, 2, k) for k in (1, 0, -1))
    p = ex.PhasePoint((0.4, -1.1), (0.28, 0.96))
    step = 1e-5

    def at(M, shift):
        xs, xis = np.array(p.x, float), np.array(p.xi, float)
        if shift is not None:
            kind, a, s = shift
            (xs if kind == "x" else xis)[a] += s
        return M.evaluate(ex.Evaluator(xs[None], xis[None]))[0]

    def partial(M, kind, a):
        return (at(M, (kind, a, step)) - at(M, (kind, a, -step))) / (2 * step)

    c = at(C, None)
    oracle = sum(partial(B, "x", a) @ c @ partial(D, "xi", a) - partial(B, "xi", a) @ c @ partial(D, "x", a)
                 for a in range(2))
    got = generalized_poisson(B, C, D, 2).evaluate(ex.Evaluator.at(p))[0]
    assert np.abs(got - oracle).max() < 1e-6 * max(1, np.abs(oracle).max())


def test_subprincipal_examples():
    c = 0.75 - 0.5j
    B = SymbolExpansion(1, (MatrixFn.scalar(XI, 1), MatrixFn.scalar(ex.const(c), 1)), 1, 1)
    assert np.abs(values(subprincipal(B), d=1) - c).max() == 0
    assert np.abs(values(subprincipal(scalar(ex.mul(X, XI), 1)), d=1) - 0.5j).max() == 0


def test_symmetrize_examples():
    H = MatrixFn.constant(np.array([[1.0, 2 - 1j], [2 + 1j, -3.0]]))
    out = symmetrize(SymbolExpansion.single(H, 0, 2, 2))
    assert max_diff(out.component(0), H) == 0
    assert out.component(1).is_zero() and out.component(2).is_zero()
    sym = symmetrize(scalar(ex.mul(X, XI), 1))
    assert max_diff(sym.component(0), MatrixFn.scalar(ex.mul(X, XI), 1), d=1) == 0
    assert np.abs(values(sym.component(1), d=1) + 0.5j).max() == 0


def test_symmetrize_principal_is_hermitian_part():
    B = random_expansion(21, depth=1)
    prin = B.component(0)
    assert max_diff(symmetrize(B).component(0), (prin + prin.H).scale(0.5)) < 1e-15


def test_principal_of_composition_is_pointwise_product():
    B, C = random_expansion(30, depth=1), random_expansion(31, top=0, depth=1)
    assert max_diff(compose(B, C).component(0), B.component(0) @ C.component(0)) < 1e-12


def test_combine_rejects_mixed_ladders():
    with pytest.raises(ValueError):
        combine([(1, random_expansion(0, top=1)), (1, SymbolExpansion(0.5, (MatrixFn.identity(2),), 1, 2))])


# properties on random expansions --------------------------------------------

@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**20))
def test_adjoint_is_involution(seed):
    B = random_expansion(seed, depth=3)
    twice = adjoint(adjoint(B))
    for k in range(4):
        a, b = values(twice.component(k)), values(B.component(k))
        assert np.abs(a - b).max() <= 1e-9 * max(1, np.abs(b).max())


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**20), st.integers(1, 3))
def test_composition_is_associative(seed, depth):
    B = random_expansion(seed, top=1, depth=depth)
    C = random_expansion(seed + 1, top=0, depth=depth)
    D = random_expansion(seed + 2, top=-1, depth=depth)
    left, right = compose(compose(B, C), D), compose(B, compose(C, D))
    for k in range(depth + 1):
        a, b = values(left.component(k)), values(right.component(k))
        assert np.abs(a - b).max() <= 1e-9 * max(1, np.abs(b).max())


def composition_law_residual(seed):
    B = random_expansion(seed, top=1, depth=1)
    C = random_expansion(seed + 10_000, top=0, depth=1)
    lhs = subprincipal(compose(B, C))
    Bp, Cp = B.component(0), C.component(0)
    rhs = Bp @ subprincipal(C) + subprincipal(B) @ Cp + poisson(Bp, Cp, 2).scale(0.5j)
    return max_diff(lhs, rhs)


@pytest.mark.parametrize("seed", range(20))
def test_subprincipal_composition_law(seed):
    assert composition_law_residual(seed) < 1e-9


# exact differential operators vs direct application -------------------------

def _random_coeffs(rng, order):
    coeffs = {}
    for beta in [(), (1,), (2,), (1, 1), (1, 2), (2, 2)][: {0: 1, 1: 3, 2: 6}[order]]:
        coeffs[beta] = MatrixFn([[ex.add(complex(*rng.normal(size=2)),
                                         ex.mul(complex(*rng.normal(size=2)), ex.sin(ex.x(1 + (i + j) % 2))),
                                         ex.mul(rng.normal(), ex.cos(ex.add(ex.x(1), ex.scale(2, ex.x(2))))))
                                  for j in range(2)] for i in range(2)])
    return coeffs


def _apply(coeffs, column):
    """sum_beta a_beta(x) d^beta applied to a column of Exprs, differentiating trees exactly."""
    out = [ex.ZERO, ex.ZERO]
    for beta, a in coeffs.items():
        col = list(column)
        for b in beta:
            col = [ex.diff(v, ex.x(b)) for v in col]
        out = [ex.add(out[i], ex.add([ex.mul(a[i, j], col[j]) for j in range(2)])) for i in range(2)]
    return out


@pytest.mark.parametrize("seed,orders", [(0, (1, 1)), (1, (2, 1)), (2, (1, 2)), (3, (2, 2))])
def test_differential_composition_matches_operator_product(seed, orders):
    rng = np.random.default_rng(seed)
    cb, cc = _random_coeffs(rng, orders[0]), _random_coeffs(rng, orders[1])
    total = sum(orders)
    B = with_depth(differential_symbol(cb, 2, 2), total)
    C = with_depth(differential_symbol(cc, 2, 2), total)
    prod = compose(B, C, total)
    k = (2, -1)
    v = np.array([1.0, 0.5 - 1j])
    phase = ex.exp(ex.mul(1j, ex.add(ex.scale(k[0], ex.x(1)), ex.scale(k[1], ex.x(2)))))
    column = [ex.mul(v[i], phase) for i in range(2)]
    direct = _apply(cb, _apply(cc, column))
    xs = np.random.default_rng(seed + 100).uniform(0, 2 * np.pi, (20, 2))
    xis = np.tile(np.array(k, float), (20, 1))
    ev = ex.Evaluator(xs, xis)
    oracle = np.stack(ev.values(direct), axis=-1)
    symbol = sum(prod.component(n).evaluate(ev) for n in range(total + 1))
    e = np.exp(1j * xs @ np.array(k, float))
    got = np.einsum("nij,j->ni", symbol, v) * e[:, None]
    assert np.abs(got - oracle).max() < 1e-10 * max(1, np.abs(oracle).max())
