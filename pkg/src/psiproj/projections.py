"""Construction of the full symbols of pseudodifferential projections.

Two recursions are provided.  ``step_full`` builds an orthonormal basis and
then imposes commutation with A (variants ``single``, ``basis`` and
``commuting-full``); ``step_simplified`` imposes commutation directly.  Both
add one homogeneous correction X_{j,k} of degree -k per step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import expr as ex
from .calculus import (MatrixFn, SymbolExpansion, adjoint, combine, commutator_matrix, compose,
                       compose_component, extract_component, matsum, mixed_laplacian, poisson, symmetrize)
from .models import ModelSpec
from .report import CheckRow
from .sampling import Sampler, array_residual

VARIANTS = ("single", "basis", "commuting-full", "commuting-simplified")
COMMUTING = ("commuting-full", "commuting-simplified")


def init_base_projection(P: MatrixFn, depth: int, d: int) -> SymbolExpansion:
    """A formally self-adjoint symbol with principal part P and zero subprincipal part."""
    comps = [P, mixed_laplacian(P, d).scale(-0.5j)]
    cur = SymbolExpansion(0, tuple(comps[: depth + 1]), depth, d)
    for n in range(2, depth + 1):
        defect = extract_component(adjoint(cur, n), n) - extract_component(cur, n)
        comps = [extract_component(cur, k) for k in range(n)] + [extract_component(cur, n) + defect.scale(0.5)]
        cur = SymbolExpansion(0, tuple(comps), depth, d)
    return cur


def base_projections(model: ModelSpec, depth: int) -> dict:
    return {j: init_base_projection(model.spectral.P(j), depth, model.d) for j in model.spectral.indices}


@dataclass
class ProjectionState:
    model: ModelSpec
    variant: str
    depth: int
    ladders: dict
    k: int = 0
    trace: list = field(default_factory=list)

    def current(self, j: int) -> SymbolExpansion:
        return self.ladders[j]


def start(model: ModelSpec, depth: int, variant: str, base: dict | None = None) -> ProjectionState:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant in COMMUTING and model.depth < depth:
        raise ValueError(f"operator symbol known to depth {model.depth} < {depth}")
    base = base if base is not None else base_projections(model, depth)
    return ProjectionState(model, variant, depth, dict(base))


def _correction(principal: MatrixFn, k: int, depth: int, d: int) -> SymbolExpansion:
    """Self-adjoint X in Psi^{-k} with the given principal symbol."""
    X = SymbolExpansion(-k, (principal,), depth - k, d)
    return symmetrize(X, depth - k)


def _append(state: ProjectionState, xs: dict, trace: dict) -> ProjectionState:
    k, depth, d = state.k + 1, state.depth, state.model.d
    ladders = {}
    for j, P in state.ladders.items():
        X = _correction(xs[j], k, depth, d)
        ladders[j] = combine([(1, P), (1, X)])
    trace["X"] = xs
    return ProjectionState(state.model, state.variant, depth, ladders, k, state.trace + [trace])


def _r_and_s(state: ProjectionState, k: int):
    sd = state.model.spectral
    R, S = {}, {}
    for j, P in state.ladders.items():
        sq = compose_component(P, P, k)
        R[j] = (sq - extract_component(P, k)).scale(-1)
        Pj = sd.P(j)
        S[j] = matsum([(-1, R[j]), (1, Pj @ R[j]), (1, R[j] @ Pj)])
    return R, S


def _comm_component(A: SymbolExpansion, P: SymbolExpansion, k: int) -> MatrixFn:
    """[A, P] at relative order k (degree s - k)."""
    return compose_component(A, P, k) - compose_component(P, A, k)


def step_full(state: ProjectionState) -> ProjectionState:
    """One step of the basis-then-commutation recursion."""
    if state.variant not in ("single", "basis", "commuting-full"):
        raise ValueError("step_full handles the single, basis and commuting-full variants")
    k = state.k + 1
    if k > state.depth:
        from .calculus import TruncationError
        raise TruncationError(f"step {k} exceeds depth {state.depth}")
    model, sd = state.model, state.model.spectral
    js = sd.indices
    R, S = _r_and_s(state, k)
    trace = {"k": k, "R": R, "S": S}
    if state.variant == "single":
        return _append(state, dict(S), trace)
    V = {}
    for j in js:
        for l in js:
            if l != j:
                pp = compose_component(state.ladders[j], state.ladders[l], k)
                V[j, l] = matsum([pp, sd.P(j) @ S[l], S[j] @ sd.P(l)]).scale(-0.5)
    trace["V"] = V
    base = {j: matsum([S[j]] + [V[j, l] for l in js if l != j] + [V[l, j] for l in js if l != j], model.m)
            for j in js}
    if state.variant == "basis":
        return _append(state, base, trace)
    A_prin = model.A_prin
    Z = {}
    for j in js:
        inner = _comm_component(model.A, state.ladders[j], k) + commutator_matrix(A_prin, base[j])
        for l in js:
            if l != j:
                inv = ex.reciprocal(ex.add_terms(0, [(1, sd.h(l)), (-1, sd.h(j))]))
                Z[j, l] = (sd.P(j) @ inner @ sd.P(l)).scale(inv)
    trace["Z"] = Z
    xs = {j: matsum([base[j]] + [Z[j, l] for l in js if l != j] + [(-1, Z[l, j]) for l in js if l != j], model.m)
          for j in js}
    return _append(state, xs, trace)


def step_simplified(state: ProjectionState) -> ProjectionState:
    """One step of the recursion that imposes commutation directly."""
    if state.variant != "commuting-simplified":
        raise ValueError("step_simplified handles the commuting-simplified variant")
    k = state.k + 1
    if k > state.depth:
        from .calculus import TruncationError
        raise TruncationError(f"step {k} exceeds depth {state.depth}")
    model, sd = state.model, state.model.spectral
    js = sd.indices
    R, S = _r_and_s(state, k)
    A_prin = model.A_prin
    T, xs = {}, {}
    for j in js:
        T[j] = _comm_component(model.A, state.ladders[j], k).scale(-1) + commutator_matrix(S[j], A_prin)
        terms = [S[j]]
        for l in js:
            if l != j:
                inv = ex.reciprocal(ex.add_terms(0, [(1, sd.h(j)), (-1, sd.h(l))]))
                terms.append((sd.P(j) @ T[j] @ sd.P(l) - sd.P(l) @ T[j] @ sd.P(j)).scale(inv))
        xs[j] = matsum(terms)
    return _append(state, xs, {"k": k, "R": R, "S": S, "T": T})


def run(state: ProjectionState) -> ProjectionState:
    step = step_simplified if state.variant == "commuting-simplified" else step_full
    while state.k < state.depth:
        state = step(state)
    return state


def build_projections(model: ModelSpec, depth: int = 3, variant: str = "commuting-simplified",
                      base: dict | None = None) -> dict:
    """{j: P_j} with P_j trusted to relative order ``depth``."""
    return run(start(model, depth, variant, base)).ladders


def subprincipal_closed_form(model: ModelSpec) -> dict:
    """Closed formula for (P_j)_sub in terms of A_prin, A_sub and the spectral data."""
    sd, d = model.spectral, model.d
    A_prin, A_sub = model.A_prin, model.A_sub
    out = {}
    for j in sd.indices:
        Pj = sd.P(j)
        pb = poisson(Pj, Pj, d)
        Q = (poisson(A_prin, Pj, d) - poisson(Pj, A_prin, d)).scale(0.5)
        terms = [(0.5j, pb), (-1j, Pj @ pb @ Pj)]
        for l in sd.indices:
            if l == j:
                continue
            Pl = sd.P(l)
            inv = ex.reciprocal(ex.add_terms(0, [(1, sd.h(j)), (-1, sd.h(l))]))
            num = matsum([Pj @ A_sub @ Pl, (-1j, Pj @ Q @ Pl), Pl @ A_sub @ Pj, (1j, Pl @ Q @ Pj)])
            terms.append((1, num.scale(inv)))
        out[j] = matsum(terms)
    return out


def component_rows(check, index, pairs, orders, ev: ex.Evaluator, tol) -> list[CheckRow]:
    """One row per relative order k: max over samples of |sum a(k) - b(k)| for (a, b) in pairs."""
    rows = []
    for k in orders:
        diff = None
        for a, b in pairs:
            v = a(k).evaluate(ev)
            if b is not None:
                v = v - b(k).evaluate(ev)
            diff = v if diff is None else diff + v
        rows.append(CheckRow.measured(check, index, k, array_residual(diff, ev.invalid), tol))
    return rows


def verify_projection_axioms(projections: dict, model: ModelSpec, depth: int, sampler: Sampler, tol: float,
                             variant: str = "commuting-simplified") -> list[CheckRow]:
    """Componentwise residuals of the projection axioms through relative order ``depth``."""
    js = sorted(projections)
    orders = range(depth + 1)
    ev = sampler.evaluator()
    m = model.m
    rows = []
    for j in js:
        P = projections[j]
        sq = compose(P, P, depth)
        adj = adjoint(P, depth)
        rows += component_rows("axiom.idempotent", f"j={j}", [(sq.component, P.component)], orders, ev, tol)
        rows += component_rows("axiom.selfadjoint", f"j={j}", [(adj.component, P.component)], orders, ev, tol)
        rows += component_rows("axiom.principal", f"j={j}", [(P.component, lambda k, j=j: model.spectral.P(j))],
                               [0], ev, tol)
    if variant == "single":
        rows.append(CheckRow.not_applicable("axiom.orthogonal"))
        rows.append(CheckRow.not_applicable("axiom.partition"))
    else:
        for j in js:
            for l in js:
                if l != j:
                    prod = compose(projections[j], projections[l], depth)
                    rows += component_rows("axiom.orthogonal", f"j={j},l={l}", [(prod.component, None)],
                                            orders, ev, tol)
        total = combine([(1, projections[j]) for j in js])
        ident = SymbolExpansion.identity(m, depth, model.d)
        rows += component_rows("axiom.partition", "", [(total.truncate(depth).component, ident.component)],
                                orders, ev, tol)
    if variant in COMMUTING:
        for j in js:
            comm = compose(model.A, projections[j], depth) - compose(projections[j], model.A, depth)
            rows += component_rows("axiom.commutes", f"j={j}", [(comm.component, None)], orders, ev, tol)
    else:
        rows.append(CheckRow.not_applicable("axiom.commutes"))
    return rows
