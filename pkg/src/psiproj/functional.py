"""Symbols of |A| and theta(A) assembled from the commuting projections."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .calculus import MatrixFn, SymbolExpansion, adjoint, combine, compose, matsum, poisson
from .models import ModelSpec
from .report import CheckRow
from .sampling import Sampler, array_residual


@dataclass
class FunctionalSymbols:
    modulus: SymbolExpansion
    heaviside: SymbolExpansion
    provenance: str = ""


def abs_eigenvalue(model: ModelSpec, j: int) -> ex.Expr:
    """|h^(j)|, using the sign convention of the signed index."""
    return ex.scale(1 if j > 0 else -1, model.spectral.h(j))


def modulus_symbol(model: ModelSpec, projections: dict, depth: int) -> SymbolExpansion:
    """sum_{j>0} A P_j - sum_{j<0} A P_j."""
    return combine([(1 if j > 0 else -1, compose(model.A, P, depth)) for j, P in sorted(projections.items())])


def modulus_principal(model: ModelSpec) -> MatrixFn:
    sd = model.spectral
    return matsum([sd.P(j).scale(abs_eigenvalue(model, j)) for j in sd.indices])


def modulus_sub_closed_form(model: ModelSpec) -> MatrixFn:
    """Closed formula for the subprincipal symbol of |A|."""
    sd, d = model.spectral, model.d
    A_prin, A_sub = model.A_prin, model.A_sub
    M = modulus_principal(model)
    brackets = poisson(A_prin, A_prin, d) - poisson(M, M, d)
    terms = []
    for j in sd.indices:
        for k in sd.indices:
            denom = ex.reciprocal(ex.add(abs_eigenvalue(model, j), abs_eigenvalue(model, k)))
            ratio = ex.mul(ex.add(sd.h(j), sd.h(k)), denom)
            Pj, Pk = sd.P(j), sd.P(k)
            terms.append((1, (Pj @ A_sub @ Pk).scale(ratio)))
            terms.append((0.5j, (Pj @ brackets @ Pk).scale(denom)))
    return matsum(terms)


def heaviside_symbol(model: ModelSpec, projections: dict, depth: int) -> SymbolExpansion:
    """sum_{j>0} P_j (the zero symbol when A has no positive branch)."""
    pos = [(1, P.truncate(depth)) for j, P in sorted(projections.items()) if j > 0]
    if not pos:
        return SymbolExpansion.zero(model.m, 0, depth, model.d)
    return combine(pos)


def functional_symbols(model: ModelSpec, projections: dict, depth: int, provenance: str = "") -> FunctionalSymbols:
    return FunctionalSymbols(modulus_symbol(model, projections, depth), heaviside_symbol(model, projections, depth),
                             provenance)


def signdef_principal_check(model: ModelSpec, projections: dict, sampler: Sampler, tol: float) -> list[CheckRow]:
    """Principal symbol of P_j* A P_j equals h^(j) P^(j) and has the sign of j."""
    ev = sampler.evaluator()
    rows = []
    for j, P in sorted(projections.items()):
        sandwich = compose(adjoint(P, 0), compose(model.A, P, 0), 0).component(0)
        expected = model.spectral.P(j).scale(model.spectral.h(j))
        vals = sandwich.evaluate(ev)
        rows.append(CheckRow.measured("signdef.principal", f"j={j}", 0,
                                      array_residual(vals - expected.evaluate(ev), ev.invalid), tol))
        herm = 0.5 * (vals + np.conj(np.swapaxes(vals, 1, 2)))
        w = np.linalg.eigvalsh(np.where(ev.invalid[:, None, None], 0, herm))
        scale = np.maximum(1.0, np.abs(w).max(axis=1))
        # violation of semidefiniteness, relative to the size of the matrix
        viol = np.maximum(0.0, -w.min(axis=1)) if j > 0 else np.maximum(0.0, w.max(axis=1))
        rows.append(CheckRow.measured("signdef.sign", f"j={j}", 0, array_residual(viol / scale, ev.invalid), tol))
    if model.spectral.m_minus == 0:
        rows.append(CheckRow.not_applicable("signdef.sign", "j<0 (m-=0)", 0))
    if model.spectral.m_plus == 0:
        rows.append(CheckRow.not_applicable("signdef.sign", "j>0 (m+=0)", 0))
    return rows
