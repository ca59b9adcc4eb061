"""Eigenvalues and eigenprojections of a principal symbol, with numeric oracles."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import expr as ex
from .calculus import MatrixFn
from .report import CheckRow
from .sampling import Residual, Sampler, array_residual


class SimplicityError(ArithmeticError):
    """Eigenvalues closer than the tolerance: simple-spectrum assumption fails."""


@dataclass(frozen=True)
class Branch:
    j: int
    h: ex.Expr
    P: MatrixFn


class SpectralData:
    """Branches (h^(j), P^(j)) indexed by signed j, negative j for negative h."""

    def __init__(self, branches, degree=1):
        items = sorted((Branch(j, ex.as_expr(h), P) for j, h, P in branches), key=lambda b: b.j)
        js = [b.j for b in items]
        if 0 in js or len(set(js)) != len(js):
            raise ValueError("branch indices must be distinct and nonzero")
        neg = [j for j in js if j < 0]
        pos = [j for j in js if j > 0]
        if neg != list(range(-len(neg), 0)) or pos != list(range(1, len(pos) + 1)):
            raise ValueError("indices must be -m-..-1 and 1..m+")
        ms = {b.P.m for b in items}
        if ms != {len(items)}:
            raise ValueError("need exactly m branches of m x m projections")
        self.branches = tuple(items)
        self.degree = Fraction(degree)

    @property
    def indices(self) -> list[int]:
        return [b.j for b in self.branches]

    @property
    def m(self) -> int:
        return len(self.branches)

    @property
    def m_plus(self) -> int:
        return sum(1 for b in self.branches if b.j > 0)

    @property
    def m_minus(self) -> int:
        return sum(1 for b in self.branches if b.j < 0)

    def h(self, j: int) -> ex.Expr:
        return self._get(j).h

    def P(self, j: int) -> MatrixFn:
        return self._get(j).P

    def _get(self, j):
        for b in self.branches:
            if b.j == j:
                return b
        raise KeyError(j)

    def reconstruct(self) -> MatrixFn:
        from .calculus import matsum
        return matsum([b.P.scale(b.h) for b in self.branches])

    def negated(self) -> "SpectralData":
        """Spectral data of -A: h^(j) -> -h^(-j)."""
        return SpectralData([(-b.j, ex.scale(-1, b.h), b.P) for b in self.branches], self.degree)


def numeric_eigendecomposition(M: np.ndarray, tol: float = 1e-10) -> list[tuple[float, np.ndarray]]:
    """Ascending eigenvalues with rank-one projections of a Hermitian matrix."""
    M = np.asarray(M, dtype=complex)
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.conj().T).max() > tol * scale:
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh(M)
    gaps = np.diff(w)
    if gaps.size and gaps.min() <= tol * scale:
        raise SimplicityError(f"eigenvalue gap {gaps.min():.3e} below tolerance")
    return [(float(w[i]), np.outer(v[:, i], v[:, i].conj()) / np.vdot(v[:, i], v[:, i]).real)
            for i in range(len(w))]


def _batched_eigh(vals: np.ndarray):
    herm = 0.5 * (vals + np.conj(np.swapaxes(vals, 1, 2)))
    w, v = np.linalg.eigh(herm)
    projs = np.einsum("nai,nbi->niab", v, v.conj())
    return w, projs


def validate_spectral(sd: SpectralData, A_prin: MatrixFn, sampler: Sampler, tol: float) -> list[CheckRow]:
    """Rows for the spectral invariants at the sampler's points."""
    ev = sampler.evaluator()
    hs = ev.values([b.h for b in sd.branches])
    Ps = [b.P.evaluate(ev) for b in sd.branches]
    A = A_prin.evaluate(ev)
    bad = ev.invalid.copy()
    n, m = A.shape[0], sd.m
    eye = np.eye(m)
    rows = []

    def row(check, index, diff):
        rows.append(CheckRow.measured(check, index, None, array_residual(diff, bad), tol))

    for b, h, P in zip(sd.branches, hs, Ps):
        row("spectral.hermitian", f"j={b.j}", P - np.conj(np.swapaxes(P, 1, 2)))
        row("spectral.idempotent", f"j={b.j}", P @ P - P)
        row("spectral.rank_one", f"j={b.j}", np.trace(P, axis1=1, axis2=2) - 1)
        row("spectral.h_real", f"j={b.j}", h.imag)
        wrong_sign = np.where(np.sign(h.real) == np.sign(b.j), 0.0, np.abs(h.real) + 1.0)
        row("spectral.h_sign", f"j={b.j}", wrong_sign)
    for b1, b2, h1, h2, P1, P2 in zip(sd.branches, sd.branches[1:], hs, hs[1:], Ps, Ps[1:]):
        # increasing order with a nonzero gap
        row("spectral.ordered", f"j={b1.j},{b2.j}", np.maximum(0.0, h1.real - h2.real + tol))
    for i, b1 in enumerate(sd.branches):
        for k in range(i + 1, len(sd.branches)):
            row("spectral.orthogonal", f"j={b1.j},{sd.branches[k].j}", Ps[i] @ Ps[k])
    row("spectral.partition", "", sum(Ps) - eye)
    row("spectral.reconstruction", "", sum(h[:, None, None] * P for h, P in zip(hs, Ps)) - A)
    # independent oracle: numeric eigendecomposition of A_prin
    w, projs = _batched_eigh(np.where(bad[:, None, None], 0, A))
    for i, (b, h, P) in enumerate(zip(sd.branches, hs, Ps)):
        row("spectral.oracle", f"j={b.j}", np.concatenate([(P - projs[:, i]).reshape(n, -1),
                                                           (h - w[:, i])[:, None]], axis=1))
    return rows


def projection_derivative_oracle(A_prin: MatrixFn, point: ex.PhasePoint, direction: ex.Expr, j: int,
                                 params=None, tol: float = 1e-10) -> np.ndarray:
    """Directional derivative of the j-th eigenprojection by first-order perturbation.

    ``j`` counts eigenvalues in the signed convention (negative j for the
    negative ones); ``direction`` is a coordinate variable x(a) or xi(a).
    """
    ev = ex.Evaluator.at(point, params)
    A = A_prin.evaluate(ev)[0]
    dA = A_prin.diff(direction).evaluate(ev)[0]
    pairs = numeric_eigendecomposition(A, tol)
    neg = sum(1 for w, _ in pairs if w < 0)
    pos = len(pairs) - neg
    labels = list(range(-neg, 0)) + list(range(1, pos + 1))
    i = labels.index(j)
    hj, Pj = pairs[i]
    out = np.zeros_like(A)
    for k, (hl, Pl) in enumerate(pairs):
        if k != i:
            out += (Pl @ dA @ Pj + Pj @ dA @ Pl) / (hj - hl)
    return out
