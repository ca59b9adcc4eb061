"""The seven acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line, printed in the terminal summary and
to stdout.  Heavy K=3 builds go into the session cache for reuse.
"""
import time

import pytest

from conftest import ACCEPTANCE
from psiproj import expr as ex
from psiproj import functional as fn
from psiproj import projections as pr
from psiproj.calculus import MatrixFn, adjoint, compose, subprincipal
from psiproj.models import build_model
from psiproj.report import CheckRow
from psiproj.sampling import Sampler
from psiproj.verify import functional_rows, homogeneity_rows, uniqueness_rows
from randsym import alternative_tails, random_expansion
from test_calculus import composition_law_residual

MODELS = ("dirac-s3", "dirac-t3", "lame-t2", "random2x2")
K, N = 3, 50
SIMPLIFIED, FULL = "commuting-simplified", "commuting-full"


def record(n, title, rows, extra=""):
    measured = [r for r in rows if r.passed is not None]
    ok = bool(measured) and all(r.passed for r in measured)
    worst = max((r.residual for r in measured if r.check != "runtime"), default=float("nan"))
    line = (f"criterion {n} {title}: {'PASS' if ok else 'FAIL'} "
            f"({len(measured)} rows, max residual {worst:.2e}{', ' + extra if extra else ''})")
    ACCEPTANCE[n] = line
    print(line)
    failures = [r for r in measured if not r.passed]
    assert ok, failures[:10]


def measure(check, index, a, b, sampler, tol, order=None):
    return CheckRow.measured(check, index, order, sampler.residual(a, b), tol)


def sampler(model, n=N):
    return Sampler(model.box, n, 0)


def test_criterion_1_projection_axioms(cache):
    start = time.perf_counter()
    rows = []
    for name in MODELS:
        key = (name, K, ())
        if key not in cache.models:
            cache.models[key] = build_model(name, depth=K)
        model = cache.models[key]
        P = cache.projections(name, K, SIMPLIFIED)
        rows += [CheckRow(f"{name}/{r.check}", r.index, r.order, r.residual, r.tolerance, r.passed, r.samples,
                          r.skipped)
                 for r in pr.verify_projection_axioms(P, model, K, sampler(model), 1e-8, SIMPLIFIED)]
    elapsed = time.perf_counter() - start
    rows.append(CheckRow("runtime", "", None, elapsed, 300.0, elapsed < 300.0, 1, 0))
    record(1, "projection axioms", rows, f"{elapsed:.0f} s including builds")


def test_criterion_2_uniqueness(cache):
    rows = []
    for name in MODELS:
        model = cache.model(name, K)
        full = cache.projections(name, K, FULL)
        simp = cache.projections(name, K, SIMPLIFIED)
        rows += uniqueness_rows(full, simp, K, sampler(model), 1e-9, f"{name}/full_vs_simplified")
    for name, variant in (("dirac-s3", SIMPLIFIED), ("lame-t2", FULL)):
        model = cache.model(name, K)
        other = alternative_tails(pr.base_projections(model, K), seed=17)
        alt = pr.build_projections(model, K, variant, base=other)
        rows += uniqueness_rows(alt, cache.projections(name, K, variant), K, sampler(model), 1e-9,
                                f"{name}/{variant}/second_tail")
    record(2, "uniqueness", rows)


def test_criterion_3_closed_form_subprincipal(cache):
    rows = []
    for name in MODELS:
        model = cache.model(name, K)
        closed = pr.subprincipal_closed_form(model)
        for variant in (SIMPLIFIED, FULL):
            P = cache.projections(name, K, variant)
            for j in sorted(P):
                rows.append(measure(f"{name}/{variant}", f"j={j}", subprincipal(P[j]), closed[j], sampler(model),
                                    1e-9, 1))
    record(3, "closed-form subprincipal", rows)


def test_criterion_4_lame(cache):
    model = cache.model("lame-t2", K)
    s = sampler(model)
    P = cache.projections("lame-t2", K, SIMPLIFIED)
    rows = [measure("projection_sub_zero", f"j={j}", subprincipal(P[j]), None, s, 1e-9, 1) for j in sorted(P)]
    rows.append(measure("principal", "", model.A_prin, model.expected["prin"], s, 1e-9, 0))
    rows.append(measure("subprincipal", "", model.A_sub, model.expected["sub"], s, 1e-9, 1))
    # the torsion term is genuinely present in this framing
    assert s.residual(model.A_sub).value > 1e-2
    record(4, "Lame ground truth", rows)


def test_criterion_5_dirac_s3(cache):
    model = cache.model("dirac-s3", K)
    gate = Sampler(model.box, 20, 0)
    s = sampler(model)
    rows = [measure("kstar_gate", "", model.expected["kstar_plus_g"], None, gate, 1e-8),
            measure("W_sub", "", model.A_sub, model.expected["sub"], s, 1e-8, 1),
            measure("W_sub_s3", "", model.A_sub, MatrixFn.scalar(1.5, 2), s, 1e-8, 1)]
    P = cache.projections("dirac-s3", K, SIMPLIFIED)
    target = model.A_prin.scale(ex.reciprocal(ex.scale(2, model.spectral.h(1))))
    pipeline = subprincipal(fn.modulus_symbol(model, P, 1))
    rows.append(measure("modulus_sub_pipeline", "", pipeline, target, s, 1e-8, 1))
    rows.append(measure("modulus_sub_closed_form", "", fn.modulus_sub_closed_form(model), target, s, 1e-8, 1))
    record(5, "Dirac on S3", rows)


def test_criterion_6_functional_calculus(cache):
    rows = []
    for name in MODELS:
        model = cache.model(name, K)
        P = cache.projections(name, K, SIMPLIFIED)
        keep = ("modulus.square", "heaviside.idempotent", "heaviside.selfadjoint", "heaviside.complement",
                "signdef.principal", "signdef.sign")
        rows += [CheckRow(f"{name}/{r.check}", r.index, r.order, r.residual, r.tolerance, r.passed, r.samples,
                          r.skipped)
                 for r in functional_rows(model, P, K, sampler(model), 1e-8, SIMPLIFIED) if r.check in keep]
    record(6, "functional calculus", rows)


def test_criterion_7_calculus_self_consistency(cache):
    rows = []
    for seed in range(20):
        v = composition_law_residual(seed)
        rows.append(CheckRow("composition_law", f"pair={seed}", 1, v, 1e-9, v < 1e-9, N, 0))
    s = Sampler([(-3, 3)] * 2, N, 7)
    for seed in range(3):
        B = random_expansion(seed + 100, depth=K)
        twice = adjoint(adjoint(B))
        for k in range(K + 1):
            rows.append(measure("adjoint_involution", f"seed={seed}", twice.component(k), B.component(k), s, 1e-9, k))
        C = random_expansion(seed + 200, top=0, depth=K)
        D = random_expansion(seed + 300, top=-1, depth=K)
        left, right = compose(compose(B, C), D), compose(B, compose(C, D))
        for k in range(K + 1):
            rows.append(measure("associativity", f"seed={seed}", left.component(k), right.component(k), s, 1e-9, k))
    for name in MODELS:
        model = cache.model(name, K)
        rows += [CheckRow(f"{name}/{r.check}", r.index, r.order, r.residual, r.tolerance, r.passed, r.samples,
                          r.skipped) for r in homogeneity_rows(model, sampler(model), 1e-10)]
    record(7, "calculus self-consistency", rows)


@pytest.fixture(scope="module", autouse=True)
def _fill_missing():
    """A criterion whose test crashed still gets a FAIL line."""
    yield
    titles = {1: "projection axioms", 2: "uniqueness", 3: "closed-form subprincipal", 4: "Lame ground truth",
              5: "Dirac on S3", 6: "functional calculus", 7: "calculus self-consistency"}
    for n, t in titles.items():
        ACCEPTANCE.setdefault(n, f"criterion {n} {t}: FAIL (did not complete)")
