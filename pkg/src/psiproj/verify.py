"""Run configuration and the end-to-end verification pipeline."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import expr as ex
from . import functional as fn
from . import projections as pr
from .calculus import SymbolExpansion, adjoint, combine, compose, subprincipal
from .models import MODEL_NAMES, ModelError, ModelSpec, build_model
from .report import CheckRow, VerificationReport
from .sampling import Sampler, array_residual
from .spectral import validate_spectral

ALGORITHMS = {"full": "commuting-full", "simplified": "commuting-simplified"}

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_MODEL = 0, 1, 2, 3


class ConfigError(ValueError):
    """Malformed or out-of-range run configuration."""


@dataclass
class RunConfig:
    model: str = "scalar-trivial"
    order: int = 3
    samples: int = 50
    seed: int = 0
    tol: float = 1e-8
    algorithm: str = "both"
    lam: float = 1.0
    mu: float = 1.0
    twist: float = 1.0
    report: str | None = None
    markdown: str | None = None
    dump: str | None = None

    def validate(self) -> "RunConfig":
        if self.model not in MODEL_NAMES:
            raise ConfigError(f"model must be one of {', '.join(MODEL_NAMES)}")
        if self.algorithm not in ("full", "simplified", "both"):
            raise ConfigError("algorithm must be full, simplified or both")
        if not isinstance(self.order, int) or self.order < 1:
            raise ConfigError("order must be an integer >= 1")
        if not isinstance(self.samples, int) or self.samples < 1:
            raise ConfigError("samples must be an integer >= 1")
        if not (isinstance(self.tol, (int, float)) and self.tol > 0):
            raise ConfigError("tol must be positive")
        return self

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            cfg = cls(**data)
        except TypeError as exc:  # pragma: no cover
            raise ConfigError(str(exc)) from exc
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_mapping(data)

    def echo(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k not in ("report", "markdown", "dump")}

    def variants(self) -> list[str]:
        return ["full", "simplified"] if self.algorithm == "both" else [self.algorithm]


def make_model(cfg: RunConfig) -> ModelSpec:
    return build_model(cfg.model, depth=cfg.order, lam=cfg.lam, mu=cfg.mu, twist=cfg.twist, seed=cfg.seed)


def homogeneity_rows(model: ModelSpec, sampler: Sampler, tol: float) -> list[CheckRow]:
    """Euler identity for every component of A and the spectral data, relative to max(1, |e|)."""
    items = [(f"A[{k}]", c.entries(), model.A.top - k) for k, c in enumerate(model.A.components)]
    for j in model.spectral.indices:
        items.append((f"h[{j}]", [model.spectral.h(j)], model.spectral.degree))
        items.append((f"P[{j}]", model.spectral.P(j).entries(), 0))
    ev = sampler.evaluator()
    rows = []
    for label, entries, degree in items:
        worst = np.zeros(sampler.n)
        for e in entries:
            if e.is_const() and (degree == 0 or e.is_zero()):
                continue
            val, defect = ev.values([e, ex.euler_defect(e, degree, model.d)])
            worst = np.maximum(worst, np.abs(defect) / np.maximum(1.0, np.abs(val)))
        rows.append(CheckRow.measured("homogeneity", label, None, array_residual(worst, ev.invalid), tol))
    return rows


def model_rows(model: ModelSpec, sampler: Sampler, tol: float) -> list[CheckRow]:
    """Ground-truth identities attached to the built-in models."""
    exp = model.expected
    rows = []

    def add(check, a, b=None):
        rows.append(CheckRow.measured(check, "", None, sampler.residual(a, b), tol))

    if "kstar_plus_g" in exp:
        add("geometry.kstar_gate", exp["kstar_plus_g"])
    if "dt" in exp:
        add("geometry.torsion_closed", exp["dt"])
    if "prin" in exp:
        add("model.principal", model.A_prin, exp["prin"])
    if "sub" in exp:
        add("model.subprincipal", model.A_sub, exp["sub"])
    if "sub_s3" in exp:
        add("model.subprincipal_s3", model.A_sub, exp["sub_s3"])
    adj = adjoint(model.A)
    ev = sampler.evaluator()
    for k in range(model.depth + 1):
        diff = adj.component(k).evaluate(ev) - model.A.component(k).evaluate(ev)
        rows.append(CheckRow.measured("model.selfadjoint", "", k, array_residual(diff, ev.invalid), tol))
    return rows


def _expansion_rows(check, index, a: SymbolExpansion, b: SymbolExpansion | None, depth, ev, tol):
    pairs = [(a.component, b.component if b is not None else None)]
    return pr.component_rows(check, index, pairs, range(depth + 1), ev, tol)


def certificate_rows(state: pr.ProjectionState, sampler: Sampler, tol: float, tag: str) -> list[CheckRow]:
    """Solvability conditions of the recursions: P R (I - P) = 0 and P T P = 0."""
    sd = state.model.spectral
    rows = []
    ev = sampler.evaluator()
    for step in state.trace:
        k = step["k"]
        for j in sd.indices:
            P = sd.P(j)
            R = step["R"][j]
            v = (P @ R).evaluate(ev) - (P @ R @ P).evaluate(ev)
            rows.append(CheckRow.measured(f"{tag}/certificate.R", f"j={j}", k, array_residual(v, ev.invalid), tol))
            if "T" in step:
                v = (P @ step["T"][j] @ P).evaluate(ev)
                rows.append(CheckRow.measured(f"{tag}/certificate.T", f"j={j}", k,
                                              array_residual(v, ev.invalid), tol))
    return rows


def projection_rows(model, state, sampler, tol, tag) -> list[CheckRow]:
    P = state.ladders
    depth = state.depth
    rows = [CheckRow(f"{tag}/{r.check}", r.index, r.order, r.residual, r.tolerance, r.passed, r.samples, r.skipped)
            for r in pr.verify_projection_axioms(P, model, depth, sampler, tol, state.variant)]
    rows += certificate_rows(state, sampler, tol, tag)
    closed = pr.subprincipal_closed_form(model)
    for j in sorted(P):
        sub = subprincipal(P[j])
        rows.append(CheckRow.measured(f"{tag}/closed_form.sub", f"j={j}", 1, sampler.residual(sub, closed[j]), tol))
        if "proj_sub" in model.expected:
            rows.append(CheckRow.measured(f"{tag}/model.projection_sub_zero", f"j={j}", 1,
                                          sampler.residual(sub, model.expected["proj_sub"]), tol))
    return rows


def uniqueness_rows(A: dict, B: dict, depth, sampler, tol, check="uniqueness.full_vs_simplified"):
    ev = sampler.evaluator()
    rows = []
    for j in sorted(A):
        rows += _expansion_rows(check, f"j={j}", A[j], B[j], depth, ev, tol)
    return rows


def functional_rows(model: ModelSpec, P: dict, depth: int, sampler: Sampler, tol: float,
                    variant: str) -> list[CheckRow]:
    fs = fn.functional_symbols(model, P, depth, variant)
    ev = sampler.evaluator()
    rows = []

    def measured(check, a, b=None, order=None):
        va = a.evaluate(ev)
        v = va if b is None else va - b.evaluate(ev)
        rows.append(CheckRow.measured(check, "", order, array_residual(v, ev.invalid), tol))

    mod, th = fs.modulus, fs.heaviside
    measured("modulus.principal", mod.component(0), fn.modulus_principal(model), 0)
    mod_sub = subprincipal(mod)
    closed = fn.modulus_sub_closed_form(model)
    measured("modulus.sub_closed_form", mod_sub, closed, 1)
    if "modulus_sub" in model.expected:
        measured("modulus.sub_geometric", closed, model.expected["modulus_sub"], 1)
    if "modulus_sub_s3" in model.expected:
        measured("modulus.sub_s3_pipeline", mod_sub, model.expected["modulus_sub_s3"], 1)
        measured("modulus.sub_s3_closed_form", closed, model.expected["modulus_sub_s3"], 1)
    rows += _expansion_rows("modulus.square", "", compose(mod, mod), compose(model.A, model.A), depth, ev, tol)
    comm = compose(model.A, mod) - compose(mod, model.A)
    rows += _expansion_rows("modulus.commutes", "", comm, None, depth, ev, tol)
    rows += _expansion_rows("heaviside.idempotent", "", compose(th, th), th, depth, ev, tol)
    rows += _expansion_rows("heaviside.selfadjoint", "", adjoint(th), th, depth, ev, tol)
    neg = model.negated()
    P_neg = pr.build_projections(neg, depth, variant)
    total = combine([(1, th), (1, fn.heaviside_symbol(neg, P_neg, depth))])
    rows += _expansion_rows("heaviside.complement", "", total, SymbolExpansion.identity(model.m, depth, model.d),
                            depth, ev, tol)
    rows += fn.signdef_principal_check(model, P, sampler, tol)
    return rows


def run_verify(cfg: RunConfig) -> tuple[VerificationReport, int]:
    """Build the configured model and run every check; returns (report, exit status)."""
    report = VerificationReport(config=cfg.echo())
    try:
        cfg.validate()
    except ConfigError as exc:
        report.error = f"config: {exc}"
        return report, EXIT_CONFIG
    try:
        model = make_model(cfg)
    except (ModelError, ValueError) as exc:
        report.error = f"model: {exc}"
        return report, EXIT_MODEL
    sampler = Sampler(model.box, cfg.samples, cfg.seed)
    report.config["sampling"] = {"seed": cfg.seed, "box": [list(b) for b in model.box], "xi": "unit sphere"}
    spectral = validate_spectral(model.spectral, model.A_prin, sampler, max(cfg.tol, 1e-12))
    report.extend(spectral)
    if any(r.passed is False for r in spectral):
        report.error = "spectral data failed validation"
        return report, EXIT_MODEL
    report.extend(homogeneity_rows(model, sampler, cfg.tol))
    report.extend(model_rows(model, sampler, cfg.tol))
    built = {}
    for tag in cfg.variants():
        state = pr.run(pr.start(model, cfg.order, ALGORITHMS[tag]))
        built[tag] = state.ladders
        report.extend(projection_rows(model, state, sampler, cfg.tol, tag))
    if len(built) == 2:
        report.extend(uniqueness_rows(built["full"], built["simplified"], cfg.order, sampler, cfg.tol))
    tag = "simplified" if "simplified" in built else "full"
    report.extend(functional_rows(model, built[tag], cfg.order, sampler, cfg.tol, ALGORITHMS[tag]))
    return report, (EXIT_OK if report.ok else EXIT_FAIL)
