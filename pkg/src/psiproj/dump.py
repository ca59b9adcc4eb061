"""Text dump of projection symbols: rendered entries plus numeric tables."""
from __future__ import annotations

import numpy as np

from . import expr as ex
from . import projections as pr
from .calculus import MatrixFn, subprincipal
from .sampling import Sampler
from .verify import ALGORITHMS, RunConfig, make_model

GRID_POINTS = 4


def _fmt(z: complex) -> str:
    return f"{z.real:+.12e}{z.imag:+.12e}j"


def _matrix_block(title: str, mat: MatrixFn, ev: ex.Evaluator) -> list[str]:
    lines = [f"## {title}"]
    for i in range(mat.m):
        for j in range(mat.m):
            lines.append(f"[{i},{j}] = {ex.render(mat[i, j])}")
    vals = mat.evaluate(ev)
    lines.append("values:")
    for n in range(vals.shape[0]):
        row = "; ".join(" ".join(_fmt(v) for v in r) for r in vals[n])
        lines.append(f"  point {n}: {row}")
    return lines


def dump_text(cfg: RunConfig) -> str:
    cfg.validate()
    model = make_model(cfg)
    tag = "simplified" if cfg.algorithm in ("simplified", "both") else "full"
    P = pr.build_projections(model, cfg.order, ALGORITHMS[tag])
    sampler = Sampler(model.box, GRID_POINTS, cfg.seed)
    lines = [f"# projection symbols: model={cfg.model} order={cfg.order} algorithm={tag}",
             "# sample points (x; xi):"]
    for n in range(sampler.n):
        xs = " ".join(f"{v:+.12e}" for v in sampler.xs[n])
        xis = " ".join(f"{v:+.12e}" for v in sampler.xis[n])
        lines.append(f"#   point {n}: {xs}; {xis}")
    for j in sorted(P):
        ev = sampler.evaluator()
        for k in range(cfg.order + 1):
            comp = P[j].component(k)
            lines += _matrix_block(f"P_{j} component {k} (degree {-k})", comp, ev)
        lines += _matrix_block(f"P_{j} subprincipal", subprincipal(P[j]), ev)
    return "\n".join(lines) + "\n"


def run_dump(cfg: RunConfig, path: str | None = None) -> str:
    text = dump_text(cfg)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
