"""Command-line driver: ``psiproj verify`` and ``psiproj dump``."""
from __future__ import annotations

import argparse
import sys

from .models import MODEL_NAMES
from .verify import EXIT_CONFIG, EXIT_MODEL, ConfigError, RunConfig, run_verify

OVERRIDES = ("model", "order", "samples", "seed", "tol", "algorithm", "lam", "mu", "twist", "report", "markdown",
             "dump")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="psiproj", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("verify", "build projections and run all checks"),
                        ("dump", "write the projection symbols to a text file")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="JSON file with run settings; flags override it")
        s.add_argument("--model", choices=MODEL_NAMES)
        s.add_argument("--order", type=int, help="truncation depth K (default 3)")
        s.add_argument("--samples", type=int, help="sample points N (default 50)")
        s.add_argument("--seed", type=int)
        s.add_argument("--tol", type=float, help="residual tolerance (default 1e-8)")
        s.add_argument("--algorithm", choices=("full", "simplified", "both"))
        s.add_argument("--lam", type=float, help="Lame parameter lambda")
        s.add_argument("--mu", type=float, help="Lame parameter mu")
        s.add_argument("--twist", type=float, help="framing twist rate")
        s.add_argument("--report", help="JSON report path")
        s.add_argument("--markdown", help="markdown report path")
        s.add_argument("--dump", help="dump file path")
    return p


def load_config(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = RunConfig.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        data = {k: getattr(cfg, k) for k in OVERRIDES}
    for k in OVERRIDES:
        v = getattr(args, k, None)
        if v is not None:
            data[k] = v
    return RunConfig.from_mapping(data).validate()


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"psiproj: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "dump":
        from .dump import run_dump
        from .models import ModelError
        try:
            text = run_dump(cfg, cfg.dump)
        except ModelError as exc:
            print(f"psiproj: {exc}", file=sys.stderr)
            return EXIT_MODEL
        if not cfg.dump:
            sys.stdout.write(text)
        return 0
    report, status = run_verify(cfg)
    if cfg.report:
        _write(cfg.report, report.to_json())
    if cfg.markdown:
        _write(cfg.markdown, report.markdown())
    s = report.summary
    print(f"{cfg.model}: {s['passed']} passed, {s['failed']} failed, {s['not_applicable']} n/a")
    for r in report.failures():
        print(f"  FAIL {r.check} {r.index} order={r.order} residual={r.residual:.3e} tol={r.tolerance:.0e}")
    if report.error:
        print(f"  error: {report.error}", file=sys.stderr)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
