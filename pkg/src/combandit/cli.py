"""Command line: ``run``, ``lowerbound`` and ``spectral`` subcommands."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from typing import Dict, List, Optional

from . import actions
from .harness import ConfigError, ExperimentConfig, emit_lower_bound_reference, run_experiment


def _load(path: str):
    with open(path) as fh:
        raw = json.load(fh)
    return raw, ExperimentConfig.from_dict(raw)


def _parse_params(items: List[str]) -> Dict[str, int]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError("params", f"expected key=value, got {item!r}")
        try:
            out[key] = int(value)
        except ValueError:
            raise ConfigError(f"params.{key}", "must be an integer") from None
    return out


def cmd_run(args) -> Dict:
    raw, cfg = _load(args.config)
    result = run_experiment(cfg, raw)
    final = [asdict(r) for r in result.summary if r.round == cfg.horizon]
    return {
        "traces": str(result.paths["traces"]),
        "summary": str(result.paths["summary"]),
        "failures": len(result.failures),
        "final": final,
    }


def cmd_lowerbound(args) -> Dict:
    _, cfg = _load(args.config)
    return emit_lower_bound_reference(cfg)


def cmd_spectral(args) -> Dict:
    aset = actions.from_config({"kind": args.structure, **_parse_params(args.params)})
    mu_min, lam = aset.spectral_constants()
    return {**aset.describe(), "d": aset.d, "m": aset.m, "arms": len(aset),
            "mu_min": mu_min, "lambda_lower": lam}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="combandit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True)
    run.set_defaults(func=cmd_run)
    lb = sub.add_parser("lowerbound", help="print the regret lower bound and |H| as JSON")
    lb.add_argument("--config", required=True)
    lb.set_defaults(func=cmd_lowerbound)
    sp = sub.add_parser("spectral", help="print (mu_min, lambda_lower) of an action set")
    sp.add_argument("--structure", required=True, choices=actions.KINDS)
    sp.add_argument("--params", nargs="*", default=[], metavar="KEY=VALUE")
    sp.set_defaults(func=cmd_spectral)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        out = args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error": exc.message, "field": exc.field}), file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1
    print(json.dumps(out, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
