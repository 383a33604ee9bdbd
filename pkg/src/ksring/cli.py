"""Command line entry point: ``ksring <verb> [sub] [--config F] [--out D] [--seed N] [--tol-scale X]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import ConfigInvalid, KSRingError
from .harness import ExperimentConfig, RunManifest, emit_plot_data, run_experiment

EXIT_PASS, EXIT_PROBE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

VERB_KIND = {
    ("fields", None): "fields",
    ("spectral", "build"): "spectral_build",
    ("spectral", "scan"): "eigen_scan",
    ("modulation", "reduced"): "modulation_reduced",
    ("modulation", "shoot"): "modulation_shoot",
    ("modulation", "check"): "modulation_check",
    ("sim", "run"): "sim_run",
    ("sim", "fit"): "sim_fit",
}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="seed for randomized probes")
    p.add_argument("--tol-scale", type=float, dest="tol_scale", help="multiply probe tolerances")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ksring", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)
    _common(sub.add_parser("fields", help="Poisson solver checks on the stationary profile"))
    for verb, actions in (("spectral", ("build", "scan")), ("modulation", ("reduced", "shoot", "check")),
                          ("sim", ("run", "fit"))):
        vp = sub.add_parser(verb)
        vs = vp.add_subparsers(dest="action", required=True)
        for a in actions:
            _common(vs.add_parser(a))
    rp = sub.add_parser("report", help="verify a manifest and emit plot data")
    _common(rp)
    return ap


def _config(args, kind) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        if cfg.kind != kind:
            raise ConfigInvalid(f"config kind {cfg.kind!r} does not match verb ({kind!r})")
    else:
        cfg = ExperimentConfig(kind, out=f"runs/{kind}")
    d = cfg.to_dict()
    if args.out:
        d["out"] = args.out
    if args.seed is not None:
        d["seed"] = args.seed
    if args.tol_scale is not None:
        d["tol_scale"] = args.tol_scale
    return ExperimentConfig.from_dict(d)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    try:
        if args.verb == "report":
            if not args.out:
                raise ConfigInvalid("report needs --out pointing at a run directory")
            man = RunManifest.read(args.out)
            ok = man.verify()
            files = emit_plot_data(man) if man.series else []
            print(json.dumps({"checksums_ok": ok, "probes_passed": man.passed,
                              "plot_files": [str(f) for f in files]}, indent=2))
            return EXIT_PASS if ok and man.passed else EXIT_PROBE
        kind = VERB_KIND[(args.verb, getattr(args, "action", None))]
        man = run_experiment(_config(args, kind))
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KSRingError, ValueError, ArithmeticError, OSError) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for name, pr in man.probes.items():
        print(f"{'PASS' if pr['passed'] else 'FAIL'} {name} value={pr['value']:.3e} bound={pr['bound']:.3e}")
    print(f"manifest: {man.root}/manifest.json")
    return EXIT_PASS if man.passed else EXIT_PROBE


if __name__ == "__main__":
    sys.exit(main())
