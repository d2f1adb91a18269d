"""Command-line entry point.

    cpushpull --config run.json [--out run.csv] [--seed N] [--iters N]
              [--algo {pushpull,cpp,bcpp}] [--compressor SPEC]
    cpushpull sweep --config run.json --gammas 1 0.5 0.25 [--out-dir DIR] [--jobs N]

Exit status: 0 success, 1 configuration error, 2 runtime or numerical error.
"""

import argparse
import logging
import sys
from pathlib import Path

from .errors import AssumptionError, ConfigError, NumericalError, ParameterError, ParseError
from .harness import best_of_sweep, parse_config, run_experiment, sweep_gamma, write_csv

log = logging.getLogger("cpushpull")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _run_parser():
    ap = _Parser(prog="cpushpull", description="Run one decentralized optimisation experiment.")
    ap.add_argument("--config", required=True, help="JSON experiment configuration")
    ap.add_argument("--out", help="CSV output path (overrides config 'out')")
    ap.add_argument("--seed", type=int, help="master seed override")
    ap.add_argument("--iters", type=int, help="iteration count override")
    ap.add_argument("--algo", help="pushpull | cpp | bcpp")
    ap.add_argument("--compressor", help="identity | quantize:b=B | randk:k=K")
    return ap


def _sweep_parser():
    ap = _Parser(prog="cpushpull sweep", description="Run one experiment per gamma value.")
    ap.add_argument("--config", required=True)
    ap.add_argument("--gammas", type=float, nargs="+", required=True)
    ap.add_argument("--out-dir", default=".", help="directory for gamma_<g>.csv files")
    ap.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    return ap


def _load(path, overrides):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    cfg = parse_config(text)
    changes = {k: v for k, v in overrides.items() if v is not None}
    return cfg.replace(**changes) if changes else cfg


def _cmd_run(argv):
    args = _run_parser().parse_args(argv)
    cfg = _load(args.config, {"out": args.out, "seed": args.seed, "iters": args.iters,
                              "algo": args.algo, "compressor": args.compressor})
    out = run_experiment(cfg)
    last = out.records[-1]
    if cfg.out:
        write_csv(out, cfg.out)
        log.info("wrote %d records to %s", len(out.records), cfg.out)
    print(f"{cfg.algo} {cfg.compressor}: iter={last.iter} loss_gap={last.loss_gap:.3e} "
          f"bits={last.bits} ({out.wall_time:.2f}s)")
    return EXIT_OK


def _cmd_sweep(argv):
    args = _sweep_parser().parse_args(argv)
    cfg = _load(args.config, {})
    results = sweep_gamma(cfg, args.gammas, jobs=args.jobs)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    print("gamma,status,iter,loss_gap,bits")
    for g, out, err in results:
        if out is None:
            it = getattr(err, "iteration", "")
            print(f"{g},error,{it},,")
            log.warning("gamma=%s failed: %s", g, err)
            continue
        write_csv(out, outdir / f"gamma_{g:g}.csv")
        last = out.records[-1]
        print(f"{g},ok,{last.iter},{last.loss_gap!r},{last.bits}")
    best = best_of_sweep(results, target=cfg.stop_at)
    if best is None:
        log.error("every gamma failed")
        return EXIT_RUNTIME
    print(f"best gamma: {best[0]:g}")
    return EXIT_OK


def cli_main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if argv and argv[0] == "sweep":
            return _cmd_sweep(argv[1:])
        return _cmd_run(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        where = f" (iteration {exc.iteration})" if exc.iteration is not None else ""
        print(f"numerical error{where}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (AssumptionError, ParseError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(cli_main())
