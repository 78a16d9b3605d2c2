"""Command-line entry point.

Five subcommands drive the experiment pipeline: ``simulate`` (propagate one
frame and save the received field), ``train`` (fit equalizer parameters),
``evaluate`` (score one configuration), ``sweep`` (the full method x steps x
power grid behind the result figures) and ``complexity`` (the multiplications
per-symbol model).

Exit codes: 0 success, 2 configuration error, 3 numerical abort, 4 I/O error.
"""

import argparse
import concurrent.futures
import logging
import os
import sys

from .dbp import complexity, parse_method
from .optimizer import load_coefficients, save_coefficients
from .pipeline import (
    DataFileError,
    NumericalError,
    _eval_cell,
    dbp_config_for,
    evaluate_field,
    evaluate_point,
    load_experiment_config,
    load_signal,
    run_sweep,
    save_signal,
    simulate_field,
    train_method,
    write_metrics_csv,
)
from .signals import ConfigurationError
from .txrx import generate_frame

log = logging.getLogger("wdmdbp")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _csv_list(kind):
    def parse(raw):
        items = [s.strip() for s in raw.split(",") if s.strip()]
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        try:
            return [kind(s) for s in items]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment config file (INI)")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--seed", type=int, metavar="U64", help="override the base seed")
    common.add_argument(
        "--threads", type=int, default=1, metavar="K",
        help="worker processes for independent sweep cells",
    )
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    parser = argparse.ArgumentParser(
        prog="wdmdbp",
        description="WDM transmission simulation and coupled-channel DBP experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="propagate one frame through the link and save the field")
    p.add_argument("--power", type=float, default=None, metavar="DBM",
                   help="launch power per channel (default: config training power)")
    p.add_argument("--purpose", choices=("eval", "train"), default="eval")
    p.add_argument("--noiseless", action="store_true", help="disable ASE noise")

    p = sub.add_parser("train", parents=[common], help="fit equalizer parameters")
    p.add_argument("--method", default=None, help="DBP method (default: config)")
    p.add_argument("--steps", type=int, default=None, metavar="N_S",
                   help="number of DBP steps (default: config)")

    p = sub.add_parser("evaluate", parents=[common],
                       help="score one (method, N_s, power) configuration")
    p.add_argument("--method", default=None)
    p.add_argument("--steps", type=int, default=None, metavar="N_S")
    p.add_argument("--power", type=float, default=None, metavar="DBM")
    p.add_argument("--coefficients", metavar="PATH",
                   help="trained coefficient file (default: untrained)")
    p.add_argument("--signal", metavar="PATH",
                   help="evaluate a saved signal file instead of simulating")

    p = sub.add_parser("sweep", parents=[common],
                       help="train and evaluate over the launch-power grid")
    p.add_argument("--methods", type=_csv_list(str), default=None,
                   metavar="M1,M2,...", help="methods (default: config method)")
    p.add_argument("--steps", type=_csv_list(int), default=None,
                   metavar="N1,N2,...", help="step counts (default: config)")
    p.add_argument("--powers", type=_csv_list(float), default=None,
                   metavar="P1,P2,...", help="launch powers in dBm (default: config grid)")

    p = sub.add_parser("complexity", parents=[common],
                       help="real multiplications per 4D symbol")
    p.add_argument("--methods", type=_csv_list(str), default=None, metavar="M1,M2,...")
    p.add_argument("--steps", type=_csv_list(int), default=None, metavar="N1,N2,...")
    p.add_argument("--n-fft", type=int, default=None, metavar="N")
    p.add_argument("--eta", default=None, help="FFT block overhead factor (e.g. 4/3)")
    return parser


def _load_config(args):
    cfg = load_experiment_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigurationError("--seed must be non-negative")
        cfg.tx.rng_seed = args.seed
    return cfg


def _out_path(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _cmd_simulate(args):
    cfg = _load_config(args)
    power = args.power
    if power is None:
        power = cfg.training.train_power_dbm if args.purpose == "train" else 0.0
    tx_cfg, _, field = simulate_field(cfg, power, args.purpose, args.noiseless)
    ase = cfg.amp.include_ase and not args.noiseless
    path = _out_path(args, "signal.bin")
    save_signal(path, field, tx_cfg, ase_enabled=ase)
    log.info("simulated %d samples at %.0f dBm -> %s", field.n_samples, power, path)
    print(path)


def _cmd_train(args):
    cfg = _load_config(args)
    method = parse_method(args.method if args.method else cfg.dbp.method)
    n_steps = args.steps if args.steps is not None else cfg.dbp.n_steps
    coeffs, nl_scale, report = train_method(cfg, method, n_steps)
    if report is None:
        raise ConfigurationError(f"method {method.value} has nothing to train")
    path = _out_path(args, "coefficients.txt")
    save_coefficients(path, coeffs, nl_scale, method)
    log.info("trained %s N_s=%d: MSE %.6g -> %s",
             method.value, n_steps, report.final_mse, path)
    print(path)


def _cmd_evaluate(args):
    cfg = _load_config(args)
    method = parse_method(args.method if args.method else cfg.dbp.method)
    n_steps = args.steps if args.steps is not None else cfg.dbp.n_steps
    coeffs, nl_scale = None, 1.0
    if args.coefficients:
        coeffs, nl_scale, _ = load_coefficients(args.coefficients)
    if args.signal:
        field, tx_cfg, _ = load_signal(args.signal)
        frame = generate_frame(tx_cfg)
        report = evaluate_field(
            cfg, field, tx_cfg, frame, method, n_steps,
            tx_cfg.launch_power_dbm, coeffs, nl_scale,
        )
    else:
        power = args.power if args.power is not None else 0.0
        report = evaluate_point(cfg, method, n_steps, power, coeffs, nl_scale)
    path = _out_path(args, "metrics.csv")
    write_metrics_csv(path, [report])
    log.info("%s N_s=%d %.1f dBm: GMI %.4f bits/4D, NMSE %.2f dB",
             report.method, report.n_steps, report.power_dbm,
             report.avg_gmi, report.avg_nmse_db)
    print(path)


def _cmd_sweep(args):
    cfg = _load_config(args)
    methods = args.methods if args.methods else [cfg.dbp.method.value]
    steps = args.steps if args.steps else [cfg.dbp.n_steps]
    for m in methods:
        parse_method(m)
    if args.threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.threads) as pool:
            reports = run_sweep(cfg, methods, steps, args.powers, map_fn=pool.map)
    else:
        reports = run_sweep(cfg, methods, steps, args.powers)
    path = _out_path(args, "metrics.csv")
    write_metrics_csv(path, reports)
    log.info("%d cells -> %s", len(reports), path)
    print(path)


def _cmd_complexity(args):
    cfg = _load_config(args)
    methods = args.methods if args.methods else [cfg.dbp.method.value]
    steps = args.steps if args.steps else [cfg.dbp.n_steps]
    n_fft = args.n_fft if args.n_fft is not None else cfg.complexity_n_fft
    eta = args.eta if args.eta is not None else cfg.complexity_eta
    lines = ["method,N_s,n_fft,eta,multiplications_per_4d"]
    for m in methods:
        method = parse_method(m)
        sps = (cfg.full_field_sps if method.is_full_field
               else cfg.dbp.samples_per_symbol)
        for n_s in steps:
            c = complexity(
                method, n_s, n_fft, eta, sps,
                n_c=cfg.dbp.n_c0, n_channels=cfg.tx.n_channels,
            )
            lines.append(f"{method.value},{n_s},{n_fft},{eta},{float(c):.2f}")
            print(f"{method.value:10s} N_s={n_s:<4d} {float(c):10.2f}")
    path = _out_path(args, "complexity.csv")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    print(path)


_COMMANDS = {
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "complexity": _cmd_complexity,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        _COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataFileError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
