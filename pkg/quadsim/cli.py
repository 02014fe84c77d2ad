"""
Interfaz de línea de comandos.

Subcomandos: simulate, montecarlo, gains, validate, compare.
Códigos de salida: 0 éxito, 1 configuración, 2 fallo numérico, 3 E/S.
"""

import argparse
import logging
import os
import sys

import numpy as np

from quadsim.config import configure_logging, get_settings
from quadsim.data_loader import load_scenario
from quadsim.exceptions import ConfigError, ExportError, NumericalError
from quadsim.harness import build_design, export_csv, monte_carlo, simulate_run
from quadsim.metrics import compare_reports, mse_metrics
from quadsim.numerics import dare_residual
from quadsim.validation import run_validation

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
DEFAULT_COMPARE = ("scenarios/scenario1.json", "scenarios/scenario2.json")


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ExportError(path, exc) from exc


def _output_path(filename):
    return os.path.join(get_settings().output_dir, filename)


def cmd_simulate(args):
    sc, _ = load_scenario(args.scenario, seed=args.seed)
    log = simulate_run(sc)
    if log.failed:
        logger.warning("La corrida divergió en el paso %d", log.failed_step)
    output = args.output or _output_path(f"run_{sc.name}_{sc.seed}.csv")
    export_csv(log, output)
    print(f"Bitácora escrita en {output} ({len(log)} pasos)")
    if len(log):
        for nombre, valor in mse_metrics(log).items():
            print(f"{nombre:>16s}  {valor:.6g}")
    return EXIT_NUMERICAL if log.failed else EXIT_OK


def cmd_montecarlo(args):
    sc, _ = load_scenario(args.scenario, seed=args.seed)
    report = monte_carlo(sc, n_runs=args.runs, n_jobs=args.jobs or get_settings().n_jobs)
    print(report.to_table())
    output = args.json or _output_path(f"report_{sc.name}.json")
    _write_text(output, report.to_json())
    print(f"Reporte JSON escrito en {output}")
    return EXIT_OK


def cmd_gains(args):
    sc, _ = load_scenario(args.scenario)
    design = build_design(sc)
    gain, am = design.gain, design.augmented
    residual = dare_residual(am.phi_bar, am.gamma_bar, sc.weights.q_bar, sc.weights.r, gain.s)
    with np.printoptions(precision=4, suppress=True, linewidth=160):
        print("L^x̂ =")
        print(gain.l_xhat)
        print("L^i =")
        print(gain.l_i)
    print(f"Residuo DARE: {residual:.3e}")
    print(f"Radio espectral de lazo cerrado: {gain.spectral_radius:.6f}")
    return EXIT_OK


def cmd_validate(args):
    sc, _ = load_scenario(args.scenario)
    df = run_validation(sc, include_nees=not args.skip_nees)
    print(df.to_string(index=False))
    return EXIT_OK if df["passed"].all() else EXIT_NUMERICAL


def cmd_compare(args):
    base, _ = load_scenario(args.base, seed=args.seed)
    other, _ = load_scenario(args.other, seed=args.seed)
    n_jobs = args.jobs or get_settings().n_jobs
    rep_base = monte_carlo(base, n_runs=args.runs, n_jobs=n_jobs)
    rep_other = monte_carlo(other, n_runs=args.runs, n_jobs=n_jobs)
    print(rep_base.to_table())
    print()
    print(rep_other.to_table())
    print()
    print(f"Reducción de {other.name} respecto de {base.name} (%):")
    table = compare_reports(rep_base, rep_other)
    print(table[["mean_reduction_pct", "median_reduction_pct"]].to_string(float_format=lambda v: f"{v:.2f}"))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="quadsim", description="Simulador de estimación y control LQ-Servo de un cuadricóptero")
    parser.add_argument("--log-level", default=None, help="Nivel de logging (por defecto QUADSIM_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Una corrida: CSV y resumen de MSE")
    p.add_argument("--scenario", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", default=None, help="Ruta del CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("montecarlo", help="Lote Monte Carlo: tabla y JSON")
    p.add_argument("--scenario", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--json", default=None, help="Ruta del reporte JSON")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("gains", help="Ganancia L∞, residuo de la DARE y radio espectral")
    p.add_argument("--scenario", default=None)
    p.set_defaults(func=cmd_gains)

    p = sub.add_parser("validate", help="Verificaciones de invariantes")
    p.add_argument("--scenario", default=None)
    p.add_argument("--skip-nees", action="store_true", help="Omitir la prueba NEES (lenta)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compare", help="Compara dos escenarios con semillas pareadas")
    p.add_argument("--base", default=DEFAULT_COMPARE[0])
    p.add_argument("--other", default=DEFAULT_COMPARE[1])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except NumericalError as exc:
        logger.error("%s", exc)
        return EXIT_NUMERICAL
    except ExportError as exc:
        logger.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
