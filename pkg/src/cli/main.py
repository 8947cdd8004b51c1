"""Command-line driver: run, convergence, verify, ordinates and info."""

import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from config.run_config import RunConfig
from src.analysis.convergence import ConvergenceRecord, eoc
from src.analysis.norms import error_norms
from src.angular.angular_mesh import build_angular_mesh, ordinate_set
from src.cli.problem import build_problem
from src.cli.verify import VerifyHooks, all_passed, format_results, run_checks
from src.errors import (
    BoltzDGError, ConfigurationError, ConvergenceFailure, MeshValidationError, OracleError, SolverError,
    VerificationFailure
)
from src.export.convergence_writer import ConvergenceWriter, write_ordinate_table
from src.export.flux_writer import FluxWriter, write_report
from src.export.sidecar import write_sidecar
from src.physics.positivity import check_positivity
from src.solver.source_iteration import multigroup_solve

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_VERIFICATION = 3


def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="boltzdg",
        description="Discontinuous Galerkin discrete-ordinates solver for linear Boltzmann transport.",
    )
    parser.add_argument("--output-dir", help="Override output.directory")
    parser.add_argument("--threads", type=int, help="Worker threads (0 = all cores); overrides BOLTZDG_THREADS")
    parser.add_argument("--seed", type=int, default=0, help="Seed for randomized property checks")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "Solve one configured problem"),
                       ("convergence", "Run a manufactured-solution refinement study"),
                       ("ordinates", "Write the ordinate table of a configuration"),
                       ("info", "Print degree-of-freedom counts and the positivity report")):
        sub = commands.add_parser(name, help=text)
        sub.add_argument("config", help="TOML run configuration")
    verify = commands.add_parser("verify", help="Run the built-in verification suite")
    verify.add_argument("--perturb-weights", type=float, default=0.0, help=argparse.SUPPRESS)
    verify.add_argument("--inject-upscatter", action="store_true", help=argparse.SUPPRESS)
    return parser.parse_args(argv)


def _load_config(args: argparse.Namespace, convergence: bool = False) -> RunConfig:
    config = RunConfig.from_toml(args.config)
    config = config.with_overrides(solver={"threads": config.solver.apply_environment().threads})
    if args.threads is not None:
        config = config.with_overrides(solver={"threads": args.threads})
    if args.output_dir:
        config = config.with_overrides(output={"directory": args.output_dir})
    return config.check(convergence)


def _output_path(config: RunConfig, name: str) -> str:
    os.makedirs(config.output.directory, exist_ok=True)
    return os.path.join(config.output.directory, name)


def cmd_run(config: RunConfig) -> int:
    problem, exact = build_problem(config)
    disc = problem.discretisation
    centroids = np.array([m.centroid for m in disc.dofmap.metrics])
    check_positivity(problem.model, disc.grid, centroids)
    flux, report = multigroup_solve(problem, config.solver)

    config_hash = config.config_hash()
    writer = FluxWriter(config_hash)
    extra = {"config_hash": config_hash, "n_dofs": disc.n_dofs, "partial": not report.converged}
    if exact is not None:
        extra["errors"] = error_norms(flux, exact, disc, problem.model, config.output.norm_quadrature).to_dict()
    writer.write_summary(flux, disc, _output_path(config, "flux_summary.csv"))
    if config.output.coefficients:
        writer.write_coefficients(flux, disc, _output_path(config, "coefficients.csv"))
    if config.output.parquet:
        writer.write_parquet(flux, disc, _output_path(config, "coefficients.parquet"))
    if config.output.sidecar:
        write_sidecar(_output_path(config, "flux.bzdg"), flux.to_array())
    write_report(report, _output_path(config, "report.json"), extra)

    if not report.converged:
        raise ConvergenceFailure(
            f"Source iteration did not converge; artifacts in {config.output.directory} are partial")
    return EXIT_OK


def cmd_convergence(config: RunConfig) -> int:
    writer = ConvergenceWriter(config.config_hash())
    for degree in config.convergence.degrees:
        records: List[ConvergenceRecord] = []
        csv_path = _output_path(config, f"convergence_p{degree}.csv")
        for index in range(len(config.convergence.levels)):
            level = config.level(index, degree)
            problem, exact = build_problem(level)
            if exact is None:
                raise ConfigurationError(["problem.exact must name a manufactured solution for convergence runs"])
            disc = problem.discretisation
            flux, report = multigroup_solve(problem, level.solver)
            norms = error_norms(flux, exact, disc, problem.model, level.output.norm_quadrature)
            records.append(ConvergenceRecord(
                index, disc.n_dofs, (disc.h_spatial, disc.h_angular, disc.h_energy),
                (level.spatial.degree, level.angular.degree, level.energy.degree), disc.domain_dimension,
                norms.to_dict(), report.iterations))
            logger.info("p=%d level %d: N=%d, errors %s", degree, index, disc.n_dofs, norms.to_dict())
            writer.write_csv(records, None, csv_path)
            if not report.converged:
                raise ConvergenceFailure(f"Level {index} did not converge; study for p={degree} aborted")
        rates = eoc(records)
        writer.write_csv(records, rates, csv_path)
        writer.write_svg(records, _output_path(config, f"convergence_p{degree}.svg"))
        print(rates.to_string(index=False))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    hooks = VerifyHooks(weight_perturbation=args.perturb_weights, inject_upscatter=args.inject_upscatter)
    results = run_checks(args.seed, hooks)
    print(format_results(results))
    if not all_passed(results):
        raise VerificationFailure(f"{sum(not r.passed for r in results)} of {len(results)} checks failed")
    return EXIT_OK


def cmd_ordinates(config: RunConfig) -> int:
    ordinates = ordinate_set(build_angular_mesh(config.angular.dimension, config.angular.patches,
                                                config.angular.degree))
    path = _output_path(config, "ordinates.csv")
    write_ordinate_table(ordinates, path, config.config_hash())
    print(f"Wrote {len(ordinates)} ordinates to {path}")
    return EXIT_OK


def cmd_info(config: RunConfig) -> int:
    problem, _ = build_problem(config)
    disc = problem.discretisation
    sampling = disc.dofmap.sampling()
    report = check_positivity(problem.model, disc.grid, sampling.points[::max(1, len(sampling.points) // 64)])
    lines = [
        f"config hash        : {config.config_hash()}",
        f"spatial elements   : {disc.mesh.n_elements}",
        f"spatial dofs N_X   : {disc.n_spatial}",
        f"ordinates M        : {len(disc.ordinates)}",
        f"energy groups      : {disc.grid.n_groups}",
        f"energy nodes       : {disc.grid.total_nodes}",
        f"total dofs N       : {disc.n_dofs}",
        f"phase dimension d_D: {disc.domain_dimension}",
        f"c0_min [1/m]       : {report.c0_min:.6g} at x={np.round(report.argmin_x, 6).tolist()}, "
        f"E={report.argmin_energy:.6g} keV",
    ]
    print("\n".join(lines))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = _parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args)
        config = _load_config(args, convergence=args.command == "convergence")
        handlers = {"run": cmd_run, "convergence": cmd_convergence, "ordinates": cmd_ordinates, "info": cmd_info}
        return handlers[args.command](config)
    except (ConfigurationError, MeshValidationError, FileNotFoundError) as e:
        logger.error("%s", e)
        return EXIT_VALIDATION
    except (SolverError, OracleError) as e:
        logger.error("%s", e)
        return EXIT_SOLVER
    except VerificationFailure as e:
        logger.error("%s", e)
        return EXIT_VERIFICATION
    except (BoltzDGError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_VALIDATION


if __name__ == '__main__':
    sys.exit(main())
