"""
CLI entry point for oldroyd-fem
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from oldroyd_fem import __version__
from oldroyd_fem.certify import certificate_lines, certify, config_hash
from oldroyd_fem.config import RunConfig
from oldroyd_fem.errors import ConfigError, MeshFormatError, OldroydError
from oldroyd_fem.mesh import SimplicialMesh, audit_mesh, build_structured_mesh, read_mesh
from oldroyd_fem.models import RunSummary
from oldroyd_fem.properties import SUITES, run_suite
from oldroyd_fem.reporters.certificate import CertificateReporter
from oldroyd_fem.reporters.html import HTMLReporter
from oldroyd_fem.reporters.json_reporter import JSONReporter
from oldroyd_fem.reporters.trace import TraceReporter
from oldroyd_fem.reporters.vtk import VTKReporter
from oldroyd_fem.scenarios import make_forcing, make_initial
from oldroyd_fem.schemes import make_scheme
from oldroyd_fem.spaces import measure_inverse_constants
from oldroyd_fem.stepper import TimeGrid, delta_continuation, run
from oldroyd_fem.tensor import Regularization

logger = logging.getLogger("oldroyd_fem")

EXIT_OK = 0
EXIT_CERTIFICATE_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_STEP_FAILURE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oldroyd-fem",
        description="Energy-stable finite element runs of the regularized Oldroyd-B model.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s run --config configs/equilibrium.yaml
  %(prog)s run --config configs/cavity_dg0.yaml --out results/ --snapshots 5
  %(prog)s mesh-audit --mesh square.mesh
  %(prog)s props --suite lemma
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_cmd = sub.add_parser("run", help="Run a configured simulation and certify its energy audits")
    run_cmd.add_argument("--config", required=True, help="Run configuration (YAML)")
    run_cmd.add_argument("--out", default=None, help="Output directory (overrides output_dir)")
    run_cmd.add_argument(
        "--parallel-assembly",
        action="store_true",
        help="Assemble convection blocks on a thread pool",
    )
    run_cmd.add_argument(
        "--snapshots", type=int, default=None, help="Write a VTK snapshot every k steps (0: none)"
    )
    _display_options(run_cmd)

    audit_cmd = sub.add_parser("mesh-audit", help="Check shape regularity and the non-obtuse hypothesis")
    audit_cmd.add_argument("--mesh", required=True, help="Mesh file")
    _display_options(audit_cmd)

    props_cmd = sub.add_parser("props", help="Run a named property suite")
    props_cmd.add_argument("--suite", required=True, choices=sorted(SUITES), help="Suite name")
    props_cmd.add_argument("--out", default=None, help="Optional certificate output path")
    _display_options(props_cmd)
    return parser


def _display_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    parser.add_argument("--quiet", "-q", action="store_true", help="Quiet mode (no progress bars)")


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def say(quiet: bool, message: str) -> None:
    if not quiet:
        print(message)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def load_mesh(config: RunConfig) -> SimplicialMesh:
    if config.mesh_file is not None:
        return read_mesh(config.mesh_file)
    ny = config.ny if config.ny is not None else config.nx
    return build_structured_mesh(config.nx, ny, config.domain)


def make_grid(config: RunConfig) -> TimeGrid:
    if config.dt_list is not None:
        return TimeGrid.from_steps(config.dt_list, config.dt_ratio)
    return TimeGrid.uniform(config.t_final, config.n_steps, config.dt_ratio)


def write_failure_report(path: Path, failure: OldroydError, scheme: str) -> None:
    items = [
        ("scheme", scheme),
        ("step", getattr(failure, "step", None)),
        ("message", str(failure)),
        ("residual_history", list(getattr(failure, "residual_history", []))),
    ]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(certificate_lines(items)) + "\n", encoding="utf-8")


def run_command(args: argparse.Namespace) -> int:
    try:
        config = RunConfig.from_file(args.config)
        config.merge_cli_args(args)
    except ConfigError as e:
        logger.error("configuration rejected: %s", e)
        print(f"[!] {args.config}: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    quiet = config.quiet
    out = Path(config.output_dir)

    try:
        say(quiet, f"[*] Building mesh for {config.scheme}")
        mesh = load_mesh(config)
        audit = audit_mesh(mesh)
        if config.scheme.startswith("fem1") and not audit.non_obtuse:
            say(quiet, f"[!] Mesh has {len(audit.violations)} obtuse angles; fem1 assumes a non-obtuse mesh")
        grid = make_grid(config)
        scheme = make_scheme(
            config.scheme,
            mesh,
            config.fluid_params(),
            config.reg_params(),
            config.velocity_space,
            config.solver_opts(),
        )
        initial = make_initial(config.initial, config.lambda_min, config.lambda_max, config.seed)
        forcing = make_forcing(config.forcing, config.forcing_amplitude, config.domain)
        state = scheme.initial_state(initial.velocity, initial.stress, grid.dt0)
    except (OSError, OldroydError) as e:
        logger.error("setup failed: %s", e)
        print(f"[!] {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    say(quiet, f"[+] {mesh!r}, {scheme.size} unknowns, {grid.n_steps} steps to t = {grid.t_final:g}")

    say(quiet, f"[*] Running {scheme.name}...")
    trajectory = run(scheme, state, grid, forcing, progress=not quiet)

    if config.snapshots > 0:
        vtk = VTKReporter()
        last = len(trajectory.states) - 1
        for n in sorted(set(range(0, last + 1, config.snapshots)) | {last}):
            vtk.generate(trajectory.states[n], out / f"snapshot_{n:05d}.vtk")
        say(quiet, f"[+] Wrote VTK snapshots to {out}")

    continuation = None
    if config.continuation:
        family = config.scheme.split("-")[0]
        fluid, opts, cutoff = config.fluid_params(), config.solver_opts(), config.cutoff
        say(quiet, f"[*] Delta continuation over {len(config.continuation)} values...")
        continuation = delta_continuation(
            lambda reg: make_scheme(family, mesh, fluid, reg, config.velocity_space, opts),
            lambda s: s.initial_state(initial.velocity, initial.stress, grid.dt0),
            grid,
            config.continuation,
            forcing,
            unregularized_factory=lambda: make_scheme(
                f"{family}-unreg", mesh, fluid, Regularization.unregularized(cutoff),
                config.velocity_space, opts,
            ),
            cutoff=cutoff,
            progress=not quiet,
        )
        say(quiet, f"[+] Unregularized residual of the last state: {continuation.unregularized_residual:.3e}")

    digest = config_hash(config.to_dict())
    certificate = certify(trajectory, config.audit_tol, digest)
    summary = RunSummary(
        config=config.to_dict(),
        certificate=certificate,
        breakdowns=trajectory.breakdowns,
        mesh_audit=audit,
        continuation=continuation,
        failure=None if trajectory.failure is None else str(trajectory.failure),
    )

    say(quiet, "[*] Writing reports...")
    outputs = [
        (CertificateReporter(), certificate, out / "certificate.txt"),
        (TraceReporter(), trajectory, out / "trace.csv"),
        (JSONReporter(), summary, out / "summary.json"),
        (HTMLReporter(), summary, out / "report.html"),
    ]
    for reporter, result, path in outputs:
        reporter.generate(result, path)
        say(quiet, f"[+] Wrote {path}")

    if trajectory.failure is not None:
        path = out / "failure.txt"
        write_failure_report(path, trajectory.failure, scheme.name)
        logger.error("step failure: %s", trajectory.failure)
        print(f"[!] Step {trajectory.failure.step} failed; report written to {path}", file=sys.stderr)
        return EXIT_STEP_FAILURE

    if not certificate.passed:
        print(
            f"[!] Certificate {certificate.verdict}: min slack {certificate.min_slack:.3e} "
            f"at steps {certificate.failed_steps}",
            file=sys.stderr,
        )
        return EXIT_CERTIFICATE_FAILED
    say(quiet, f"[+] Certificate pass: min slack {certificate.min_slack:.3e}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# mesh-audit and props
# ---------------------------------------------------------------------------


def mesh_audit_command(args: argparse.Namespace) -> int:
    try:
        mesh = read_mesh(args.mesh)
    except (OSError, MeshFormatError) as e:
        logger.error("mesh rejected: %s", e)
        print(f"[!] {args.mesh}: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    audit = audit_mesh(mesh)
    items = list(audit.to_dict().items())
    items.extend((f"inverse_{k}", v) for k, v in measure_inverse_constants(mesh).items())
    print("\n".join(certificate_lines(items)))
    if not audit.non_obtuse:
        say(args.quiet, f"[!] {len(audit.violations)} obtuse angles: the fem1 energy law does not apply")
    return EXIT_OK


def props_command(args: argparse.Namespace) -> int:
    say(args.quiet, f"[*] Running property suite {args.suite}...")
    result = run_suite(args.suite)
    reporter = CertificateReporter()
    print(reporter.render(result), end="")
    if args.out:
        reporter.generate(result, args.out)
        say(args.quiet, f"[+] Wrote {args.out}")
    return EXIT_OK if result.passed else EXIT_CERTIFICATE_FAILED


COMMANDS = {
    "run": run_command,
    "mesh-audit": mesh_audit_command,
    "props": props_command,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point"""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
