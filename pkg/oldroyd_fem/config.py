"""
Run configuration for oldroyd-fem
"""

import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml

from oldroyd_fem.errors import ConfigError
from oldroyd_fem.models import FluidParams, RegParams, SolverOpts
from oldroyd_fem.scenarios import FORCINGS, INITIAL_CONDITIONS
from oldroyd_fem.spaces import LBB_PAIRS, SpaceTag

logger = logging.getLogger(__name__)

CONFIG_SCHEMES = ("dg0", "dg0-unreg", "fem1", "fem1-unreg")

# velocity spaces forming a stable pair with each scheme's pressure
COMPATIBLE_VELOCITY = {
    family: sorted(v.value for v, p in LBB_PAIRS if p is pressure)
    for family, pressure in (("dg0", SpaceTag.PRES_P0), ("fem1", SpaceTag.PRES_P1))
}


@dataclass
class RunConfig:
    """Configuration of one simulation run"""

    # Scheme
    scheme: str = "dg0"
    velocity_space: Optional[str] = None

    # Mesh
    nx: int = 8
    ny: Optional[int] = None
    mesh_file: Optional[str] = None
    domain: List[float] = field(default_factory=lambda: [0.0, 1.0, 0.0, 1.0])

    # Physics
    re: float = 1.0
    wi: float = 1.0
    eps: float = 0.5
    alpha: float = 0.0

    # Regularization
    delta: float = 0.1
    cutoff: Optional[float] = None

    # Time
    t_final: float = 1.0
    n_steps: int = 10
    dt_list: Optional[List[float]] = None
    dt_ratio: float = 2.0

    # Scenario
    forcing: str = "zero"
    forcing_amplitude: float = 1.0
    initial: str = "equilibrium"
    lambda_min: float = 0.5
    lambda_max: float = 2.0
    seed: int = 0

    # Solver
    tol: float = 1e-10
    max_iter: int = 200
    audit_tol: float = 1e-9
    continuation: Optional[List[float]] = None

    # Output
    output_dir: str = "out"
    snapshots: int = 0
    parallel_assembly: bool = False

    # Display (command line only)
    verbose: bool = False
    quiet: bool = False

    @classmethod
    def keys(cls) -> List[str]:
        return [f.name for f in fields(cls) if f.name not in ("verbose", "quiet")]

    @classmethod
    def from_mapping(
        cls, data: Dict[str, Any], lines: Optional[Dict[str, Tuple[int, int]]] = None
    ) -> "RunConfig":
        """Build and validate a configuration from a flat mapping"""
        lines = lines or {}
        known = set(cls.keys())
        for key in data:
            if key not in known:
                line, column = lines.get(key, (None, None))
                raise ConfigError(f"unknown configuration key {key!r}", key, line, column)
        config = cls(**data)
        config.validate(lines)
        return config

    @classmethod
    def from_file(cls, config_path: Union[str, Path]) -> "RunConfig":
        """
        Load configuration from a flat YAML file

        Args:
            config_path: Path to YAML config file

        Returns:
            Validated RunConfig; ConfigError carries line and column of the
            offending key or YAML syntax error
        """
        path = Path(config_path)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read configuration {path}: {e.strerror}")
        try:
            data = yaml.safe_load(text)
            node = yaml.compose(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            if mark is not None:
                raise ConfigError(f"invalid YAML: {e.problem}", None, mark.line + 1, mark.column + 1)
            raise ConfigError(f"invalid YAML: {e}")
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a flat mapping of key: value", None, 1, 1)

        lines: Dict[str, Tuple[int, int]] = {}
        if isinstance(node, yaml.MappingNode):
            for key_node, _ in node.value:
                lines[str(key_node.value)] = (key_node.start_mark.line + 1, key_node.start_mark.column + 1)
        for key, value in data.items():
            if isinstance(value, dict):
                line, column = lines.get(str(key), (None, None))
                raise ConfigError("nested sections are not supported", str(key), line, column)

        config = cls.from_mapping({str(k): v for k, v in data.items()}, lines)
        logger.info("loaded configuration %s (%s, %d steps)", path, config.scheme, config.total_steps)
        return config

    # -- validation -----------------------------------------------------------

    def validate(self, lines: Optional[Dict[str, Tuple[int, int]]] = None) -> None:
        """Enforce every parameter range; raises ConfigError naming the key"""
        lines = lines or {}

        def fail(key: str, message: str) -> None:
            line, column = lines.get(key, (None, None))
            raise ConfigError(f"{key}: {message}", key, line, column)

        def number(key: str, integer: bool = False) -> None:
            value = getattr(self, key)
            kinds = (int,) if integer else (int, float)
            if isinstance(value, bool) or not isinstance(value, kinds):
                fail(key, f"expected {'an integer' if integer else 'a number'}, got {value!r}")

        if self.scheme not in CONFIG_SCHEMES:
            fail("scheme", f"expected one of {', '.join(CONFIG_SCHEMES)}, got {self.scheme!r}")
        if self.velocity_space is not None:
            allowed = COMPATIBLE_VELOCITY[self.scheme.split("-")[0]]
            if self.velocity_space not in allowed:
                fail(
                    "velocity_space",
                    f"{self.scheme} accepts velocity spaces {', '.join(allowed)}, got {self.velocity_space!r}",
                )

        for key in ("nx", "max_iter", "snapshots", "seed", "n_steps"):
            number(key, integer=True)
        if self.ny is not None:
            number("ny", integer=True)
        if self.mesh_file is None:
            if self.nx < 1:
                fail("nx", f"mesh needs nx >= 1, got {self.nx}")
            if self.ny is not None and self.ny < 1:
                fail("ny", f"mesh needs ny >= 1, got {self.ny}")
        if (
            not isinstance(self.domain, list)
            or len(self.domain) != 4
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in self.domain)
        ):
            fail("domain", "expected [x0, x1, y0, y1]")
        x0, x1, y0, y1 = (float(v) for v in self.domain)
        if not (x1 > x0 and y1 > y0):
            fail("domain", f"empty rectangle {self.domain}")

        for key in ("re", "wi", "eps", "alpha", "delta", "t_final", "dt_ratio", "forcing_amplitude",
                    "lambda_min", "lambda_max", "tol", "audit_tol"):
            number(key)
        if self.cutoff is not None:
            number("cutoff")

        if not self.re > 0.0:
            fail("re", f"Re must be positive, got {self.re}")
        if not self.wi > 0.0:
            fail("wi", f"Wi must be positive, got {self.wi}")
        if not 0.0 < self.eps < 1.0:
            fail("eps", f"viscosity fraction eps must lie in (0, 1), got {self.eps}")
        if not self.alpha >= 0.0:
            fail("alpha", f"diffusion alpha must be >= 0, got {self.alpha}")
        if not (0.0 < self.delta <= 0.5):
            fail("delta", f"delta must lie in (0, 1/2], got {self.delta}")
        if self.cutoff is not None and not self.cutoff >= 2.0:
            fail("cutoff", f"cutoff L must satisfy L >= 2, got {self.cutoff}")

        if self.dt_list is not None:
            if not isinstance(self.dt_list, list) or not self.dt_list:
                fail("dt_list", "expected a non-empty list of step sizes")
            if any(isinstance(dt, bool) or not isinstance(dt, (int, float)) or dt <= 0 for dt in self.dt_list):
                fail("dt_list", "every step size must be a positive number")
            ratios = [b / a for a, b in zip(self.dt_list, self.dt_list[1:])]
            if any(r > self.dt_ratio for r in ratios):
                fail("dt_list", f"consecutive steps grow by more than dt_ratio = {self.dt_ratio}")
        else:
            if self.n_steps < 1:
                fail("n_steps", f"need at least one step, got {self.n_steps}")
            if not self.t_final > 0.0:
                fail("t_final", f"final time must be positive, got {self.t_final}")
        if not self.dt_ratio >= 1.0:
            fail("dt_ratio", f"dt_ratio must be >= 1, got {self.dt_ratio}")

        if self.forcing not in FORCINGS:
            fail("forcing", f"expected one of {', '.join(FORCINGS)}, got {self.forcing!r}")
        if self.initial not in INITIAL_CONDITIONS:
            fail("initial", f"expected one of {', '.join(INITIAL_CONDITIONS)}, got {self.initial!r}")
        if not 0.0 < self.lambda_min <= self.lambda_max:
            fail("lambda_min", f"need 0 < lambda_min <= lambda_max, got ({self.lambda_min}, {self.lambda_max})")

        if not self.tol > 0.0:
            fail("tol", f"solver tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            fail("max_iter", f"max_iter must be >= 1, got {self.max_iter}")
        if not self.audit_tol >= 0.0:
            fail("audit_tol", f"audit_tol must be >= 0, got {self.audit_tol}")
        if self.snapshots < 0:
            fail("snapshots", f"snapshot interval must be >= 0, got {self.snapshots}")

        if self.continuation is not None:
            if not isinstance(self.continuation, list) or not self.continuation:
                fail("continuation", "expected a non-empty list of delta values")
            if any(not isinstance(d, (int, float)) or not (0.0 < d <= 0.5) for d in self.continuation):
                fail("continuation", f"every delta must lie in (0, 1/2], got {self.continuation}")
            if any(b >= a for a, b in zip(self.continuation, self.continuation[1:])):
                fail("continuation", "delta schedule must be strictly decreasing")

    # -- derived objects ------------------------------------------------------

    @property
    def total_steps(self) -> int:
        return len(self.dt_list) if self.dt_list is not None else self.n_steps

    def fluid_params(self) -> FluidParams:
        return FluidParams(
            reynolds=float(self.re),
            weissenberg=float(self.wi),
            viscosity_fraction=float(self.eps),
            diffusion=float(self.alpha),
        )

    def reg_params(self) -> RegParams:
        cutoff = None if self.cutoff is None else float(self.cutoff)
        return RegParams(delta=float(self.delta), cutoff=cutoff)

    def solver_opts(self) -> SolverOpts:
        return SolverOpts(
            tol=float(self.tol),
            max_iter=int(self.max_iter),
            audit_tol=float(self.audit_tol),
            parallel_assembly=bool(self.parallel_assembly),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Every file key, as hashed into the certificate"""
        data = asdict(self)
        return {key: data[key] for key in self.keys()}

    def merge_cli_args(self, args) -> None:
        """
        Merge CLI arguments into config (CLI takes precedence)

        Args:
            args: Parsed argparse arguments
        """
        if getattr(args, "out", None) is not None:
            self.output_dir = args.out

        if getattr(args, "parallel_assembly", False):
            self.parallel_assembly = True

        if getattr(args, "snapshots", None) is not None:
            if args.snapshots < 0:
                raise ConfigError(f"snapshots: interval must be >= 0, got {args.snapshots}", "snapshots")
            self.snapshots = args.snapshots

        if getattr(args, "verbose", False):
            self.verbose = True

        if getattr(args, "quiet", False):
            self.quiet = True

