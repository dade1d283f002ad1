"""Run configuration schema loaded from YAML."""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, Extra, Field, ValidationError, validator

from app.core.spectral import DEFAULT_PERIOD, Domain
from app.errors import ConfigError
from app.services.decay_verifier import Profile, ProfileFamily, QuadratureSpec
from app.services.simulation import Scheme, StepperConfig


class _Block(BaseModel):
    class Config:
        extra = Extra.forbid
        use_enum_values = True
        validate_all = True
        validate_assignment = True


class DomainBlock(_Block):
    """Torus period and resolution."""
    L: float = Field(default=DEFAULT_PERIOD, gt=0, description="Horizontal period")
    Nx: int = Field(default=32, ge=8, description="Grid points in x (even)")
    Ny: int = Field(default=32, ge=8, description="Grid points in y (even)")
    Kmax: int = Field(default=11, ge=1, description="Highest vertical wavenumber")
    Nz: Optional[int] = Field(default=None, description="Vertical collocation points")

    @validator("Nx", "Ny")
    def _even(cls, v):
        if v % 2:
            raise ValueError("must be even")
        return v

    @validator("Nz")
    def _alias_free(cls, v, values):
        kmax = values.get("Kmax")
        if v is not None and kmax is not None and 2 * v <= 3 * kmax:
            raise ValueError(f"must exceed 3*Kmax/2 (>= {(3 * kmax) // 2 + 1})")
        return v

    def to_domain(self) -> Domain:
        return Domain.create(self.Nx, self.Ny, self.Kmax, self.Nz, self.L)


class StepperBlock(_Block):
    dt: float = Field(default=1.0e-2, gt=0)
    t_end: float = Field(default=10.0, ge=0)
    scheme: Scheme = Scheme.IFRK4
    dealias: bool = True
    projection_stride: Optional[int] = Field(default=None, ge=1)
    monitor_stride: int = Field(default=10, ge=1)
    m_prime: int = Field(default=3, ge=0)
    nonlinear: bool = True
    cfl_limit: float = Field(default=0.5, gt=0)


class InitialBlock(_Block):
    seed: int = 0
    amplitude: float = Field(default=1.0e-3, ge=0)
    falloff: float = Field(default=1.0, ge=0)


class DecayBlock(_Block):
    """Quadrature, profile, time grid and kernel rows of the decay table."""
    R: float = Field(default=8.0, gt=0)
    n_r: int = Field(default=96, ge=1)
    n_phi: int = Field(default=1, ge=1)
    Kq: Optional[int] = Field(default=None, ge=1)
    q_min: float = Field(default=0.0, ge=0)
    profile: ProfileFamily = ProfileFamily.GAUSSIAN
    decay_power: float = Field(default=8.0, gt=1)
    vertical_weights: List[float] = Field(default_factory=lambda: [1.0])
    t_min: float = Field(default=1.0e3, gt=0)
    t_max: float = Field(default=1.0e5, gt=0)
    n_times: int = Field(default=9, ge=1)
    fit_t_min: float = Field(default=1.0e3, gt=0)
    fit_t_max: float = Field(default=1.0e5, gt=0)
    kernels: Optional[List[str]] = None
    include_heat: bool = False
    tolerance: float = Field(default=0.1, gt=0)

    @validator("t_max")
    def _ordered_times(cls, v, values):
        if "t_min" in values and v < values["t_min"]:
            raise ValueError("must not be below t_min")
        return v

    @validator("fit_t_max")
    def _ordered_window(cls, v, values):
        if "fit_t_min" in values and v <= values["fit_t_min"]:
            raise ValueError("must exceed fit_t_min")
        return v

    @validator("vertical_weights")
    def _nonempty(cls, v):
        if not v:
            raise ValueError("needs at least one weight")
        return v

    def times(self) -> List[float]:
        if self.n_times == 1:
            return [self.t_min]
        ratio = (self.t_max / self.t_min) ** (1.0 / (self.n_times - 1))
        return [self.t_min * ratio ** i for i in range(self.n_times)]

    @property
    def window(self) -> Tuple[float, float]:
        return (self.fit_t_min, self.fit_t_max)

    def to_profile(self) -> Profile:
        return Profile(ProfileFamily(self.profile), tuple(self.vertical_weights), self.decay_power)

    def to_quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(R=self.R, n_r=self.n_r, n_phi=self.n_phi, Kq=self.Kq, q_min=self.q_min)


class OutputBlock(_Block):
    directory: str = "runs"
    series_file: str = "series.csv"
    summary_file: str = "summary.csv"
    checkpoint_file: str = "checkpoint.bsq"
    checkpoint_stride: Optional[int] = Field(default=None, ge=1)
    blowup_file: str = "blowup.bsq"

    def path(self, name: str) -> Path:
        return Path(self.directory) / getattr(self, name)


class RunConfig(_Block):
    """Complete run description; every block is optional in the file."""
    domain: DomainBlock = Field(default_factory=DomainBlock)
    stepper: StepperBlock = Field(default_factory=StepperBlock)
    initial: InitialBlock = Field(default_factory=InitialBlock)
    decay: DecayBlock = Field(default_factory=DecayBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)

    def stepper_config(self) -> StepperConfig:
        s = self.stepper
        return StepperConfig(
            dt=s.dt,
            t_end=s.t_end,
            scheme=Scheme(s.scheme),
            dealias=s.dealias,
            projection_stride=s.projection_stride,
            monitor_stride=s.monitor_stride,
            m_prime=s.m_prime,
            nonlinear=s.nonlinear,
            cfl_limit=s.cfl_limit,
            checkpoint_stride=self.output.checkpoint_stride,
        )

    def with_overrides(self, seed: Optional[int] = None, out: Optional[str] = None) -> "RunConfig":
        data = self.dict()
        if seed is not None:
            data["initial"]["seed"] = seed
        if out is not None:
            data["output"]["directory"] = str(out)
        return RunConfig.parse_obj(data)

    def dump(self) -> str:
        return yaml.safe_dump(self.dict(), sort_keys=False, default_flow_style=None)

    @classmethod
    def from_yaml(cls, text: str, source: str = "<config>") -> "RunConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"{source}: invalid YAML: {e}") from e
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{source}: top level must be a mapping of blocks")
        try:
            return cls.parse_obj(data)
        except ValidationError as e:
            lines = _node_lines(text)
            problems = []
            for err in e.errors():
                loc = tuple(str(p) for p in err["loc"])
                line = _lookup_line(lines, loc)
                where = ".".join(loc) + (f" (line {line})" if line else "")
                problems.append(f"{where}: {err['msg']}")
            raise ConfigError(
                f"{source}: " + "; ".join(problems),
                {"errors": problems},
            ) from e

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        return cls.from_yaml(text, str(path))


def _node_lines(text: str) -> Dict[Tuple[str, ...], int]:
    """1-based line of every mapping key, addressed by its key path."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    lines: Dict[Tuple[str, ...], int] = {}

    def walk(node: Any, prefix: Tuple[str, ...]):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                path = prefix + (str(key.value),)
                lines[path] = key.start_mark.line + 1
                walk(value, path)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                lines[prefix + (str(i),)] = item.start_mark.line + 1
                walk(item, prefix + (str(i),))

    if root is not None:
        walk(root, ())
    return lines


def _lookup_line(lines: Dict[Tuple[str, ...], int], loc: Tuple[str, ...]) -> Optional[int]:
    # missing fields report the line of their enclosing block
    while loc:
        if loc in lines:
            return lines[loc]
        loc = loc[:-1]
    return None

