"""Integrating-factor Runge-Kutta integration of the vorticity-temperature system.

    d_t omega - Lap omega = -u.grad omega + omega.grad u + (d2 theta, -d1 theta, 0)
    d_t theta             = -u.grad theta - u3

Diffusion of omega is integrated exactly through e^{-Xi dt}; theta carries no
dissipative factor. The vortex force is stepped in the rotational form
curl(u x omega); all products are pseudo-spectral with 2/3 dealiasing.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.elliptic import (
    VectorField,
    VectorRole,
    curl,
    invert_dirichlet,
    project_vorticity,
    velocity_from_vorticity,
)
from app.core.propagator import dispersion
from app.core.spectral import (
    Axis,
    Domain,
    Parity,
    SpectralScalar,
    analyze,
    deriv,
    hermitian_part,
    laplacian,
    product,
    synthesize,
    zeros,
)
from app.core.state import State, zero_state
from app.errors import BlowUpError, ConfigError, ParityError, StepSizeError, ToolkitError
from app.services.decay_verifier import RateFit, fit_rate
from app.services.monitors import (
    DECAY_TARGETS,
    MonitorRecorder,
    check_order,
    e1_proxy,
    initial_smallness,
)
from app.utils.logging import get_logger

logger = get_logger(__name__)

FIT_START = 5.0


class Scheme(str, Enum):
    IFRK2 = "IFRK2"
    IFRK4 = "IFRK4"


@dataclass
class StepperConfig:
    """Time stepping and sampling controls."""
    dt: float = 1.0e-2
    t_end: float = 10.0
    scheme: Scheme = Scheme.IFRK4
    dealias: bool = True
    projection_stride: Optional[int] = None
    monitor_stride: int = 10
    m_prime: int = 3
    nonlinear: bool = True
    cfl_limit: float = 0.5
    checkpoint_stride: Optional[int] = None

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ConfigError(f"t_end must be nonnegative, got {self.t_end}")
        if self.monitor_stride < 1:
            raise ConfigError("monitor_stride must be at least 1")
        for name in ("projection_stride", "checkpoint_stride"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be at least 1 when set")
        check_order(self.m_prime)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Tendency:
    """Explicit part of the right-hand side."""
    domega: VectorField
    dtheta: SpectralScalar


def advect(u: VectorField, f: SpectralScalar, dealiased: bool = True) -> SpectralScalar:
    """u . grad f; the result has the parity of f."""
    terms = [product(u[i], deriv(f, axis), dealiased) for i, axis in enumerate(Axis)]
    out = terms[0] + terms[1] + terms[2]
    if out.parity is not f.parity:
        raise ParityError(f"advection of a {f.parity.value} field produced {out.parity.value}")
    return out


def stretch(w: VectorField, f: SpectralScalar, dealiased: bool = True) -> SpectralScalar:
    """w . grad f."""
    terms = [product(w[i], deriv(f, axis), dealiased) for i, axis in enumerate(Axis)]
    return terms[0] + terms[1] + terms[2]


def buoyancy(theta: SpectralScalar) -> Tuple[SpectralScalar, SpectralScalar]:
    return deriv(theta, Axis.Y), -deriv(theta, Axis.X)


def nonlinear_terms(
    s: State, u: VectorField, dealiased: bool = True
) -> Tuple[VectorField, SpectralScalar, float]:
    """curl(u x omega), u . grad theta and max |u| from one batch of transforms.

    For divergence-free u and omega, curl(u x omega) = omega.grad u - u.grad omega.
    Products are formed on the collocation grid and analyzed once per output.
    """
    domain = s.domain
    mask = domain.mask if dealiased else 1.0
    w1, w2, w3 = s.omega
    theta = s.theta
    even = np.stack([u[0].coeff, u[1].coeff, w3.coeff, deriv(theta, Axis.Z).coeff]) * mask
    odd = np.stack([
        u[2].coeff, w1.coeff, w2.coeff,
        deriv(theta, Axis.X).coeff, deriv(theta, Axis.Y).coeff,
    ]) * mask
    pu1, pu2, pw3, pt3 = synthesize(even, Parity.EVEN, domain)
    pu3, pw1, pw2, pt1, pt2 = synthesize(odd, Parity.ODD, domain)

    lamb_even = analyze(np.stack([pu2 * pw3 - pu3 * pw2, pu3 * pw1 - pu1 * pw3]), Parity.EVEN, domain)
    lamb_odd = analyze(np.stack([pu1 * pw2 - pu2 * pw1, pu1 * pt1 + pu2 * pt2 + pu3 * pt3]), Parity.ODD, domain)
    lamb_even *= mask
    lamb_odd *= mask

    cross = VectorField(
        (
            SpectralScalar(domain, Parity.EVEN, lamb_even[0]),
            SpectralScalar(domain, Parity.EVEN, lamb_even[1]),
            SpectralScalar(domain, Parity.ODD, lamb_odd[0]),
        ),
        VectorRole.VELOCITY,
    )
    speed = float(max(np.max(np.abs(pu1)), np.max(np.abs(pu2)), np.max(np.abs(pu3))))
    return curl(cross), SpectralScalar(domain, Parity.ODD, lamb_odd[1]), speed


def _tendency(s: State, dealiased: bool, nonlinear: bool) -> Tuple[Tendency, float]:
    u = velocity_from_vorticity(s.omega, check_divergence=False)
    b1, b2 = buoyancy(s.theta)
    domega = VectorField((b1, b2, zeros(s.domain, Parity.EVEN)), VectorRole.VORTICITY)
    dtheta = -u[2]
    speed = 0.0
    if nonlinear:
        # the third curl component has no (0, 0, 0) mode, so the omega3 mean stays zero
        vortex, transport, speed = nonlinear_terms(s, u, dealiased)
        domega = domega + vortex
        dtheta = dtheta - transport
    return Tendency(domega, dtheta), speed


def rhs(s: State, dealiased: bool = True, nonlinear: bool = True) -> Tendency:
    """f1 + buoyancy for omega and -u.grad theta - u3 for theta."""
    return _tendency(s, dealiased, nonlinear)[0]


def time_derivative(s: State, dealiased: bool = True, nonlinear: bool = True) -> Tuple[SpectralScalar, VectorField]:
    """(d_t theta, d_t omega) of the full equations, diffusion included."""
    tend = rhs(s, dealiased, nonlinear)
    domega = VectorField(
        tuple(laplacian(w) + dw for w, dw in zip(s.omega, tend.domega)),
        VectorRole.VORTICITY,
    )
    return tend.dtheta, domega


def theta_rate(s: State, dealiased: bool = True) -> SpectralScalar:
    """Initial rate theta1 = -u0 . grad theta0 - u30."""
    return rhs(s, dealiased).dtheta


def compute_f2(s: State, dealiased: bool = True) -> SpectralScalar:
    """Forcing of the second-order temperature equation.

    theta'' - Lap theta' + (-Lap_h)(-Lap)^-1 theta = f2, with the time
    derivatives rebuilt from the equations of motion.
    """
    u = velocity_from_vorticity(s.omega, check_divergence=False)
    dtheta, domega = time_derivative(s, dealiased)
    du = velocity_from_vorticity(domega, check_divergence=False)
    w = s.omega

    u_grad_theta = advect(u, s.theta, dealiased)
    f2 = (
        -advect(du, s.theta, dealiased)
        - advect(u, dtheta, dealiased)
        + laplacian(u_grad_theta)
        + deriv(invert_dirichlet(advect(u, w[1], dealiased)), Axis.X)
        - deriv(invert_dirichlet(advect(u, w[0], dealiased)), Axis.Y)
        - deriv(invert_dirichlet(stretch(w, u[1], dealiased)), Axis.X)
        + deriv(invert_dirichlet(stretch(w, u[0], dealiased)), Axis.Y)
    )
    if f2.parity is not Parity.ODD:
        raise ParityError("f2 must be an Odd field")
    return f2


class _Stepper:
    """Integrating-factor Runge-Kutta on the packed (omega1, omega2, omega3, theta) arrays."""

    def __init__(self, domain: Domain, cfg: StepperConfig):
        self.domain = domain
        self.cfg = cfg
        dt = cfg.dt
        decay = np.exp(-domain.Xi * dt)
        half = np.exp(-domain.Xi * 0.5 * dt)
        one = np.ones(domain.shape)
        self.E = np.stack([decay, decay, decay, one])
        self.E_half = np.stack([half, half, half, one])
        self.speed_limit = advective_speed_limit(domain)

    def _pack(self, s: State) -> np.ndarray:
        return np.stack([c.coeff for c in s.components])

    def _unpack(self, y: np.ndarray, time: float) -> State:
        return State.from_components(self.domain, y, time)

    def _N(self, y: np.ndarray, time: float) -> Tuple[np.ndarray, float]:
        tend, speed = _tendency(self._unpack(y, time), self.cfg.dealias, self.cfg.nonlinear)
        return np.stack([c.coeff for c in tend.domega] + [tend.dtheta.coeff]), speed

    def _check_cfl(self, speed: float, time: float):
        cfl = self.cfg.dt * speed * self.speed_limit
        if cfl > self.cfg.cfl_limit:
            raise StepSizeError(
                f"CFL number {cfl:.3f} exceeds {self.cfg.cfl_limit}",
                {"cfl": cfl, "dt": self.cfg.dt, "time": time},
            )

    def advance(self, s: State, new_time: float) -> State:
        h = self.cfg.dt
        E, Eh = self.E, self.E_half
        y = self._pack(s)
        t0 = s.time
        # the first stage already holds the velocity on the grid
        k1, speed = self._N(y, t0)
        if self.cfg.nonlinear:
            self._check_cfl(speed, t0)
        if self.cfg.scheme is Scheme.IFRK2:
            k2, _ = self._N(E * (y + h * k1), t0 + h)
            y_new = E * (y + 0.5 * h * k1) + 0.5 * h * k2
        else:
            k2, _ = self._N(Eh * (y + 0.5 * h * k1), t0 + 0.5 * h)
            k3, _ = self._N(Eh * y + 0.5 * h * k2, t0 + 0.5 * h)
            k4, _ = self._N(E * y + h * Eh * k3, t0 + h)
            y_new = E * y + (h / 6.0) * (E * k1 + 2.0 * Eh * (k2 + k3) + k4)
        # sine components have no k = 0 mode
        y_new[[0, 1, 3], :, :, 0] = 0.0
        return self._unpack(y_new, new_time)


def advective_speed_limit(domain: Domain) -> float:
    """Largest resolved wavenumber entering the advective CFL number."""
    return max(2.0 * np.pi * max(domain.Nx, domain.Ny) / (3.0 * domain.L), np.pi * domain.Kmax)


def step(s: State, cfg: StepperConfig, step_index: Optional[int] = None, stepper: Optional[_Stepper] = None) -> State:
    """Advance one step of size cfg.dt.

    The new time is (step_index + 1) * dt when ``step_index`` is given, so
    repeated stepping does not accumulate rounding in t. Nonlinear steps
    refuse to start when dt * max|u| * k_max exceeds cfg.cfl_limit.
    """
    stepper = stepper or _Stepper(s.domain, cfg)
    new_time = s.time + cfg.dt if step_index is None else (step_index + 1) * cfg.dt
    out = stepper.advance(s, new_time)
    if not out.is_finite():
        raise BlowUpError(
            f"non-finite coefficients at t={new_time:.6g}",
            last_state=s,
            details={"time": s.time, "dt": cfg.dt},
        )
    if cfg.projection_stride and step_index is not None and (step_index + 1) % cfg.projection_stride == 0:
        out = State(project_vorticity(out.omega), out.theta, out.time)
    return out


def _random_field(rng: np.random.Generator, domain: Domain, parity: Parity, falloff: float) -> SpectralScalar:
    """Band-limited random coefficients with magnitudes ~ exp(-falloff |kappa|)."""
    shape = domain.shape
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    envelope = np.exp(-falloff * np.sqrt(domain.Xi)) * domain.mask
    coeff = raw * envelope
    if parity is Parity.ODD:
        coeff[..., 0] = 0.0
    return hermitian_part(SpectralScalar(domain, parity, coeff))


def gen_initial(
    domain: Domain,
    seed: int,
    amplitude: float,
    spectrum_falloff: float = 1.0,
    m_prime: int = 3,
) -> State:
    """Seeded divergence-free initial data scaled so that E1 equals ``amplitude``.

    omega0 is the curl of a random velocity-parity potential, which makes it
    divergence free with a vanishing omega3 mean mode.
    """
    if amplitude < 0:
        raise ConfigError(f"amplitude must be nonnegative, got {amplitude}")
    if amplitude == 0:
        return zero_state(domain)
    rng = np.random.default_rng(seed)
    potential = VectorField(
        (
            _random_field(rng, domain, Parity.EVEN, spectrum_falloff),
            _random_field(rng, domain, Parity.EVEN, spectrum_falloff),
            _random_field(rng, domain, Parity.ODD, spectrum_falloff),
        ),
        VectorRole.VELOCITY,
    )
    omega = curl(potential)
    theta = _random_field(rng, domain, Parity.ODD, spectrum_falloff)
    raw = State(omega, theta, 0.0)
    size = e1_proxy(raw, m_prime)
    if size == 0:
        return zero_state(domain)
    scale = amplitude / size
    return State(omega * scale, theta * scale, 0.0)


@dataclass
class RunResult:
    """Monitor series, final state and failure information of a run."""
    rows: List[Dict[str, float]]
    final_state: State
    steps_taken: int
    failure: Optional[Dict[str, Any]] = None
    fits: Dict[str, Optional[RateFit]] = field(default_factory=dict)
    fit_window: Optional[Tuple[float, float]] = None

    @property
    def completed(self) -> bool:
        return self.failure is None


def decay_window(domain: Domain, t_end: float) -> Tuple[float, float]:
    """[5, min(t_end, t*/2)] with t* the slowest torus decay time."""
    t_star = 1.0 / abs(dispersion(domain.q_min, 1).lambda_plus)
    return FIT_START, min(t_end, 0.5 * t_star)


def fit_observables(rows: Sequence[Dict[str, float]], window: Tuple[float, float]) -> Dict[str, Optional[RateFit]]:
    """Exponent per decay observable; None when the window holds too few samples."""
    times = [r["time"] for r in rows]
    fits: Dict[str, Optional[RateFit]] = {}
    for name in DECAY_TARGETS:
        values = [r[name] for r in rows]
        try:
            fits[name] = fit_rate(times, values, window)
        except ToolkitError as e:
            logger.warning(f"No exponent for {name}: {e.message}")
            fits[name] = None
    return fits


StepCallback = Callable[[State, int, MonitorRecorder], None]


def run(
    cfg: StepperConfig,
    s0: State,
    start_step: int = 0,
    recorder: Optional[MonitorRecorder] = None,
    on_checkpoint: Optional[StepCallback] = None,
    on_failure: Optional[StepCallback] = None,
) -> RunResult:
    """Step from ``start_step`` to t_end, sampling monitors every monitor_stride steps.

    A fresh run samples the initial state; a resumed run passes the restored
    recorder and the step index of the checkpoint.
    """
    domain = s0.domain
    n_steps = cfg.n_steps
    stepper = _Stepper(domain, cfg)
    state = s0
    if recorder is None:
        recorder = MonitorRecorder(m_prime=cfg.m_prime)
        recorder.sample(state, start_step)
        logger.info(
            "Initial data",
            smallness=initial_smallness(state, cfg.m_prime),
            divergence=state.relative_divergence(),
        )
    logger.info(
        f"Starting run at step {start_step} of {n_steps}",
        scheme=cfg.scheme.value,
        dt=cfg.dt,
        nonlinear=cfg.nonlinear,
    )

    failure = None
    index = start_step
    try:
        while index < n_steps:
            state = step(state, cfg, index, stepper)
            index += 1
            if index % cfg.monitor_stride == 0 or index == n_steps:
                recorder.sample(state, index)
            if on_checkpoint and cfg.checkpoint_stride and index % cfg.checkpoint_stride == 0 and index < n_steps:
                on_checkpoint(state, index, recorder)
    except (StepSizeError, BlowUpError) as e:
        logger.error(f"Run stopped at t={state.time:.6g}: {e.message}")
        failure = {"error": e.error_type, "message": e.message, "time": state.time, "step": index}
        failure.update(e.details)
        if on_failure is not None:
            on_failure(state, index, recorder)

    rows = recorder.finish(lambda s: time_derivative(s, cfg.dealias, cfg.nonlinear))
    window = decay_window(domain, cfg.t_end)
    fits = fit_observables(rows, window) if len(rows) > 1 else {name: None for name in DECAY_TARGETS}
    logger.info(f"Run finished with {len(rows)} samples", steps=index, failed=failure is not None)
    return RunResult(rows, state, index, failure, fits, window)
