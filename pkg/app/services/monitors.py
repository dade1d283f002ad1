"""Energy functionals and decay observables sampled along a run."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from app.config import settings
from app.core.elliptic import VectorField, velocity_from_vorticity
from app.core.propagator import bracket
from app.core.spectral import (
    Axis,
    SpectralScalar,
    deriv,
    lambda_pow,
    sobolev_norm,
    to_physical,
    weighted_norm,
)
from app.core.state import State
from app.errors import ConfigError
from app.utils.logging import get_logger

logger = get_logger(__name__)

# observable -> exponent alpha in ||.|| <~ <t>^alpha
DECAY_TARGETS: Dict[str, float] = {
    "theta_H5": -0.5,
    "omega_h_H3": -1.0,
    "gradh_theta_H3": -1.0,
    "gradh_omega_h_H1": -1.5,
    "gradh2_theta_H1": -1.5,
    "omega3_H3": -1.25,
    "omega3_Linf": -2.0,
    "theta_Linf": -1.0,
    "d3theta_Linf": -1.0,
    "gradh_theta_Linf": -1.5,
    "omega_h_Linf": -1.5,
    "u_h_H4": -0.75,
    "u3_H3": -1.5,
}

ENERGY_COLUMNS = ("E1", "E1_sup", "E2", "E2_sup", "E3", "E3_sup", "E4", "E4_sup")
DIAGNOSTIC_COLUMNS = ("energy", "dissipation", "divergence", "omega3_mean")
COLUMNS: Tuple[str, ...] = ("step", "time") + ENERGY_COLUMNS + DIAGNOSTIC_COLUMNS + tuple(DECAY_TARGETS)


def check_order(m_prime: int) -> int:
    if not 0 <= m_prime <= settings.monitor_order_cap:
        raise ConfigError(
            f"monitor order m_prime={m_prime} outside [0, {settings.monitor_order_cap}]",
            {"m_prime": m_prime},
        )
    return m_prime


def _pair_norm(a: SpectralScalar, b: SpectralScalar, m: float, horizontal_power: int = 0) -> float:
    return float(np.hypot(weighted_norm(a, m, horizontal_power), weighted_norm(b, m, horizontal_power)))


def _linf(*fields: SpectralScalar) -> float:
    """sup over the grid of the Euclidean norm of the given components."""
    total = None
    for f in fields:
        sq = to_physical(f).values ** 2
        total = sq if total is None else total + sq
    return float(np.sqrt(np.max(total)))


def velocity(state: State) -> VectorField:
    return velocity_from_vorticity(state.omega, check_divergence=False)


def inverse_lambda_omega3(state: State) -> float:
    return sobolev_norm(lambda_pow(state.omega[2], -1.0), 0)


def e1_proxy(state: State, m_prime: int = 3) -> float:
    """||theta||_{H^{m'+1}} + ||omega||_{H^{m'}} + ||Lambda^-1 omega3||_{L^2}."""
    return (
        sobolev_norm(state.theta, m_prime + 1)
        + state.omega.norm(m_prime)
        + inverse_lambda_omega3(state)
    )


def initial_smallness(state: State, m_prime: int = 3) -> float:
    """||theta||_{H^{m'+1}} + ||omega||_{H^{m'}}; the E1 proxy without the Lambda^-1 omega3 part."""
    return sobolev_norm(state.theta, m_prime + 1) + state.omega.norm(m_prime)


def w1inf(u: VectorField) -> float:
    grads = [deriv(c, axis) for c in u for axis in Axis]
    return _linf(*u) + _linf(*grads)


def e2_proxy(state: State, u: Optional[VectorField] = None) -> float:
    """Weighted L-infinity functional at one instant."""
    u = velocity(state) if u is None else u
    t = bracket(state.time)
    theta, (w1, w2, w3) = state.theta, state.omega
    horizontal = (
        _linf(deriv(theta, Axis.X), deriv(theta, Axis.Y))
        + w1inf(u)
        + _linf(w1, w2)
    )
    return (
        t ** 1.5 * horizontal
        + t ** 2 * _linf(w3)
        + t * (_linf(theta) + _linf(deriv(theta, Axis.Z)))
    )


def decay_observables(state: State, u: Optional[VectorField] = None) -> Dict[str, float]:
    """The decay list with original-variable velocity norms appended."""
    u = velocity(state) if u is None else u
    theta, (w1, w2, w3) = state.theta, state.omega
    return {
        "theta_H5": sobolev_norm(theta, 5),
        "omega_h_H3": _pair_norm(w1, w2, 3),
        "gradh_theta_H3": weighted_norm(theta, 3, 1),
        "gradh_omega_h_H1": _pair_norm(w1, w2, 1, 1),
        "gradh2_theta_H1": weighted_norm(theta, 1, 2),
        "omega3_H3": sobolev_norm(w3, 3),
        "omega3_Linf": _linf(w3),
        "theta_Linf": _linf(theta),
        "d3theta_Linf": _linf(deriv(theta, Axis.Z)),
        "gradh_theta_Linf": _linf(deriv(theta, Axis.X), deriv(theta, Axis.Y)),
        "omega_h_Linf": _linf(w1, w2),
        "u_h_H4": _pair_norm(u[0], u[1], 4),
        "u3_H3": sobolev_norm(u[2], 3),
    }


def e3_proxy(state: State, observables: Dict[str, float]) -> float:
    t = bracket(state.time)
    o = observables
    return (
        t ** 0.5 * o["theta_H5"]
        + t * (o["gradh_theta_H3"] + o["omega_h_H3"])
        + t ** 0.75 * o["u_h_H4"]
        + t ** 1.5 * (o["gradh2_theta_H1"] + o["gradh_omega_h_H1"] + o["u3_H3"])
        + t ** 1.25 * o["omega3_H3"]
    )


def e4_proxy(time: float, dtheta: SpectralScalar, domega: VectorField) -> float:
    """<t>^{3/2} (||d_t theta||_{H^1} + ||d_t omega||_{L^2} + ||d_t u||_{H^1})."""
    du = velocity_from_vorticity(domega, check_divergence=False)
    return bracket(time) ** 1.5 * (sobolev_norm(dtheta, 1) + domega.norm(0) + du.norm(1))


def linear_energy(state: State) -> float:
    """||omega||^2 + ||grad theta||^2."""
    grad_theta_sq = sobolev_norm(state.theta, 1) ** 2 - sobolev_norm(state.theta, 0) ** 2
    return state.omega.norm(0) ** 2 + max(grad_theta_sq, 0.0)


def dissipation(state: State) -> float:
    """2 ||grad omega||^2, the linear energy loss rate."""
    return 2.0 * max(state.omega.norm(1) ** 2 - state.omega.norm(0) ** 2, 0.0)


def _difference(a: State, b: State) -> Tuple[SpectralScalar, VectorField]:
    span = b.time - a.time
    dtheta = (b.theta - a.theta) * (1.0 / span)
    domega = (b.omega - a.omega) * (1.0 / span)
    return dtheta, domega


@dataclass
class MonitorRecorder:
    """Turns sampled states into finalized monitor rows.

    A row is finalized once the next sample is known, because its time
    derivatives are centered differences. Rows carry running suprema.
    """
    m_prime: int = 3
    rows: List[Dict[str, float]] = field(default_factory=list)
    sups: Dict[str, float] = field(default_factory=dict)
    prev: Optional[State] = None
    pending: Optional[State] = None
    pending_row: Optional[Dict[str, float]] = None

    def __post_init__(self):
        check_order(self.m_prime)

    def sample(self, state: State, step: int) -> None:
        """Record an instant; finalizes the previous pending row."""
        row = self._instant_row(state, step)
        if self.pending is not None:
            left = self.prev if self.prev is not None else self.pending
            self._finalize(self.pending, self.pending_row, left, state)
        self.prev, self.pending, self.pending_row = self.pending, state, row

    def finish(self, tendency=None) -> List[Dict[str, float]]:
        """Finalize the last pending row.

        ``tendency`` maps a state to (dtheta, domega) and is used when the run
        produced a single sample.
        """
        if self.pending is not None:
            if self.prev is not None:
                self._finalize(self.pending, self.pending_row, self.prev, self.pending)
            elif tendency is not None:
                dtheta, domega = tendency(self.pending)
                self._close(self.pending_row, e4_proxy(self.pending.time, dtheta, domega))
            else:
                self._close(self.pending_row, float("nan"))
            self.prev, self.pending, self.pending_row = None, None, None
        return self.rows

    def _instant_row(self, state: State, step: int) -> Dict[str, float]:
        u = velocity(state)
        observables = decay_observables(state, u)
        row: Dict[str, float] = {
            "step": int(step),
            "time": float(state.time),
            "E1": e1_proxy(state, self.m_prime),
            "E2": e2_proxy(state, u),
            "E3": e3_proxy(state, observables),
            "energy": linear_energy(state),
            "dissipation": dissipation(state),
            "divergence": state.relative_divergence(),
            "omega3_mean": abs(state.mean_mode()),
        }
        row.update(observables)
        return row

    def _finalize(self, state: State, row: Dict[str, float], left: State, right: State) -> None:
        if right.time == left.time:
            self._close(row, float("nan"))
            return
        dtheta, domega = _difference(left, right)
        self._close(row, e4_proxy(state.time, dtheta, domega))

    def _close(self, row: Dict[str, float], e4: float) -> None:
        row["E4"] = e4
        for name in ("E1", "E2", "E3", "E4"):
            value = row[name]
            if np.isfinite(value):
                self.sups[name] = max(self.sups.get(name, value), value)
            row[f"{name}_sup"] = self.sups.get(name, float("nan"))
        self.rows.append({c: row[c] for c in COLUMNS})
        logger.debug(f"Monitor row at t={row['time']:.4f}", E1=row["E1"])

    def snapshot(self) -> Dict[str, Any]:
        """JSON-friendly bookkeeping; states are persisted separately."""
        return {
            "m_prime": self.m_prime,
            "rows": [dict(r) for r in self.rows],
            "sups": dict(self.sups),
            "pending_row": None if self.pending_row is None else dict(self.pending_row),
        }

    @classmethod
    def restore(cls, data: Dict[str, Any], prev: Optional[State], pending: Optional[State]) -> "MonitorRecorder":
        recorder = cls(m_prime=int(data["m_prime"]))
        recorder.rows = [dict(r) for r in data["rows"]]
        recorder.sups = {k: float(v) for k, v in data["sups"].items()}
        recorder.prev = prev
        recorder.pending = pending
        recorder.pending_row = None if data.get("pending_row") is None else dict(data["pending_row"])
        return recorder
