"""
Band-pass frequency weighting of variable-step acceleration sequences.

The filter H(s) = g s / ((tau1 s + 1)(tau2 s + 1)) is realised as
x' = A x + B u, a_fil = C x and propagated exactly under zero-order hold.
A has the real distinct eigenvalues -1/tau1 and -1/tau2, so every step
is evaluated in the eigenbasis.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from scipy.linalg import solve_banded

from .config import settings
from .errors import FilterSpecError
from .models import FilterSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FilterState:
    """Internal filter state and the last output"""
    x: np.ndarray = field(default_factory=lambda: np.zeros(2))
    a_fil: float = 0.0


@dataclass(frozen=True)
class DiagonalizedTransition:
    """State-space matrices with the eigendecomposition A = P diag(lam) P^-1"""
    spec: FilterSpec
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    eigenvalues: np.ndarray
    P: np.ndarray
    P_inv: np.ndarray

    @property
    def output_modes(self) -> np.ndarray:
        """C P: output contribution of each eigen-coordinate"""
        return self.C @ self.P

    @property
    def input_modes(self) -> np.ndarray:
        """P^-1 B: input coupling of each eigen-coordinate"""
        return self.P_inv @ self.B

    def discretize(self, dt: float) -> Tuple[np.ndarray, np.ndarray]:
        """ZOH pair (A_d, B_d) for one step"""
        decay = np.exp(self.eigenvalues * dt)
        A_d = self.P @ np.diag(decay) @ self.P_inv
        B_d = self.P @ np.diag((decay - 1.0) / self.eigenvalues) @ self.P_inv @ self.B
        return A_d, B_d

    def to_modes(self, x: np.ndarray) -> np.ndarray:
        return self.P_inv @ np.asarray(x, dtype=float)

    def from_modes(self, z: np.ndarray) -> np.ndarray:
        return self.P @ z

    def tail_matrix(self, steps: int = None, step_time: float = None) -> np.ndarray:
        """Q with tail energy = z^T Q z for mode coordinates z"""
        steps = steps or settings.TAIL_STEPS
        step_time = step_time or settings.TAIL_STEP_TIME
        rho = np.exp(self.eigenvalues * step_time)
        ratio = np.outer(rho, rho)
        series = ratio * (1.0 - ratio ** steps) / (1.0 - ratio)
        c = self.output_modes
        return step_time * np.outer(c, c) * series


def make_filter(spec: FilterSpec) -> Tuple[FilterState, DiagonalizedTransition]:
    """Zero initial state and precomputed transition of a weighting filter"""
    tau1, tau2 = spec.tau1, spec.tau2
    if tau1 <= tau2:
        raise FilterSpecError(f"cutoffs out of order: tau1={tau1} must exceed tau2={tau2}")

    A = np.array([[-(1.0 / tau1 + 1.0 / tau2), 1.0], [-1.0 / (tau1 * tau2), 0.0]])
    B = np.array([spec.gain / (tau1 * tau2), 0.0])
    C = np.array([1.0, 0.0])
    eigenvalues = np.array([-1.0 / tau1, -1.0 / tau2])
    P = np.array([[1.0, 1.0], [1.0 / tau2, 1.0 / tau1]])
    transition = DiagonalizedTransition(
        spec=spec, A=A, B=B, C=C, eigenvalues=eigenvalues, P=P, P_inv=np.linalg.inv(P)
    )
    return FilterState(), transition


def step(state: FilterState, trans: DiagonalizedTransition, a_act: float, dt: float) -> Tuple[FilterState, float]:
    """Advance one ZOH step with constant input a_act"""
    if dt <= 0.0:
        raise FilterSpecError(f"nonpositive step {dt}")
    A_d, B_d = trans.discretize(dt)
    x = A_d @ state.x + B_d * a_act
    a_fil = float(trans.C @ x)
    return FilterState(x=x, a_fil=a_fil), a_fil


def tail_energy(state: FilterState, trans: DiagonalizedTransition,
                steps: int = None, step_time: float = None) -> float:
    """Output energy of the zero-input response sampled over the tail window"""
    z = trans.to_modes(state.x)
    return float(z @ trans.tail_matrix(steps, step_time) @ z)


def frequency_response(trans: DiagonalizedTransition, omega: Union[float, np.ndarray]) -> np.ndarray:
    """C (j w I - A)^-1 B"""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    response = np.empty(len(omega), dtype=complex)
    for index, w in enumerate(omega):
        response[index] = trans.C @ np.linalg.solve(1j * w * np.eye(2) - trans.A, trans.B)
    return response


def _mode_recursion(trans: DiagonalizedTransition, u: np.ndarray, dt: np.ndarray):
    lam = trans.eigenvalues[:, None]
    alpha = np.exp(lam * dt[None, :])
    beta = trans.input_modes[:, None] * (alpha - 1.0) / lam
    return alpha, beta


def _forward_modes(alpha: np.ndarray, beta: np.ndarray, u: np.ndarray, z0: np.ndarray) -> np.ndarray:
    """Solve z_k = alpha_k z_k-1 + beta_k u_k for both modes at once"""
    modes, count = alpha.shape
    ab = np.zeros((2, modes * count))
    ab[0] = 1.0
    sub = -alpha.copy()
    sub[:, 0] = 0.0
    ab[1, :-1] = sub.ravel()[1:]
    rhs = beta * u[None, :]
    rhs[:, 0] += alpha[:, 0] * z0
    return solve_banded((1, 0), ab, rhs.ravel()).reshape(modes, count)


def _adjoint_modes(alpha: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve mu_k = r_k + alpha_k+1 mu_k+1 for both modes at once"""
    modes, count = alpha.shape
    ab = np.zeros((2, modes * count))
    sup = -alpha.copy()
    sup[:, 0] = 0.0
    ab[0] = sup.ravel()
    ab[1] = 1.0
    return solve_banded((0, 1), ab, rhs.ravel()).reshape(modes, count)


def filter_sequence(trans: DiagonalizedTransition, u: np.ndarray, dt: np.ndarray,
                    x0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Filtered outputs after each step and the final state"""
    u = np.asarray(u, dtype=float)
    dt = np.asarray(dt, dtype=float)
    if np.any(dt <= 0.0):
        raise FilterSpecError("nonpositive step in sequence")
    x0 = np.zeros(2) if x0 is None else np.asarray(x0, dtype=float)
    if len(u) == 0:
        return np.zeros(0), x0.copy()
    alpha, beta = _mode_recursion(trans, u, dt)
    z = _forward_modes(alpha, beta, u, trans.to_modes(x0))
    outputs = trans.output_modes @ z
    return outputs, trans.from_modes(z[:, -1])


@dataclass
class AxisEnergy:
    """Energy of one axis"""
    motion: float
    tail: float
    outputs: np.ndarray
    final_state: Optional[np.ndarray]

    @property
    def total(self) -> float:
        return self.motion + self.tail


class BandPassWeighting:
    """Band-pass weighted energy with exact adjoint gradients"""

    def __init__(self, spec: FilterSpec):
        self.spec = spec
        self.initial_state, self.transition = make_filter(spec)
        self._tail = self.transition.tail_matrix()

    def zero_state(self) -> np.ndarray:
        return np.zeros(2)

    def evaluate(self, u: np.ndarray, dt: np.ndarray, x0: Optional[np.ndarray] = None) -> AxisEnergy:
        outputs, final_state = filter_sequence(self.transition, u, dt, x0)
        z = self.transition.to_modes(final_state)
        return AxisEnergy(
            motion=float(np.sum(outputs ** 2 * dt)),
            tail=float(z @ self._tail @ z),
            outputs=outputs,
            final_state=final_state,
        )

    def advance(self, u: np.ndarray, dt: np.ndarray, x0: Optional[np.ndarray] = None) -> np.ndarray:
        """State after feeding the sequence (used for carry-in between solves)"""
        return filter_sequence(self.transition, u, dt, x0)[1]

    def energy_and_gradient(self, u: np.ndarray, dt: np.ndarray,
                            x0: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray, np.ndarray]:
        """Motion + tail energy and its gradient w.r.t. inputs and step times"""
        trans = self.transition
        z0 = trans.to_modes(np.zeros(2) if x0 is None else x0)
        alpha, beta = _mode_recursion(trans, u, dt)
        z = _forward_modes(alpha, beta, u, z0)
        c = trans.output_modes
        outputs = c @ z
        z_end = z[:, -1]
        energy = float(np.sum(outputs ** 2 * dt) + z_end @ self._tail @ z_end)

        rhs = c[:, None] * (2.0 * outputs * dt)[None, :]
        rhs[:, -1] += 2.0 * self._tail @ z_end
        mu = _adjoint_modes(alpha, rhs)

        z_prev = np.column_stack((z0, z[:, :-1]))
        lam = trans.eigenvalues[:, None]
        g = trans.input_modes[:, None]
        grad_u = np.sum(mu * beta, axis=0)
        grad_dt = outputs ** 2 + np.sum(mu * (lam * alpha * z_prev + g * alpha * u[None, :]), axis=0)
        return energy, grad_u, grad_dt


class IdentityWeighting:
    """All-pass weighting: raw acceleration energy, no state, no tail"""

    spec = None

    def zero_state(self) -> None:
        return None

    def evaluate(self, u: np.ndarray, dt: np.ndarray, x0: Optional[np.ndarray] = None) -> AxisEnergy:
        u = np.asarray(u, dtype=float)
        return AxisEnergy(motion=float(np.sum(u ** 2 * dt)), tail=0.0, outputs=u.copy(), final_state=None)

    def advance(self, u: np.ndarray, dt: np.ndarray, x0: Optional[np.ndarray] = None) -> None:
        return None

    def energy_and_gradient(self, u: np.ndarray, dt: np.ndarray,
                            x0: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray, np.ndarray]:
        u = np.asarray(u, dtype=float)
        return float(np.sum(u ** 2 * dt)), 2.0 * u * dt, u ** 2


Weighting = Union[BandPassWeighting, IdentityWeighting]


@dataclass
class EnergyBreakdown:
    """Per-axis motion and tail energies"""
    longitudinal: AxisEnergy
    lateral: AxisEnergy

    @property
    def motion(self) -> float:
        return self.longitudinal.motion + self.lateral.motion

    @property
    def tail(self) -> float:
        return self.longitudinal.tail + self.lateral.tail

    @property
    def total(self) -> float:
        return self.motion + self.tail


def weighted_energy(
    a_x: np.ndarray,
    a_y: np.ndarray,
    dt: np.ndarray,
    longitudinal: Weighting,
    lateral: Weighting,
    carry_in: Optional[Tuple[Optional[np.ndarray], Optional[np.ndarray]]] = None,
) -> EnergyBreakdown:
    """Energy of both axes, each through its own filter"""
    a_x = np.asarray(a_x, dtype=float)
    a_y = np.asarray(a_y, dtype=float)
    dt = np.asarray(dt, dtype=float)
    x_long, x_lat = carry_in or (None, None)
    if len(dt) == 0:
        logger.warning("Empty acceleration sequence, weighted energy is zero")
        empty = AxisEnergy(motion=0.0, tail=0.0, outputs=np.zeros(0), final_state=None)
        return EnergyBreakdown(longitudinal=empty, lateral=empty)
    return EnergyBreakdown(
        longitudinal=longitudinal.evaluate(a_x, dt, x_long),
        lateral=lateral.evaluate(a_y, dt, x_lat),
    )
