"""
Time stepping for cutfem

Backward Euler for u_t - Laplace u = f on a fixed cut domain, with the
matrices assembled once on the extended space and one factorization reused
for every step.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from .extension import ExtensionOperator, interpolate_pi_E
from .femspace import FESpace
from .fields import Field, FieldLike, as_field
from .forms import CutIntegration, FormParams, assemble_mass, assemble_poisson, poisson_load_vector
from .geometry import LevelSetDomain
from .solver import SolverError, acceptable, factorize

logger = logging.getLogger(__name__)


class TimestepError(RuntimeError):
    """Raised when a step fails; carries the step index."""

    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"step {step}: {message}")


@dataclass
class Trajectory:
    """Reduced solution vectors at times[0], times[1], ..."""
    times: List[float] = field(default_factory=list)
    states: List[np.ndarray] = field(default_factory=list)

    def append(self, time: float, state: np.ndarray):
        self.times.append(time)
        self.states.append(state)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self):
        return len(self.states)


def mass_norm(M, u: np.ndarray) -> float:
    return math.sqrt(max(float(u @ (M @ u)), 0.0))


def _at(value: Field, time: float) -> Field:
    return value.at(time) if value.time_dependent else value


def backward_euler_run(space: FESpace, E: ExtensionOperator, domain: LevelSetDomain, params: FormParams,
                       f: FieldLike, u0: Union[FieldLike, np.ndarray], tau: float, final_time: float,
                       g: FieldLike = None, integration: Optional[CutIntegration] = None) -> Trajectory:
    """Solve (M / tau + K) u^{n+1} = l(t_{n+1}) + M u^n / tau up to final_time."""
    if not tau > 0.0:
        raise TimestepError(f"Time step must be positive, got {tau}", 0)
    steps = int(round(final_time / tau))
    if steps < 1 or abs(steps * tau - final_time) > 1e-9 * max(1.0, final_time):
        raise TimestepError(f"Final time {final_time} is not a positive multiple of tau = {tau}", 0)
    f = as_field(f)
    g = as_field(g)
    if integration is None:
        integration = CutIntegration(space, domain)

    if isinstance(u0, np.ndarray):
        if u0.shape != (E.n_reduced,):
            raise TimestepError(f"Initial vector has shape {u0.shape}, expected ({E.n_reduced},)", 0)
        u = np.array(u0, dtype=float)
    else:
        u, _ = interpolate_pi_E(_at(as_field(u0), 0.0), space, E)

    M = assemble_mass(space, E, domain, integration)
    K = assemble_poisson(space, E, domain, params, integration=integration).K
    try:
        factor = factorize(M / tau + K)
    except SolverError as e:
        raise TimestepError(str(e), 1)
    system = factor.K

    trajectory = Trajectory()
    trajectory.append(0.0, u)
    for n in range(1, steps + 1):
        t = n * tau
        rhs = poisson_load_vector(space, E, domain, params, _at(f, t), _at(g, t), integration) + M @ u / tau
        u = factor.solve(rhs)
        ok, residual = acceptable(system, u, rhs)
        if not ok:
            raise TimestepError(f"solve residual {residual:.3e} above tolerance", n)
        trajectory.append(t, u)
    logger.debug("backward Euler: %d steps of tau=%g", steps, tau)
    return trajectory
