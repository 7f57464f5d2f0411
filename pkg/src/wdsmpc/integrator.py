"""Fixed-step RK4 discretization and open-loop horizon rollout."""

from dataclasses import dataclass

import numpy as np

from .network import tank_rhs


@dataclass(frozen=True)
class Horizon:
    Np: int
    dt: float = 1.0

    def __post_init__(self):
        if int(self.Np) != self.Np or self.Np < 1:
            raise ValueError(f"Np must be a positive integer, got {self.Np}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


def rk4_step(rhs, x, u, d, dt):
    """Classical RK4 step with ``u`` and ``d`` held over the interval.

    ``rhs(x, u, d)`` returns the state derivative.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    k1 = rhs(x, u, d)
    k2 = rhs(x + 0.5 * dt * k1, u, d)
    k3 = rhs(x + 0.5 * dt * k2, u, d)
    k4 = rhs(x + dt * k3, u, d)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def model_rhs(model):
    """Wrap :func:`tank_rhs` into the ``rhs(x, u, d)`` signature."""
    def rhs(x, u, d):
        return tank_rhs(model, u, d)
    return rhs


def rollout(model, x0, U, D, horizon):
    """Predict the level trajectory over the horizon.

    Returns an array of shape ``(Np + 1, n_x)`` whose first row is ``x0``.
    """
    U = np.asarray(U, dtype=float)
    D = np.asarray(D, dtype=float)
    Np = horizon.Np
    if U.shape != (Np, model.n_u):
        raise ValueError(f"input sequence must have shape ({Np}, {model.n_u}), got {U.shape}")
    if D.shape != (Np, model.n_d):
        raise ValueError(f"disturbance sequence must have shape ({Np}, {model.n_d}), got {D.shape}")
    rhs = model_rhs(model)
    X = np.empty((Np + 1, model.n_x))
    X[0] = x0
    for j in range(Np):
        X[j + 1] = rk4_step(rhs, X[j], U[j], D[j], horizon.dt)
    return X
