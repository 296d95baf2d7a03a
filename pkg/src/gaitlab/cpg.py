"""Central pattern generator network: one (x, y) oscillator per hinge.

Dynamics per joint ``i``::

    dx_i = -w_i * y_i + sum_{j in N_i} c_ji * x_j
    dy_i =  w_i * x_i

``w_i`` is the stored intra weight (x->y); the y->x weight is its negative.
For a neighbour pair ``(i, j)`` with ``i < j`` the stored value ``p`` is the
x_i -> x_j weight and the reverse connection carries ``-p``.  The output gain is 1
and the motor command is ``tanh(x_i)``.

Genome layout: intra weights by joint index, then pair weights in lexicographic
pair order.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import DimensionError, NoJointsError
from .morphology import RobotSpec, build_grid, neighbor_pairs

RESET_STATE = (-1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0))


@dataclass(frozen=True)
class CpgNetwork:
    n_joints: int
    pairs: tuple[tuple[int, int], ...]
    intra: np.ndarray = field(repr=False, default=None)
    pair_w: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.intra is None:
            object.__setattr__(self, "intra", np.zeros(self.n_joints))
        if self.pair_w is None:
            object.__setattr__(self, "pair_w", np.zeros(len(self.pairs)))

    @property
    def n_weights(self) -> int:
        return self.n_joints + len(self.pairs)

    def neighbors(self) -> dict[int, set[int]]:
        out = {i: set() for i in range(self.n_joints)}
        for i, j in self.pairs:
            out[i].add(j)
            out[j].add(i)
        return out

    @cached_property
    def coupling(self) -> np.ndarray:
        """Antisymmetric x->x matrix ``C`` with ``dx = C @ x + ...``."""
        c = np.zeros((self.n_joints, self.n_joints))
        for (i, j), p in zip(self.pairs, self.pair_w):
            c[j, i] = p
            c[i, j] = -p
        return c

    @cached_property
    def system_matrix(self) -> np.ndarray:
        """Linear map ``A`` such that ``d[x; y]/dt = A @ [x; y]``."""
        n = self.n_joints
        a = np.zeros((2 * n, 2 * n))
        a[:n, :n] = self.coupling
        a[:n, n:] = -np.diag(self.intra)
        a[n:, :n] = np.diag(self.intra)
        return a

    def weights(self) -> np.ndarray:
        return np.concatenate([self.intra, self.pair_w])


@dataclass(frozen=True)
class ControllerState:
    x: np.ndarray
    y: np.ndarray
    t: float = 0.0

    @classmethod
    def reset(cls, n_joints: int) -> "ControllerState":
        return cls(np.full(n_joints, RESET_STATE[0]), np.full(n_joints, RESET_STATE[1]), 0.0)


def build_network(spec: RobotSpec) -> CpgNetwork:
    grid = build_grid(spec.tree)
    if not grid.joints:
        raise NoJointsError(f"robot {spec.name!r} has no active hinges")
    return CpgNetwork(len(grid.joints), tuple(neighbor_pairs(grid)))


def apply_weights(net: CpgNetwork, w) -> CpgNetwork:
    w = np.asarray(w, dtype=float)
    if w.shape != (net.n_weights,):
        raise DimensionError(f"expected {net.n_weights} weights, got shape {w.shape}")
    n = net.n_joints
    return replace(net, intra=w[:n].copy(), pair_w=w[n:].copy())


def derivatives(net: CpgNetwork, state: ControllerState) -> tuple[np.ndarray, np.ndarray]:
    dx = -net.intra * state.y + net.coupling @ state.x
    dy = net.intra * state.x
    return dx, dy


def rk4_step(net: CpgNetwork, state: ControllerState, dt: float) -> ControllerState:
    if dt <= 0:
        raise ValueError("dt must be positive")

    def f(x, y):
        return derivatives(net, ControllerState(x, y))

    x, y = state.x, state.y
    k1x, k1y = f(x, y)
    k2x, k2y = f(x + 0.5 * dt * k1x, y + 0.5 * dt * k1y)
    k3x, k3y = f(x + 0.5 * dt * k2x, y + 0.5 * dt * k2y)
    k4x, k4y = f(x + dt * k3x, y + dt * k3y)
    return ControllerState(
        x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
        y + dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y),
        state.t + dt,
    )


def rk4_propagator(net: CpgNetwork, dt: float) -> np.ndarray:
    """One RK4 step of the linear system as a matrix: ``s_next = P @ s``.

    For ``ds/dt = A s`` the classical RK4 update is exactly the degree-4 Taylor
    polynomial of ``exp(A dt)``.
    """
    h = dt * net.system_matrix
    eye = np.eye(len(h))
    h2 = h @ h
    h3 = h2 @ h
    return eye + h + h2 / 2.0 + h3 / 6.0 + h3 @ h / 24.0


def simulate(net: CpgNetwork, dt: float, n_steps: int) -> np.ndarray:
    """x-trajectory from the reset state: array of shape ``(n_steps + 1, n_joints)``."""
    p = rk4_propagator(net, dt)
    n = net.n_joints
    s = np.concatenate([np.full(n, RESET_STATE[0]), np.full(n, RESET_STATE[1])])
    out = np.empty((n_steps + 1, n))
    out[0] = s[:n]
    pt = p.T
    for k in range(1, n_steps + 1):
        s = s @ pt
        out[k] = s[:n]
    return out


def outputs(net: CpgNetwork, state: ControllerState) -> np.ndarray:
    return np.tanh(state.x)
