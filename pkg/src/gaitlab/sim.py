"""Planar kinematic locomotion surrogate with anisotropic friction.

Each module is a point contact at the centre of its lattice cell.  Hinges turn
their subtree in the ground plane.  Between two controller steps the core's rigid
motion (u, v, omega), expressed in the core frame, is chosen to minimise the
friction-weighted slip

    sum_m  rho * (lateral slip_m)^2 + (axial slip_m)^2

where a module's axial direction is the heading of the link that carries it.
That is a 3-unknown weighted least-squares problem solved in closed form.
"""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cpg import apply_weights, build_network, simulate
from .errors import SingularError
from .morphology import RobotSpec, build_grid


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.05
    duration: float = 60.0
    amplitude: float = math.pi / 3
    friction_ratio: float = 10.0
    cell_cm: float = 5.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.friction_ratio < 1:
            raise ValueError("friction_ratio must be >= 1")
        steps = self.duration / self.dt
        if self.duration <= 0 or abs(steps - round(steps)) > 1e-9:
            raise ValueError("duration must be a positive multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass
class FitnessResult:
    speed: float
    displacement: float
    trajectory: np.ndarray | None = None


class Body:
    """Precomputed kinematic structure of a robot.

    Module order is the tree's pre-order; index 0 is the core.
    """

    def __init__(self, spec: RobotSpec):
        grid = build_grid(spec.tree)
        paths = list(grid.cells)
        index = {p: i for i, p in enumerate(paths)}
        joint_index = {p: k for k, p in enumerate(grid.joints)}
        n, nj = len(paths), len(grid.joints)

        self.n_modules = n
        self.n_joints = nj
        self.cells = np.array([grid.cells[p] for p in paths], dtype=float)
        self.base_heading = np.array([grid.headings[p] * math.pi / 2 for p in paths])
        # hinge_above[m, k] = 1 if joint k is a proper ancestor of module m
        self.hinge_above = np.zeros((n, nj))
        # path_edges[m, e] = 1 if the link into module e lies on the root->m path
        self.path_edges = np.zeros((n, n))
        for p in paths:
            m = index[p]
            for depth in range(1, len(p) + 1):
                self.path_edges[m, index[p[:depth]]] = 1.0
            for depth in range(len(p)):
                anc = p[:depth]
                if anc in joint_index:
                    self.hinge_above[m, joint_index[anc]] = 1.0
        self.path_edges[0, :] = 0.0
        self.joint_modules = [index[p] for p in grid.joints]

    def poses(self, angles: np.ndarray, cell_cm: float = 1.0) -> np.ndarray:
        """Module poses for one or many angle vectors.

        ``angles`` has shape ``(..., n_joints)``; the result has shape
        ``(..., n_modules, 3)`` holding ``(x, y, heading)`` in the core frame.
        """
        angles = np.asarray(angles, dtype=float)
        heading = self.base_heading + angles @ self.hinge_above.T
        link_x = cell_cm * np.cos(heading)
        link_y = cell_cm * np.sin(heading)
        link_x[..., 0] = 0.0
        link_y[..., 0] = 0.0
        x = link_x @ self.path_edges.T
        y = link_y @ self.path_edges.T
        return np.stack([x, y, heading], axis=-1)


@functools.lru_cache(maxsize=256)
def body_of(spec: RobotSpec) -> Body:
    return Body(spec)


@functools.lru_cache(maxsize=256)
def _network_of(spec: RobotSpec):
    return build_network(spec)


def forward_kinematics(spec: RobotSpec, joint_angles, config: SimConfig | None = None) -> np.ndarray:
    """Planar poses ``(n_modules, 3)`` for a single joint-angle vector, in cm and rad."""
    config = config or SimConfig()
    body = body_of(spec)
    joint_angles = np.asarray(joint_angles, dtype=float)
    if joint_angles.shape != (body.n_joints,):
        raise ValueError(f"expected {body.n_joints} joint angles, got {joint_angles.shape}")
    if np.any(np.abs(joint_angles) > math.pi / 2 + 1e-12):
        raise ValueError("joint angles must lie in [-pi/2, pi/2]")
    return body.poses(joint_angles, config.cell_cm)


def _normal_system(prev: np.ndarray, nxt: np.ndarray, rho: float):
    """Batched normal equations of the slip cost.

    ``prev``/``nxt`` have shape ``(T, M, 3)``.  Returns ``(N, rhs)`` with shapes
    ``(T, 3, 3)`` and ``(T, 3)``.
    """
    bx = nxt[..., 0] - prev[..., 0]
    by = nxt[..., 1] - prev[..., 1]
    qx, qy, a = nxt[..., 0], nxt[..., 1], nxt[..., 2]
    c, s = np.cos(a), np.sin(a)
    # W = rho * n n^T + t t^T with t = (c, s), n = (-s, c)
    w11 = rho * s * s + c * c
    w22 = rho * c * c + s * s
    w12 = (1.0 - rho) * c * s
    # slip_m = b_m + A_m z with A_m rows [1, 0, -qy] and [0, 1, qx]
    one, zero = np.ones_like(qx), np.zeros_like(qx)
    row_x = np.stack([one, zero, -qy], axis=-1)
    row_y = np.stack([zero, one, qx], axis=-1)
    # columns of A^T W
    col_x = np.stack([w11, w12, -qy * w11 + qx * w12], axis=-1)
    col_y = np.stack([w12, w22, -qy * w12 + qx * w22], axis=-1)
    normal = np.einsum("tmi,tmj->tij", col_x, row_x) + np.einsum("tmi,tmj->tij", col_y, row_y)
    rhs = -(np.einsum("tmi,tm->ti", col_x, bx) + np.einsum("tmi,tm->ti", col_y, by))
    return normal, rhs


def slip_cost(prev: np.ndarray, nxt: np.ndarray, motion, rho: float) -> float:
    """Friction-weighted slip of a core-frame motion ``(u, v, omega)``; reference for ``body_step``."""
    u, v, om = motion
    total = 0.0
    for (px, py, _), (qx, qy, a) in zip(prev, nxt):
        dx = qx - px + u - om * qy
        dy = qy - py + v + om * qx
        axial = dx * math.cos(a) + dy * math.sin(a)
        lateral = -dx * math.sin(a) + dy * math.cos(a)
        total += rho * lateral**2 + axial**2
    return total


def solve_motion(prev: np.ndarray, nxt: np.ndarray, rho: float) -> np.ndarray:
    """Least-slip core-frame motion ``(u, v, omega)`` between two module pose sets."""
    normal, rhs = _normal_system(prev[None], nxt[None], rho)
    if len(prev) < 2 or np.linalg.matrix_rank(normal[0]) < 3:
        raise SingularError("normal matrix is rank deficient")
    return np.linalg.solve(normal[0], rhs[0])


def body_step(spec: RobotSpec, prev_angles, next_angles, pose, config: SimConfig | None = None):
    """Advance the world pose ``(x_cm, y_cm, heading)`` of the core by one joint update."""
    config = config or SimConfig()
    body = body_of(spec)
    prev = body.poses(np.asarray(prev_angles, dtype=float), config.cell_cm)
    nxt = body.poses(np.asarray(next_angles, dtype=float), config.cell_cm)
    try:
        u, v, om = solve_motion(prev, nxt, config.friction_ratio)
    except SingularError:
        return tuple(float(p) for p in pose)
    x, y, phi = pose
    c, s = math.cos(phi), math.sin(phi)
    return (x + c * u - s * v, y + s * u + c * v, phi + om)


def _integrate(body: Body, angles: np.ndarray, config: SimConfig, heading0: float = 0.0) -> np.ndarray:
    """World trajectory ``(T + 1, 3)`` of the core for a joint-angle history ``(T + 1, J)``."""
    steps = len(angles) - 1
    traj = np.zeros((steps + 1, 3))
    traj[0, 2] = heading0
    if body.n_modules < 2 or steps == 0:
        traj[:, 2] = heading0
        return traj
    poses = body.poses(angles, config.cell_cm)
    normal, rhs = _normal_system(poses[:-1], poses[1:], config.friction_ratio)
    motion = np.linalg.solve(normal, rhs[..., None])[..., 0]
    phi = heading0 + np.concatenate([[0.0], np.cumsum(motion[:, 2])])
    c, s = np.cos(phi[:-1]), np.sin(phi[:-1])
    dx = c * motion[:, 0] - s * motion[:, 1]
    dy = s * motion[:, 0] + c * motion[:, 1]
    traj[1:, 0] = np.cumsum(dx)
    traj[1:, 1] = np.cumsum(dy)
    traj[:, 2] = phi
    return traj


def joint_angles(spec: RobotSpec, w, config: SimConfig | None = None) -> np.ndarray:
    """Joint-angle history ``(n_steps + 1, n_joints)`` produced by weights ``w`` from reset."""
    config = config or SimConfig()
    net = apply_weights(_network_of(spec), w)
    x = simulate(net, config.dt, config.n_steps)
    return config.amplitude * np.tanh(x)


def evaluate(
    spec: RobotSpec,
    w,
    config: SimConfig | None = None,
    keep_trajectory: bool = False,
    heading0: float = 0.0,
) -> FitnessResult:
    """Average straight-line speed (cm/s) over the configured duration."""
    config = config or SimConfig()
    # the servo move from neutral to the reset command happens before t = 0
    angles = joint_angles(spec, w, config)
    traj = _integrate(body_of(spec), angles, config, heading0)
    disp = float(math.hypot(traj[-1, 0], traj[-1, 1]))
    return FitnessResult(disp / config.duration, disp, traj if keep_trajectory else None)


def write_trajectory_csv(traj: np.ndarray, path: str | Path, dt: float) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["step", "t", "x_cm", "y_cm", "heading_rad"])
        for k, (x, y, h) in enumerate(traj):
            wr.writerow([k, repr(round(k * dt, 10)), repr(float(x)), repr(float(y)), repr(float(h))])
