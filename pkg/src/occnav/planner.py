"""Log-MPPI stochastic optimal control for a differential-drive robot.

Control perturbations are normal-log-normal products (heavier tails than a
Gaussian); importance weights follow the standard path-integral softmax.
The cost couples terminal distance to both subgoals with occupancy
penalties on a robot-frame planning grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.signal import savgol_filter

from .errors import DomainError
from .gridmap import CENTER, FREE, GRID_SIZE, OCCUPIED, OccupancyGrid, RESOLUTION
from .pose import Pose, wrap_angle

__all__ = [
    "Pose", "ControlSequence", "PlannerConfig", "StepResult",
    "rollout", "nln_perturbations", "trajectory_cost", "importance_weights",
    "mppi_step", "step_pose",
]


@dataclass(frozen=True)
class ControlSequence:
    """Horizon of (v, omega) commands."""

    controls: np.ndarray  # (H, 2)

    def __post_init__(self) -> None:
        c = np.asarray(self.controls, dtype=float)
        if c.ndim != 2 or c.shape[1] != 2:
            raise DomainError(f"controls must be (H, 2), got {c.shape}")
        object.__setattr__(self, "controls", c)

    @classmethod
    def zeros(cls, horizon: int) -> "ControlSequence":
        return cls(np.zeros((horizon, 2)))

    def __len__(self) -> int:
        return len(self.controls)


@dataclass(frozen=True)
class PlannerConfig:
    """Log-MPPI parameters; defaults follow the benchmark configuration."""

    sigma: tuple[float, float] = (0.5, 0.1)
    lambda_temp: float = 0.5
    lambda_goal: float = 200.0
    lambda_obs: float = 50.0
    samples: int = 2500
    horizon_s: float = 10.0
    dt: float = 0.1
    v_max: float = 2.0
    omega_max: float = 2.0
    mu_ln: float = -0.045
    sigma_ln: float = 0.3
    crash_cost: float = 1.0e6
    smooth_window: int = 15  # Savitzky-Golay window on the updated nominal
    blocked_horizon_s: float = 1.0  # all samples crashing within this -> stop

    def __post_init__(self) -> None:
        if min(self.sigma) <= 0 or self.lambda_temp <= 0 or self.lambda_goal <= 0 \
                or self.lambda_obs <= 0 or self.samples <= 0 or self.horizon_s <= 0 \
                or self.dt <= 0 or self.v_max <= 0 or self.omega_max <= 0 \
                or self.sigma_ln < 0 or self.crash_cost <= 0:
            raise DomainError("planner config values must be positive")

    @property
    def horizon_steps(self) -> int:
        return int(round(self.horizon_s / self.dt))

    def to_json(self) -> dict:
        d = asdict(self)
        d["sigma"] = list(self.sigma)
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "PlannerConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise DomainError(f"unknown planner config keys: {sorted(unknown)}")
        obj = dict(obj)
        if "sigma" in obj:
            obj["sigma"] = tuple(obj["sigma"])
        return cls(**obj)


@dataclass(frozen=True)
class StepResult:
    command: tuple[float, float]
    nominal: ControlSequence
    blocked: bool
    weights: np.ndarray | None = None


def rollout(start: Pose, controls: ControlSequence, dt: float) -> np.ndarray:
    """Explicit-Euler unicycle rollout; returns the H poses after each step."""
    v = controls.controls[:, 0]
    om = controls.controls[:, 1]
    dth = om * dt
    theta = start.theta + np.cumsum(dth) - dth  # heading before each step
    x = start.x + np.cumsum(v * np.cos(theta) * dt)
    y = start.y + np.cumsum(v * np.sin(theta) * dt)
    after = theta + dth
    theta_after = np.arctan2(np.sin(after), np.cos(after))
    return np.stack([x, y, theta_after], axis=1)


def _rollout_batch_xy(start: np.ndarray, controls: np.ndarray, dt: float) -> np.ndarray:
    """Vectorized rollout positions: controls (K, H, 2) -> xy (K, H, 2), float32."""
    c = controls.astype(np.float32, copy=False)
    v = c[:, :, 0]
    dth = c[:, :, 1] * np.float32(dt)
    theta = np.cumsum(dth, axis=1, dtype=np.float32)
    theta += np.float32(start[2])
    theta -= dth
    x = np.cumsum(v * np.cos(theta) * np.float32(dt), axis=1, dtype=np.float32)
    y = np.cumsum(v * np.sin(theta) * np.float32(dt), axis=1, dtype=np.float32)
    x += np.float32(start[0])
    y += np.float32(start[1])
    return np.stack([x, y], axis=2)


def nln_perturbations(config: PlannerConfig, rng: np.random.Generator) -> np.ndarray:
    """(K, H, 2) control noise: Gaussian times unit-mean log-normal.

    The log-normal factor is normalized to unit mean, which reduces to
    exp(sigma_ln * n - sigma_ln^2 / 2) regardless of mu_ln.
    """
    k, h = config.samples, config.horizon_steps
    z = rng.standard_normal(size=(k, h, 2), dtype=np.float32)
    z *= np.asarray(config.sigma, dtype=np.float32)
    if config.sigma_ln == 0.0:
        return z
    n = rng.standard_normal(size=(k, h, 2), dtype=np.float32)
    w = np.exp(n * np.float32(config.sigma_ln) - np.float32(0.5 * config.sigma_ln ** 2))
    return z * w


def _occupancy_hits(traj_xy: np.ndarray, grid: OccupancyGrid) -> np.ndarray:
    """Boolean (..., H) mask of trajectory samples landing in occupied cells."""
    cols = np.rint(traj_xy[..., 0] * (1.0 / RESOLUTION)).astype(np.int32) + CENTER
    rows = np.rint(traj_xy[..., 1] * (1.0 / RESOLUTION)).astype(np.int32) + CENTER
    # Out-of-grid samples index a padded unknown border instead of branching.
    np.clip(rows, -1, GRID_SIZE, out=rows)
    np.clip(cols, -1, GRID_SIZE, out=cols)
    padded = np.full((GRID_SIZE + 2, GRID_SIZE + 2), False)
    padded[1:-1, 1:-1] = grid.cells == OCCUPIED
    return padded[rows + 1, cols + 1]


def trajectory_cost(traj, grid: OccupancyGrid, g1, g2, config: PlannerConfig) -> float:
    """Cost of one rolled-out trajectory expressed in the grid's robot frame.

    Goal term: lambda_goal times the trajectory-mean distance to g1 (plus
    the mean distance to g2 when present), so early progress and settling
    both pay off. Obstacle term: lambda_obs per occupied sample plus a
    crash penalty if any sample is occupied. Unknown and out-of-grid
    samples are free of charge.
    """
    traj = np.asarray(traj, dtype=float)
    if traj.ndim != 2 or traj.shape[1] < 2:
        raise DomainError("trajectory must be (H, >=2)")
    return float(_cost_batch(traj[None, :, :2], grid, g1, g2, config)[0])


def _goal_distances(traj_xy: np.ndarray, goal: np.ndarray) -> np.ndarray:
    dx = traj_xy[:, :, 0] - np.float32(goal[0])
    dy = traj_xy[:, :, 1] - np.float32(goal[1])
    return np.sqrt(dx * dx + dy * dy).mean(axis=1)


def _cost_batch(traj_xy: np.ndarray, grid: OccupancyGrid, g1, g2,
                config: PlannerConfig, return_hits: bool = False):
    traj_xy = traj_xy.astype(np.float32, copy=False)
    goal = _goal_distances(traj_xy, np.asarray(g1, dtype=float))
    if g2 is not None:
        goal = goal + _goal_distances(traj_xy, np.asarray(g2, dtype=float))
    hits = _occupancy_hits(traj_xy, grid)
    n_hits = hits.sum(axis=1)
    costs = config.lambda_goal * goal.astype(float) + config.lambda_obs * n_hits \
        + config.crash_cost * (n_hits > 0)
    return (costs, hits) if return_hits else costs


def importance_weights(costs: np.ndarray, lambda_temp: float) -> np.ndarray:
    """Path-integral softmax; invariant to adding a constant to all costs."""
    costs = np.asarray(costs, dtype=float)
    w = np.exp(-(costs - costs.min()) / lambda_temp)
    return w / w.sum()


def mppi_step(state: Pose, nominal: ControlSequence, grid: OccupancyGrid,
              g1, g2, config: PlannerConfig, rng: np.random.Generator) -> StepResult:
    """One Log-MPPI control cycle in the grid's robot frame.

    Samples K perturbed control sequences (clamped to limits), rolls them
    out, soft-averages the applied perturbations by cost, and returns the
    first command plus the shifted nominal for the next cycle. If every
    sample crashes, commands zero velocity and resets the nominal.
    """
    h = config.horizon_steps
    if len(nominal) != h:
        raise DomainError(f"nominal length {len(nominal)} != horizon {h}")
    delta = nln_perturbations(config, rng)
    base = nominal.controls.astype(np.float32)[None, :, :]
    cand = base + delta
    np.clip(cand[:, :, 0], 0.0, config.v_max, out=cand[:, :, 0])
    np.clip(cand[:, :, 1], -config.omega_max, config.omega_max, out=cand[:, :, 1])
    applied = cand - base

    traj = _rollout_batch_xy(state.as_array(), cand, config.dt)
    costs, hits = _cost_batch(traj, grid, g1, g2, config, return_hits=True)

    # Boxed in: every sample hits a wall almost immediately. Later crashes
    # are re-planned away on the next cycle, so they stay rankable (the
    # shared crash constant cancels in the softmax).
    near = max(1, min(h, int(round(config.blocked_horizon_s / config.dt))))
    if bool(hits[:, :near].any(axis=1).all()):
        return StepResult((0.0, 0.0), ControlSequence.zeros(h), True, None)

    w = importance_weights(costs, config.lambda_temp)
    new = nominal.controls + np.einsum("k,khc->hc", w.astype(np.float32), applied)
    window = min(config.smooth_window, h)
    if window >= 5:
        # The near-degenerate softmax chases single samples; smoothing the
        # updated sequence removes their per-step noise, as in the cited
        # controller's control-sequence filtering.
        new = savgol_filter(new, window - (window + 1) % 2, 3, axis=0)
    new[:, 0] = np.clip(new[:, 0], 0.0, config.v_max)
    new[:, 1] = np.clip(new[:, 1], -config.omega_max, config.omega_max)
    command = (float(new[0, 0]), float(new[0, 1]))
    shifted = np.vstack([new[1:], new[-1:]])
    return StepResult(command, ControlSequence(shifted), False, w)


def step_pose(pose: Pose, command: tuple[float, float], dt: float) -> Pose:
    """Advance a world-frame pose by one control step."""
    v, om = command
    return Pose(pose.x + v * math.cos(pose.theta) * dt,
                pose.y + v * math.sin(pose.theta) * dt,
                wrap_angle(pose.theta + om * dt))
