"""Closed-loop episode simulation and the ablation benchmark matrix.

Five source configurations mirror the benchmark table: (a) Level-1 only,
(b) ground-truth Level-2 and subgoal, (c) predicted map with ground-truth
subgoal, (d) ground-truth map with predicted subgoal, (e) both predicted.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import ndimage

from .datagen import Episode, canonical_json, config_hash
from .errors import DomainError, ForecastError
from .forecaster import Forecast, RemoteForecaster, forecast_null, forecast_oracle, fuse_observed
from .geometry import distance_to_boundary, points_in_polygon
from .gridmap import (CENTER as GRID_CENTER, FREE, OCCUPIED, OccupancyGrid, RESOLUTION,
                      extract_frontiers, furthest_free_point, level1_scan)
from .instruct import derive_instructions, encode
from .planner import ControlSequence, PlannerConfig, mppi_step, step_pose
from .pose import Pose, world_to_robot

log = logging.getLogger(__name__)

CONFIG_IDS = ("a", "b", "c", "d", "e")
_NEEDS_REMOTE = {"c": True, "d": True, "e": True, "a": False, "b": False}


@dataclass(frozen=True)
class SimConfig:
    """Closed-loop simulation constants."""

    dt: float = 0.1
    robot_radius: float = 0.2
    goal_tolerance: float = 0.5
    timeout_s: float = 120.0
    max_slots: int = 2
    frontier_mode: str = "all"

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "SimConfig":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise DomainError(f"unknown sim config keys: {sorted(unknown)}")
        return cls(**obj)


@dataclass
class EpisodeResult:
    """Outcome of one closed-loop run; exactly one terminal flag is set."""

    success: bool
    collided: bool
    timed_out: bool
    elapsed_s: float
    path_length_m: float
    config_id: str
    link_diameter: int
    v_max: float
    seed: int
    remote_failures: int = 0
    flagged: bool = False
    trace: list[dict] | None = None

    def __post_init__(self) -> None:
        if sum((self.success, self.collided, self.timed_out)) != 1:
            raise DomainError("exactly one terminal flag must be set")

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("trace")
        return d


def _inflate_for_planning(grid: OccupancyGrid, radius_m: float) -> OccupancyGrid:
    """Dilate occupied cells by the robot radius so point rollouts respect it.

    The inflation is undone in a small disk around the robot cell: wherever
    the robot legally stands must stay plannable, or a wall-hugging pose
    would leave every sample "in collision" and freeze the controller.
    """
    r = int(math.ceil(radius_m / RESOLUTION))
    if r <= 0:
        return grid
    y, x = np.ogrid[-r:r + 1, -r:r + 1]
    occ = ndimage.binary_dilation(grid.cells == OCCUPIED, structure=x * x + y * y <= r * r)
    cells = grid.cells.copy()
    cells[occ] = OCCUPIED
    c = GRID_CENTER
    rr = r + 1
    yy, xx = np.ogrid[-rr:rr + 1, -rr:rr + 1]
    disk = xx * xx + yy * yy <= rr * rr
    window = (slice(c - rr, c + rr + 1), slice(c - rr, c + rr + 1))
    cells[window][disk] = grid.cells[window][disk]
    return OccupancyGrid(cells, pose=grid.pose)


def _route_ahead(route_pts: np.ndarray, progress: int, pose: Pose) -> tuple[np.ndarray, int]:
    """Remaining route from the robot's monotone progress marker."""
    d = np.linalg.norm(route_pts[progress:] - pose.xy, axis=1)
    progress = progress + int(np.argmin(d))
    return route_pts[progress:], progress


def run_episode(episode: Episode, config_id: str, planner_config: PlannerConfig,
                seed: int, sim_config: SimConfig = SimConfig(),
                remote: RemoteForecaster | None = None,
                keep_trace: bool = False) -> EpisodeResult:
    """Simulate one navigation episode under a source configuration.

    Per 0.1 s cycle: sense Level-1, pick the Level-1 subgoal as the furthest
    visible route point, derive oracle instructions, obtain the configured
    forecast, and run one planner step. The robot is a 0.2 m disk; touching
    the boundary is a collision, reaching within the goal tolerance is a
    success, and the clock runs out at the timeout.
    """
    if config_id not in CONFIG_IDS:
        raise DomainError(f"config must be one of {CONFIG_IDS}, got {config_id!r}")
    if _NEEDS_REMOTE[config_id] and remote is None:
        raise DomainError(f"config {config_id!r} requires a remote forecaster endpoint")
    env = episode.env
    route = episode.route
    route_pts = route.points
    arc = route.arc_positions()
    tangent = route_pts[1] - route_pts[0] if len(route_pts) > 1 else np.array([1.0, 0.0])
    pose = Pose(episode.start[0], episode.start[1],
                math.atan2(tangent[1], tangent[0]))
    nominal = ControlSequence.zeros(planner_config.horizon_steps)
    rng = np.random.default_rng(seed)
    t = 0.0
    path_len = 0.0
    progress = 0
    remote_failures = 0
    flagged = False
    trace: list[dict] = []

    def finish(status: str) -> EpisodeResult:
        return EpisodeResult(
            success=status == "success", collided=status == "collided",
            timed_out=status == "timeout", elapsed_s=round(t, 3),
            path_length_m=round(path_len, 3), config_id=config_id,
            link_diameter=episode.link_diameter, v_max=planner_config.v_max,
            seed=seed, remote_failures=remote_failures, flagged=flagged,
            trace=trace if keep_trace else None)

    while t < sim_config.timeout_s:
        region, l1 = level1_scan(env, pose)
        ahead, progress = _route_ahead(route_pts, progress, pose)
        ahead_rf = world_to_robot(ahead, pose)
        hit1 = furthest_free_point(ahead_rf, l1)
        g1 = hit1[0] if hit1 is not None else ahead_rf[min(len(ahead_rf) - 1, 10)]

        forecast: Forecast | None = None
        gt_l2 = None
        gt_g2 = None
        encoding = np.zeros(9 * sim_config.max_slots, dtype=np.float32)
        if config_id != "a":
            oracle = forecast_oracle(env, pose, route, l1=(region, l1),
                                     frontier_mode=sim_config.frontier_mode)
            gt_l2, gt_g2 = oracle.l2, oracle.g2
            horizon = float(arc[-1] - arc[progress]) if gt_g2 is None else None
            instructions = derive_instructions(
                route, pose,
                horizon_m=horizon if horizon is not None else _arc_to(route, pose, gt_g2),
                max_slots=sim_config.max_slots)
            encoding = encode(instructions, sim_config.max_slots)
        if config_id == "a":
            forecast = forecast_null(l1)
            grid, g2 = l1, None
        elif config_id == "b":
            grid, g2 = gt_l2, gt_g2
        else:
            try:
                pred = remote.forecast(l1, encoding)
            except ForecastError as e:
                remote_failures += 1
                flagged = True
                log.warning("remote forecast failed (%s); falling back to Level-1", e)
                pred = forecast_null(l1)
            if config_id == "c":
                grid = fuse_observed(pred.l2, l1)
                g2 = gt_g2
            elif config_id == "d":
                grid = gt_l2
                g2 = pred.g2
            else:  # e
                grid = fuse_observed(pred.l2, l1)
                g2 = pred.g2

        planning_grid = _inflate_for_planning(grid, sim_config.robot_radius)
        step = mppi_step(Pose(0, 0, 0), nominal, planning_grid, g1, g2,
                         planner_config, rng)
        nominal = step.nominal
        prev = pose
        pose = step_pose(pose, step.command, sim_config.dt)
        path_len += math.hypot(pose.x - prev.x, pose.y - prev.y)
        t += sim_config.dt

        if keep_trace:
            trace.append({
                "t": round(t, 3), "pose": [pose.x, pose.y, pose.theta],
                "command": [step.command[0], step.command[1]],
                "g1": [float(g1[0]), float(g1[1])],
                "g2": None if g2 is None else [float(g2[0]), float(g2[1])],
                "blocked": step.blocked,
            })

        inside = bool(points_in_polygon(pose.xy[None, :], env.vertices)[0])
        dist = float(distance_to_boundary(pose.xy[None, :], env.vertices)[0])
        if not inside or dist < sim_config.robot_radius:
            return finish("collided")
        if np.linalg.norm(pose.xy - episode.goal) < sim_config.goal_tolerance:
            return finish("success")
    return finish("timeout")


def _arc_to(route, pose: Pose, g2_rf) -> float:
    """Arc length from the robot to the route point nearest a robot-frame goal."""
    from .pose import robot_to_world

    pts = route.points
    arc = route.arc_positions()
    here = int(np.argmin(np.linalg.norm(pts - pose.xy, axis=1)))
    target = robot_to_world(np.asarray(g2_rf, dtype=float), pose)
    there = int(np.argmin(np.linalg.norm(pts - target, axis=1)))
    return max(float(arc[there] - arc[here]), 0.0)


@dataclass
class BenchmarkReport:
    """Success-rate matrix over (config, link diameter, max velocity)."""

    cells: dict = field(default_factory=dict)   # "config|ld|v" -> stats dict
    config_hash: str = ""
    seeds: list[int] = field(default_factory=list)
    planner: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    tool_version: str = ""
    flagged_episodes: int = 0

    @staticmethod
    def key(config_id: str, link_diameter: int, v_max: float) -> str:
        return f"{config_id}|{link_diameter}|{v_max:g}"

    def rate(self, config_id: str, link_diameter: int, v_max: float) -> float | None:
        cell = self.cells.get(self.key(config_id, link_diameter, v_max))
        return None if not cell or cell["trials"] == 0 else cell["successes"] / cell["trials"]

    def to_json(self) -> dict:
        return {
            "cells": {k: self.cells[k] for k in sorted(self.cells)},
            "config_hash": self.config_hash,
            "seeds": self.seeds,
            "planner": self.planner,
            "sim": self.sim,
            "tool_version": self.tool_version,
            "flagged_episodes": self.flagged_episodes,
        }


def run_benchmark(episodes: list[Episode], config_ids: list[str],
                  planner_config: PlannerConfig, sim_config: SimConfig = SimConfig(),
                  v_maxes: tuple[float, ...] = (2.0, 3.0), trials: int = 1,
                  master_seed: int = 0, endpoint: str | None = None,
                  tool_version: str = "", progress=None) -> BenchmarkReport:
    """Run the full episode x config x velocity matrix and aggregate rates.

    Remote-dependent configs require `endpoint`; episodes whose remote
    fell back to Level-1 are excluded from their cell and counted as
    flagged. Per-cell trial counts therefore report usable trials.
    """
    for cid in config_ids:
        if cid not in CONFIG_IDS:
            raise DomainError(f"unknown config id {cid!r}")
    needs_remote = any(_NEEDS_REMOTE[c] for c in config_ids)
    if needs_remote and not endpoint:
        raise DomainError("configs c/d/e require an inference endpoint")
    report = BenchmarkReport(seeds=[master_seed], tool_version=tool_version,
                             planner=planner_config.to_json(), sim=sim_config.to_json())
    remote = RemoteForecaster(endpoint) if needs_remote else None
    ss = np.random.SeedSequence(master_seed)
    try:
        for e_idx, episode in enumerate(episodes):
            for cid in config_ids:
                for v in v_maxes:
                    pc = PlannerConfig(**{**planner_config.to_json(),
                                          "sigma": tuple(planner_config.sigma),
                                          "v_max": v})
                    for trial in range(trials):
                        seed = int(np.random.SeedSequence(
                            (master_seed, e_idx, CONFIG_IDS.index(cid),
                             int(v * 10), trial)).generate_state(1)[0])
                        result = run_episode(episode, cid, pc, seed, sim_config,
                                             remote=remote)
                        key = BenchmarkReport.key(cid, episode.link_diameter, v)
                        cell = report.cells.setdefault(
                            key, {"successes": 0, "collisions": 0, "timeouts": 0,
                                  "trials": 0, "flagged": 0})
                        if result.flagged:
                            cell["flagged"] += 1
                            report.flagged_episodes += 1
                            continue
                        cell["trials"] += 1
                        cell["successes"] += int(result.success)
                        cell["collisions"] += int(result.collided)
                        cell["timeouts"] += int(result.timed_out)
                        if progress is not None:
                            progress(episode, cid, v, trial, result)
    finally:
        if remote is not None:
            remote.close()
    return report
