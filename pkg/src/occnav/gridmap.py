"""Robot-frame occupancy grids and goal heatmaps.

Grids are 240x240 at 0.1 m/cell; the robot sits at cell (120, 120) heading
along the +column axis, so the grid spans 12 m in every direction. Cell
classes: -1 unknown, 0 free, 1 occupied.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParseError
from .geometry import Polygon, VisibilityRegion, polygon_scanline_mask, visibility_region
from .pose import Pose, robot_to_world, world_to_robot

log = logging.getLogger(__name__)

GRID_SIZE = 240
RESOLUTION = 0.1
CENTER = 120
SENSOR_RANGE = 12.0
UNKNOWN, FREE, OCCUPIED = -1, 0, 1

# A cell is occupied when visible wall passes within half a cell diagonal.
_WALL_REACH = 0.5 * RESOLUTION * math.sqrt(2.0)
# Robot-frame coordinates of the cell-center lattice.
_AXIS = (np.arange(GRID_SIZE) - CENTER) * RESOLUTION

_MAGIC = b"PFG1"
_HEADER = struct.Struct("<4sBBHHf2x")  # 16 bytes: magic, kind, reserved, rows, cols, res, pad
KIND_OCCUPANCY = 0
KIND_HEATMAP = 1


@dataclass(frozen=True)
class OccupancyGrid:
    """Three-class robot-frame grid; `pose` records the frame anchor if known."""

    cells: np.ndarray
    resolution: float = RESOLUTION
    pose: Pose | None = None

    def __post_init__(self) -> None:
        cells = np.asarray(self.cells, dtype=np.int8)
        if cells.shape != (GRID_SIZE, GRID_SIZE):
            raise DomainError(f"grid must be {GRID_SIZE}x{GRID_SIZE}, got {cells.shape}")
        if not np.isin(cells, (UNKNOWN, FREE, OCCUPIED)).all():
            raise DomainError("grid cells must be in {-1, 0, 1}")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def unknown(cls) -> "OccupancyGrid":
        return cls(np.full((GRID_SIZE, GRID_SIZE), UNKNOWN, dtype=np.int8))


@dataclass(frozen=True)
class GoalHeatmap:
    """Gaussian goal likelihood over the grid, values in [0, 1]."""

    values: np.ndarray
    sigma_cells: float | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float32)
        if v.shape != (GRID_SIZE, GRID_SIZE):
            raise DomainError(f"heatmap must be {GRID_SIZE}x{GRID_SIZE}, got {v.shape}")
        if not np.isfinite(v).all() or v.min() < 0.0 or v.max() > 1.0:
            raise DomainError("heatmap values must be finite and in [0, 1]")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FrontierSet:
    """Robot-frame frontier points with their provenance kind."""

    points: np.ndarray               # (N, 2)
    kinds: tuple[str, ...]           # "window" | "arc" per point

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            pts = pts.reshape(0, 2)
        if pts.shape[1] != 2 or len(pts) != len(self.kinds):
            raise DomainError("frontier points and kinds must align")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "kinds", tuple(self.kinds))

    def __len__(self) -> int:
        return len(self.points)


def point_to_cell(point) -> tuple[int, int]:
    """Robot-frame point -> (row, col) of the nearest cell center."""
    x, y = float(point[0]), float(point[1])
    return CENTER + int(round(y / RESOLUTION)), CENTER + int(round(x / RESOLUTION))


def cell_to_point(row: int, col: int) -> np.ndarray:
    return np.array([(col - CENTER) * RESOLUTION, (row - CENTER) * RESOLUTION])


def in_grid(row: int, col: int) -> bool:
    return 0 <= row < GRID_SIZE and 0 <= col < GRID_SIZE


def _free_mask(region: VisibilityRegion, pose: Pose) -> np.ndarray:
    boundary_rf = world_to_robot(region.boundary, pose)
    return polygon_scanline_mask(boundary_rf, _AXIS, _AXIS)


def _occupied_mask(region: VisibilityRegion, pose: Pose) -> np.ndarray:
    """Cells whose centers lie within half a diagonal of visible wall."""
    occ = np.zeros((GRID_SIZE, GRID_SIZE), dtype=bool)
    lo, hi = _AXIS[0], _AXIS[-1]
    for chain in region.wall_segments:
        seg = world_to_robot(chain, pose)
        for k in range(len(seg) - 1):
            a, b = seg[k], seg[k + 1]
            x0 = max(min(a[0], b[0]) - _WALL_REACH, lo)
            x1 = min(max(a[0], b[0]) + _WALL_REACH, hi)
            y0 = max(min(a[1], b[1]) - _WALL_REACH, lo)
            y1 = min(max(a[1], b[1]) + _WALL_REACH, hi)
            if x0 > x1 or y0 > y1:
                continue
            c0 = int(math.ceil((x0 / RESOLUTION) + CENTER - 1e-9))
            c1 = int(math.floor((x1 / RESOLUTION) + CENTER + 1e-9))
            r0 = int(math.ceil((y0 / RESOLUTION) + CENTER - 1e-9))
            r1 = int(math.floor((y1 / RESOLUTION) + CENTER + 1e-9))
            if c1 < c0 or r1 < r0:
                continue
            xs = _AXIS[c0:c1 + 1]
            ys = _AXIS[r0:r1 + 1]
            ab = b - a
            den = float(ab @ ab)
            px = xs[None, :] - a[0]
            py = ys[:, None] - a[1]
            if den < 1e-18:
                d2 = px ** 2 + py ** 2
            else:
                t = np.clip((px * ab[0] + py * ab[1]) / den, 0.0, 1.0)
                d2 = (px - t * ab[0]) ** 2 + (py - t * ab[1]) ** 2
            occ[r0:r1 + 1, c0:c1 + 1] |= d2 <= _WALL_REACH ** 2
    return occ


def level1_scan(env: Polygon, robot_pose: Pose,
                range_m: float = SENSOR_RANGE) -> tuple[VisibilityRegion, OccupancyGrid]:
    """Visibility region and its Level-1 rasterization for one pose."""
    if not bool(env.contains(robot_pose.xy[None, :])[0]):
        raise DomainError("robot pose must lie strictly inside the environment")
    region = visibility_region(env, robot_pose.xy, range_m)
    cells = np.full((GRID_SIZE, GRID_SIZE), UNKNOWN, dtype=np.int8)
    cells[_free_mask(region, robot_pose)] = FREE
    cells[_occupied_mask(region, robot_pose)] = OCCUPIED
    return region, OccupancyGrid(cells, pose=robot_pose)


def rasterize_level1(env: Polygon, robot_pose: Pose) -> OccupancyGrid:
    """Level-1 grid: free where visible, occupied on visible walls, else unknown."""
    return level1_scan(env, robot_pose)[1]


def extract_frontiers(grid: OccupancyGrid, region: VisibilityRegion,
                      mode: str = "all") -> FrontierSet:
    """Frontier points of a Level-1 scan.

    Both endpoints of every occlusion window plus samples every 1.0 m along
    range-limit arcs (mode "occlusion" drops the arc samples), each nudged
    0.05 m toward the viewpoint and deduplicated within 0.1 m.
    """
    if grid.pose is None:
        raise DomainError("grid must carry the pose it was rasterized at")
    if mode not in ("all", "occlusion"):
        raise DomainError(f"unknown frontier mode {mode!r}")
    vp = region.viewpoint
    cands: list[tuple[np.ndarray, str]] = []
    for w in region.windows:
        cands.append((w[0], "window"))
        cands.append((w[1], "window"))
    if mode == "all":
        for arc in region.arcs:
            steps = np.linalg.norm(np.diff(arc, axis=0), axis=1)
            s = np.concatenate([[0.0], np.cumsum(steps)])
            for target in np.arange(0.0, s[-1], 1.0):
                i = int(np.searchsorted(s, target, side="right") - 1)
                i = min(i, len(arc) - 2)
                frac = 0.0 if steps[i] < 1e-12 else (target - s[i]) / steps[i]
                cands.append((arc[i] + frac * (arc[i + 1] - arc[i]), "arc"))

    pts: list[np.ndarray] = []
    kinds: list[str] = []
    for p, kind in cands:
        d = vp - p
        n = np.linalg.norm(d)
        q = p + (0.05 / n) * d if n > 1e-9 else p
        if any(np.linalg.norm(q - prev) < 0.1 for prev in pts):
            continue
        pts.append(q)
        kinds.append(kind)
    arr = np.asarray(pts) if pts else np.empty((0, 2))
    return FrontierSet(world_to_robot(arr, grid.pose) if len(arr) else arr, tuple(kinds))


def build_level2(env: Polygon, robot_pose: Pose, frontiers: FrontierSet,
                 l1: tuple[VisibilityRegion, OccupancyGrid] | None = None,
                 range_m: float = SENSOR_RANGE) -> OccupancyGrid:
    """Level-2 grid: Level-1 plus everything visible from the frontier points.

    Frontier scans only refine cells Level-1 left unknown (occupied beats
    free there), so Level-1 free cells are always Level-2 free. Frontier
    points that fall outside the environment are skipped and counted.
    """
    region, l1_grid = l1 if l1 is not None else level1_scan(env, robot_pose, range_m)
    cells = l1_grid.cells.copy()
    free_u = np.zeros((GRID_SIZE, GRID_SIZE), dtype=bool)
    occ_u = np.zeros((GRID_SIZE, GRID_SIZE), dtype=bool)
    world_pts = robot_to_world(frontiers.points, robot_pose) if len(frontiers) else []
    skipped = 0
    for pt in world_pts:
        if not bool(env.contains(pt[None, :])[0]):
            skipped += 1
            continue
        reg = visibility_region(env, pt, range_m)
        free_u |= _free_mask(reg, robot_pose)
        occ_u |= _occupied_mask(reg, robot_pose)
    if skipped:
        log.warning("build_level2: skipped %d frontier points outside the environment", skipped)
    unknown = cells == UNKNOWN
    cells[unknown & free_u] = FREE
    cells[unknown & occ_u] = OCCUPIED
    return OccupancyGrid(cells, pose=robot_pose)


def goal_heatmap(goal, sigma_cells: float) -> GoalHeatmap:
    """Gaussian heatmap peaked at the cell containing the robot-frame goal."""
    if not sigma_cells > 0:
        raise DomainError("sigma_cells must be positive")
    r, c = point_to_cell(goal)
    if not in_grid(r, c):
        raise DomainError(f"goal {tuple(np.round(goal, 3))} falls outside the grid")
    rows = np.arange(GRID_SIZE)[:, None]
    cols = np.arange(GRID_SIZE)[None, :]
    d2 = (rows - r) ** 2 + (cols - c) ** 2
    values = np.exp(-d2 / (2.0 * sigma_cells ** 2)).astype(np.float32)
    return GoalHeatmap(values, sigma_cells=float(sigma_cells))


def extract_goal(heatmap: GoalHeatmap, min_peak: float = 0.3) -> np.ndarray | None:
    """Argmax cell as a robot-frame point, or None below `min_peak`.

    Ties resolve to the smallest (row, col) in row-major order.
    """
    flat = int(np.argmax(heatmap.values))
    r, c = divmod(flat, GRID_SIZE)
    if float(heatmap.values[r, c]) < min_peak:
        return None
    return cell_to_point(r, c)


def furthest_free_point(points_rf: np.ndarray, grid: OccupancyGrid) -> tuple[np.ndarray, int] | None:
    """Last point of a robot-frame polyline whose grid cell is free."""
    pts = np.atleast_2d(np.asarray(points_rf, dtype=float))
    for i in range(len(pts) - 1, -1, -1):
        r, c = point_to_cell(pts[i])
        if in_grid(r, c) and grid.cells[r, c] == FREE:
            return pts[i].copy(), i
    return None


# ---------------------------------------------------------------------------
# Binary serialization


def grid_to_bytes(grid: OccupancyGrid | GoalHeatmap) -> bytes:
    if isinstance(grid, OccupancyGrid):
        header = _HEADER.pack(_MAGIC, KIND_OCCUPANCY, 0, GRID_SIZE, GRID_SIZE, grid.resolution)
        return header + grid.cells.astype(np.int8).tobytes()
    if isinstance(grid, GoalHeatmap):
        header = _HEADER.pack(_MAGIC, KIND_HEATMAP, 0, GRID_SIZE, GRID_SIZE, RESOLUTION)
        return header + grid.values.astype("<f4").tobytes()
    raise DomainError(f"cannot serialize {type(grid).__name__}")


def grid_from_bytes(data: bytes) -> OccupancyGrid | GoalHeatmap:
    """Parse the binary grid format; errors name the offending byte offset."""
    if len(data) < _HEADER.size:
        raise ParseError(f"truncated header: {len(data)} bytes at offset 0")
    magic, kind, _reserved, rows, cols, res = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise ParseError(f"bad magic {magic!r} at offset 0")
    if kind not in (KIND_OCCUPANCY, KIND_HEATMAP):
        raise ParseError(f"unknown grid kind {kind} at offset 4")
    if rows != GRID_SIZE:
        raise ParseError(f"unsupported row count {rows} at offset 6")
    if cols != GRID_SIZE:
        raise ParseError(f"unsupported column count {cols} at offset 8")
    if not (res > 0 and math.isfinite(res)):
        raise ParseError(f"invalid resolution {res} at offset 10")
    payload = data[_HEADER.size:]
    n = rows * cols
    if kind == KIND_OCCUPANCY:
        if len(payload) != n:
            raise ParseError(f"payload length {len(payload)} != {n} at offset {_HEADER.size}")
        cells = np.frombuffer(payload, dtype=np.int8).reshape(rows, cols)
        bad = ~np.isin(cells, (UNKNOWN, FREE, OCCUPIED))
        if bad.any():
            off = _HEADER.size + int(np.flatnonzero(bad.ravel())[0])
            raise ParseError(f"illegal class byte at offset {off}")
        return OccupancyGrid(cells.copy(), resolution=float(res))
    if len(payload) != 4 * n:
        raise ParseError(f"payload length {len(payload)} != {4 * n} at offset {_HEADER.size}")
    values = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    bad = ~np.isfinite(values) | (values < 0.0) | (values > 1.0)
    if bad.any():
        off = _HEADER.size + 4 * int(np.flatnonzero(bad.ravel())[0])
        raise ParseError(f"heatmap value out of [0, 1] at offset {off}")
    return GoalHeatmap(values.copy())
