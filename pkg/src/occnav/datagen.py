"""Environment generation, episode sampling, and training-pair assembly.

Environments are simple polygons carved out of a blocked world: a random
spanning tree over a coarse lattice becomes corridors of random width at
0/45/90/135 degree orientations, and the free region's outer contour is the
polygon. Rejection sampling pins the sampled link diameter to a target.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage import measure

from .errors import DomainError, GenerationError, ParseError
from .geometry import (ClearanceField, LinkAnalysis, PathPolyline, Polygon,
                       link_analysis, signed_area, simplify_polyline)
from .gridmap import (FREE, GoalHeatmap, OccupancyGrid, build_level2, extract_frontiers,
                      furthest_free_point, goal_heatmap, grid_to_bytes, level1_scan,
                      point_to_cell, in_grid)
from .instruct import Instruction, derive_instructions, encode, instruction_from_json
from .pose import Pose, robot_to_world, world_to_robot

log = logging.getLogger(__name__)

_CARVE_RES = 0.05
_WORLD = 10.0  # environments live in [-10, 10]^2


@dataclass(frozen=True)
class Episode:
    """One navigation task: environment, endpoints, route, difficulty."""

    env: Polygon
    start: np.ndarray
    goal: np.ndarray
    route: PathPolyline
    link_diameter: int
    seed: int

    @property
    def episode_id(self) -> str:
        return f"ep{self.seed:08d}"


@dataclass(frozen=True)
class TrainingPair:
    """Supervision tuple for the map/subgoal forecaster."""

    l1: OccupancyGrid
    encoding: np.ndarray
    l2: OccupancyGrid
    heatmap: GoalHeatmap
    g2_robot_frame: np.ndarray
    pose: Pose
    episode_id: str
    sample_index: int
    aug_index: int = 0
    instructions: tuple[Instruction, ...] = ()

    @property
    def record_id(self) -> str:
        return f"{self.episode_id}_{self.sample_index:04d}_{self.aug_index}"


def _spanning_tree_edges(n_cols: int, n_rows: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Random spanning tree over the lattice, axis and diagonal neighbours."""
    nodes = n_cols * n_rows
    edges = []
    for r in range(n_rows):
        for c in range(n_cols):
            u = r * n_cols + c
            if c + 1 < n_cols:
                edges.append((u, u + 1))
            if r + 1 < n_rows:
                edges.append((u, u + n_cols))
            if c + 1 < n_cols and r + 1 < n_rows:
                # One diagonal per cell so corridors never cross mid-cell.
                if rng.random() < 0.5:
                    edges.append((u, u + n_cols + 1))
                else:
                    edges.append((u + 1, u + n_cols))
    order = rng.permutation(len(edges))
    parent = list(range(nodes))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = []
    for idx in order:
        u, v = edges[idx]
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            tree.append((u, v))
        if len(tree) == nodes - 1:
            break
    return tree


def _carve_polygon(rng: np.random.Generator, n_cols: int, n_rows: int,
                   keep_fraction: float = 1.0) -> Polygon:
    span = 2 * (_WORLD - 1.2)
    xs = np.linspace(-_WORLD + 1.2, _WORLD - 1.2, n_cols)
    ys = np.linspace(-_WORLD + 1.2, _WORLD - 1.2, n_rows)
    nodes = np.array([[x, y] for y in ys for x in xs])
    tree = _spanning_tree_edges(n_cols, n_rows, rng)
    if keep_fraction < 1.0 and len(tree) > 2:
        keep = max(2, int(round(keep_fraction * len(tree))))
        # Trim leaf edges first so the remainder stays connected.
        while len(tree) > keep:
            deg: dict[int, int] = {}
            for u, v in tree:
                deg[u] = deg.get(u, 0) + 1
                deg[v] = deg.get(v, 0) + 1
            leaves = [i for i, (u, v) in enumerate(tree) if deg[u] == 1 or deg[v] == 1]
            tree.pop(leaves[int(rng.integers(len(leaves)))])

    n = int(round(2 * _WORLD / _CARVE_RES)) + 1
    ax = -_WORLD + np.arange(n) * _CARVE_RES
    free = np.zeros((n, n), dtype=bool)
    gy, gx = np.meshgrid(ax, ax, indexing="ij")
    for u, v in tree:
        a, b = nodes[u], nodes[v]
        half = rng.uniform(0.8, 2.0) / 2.0
        lo = np.minimum(a, b) - half - _CARVE_RES
        hi = np.maximum(a, b) + half + _CARVE_RES
        i0, i1 = np.searchsorted(ax, [lo[1], hi[1]])
        j0, j1 = np.searchsorted(ax, [lo[0], hi[0]])
        px = gx[i0:i1, j0:j1] - a[0]
        py = gy[i0:i1, j0:j1] - a[1]
        ab = b - a
        den = float(ab @ ab)
        t = np.clip((px * ab[0] + py * ab[1]) / den, 0.0, 1.0)
        d2 = (px - t * ab[0]) ** 2 + (py - t * ab[1]) ** 2
        free[i0:i1, j0:j1] |= d2 <= half * half

    # Keep the polygon simply connected: blocked pockets fully enclosed by
    # corridors would become holes, so carve them free as well.
    blocked_labels, n_lab = ndimage.label(~free)
    border = np.unique(np.concatenate([
        blocked_labels[0, :], blocked_labels[-1, :],
        blocked_labels[:, 0], blocked_labels[:, -1]]))
    enclosed = np.setdiff1d(np.arange(1, n_lab + 1), border)
    if enclosed.size:
        free |= np.isin(blocked_labels, enclosed)

    contours = measure.find_contours(free.astype(float), 0.5)
    if not contours:
        raise GenerationError("carving produced no free region")
    contour = max(contours, key=len)
    world = np.stack([-_WORLD + contour[:, 1] * _CARVE_RES,
                      -_WORLD + contour[:, 0] * _CARVE_RES], axis=1)
    if np.linalg.norm(world[0] - world[-1]) < 1e-9:
        world = world[:-1]
    world = simplify_polyline(np.vstack([world, world[:1]]), tol=0.03)[:-1]
    if signed_area(world) < 0:
        world = world[::-1]
    return Polygon(np.clip(world, -_WORLD, _WORLD))


# Lattice shapes that tend to reach each target diameter quickly.
_LATTICE_FOR_TARGET = {
    4: [(3, 3), (4, 3)],
    5: [(4, 3), (4, 4)],
    6: [(4, 4), (5, 4)],
    7: [(5, 4), (5, 5)],
}


def _generate_env_analysis(seed: int, target_link_diameter: int,
                           link_samples: int = 256,
                           max_rejects: int = 1000) -> tuple[Polygon, LinkAnalysis]:
    if target_link_diameter < 1:
        raise DomainError("target link diameter must be >= 1")
    rng = np.random.default_rng(seed)
    shapes = _LATTICE_FOR_TARGET.get(target_link_diameter, [(5, 5)])
    for _ in range(max_rejects):
        n_cols, n_rows = shapes[int(rng.integers(len(shapes)))]
        keep = float(rng.uniform(0.75, 1.0))
        try:
            poly = _carve_polygon(rng, n_cols, n_rows, keep)
            analysis = link_analysis(poly, link_samples)
        except (DomainError, GenerationError):
            continue
        if analysis.diameter == target_link_diameter:
            return poly, analysis
    raise GenerationError(
        f"no polygon with link diameter {target_link_diameter} after {max_rejects} attempts")


def generate_env(seed: int, target_link_diameter: int, link_samples: int = 256,
                 max_rejects: int = 1000) -> Polygon:
    """Deterministic corridor-maze polygon with the requested link diameter."""
    return _generate_env_analysis(seed, target_link_diameter, link_samples, max_rejects)[0]


def sample_episode(env: Polygon, seed: int, link_samples: int = 256,
                   min_clearance: float = 0.3,
                   analysis: LinkAnalysis | None = None) -> Episode:
    """Episode whose endpoints are the farthest interior pair by link distance.

    Ties break toward the largest Euclidean separation, then lowest indices.
    """
    if analysis is None:
        analysis = link_analysis(env, link_samples)
    k = analysis.sample_count
    pts = analysis.points[:k]
    ok = analysis.clearances[:k] >= min_clearance
    d = analysis.distances[:k, :k].copy()
    d[~ok, :] = -np.inf
    d[:, ~ok] = -np.inf
    d[~np.isfinite(d)] = -np.inf
    best = d.max()
    if not np.isfinite(best) or best < 1:
        raise GenerationError("no valid start/goal pair with the required clearance")
    ii, jj = np.nonzero(d == best)
    upper = ii < jj
    ii, jj = ii[upper], jj[upper]
    eu = np.linalg.norm(pts[ii] - pts[jj], axis=1)
    pick = int(np.argmax(eu))
    start, goal = pts[ii[pick]], pts[jj[pick]]
    route = ClearanceField(env).path(start, goal)
    return Episode(env=env, start=start, goal=goal, route=route,
                   link_diameter=analysis.diameter, seed=seed)


def make_episode(seed: int, target_link_diameter: int, link_samples: int = 256,
                 min_clearance: float = 0.3) -> Episode:
    """Generate an environment and its episode sharing one link analysis."""
    env, analysis = _generate_env_analysis(seed, target_link_diameter, link_samples)
    return sample_episode(env, seed, link_samples, min_clearance, analysis=analysis)


def _tangent_heading(route: PathPolyline, s: float) -> float:
    pts = route.points
    arc = route.arc_positions()
    i = int(np.searchsorted(arc, s, side="right")) - 1
    i = max(0, min(i, len(pts) - 2))
    d = pts[i + 1] - pts[i]
    return math.atan2(d[1], d[0])


def _perturb_along_free_boundary(l2: OccupancyGrid, g2_rf: np.ndarray,
                                 rng: np.random.Generator,
                                 max_shift: float = 1.5,
                                 tries: int = 8) -> np.ndarray | None:
    """Move the subgoal along the Level-2 free-space boundary, staying free."""
    free = (l2.cells == FREE).astype(float)
    contours = measure.find_contours(free, 0.5)
    if not contours:
        return None
    r0, c0 = point_to_cell(g2_rf)
    target = np.array([r0, c0], dtype=float)
    contour = min(contours, key=lambda c: np.linalg.norm(c - target, axis=1).min())
    d = np.linalg.norm(contour - target, axis=1)
    i0 = int(np.argmin(d))
    steps = np.linalg.norm(np.diff(contour, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(steps)]) * 0.1  # cells -> meters
    total = arc[-1]
    if total < 1e-6:
        return None
    for _ in range(tries):
        shift = float(rng.uniform(-max_shift, max_shift))
        s = (arc[i0] + shift) % total
        j = int(np.searchsorted(arc, s, side="right")) - 1
        j = max(0, min(j, len(contour) - 1))
        rc = contour[j]
        # Nudge toward the nearest free cell around the contour point.
        r_base, c_base = int(round(rc[0])), int(round(rc[1]))
        best = None
        for dr in range(-2, 3):
            for dc in range(-2, 3):
                r, c = r_base + dr, c_base + dc
                if in_grid(r, c) and l2.cells[r, c] == FREE:
                    dd = dr * dr + dc * dc
                    if best is None or dd < best[0]:
                        best = (dd, r, c)
        if best is None:
            continue
        _, r, c = best
        if (r, c) == (r0, c0):
            continue
        return np.array([(c - 120) * 0.1, (r - 120) * 0.1])
    return None


def _aug_route(route: PathPolyline, s_pose: float, s_g2: float,
               g2p_world: np.ndarray) -> np.ndarray:
    """Route prefix redirected to a perturbed subgoal for re-derivation."""
    arc = route.arc_positions()
    cut = max(s_pose, s_g2 - 1.5)
    keep = (arc >= s_pose - 1e-9) & (arc <= cut)
    pts = route.points[keep]
    if len(pts) == 0:
        pts = route.points[np.searchsorted(arc, s_pose, side="right") - 1:][:1]
    return np.vstack([pts, g2p_world[None, :]])


def make_training_pairs(episode: Episode, stride_m: float = 1.0,
                        augmentations_per_pose: int = 2,
                        sigma_cells: float = 5.0, max_slots: int = 2,
                        frontier_mode: str = "all",
                        rng: np.random.Generator | None = None) -> list[TrainingPair]:
    """Sample poses along the route and build (L1, E, L2, heatmap) tuples.

    Each pose contributes one pair plus `augmentations_per_pose` variants
    whose subgoal is shifted along the Level-2 free boundary (same L1/L2
    bytes, new heatmap and re-derived instructions). Poses with no
    Level-2-free route point ahead are skipped and counted.
    """
    if rng is None:
        rng = np.random.default_rng(episode.seed)
    route = episode.route
    arc = route.arc_positions()
    total = float(arc[-1])
    pairs: list[TrainingPair] = []
    skipped = 0
    stations = np.arange(0.0, max(total - 0.5, stride_m / 2), stride_m)
    for k, s in enumerate(stations):
        x = float(np.interp(s, arc, route.points[:, 0]))
        y = float(np.interp(s, arc, route.points[:, 1]))
        pose = Pose(x, y, _tangent_heading(route, s))
        if not bool(episode.env.contains(pose.xy[None, :])[0]):
            skipped += 1
            continue
        region, l1 = level1_scan(episode.env, pose)
        frontiers = extract_frontiers(l1, region, mode=frontier_mode)
        l2 = build_level2(episode.env, pose, frontiers, l1=(region, l1))
        route_rf = world_to_robot(route.points, pose)
        hit = furthest_free_point(route_rf, l2)
        if hit is None:
            skipped += 1
            continue
        g2_rf, g2_idx = hit
        s_g2 = float(arc[g2_idx])
        instructions = derive_instructions(route, pose, horizon_m=max(s_g2 - s, 0.0),
                                           max_slots=max_slots)
        pairs.append(TrainingPair(
            l1=l1, encoding=encode(instructions, max_slots), l2=l2,
            heatmap=goal_heatmap(g2_rf, sigma_cells), g2_robot_frame=g2_rf,
            pose=pose, episode_id=episode.episode_id, sample_index=k,
            instructions=tuple(instructions)))
        for a in range(1, augmentations_per_pose + 1):
            g2p_rf = _perturb_along_free_boundary(l2, g2_rf, rng)
            if g2p_rf is None:
                skipped += 1
                continue
            g2p_world = robot_to_world(g2p_rf, pose)
            aug_path = _aug_route(route, s, s_g2, g2p_world)
            ins = derive_instructions(aug_path, pose, horizon_m=np.inf, max_slots=max_slots)
            pairs.append(TrainingPair(
                l1=l1, encoding=encode(ins, max_slots), l2=l2,
                heatmap=goal_heatmap(g2p_rf, sigma_cells), g2_robot_frame=g2p_rf,
                pose=pose, episode_id=episode.episode_id, sample_index=k,
                aug_index=a, instructions=tuple(ins)))
    if skipped:
        log.debug("episode %s: skipped %d pose/augmentation slots", episode.episode_id, skipped)
    return pairs


# ---------------------------------------------------------------------------
# Dataset I/O


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def _split_of(episode_id: str) -> str:
    h = int.from_bytes(hashlib.sha256(episode_id.encode()).digest()[:8], "big") % 100
    return "train" if h < 90 else ("val" if h < 95 else "test")


def write_dataset(pairs: list[TrainingPair], directory: str | Path,
                  config: dict | None = None, seeds: list[int] | None = None) -> dict:
    """Write records plus a manifest; returns the manifest dict.

    Layout: `manifest.json` and `records/<episode>_<index>_<aug>.{l1,l2,hm}.pfg`
    with a JSON sidecar per record. Fails on duplicate record ids.
    """
    directory = Path(directory)
    records_dir = directory / "records"
    records_dir.mkdir(parents=True, exist_ok=True)
    seen: set[str] = set()
    record_ids = []
    episodes = sorted({p.episode_id for p in pairs})
    for p in pairs:
        rid = p.record_id
        if rid in seen:
            raise DomainError(f"duplicate record id {rid}")
        seen.add(rid)
        record_ids.append(rid)
        (records_dir / f"{rid}.l1.pfg").write_bytes(grid_to_bytes(p.l1))
        (records_dir / f"{rid}.l2.pfg").write_bytes(grid_to_bytes(p.l2))
        (records_dir / f"{rid}.hm.pfg").write_bytes(grid_to_bytes(p.heatmap))
        meta = {
            "encoding": [float(v) for v in p.encoding],
            "g2": [float(p.g2_robot_frame[0]), float(p.g2_robot_frame[1])],
            "pose": {"x": p.pose.x, "y": p.pose.y, "theta": p.pose.theta},
            "episode_id": p.episode_id,
            "sample_index": p.sample_index,
            "aug_index": p.aug_index,
            "instructions": [i.to_json() for i in p.instructions],
        }
        (records_dir / f"{rid}.meta.json").write_text(canonical_json(meta) + "\n")
    cfg = config or {}
    manifest = {
        "format": "occnav-dataset-v1",
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seeds": seeds or [],
        "records": sorted(record_ids),
        "splits": {s: [e for e in episodes if _split_of(e) == s]
                   for s in ("train", "val", "test")},
        "counts": {"pairs": len(record_ids), "episodes": len(episodes)},
    }
    (directory / "manifest.json").write_text(canonical_json(manifest) + "\n")
    return manifest


def read_manifest(directory: str | Path) -> dict:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise ParseError(f"no manifest.json under {directory}")
    return json.loads(path.read_text())


def read_record(directory: str | Path, record_id: str) -> dict:
    """Load one record's grids, heatmap, and sidecar metadata."""
    from .gridmap import grid_from_bytes

    rd = Path(directory) / "records"
    out = {"meta": json.loads((rd / f"{record_id}.meta.json").read_text())}
    out["l1"] = grid_from_bytes((rd / f"{record_id}.l1.pfg").read_bytes())
    out["l2"] = grid_from_bytes((rd / f"{record_id}.l2.pfg").read_bytes())
    out["heatmap"] = grid_from_bytes((rd / f"{record_id}.hm.pfg").read_bytes())
    return out
