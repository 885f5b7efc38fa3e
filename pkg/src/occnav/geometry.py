"""Planar geometry over simple polygons.

Visibility regions via an angular sweep with ray-segment intersection,
clearance-maximizing center paths on a distance-transform raster, and
link distances on sampled visibility graphs. All coordinates are meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import csgraph

from .errors import DomainError, PlanningError

# Angular nudge used to cast shadow rays just past each vertex.
_RAY_EPS = 1e-7
# Range-circle boundary is polygonized at this angular resolution.
_ARC_STEP = math.radians(2.0)
# Radial jumps shallower than this are boundary noise, not occlusion windows.
_WINDOW_MIN_DEPTH = 0.1
_TOL = 1e-9


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError(f"expected an (N, 2) point array, got shape {pts.shape}")
    return pts


def signed_area(vertices: np.ndarray) -> float:
    """Shoelace area; positive for counter-clockwise rings."""
    v = _as_points(vertices)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def points_in_polygon(points, vertices) -> np.ndarray:
    """Crossing-number containment test, vectorized over points.

    Points exactly on the boundary are not reliably classified; combine
    with `distance_to_boundary` when that matters.
    """
    pts = _as_points(np.atleast_2d(points))
    v = _as_points(vertices)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    x1, y1 = v[:, 0], v[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    for i in range(len(v)):
        cond = (y1[i] <= y) != (y2[i] <= y)
        if not cond.any():
            continue
        xs = x1[i] + (y[cond] - y1[i]) * (x2[i] - x1[i]) / (y2[i] - y1[i])
        inside[cond] ^= x[cond] < xs
    return inside


def distance_to_boundary(points, vertices, chunk: int = 4096) -> np.ndarray:
    """Exact unsigned distance from each point to the polygon boundary."""
    pts = _as_points(np.atleast_2d(points))
    v = _as_points(vertices)
    a = v
    b = np.roll(v, -1, axis=0)
    ab = b - a                                   # (E, 2)
    denom = np.einsum("ij,ij->i", ab, ab)        # (E,)
    denom = np.where(denom < _TOL, 1.0, denom)
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        e = slice(s, s + chunk)
        ap = pts[e, None, :] - a[None, :, :]     # (p, E, 2)
        t = np.clip(np.einsum("pej,ej->pe", ap, ab) / denom, 0.0, 1.0)
        closest = a[None, :, :] + t[..., None] * ab[None, :, :]
        d = np.linalg.norm(pts[e, None, :] - closest, axis=2)
        out[e] = d.min(axis=1)
    return out


def strictly_inside(points, vertices, margin: float = _TOL) -> np.ndarray:
    pts = np.atleast_2d(points)
    return points_in_polygon(pts, vertices) & (distance_to_boundary(pts, vertices) > margin)


def polygon_scanline_mask(vertices: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Boolean (len(ys), len(xs)) mask of lattice points inside the polygon.

    Half-open parity rule per row; robust to vertices landing on rows.
    """
    v = _as_points(vertices)
    x1, y1 = v[:, 0], v[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    mask = np.zeros((len(ys), len(xs)), dtype=bool)
    for r, y in enumerate(ys):
        cross = (y1 <= y) != (y2 <= y)
        if not cross.any():
            continue
        xc = x1[cross] + (y - y1[cross]) * (x2[cross] - x1[cross]) / (y2[cross] - y1[cross])
        xc.sort()
        # Parity fill between successive crossings.
        for lo, hi in zip(xc[0::2], xc[1::2]):
            i = np.searchsorted(xs, lo, side="left")
            j = np.searchsorted(xs, hi, side="left")
            mask[r, i:j] = True
    return mask


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def segments_cross_edges(p: np.ndarray, q: np.ndarray, vertices: np.ndarray,
                         chunk: int = 2048) -> np.ndarray:
    """Whether each segment p[i]-q[i] properly crosses any polygon edge.

    Proper means the interiors intersect; shared endpoints and grazing
    contacts do not count.
    """
    p = _as_points(p)
    q = _as_points(q)
    v = _as_points(vertices)
    a = v[None, :, :]
    b = np.roll(v, -1, axis=0)[None, :, :]
    out = np.zeros(len(p), dtype=bool)
    for s in range(0, len(p), chunk):
        e = slice(s, s + chunk)
        pp = p[e][:, None, :]
        qq = q[e][:, None, :]
        d1 = _cross(qq - pp, a - pp)
        d2 = _cross(qq - pp, b - pp)
        d3 = _cross(b - a, pp - a)
        d4 = _cross(b - a, qq - a)
        proper = ((d1 > _TOL) & (d2 < -_TOL) | (d1 < -_TOL) & (d2 > _TOL)) & \
                 ((d3 > _TOL) & (d4 < -_TOL) | (d3 < -_TOL) & (d4 > _TOL))
        out[e] = proper.any(axis=1)
    return out


@dataclass(frozen=True)
class Polygon:
    """Simple polygon: CCW vertices in meters, implicit closure."""

    vertices: np.ndarray

    def __post_init__(self) -> None:
        v = _as_points(self.vertices).copy()
        if len(v) >= 2 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        if len(v) < 3:
            raise DomainError("polygon needs at least 3 distinct vertices")
        if not np.isfinite(v).all():
            raise DomainError("polygon vertices must be finite")
        if signed_area(v) <= 0:
            raise DomainError("polygon must be counter-clockwise with positive area")
        if self._self_intersects(v):
            raise DomainError("polygon must be simple (no self-intersections)")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @staticmethod
    def _self_intersects(v: np.ndarray) -> bool:
        n = len(v)
        if n > 2000:
            raise DomainError("polygon too large for simplicity check")
        i, j = np.triu_indices(n, k=2)
        keep = ~((i == 0) & (j == n - 1))
        i, j = i[keep], j[keep]
        p, q = v[i], v[(i + 1) % n]
        r, s = v[j], v[(j + 1) % n]
        d1 = _cross(q - p, r - p)
        d2 = _cross(q - p, s - p)
        d3 = _cross(s - r, p - r)
        d4 = _cross(s - r, q - r)
        proper = ((d1 > _TOL) & (d2 < -_TOL) | (d1 < -_TOL) & (d2 > _TOL)) & \
                 ((d3 > _TOL) & (d4 < -_TOL) | (d3 < -_TOL) & (d4 > _TOL))
        return bool(proper.any())

    @cached_property
    def area(self) -> float:
        return signed_area(self.vertices)

    @cached_property
    def bounds(self) -> tuple[float, float, float, float]:
        v = self.vertices
        return float(v[:, 0].min()), float(v[:, 1].min()), float(v[:, 0].max()), float(v[:, 1].max())

    def contains(self, points, margin: float = _TOL) -> np.ndarray:
        """Strict interior test (boundary excluded)."""
        return strictly_inside(points, self.vertices, margin)

    def to_json(self) -> dict:
        return {"vertices": self.vertices.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Polygon":
        if "vertices" not in obj:
            raise DomainError("polygon JSON needs a 'vertices' key")
        return cls(np.asarray(obj["vertices"], dtype=float))


@dataclass(frozen=True)
class VisibilityRegion:
    """Star-shaped region visible from a viewpoint, with its non-wall boundary.

    `windows` are occlusion chords (near point first), `arcs` are range-limit
    polylines, and `wall_segments` are the visible portions of the polygon
    boundary (used to rasterize occupied cells).
    """

    boundary: np.ndarray
    windows: tuple[np.ndarray, ...]
    arcs: tuple[np.ndarray, ...]
    wall_segments: tuple[np.ndarray, ...]
    viewpoint: np.ndarray
    range_m: float

    @property
    def area(self) -> float:
        return signed_area(self.boundary)


def visibility_region(env: Polygon, viewpoint, range_m: float) -> VisibilityRegion:
    """Region of `env` visible from `viewpoint` within `range_m`.

    Angular sweep: rays toward every vertex (plus shadow rays just past it)
    and probe rays every 2 degrees; each ray is clipped at the nearest edge
    hit or at `range_m`. Consecutive hits are classified into wall runs,
    occlusion windows, and range arcs.
    """
    vp = np.asarray(viewpoint, dtype=float)
    if vp.shape != (2,):
        raise DomainError("viewpoint must be a 2-D point")
    if not (range_m > 0 and math.isfinite(range_m)):
        raise DomainError("range must be positive and finite")
    if not bool(env.contains(vp[None, :], margin=1e-9)[0]):
        raise DomainError("viewpoint must lie strictly inside the polygon")

    verts = env.vertices
    rel = verts - vp
    vert_ang = np.arctan2(rel[:, 1], rel[:, 0])
    probes = np.arange(-math.pi, math.pi, _ARC_STEP)
    angles = np.concatenate([vert_ang - _RAY_EPS, vert_ang, vert_ang + _RAY_EPS, probes])
    angles = np.mod(angles + math.pi, 2 * math.pi) - math.pi
    order = np.argsort(angles, kind="stable")
    angles = angles[order]
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)     # (R, 2)

    a = verts
    e = np.roll(verts, -1, axis=0) - a                             # (E, 2)
    ao = a[None, :, :] - vp[None, None, :]                         # (1, E, 2)
    denom = _cross(dirs[:, None, :], e[None, :, :])                # (R, E)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(ao, e[None, :, :]) / denom
        s = _cross(ao, dirs[:, None, :]) / denom
    valid = (np.abs(denom) > 1e-14) & (s >= -1e-9) & (s <= 1 + 1e-9) & (t > 1e-9)
    t = np.where(valid, t, np.inf)
    edge_id = np.argmin(t, axis=1)
    t_hit = t[np.arange(len(t)), edge_id]
    clipped = t_hit > range_m
    dist = np.minimum(t_hit, range_m)
    dist = np.where(np.isfinite(dist), dist, range_m)
    pts = vp + dist[:, None] * dirs
    edge_id = np.where(clipped, -1, edge_id)

    # Drop hits that duplicate their predecessor (coincident angles).
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = (np.abs(np.diff(angles)) > 1e-12) | \
               (np.linalg.norm(np.diff(pts, axis=0), axis=1) > 1e-12)
    pts, dist, edge_id = pts[keep], dist[keep], edge_id[keep]

    n = len(pts)
    n_edges = len(verts)
    eid_j = np.roll(edge_id, -1)
    pts_j = np.roll(pts, -1, axis=0)
    dist_j = np.roll(dist, -1)
    is_arc = edge_id == -1
    arc_j = np.roll(is_arc, -1)
    gap = np.linalg.norm(pts_j - pts, axis=1)
    radial = np.abs(dist_j - dist)
    same = edge_id == eid_j
    adjacent = np.isin((edge_id - eid_j) % n_edges, (1, n_edges - 1))

    both_wall = ~is_arc & ~arc_j
    both_arc = is_arc & arc_j
    wall_cont = both_wall & (same | (gap < _WINDOW_MIN_DEPTH)
                             | (adjacent & (radial < _WINDOW_MIN_DEPTH)))
    wall_window = both_wall & ~wall_cont
    transition = is_arc ^ arc_j
    wall_dist = np.where(is_arc, dist_j, dist)
    trans_window = transition & (range_m - wall_dist >= _WINDOW_MIN_DEPTH)

    windows: list[np.ndarray] = []
    for i in np.flatnonzero(wall_window):
        j = (i + 1) % n
        near, far = (i, j) if dist[i] <= dist[j] else (j, i)
        windows.append(np.stack([pts[near], pts[far]]))
    for i in np.flatnonzero(trans_window):
        j = (i + 1) % n
        wall_i, arc_i = (j, i) if is_arc[i] else (i, j)
        windows.append(np.stack([pts[wall_i], pts[arc_i]]))

    def runs(pair_flag: np.ndarray) -> list[np.ndarray]:
        """Maximal chains of consecutive flagged pairs, cyclic-seam aware."""
        if pair_flag.all():
            return [np.vstack([pts, pts[:1]])]
        if not pair_flag.any():
            return []
        # Rotate so the sequence starts on an unflagged pair.
        start = int(np.flatnonzero(~pair_flag)[0])
        rot = np.roll(pair_flag, -start)
        edges_idx = np.flatnonzero(rot)
        breaks = np.flatnonzero(np.diff(edges_idx) > 1)
        chains = []
        for seg in np.split(edges_idx, breaks + 1):
            ids = (start + np.concatenate([seg, [seg[-1] + 1]])) % n
            chains.append(pts[ids])
        return chains

    arcs = runs(both_arc)
    walls = runs(wall_cont)

    return VisibilityRegion(
        boundary=pts,
        windows=tuple(windows),
        arcs=tuple(arcs),
        wall_segments=tuple(_compress_polyline(w) for w in walls),
        viewpoint=vp,
        range_m=float(range_m),
    )


def _compress_polyline(pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Drop interior points collinear with their immediate neighbours."""
    if len(pts) <= 2:
        return pts
    v1 = pts[1:-1] - pts[:-2]
    v2 = pts[2:] - pts[1:-1]
    turn = np.abs(_cross(v1, v2))
    scale = np.linalg.norm(v1, axis=1) * np.linalg.norm(v2, axis=1) + 1e-30
    keep = np.ones(len(pts), dtype=bool)
    keep[1:-1] = turn > tol * scale
    return pts[keep]


def simplify_polyline(pts: np.ndarray, tol: float) -> np.ndarray:
    """Iterative Douglas-Peucker simplification."""
    pts = _as_points(pts)
    if len(pts) <= 2:
        return pts
    keep = np.zeros(len(pts), dtype=bool)
    keep[[0, len(pts) - 1]] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        seg = pts[j] - pts[i]
        L = np.linalg.norm(seg)
        mid = pts[i + 1:j]
        if L < 1e-12:
            d = np.linalg.norm(mid - pts[i], axis=1)
        else:
            d = np.abs(_cross(seg[None, :], mid - pts[i])) / L
        k = int(np.argmax(d))
        if d[k] > tol:
            keep[i + 1 + k] = True
            stack.append((i, i + 1 + k))
            stack.append((i + 1 + k, j))
    return pts[keep]


# ---------------------------------------------------------------------------
# Clearance-maximizing paths


@dataclass(frozen=True)
class PathPolyline:
    """Polyline through the polygon interior with per-point boundary clearance."""

    points: np.ndarray
    clearances: np.ndarray

    def __post_init__(self) -> None:
        pts = _as_points(self.points)
        cl = np.asarray(self.clearances, dtype=float)
        if len(cl) != len(pts):
            raise DomainError("one clearance per path point required")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "clearances", cl)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())

    def arc_positions(self) -> np.ndarray:
        steps = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(steps)])

    def resample(self, step: float) -> np.ndarray:
        """Points at uniform arc-length spacing (endpoints included)."""
        s = self.arc_positions()
        if s[-1] < 1e-12:
            return self.points[:1].copy()
        si = np.arange(0.0, s[-1], step)
        si = np.append(si, s[-1])
        x = np.interp(si, s, self.points[:, 0])
        y = np.interp(si, s, self.points[:, 1])
        return np.stack([x, y], axis=1)


class ClearanceField:
    """Distance-transform raster of a polygon with a ridge-following planner.

    Shortest paths use edge weight length / (clearance + eps), which rides
    the medial ridge wherever possible. Build once per polygon, query many.
    """

    def __init__(self, env: Polygon, resolution: float = 0.05) -> None:
        self.env = env
        self.resolution = float(resolution)
        x0, y0, x1, y1 = env.bounds
        h = self.resolution
        self._ox = math.floor(x0 / h) * h - 2 * h
        self._oy = math.floor(y0 / h) * h - 2 * h
        nx = int(math.ceil((x1 - self._ox) / h)) + 3
        ny = int(math.ceil((y1 - self._oy) / h)) + 3
        xs = self._ox + np.arange(nx) * h
        ys = self._oy + np.arange(ny) * h
        self.mask = polygon_scanline_mask(env.vertices, xs, ys)
        self.clearance = ndimage.distance_transform_edt(self.mask) * h
        self._xs, self._ys = xs, ys
        self._graph = None

    def _cell(self, point: np.ndarray) -> tuple[int, int]:
        c = int(round((point[0] - self._ox) / self.resolution))
        r = int(round((point[1] - self._oy) / self.resolution))
        return r, c

    def _nearest_free_cell(self, point: np.ndarray) -> tuple[int, int]:
        r, c = self._cell(point)
        ny, nx = self.mask.shape
        best, best_d = None, np.inf
        for dr in range(-3, 4):
            for dc in range(-3, 4):
                rr, cc = r + dr, c + dc
                if 0 <= rr < ny and 0 <= cc < nx and self.mask[rr, cc]:
                    d = dr * dr + dc * dc
                    if d < best_d:
                        best, best_d = (rr, cc), d
        if best is None:
            raise PlanningError("point has no free raster cell nearby")
        return best

    def _build_graph(self) -> None:
        ny, nx = self.mask.shape
        idx = -np.ones((ny, nx), dtype=np.int64)
        free_r, free_c = np.nonzero(self.mask)
        idx[free_r, free_c] = np.arange(len(free_r))
        rows, cols, data = [], [], []
        eps = 1e-3
        offsets = [(0, 1, 1.0), (1, 0, 1.0), (1, 1, math.sqrt(2)), (1, -1, math.sqrt(2))]
        for dr, dc, step in offsets:
            r2, c2 = free_r + dr, free_c + dc
            ok = (r2 >= 0) & (r2 < ny) & (c2 >= 0) & (c2 < nx)
            ok[ok] &= self.mask[r2[ok], c2[ok]]
            u = idx[free_r[ok], free_c[ok]]
            v = idx[r2[ok], c2[ok]]
            cl = np.minimum(self.clearance[free_r[ok], free_c[ok]],
                            self.clearance[r2[ok], c2[ok]])
            w = step * self.resolution / (cl + eps)
            rows.append(u)
            cols.append(v)
            data.append(w)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        data = np.concatenate(data)
        n = len(free_r)
        g = sparse.coo_matrix((data, (rows, cols)), shape=(n, n))
        self._graph = (g + g.T).tocsr()
        self._idx = idx
        self._free_rc = (free_r, free_c)

    def path(self, start, goal) -> PathPolyline:
        start = np.asarray(start, dtype=float)
        goal = np.asarray(goal, dtype=float)
        inside = self.env.contains(np.stack([start, goal]))
        if not inside.all():
            raise PlanningError("start and goal must lie strictly inside the polygon")
        if np.linalg.norm(goal - start) < 1e-12:
            cl = distance_to_boundary(start[None, :], self.env.vertices)
            return PathPolyline(start[None, :].copy(), cl)
        if self._graph is None:
            self._build_graph()
        s = self._idx[self._nearest_free_cell(start)]
        g = self._idx[self._nearest_free_cell(goal)]
        dist, pred = csgraph.dijkstra(self._graph, indices=[s], return_predecessors=True)
        if not np.isfinite(dist[0, g]):
            raise PlanningError("no connected free path between start and goal")
        chain = [int(g)]
        while chain[-1] != s:
            chain.append(int(pred[0, chain[-1]]))
        chain.reverse()
        fr, fc = self._free_rc
        pts = np.stack([self._ox + fc[chain] * self.resolution,
                        self._oy + fr[chain] * self.resolution], axis=1)
        pts = np.vstack([start, pts, goal])
        pts = _compress_polyline(pts, tol=1e-9)
        pts = simplify_polyline(pts, tol=0.02)
        cl = distance_to_boundary(pts, self.env.vertices)
        return PathPolyline(pts, cl)


def medial_axis_path(env: Polygon, start, goal, resolution: float = 0.05) -> PathPolyline:
    """Clearance-maximizing route between two interior points.

    Approximates the medial-axis route on a raster: distance-transform
    clearances and a shortest path weighted by length / (clearance + 1e-3).
    """
    return ClearanceField(env, resolution).path(start, goal)


# ---------------------------------------------------------------------------
# Link distance


def _inside_inclusive(points: np.ndarray, env: Polygon) -> np.ndarray:
    """Interior-or-boundary test (boundary tolerance 1e-9)."""
    pts = _as_points(points)
    inside = points_in_polygon(pts, env.vertices)
    border = ~inside
    if border.any():
        inside[border] = distance_to_boundary(pts[border], env.vertices) < 1e-7
    return inside


def mutual_visibility(points: np.ndarray, env: Polygon) -> np.ndarray:
    """Symmetric boolean matrix: segment i-j stays inside the polygon.

    Grazing contact with the boundary counts as visible; a proper edge
    crossing or an exterior interior-sample does not.
    """
    pts = _as_points(points)
    n = len(pts)
    vis = np.zeros((n, n), dtype=bool)
    if n == 0:
        return vis
    iu, ju = np.triu_indices(n, k=1)
    p, q = pts[iu], pts[ju]
    blocked = segments_cross_edges(p, q, env.vertices)
    ok = ~blocked
    for frac in (0.5, 0.25, 0.75):
        if not ok.any():
            break
        mid = p[ok] + frac * (q[ok] - p[ok])
        ok[ok.nonzero()[0]] = _inside_inclusive(mid, env)
    vis[iu, ju] = ok
    vis |= vis.T
    np.fill_diagonal(vis, True)
    return vis


def _window_samples(env: Polygon, point: np.ndarray, step: float = 0.5) -> np.ndarray:
    """Points along the occlusion windows seen from `point`."""
    x0, y0, x1, y1 = env.bounds
    big = 4.0 * math.hypot(x1 - x0, y1 - y0)
    try:
        region = visibility_region(env, point, big)
    except DomainError:
        return np.empty((0, 2))
    out = []
    for w in region.windows:
        L = float(np.linalg.norm(w[1] - w[0]))
        k = max(1, int(L / step))
        for t in (np.arange(k) + 0.5) / k:
            out.append(w[0] + t * (w[1] - w[0]))
    return np.asarray(out) if out else np.empty((0, 2))


def link_distance(env: Polygon, a, b) -> int:
    """Minimum number of straight segments joining `a` to `b` inside `env`.

    Computed by BFS on a visibility graph over the endpoints, the polygon
    vertices, and samples along the occlusion windows of both endpoints;
    an upper bound that is exact when optimal bends occur at those nodes.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not _inside_inclusive(np.stack([a, b]), env).all():
        raise DomainError("link distance endpoints must lie inside the polygon")
    if np.linalg.norm(b - a) < 1e-12:
        return 0
    nodes = np.vstack([a[None, :], b[None, :], env.vertices,
                       _window_samples(env, a), _window_samples(env, b)])
    vis = mutual_visibility(nodes, env)
    if vis[0, 1]:
        return 1
    graph = sparse.csr_matrix(vis)
    d = csgraph.shortest_path(graph, method="D", unweighted=True, indices=[0])
    if not np.isfinite(d[0, 1]):
        raise PlanningError("endpoints are not connected inside the polygon")
    return int(d[0, 1])


@dataclass(frozen=True)
class LinkAnalysis:
    """Sampled link-distance structure of a polygon."""

    points: np.ndarray        # interior samples followed by polygon vertices
    clearances: np.ndarray
    sample_count: int
    distances: np.ndarray     # pairwise link distances (np.inf if unreachable)

    @property
    def diameter(self) -> int:
        finite = self.distances[np.isfinite(self.distances)]
        return int(finite.max()) if finite.size else 0


def _farthest_point_samples(env: Polygon, count: int, lattice: float = 0.25) -> np.ndarray:
    x0, y0, x1, y1 = env.bounds
    xs = np.arange(x0 + lattice / 2, x1, lattice)
    ys = np.arange(y0 + lattice / 2, y1, lattice)
    gx, gy = np.meshgrid(xs, ys)
    pool = np.stack([gx.ravel(), gy.ravel()], axis=1)
    pool = pool[strictly_inside(pool, env.vertices, margin=1e-6)]
    if len(pool) == 0:
        raise DomainError("polygon interior too thin to sample")
    if len(pool) <= count:
        return pool
    centroid = pool.mean(axis=0)
    chosen = [int(np.argmin(np.linalg.norm(pool - centroid, axis=1)))]
    dmin = np.linalg.norm(pool - pool[chosen[0]], axis=1)
    for _ in range(count - 1):
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, np.linalg.norm(pool - pool[nxt], axis=1))
    return pool[chosen]


def link_analysis(env: Polygon, samples: int = 256) -> LinkAnalysis:
    """Pairwise link distances over well-spread interior samples plus vertices."""
    if samples < 2:
        raise DomainError("need at least 2 samples")
    interior = _farthest_point_samples(env, samples)
    nodes = np.vstack([interior, env.vertices])
    vis = mutual_visibility(nodes, env)
    graph = sparse.csr_matrix(vis)
    d = csgraph.shortest_path(graph, method="D", unweighted=True)
    return LinkAnalysis(
        points=nodes,
        clearances=distance_to_boundary(nodes, env.vertices),
        sample_count=len(interior),
        distances=d,
    )


def link_diameter(env: Polygon, samples: int = 256) -> int:
    """Sampled lower bound on the polygon's link diameter."""
    return link_analysis(env, samples).diameter
