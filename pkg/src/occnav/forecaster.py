"""Pluggable (Level-1, instruction encoding) -> (Level-2, subgoal) backends.

Three sources: `null` echoes Level-1 (the map-only baseline), `oracle`
computes ground truth from the environment, and `remote` queries an
inference service over newline-delimited JSON on a stream socket.
"""

from __future__ import annotations

import base64
import json
import socket
import time
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ForecastError
from .geometry import PathPolyline, Polygon
from .gridmap import (FREE, OCCUPIED, GoalHeatmap, OccupancyGrid, build_level2,
                      extract_frontiers, extract_goal, furthest_free_point,
                      grid_from_bytes, grid_to_bytes, level1_scan)
from .pose import Pose, world_to_robot


@dataclass(frozen=True)
class Forecast:
    """One forecast: Level-2 grid, optional subgoal, provenance, latency."""

    l2: OccupancyGrid
    g2: np.ndarray | None
    heatmap: GoalHeatmap | None
    source: str
    latency_ms: float

    def __post_init__(self) -> None:
        if self.g2 is not None:
            from .gridmap import in_grid, point_to_cell
            r, c = point_to_cell(self.g2)
            if not in_grid(r, c) or self.l2.cells[r, c] == OCCUPIED:
                raise DomainError("forecast subgoal must lie in a non-occupied Level-2 cell")


def forecast_null(l1: OccupancyGrid) -> Forecast:
    """Level-1-only baseline: the forecast adds nothing."""
    t0 = time.perf_counter()
    return Forecast(l2=l1, g2=None, heatmap=None, source="null",
                    latency_ms=(time.perf_counter() - t0) * 1000.0)


def forecast_oracle(env: Polygon, pose: Pose, route: PathPolyline | np.ndarray,
                    encoding: np.ndarray | None = None,
                    l1: tuple | None = None,
                    frontier_mode: str = "all") -> Forecast:
    """Ground-truth forecast from full world knowledge.

    Level-2 is built from the pose's frontier scans; the subgoal is the
    furthest route point whose Level-2 cell is free. The instruction
    encoding is accepted for interface parity but unused.
    """
    t0 = time.perf_counter()
    region, l1_grid = l1 if l1 is not None else level1_scan(env, pose)
    frontiers = extract_frontiers(l1_grid, region, mode=frontier_mode)
    l2 = build_level2(env, pose, frontiers, l1=(region, l1_grid))
    pts = route.points if isinstance(route, PathPolyline) else np.atleast_2d(route)
    hit = furthest_free_point(world_to_robot(pts, pose), l2)
    g2 = hit[0] if hit is not None else None
    return Forecast(l2=l2, g2=g2, heatmap=None, source="oracle",
                    latency_ms=(time.perf_counter() - t0) * 1000.0)


def fuse_observed(pred_l2: OccupancyGrid, l1: OccupancyGrid) -> OccupancyGrid:
    """Overlay sensed occupied cells on a predicted grid.

    A forecast must never erase an observed wall; everything else is left
    to the prediction.
    """
    cells = pred_l2.cells.copy()
    cells[l1.cells == OCCUPIED] = OCCUPIED
    return OccupancyGrid(cells, pose=l1.pose)


class RemoteForecaster:
    """Client for the inference wire protocol (one request in flight).

    Requests and responses are single JSON lines over a TCP stream; grid
    payloads are base64 of the binary grid format; ids strictly increase.
    """

    def __init__(self, endpoint: str, timeout_s: float = 2.0, min_peak: float = 0.3) -> None:
        host, _, port = endpoint.rpartition(":")
        if not host or not port.isdigit():
            raise DomainError(f"endpoint must be host:port, got {endpoint!r}")
        self.endpoint = (host, int(port))
        self.timeout_s = timeout_s
        self.min_peak = min_peak
        self._sock: socket.socket | None = None
        self._reader = None
        self._next_id = 1

    def _connect(self) -> None:
        try:
            self._sock = socket.create_connection(self.endpoint, timeout=self.timeout_s)
            self._sock.settimeout(self.timeout_s)
            self._reader = self._sock.makefile("rb")
        except OSError as e:
            self._sock = None
            raise ForecastError(f"cannot connect to {self.endpoint[0]}:{self.endpoint[1]}: {e}") from e

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None
                self._reader = None

    def __enter__(self) -> "RemoteForecaster":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def forecast(self, l1: OccupancyGrid, encoding: np.ndarray) -> Forecast:
        """One request/response cycle; raises ForecastError on any failure."""
        if self._sock is None:
            self._connect()
        req_id = self._next_id
        self._next_id += 1
        request = {
            "id": req_id,
            "l1": base64.b64encode(grid_to_bytes(l1)).decode("ascii"),
            "encoding": [float(v) for v in np.asarray(encoding, dtype=np.float32)],
        }
        t0 = time.perf_counter()
        try:
            self._sock.sendall(json.dumps(request).encode() + b"\n")
            line = self._reader.readline()
        except OSError as e:
            self.close()
            raise ForecastError(f"remote transport failure: {e}") from e
        if not line:
            self.close()
            raise ForecastError("remote closed the connection")
        latency = (time.perf_counter() - t0) * 1000.0
        try:
            resp = json.loads(line)
        except json.JSONDecodeError as e:
            self.close()
            raise ForecastError(f"response is not valid JSON: {e}") from e
        if resp.get("id") != req_id:
            self.close()
            raise ForecastError(f"response id {resp.get('id')!r} does not match request {req_id}")
        if "error" in resp:
            raise ForecastError(f"remote error: {resp['error']}")
        l2 = self._decode_grid(resp, "l2", OccupancyGrid)
        heatmap = self._decode_grid(resp, "heatmap", GoalHeatmap)
        g2 = extract_goal(heatmap, self.min_peak)
        if g2 is not None:
            from .gridmap import point_to_cell
            r, c = point_to_cell(g2)
            if l2.cells[r, c] == OCCUPIED:
                g2 = None  # never hand the planner an occupied subgoal
        return Forecast(l2=OccupancyGrid(l2.cells, pose=l1.pose), g2=g2, heatmap=heatmap,
                        source="remote", latency_ms=latency)

    @staticmethod
    def _decode_grid(resp: dict, field: str, expected: type):
        if field not in resp:
            raise ForecastError(f"response is missing the {field!r} field")
        try:
            raw = base64.b64decode(resp[field])
        except Exception as e:
            raise ForecastError(f"field {field!r} is not valid base64: {e}") from e
        try:
            grid = grid_from_bytes(raw)
        except Exception as e:
            raise ForecastError(f"field {field!r}: {e}") from e
        if not isinstance(grid, expected):
            raise ForecastError(f"field {field!r} decodes to {type(grid).__name__}, "
                                f"expected {expected.__name__}")
        return grid


def forecast_remote(l1: OccupancyGrid, encoding: np.ndarray, endpoint: str,
                    timeout_s: float = 2.0) -> Forecast:
    """One-shot remote forecast over a fresh connection."""
    with RemoteForecaster(endpoint, timeout_s=timeout_s) as client:
        return client.forecast(l1, encoding)
