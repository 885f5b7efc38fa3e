"""Symbolic co-pilot instructions.

A rally-note instruction is either a turn (direction + severity 1..6, where
1 is the tightest) or a straight advance (short/medium/long distance bin).
Each instruction occupies a 9-float slot: a 3-way direction one-hot
(straight, left, right) followed by a shared 6-way one-hot that holds the
severity for turns and the distance bin for advances.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

from .errors import DomainError, ParseError
from .geometry import PathPolyline
from .pose import Pose

SLOT_WIDTH = 9
MAX_SLOTS = 2

Direction = Literal["left", "right"]
DistanceBin = Literal["short", "medium", "long"]

_DISTANCES: tuple[DistanceBin, ...] = ("short", "medium", "long")

# Turn-event detection: windowed heading change threshold and window length.
TURN_THRESHOLD_DEG = 15.0
HEADING_WINDOW_M = 1.0
_RESAMPLE_M = 0.05


@dataclass(frozen=True)
class Turn:
    direction: Direction
    severity: int

    def __post_init__(self) -> None:
        if self.direction not in ("left", "right"):
            raise DomainError(f"bad turn direction {self.direction!r}")
        if not (isinstance(self.severity, int) and 1 <= self.severity <= 6):
            raise DomainError(f"turn severity must be an integer in 1..6, got {self.severity!r}")

    def to_json(self) -> dict:
        return {"kind": "turn", "direction": self.direction, "severity": self.severity}


@dataclass(frozen=True)
class Advance:
    distance: DistanceBin

    def __post_init__(self) -> None:
        if self.distance not in _DISTANCES:
            raise DomainError(f"bad advance distance {self.distance!r}")

    def to_json(self) -> dict:
        return {"kind": "advance", "distance": self.distance}


Instruction = Union[Turn, Advance]


def instruction_from_json(obj: dict) -> Instruction:
    kind = obj.get("kind")
    if kind == "turn":
        return Turn(obj["direction"], int(obj["severity"]))
    if kind == "advance":
        return Advance(obj["distance"])
    raise ParseError(f"unknown instruction kind {kind!r}")


def severity_bin(cumulative_turn_deg: float) -> int:
    """Map a cumulative turn angle to severity 6 (<30 deg) .. 1 (>=150 deg)."""
    if cumulative_turn_deg < 0:
        raise DomainError("cumulative turn angle must be non-negative")
    return max(1, 6 - int(cumulative_turn_deg // 30.0))


def distance_bin(distance_m: float) -> DistanceBin:
    """Short below 5 m, medium below 10 m, long at and above 10 m."""
    if distance_m < 0:
        raise DomainError("distance must be non-negative")
    if distance_m < 5.0:
        return "short"
    if distance_m < 10.0:
        return "medium"
    return "long"


def encode(instructions: list[Instruction], max_slots: int = MAX_SLOTS) -> np.ndarray:
    """Concatenated per-slot one-hot embedding; unused slots stay zero."""
    if len(instructions) > max_slots:
        raise DomainError(f"at most {max_slots} instructions fit, got {len(instructions)}")
    vec = np.zeros(SLOT_WIDTH * max_slots, dtype=np.float32)
    for i, ins in enumerate(instructions):
        base = SLOT_WIDTH * i
        if isinstance(ins, Turn):
            vec[base + (1 if ins.direction == "left" else 2)] = 1.0
            vec[base + 3 + (ins.severity - 1)] = 1.0
        elif isinstance(ins, Advance):
            vec[base] = 1.0
            vec[base + 3 + _DISTANCES.index(ins.distance)] = 1.0
        else:
            raise DomainError(f"cannot encode {type(ins).__name__}")
    return vec


def decode(encoding: np.ndarray) -> list[Instruction]:
    """Inverse of `encode`; rejects vectors that are not valid slot one-hots."""
    vec = np.asarray(encoding, dtype=np.float32)
    if vec.ndim != 1 or len(vec) % SLOT_WIDTH != 0:
        raise ParseError(f"encoding length must be a multiple of {SLOT_WIDTH}")
    out: list[Instruction] = []
    for i in range(0, len(vec), SLOT_WIDTH):
        slot = vec[i:i + SLOT_WIDTH]
        if not slot.any():
            continue
        if not np.isin(slot, (0.0, 1.0)).all() or slot[:3].sum() != 1 or slot[3:].sum() != 1:
            raise ParseError(f"slot starting at index {i} is not a valid one-hot pair")
        d = int(np.argmax(slot[:3]))
        k = int(np.argmax(slot[3:]))
        if d == 0:
            if k >= 3:
                raise ParseError(f"slot starting at index {i}: advance with severity payload")
            out.append(Advance(_DISTANCES[k]))
        else:
            out.append(Turn("left" if d == 1 else "right", k + 1))
    return out


def derive_instructions(path: PathPolyline | np.ndarray, robot_pose: Pose,
                        horizon_m: float, max_slots: int = MAX_SLOTS) -> list[Instruction]:
    """Read upcoming maneuvers off a route polyline.

    Walks the path from the point nearest the robot for `horizon_m` meters.
    Stretches whose windowed (1 m) cumulative heading change exceeds 15 deg
    become turns (severity from the total contiguous change); the straight
    lead-in becomes an advance with its arc-length distance bin.
    """
    pts = path.points if isinstance(path, PathPolyline) else np.atleast_2d(np.asarray(path, float))
    if len(pts) == 0:
        return []
    start = int(np.argmin(np.linalg.norm(pts - robot_pose.xy, axis=1)))
    pts = pts[start:]
    if len(pts) < 2:
        return []
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(steps)])
    total = min(float(arc[-1]), horizon_m)
    if total < _RESAMPLE_M:
        return []
    si = np.arange(0.0, total, _RESAMPLE_M)
    si = np.append(si, total)
    x = np.interp(si, arc, pts[:, 0])
    y = np.interp(si, arc, pts[:, 1])
    dx, dy = np.diff(x), np.diff(y)
    ok = np.hypot(dx, dy) > 1e-9
    heading = np.arctan2(dy[ok], dx[ok])
    s_seg = si[:-1][ok]
    if len(heading) < 2:
        return [Advance(distance_bin(total))]
    dtheta = np.diff(heading)
    dtheta = (dtheta + math.pi) % (2 * math.pi) - math.pi

    window = max(1, int(round(HEADING_WINDOW_M / _RESAMPLE_M)))
    csum = np.concatenate([[0.0], np.cumsum(dtheta)])
    hi = np.minimum(np.arange(len(dtheta)) + window, len(dtheta))
    windowed = csum[hi] - csum[:-1]
    turning = np.abs(windowed) >= math.radians(TURN_THRESHOLD_DEG)

    events: list[tuple[float, Instruction]] = []
    i = 0
    while i < len(turning):
        if not turning[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(turning) and turning[j + 1]:
            j += 1
        lo, hi_i = i, min(j + window, len(dtheta) - 1)
        change = float(csum[hi_i + 1] - csum[lo])
        deg = abs(math.degrees(change))
        if deg >= TURN_THRESHOLD_DEG:
            direction: Direction = "left" if change > 0 else "right"
            events.append((float(s_seg[lo]), Turn(direction, severity_bin(deg))))
        i = hi_i + 1

    lead = events[0][0] if events else total
    out: list[Instruction] = [Advance(distance_bin(lead))]
    out.extend(ins for _, ins in events)
    return out[:max_slots]


_WORD_SEV = {"sharp": 1, "square": 3, "slight": 6}


def parse_text(text: str) -> list[Instruction]:
    """Parse the constrained instruction grammar.

    Clauses separated by commas or "then"; each clause is one of
    `left|right <1..6>`, `sharp|square|slight left|right`, or
    `straight short|medium|long`. Case-insensitive.
    """
    clauses = [c for c in re.split(r",|\bthen\b", text, flags=re.IGNORECASE)]
    out: list[Instruction] = []
    pos = 0
    for clause in clauses:
        tokens = clause.lower().split()
        if not tokens:
            continue
        first = tokens[0]
        pos += 1
        if first in ("left", "right"):
            if len(tokens) != 2 or not tokens[1].isdigit() or not 1 <= int(tokens[1]) <= 6:
                raise ParseError(f"expected a severity 1..6 after {first!r} at token {pos}")
            out.append(Turn(first, int(tokens[1])))
        elif first in _WORD_SEV:
            if len(tokens) != 2 or tokens[1] not in ("left", "right"):
                raise ParseError(f"expected left/right after {first!r} at token {pos}")
            out.append(Turn(tokens[1], _WORD_SEV[first]))
        elif first == "straight":
            if len(tokens) != 2 or tokens[1] not in _DISTANCES:
                raise ParseError(f"expected short/medium/long after 'straight' at token {pos}")
            out.append(Advance(tokens[1]))
        else:
            raise ParseError(f"unrecognized token {first!r} at token {pos}")
        pos += len(tokens) - 1
    return out
