# utils/grid_utils.py

import logging
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

PASSABLE_GLYPHS = {".", "G"}
BLOCKED_GLYPHS = {"@", "O", "T"}


class MapParseError(ValueError):
    def __init__(self, message, lineno):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


# Canonical order; ties are broken by these values everywhere.
class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    IDLE = 4


MOVES = (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT)

ACTION_OFFSETS = {
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
    Action.IDLE: (0, 0),
}


@dataclass(frozen=True)
class GridMap:
    """
    Row-major occupancy grid with (0, 0) at the top-left corner.
    Cell index i = row * width + col. Immutable once built.
    """
    width: int
    height: int
    blocked: tuple
    name: str = "unnamed"
    map_type: str = "octile"
    # Raw glyph rows as read, so G, O and T survive serialisation.
    glyphs: Optional[tuple] = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.height}x{self.width}")
        if len(self.blocked) != self.width * self.height:
            raise ValueError(
                f"blocked has {len(self.blocked)} entries, expected {self.width * self.height}"
            )
        if self.glyphs is not None and (
            len(self.glyphs) != self.height or any(len(row) != self.width for row in self.glyphs)
        ):
            raise ValueError(f"glyph rows do not match a {self.height}x{self.width} grid")

    @property
    def size(self):
        return self.width * self.height

    def to_row_col(self, cell):
        return divmod(cell, self.width)

    def to_cell(self, row, col):
        return row * self.width + col

    def in_bounds(self, row, col):
        return 0 <= row < self.height and 0 <= col < self.width

    def is_passable(self, cell):
        return 0 <= cell < self.size and not self.blocked[cell]

    @property
    def passable_cells(self):
        return tuple(i for i, b in enumerate(self.blocked) if not b)

    def coordinates(self, cells):
        """(len(cells), 2) float array of (row, col) grid coordinates."""
        cells = np.asarray(cells, dtype=int)
        return np.column_stack(np.divmod(cells, self.width)).astype(float)


@dataclass(frozen=True)
class AgentPose:
    agent_id: int
    cell: int
    time: int = 0


# --- MovingAI .map parsing ---
def parse_map(text, name="unnamed"):
    lines = text.splitlines()
    if len(lines) < 4:
        raise MapParseError("header needs 4 lines (type, height, width, map)", len(lines) + 1)

    header = [line.strip().split() for line in lines[:4]]
    if len(header[0]) != 2 or header[0][0] != "type":
        raise MapParseError(f"expected 'type <name>', got {lines[0]!r}", 1)

    dims = {}
    for lineno, key in ((2, "height"), (3, "width")):
        tokens = header[lineno - 1]
        if len(tokens) != 2 or tokens[0] != key:
            raise MapParseError(f"expected '{key} <n>', got {lines[lineno - 1]!r}", lineno)
        try:
            dims[key] = int(tokens[1])
        except ValueError:
            raise MapParseError(f"{key} is not an integer: {tokens[1]!r}", lineno)
        if dims[key] < 1:
            raise MapParseError(f"{key} must be positive", lineno)

    if header[3] != ["map"]:
        raise MapParseError(f"expected 'map', got {lines[3]!r}", 4)

    height, width = dims["height"], dims["width"]
    rows = [line.rstrip() for line in lines[4:]]
    while rows and not rows[-1]:
        rows.pop()
    if len(rows) != height:
        raise MapParseError(f"expected {height} grid rows, found {len(rows)}", 5 + len(rows))

    blocked = []
    for offset, row in enumerate(rows):
        lineno = 5 + offset
        if len(row) != width:
            raise MapParseError(f"row has {len(row)} glyphs, expected {width}", lineno)
        for glyph in row:
            if glyph in PASSABLE_GLYPHS:
                blocked.append(False)
            elif glyph in BLOCKED_GLYPHS:
                blocked.append(True)
            else:
                raise MapParseError(f"unknown glyph {glyph!r}", lineno)

    return GridMap(
        width=width, height=height, blocked=tuple(blocked), name=name,
        map_type=header[0][1], glyphs=tuple(rows),
    )


def serialize_map(grid):
    lines = [f"type {grid.map_type}", f"height {grid.height}", f"width {grid.width}", "map"]
    if grid.glyphs is not None:
        lines.extend(grid.glyphs)
    else:
        for row in range(grid.height):
            start = row * grid.width
            lines.append("".join("@" if b else "." for b in grid.blocked[start:start + grid.width]))
    return "\n".join(lines) + "\n"


def load_map(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"map file not found: {path}")
    grid = parse_map(path.read_text(), name=path.stem)
    logger.info(f"Loaded map {grid.name} ({grid.height}x{grid.width}, {len(grid.passable_cells)} passable)")
    return grid


# --- Kinematics ---
def apply_action(grid, pose, action) -> Optional[AgentPose]:
    """Moved pose, or None when the target cell is off-map or blocked."""
    row, col = grid.to_row_col(pose.cell)
    d_row, d_col = ACTION_OFFSETS[Action(action)]
    row, col = row + d_row, col + d_col
    if not grid.in_bounds(row, col):
        return None
    cell = grid.to_cell(row, col)
    if grid.blocked[cell]:
        return None
    return AgentPose(agent_id=pose.agent_id, cell=cell, time=pose.time + 1)


def step_cell(grid, cell, action):
    pose = apply_action(grid, AgentPose(0, cell), action)
    return None if pose is None else pose.cell


def feasible_actions(grid, cell):
    """Feasible moves in canonical order; Idle only when no move is feasible."""
    moves = tuple(a for a in MOVES if step_cell(grid, cell, a) is not None)
    return moves if moves else (Action.IDLE,)


def manhattan_distance(p, q, grid):
    """
    |d_row| + |d_col| between two poses on `grid`. Poses carry a flat cell index, so the
    grid supplies the width that turns it back into (row, col). Walls are ignored.
    """
    (r1, c1), (r2, c2) = grid.to_row_col(p.cell), grid.to_row_col(q.cell)
    return abs(r1 - r2) + abs(c1 - c2)
