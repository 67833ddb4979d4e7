"""Sokoban with a uniform no-undo policy and typed clues.

Search states are pairs ``(current, previous)`` of board states, since the
policy is uniform over the moves leading to a board that differs from both
the current and the previous board.  There is no transposition table: the
same board may appear at many nodes.

A node is a clue of type z when its move pushed a box onto a goal and
exactly z boxes are then on goals (z < number of boxes).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from pathlib import Path

from ..search import NO_SIGNAL, Signal

WALL, FLOOR, PLAYER, BOX, GOAL, BOX_ON_GOAL, PLAYER_ON_GOAL = "#", " ", "@", "$", ".", "*", "+"
XSB_CHARS = frozenset("# @$.*+-_")

# Children per action along the 25-move reference solution, one group per
# box pushed onto a goal.
REFERENCE_BRANCH_COUNTS: tuple[tuple[int, ...], ...] = (
    (3, 3, 2, 3, 2, 1, 1, 1, 2),
    (2, 2, 2, 2),
    (4, 2, 3, 2, 3),
    (2, 3, 1, 3, 2, 3, 2),
)

MOVES = (("up", -1, 0), ("down", 1, 0), ("left", 0, -1), ("right", 0, 1))


class SokobanParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class SokobanLevel:
    width: int
    height: int
    walls: frozenset[int]
    goals: tuple[int, ...]

    def cell(self, row: int, col: int) -> int:
        return row * self.width + col

    def rc(self, cell: int) -> tuple[int, int]:
        return divmod(cell, self.width)

    def step(self, cell: int, dr: int, dc: int) -> int | None:
        r, c = divmod(cell, self.width)
        r, c = r + dr, c + dc
        if not (0 <= r < self.height and 0 <= c < self.width):
            return None
        n = r * self.width + c
        return None if n in self.walls else n


@dataclass(frozen=True)
class SokobanState:
    """A board: player cell and sorted box cells on a fixed level."""

    player: int
    boxes: tuple[int, ...]
    level: SokobanLevel = field(compare=False, hash=False, repr=False)

    @property
    def walls(self) -> frozenset[int]:
        return self.level.walls

    @property
    def goals(self) -> tuple[int, ...]:
        return self.level.goals

    def boxes_on_goals(self) -> int:
        g = set(self.level.goals)
        return sum(b in g for b in self.boxes)

    def solved(self) -> bool:
        return set(self.boxes) == set(self.level.goals)

    def move(self, dr: int, dc: int) -> "SokobanState | None":
        """Board after moving the player by (dr, dc), or None if illegal."""
        lv = self.level
        target = lv.step(self.player, dr, dc)
        if target is None:
            return None
        if target not in self.boxes:
            return SokobanState(target, self.boxes, lv)
        beyond = lv.step(target, dr, dc)
        if beyond is None or beyond in self.boxes:
            return None
        boxes = tuple(sorted(beyond if b == target else b for b in self.boxes))
        return SokobanState(target, boxes, lv)

    def render(self) -> str:
        lv = self.level
        goals = set(lv.goals)
        boxes = set(self.boxes)
        rows = []
        for r in range(lv.height):
            line = []
            for c in range(lv.width):
                k = lv.cell(r, c)
                if k in lv.walls:
                    ch = WALL
                elif k == self.player:
                    ch = PLAYER_ON_GOAL if k in goals else PLAYER
                elif k in boxes:
                    ch = BOX_ON_GOAL if k in goals else BOX
                else:
                    ch = GOAL if k in goals else FLOOR
                line.append(ch)
            rows.append("".join(line).rstrip())
        return "\n".join(rows)


def sokoban_parse(text: str) -> SokobanState:
    """Parse an XSB level.  Short lines are padded with floor."""
    lines = [ln.rstrip("\r") for ln in text.split("\n")]
    while lines and not lines[-1].strip():
        lines.pop()
    while lines and not lines[0].strip():
        lines.pop(0)
    if not lines:
        raise SokobanParseError("empty level", 1, 1)
    width = max(len(ln) for ln in lines)
    walls, goals, boxes = set(), [], []
    player = None
    for r, ln in enumerate(lines):
        for c, ch in enumerate(ln):
            if ch not in XSB_CHARS:
                raise SokobanParseError(f"unexpected character {ch!r}", r + 1, c + 1)
            k = r * width + c
            if ch == WALL:
                walls.add(k)
            if ch in (GOAL, BOX_ON_GOAL, PLAYER_ON_GOAL):
                goals.append(k)
            if ch in (BOX, BOX_ON_GOAL):
                boxes.append(k)
            if ch in (PLAYER, PLAYER_ON_GOAL):
                if player is not None:
                    raise SokobanParseError("second player", r + 1, c + 1)
                player = k
    if player is None:
        raise SokobanParseError("no player", len(lines), 1)
    if len(boxes) != len(goals):
        raise SokobanParseError(f"{len(boxes)} boxes but {len(goals)} goals", len(lines), 1)
    if not boxes:
        raise SokobanParseError("no boxes", len(lines), 1)
    level = SokobanLevel(width, len(lines), frozenset(walls), tuple(sorted(goals)))
    # every cell the player can walk to must be enclosed by walls
    for k in reachable_cells(level, player):
        r, c = level.rc(k)
        if r in (0, level.height - 1) or c in (0, width - 1):
            raise SokobanParseError("level is not enclosed by walls", r + 1, c + 1)
    return SokobanState(player, tuple(sorted(boxes)), level)


def load_level(path: str | Path) -> SokobanState:
    return sokoban_parse(Path(path).read_text())


def reachable_cells(level: SokobanLevel, start: int) -> set[int]:
    """Non-wall cells connected to ``start``, ignoring boxes."""
    seen = {start}
    stack = [start]
    while stack:
        k = stack.pop()
        for _, dr, dc in MOVES:
            n = level.step(k, dr, dc)
            if n is not None and n not in seen:
                seen.add(n)
                stack.append(n)
    return seen


def non_wall_cells(state: SokobanState) -> int:
    """Number of cells inside the level's walls."""
    return len(reachable_cells(state.level, state.player))


def sokoban_moves(state: SokobanState, prev: SokobanState | None) -> list[tuple[str, SokobanState]]:
    """Legal moves whose board differs from both ``state`` and ``prev``."""
    out = []
    for name, dr, dc in MOVES:
        nxt = state.move(dr, dc)
        if nxt is None or nxt == state or nxt == prev:
            continue
        out.append((name, nxt))
    return out


def sokoban_expand(state: SokobanState, prev: SokobanState | None) -> list[tuple[SokobanState, float]]:
    moves = sokoban_moves(state, prev)
    if not moves:
        return []
    p = 1.0 / len(moves)
    return [(nxt, p) for _, nxt in moves]


def sokoban_signal(parent: SokobanState | None, child: SokobanState) -> Signal:
    if parent is None or parent.boxes == child.boxes:
        return NO_SIGNAL
    pushed_to = child.player + (child.player - parent.player)
    if pushed_to not in child.level.goals:
        return NO_SIGNAL
    z = child.boxes_on_goals()
    if z >= len(child.boxes):
        return NO_SIGNAL
    return Signal(clue=True, clue_type=z)


class SokobanEnv:
    """Search environment over (board, previous board) pairs."""

    proper = False  # dead ends have no legal move
    observe_at_generation = False

    def __init__(self, start: SokobanState):
        self.start = start

    @classmethod
    def from_file(cls, path: str | Path) -> "SokobanEnv":
        return cls(load_level(path))

    @classmethod
    def from_text(cls, text: str) -> "SokobanEnv":
        return cls(sokoban_parse(text))

    def root(self) -> tuple[SokobanState, None]:
        return (self.start, None)

    def expand(self, node):
        cur, prev = node
        return [((nxt, cur), p) for nxt, p in sokoban_expand(cur, prev)]

    def is_goal(self, node) -> bool:
        return node[0].solved()

    def signal(self, parent, node) -> Signal:
        if parent is None:
            return NO_SIGNAL
        return sokoban_signal(parent[0], node[0])

    @property
    def n_cells(self) -> int:
        return non_wall_cells(self.start)


def clue_count_estimate(N: int, z: int, n_boxes: int = 4) -> int:
    """Estimated number of clue boards of type z: C(B,z) C(N-B-1, B-z) 3z."""
    if not 1 <= z < n_boxes:
        raise ValueError(f"clue type must be in 1..{n_boxes - 1}")
    if N < n_boxes + 2:
        raise ValueError("too few cells")
    return comb(n_boxes, z) * comb(N - n_boxes - 1, n_boxes - z) * z * 3


SAMPLE_LEVEL = Path(__file__).with_name("levels") / "sample.xsb"
