import pytest

from rootlts.domains.sokoban import (
    REFERENCE_BRANCH_COUNTS,
    SAMPLE_LEVEL,
    SokobanEnv,
    SokobanParseError,
    clue_count_estimate,
    load_level,
    non_wall_cells,
    sokoban_expand,
    sokoban_moves,
    sokoban_parse,
    sokoban_signal,
)
from rootlts.verify import branch_counts_sop

SMALL = """\
#######
#@ $ .#
#  $ .#
#######
"""


def test_parse_and_render_roundtrip():
    s = sokoban_parse(SMALL)
    assert len(s.boxes) == 2 and len(s.goals) == 2
    assert s.render() == SMALL.rstrip("\n")
    assert hash(s) == hash(sokoban_parse(SMALL))


@pytest.mark.parametrize(
    "text,line,col",
    [
        ("####\n#@x#\n####", 2, 3),
        ("#####\n#@@.#\n#####", 2, 3),
        ("####\n# .#\n####", 3, 1),
        ("#####\n#@$ #\n#####", 3, 1),
        ("#@$.", 1, 2),
    ],
)
def test_parse_errors_carry_position(text, line, col):
    with pytest.raises(SokobanParseError) as e:
        sokoban_parse(text)
    assert (e.value.line, e.value.col) == (line, col)


def test_forced_move_in_dead_end():
    s = sokoban_parse("#######\n##@####\n##  $.#\n#######")
    moves = sokoban_moves(s, None)
    assert [m for m, _ in moves] == ["down"]
    assert sokoban_expand(s, None) == [(moves[0][1], 1.0)]
    # arriving from below, the only move would restore the previous board
    below = moves[0][1]
    assert sokoban_expand(s, below) == []


def test_previous_state_is_excluded_but_pushes_are_not_undone():
    s = sokoban_parse("#######\n#@  $.#\n#######")
    nxt = s.move(0, 1)
    back = sokoban_moves(nxt, s)
    assert all(b != s for _, b in back)
    assert [m for m, _ in back] == ["right"]


def test_expansion_reproduces_child_and_is_normalized():
    env = SokobanEnv.from_file(SAMPLE_LEVEL)
    frontier = [env.root()]
    for _ in range(4):
        nxt = []
        for node in frontier:
            kids = env.expand(node)
            if kids:
                assert sum(p for _, p in kids) == pytest.approx(1.0)
            for (child, prev), p in kids:
                assert prev == node[0]
                assert any(node[0].move(dr, dc) == child for _, dr, dc in [("", -1, 0), ("", 1, 0), ("", 0, -1), ("", 0, 1)])
                nxt.append((child, prev))
        frontier = nxt
    assert env.proper is False


def test_clue_signal_types():
    s = sokoban_parse("########\n#@$.   #\n# $.   #\n# $.   #\n########")
    pushed = s.move(0, 1)
    sig = sokoban_signal(s, pushed)
    assert sig.clue_type == 1
    assert sokoban_signal(pushed, pushed.move(0, -1)).clue_type is None
    # second box onto a goal
    two = sokoban_parse("########\n# *    #\n#@$.   #\n# $.   #\n########")
    assert sokoban_signal(two, two.move(0, 1)).clue_type == 2


def test_pushing_last_box_is_goal_not_clue():
    s = sokoban_parse("######\n#@$.*#\n######")
    after = s.move(0, 1)
    assert after.solved()
    assert sokoban_signal(s, after).clue_type is None


def test_sample_level_shape():
    s = load_level(SAMPLE_LEVEL)
    assert non_wall_cells(s) == 89
    assert len(s.boxes) == 4


def test_clue_count_estimates():
    assert clue_count_estimate(89, 1) == 1143408
    assert clue_count_estimate(89, 2) == 125496
    assert clue_count_estimate(89, 3) == 3024
    with pytest.raises(ValueError):
        clue_count_estimate(89, 4)
    with pytest.raises(ValueError):
        clue_count_estimate(5, 1)


def test_reference_branch_counts():
    flat = [b for g in REFERENCE_BRANCH_COUNTS for b in g]
    assert len(flat) == 25
    assert branch_counts_sop(flat) == 195879469
