"""Benchmark environments."""
from .sokoban import (
    REFERENCE_BRANCH_COUNTS,
    SAMPLE_LEVEL,
    SokobanEnv,
    SokobanLevel,
    SokobanParseError,
    SokobanState,
    clue_count_estimate,
    load_level,
    sokoban_expand,
    sokoban_parse,
    sokoban_signal,
)
from .trees import (
    BinaryTree,
    ChainEnv,
    ClueTree,
    ClueTreeSpec,
    DChain,
    DepthArityTree,
    FiniteTree,
    LeftRightTree,
    MisleadingReward,
    chain_env,
    d_chain_env,
    depth_arity_env,
    gen_clue_tree,
    misleading_reward_env,
    random_proper_tree,
)
