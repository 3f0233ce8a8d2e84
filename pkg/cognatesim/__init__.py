__version__ = "0.1dev1"

import os

if os.environ.get("__IN-SETUP", None) != "1":
    from .borrowing import evolve_tree_borrowing, simulate
    from .config import RunConfig, parse_config, read_config
    from .data import read_alignment, read_trees, write_alignment, write_trees
    from .evolve import evolve_tree
    from .metrics import height_difference, quartet_distance
    from .missing import apply_missing
    from .substitution import RateConfig
    from .traits import Alignment, EventLog, TraitSequence
    from .tree import (
        Tree,
        generate_yule,
        parse_newick,
        parse_newick_trees,
        serialize_newick,
    )

    __all__ = [
        "Alignment",
        "EventLog",
        "RateConfig",
        "RunConfig",
        "TraitSequence",
        "Tree",
        "apply_missing",
        "evolve_tree",
        "evolve_tree_borrowing",
        "generate_yule",
        "height_difference",
        "parse_config",
        "parse_newick",
        "parse_newick_trees",
        "quartet_distance",
        "read_alignment",
        "read_config",
        "read_trees",
        "serialize_newick",
        "simulate",
        "write_alignment",
        "write_trees",
    ]
