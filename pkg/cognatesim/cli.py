"""Command-line interface

::

    cognatesim generate CONFIG N_MEANING_CLASSES [OUTPUT] [--seed S]
    cognatesim validate [--suite NAME ...] [--n N] [--seed S] [--outdir DIR]
    cognatesim sweep --model {gtr,sd} --rates B [B ...] --trees N --outdir DIR
    cognatesim compare --true FILE --others FILE [FILE ...] [--outdir DIR]

Exit status is 0 on success, 1 on usage errors, 2 on unreadable or invalid
input and 3 when a validation suite fails.
"""
import argparse
import dataclasses
import logging
import os
import sys

import pandas as pd

from . import __version__, metrics, validation
from .borrowing import derive_gtr_rate, derive_sd_rates, simulate
from .config import ConfigError, block_meaning_classes, read_config
from .data import read_trees, write_alignment, write_trees
from .missing import apply_missing
from .substitution import RateConfig
from .traits import TraitSequence
from .tree import generate_yule, scale_to_height
from .util import run_replicates, spawn_generators

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_VALIDATION = 3

SUITE_CHOICES = sorted(validation.SUITES) + ["all"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def generate(config, rng, n_meaning_classes=None):
    """One replicate of `config`: tree, full alignment, leaf alignment

    The leaf alignment has the configured missing-data model applied.
    """
    if n_meaning_classes is None:
        n_meaning_classes = config.n_meaning_classes
    tree = config.load_tree(rng)
    root = config.root_sequence(rng)
    classes = block_meaning_classes(len(root), n_meaning_classes)
    alignment = simulate(tree, root, config.rates, rng, meaning_classes=classes)
    leaves = apply_missing(
        alignment.leaf_alignment(), config.missing_model, config.missing_rate, rng
    )
    return tree, alignment, leaves


class _Generate:
    def __init__(self, config, n_meaning_classes):
        self.config = config
        self.n_meaning_classes = n_meaning_classes

    def __call__(self, rng):
        _, _, leaves = generate(self.config, rng, self.n_meaning_classes)
        return leaves


def _replicate_path(path, i, n):
    if n == 1:
        return path
    stem, ext = os.path.splitext(path)
    return "%s_%d%s" % (stem, i, ext)


def _cmd_generate(args):
    config = read_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.replicates is not None:
        changes["replicates"] = args.replicates
    if changes:
        config = dataclasses.replace(config, **changes)
    data_id = config.rates.model.value.upper()
    alignments = run_replicates(
        _Generate(config, args.n_meaning_classes),
        config.replicates,
        seed=config.seed,
        n_jobs=args.jobs,
    )
    for i, alignment in enumerate(alignments):
        if args.output is None:
            sys.stdout.write(write_alignment(alignment, data_id=data_id))
        else:
            path = _replicate_path(args.output, i, len(alignments))
            write_alignment(alignment, path, data_id=data_id)
    return EXIT_OK


def _cmd_validate(args):
    names = args.suite or ["all"]
    if "all" in names:
        names = sorted(validation.SUITES)
    os.makedirs(args.outdir, exist_ok=True)
    results = []
    for name in names:
        result = validation.run_suite(
            name, n=args.n, seed=args.seed, alpha=args.alpha, n_jobs=args.jobs
        )
        for key, df in result.histograms.items():
            path = os.path.join(args.outdir, "%s_%s.csv" % (name, key))
            df.to_csv(path, index=False)
            logger.info("Wrote %s", path)
        results.append(result)
    report = validation.fit_report(results)
    report.to_csv(os.path.join(args.outdir, "fit_report.csv"), index=False)
    print(report.to_string(index=False))
    if not report["pass"].all():
        logger.error("%d of %d fits failed", (~report["pass"]).sum(), len(report))
        return EXIT_VALIDATION
    return EXIT_OK


class _SweepReplicate:
    def __init__(self, args, rates):
        self.args = args
        self.rates = rates

    def __call__(self, rng):
        args = self.args
        tree = generate_yule(args.leaves, args.yule_rate, rng)
        if args.height is not None:
            tree = scale_to_height(tree, args.height)
        root = TraitSequence("1" * args.root_length)
        alignment = simulate(tree, root, self.rates, rng)
        return tree, alignment.leaf_alignment()


def _sweep_rates(args, b):
    if args.model == "gtr":
        return RateConfig.gtr(derive_gtr_rate(args.loss_fraction), borrow_rate=b)
    birth, death = derive_sd_rates(args.loss_fraction, args.root_length)
    return RateConfig.stochastic_dollo(birth, death, borrow_rate=b)


def _cmd_sweep(args):
    seeds = spawn_generators(args.seed, len(args.rates))
    for b, rng in zip(args.rates, seeds):
        outdir = os.path.join(args.outdir, "rate_%s" % b)
        os.makedirs(outdir, exist_ok=True)
        results = run_replicates(
            _SweepReplicate(args, _sweep_rates(args, b)),
            args.trees,
            seed=rng,
            n_jobs=args.jobs,
        )
        for i, (tree, alignment) in enumerate(results):
            write_trees([tree], os.path.join(outdir, "tree_%d.nwk" % i))
            write_alignment(
                alignment,
                os.path.join(outdir, "alignment_%d.xml" % i),
                data_id=args.model.upper(),
            )
        logger.info("Wrote %d replicates to %s", len(results), outdir)
    return EXIT_OK


def _with_summary(df, column):
    summary = metrics.summarize(df[column]).drop("n")
    rows = pd.DataFrame({"tree": summary.index, column: summary.to_numpy()})
    return pd.concat([df, rows], ignore_index=True)


def _cmd_compare(args):
    true_trees = read_trees(args.true)
    if len(true_trees) != 1:
        raise ConfigError(
            "Expected one true tree in %r. Got %d" % (args.true, len(true_trees))
        )
    (true_tree,) = true_trees
    names = []
    others = []
    for path in args.others:
        for i, tree in enumerate(read_trees(path)):
            names.append("%s:%d" % (os.path.basename(path), i))
            others.append(tree)
    if not others:
        raise ConfigError("No trees to compare against")
    quartet = pd.DataFrame(
        {
            "tree": names,
            "quartet_distance": [
                metrics.quartet_distance(true_tree, t) for t in others
            ],
        }
    )
    height = pd.DataFrame(
        {
            "tree": names,
            "height_difference": [
                metrics.height_difference(true_tree, t) for t in others
            ],
        }
    )
    os.makedirs(args.outdir, exist_ok=True)
    quartet = _with_summary(quartet, "quartet_distance")
    height = _with_summary(height, "height_difference")
    quartet.to_csv(os.path.join(args.outdir, "quartet.csv"), index=False)
    height.to_csv(os.path.join(args.outdir, "height.csv"), index=False)
    print(quartet.to_string(index=False))
    print(height.to_string(index=False))
    return EXIT_OK


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument(
        "--jobs", type=int, default=1, help="worker processes (default: 1)"
    )


def make_parser():
    parser = _Parser(
        prog="cognatesim",
        description="Simulate binary cognate data along language trees.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="more logging"
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="errors only")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="simulate alignments from an XML config")
    p.add_argument("config", help="configuration XML file")
    p.add_argument(
        "n_meaning_classes",
        type=int,
        help="number of contiguous meaning classes; 0 for one per column",
    )
    p.add_argument("output", nargs="?", help="output file (default: stdout)")
    p.add_argument("--replicates", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("validate", help="run the statistical validation suites")
    p.add_argument("--suite", nargs="+", choices=SUITE_CHOICES, default=None)
    p.add_argument("--n", type=int, default=None, help="suite size")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--outdir", default=".")
    _add_common(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("sweep", help="generate trees and alignments per rate")
    p.add_argument("--model", choices=["gtr", "sd"], required=True)
    p.add_argument(
        "--rates", type=float, nargs="+", required=True, help="borrowing rates"
    )
    p.add_argument("--trees", type=int, required=True, help="trees per rate")
    p.add_argument("--leaves", type=int, default=80)
    p.add_argument("--yule-rate", type=float, default=0.00055)
    p.add_argument("--root-length", type=int, default=2449)
    p.add_argument(
        "--loss-fraction",
        type=float,
        default=0.1,
        help="share of traits lost per 1000 time units",
    )
    p.add_argument("--height", type=float, default=None, help="rescale trees")
    p.add_argument("--outdir", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("compare", help="quartet and height distances to a tree")
    p.add_argument("--true", required=True, help="Newick file of the true tree")
    p.add_argument("--others", nargs="+", required=True, help="Newick files")
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=_cmd_compare)
    return parser


def _configure_logging(verbose, quiet):
    if quiet:
        level = logging.ERROR
    elif verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def main(argv=None):
    """Run the command line with `argv` and return the exit status"""
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code
    _configure_logging(args.verbose, args.quiet)
    try:
        return args.func(args)
    except (ConfigError, OSError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except ValueError as e:
        logger.error("Invalid input: %s", e)
        return EXIT_CONFIG
