"""Run configuration in the simulator's XML format

A configuration names a tree, a root language, a substitution model and a
missing-data model::

    <beast version='2.0'>
        <tree id='tree' spec='beast.util.TreeParser' newick='(A:1,B:1)'/>
        <run spec="beast.app.seqgen.LanguageSequenceGen" tree='@tree'>
            <root spec='Sequence' value="0101" taxon="root"/>
            <subModel spec='ExplicitBinaryGTR' rate="0.5" borrowrate="0.0"
                      borrowzrate="0.0" noEmptyTrait="false"/>
            <missingModel spec='MissingLanguageModel' rate="0.0"/>
        </run>
    </beast>

Besides an inline Newick tree, ``<tree spec='YuleTree' leaves='80'
birthRate='0.00055'/>`` and ``<tree file='trees.nwk'/>`` are accepted.  The
root may also be ``<root spec='RootSequence' length='2449'/>`` (every trait
present) or ``<root spec='StationaryRoot'/>`` (a stationary
stochastic-Dollo draw).
"""
import logging
import math
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from xml.sax.saxutils import quoteattr

import numpy as np

from .substitution import ModelKind, RateConfig, sd_stationary_sequence
from .traits import TraitSequence
from .tree import generate_yule, parse_newick

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """The run configuration is malformed"""


MODEL_SPECS = {
    "ExplicitBinaryGTR": ModelKind.GTR,
    "ExplicitBinaryCovarion": ModelKind.COVARION,
    "ExplicitBinaryStochasticDollo": ModelKind.SD,
}
MISSING_SPECS = {
    "MissingLanguageModel": "languages",
    "MissingMeaningClassModel": "meaning_classes",
}
_NO_EMPTY_TEXT = {None: "false", "language": "true", "meaning_class": "meaningClass"}


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to generate alignments

    Exactly one of `newick`, `tree_file` and `yule` gives the tree, and at
    most one of `root_value` and `root_length` gives the root (neither
    means a stationary stochastic-Dollo root).
    """

    rates: RateConfig
    newick: str = None
    tree_file: str = None
    yule: tuple = None
    root_value: str = None
    root_length: int = None
    missing_model: str = None
    missing_rate: float = 0.0
    replicates: int = 1
    seed: int = None
    n_meaning_classes: int = 0

    def __post_init__(self):
        sources = [s for s in (self.newick, self.tree_file, self.yule) if s is not None]
        if len(sources) != 1:
            raise ConfigError(
                "Expected exactly one tree source. Got %d" % len(sources)
            )
        if self.root_value is not None:
            if self.root_length is not None:
                raise ConfigError("Give either a root value or a root length")
            if not self.root_value or set(self.root_value) - {"0", "1"}:
                raise ConfigError(
                    "Root sequence must be a non-empty string of 0 and 1. Got %r"
                    % self.root_value
                )
        if self.root_length is not None and self.root_length < 1:
            raise ConfigError("Root length must be positive. Got %r" % self.root_length)
        if self.root_value is None and self.root_length is None:
            if self.rates.model is not ModelKind.SD:
                raise ConfigError("A stationary root needs the stochastic-Dollo model")
        if not 0 <= self.missing_rate <= 1:
            raise ConfigError(
                "Missing-data rate must be in [0, 1]. Got %r" % self.missing_rate
            )
        if self.missing_model not in (None, "languages", "meaning_classes"):
            raise ConfigError("Unknown missing-data model %r" % (self.missing_model,))
        if self.missing_model is None and self.missing_rate > 0:
            raise ConfigError("A missing-data rate needs a missing-data model")
        if self.replicates < 1:
            raise ConfigError("replicates must be positive. Got %r" % self.replicates)
        if self.n_meaning_classes < 0:
            raise ConfigError(
                "n_meaning_classes must be non-negative. Got %r"
                % self.n_meaning_classes
            )

    def load_tree(self, rng=None):
        """The configured tree; Yule trees are drawn with `rng`"""
        if self.newick is not None:
            return parse_newick(self.newick)
        if self.tree_file is not None:
            try:
                with open(self.tree_file) as f:
                    return parse_newick(f.read())
            except OSError as e:
                raise ConfigError("Cannot read tree file: %s" % e) from e
        n_leaves, birth_rate = self.yule
        return generate_yule(n_leaves, birth_rate, rng)

    def root_sequence(self, rng=None):
        if self.root_value is not None:
            return TraitSequence(self.root_value)
        if self.root_length is not None:
            return TraitSequence("1" * self.root_length)
        return sd_stationary_sequence(
            self.rates.birth_rate, self.rates.death_rate, rng
        )

    def to_xml(self):
        """Configuration as XML text accepted by :func:`parse_config`"""
        rates = self.rates
        lines = ["<beast version='2.0'>"]
        if self.newick is not None:
            lines.append(
                "    <tree id='tree' spec='beast.util.TreeParser' "
                "IsLabelledNewick='true' newick=%s/>" % quoteattr(self.newick)
            )
        elif self.tree_file is not None:
            lines.append("    <tree id='tree' file=%s/>" % quoteattr(self.tree_file))
        else:
            lines.append(
                "    <tree id='tree' spec='YuleTree' leaves='%d' birthRate='%r'/>"
                % self.yule
            )
        run = "    <run spec='beast.app.seqgen.LanguageSequenceGen' tree='@tree'"
        run += " replicates='%d'" % self.replicates
        if self.seed is not None:
            run += " seed='%d'" % self.seed
        if self.n_meaning_classes:
            run += " meaningClasses='%d'" % self.n_meaning_classes
        lines.append(run + ">")
        if self.root_value is not None:
            lines.append(
                "        <root spec='Sequence' value='%s' taxon='root'/>"
                % self.root_value
            )
        elif self.root_length is not None:
            lines.append(
                "        <root spec='RootSequence' length='%d'/>" % self.root_length
            )
        else:
            lines.append("        <root spec='StationaryRoot'/>")
        spec = {v: k for k, v in MODEL_SPECS.items()}[rates.model]
        attrs = []
        if rates.model is ModelKind.SD:
            attrs += [("birth", rates.birth_rate), ("death", rates.death_rate)]
        else:
            if rates.q01 == rates.q10:
                attrs.append(("rate", rates.q01))
            else:
                attrs += [("q01", rates.q01), ("q10", rates.q10)]
            if rates.model is ModelKind.COVARION:
                attrs += [("delta", rates.delta), ("kappa", rates.kappa)]
        z = 0.0 if math.isinf(rates.local_z) else rates.local_z
        attrs += [("borrowrate", rates.borrow_rate), ("borrowzrate", z)]
        text = " ".join("%s='%r'" % pair for pair in attrs)
        lines.append(
            "        <subModel spec='%s' %s noEmptyTrait='%s' method='%s'/>"
            % (spec, text, _NO_EMPTY_TEXT[rates.no_empty_trait], rates.method)
        )
        missing = {v: k for k, v in MISSING_SPECS.items()}.get(
            self.missing_model, "MissingLanguageModel"
        )
        lines.append(
            "        <missingModel spec='%s' rate='%r'/>" % (missing, self.missing_rate)
        )
        lines.append("    </run>")
        lines.append("</beast>")
        return "\n".join(lines) + "\n"


def _float(elem, name, default=None):
    value = elem.get(name)
    if value is None:
        if default is None:
            raise ConfigError(
                "<%s> is missing required attribute %r" % (elem.tag, name)
            )
        return default
    try:
        return float(value)
    except ValueError:
        raise ConfigError(
            "Attribute %r of <%s> must be a number. Got %r" % (name, elem.tag, value)
        ) from None


def _int(elem, name, default=None):
    value = _float(elem, name, default)
    if value != int(value):
        raise ConfigError(
            "Attribute %r of <%s> must be an integer. Got %r" % (name, elem.tag, value)
        )
    return int(value)


def _no_empty(value):
    if value is None:
        return None
    key = value.strip()
    lookup = {"false": None, "true": "language", "meaningclass": "meaning_class"}
    try:
        return lookup[key.lower()]
    except KeyError:
        raise ConfigError("Invalid noEmptyTrait value %r" % value) from None


def _parse_rates(elem):
    spec = elem.get("spec")
    try:
        model = MODEL_SPECS[spec]
    except KeyError:
        raise ConfigError(
            "Unknown subModel spec %r; expected one of %r" % (spec, sorted(MODEL_SPECS))
        ) from None
    common = {
        "borrow_rate": _float(elem, "borrowrate", 0.0),
        "local_z": _float(elem, "borrowzrate", 0.0),
        "no_empty_trait": _no_empty(elem.get("noEmptyTrait")),
        "method": elem.get("method", "matrix"),
    }
    try:
        if model is ModelKind.SD:
            return RateConfig.stochastic_dollo(
                _float(elem, "birth"), _float(elem, "death"), **common
            )
        if elem.get("rate") is not None:
            q01 = q10 = _float(elem, "rate")
        else:
            q01, q10 = _float(elem, "q01"), _float(elem, "q10")
        if model is ModelKind.COVARION:
            return RateConfig.covarion(
                q01, q10, _float(elem, "delta"), _float(elem, "kappa"), **common
            )
        return RateConfig.gtr(q01=q01, q10=q10, **common)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from e


def parse_config(text, base_dir=None):
    """Read a run configuration from XML text

    Parameters
    ----------
    text : str
    base_dir : str, optional
        Directory against which a relative tree file is resolved.

    Returns
    -------
    RunConfig

    Raises
    ------
    ConfigError

    Examples
    --------
    >>> cfg = parse_config('''<beast>
    ...   <tree newick='(A:1,B:1)'/>
    ...   <run>
    ...     <root spec='Sequence' value='0110'/>
    ...     <subModel spec='ExplicitBinaryGTR' rate='0.5' borrowrate='0.0'/>
    ...   </run>
    ... </beast>''')
    >>> cfg.rates.model.value, cfg.rates.borrow_rate, cfg.root_value
    ('gtr', 0.0, '0110')
    """
    try:
        doc = ET.fromstring(text)
    except ET.ParseError as e:
        raise ConfigError("Malformed XML: %s" % e) from e
    tree = doc.find("tree")
    run = doc.find("run")
    if tree is None or run is None:
        raise ConfigError("Configuration needs <tree> and <run> elements")

    kwargs = {}
    if tree.get("spec") == "YuleTree":
        kwargs["yule"] = (_int(tree, "leaves"), _float(tree, "birthRate"))
    elif tree.get("file") is not None:
        path = tree.get("file")
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        kwargs["tree_file"] = path
    elif tree.get("newick") is not None:
        kwargs["newick"] = tree.get("newick")
    else:
        raise ConfigError("<tree> needs a newick, file or YuleTree spec")

    root = run.find("root")
    if root is None:
        raise ConfigError("<run> needs a <root> element")
    root_spec = root.get("spec", "Sequence")
    if root_spec == "Sequence":
        value = root.get("value")
        if value is None:
            raise ConfigError("<root> is missing required attribute 'value'")
        kwargs["root_value"] = "".join(value.split())
    elif root_spec == "RootSequence":
        kwargs["root_length"] = _int(root, "length")
    elif root_spec != "StationaryRoot":
        raise ConfigError("Unknown root spec %r" % root_spec)

    sub_model = run.find("subModel")
    if sub_model is None:
        raise ConfigError("<run> needs a <subModel> element")
    kwargs["rates"] = _parse_rates(sub_model)

    missing = run.find("missingModel")
    if missing is not None:
        spec = missing.get("spec")
        if spec not in MISSING_SPECS:
            raise ConfigError(
                "Unknown missingModel spec %r; expected one of %r"
                % (spec, sorted(MISSING_SPECS))
            )
        rate = _float(missing, "rate", 0.0)
        kwargs["missing_rate"] = rate
        kwargs["missing_model"] = MISSING_SPECS[spec] if rate > 0 else None

    kwargs["replicates"] = _int(run, "replicates", 1)
    if run.get("seed") is not None:
        kwargs["seed"] = _int(run, "seed")
    kwargs["n_meaning_classes"] = _int(run, "meaningClasses", 0)
    return RunConfig(**kwargs)


def read_config(path):
    """Parse the configuration file at `path`"""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError("Cannot read configuration: %s" % e) from e
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


def block_meaning_classes(length, n_classes):
    """Meaning class per column for `n_classes` contiguous blocks

    Zero classes means one class per column.

    Examples
    --------
    >>> block_meaning_classes(6, 3).tolist()
    [0, 0, 1, 1, 2, 2]
    >>> block_meaning_classes(3, 0).tolist()
    [0, 1, 2]
    """
    if n_classes < 0:
        raise ValueError("n_classes must be non-negative. Got %r" % n_classes)
    if n_classes == 0 or n_classes >= length:
        return np.arange(length)
    return np.arange(length) * n_classes // length
