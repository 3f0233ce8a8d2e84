import datetime
import io

import pytest
from numpy.testing import assert_array_equal

from cognatesim.data import (
    format_alignment,
    parse_alignment,
    read_alignment,
    read_trees,
    strip_timestamp,
    write_alignment,
    write_trees,
)
from cognatesim.evolve import evolve_tree
from cognatesim.missing import apply_missing_languages
from cognatesim.substitution import RateConfig
from cognatesim.traits import Alignment, TraitSequence
from cognatesim.tree import parse_newick

WHEN = datetime.datetime(2016, 4, 26, 15, 9, 16, 506000)


def _alignment():
    return Alignment.from_rows(
        {"english": "110100", "german": "1?0110", "irish": "001011"},
        meaning_classes=[0, 0, 1, 1, 1, 2],
    )


def test_format_alignment_layout():
    text = format_alignment(_alignment(), "SD", timestamp=WHEN)
    lines = text.splitlines()
    assert lines[0] == "<beast version='2.0'>"
    assert lines[1] == "<data id='SD' dataType='binary'>"
    assert lines[2] == "    <sequence taxon='english' value='110100'/>"
    assert lines[3] == ""
    assert lines[-4:] == [
        "",
        "<!-- Meaning Classes: 0, 2, 5 -->",
        "<!-- Created at: 2016-04-26 15:09:16.506 -->",
        "</beast>",
    ]


def test_alignment_round_trip():
    aln = _alignment()
    again = parse_alignment(format_alignment(aln, timestamp=WHEN))
    assert again.taxa == aln.taxa
    assert again.to_frame().equals(aln.to_frame())
    assert_array_equal(again.meaning_classes, aln.meaning_classes)


@pytest.mark.parametrize(
    ("classes", "starts", "parsed"),
    [
        ([0, 1, 0, 1], "0, 1", [0, 1, 1, 1]),
        ([1, 1, 0], "0, 2", [0, 0, 1]),
        ([0, 0, 1, 1, 0], "0, 2", [0, 0, 1, 1, 1]),
    ],
)
def test_non_contiguous_meaning_classes_come_back_as_blocks(classes, starts, parsed):
    aln = Alignment.from_rows({"A": "1" * len(classes)}, meaning_classes=classes)
    text = format_alignment(aln, timestamp=WHEN)
    assert "<!-- Meaning Classes: %s -->" % starts in text
    again = parse_alignment(text)
    assert again.meaning_classes.tolist() == parsed
    assert again.to_frame().equals(aln.to_frame())


def test_simulated_alignment_round_trip(tmp_path):
    tree = parse_newick("((A:1,B:1):1,(C:1,D:1):1);")
    aln = evolve_tree(
        tree,
        TraitSequence("1" * 6),
        RateConfig.stochastic_dollo(1.0, 0.5),
        rng=0,
        meaning_classes=[0, 0, 1, 1, 2, 2],
    ).leaf_alignment()
    apply_missing_languages(aln, 0.2, rng=0)
    path = tmp_path / "out.xml"
    write_alignment(aln, str(path), data_id="SD")
    again = read_alignment(str(path))
    assert again.to_frame().equals(aln.to_frame())


def test_taxon_names_are_escaped():
    aln = Alignment.from_rows({"a'b": "01", "c<d": "10"})
    again = parse_alignment(format_alignment(aln, timestamp=WHEN))
    assert again.taxa == ["a'b", "c<d"]


def test_write_alignment_to_buffer():
    buf = io.StringIO()
    assert write_alignment(_alignment(), buf, timestamp=WHEN) is None
    assert buf.getvalue() == write_alignment(_alignment(), timestamp=WHEN)


def test_strip_timestamp():
    first = format_alignment(_alignment(), timestamp=WHEN)
    later = format_alignment(_alignment(), timestamp=WHEN + datetime.timedelta(1))
    assert first != later
    assert strip_timestamp(first) == strip_timestamp(later)
    assert "Created at" not in strip_timestamp(first)
    assert "Meaning Classes" in strip_timestamp(first)


def test_parse_alignment_without_meaning_classes():
    aln = parse_alignment(
        "<data id='x'><sequence taxon='A' value='011'/>"
        "<sequence taxon='B' value='110'/></data>"
    )
    assert aln.taxa == ["A", "B"]
    assert aln.meaning_classes.tolist() == [0, 1, 2]


@pytest.mark.parametrize(
    ("text", "match"),
    [
        ("<beast><data>", "Malformed"),
        ("<beast></beast>", "No <data>"),
        (
            "<data><sequence taxon='A' value='0'/><sequence taxon='A' value='1'/>"
            "</data>",
            "Duplicate taxon",
        ),
        (
            "<beast><data><sequence taxon='A' value='01'/></data>"
            "<!-- Meaning Classes: 1 --></beast>",
            "begin at 0",
        ),
        (
            "<data><sequence taxon='A' value='01'/>"
            "<sequence taxon='B' value='0'/></data>",
            "same length",
        ),
    ],
)
def test_parse_alignment_errors(text, match):
    with pytest.raises(ValueError, match=match):
        parse_alignment(text)


def test_read_and_write_trees(tmp_path):
    trees = read_trees(io.StringIO("(A:1,B:1);\n\n((A:1,B:1):1,C:2);\n"))
    assert [t.n_leaves for t in trees] == [2, 3]
    path = tmp_path / "trees.nwk"
    write_trees(trees, str(path))
    again = read_trees(str(path))
    assert [t.taxa for t in again] == [t.taxa for t in trees]
    assert write_trees(trees).count("\n") == 2
    assert read_trees(io.StringIO("")) == []


def test_read_trees_with_quoted_semicolons(tmp_path):
    text = "('A;x':1,B:1);\n(('it''s':1,C:1):1,D:2);\n"
    trees = read_trees(io.StringIO(text))
    assert [t.taxa for t in trees] == [["A;x", "B"], ["it's", "C", "D"]]
    path = tmp_path / "quoted.nwk"
    write_trees(trees, str(path))
    assert path.read_text() == text
    assert [t.taxa for t in read_trees(str(path))] == [t.taxa for t in trees]
