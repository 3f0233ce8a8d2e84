"""Reading and writing alignments and tree files

Alignments are written as a BEAST2-style binary ``<data>`` block, one
``<sequence>`` per leaf taxon, followed by a comment giving the column of
the first trait in each meaning class and a creation timestamp::

    <beast version='2.0'>
    <data id='SD' dataType='binary'>
        <sequence taxon='A' value='0110'/>

        <sequence taxon='B' value='1?10'/>
    </data>

    <!-- Meaning Classes: 0, 2 -->
    <!-- Created at: 2016-04-26 15:09:16.506 -->
    </beast>
"""
import datetime
import io
import logging
import re
import xml.etree.ElementTree as ET
from xml.sax.saxutils import escape

import numpy as np

from .traits import Alignment
from .tree import parse_newick_trees, serialize_newick

logger = logging.getLogger(__name__)

_MEANING_CLASSES_RE = re.compile(r"<!--\s*Meaning Classes:\s*([0-9,\s]*?)\s*-->")
_TIMESTAMP_RE = re.compile(r"<!--\s*Created at:.*?-->\n?")


def _attr(value):
    return "'%s'" % escape(str(value), {"'": "&apos;"})


def _open(path_or_buf, mode):
    if hasattr(path_or_buf, "write" if "w" in mode else "read"):
        return path_or_buf, False
    return open(path_or_buf, mode, encoding="utf-8"), True


def format_alignment(alignment, data_id="alignment", timestamp=None):
    """Alignment as XML text

    Parameters
    ----------
    alignment : Alignment
        Only the leaf languages are written, in alignment order.
    data_id : str, default="alignment"
        ``id`` attribute of the ``<data>`` element.
    timestamp : datetime.datetime, optional
        Creation time recorded in the trailing comment; defaults to now.

    Returns
    -------
    str

    Notes
    -----
    The meaning-class comment only records the first column of each
    class.  Classes whose columns are not contiguous, as after births
    under stochastic Dollo, do not survive :func:`parse_alignment`: each
    column is read back into the class of the nearest recorded start at
    or before it.

    Examples
    --------
    >>> import datetime
    >>> aln = Alignment.from_rows({"A": "0110", "B": "1?10"},
    ...                           meaning_classes=[0, 0, 1, 1])
    >>> when = datetime.datetime(2016, 4, 26, 15, 9, 16, 506000)
    >>> print(format_alignment(aln, "SD", timestamp=when), end="")
    <beast version='2.0'>
    <data id='SD' dataType='binary'>
        <sequence taxon='A' value='0110'/>
    <BLANKLINE>
        <sequence taxon='B' value='1?10'/>
    </data>
    <BLANKLINE>
    <!-- Meaning Classes: 0, 2 -->
    <!-- Created at: 2016-04-26 15:09:16.506 -->
    </beast>
    """
    if timestamp is None:
        timestamp = datetime.datetime.now()
    frame = alignment.to_frame()
    rows = [
        "    <sequence taxon=%s value='%s'/>\n" % (_attr(taxon), "".join(row))
        for taxon, row in zip(frame.index, frame.to_numpy())
    ]
    starts = ", ".join(str(s) for s in sorted(alignment.meaning_class_starts()))
    return (
        "<beast version='2.0'>\n"
        + "<data id=%s dataType='binary'>\n" % _attr(data_id)
        + "\n".join(rows)
        + "</data>\n"
        + "\n"
        + "<!-- Meaning Classes: %s -->\n" % starts
        + "<!-- Created at: %s -->\n"
        % timestamp.isoformat(sep=" ", timespec="milliseconds")
        + "</beast>\n"
    )


def write_alignment(alignment, path_or_buf=None, data_id="alignment", timestamp=None):
    """Write the leaf alignment as XML

    Parameters
    ----------
    alignment : Alignment
    path_or_buf : str, path object or file-like, optional
        Destination. If None, the XML text is returned.
    data_id : str, default="alignment"
    timestamp : datetime.datetime, optional

    Returns
    -------
    str or None
    """
    text = format_alignment(alignment, data_id=data_id, timestamp=timestamp)
    if path_or_buf is None:
        return text
    f, close = _open(path_or_buf, "w")
    try:
        f.write(text)
    finally:
        if close:
            f.close()
    logger.info("Wrote alignment of %d taxa to %s", len(alignment.leaves), path_or_buf)


def strip_timestamp(text):
    """XML text without the creation timestamp comment

    Two runs with the same configuration and seed give identical text once
    the timestamp is removed.
    """
    return _TIMESTAMP_RE.sub("", text)


def parse_alignment(text):
    """Alignment from the XML text of :func:`format_alignment`

    Meaning classes are rebuilt as contiguous blocks starting at the
    recorded columns, so non-contiguous classes come back split into
    blocks (see :func:`format_alignment`).  Without the comment every
    column is its own class.

    Examples
    --------
    >>> aln = parse_alignment('''<beast version='2.0'>
    ... <data id='x' dataType='binary'>
    ...     <sequence taxon='A' value='01?'/>
    ... </data>
    ... <!-- Meaning Classes: 0, 1 -->
    ... </beast>''')
    >>> aln.taxa, str(aln[0]), aln.meaning_classes.tolist()
    (['A'], '01?', [0, 1, 1])
    """
    try:
        doc = ET.fromstring(text)
    except ET.ParseError as e:
        raise ValueError("Malformed alignment XML: %s" % e) from e
    data = doc if doc.tag == "data" else doc.find("data")
    if data is None:
        raise ValueError("No <data> element found")
    rows = {}
    for elem in data.iter("sequence"):
        taxon = elem.get("taxon")
        if taxon in rows:
            raise ValueError("Duplicate taxon %r" % (taxon,))
        rows[taxon] = elem.get("value", "")
    length = len(next(iter(rows.values()))) if rows else 0
    meaning_classes = None
    match = _MEANING_CLASSES_RE.search(text)
    if match and match.group(1).strip():
        starts = [int(s) for s in match.group(1).split(",")]
        if starts[0] != 0 or sorted(starts) != starts:
            raise ValueError("Meaning-class starts must begin at 0 and increase")
        meaning_classes = (
            np.searchsorted(starts, np.arange(length), side="right") - 1
        )
    return Alignment.from_rows(rows, meaning_classes=meaning_classes)


def read_alignment(path_or_buf):
    """Read an alignment written by :func:`write_alignment`"""
    f, close = _open(path_or_buf, "r")
    try:
        text = f.read()
    finally:
        if close:
            f.close()
    return parse_alignment(text)


def read_trees(path_or_buf):
    """Trees from a file of ``;``-terminated Newick strings

    Examples
    --------
    >>> import io
    >>> trees = read_trees(io.StringIO("(A:1,B:1);\\n((A:1,B:1):1,C:2);\\n"))
    >>> [t.n_leaves for t in trees]
    [2, 3]
    """
    f, close = _open(path_or_buf, "r")
    try:
        text = f.read()
    finally:
        if close:
            f.close()
    return parse_newick_trees(text)


def write_trees(trees, path_or_buf=None):
    """Write trees one Newick string per line

    Returns the text when `path_or_buf` is None.
    """
    buf = io.StringIO()
    for tree in trees:
        buf.write(serialize_newick(tree) + "\n")
    if path_or_buf is None:
        return buf.getvalue()
    f, close = _open(path_or_buf, "w")
    try:
        f.write(buf.getvalue())
    finally:
        if close:
            f.close()
