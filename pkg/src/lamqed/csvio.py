"""CSV emission and ingestion.

Every emitted file starts with '#'-prefixed metadata (toolkit version,
resolved configuration echo, derived scalars), then a column-name
header and rows of scientific-notation values with 12 significant
digits.  No timestamps, no locale dependence: identical inputs yield
byte-identical files.  Frequencies are ordinary Hz.
"""

import numpy as np

from .errors import DataFormatError
from .version import __version__


def format_value(x):
    """12-significant-digit scientific representation."""
    return "%.11e" % float(x)


def write_csv(path, columns, meta=()):
    """Write named columns with metadata lines.

    columns: sequence of (name, 1-D array) with equal lengths;
    meta: strings emitted as '# <line>' after the version line.
    """
    names = [name for name, _ in columns]
    arrays = [np.atleast_1d(np.asarray(col, dtype=float))
              for _, col in columns]
    if any(a.ndim != 1 or a.size != arrays[0].size for a in arrays):
        raise DataFormatError("columns must be 1-D and equal length")
    lines = ["# lamqed %s" % __version__]
    lines += ["# %s" % m for m in meta]
    lines.append(",".join(names))
    for i in range(arrays[0].size):
        lines.append(",".join(format_value(a[i]) for a in arrays))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report(path, pairs, meta=()):
    """Write a key,value report CSV (scalar results, e.g. fit output)."""
    lines = ["# lamqed %s" % __version__]
    lines += ["# %s" % m for m in meta]
    lines.append("key,value")
    for key, value in pairs:
        lines.append("%s,%s" % (key, format_value(value)))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path):
    """Read a CSV in the emitted dialect.

    Returns (meta, columns): metadata lines of the form 'k = v' become
    meta[k] = v (others are kept under their full text with value
    None); columns maps each name to a float array.
    """
    meta = {}
    names = None
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
                else:
                    meta[body] = None
                continue
            if names is None:
                names = [t.strip() for t in line.split(",")]
                if any(not n for n in names):
                    raise DataFormatError("%s:%d: empty column name"
                                          % (path, lineno))
                continue
            tokens = line.split(",")
            if len(tokens) != len(names):
                raise DataFormatError(
                    "%s:%d: expected %d values, got %d"
                    % (path, lineno, len(names), len(tokens)))
            try:
                rows.append([float(t) for t in tokens])
            except ValueError:
                raise DataFormatError("%s:%d: non-numeric value"
                                      % (path, lineno)) from None
    if names is None:
        raise DataFormatError("%s: no column header found" % path)
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(names))
    return meta, {name: data[:, j] for j, name in enumerate(names)}


def require_columns(columns, names, path):
    """Fetch required columns by name or fail with the missing list."""
    missing = [n for n in names if n not in columns]
    if missing:
        raise DataFormatError("%s: missing column(s): %s"
                              % (path, ", ".join(missing)))
    return [columns[n] for n in names]
