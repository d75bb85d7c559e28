"""CSV serialization of result rows."""

import csv
import io
import os
import tempfile

HEADER = ("experiment", "sweep_key", "sweep_value", "metric", "value", "std_error", "trials", "seed")


def format_number(x):
    """Shortest decimal that round-trips; integers stay integral."""
    if isinstance(x, (bool,)):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int) or (hasattr(x, "dtype") and x.dtype.kind in "iu"):
        return str(int(x))
    return repr(float(x))


def format_sweep_value(v):
    if isinstance(v, tuple):
        return "|".join(format_sweep_value(x) for x in v)
    if isinstance(v, str):
        return v
    return format_number(v)


def format_csv(rows, seed):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow((r.experiment, r.sweep_key, format_sweep_value(r.sweep_value), r.metric,
                    format_number(r.value), format_number(r.std_error), str(int(r.trials)), str(int(seed))))
    return buf.getvalue()


def emit_csv(rows, path, seed):
    """Write rows atomically: a temp file in the target directory, then rename."""
    text = format_csv(rows, seed).encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".spacemimo-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
