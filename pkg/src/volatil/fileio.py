"""CSV/JSON input and output.

Numbers are written with 17 significant digits so they round-trip exactly. Every
file is written to a temporary sibling and renamed into place, so a failing run
never leaves a truncated output behind.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ValidationError

FLOAT_FMT = "%.17g"


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % v
    return str(v)


def _atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def write_matrix_csv(path, header, first_col, matrix):
    """Rows of (first_col[i], *matrix[i]) under ``header``."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    rows = ([c, *map(float, r)] for c, r in zip(first_col, matrix))
    write_csv(path, header, rows)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(path, obj):
    _atomic_write(path, json.dumps(obj, indent=2, default=_json_default, sort_keys=False) + "\n")


def _parse_number(text: str, lineno: int, path) -> float:
    t = text.strip()
    if t == "" or t.upper() in ("NA", "NAN", "NULL", "NONE"):
        raise ValidationError(f"{path}:{lineno}: missing value")
    try:
        v = float(t)
    except ValueError:
        raise ValidationError(f"{path}:{lineno}: not a number: {t!r}") from None
    if not math.isfinite(v):
        raise ValidationError(f"{path}:{lineno}: non-finite value {t!r}")
    return v


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_series(path):
    """Read ``date,value`` (with a header) or a single headerless numeric column.

    Returns ``(values, labels)``; labels is None for the single-column layout.
    """
    try:
        with open(path, newline="") as fh:
            rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise ValidationError(f"{path}: no data")
    width = len(rows[0][1])
    if width not in (1, 2):
        raise ValidationError(f"{path}: expected 1 or 2 columns, found {width}")
    if width == 2 or not _is_number(rows[0][1][0]):
        rows = rows[1:]
    values, labels = [], []
    for lineno, r in rows:
        if len(r) != width:
            raise ValidationError(f"{path}:{lineno}: expected {width} fields, found {len(r)}")
        values.append(_parse_number(r[-1], lineno, path))
        if width == 2:
            labels.append(r[0].strip())
    return np.array(values), (tuple(labels) if width == 2 else None)


def read_table(path):
    """Header plus numeric columns; returns ``(names, matrix)``."""
    try:
        with open(path, newline="") as fh:
            rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    if len(rows) < 2:
        raise ValidationError(f"{path}: need a header row and at least one data row")
    names = [c.strip() for c in rows[0][1]]
    out = []
    for lineno, r in rows[1:]:
        if len(r) != len(names):
            raise ValidationError(f"{path}:{lineno}: expected {len(names)} fields, found {len(r)}")
        out.append([_parse_number(c, lineno, path) for c in r])
    return names, np.array(out, dtype=float)


def save_sv_draws(outdir, d, prefix: str = ""):
    """Write para/latent/latent0 CSV blocks and a JSON metadata sidecar."""
    outdir = Path(outdir)
    th = d.thinning
    write_matrix_csv(outdir / f"{prefix}para.csv", ["iteration", "mu", "phi", "sigma"],
                     th.para_iterations(d.para.shape[0]), d.para)
    times = d.latent_times
    write_matrix_csv(outdir / f"{prefix}latent.csv", ["iteration"] + [f"h_{t}" for t in times],
                     th.latent_iterations(d.latent.shape[0]), d.latent)
    write_matrix_csv(outdir / f"{prefix}latent0.csv", ["iteration", "h_0"],
                     th.latent_iterations(d.latent0.shape[0]), d.latent0)
    meta = {k: v for k, v in d.meta.items() if not k.startswith("chain_")}
    write_json(outdir / f"{prefix}draws.json", {
        "priors": d.priors.to_dict(),
        "thinning": {"para": th.para, "latent": th.latent, "time": th.time},
        "runtime": d.runtime,
        **meta,
    })


def save_regression_draws(path, draws):
    """Draw matrix with the ``beta_0, beta_1, ...`` naming scheme."""
    mat = draws.matrix()
    write_matrix_csv(path, ["iteration"] + draws.columns(), np.arange(1, mat.shape[0] + 1), mat)
