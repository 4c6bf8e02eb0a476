"""File formats: grid CSV, PGM charts, curve CSV, interlacing JSON, fixtures.

All floats go through :func:`fmt`, i.e. 12 significant digits and no locale
dependence, so identical inputs give byte-identical files.
"""

import json
import math
from pathlib import Path

import numpy as np

from .stability import CLASS_ORDER, GRAY_LEVELS

FIXTURE_DIR_NAME = "fixtures"


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    out = format(x, ".12g")
    return "0" if out == "-0" else out


def _write(path, text):
    path = Path(path)
    path.write_text(text, encoding="ascii", newline="\n")
    return path


def grid_csv(grid) -> str:
    lines = ["alpha,beta,delta,class"]
    alphas, betas = grid.alpha_axis.values, grid.beta_axis.values
    for i, b in enumerate(betas):
        for j, a in enumerate(alphas):
            cls = CLASS_ORDER[int(grid.classes[i, j])].value
            lines.append(f"{fmt(a)},{fmt(b)},{fmt(grid.deltas[i, j])},{cls}")
    return "\n".join(lines) + "\n"


def write_grid_csv(grid, path):
    return _write(path, grid_csv(grid))


def pgm(grid) -> str:
    """Plain (P2) PGM, one pixel per cell, beta increasing downward."""
    rows, cols = grid.classes.shape
    lut = np.array([GRAY_LEVELS[c] for c in CLASS_ORDER])
    pix = lut[grid.classes.astype(int)]
    lines = ["P2", f"{cols} {rows}", "255"]
    lines += [" ".join(str(int(v)) for v in row) for row in pix]
    return "\n".join(lines) + "\n"


def write_pgm(grid, path):
    return _write(path, pgm(grid))


def read_pgm(path) -> np.ndarray:
    tokens = [t for line in Path(path).read_text().splitlines()
              for t in line.split("#")[0].split()]
    if tokens[0] != "P2":
        raise ValueError("not a plain PGM file")
    w, h, _maxval = (int(t) for t in tokens[1:4])
    return np.array([int(t) for t in tokens[4:4 + w * h]]).reshape(h, w)


def curves_csv(curves) -> str:
    lines = ["curve_id,level,alpha,beta"]
    for cid, (level, pts) in enumerate(curves.all_curves()):
        tag = "+2" if level > 0 else "-2"
        lines += [f"{cid},{tag},{fmt(a)},{fmt(b)}" for a, b in pts]
    return "\n".join(lines) + "\n"


def write_curves_csv(curves, path):
    return _write(path, curves_csv(curves))


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj)) if math.isfinite(obj) else fmt(obj)
    return obj


def to_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(obj, path):
    return _write(path, to_json(obj))


def fixture_record(problem, method, order, delta, **extra):
    rec = {"problem": problem.describe(), "method": method, "order": order, "delta": delta}
    rec.update(extra)
    return rec


def load_fixture(path):
    return json.loads(Path(path).read_text())
