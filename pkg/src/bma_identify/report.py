"""Serialization of tables, figure data and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .core import INVESTIGATORS, NATURES

TABLE_HEADER = ("nature", "investigator", "ramse", "mc_se", "n_draws")


def fmt(x):
    """Float text with 17 significant digits; integers and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "null"
        return "%.17g" % x
    return str(x)


def dumps(obj, indent=2, _level=0):
    """JSON text in which every float carries 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_, int, np.integer, float, np.floating)):
        return fmt(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj):
    path = Path(path)
    path.write_text(dumps(obj) + "\n")
    return path


def table_to_dict(table, meta=None):
    d = {
        "label": table.label,
        "cells": [
            {
                "nature": n,
                "investigator": i,
                "ramse": table.cell(n, i).value,
                "mc_se": table.cell(n, i).mc_se,
                "n_draws": table.cell(n, i).n_draws,
            }
            for n in NATURES
            for i in INVESTIGATORS
        ],
        "pct_unwarranted": table.pct_unwarranted,
        "pct_unwarranted_se": table.pct_unwarranted_se,
        "pct_warranted": table.pct_warranted,
        "pct_warranted_se": table.pct_warranted_se,
    }
    if meta:
        d.update(meta)
    return d


def write_table_csv(path, table, meta=None):
    """Four cell rows, then percentage-change rows and run metadata rows."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for n in NATURES:
            for i in INVESTIGATORS:
                c = table.cell(n, i)
                w.writerow([n, i, fmt(c.value), fmt(c.mc_se), fmt(c.n_draws)])
        w.writerow(["pct_unwarranted", "", fmt(table.pct_unwarranted), fmt(table.pct_unwarranted_se), ""])
        w.writerow(["pct_warranted", "", fmt(table.pct_warranted), fmt(table.pct_warranted_se), ""])
        for k, v in (meta or {}).items():
            w.writerow([k, "", fmt(v), "", ""])
    return path


def write_table(path_stem, table, fmt_name="csv", meta=None):
    path_stem = Path(path_stem)
    if fmt_name == "json":
        return write_json(path_stem.with_suffix(".json"), table_to_dict(table, meta))
    return write_table_csv(path_stem.with_suffix(".csv"), table, meta)


def write_columns(path, header, columns):
    """CSV with one column per entry of ``columns``."""
    path = Path(path)
    cols = [np.asarray(c) for c in columns]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("columns have different lengths")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([fmt(v.item() if hasattr(v, "item") else v) for v in row])
    return path


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def format_table(table):
    """Plain-text rendering for terminal output."""
    lines = [f"{table.label}", f"{'Nature':>8} {'pi0':>12} {'mix':>12}"]
    for n in NATURES:
        vals = []
        for i in INVESTIGATORS:
            c = table.cell(n, i)
            vals.append(f"{c.value:.4f}" + (f"({c.mc_se:.4f})" if c.mc_se > 0 else "        "))
        lines.append(f"{n:>8} " + " ".join(f"{v:>12}" for v in vals))
    lines.append(f"unwarranted change: {table.pct_unwarranted:+.1f}% (se {table.pct_unwarranted_se:.1f})")
    lines.append(f"warranted change:   {-table.pct_warranted:+.1f}% (se {table.pct_warranted_se:.1f})")
    return "\n".join(lines)
