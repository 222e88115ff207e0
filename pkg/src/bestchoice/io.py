"""CSV readers/writers and the key-value simulation config."""

from __future__ import annotations

import configparser
import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError, UnitMismatch
from .population import FinitePopulation

OUTCOME_COLUMNS = ("y1", "y0")


def _read_rows(path):
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError as exc:
        raise DataFormatError(f"{path}: file not found") from exc
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"{path}: not valid UTF-8") from exc
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "unit_id":
        raise DataFormatError(f"{path}: first header column must be 'unit_id'")
    body = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataFormatError(f"{path}, line {lineno}: expected {len(header)} fields, got {len(row)}")
        body.append((lineno, [c.strip() for c in row]))
    return path, header, body


def _numeric(path, header, body, col):
    out = np.empty(len(body))
    for i, (lineno, row) in enumerate(body):
        try:
            v = float(row[col])
        except ValueError:
            raise DataFormatError(
                f"{path}, line {lineno}, column '{header[col]}': not a number: {row[col]!r}"
            ) from None
        if not math.isfinite(v):
            raise DataFormatError(f"{path}, line {lineno}, column '{header[col]}': non-finite value")
        out[i] = v
    return out


def read_population(path) -> FinitePopulation:
    """Covariate CSV: ``unit_id`` first, numeric covariates after; ``y1``/``y0`` columns are outcomes."""
    path, header, body = _read_rows(path)
    ids = [row[0] for _, row in body]
    cov_cols = [j for j, h in enumerate(header) if j > 0 and h not in OUTCOME_COLUMNS]
    if not cov_cols:
        raise DataFormatError(f"{path}: no covariate columns")
    x = np.column_stack([_numeric(path, header, body, j) for j in cov_cols])
    present = [h for h in OUTCOME_COLUMNS if h in header]
    y1 = y0 = None
    if len(present) == 1:
        raise DataFormatError(f"{path}: columns y1 and y0 must appear together")
    if present:
        y1 = _numeric(path, header, body, header.index("y1"))
        y0 = _numeric(path, header, body, header.index("y0"))
    return FinitePopulation(x, y1=y1, y0=y0, unit_ids=ids, covariate_names=[header[j] for j in cov_cols])


def read_column(path, name: str) -> dict:
    """``unit_id -> value`` mapping for one numeric column."""
    path, header, body = _read_rows(path)
    if name not in header:
        raise DataFormatError(f"{path}: missing column '{name}'")
    vals = _numeric(path, header, body, header.index(name))
    ids = [row[0] for _, row in body]
    if len(set(ids)) != len(ids):
        raise DataFormatError(f"{path}: duplicate unit ids")
    return dict(zip(ids, vals))


def align(mapping: dict, unit_ids, what: str) -> np.ndarray:
    missing = [u for u in unit_ids if u not in mapping]
    if missing:
        raise UnitMismatch(f"{what}: unit_id {missing[0]!r} missing ({len(missing)} missing in total)")
    extra = set(mapping) - set(unit_ids)
    if extra:
        raise UnitMismatch(f"{what}: unknown unit_id {sorted(extra)[0]!r}")
    return np.array([mapping[u] for u in unit_ids])


def write_csv(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# --------------------------------------------------------------------------
# simulation config

SECTION = "simulate"
_INT_KEYS = ("n1", "K_used", "T", "reps", "seed", "mc_draws", "mc_seed", "n_jobs")


def read_sim_config(path) -> dict:
    """Parse ``key = value`` lines (an optional ``[simulate]`` header is allowed).

    Required: population, n1, K_used, T.  Relative population paths are
    resolved against the config file's directory.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: file not found") from exc
    if not any(line.strip().startswith("[") for line in text.splitlines()):
        text = f"[{SECTION}]\n" + text
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if SECTION not in parser:
        raise ConfigError(f"{path}: missing [{SECTION}] section")
    raw = dict(parser[SECTION])

    known = set(_INT_KEYS) | {"population", "alpha", "methods", "hc", "cre_baseline", "trim"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{SECTION}.{key}: unknown key")
    for key in ("population", "n1", "K_used", "T"):
        if key not in raw:
            raise ConfigError(f"{SECTION}.{key}: required")

    cfg = {"population": str((path.parent / raw["population"]).resolve())}
    for key in _INT_KEYS:
        if key in raw:
            try:
                cfg[key] = int(raw[key])
            except ValueError:
                raise ConfigError(f"{SECTION}.{key}: expected an integer, got {raw[key]!r}") from None
    if "alpha" in raw:
        try:
            cfg["alpha"] = float(raw["alpha"])
        except ValueError:
            raise ConfigError(f"{SECTION}.alpha: expected a number, got {raw['alpha']!r}") from None
    for key in ("methods", "hc"):
        if key in raw:
            cfg[key] = [s.strip() for s in raw[key].split(",") if s.strip()]
    if "cre_baseline" in raw:
        v = raw["cre_baseline"].strip().lower()
        if v not in ("true", "false", "yes", "no", "1", "0"):
            raise ConfigError(f"{SECTION}.cre_baseline: expected a boolean, got {raw['cre_baseline']!r}")
        cfg["cre_baseline"] = v in ("true", "yes", "1")
    if "trim" in raw:
        try:
            lo, hi = (float(s) for s in raw["trim"].split(","))
        except ValueError:
            raise ConfigError(f"{SECTION}.trim: expected 'lo,hi', got {raw['trim']!r}") from None
        cfg["trim"] = (lo, hi)
    return cfg
