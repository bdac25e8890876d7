"""Record files, run configuration and trace persistence."""
from __future__ import annotations

import configparser
import csv
import json
import math
from dataclasses import fields
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np

from .likelihood import RecordTable, beta_prior_from_moments, empirical_theta
from .mcmc.chain import ChainConfig, ModelSpec
from .mcmc.trace import Trace
from .partition import Partition
from .prior import EscHyper


class LoadError(ValueError):
    """Malformed or unreadable input file."""


class ConfigError(ValueError):
    """Config file violates the schema."""


# ---------------------------------------------------------------- records


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise LoadError(f"{path}: file is empty, expected a header row")
    return rows[0], rows[1:]


def load_records(path, truth_path=None) -> tuple[RecordTable, Optional[Partition]]:
    """Dictionary-encode a CSV of categorical fields (codes in order of first appearance)."""
    header, rows = _read_rows(path)
    L = len(header)
    if L == 0:
        raise LoadError(f"{path}: header has no columns")
    if not rows:
        raise LoadError(f"{path}: no data rows")
    for k, row in enumerate(rows, start=2):
        if len(row) != L:
            raise LoadError(f"{path}: ragged row at line {k}: expected {L} cells, found {len(row)}")
        for j, cell in enumerate(row):
            if cell.strip() == "":
                raise LoadError(f"{path}: missing cell at line {k}, column {header[j]!r}")
    codes = np.empty((len(rows), L), dtype=np.int64)
    categories = []
    for j in range(L):
        lookup: dict[str, int] = {}
        for i, row in enumerate(rows):
            codes[i, j] = lookup.setdefault(row[j], len(lookup))
        categories.append(list(lookup))
    D = np.array([len(c) for c in categories])
    records = RecordTable(codes, D, empirical_theta(codes, D), field_names=list(header), categories=categories)
    truth = load_truth(truth_path, records.n) if truth_path is not None else None
    return records, truth


def load_truth(path, n: Optional[int] = None) -> Partition:
    """Two-column CSV ``record,entity`` with 1-based record indices."""
    _, rows = _read_rows(path)
    ent: dict[int, str] = {}
    for k, row in enumerate(rows, start=2):
        if len(row) != 2:
            raise LoadError(f"{path}: ragged row at line {k}: expected 2 cells, found {len(row)}")
        try:
            idx = int(row[0])
        except ValueError as exc:
            raise LoadError(f"{path}: line {k}: record index {row[0]!r} is not an integer") from exc
        if row[1].strip() == "":
            raise LoadError(f"{path}: missing cell at line {k}, column 'entity'")
        if idx in ent:
            raise LoadError(f"{path}: line {k}: record {idx} listed twice")
        ent[idx] = row[1]
    n = len(ent) if n is None else n
    if sorted(ent) != list(range(1, n + 1)):
        raise LoadError(f"{path}: record indices must cover 1..{n} exactly once")
    return Partition.from_allocations([ent[i] for i in range(1, n + 1)])


def write_records(path, codes: np.ndarray, field_names: Optional[list[str]] = None) -> None:
    codes = np.asarray(codes)
    names = field_names or [f"field{l + 1}" for l in range(codes.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        w.writerows((codes + 1).tolist())


def write_truth(path, allocations) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["record", "entity"])
        w.writerows([i + 1, int(e)] for i, e in enumerate(allocations))


# ---------------------------------------------------------------- config

_SECTION = "run"

# key -> parser; defaults come from the dataclasses
_SCHEMA = {
    "model": str, "eta_r": float, "s_r": float, "u_p": float, "v_p": float, "alpha": float,
    "r0": float, "p0": float, "conc_shape": float, "conc_rate": float, "theta0": float,
    "sigma": float, "update_sigma": bool, "update_hyper": bool,
    "iterations": int, "partition_moves_per_iter": int, "burn_in": int, "thin": int, "seed": int,
    "beta_mode": str, "beta": float, "beta_prior_mean": float, "beta_prior_sd": float,
    "chaperone_bias": bool, "scan_every": int, "init": str, "chains": int,
}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(text: str) -> dict[str, Any]:
    """Parse flat ``key = value`` lines (``#`` comments allowed) against the schema."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    if cp.sections() != [_SECTION]:
        raise ConfigError("config must be flat key = value lines without sections")
    out: dict[str, Any] = {}
    for key, raw in cp[_SECTION].items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        kind = _SCHEMA[key]
        try:
            out[key] = _parse_bool(raw) if kind is bool else kind(raw.strip())
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    return out


def load_config(path) -> dict[str, Any]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LoadError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def build_chain_config(values: dict[str, Any]) -> tuple[ChainConfig, int]:
    """ChainConfig plus chain count from parsed config values."""
    v = dict(values)
    chains = v.pop("chains", 1)
    try:
        hyper = EscHyper(**{k: v.pop(k) for k in ("eta_r", "s_r", "u_p", "v_p", "alpha") if k in v})
        model_keys = {f.name for f in fields(ModelSpec)} - {"hyper", "family"}
        model = ModelSpec(family=v.pop("model", ModelSpec.family), hyper=hyper,
                          **{k: v.pop(k) for k in list(v) if k in model_keys})
        if "beta_prior_mean" in v or "beta_prior_sd" in v:
            v["beta_prior"] = beta_prior_from_moments(v.pop("beta_prior_mean", 0.005), v.pop("beta_prior_sd", 0.01))
        cfg = ChainConfig(model=model, **v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if chains < 1:
        raise ConfigError("chains must be at least 1")
    return cfg, chains


# ---------------------------------------------------------------- traces


def _num(x) -> Optional[float]:
    x = float(x)
    return None if math.isnan(x) else x


def _unnum(x) -> float:
    return float("nan") if x is None else float(x)


def write_trace(path, trace: Trace) -> None:
    """JSON lines: a metadata header, then one line per saved draw."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"meta": trace.meta}, sort_keys=True) + "\n")
        for k in range(len(trace)):
            rec = {
                "iteration": int(trace.iterations[k]),
                "K": int(trace.K[k]),
                "r": _num(trace.r[k]),
                "p": _num(trace.p[k]),
                "concentration": _num(trace.concentration[k]),
                "sigma": _num(trace.sigma[k]),
                "beta": [_num(b) for b in trace.beta[k]],
                "z": " ".join(map(str, trace.allocations[k].tolist())),
            }
            fh.write(json.dumps(rec) + "\n")


def read_trace(path) -> Trace:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if ln.strip()]
    except OSError as exc:
        raise LoadError(f"cannot read trace {path}: {exc}") from exc
    try:
        meta = json.loads(lines[0])["meta"]
        recs = [json.loads(ln) for ln in lines[1:]]
        n, L = int(meta["n"]), int(meta["L"])
        z = np.array([np.array(r["z"].split(), dtype=np.int32) for r in recs], dtype=np.int32).reshape(len(recs), n)
        return Trace(
            meta,
            np.array([r["iteration"] for r in recs], dtype=np.int64),
            np.array([r["K"] for r in recs], dtype=np.int64),
            np.array([_unnum(r["r"]) for r in recs]),
            np.array([_unnum(r["p"]) for r in recs]),
            np.array([_unnum(r["concentration"]) for r in recs]),
            np.array([_unnum(r["sigma"]) for r in recs]),
            np.array([[_unnum(b) for b in r["beta"]] for r in recs], dtype=float).reshape(len(recs), L),
            z,
        )
    except (IndexError, KeyError, ValueError, TypeError) as exc:
        raise LoadError(f"{path}: malformed trace file ({exc})") from exc


def write_csv(path_or_fh, header: list[str], rows: Iterable[Iterable[Any]]) -> None:
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)

    if hasattr(path_or_fh, "write"):
        emit(path_or_fh)
    else:
        with open(path_or_fh, "w", newline="", encoding="utf-8") as fh:
            emit(fh)
