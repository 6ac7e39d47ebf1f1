"""Timing/quality benchmark over tuple-count bins.

A config (YAML or JSON) names the data, the bin sizes, the solvers, a
problem preset or file, and the seeds.  Each bin is a uniform sample of the
data drawn with ``sample_seed``; every (bin, solver, seed) cell yields one
row.  Example::

    synth: {tuples: 8000, clusters: 6, seed: 0}   # or  data: file.tsv
    bins: [2000, 4000, 8000]
    solvers: [exact, sm-lsh-fo]
    problem: problem1
    seeds: [0, 1, 2]
    overrides: {k: 3, k_lo: 3, support: 80}
    tunables: {min_size: 5}
"""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .mining import resolve_problem, warm_up
from .model import TupleStore, read_tuples
from .query import SOLVERS, Tunables, check_compatible, prepare_groups, quality, solve
from .synth import synthetic_store

COLUMNS = ("bin", "n_tuples", "n_groups", "solver", "seed", "runtime_ms", "quality", "score", "feasible")


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("TAGDM_THREADS", "1")))
    except ValueError:
        return 1


def load_config(path: str | Path) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: expected a mapping")
    return cfg


def _load_data(cfg: dict[str, Any], base: Path | None) -> TupleStore:
    if "data" in cfg:
        p = Path(cfg["data"])
        if base is not None and not p.is_absolute():
            p = base / p
        return read_tuples(p)
    if "synth" in cfg:
        s = cfg["synth"]
        return synthetic_store(int(s.get("tuples", 5000)), int(s.get("clusters", 6)), int(s.get("seed", 0)))
    raise ValueError("config needs 'data' or 'synth'")


def sample_bin(store: TupleStore, size: int, seed: int) -> TupleStore:
    """Uniform sample of ``size`` tuples (all of them if the store is smaller)."""
    if size >= len(store):
        return store
    rng = np.random.default_rng(seed)
    picked = rng.choice(store.ids, size=size, replace=False)
    return store.subset(picked.tolist())


def run_benchmark(cfg: dict[str, Any], base: Path | None = None) -> list[dict[str, Any]]:
    """Rows of {bin, solver, runtime_ms, quality, ...}, in canonical order."""
    store = _load_data(cfg, base)
    spec = resolve_problem(str(cfg.get("problem", "problem1")))
    overrides = cfg.get("overrides", {}) or {}
    spec = spec.with_overrides(**overrides)
    solvers = list(cfg.get("solvers", ["exact"]))
    seeds = [int(s) for s in cfg.get("seeds", [0])]
    bins = [int(b) for b in cfg.get("bins", [len(store)])]
    tun_keys = {f.name for f in fields(Tunables)}
    extra = set(cfg.get("tunables", {}) or {}) - tun_keys
    if extra:
        raise ValueError(f"unknown tunables: {sorted(extra)}")
    base_tun = Tunables(**(cfg.get("tunables", {}) or {}))
    for s in solvers:
        check_compatible(spec, s, base_tun.fdp_mode)
    if "exact" in solvers:
        warm_up()

    cells = []
    for b in bins:
        sample = sample_bin(store, b, int(cfg.get("sample_seed", 0)))
        groups, _ = prepare_groups(sample, base_tun)
        for solver in solvers:
            # deterministic solvers do not depend on the seed, but every cell is still timed
            for seed in seeds:
                cells.append((b, sample, groups, solver, seed))

    def run(cell):
        b, sample, groups, solver, seed = cell
        tun = Tunables(**{**(cfg.get("tunables", {}) or {}), "seed": seed})
        t0 = time.perf_counter()
        res = solve(spec, solver, groups, tun)
        ms = (time.perf_counter() - t0) * 1000
        q = quality(res)
        return {
            "bin": b,
            "n_tuples": len(sample),
            "n_groups": len(groups),
            "solver": solver,
            "seed": seed,
            "runtime_ms": round(ms, 3),
            "quality": None if q is None else round(q, 12),
            "score": None if res is None else round(res.score, 12),
            "feasible": bool(res is not None and res.feasible),
        }

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        rows = list(pool.map(run, cells))
    order = {s: i for i, s in enumerate(SOLVERS)}
    rows.sort(key=lambda r: (bins.index(r["bin"]), order[r["solver"]], r["seed"]))
    return rows


def format_rows(rows: list[dict[str, Any]], delimiter: str = ",") -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, delimiter=delimiter, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r[k] is None else r[k]) for k in COLUMNS})
    return buf.getvalue()
