"""Query orchestration: load, scope, enumerate, sign, solve, report."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .fdp import dv_fdp, dv_fdp_fi, dv_fdp_fo
from .lsh import DEFAULT_BITS, DEFAULT_BUCKET_MAX, DEFAULT_TABLES, sm_lsh, sm_lsh_fi, sm_lsh_fo
from .mining import DEFAULT_MAX_CANDIDATES, ProblemSpec, ResultSet, exact_solve
from .model import DataError, Predicate, TaggingGroup, TupleStore, enumerate_groups, read_tuples
from .signature import (
    DEFAULT_VOCABULARY_SIZE,
    MiningMeasure,
    Mode,
    apply_signatures,
    attach_signatures,
    build_vocabulary,
    read_signatures,
    set_score,
)

log = logging.getLogger(__name__)

SOLVERS = ("exact", "sm-lsh", "sm-lsh-fi", "sm-lsh-fo", "dv-fdp", "dv-fdp-fi", "dv-fdp-fo")
LSH_SOLVERS = SOLVERS[1:4]
FDP_SOLVERS = SOLVERS[4:]

TAG_SIMILARITY = MiningMeasure("tags", "similarity")


class UsageError(ValueError):
    """Solver and problem do not fit together."""


@dataclass(frozen=True)
class Tunables:
    seed: int = 0
    lsh_bits: int = DEFAULT_BITS
    lsh_tables: int = DEFAULT_TABLES
    bucket_max: int = DEFAULT_BUCKET_MAX
    metric: str = "angular"
    fdp_mode: str | None = None
    min_size: int = 5
    max_predicates: int | None = None
    vocab_size: int = DEFAULT_VOCABULARY_SIZE
    signatures: str | None = None
    max_candidates: int = DEFAULT_MAX_CANDIDATES


@dataclass(frozen=True)
class Query:
    spec: ProblemSpec
    solver: str
    scope: tuple[Predicate, ...] = ()
    tunables: Tunables = field(default_factory=Tunables)


def check_compatible(spec: ProblemSpec, solver: str, fdp_mode: str | None = None) -> None:
    if solver not in SOLVERS:
        raise UsageError(f"unknown solver {solver!r}; choose from {', '.join(SOLVERS)}")
    mode = spec.objective_mode
    if solver in LSH_SOLVERS and mode is not Mode.SIMILARITY:
        raise UsageError(f"{solver} needs similarity objectives; use a dv-fdp solver or exact")
    if solver in FDP_SOLVERS:
        want = Mode.SIMILARITY if fdp_mode == "min-avg" else Mode.DIVERSITY
        if mode is not want:
            hint = "" if fdp_mode == "min-avg" else " (or pass --fdp-mode min-avg)"
            raise UsageError(f"{solver} needs {want.value} objectives; use an sm-lsh solver or exact{hint}")


def prepare_groups(store: TupleStore, tunables: Tunables) -> tuple[list[TaggingGroup], list[str]]:
    """Enumerate groups and attach signatures; returns (groups, vocabulary)."""
    groups = enumerate_groups(store, tunables.min_size, tunables.max_predicates)
    if tunables.signatures:
        sigs = read_signatures(tunables.signatures)
        d = next(iter(sigs.values())).d if sigs else 0
        vocab = [f"topic{j}" for j in range(d)]
        out = apply_signatures(groups, sigs)
    else:
        vocab = build_vocabulary(store, tunables.vocab_size)
        out = attach_signatures(groups, store, vocab)
    if len(out) < len(groups):
        log.info("dropped %d groups without a valid signature", len(groups) - len(out))
    return out, vocab


def solve(spec: ProblemSpec, solver: str, groups: Sequence[TaggingGroup], tunables: Tunables = Tunables()) -> ResultSet | None:
    check_compatible(spec, solver, tunables.fdp_mode)
    t = tunables
    if solver == "exact":
        return exact_solve(spec, groups, t.max_candidates)
    if solver in LSH_SOLVERS:
        fn = {"sm-lsh": sm_lsh, "sm-lsh-fi": sm_lsh_fi, "sm-lsh-fo": sm_lsh_fo}[solver]
        return fn(spec, groups, d_prime=t.lsh_bits, l=t.lsh_tables, seed=t.seed, bucket_max=t.bucket_max)
    fn = {"dv-fdp": dv_fdp, "dv-fdp-fi": dv_fdp_fi, "dv-fdp-fo": dv_fdp_fo}[solver]
    return fn(spec, groups, metric=t.metric, fdp_mode=t.fdp_mode)


def quality(result: ResultSet | None) -> float | None:
    """Average pairwise cosine of the returned signatures."""
    if result is None:
        return None
    return set_score(result.groups, TAG_SIMILARITY)


def _clean(x):
    if isinstance(x, float):
        return round(x, 12)
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def build_report(query: Query, store: TupleStore, groups: Sequence[TaggingGroup], vocabulary: Sequence[str],
                 result: ResultSet | None, runtime_ms: int) -> dict[str, Any]:
    """Schema-stable report; every solver produces the same keys."""
    chosen = []
    if result is not None:
        for idx, g in zip(result.indices, result.groups):
            chosen.append({
                "index": idx,
                "descriptor": str(g.descriptor),
                "size": g.size,
                "tags": [[t, w] for t, w in g.signature.pairs(vocabulary)],
            })
    return _clean({
        "status": "ok" if result is not None else "no-result",
        "solver": query.solver,
        "problem": query.spec.to_dict(),
        "scope": [str(p) for p in query.scope],
        "tunables": asdict(query.tunables),
        "n_tuples": len(store),
        "n_groups": len(groups),
        "groups": chosen,
        "score": None if result is None else result.score,
        "quality": quality(result),
        "support": None if result is None else result.support,
        "feasible": False if result is None else result.feasible,
        "constraints": {} if result is None else result.constraint_report,
        "solver_params": {} if result is None else result.params,
        "seed": query.tunables.seed,
        "runtime_ms": runtime_ms,
    })


def run_query(query: Query, data: str | Path | TupleStore) -> dict[str, Any]:
    """Run one query end to end and return its report."""
    check_compatible(query.spec, query.solver, query.tunables.fdp_mode)
    store = data if isinstance(data, TupleStore) else read_tuples(data)
    if query.scope:
        store = store.filter(query.scope)
    if len(store) == 0:
        raise DataError("no data in scope")
    groups, vocab = prepare_groups(store, query.tunables)
    started = time.perf_counter()
    result = solve(query.spec, query.solver, groups, query.tunables)
    runtime_ms = int(round((time.perf_counter() - started) * 1000))
    return build_report(query, store, groups, vocab, result, runtime_ms)


# --- rendering -------------------------------------------------------------

def render_json(report: dict[str, Any], timing: bool = False) -> str:
    out = dict(report)
    if not timing:
        out.pop("runtime_ms", None)
    return json.dumps(out, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


CSV_FIELDS = ("status", "solver", "problem", "seed", "n_tuples", "n_groups", "score", "quality",
              "support", "feasible", "groups")


def render_csv(report: dict[str, Any], timing: bool = False) -> str:
    import csv
    import io

    fields = CSV_FIELDS + (("runtime_ms",) if timing else ())
    row = dict(report, problem=report["problem"]["name"],
               groups=" | ".join(g["descriptor"] for g in report["groups"]))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in fields})
    return buf.getvalue()


def render_text(report: dict[str, Any]) -> str:
    lines = [
        f"solver:   {report['solver']}",
        f"problem:  {report['problem']['name'] or '(custom)'}",
        f"data:     {report['n_tuples']} tuples, {report['n_groups']} groups"
        + (f" (scope: {', '.join(report['scope'])})" if report["scope"] else ""),
        f"status:   {report['status']}",
    ]
    if report["status"] == "ok":
        lines.append(f"score:    {report['score']:.6f}   quality (avg cosine): {report['quality']:.6f}")
        lines.append(f"support:  {report['support']}   feasible: {report['feasible']}")
        for k, v in report["constraints"].items():
            if k not in ("size", "support", "describable"):
                lines.append(f"  {k}: {'undefined' if v is None else f'{v:.4f}'}")
        lines.append("groups:")
        for g in report["groups"]:
            top = ", ".join(f"{t}:{w:g}" for t, w in g["tags"][:8])
            lines.append(f"  [{g['index']}] {g['descriptor']}  ({g['size']} tuples)")
            lines.append(f"      {top}")
    lines.append(f"seed: {report['seed']}   runtime: {report['runtime_ms']} ms")
    return "\n".join(lines) + "\n"
