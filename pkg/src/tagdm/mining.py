"""Problem definitions, feasibility checking, scoring and the exact solver."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Any, NamedTuple, Sequence

import numpy as np
import yaml

from .model import TaggingGroup, group_support, is_describable
from .signature import (
    Dimension,
    DimensionAbsentError,
    MetricConfig,
    MiningMeasure,
    Mode,
    pairwise_matrix,
    set_score,
)

DEFAULT_MAX_CANDIDATES = 2_000_000_000


class BudgetExceededError(RuntimeError):
    """The exact solver would evaluate more candidates than allowed."""


@dataclass(frozen=True)
class Constraint:
    measure: MiningMeasure
    threshold: float

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold {self.threshold} outside [0, 1]")


@dataclass(frozen=True)
class Objective:
    measure: MiningMeasure
    weight: float = 1.0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("objective weights must be non-negative")


@dataclass(frozen=True)
class ProblemSpec:
    objectives: tuple[Objective, ...]
    constraints: tuple[Constraint, ...] = ()
    k_lo: int = 1
    k_hi: int = 3
    support_p: int = 0
    describability: str = "either"
    metrics: MetricConfig = MetricConfig()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "objectives", tuple(self.objectives))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not 1 <= self.k_lo <= self.k_hi:
            raise ValueError(f"need 1 <= k_lo <= k_hi, got {self.k_lo}, {self.k_hi}")
        if self.support_p < 0:
            raise ValueError("support must be >= 0")
        if not self.objectives:
            raise ValueError("at least one objective is required")
        if self.describability not in ("user", "item", "either"):
            raise ValueError(f"unknown describability {self.describability!r}")
        cdims = {c.measure.dimension for c in self.constraints}
        odims = {o.measure.dimension for o in self.objectives}
        if cdims & odims:
            raise ValueError(f"dimension(s) {sorted(d.value for d in cdims & odims)} in both constraints and objectives")

    @property
    def objective_mode(self) -> Mode | None:
        """The shared mode of all objectives, or None if mixed."""
        modes = {o.measure.mode for o in self.objectives}
        return modes.pop() if len(modes) == 1 else None

    def threshold_for(self, dim: Dimension) -> Constraint | None:
        for c in self.constraints:
            if c.measure.dimension is dim:
                return c
        return None

    def with_overrides(self, *, k: int | None = None, k_lo: int | None = None, support: int | None = None,
                       q: float | None = None, r: float | None = None) -> ProblemSpec:
        """Replace k bounds, support, or the user (q) / item (r) thresholds."""
        cons = []
        for c in self.constraints:
            if q is not None and c.measure.dimension is Dimension.USERS:
                c = replace(c, threshold=q)
            elif r is not None and c.measure.dimension is Dimension.ITEMS:
                c = replace(c, threshold=r)
            cons.append(c)
        k_hi = self.k_hi if k is None else k
        lo = self.k_lo if k_lo is None else k_lo
        return replace(self, constraints=tuple(cons), k_hi=k_hi, k_lo=min(lo, k_hi),
                       support_p=self.support_p if support is None else support)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "k_lo": self.k_lo,
            "k_hi": self.k_hi,
            "support_p": self.support_p,
            "describability": self.describability,
            "constraints": [{"dimension": c.measure.dimension.value, "mode": c.measure.mode.value,
                             "threshold": c.threshold} for c in self.constraints],
            "objectives": [{"dimension": o.measure.dimension.value, "mode": o.measure.mode.value,
                            "weight": o.weight} for o in self.objectives],
            "metrics": {"users": self.metrics.users, "items": self.metrics.items},
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ProblemSpec:
        known = {"name", "k_lo", "k_hi", "support_p", "describability", "constraints", "objectives", "metrics"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown problem keys: {sorted(extra)}")
        return cls(
            name=str(d.get("name", "")),
            k_lo=int(d.get("k_lo", 1)),
            k_hi=int(d.get("k_hi", 3)),
            support_p=int(d.get("support_p", 0)),
            describability=d.get("describability", "either"),
            constraints=tuple(Constraint(MiningMeasure(c["dimension"], c["mode"]), float(c["threshold"]))
                              for c in d.get("constraints", ())),
            objectives=tuple(Objective(MiningMeasure(o["dimension"], o["mode"]), float(o.get("weight", 1.0)))
                             for o in d.get("objectives", ())),
            metrics=MetricConfig(**d.get("metrics", {})),
        )


def load_spec(path: str | Path) -> ProblemSpec:
    """Read a problem from a YAML (or JSON) file."""
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping")
    return ProblemSpec.from_dict(data)


def _preset(name: str, users: str, items: str, tags: str) -> ProblemSpec:
    return ProblemSpec(
        name=name,
        k_lo=1,
        k_hi=3,
        support_p=350,
        constraints=(Constraint(MiningMeasure("users", users), 0.5),
                     Constraint(MiningMeasure("items", items), 0.5)),
        objectives=(Objective(MiningMeasure("tags", tags)),),
    )


SIM, DIV = "similarity", "diversity"
PRESETS: dict[str, ProblemSpec] = {
    "problem1": _preset("problem1", SIM, SIM, SIM),
    "problem2": _preset("problem2", SIM, DIV, SIM),
    "problem3": _preset("problem3", DIV, SIM, SIM),
    "problem4": _preset("problem4", DIV, SIM, DIV),
    "problem5": _preset("problem5", SIM, DIV, DIV),
    "problem6": _preset("problem6", SIM, SIM, DIV),
}


def resolve_problem(name_or_path: str) -> ProblemSpec:
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]
    if Path(name_or_path).is_file():
        return load_spec(name_or_path)
    raise ValueError(f"unknown problem {name_or_path!r}: not a preset ({', '.join(PRESETS)}) or a file")


# --- checking and scoring ----------------------------------------------------

class Feasibility(NamedTuple):
    feasible: bool
    report: dict[str, Any]


def check_feasible(candidate: Sequence[TaggingGroup], spec: ProblemSpec) -> Feasibility:
    """Evaluate every condition of ``spec`` on ``candidate``.

    The report holds size, describability, support and the achieved value of
    each threshold constraint (None when the measure is undefined for the
    set) whether or not the candidate is feasible.
    """
    candidate = list(candidate)
    report: dict[str, Any] = {
        "size": len(candidate),
        "describable": all(is_describable(g, spec.describability) for g in candidate),
        "support": group_support(candidate),
    }
    ok = spec.k_lo <= len(candidate) <= spec.k_hi and report["describable"]
    ok = ok and report["support"] >= spec.support_p
    for c in spec.constraints:
        try:
            value = set_score(candidate, c.measure, spec.metrics) if candidate else None
        except DimensionAbsentError:
            value = None
        report[str(c.measure)] = value
        ok = ok and value is not None and value >= c.threshold
    return Feasibility(bool(ok), report)


def objective_score(candidate: Sequence[TaggingGroup], spec: ProblemSpec) -> float:
    """Weighted sum of the set scores of all objectives."""
    if not candidate:
        raise ValueError("empty candidate")
    return math.fsum(o.weight * set_score(candidate, o.measure, spec.metrics) for o in spec.objectives)


@dataclass
class ResultSet:
    groups: tuple[TaggingGroup, ...]
    indices: tuple[int, ...]
    score: float
    support: int
    constraint_report: dict[str, Any]
    feasible: bool
    solver: str
    runtime_ms: int = 0
    seed: int | None = None
    params: dict[str, Any] = field(default_factory=dict)


def make_result(groups: Sequence[TaggingGroup], indices: Sequence[int], spec: ProblemSpec, solver: str,
                started: float, seed: int | None = None, **params) -> ResultSet:
    """Package chosen group indices, re-scoring them with the reference functions."""
    chosen = tuple(groups[i] for i in indices)
    verdict = check_feasible(chosen, spec)
    return ResultSet(
        groups=chosen,
        indices=tuple(int(i) for i in indices),
        score=objective_score(chosen, spec),
        support=verdict.report["support"],
        constraint_report=verdict.report,
        feasible=verdict.feasible,
        solver=solver,
        runtime_ms=int(round((time.perf_counter() - started) * 1000)),
        seed=seed,
        params=params,
    )


def member_bitsets(groups: Sequence[TaggingGroup]) -> np.ndarray:
    """Row i is the little-endian packed member mask of group i."""
    width = 1 + max((max(g.members) for g in groups if g.members), default=0)
    masks = np.zeros((len(groups), width), dtype=bool)
    for i, g in enumerate(groups):
        masks[i, list(g.members)] = True
    return np.packbits(masks, axis=1, bitorder="little")


class SetEvaluator:
    """Fast scoring of index subsets of a fixed group list under one spec.

    Pair matrices are computed per call over just the requested indices,
    so a caller that only looks at small buckets never pays for all pairs.
    Values agree with :func:`objective_score` / :func:`check_feasible` up to
    float rounding; final answers are re-checked with those.
    """

    def __init__(self, groups: Sequence[TaggingGroup], spec: ProblemSpec):
        self.groups = list(groups)
        self.spec = spec
        packed = member_bitsets(self.groups) if self.groups else np.zeros((0, 0), np.uint8)
        self._bits = [int.from_bytes(row.tobytes(), "little") for row in packed]
        self.singleton_score = math.fsum(o.weight * o.measure.vacuous() for o in spec.objectives)
        self.singleton_ok = all(c.measure.vacuous() >= c.threshold for c in spec.constraints)

    def objective_matrix(self, idx: Sequence[int]) -> np.ndarray:
        sub = [self.groups[i] for i in idx]
        O = np.zeros((len(sub), len(sub)))
        for o in self.spec.objectives:
            if o.weight:
                O += o.weight * pairwise_matrix(sub, o.measure, self.spec.metrics)
        return O

    def constraint_matrices(self, idx: Sequence[int]) -> list[np.ndarray]:
        sub = [self.groups[i] for i in idx]
        return [pairwise_matrix(sub, c.measure, self.spec.metrics) for c in self.spec.constraints]

    def support(self, idx: Sequence[int]) -> int:
        u = 0
        for i in idx:
            u |= self._bits[i]
        return u.bit_count()

    def best_subset(self, idx: Sequence[int], filtered: bool, max_size: int | None = None) -> tuple[float, tuple[int, ...]] | None:
        """Best-scoring subset of ``idx`` with size in [k_lo, k_hi] (exhaustive).

        With ``filtered`` only subsets passing every spec condition count.
        Ties go to the lexicographically smallest tuple of group indices.
        """
        spec = self.spec
        idx = sorted(idx)
        hi = min(spec.k_hi, len(idx), max_size or spec.k_hi)
        O = self.objective_matrix(idx)
        Cs = self.constraint_matrices(idx) if filtered else []
        best: tuple[float, tuple[int, ...]] | None = None
        for s in range(spec.k_lo, hi + 1):
            if s == 1:
                scores = np.full(len(idx), self.singleton_score)
                combos = np.arange(len(idx))[:, None]
            else:
                combos = np.array(list(combinations(range(len(idx)), s)))
                pa, pb = np.triu_indices(s, 1)
                scores = O[combos[:, pa], combos[:, pb]].mean(axis=1)
            ok = ~np.isnan(scores)
            if filtered:
                if s == 1:
                    ok &= self.singleton_ok
                else:
                    for C, c in zip(Cs, spec.constraints):
                        vals = C[combos[:, pa], combos[:, pb]].mean(axis=1)
                        ok &= vals >= c.threshold
            order = np.lexsort((np.arange(len(scores)), -np.where(ok, scores, -np.inf)))
            for r in order:
                if not ok[r]:
                    break
                chosen = tuple(idx[j] for j in combos[r])
                if filtered and not self.admits(chosen):
                    continue
                cand = (float(scores[r]), chosen)
                if best is None or cand[0] > best[0] or (cand[0] == best[0] and cand[1] < best[1]):
                    best = cand
                break
        return best

    def admits(self, chosen: Sequence[int]) -> bool:
        """Size, describability and support (pair constraints checked by caller)."""
        spec = self.spec
        return (spec.k_lo <= len(chosen) <= spec.k_hi
                and all(is_describable(self.groups[i], spec.describability) for i in chosen)
                and self.support(chosen) >= spec.support_p)

    def score(self, chosen: Sequence[int]) -> float:
        if len(chosen) == 1:
            return self.singleton_score
        O = self.objective_matrix(chosen)
        a, b = np.triu_indices(len(chosen), 1)
        return float(O[a, b].mean())


# --- exact solver ------------------------------------------------------------

def count_candidates(n: int, k_lo: int, k_hi: int) -> int:
    return sum(math.comb(n, s) for s in range(k_lo, min(k_hi, n) + 1))


def exact_solve(spec: ProblemSpec, groups: Sequence[TaggingGroup],
                max_candidates: int = DEFAULT_MAX_CANDIDATES) -> ResultSet | None:
    """Enumerate every subset of size k_lo..k_hi and return the best feasible one.

    Returns None when no subset is feasible.  Raises
    :class:`BudgetExceededError` before doing any work if the number of
    subsets exceeds ``max_candidates``.
    """
    from . import _kernels

    started = time.perf_counter()
    groups = list(groups)
    eligible = [i for i, g in enumerate(groups) if is_describable(g, spec.describability)]
    n = len(eligible)
    total = count_candidates(n, spec.k_lo, spec.k_hi)
    if total > max_candidates:
        raise BudgetExceededError(f"{total} candidate sets exceed the budget of {max_candidates}")
    if n == 0:
        return None

    ev = SetEvaluator([groups[i] for i in eligible], spec)
    winners: list[tuple[float, tuple[int, ...]]] = []
    if spec.k_lo == 1 and ev.singleton_ok:
        sizes = np.array([g.size for g in ev.groups])
        hits = np.flatnonzero(sizes >= spec.support_p)
        if hits.size:
            winners.append((ev.singleton_score, (int(hits[0]),)))

    if spec.k_hi >= 2 and n >= 2:
        everything = list(range(n))
        O = np.ascontiguousarray(ev.objective_matrix(everything))
        Cs = ev.constraint_matrices(everything)
        C = np.ascontiguousarray(np.stack(Cs)) if Cs else np.zeros((0, n, n))
        thr = np.array([c.threshold for c in spec.constraints], dtype=np.float64)
        bits = np.ascontiguousarray(member_bitsets(ev.groups))
        args = (O, C, thr, bits, _kernels.POPCOUNT, int(spec.support_p))
        for s in range(max(2, spec.k_lo), min(spec.k_hi, n) + 1):
            if s == 2:
                val, combo = _kernels.best_pair(*args)
            elif s == 3:
                val, combo = _kernels.best_triple(*args)
            else:
                val, combo = _kernels.best_of_size(s, *args)
            if combo[0] >= 0:
                winners.append((float(val), tuple(int(j) for j in combo)))

    if not winners:
        return None
    best = min(winners, key=lambda w: (-w[0], w[1]))
    return make_result(groups, [eligible[j] for j in best[1]], spec, "exact", started,
                       candidates=total)


def warm_up() -> None:
    """Compile the exact-solver kernels so later timings exclude JIT cost."""
    from . import _kernels

    O = np.zeros((4, 4))
    C = np.zeros((0, 4, 4))
    bits = np.zeros((4, 1), dtype=np.uint8)
    args = (O, C, np.zeros(0), bits, _kernels.POPCOUNT, 0)
    _kernels.best_pair(*args)
    _kernels.best_triple(*args)
    _kernels.best_of_size(4, *args)
