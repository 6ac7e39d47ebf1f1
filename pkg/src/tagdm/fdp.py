"""Diversity maximization by greedy MAX-AVG facility dispersion.

The result starts from the farthest pair of tag signatures and repeatedly
adds the group whose summed distance to the chosen ones is largest.  Under
the angular metric (a true metric) the average pairwise distance found is
at least a quarter of the optimum.

``dv_fdp_fi`` filters the single greedy answer; ``dv_fdp_fo`` only lets a
group in if it meets every constraint pairwise against each chosen group,
then checks support once k groups are in.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mining import ProblemSpec, ResultSet, make_result
from .model import TaggingGroup, is_describable
from .signature import Mode, cosine_matrix, pairwise_matrix, signature_matrix

METRICS = ("angular", "complement")
FDP_MODES = ("max-avg", "min-avg")


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    entries: np.ndarray
    metric: str

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def distance_matrix(groups: Sequence[TaggingGroup], metric: str = "angular") -> DistanceMatrix:
    """Pairwise tag-signature distances: angle/pi or 1 - cosine."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    cos = cosine_matrix(groups)
    if metric == "angular":
        D = np.arccos(cos) / np.pi
        # arccos loses half the digits near cos = 1, so nearly parallel pairs
        # use the stable form 2 atan2(|x - y|, |x + y|) on unit vectors
        i, j = np.nonzero(np.triu(cos > 1 - 1e-6, 1))
        if i.size:
            S = signature_matrix(groups)
            theta = 2 * np.arctan2(np.linalg.norm(S[i] - S[j], axis=1), np.linalg.norm(S[i] + S[j], axis=1))
            D[i, j] = D[j, i] = theta / np.pi
    else:
        D = 1.0 - cos
    D = (D + D.T) / 2
    np.fill_diagonal(D, 0.0)
    D.setflags(write=False)
    return DistanceMatrix(D, metric)


def _mode_for(spec: ProblemSpec, fdp_mode: str | None) -> str:
    if fdp_mode is None:
        fdp_mode = "min-avg" if spec.objective_mode is Mode.SIMILARITY else "max-avg"
    if fdp_mode not in FDP_MODES:
        raise ValueError(f"unknown fdp mode {fdp_mode!r}")
    want = Mode.DIVERSITY if fdp_mode == "max-avg" else Mode.SIMILARITY
    if spec.objective_mode is not want:
        raise ValueError(f"fdp mode {fdp_mode} needs all objectives in {want.value} mode")
    return fdp_mode


def greedy_dispersion(D: np.ndarray, k: int, admissible: np.ndarray | None = None,
                      maximize: bool = True, trace: list | None = None) -> list[int] | None:
    """Greedy MAX-AVG (or MIN-AVG) selection of k indices from distance matrix D.

    ``admissible`` is a boolean pair matrix; every pair in the answer must
    be admissible.  Returns None when no admissible seed pair exists or the
    growth stalls.  Ties go to the smallest index.  If ``trace`` is a list,
    (added index, marginal, total) tuples are appended to it.
    """
    n = D.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds the number of groups ({n})")
    if k < 2:
        raise ValueError("k must be >= 2")
    W = D if maximize else -D
    ok = np.ones((n, n), dtype=bool) if admissible is None else admissible.copy()
    np.fill_diagonal(ok, False)
    edges = np.where(ok & np.triu(np.ones((n, n), dtype=bool), 1), W, -np.inf)
    # row-major argmax gives the lexicographically smallest (i, j) among ties
    i, j = divmod(int(np.argmax(edges)), n)
    if not np.isfinite(edges[i, j]):
        return None
    chosen = [i, j]
    total = D[i, j]
    if trace is not None:
        trace.append((i, None, total))
        trace.append((j, D[i, j], total))
    marg = D[i] + D[j]
    allowed = ok[i] & ok[j]
    while len(chosen) < k:
        gain = np.where(allowed, marg if maximize else -marg, -np.inf)
        gain[chosen] = -np.inf
        z = int(np.argmax(gain))
        if not np.isfinite(gain[z]):
            return None
        total += marg[z]
        if trace is not None:
            trace.append((z, marg[z], total))
        chosen.append(z)
        marg = marg + D[z]
        allowed &= ok[z]
    return chosen


def _prepare(spec: ProblemSpec, groups: Sequence[TaggingGroup], k: int | None):
    groups = list(groups)
    eligible = [i for i, g in enumerate(groups) if is_describable(g, spec.describability)]
    k = spec.k_hi if k is None else k
    if len(eligible) < 2:
        raise ValueError("dispersion needs at least two groups")
    return groups, eligible, k


def dv_fdp(spec: ProblemSpec, groups: Sequence[TaggingGroup], k: int | None = None,
           metric: str = "angular", fdp_mode: str | None = None) -> ResultSet:
    """Greedy dispersion over tag signatures, no constraint handling."""
    started = time.perf_counter()
    mode = _mode_for(spec, fdp_mode)
    groups, eligible, k = _prepare(spec, groups, k)
    sub = [groups[i] for i in eligible]
    D = distance_matrix(sub, metric).entries
    chosen = greedy_dispersion(D, k, maximize=mode == "max-avg")
    return make_result(groups, sorted(eligible[j] for j in chosen), spec, "dv-fdp", started,
                       metric=metric, fdp_mode=mode, k=k)


def dv_fdp_fi(spec: ProblemSpec, groups: Sequence[TaggingGroup], k: int | None = None,
              metric: str = "angular", fdp_mode: str | None = None) -> ResultSet | None:
    """The greedy answer if it is feasible, else None."""
    res = dv_fdp(spec, groups, k, metric, fdp_mode)
    if not res.feasible:
        return None
    res.solver = "dv-fdp-fi"
    return res


def dv_fdp_fo(spec: ProblemSpec, groups: Sequence[TaggingGroup], k: int | None = None,
              metric: str = "angular", fdp_mode: str | None = None) -> ResultSet | None:
    """Greedy dispersion restricted to pairwise-admissible groups, then checked."""
    started = time.perf_counter()
    mode = _mode_for(spec, fdp_mode)
    groups, eligible, k = _prepare(spec, groups, k)
    sub = [groups[i] for i in eligible]
    D = distance_matrix(sub, metric).entries
    admissible = np.ones(D.shape, dtype=bool)
    for c in spec.constraints:
        admissible &= pairwise_matrix(sub, c.measure, spec.metrics) >= c.threshold
    chosen = greedy_dispersion(D, k, admissible, maximize=mode == "max-avg")
    if chosen is None:
        return None
    res = make_result(groups, sorted(eligible[j] for j in chosen), spec, "dv-fdp-fo", started,
                      metric=metric, fdp_mode=mode, k=k)
    return res if res.feasible else None
