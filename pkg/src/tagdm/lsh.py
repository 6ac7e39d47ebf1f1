"""Similarity maximization by random-hyperplane hashing.

Groups whose hashing vectors fall in the same bucket form candidate result
sets; buckets are ranked by objective score.  When no bucket yields a
candidate, the number of bits per signature is binary-searched downward
(coarser buckets) and, after a success, upward again to probe finer ones.

Variants:

* ``sm_lsh``    ranks buckets by score only.
* ``sm_lsh_fi`` admits a bucket's candidate only if it is feasible.
* ``sm_lsh_fo`` additionally appends one-hot user/item attribute blocks to
  the hashing vectors for every similarity constraint on that dimension.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mining import ProblemSpec, ResultSet, SetEvaluator, make_result
from .model import Schema, TaggingGroup, is_describable
from .signature import Dimension, Mode, signature_matrix

DEFAULT_BITS = 10
DEFAULT_TABLES = 1
DEFAULT_BUCKET_MAX = 12


@dataclass
class HashEnsemble:
    l: int
    d_prime: int
    hyperplanes: np.ndarray  # (l, d_prime, D)
    seed: int | Sequence[int]
    buckets: list[dict[str, list[int]]] = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return self.hyperplanes.shape[2]


def hash_bit(vector, hyperplane) -> int:
    """1 if the vector lies on the non-negative side of the hyperplane."""
    v, r = np.asarray(vector, dtype=float), np.asarray(hyperplane, dtype=float)
    if v.shape != r.shape:
        raise ValueError("vector and hyperplane differ in length")
    return 1 if float(np.dot(r, v)) >= 0 else 0


def hash_bits(vectors: np.ndarray, hyperplanes: np.ndarray) -> np.ndarray:
    """(n, d') bit matrix of ``vectors`` against one table's hyperplanes."""
    return (np.asarray(vectors) @ hyperplanes.T >= 0).astype(np.uint8)


def build_ensemble(vectors: np.ndarray, l: int, d_prime: int, seed) -> HashEnsemble:
    """Hash ``vectors`` into ``l`` tables of ``d_prime``-bit signatures.

    Hyperplane entries are i.i.d. standard normal from a PCG64 generator
    seeded with ``seed``; bucket keys are the bit strings.
    """
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    n, D = vectors.shape
    if n < 1 or l < 1 or d_prime < 1:
        raise ValueError("need n, l, d_prime >= 1")
    if not np.all(np.isfinite(vectors)):
        raise ValueError("vectors must be finite")
    rng = np.random.default_rng(seed)
    planes = rng.standard_normal((l, d_prime, D))
    ens = HashEnsemble(l=l, d_prime=d_prime, hyperplanes=planes, seed=seed)
    for z in range(l):
        bits = hash_bits(vectors, planes[z])
        table: dict[str, list[int]] = {}
        for x, row in enumerate(bits):
            table.setdefault("".join("1" if b else "0" for b in row), []).append(x)
        ens.buckets.append(table)
    return ens


def collision_probability(theta: float) -> float:
    """Chance that one random hyperplane does not separate two vectors at angle theta."""
    return 1.0 - theta / math.pi


def result_set_bound(vectors: np.ndarray, d_prime: int) -> float:
    """Union-bound lower estimate that all given vectors share a d'-bit bucket.

    Negative values mean the bound says nothing.
    """
    V = np.asarray(vectors, dtype=float)
    V = V / np.linalg.norm(V, axis=1, keepdims=True)
    miss = 0.0
    for i in range(len(V)):
        for j in range(i + 1, len(V)):
            theta = math.acos(min(1.0, max(-1.0, float(V[i] @ V[j]))))
            miss += 1.0 - collision_probability(theta) ** d_prime
    return 1.0 - miss


# --- hashing vectors -------------------------------------------------------

def folded_dimension(user_schema: Schema, item_schema: Schema, d: int, fold_users: bool, fold_items: bool) -> int:
    """Length of the folded hashing vector: d plus the folded one-hot widths."""
    return d + (user_schema.width if fold_users else 0) + (item_schema.width if fold_items else 0)


def _unit_rows(M: np.ndarray) -> np.ndarray:
    M = M.astype(float)
    norms = np.linalg.norm(M, axis=1, keepdims=True)
    return np.divide(M, norms, out=np.zeros_like(M), where=norms > 0)


def hashing_vectors(groups: Sequence[TaggingGroup], fold_users: bool = False, fold_items: bool = False) -> np.ndarray:
    """Unit tag signatures, optionally prefixed by unit one-hot attribute blocks."""
    blocks = []
    if fold_users:
        blocks.append(_unit_rows(np.vstack([g.one_hot_user for g in groups])))
    if fold_items:
        blocks.append(_unit_rows(np.vstack([g.one_hot_item for g in groups])))
    blocks.append(signature_matrix(groups))
    return np.hstack(blocks)


def folds_for(spec: ProblemSpec) -> tuple[bool, bool]:
    """Which attribute blocks to fold: one per similarity constraint dimension."""
    sim = {c.measure.dimension for c in spec.constraints if c.measure.mode is Mode.SIMILARITY}
    return Dimension.USERS in sim, Dimension.ITEMS in sim


# --- solver --------------------------------------------------------------------

def _greedy_candidates(ev: SetEvaluator, members: list[int], filtered: bool) -> list[tuple[float, tuple[int, ...]]]:
    """Grow from the best pair of a large bucket; every prefix in [k_lo, k_hi] is a candidate."""
    spec = ev.spec
    O = ev.objective_matrix(members)
    Cs = ev.constraint_matrices(members) if filtered else []
    m = len(members)
    np.fill_diagonal(O, -np.inf)
    pair_ok = ~np.isnan(O)
    for C, c in zip(Cs, spec.constraints):
        pair_ok &= C >= c.threshold
    masked = np.where(pair_ok, O, -np.inf)
    out = []
    if spec.k_lo == 1 and (not filtered or ev.singleton_ok):
        for j in members:
            if not filtered or ev.admits((j,)):
                out.append((ev.singleton_score, (j,)))
                break
    flat = int(np.argmax(masked))
    a, b = divmod(flat, m)
    if not np.isfinite(masked[a, b]) or spec.k_hi < 2:
        return out
    chosen = [min(a, b), max(a, b)]
    sums = O[a] + O[b]
    csums = [C[a] + C[b] for C in Cs]
    held = [C[a, b] for C in Cs]
    while True:
        s = len(chosen)
        if spec.k_lo <= s:
            local = tuple(sorted(members[j] for j in chosen))
            if not filtered or ev.admits(local):
                out.append((ev.score(local), local))
        if s >= spec.k_hi:
            break
        gain = sums.copy()
        gain[chosen] = -np.inf
        gain[np.isnan(gain)] = -np.inf
        pairs_after = (s + 1) * s / 2
        for h, cs, c in zip(held, csums, spec.constraints):
            # the aggregated constraint must still hold after the addition
            gain[~((h + cs) / pairs_after >= c.threshold)] = -np.inf
        nxt = int(np.argmax(gain))
        if not np.isfinite(gain[nxt]):
            break
        chosen.append(nxt)
        sums += O[nxt]
        held = [h + cs[nxt] for h, cs in zip(held, csums)]
        csums = [cs + C[nxt] for cs, C in zip(csums, Cs)]
    return out


def _bucket_best(ev: SetEvaluator, members: list[int], filtered: bool, bucket_max: int):
    spec = ev.spec
    if len(members) < spec.k_lo:
        return None
    if len(members) <= bucket_max:
        return ev.best_subset(members, filtered)
    cands = _greedy_candidates(ev, members, filtered)
    return min(cands, key=lambda c: (-c[0], c[1])) if cands else None


def _rank(ev: SetEvaluator, ens: HashEnsemble, filtered: bool, bucket_max: int):
    best = None
    for table in ens.buckets:
        for key in sorted(table):
            cand = _bucket_best(ev, table[key], filtered, bucket_max)
            if cand is None or math.isnan(cand[0]):
                continue
            if best is None or (-cand[0], cand[1]) < (-best[0], best[1]):
                best = cand
    return best


def _search(spec: ProblemSpec, groups: Sequence[TaggingGroup], name: str, folds: tuple[bool, bool],
            filtered: bool, d_prime: int, l: int, seed: int, bucket_max: int) -> ResultSet | None:
    started = time.perf_counter()
    if spec.objective_mode is not Mode.SIMILARITY:
        raise ValueError(f"{name} only maximizes similarity objectives")
    if d_prime < 1:
        raise ValueError("d_prime must be >= 1")
    groups = list(groups)
    eligible = [i for i, g in enumerate(groups) if is_describable(g, spec.describability)]
    if not eligible:
        return None
    ev = SetEvaluator([groups[i] for i in eligible], spec)
    vectors = hashing_vectors(ev.groups, *folds)

    lo, hi, d = 1, d_prime, d_prime
    best, trajectory = None, []
    while True:
        ens = build_ensemble(vectors, l, d, seed=[seed, d])
        cand = _rank(ev, ens, filtered, bucket_max)
        trajectory.append([d, cand is not None])
        if cand is None:
            hi = d - 1
        else:
            if best is None or (-cand[0], cand[1]) < (-best[0], best[1]):
                best = cand
            lo = d + 1
        if lo > hi:
            break
        d = (lo + hi) // 2
    if best is None:
        return None
    return make_result(groups, [eligible[j] for j in best[1]], spec, name, started, seed,
                       lsh_bits=d_prime, lsh_tables=l, bucket_max=bucket_max,
                       hash_dimension=int(vectors.shape[1]), trajectory=trajectory)


def sm_lsh(spec: ProblemSpec, groups: Sequence[TaggingGroup], d_prime: int = DEFAULT_BITS, l: int = DEFAULT_TABLES,
           seed: int = 0, bucket_max: int = DEFAULT_BUCKET_MAX) -> ResultSet | None:
    """Best bucket by objective score; constraints are not enforced."""
    return _search(spec, groups, "sm-lsh", (False, False), False, d_prime, l, seed, bucket_max)


def sm_lsh_fi(spec: ProblemSpec, groups: Sequence[TaggingGroup], d_prime: int = DEFAULT_BITS, l: int = DEFAULT_TABLES,
              seed: int = 0, bucket_max: int = DEFAULT_BUCKET_MAX) -> ResultSet | None:
    """Best feasible bucket candidate."""
    return _search(spec, groups, "sm-lsh-fi", (False, False), True, d_prime, l, seed, bucket_max)


def sm_lsh_fo(spec: ProblemSpec, groups: Sequence[TaggingGroup], d_prime: int = DEFAULT_BITS, l: int = DEFAULT_TABLES,
              seed: int = 0, bucket_max: int = DEFAULT_BUCKET_MAX) -> ResultSet | None:
    """Hash with similarity constraints folded into the vectors, then filter."""
    return _search(spec, groups, "sm-lsh-fo", folds_for(spec), True, d_prime, l, seed, bucket_max)
