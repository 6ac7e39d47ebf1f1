"""Tag signatures and pairwise comparison of groups.

Scalar functions (``cosine_similarity``, ``structural_pairwise``,
``jaccard_item_overlap``, ``pairwise_score``, ``aggregate_score``) are the
reference definitions.  :func:`pairwise_matrix` computes the same values for
every pair of a group list at once and is what the solvers use.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, replace
from itertools import combinations
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .model import ITEM, USER, TaggingGroup, TupleStore

DEFAULT_VOCABULARY_SIZE = 25


class InvalidSignatureError(ValueError):
    """A signature has no positive weight, so its angle is undefined."""


class DimensionAbsentError(ValueError):
    """Neither group constrains the dimension being compared."""


class Dimension(str, enum.Enum):
    USERS = "users"
    ITEMS = "items"
    TAGS = "tags"


class Mode(str, enum.Enum):
    SIMILARITY = "similarity"
    DIVERSITY = "diversity"


@dataclass(frozen=True)
class MiningMeasure:
    dimension: Dimension
    mode: Mode

    def __post_init__(self):
        object.__setattr__(self, "dimension", Dimension(self.dimension))
        object.__setattr__(self, "mode", Mode(self.mode))

    @classmethod
    def parse(cls, text: str) -> MiningMeasure:
        """``"tags-similarity"`` -> MiningMeasure(TAGS, SIMILARITY)."""
        dim, _, mode = text.partition("-")
        return cls(Dimension(dim), Mode(mode))

    @property
    def similarity(self) -> bool:
        return self.mode is Mode.SIMILARITY

    def vacuous(self) -> float:
        """Value for a set with no pairs: best case for similarity, worst for diversity."""
        return 1.0 if self.similarity else 0.0

    def __str__(self):
        return f"{self.dimension.value}-{self.mode.value}"


@dataclass(frozen=True)
class MetricConfig:
    """Base similarity metric per dimension."""

    users: str = "structural"
    items: str = "structural"
    tags: str = "cosine"

    def __post_init__(self):
        for dim in ("users", "items"):
            if getattr(self, dim) not in ("structural", "jaccard"):
                raise ValueError(f"unknown {dim} metric {getattr(self, dim)!r}")
        if self.tags != "cosine":
            raise ValueError(f"unknown tags metric {self.tags!r}")

    def for_dimension(self, dim: Dimension) -> str:
        return getattr(self, Dimension(dim).value)


@dataclass(frozen=True, eq=False)
class TagSignature:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("signature must be a non-empty vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("signature weights must be finite and non-negative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def d(self) -> int:
        return self.weights.size

    @property
    def valid(self) -> bool:
        return bool(np.any(self.weights > 0))

    def pairs(self, vocabulary: Sequence[str]) -> list[tuple[str, float]]:
        """(tag, weight) pairs with positive weight, heaviest first."""
        out = [(t, float(w)) for t, w in zip(vocabulary, self.weights) if w > 0]
        return sorted(out, key=lambda tw: (-tw[1], tw[0]))


def build_vocabulary(store: TupleStore, size: int = DEFAULT_VOCABULARY_SIZE) -> list[str]:
    """The ``size`` tags used by the most tuples (ties broken alphabetically)."""
    if size < 1:
        raise ValueError("vocabulary size must be >= 1")
    freq = Counter(tag for t in store for tag in t.tags)
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    return [tag for tag, _ in ranked[:size]]


def build_signature(group: TaggingGroup, store: TupleStore, vocabulary: Sequence[str]) -> TagSignature:
    """Count, per vocabulary entry, the member tuples using that tag."""
    index = {tag: j for j, tag in enumerate(vocabulary)}
    counts = np.zeros(len(vocabulary))
    for tid in group.members:
        for tag in store.by_id(tid).tags:
            j = index.get(tag)
            if j is not None:
                counts[j] += 1
    sig = TagSignature(counts)
    if not sig.valid:
        raise InvalidSignatureError(f"group {group.descriptor} uses no vocabulary tag")
    return sig


def attach_signatures(groups: Sequence[TaggingGroup], store: TupleStore, vocabulary: Sequence[str]) -> list[TaggingGroup]:
    """Copies of ``groups`` carrying signatures; groups with invalid ones are dropped."""
    out = []
    for g in groups:
        try:
            out.append(replace(g, signature=build_signature(g, store, vocabulary)))
        except InvalidSignatureError:
            continue
    return out


def read_signatures(path: str | Path) -> dict[int, TagSignature]:
    """Parse ``index<TAB>w1,w2,...`` lines into signatures keyed by group index."""
    out: dict[int, TagSignature] = {}
    dims = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                idx, vec = line.split("\t")
                sig = TagSignature([float(x) for x in vec.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            out[int(idx)] = sig
            dims.add(sig.d)
    if len(dims) > 1:
        raise ValueError(f"{path}: signatures have differing lengths {sorted(dims)}")
    return out


def write_signatures(groups: Sequence[TaggingGroup], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, g in enumerate(groups):
            fh.write(f"{i}\t{','.join(repr(float(w)) for w in g.signature.weights)}\n")


def apply_signatures(groups: Sequence[TaggingGroup], signatures: Mapping[int, TagSignature]) -> list[TaggingGroup]:
    """Attach externally computed signatures by group index; unlisted or invalid groups are dropped."""
    return [replace(g, signature=signatures[i]) for i, g in enumerate(groups)
            if i in signatures and signatures[i].valid]


# --- pairwise comparison -------------------------------------------------

def _vec(x) -> np.ndarray:
    return x.weights if isinstance(x, TagSignature) else np.asarray(x, dtype=np.float64)


def cosine_similarity(x, y) -> float:
    a, b = _vec(x), _vec(y)
    if a.shape != b.shape:
        raise ValueError("signatures differ in length")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise InvalidSignatureError("undefined angle")
    return float(min(1.0, max(0.0, np.dot(a, b) / (na * nb))))


def exact_match(v1: str, v2: str) -> float:
    return 1.0 if v1 == v2 else 0.0


_DIM_SIDE = {Dimension.USERS: USER, Dimension.ITEMS: ITEM}


def structural_pairwise(g1: TaggingGroup, g2: TaggingGroup, dim, sim: Callable[[str, str], float] = exact_match) -> float:
    """Value agreement on attributes constrained by both descriptors.

    The sum of ``sim`` over shared attributes is divided by the number of
    attributes constrained by either descriptor.
    """
    side = _DIM_SIDE[Dimension(dim)]
    d1, d2 = g1.descriptor.on(side), g2.descriptor.on(side)
    either = d1.keys() | d2.keys()
    if not either:
        raise DimensionAbsentError(f"neither group constrains {side} attributes")
    return sum(sim(d1[a], d2[a]) for a in d1.keys() & d2.keys()) / len(either)


def _jaccard(s1: frozenset, s2: frozenset) -> float:
    union = s1 | s2
    if not union:
        raise ValueError("both groups are empty")
    return len(s1 & s2) / len(union)


def jaccard_item_overlap(g1: TaggingGroup, g2: TaggingGroup) -> float:
    """Fraction of the items tagged by either group that both groups tagged."""
    return _jaccard(g1.items, g2.items)


def jaccard_user_overlap(g1: TaggingGroup, g2: TaggingGroup) -> float:
    return _jaccard(g1.users, g2.users)


def _base_similarity(g1, g2, dim: Dimension, metrics: MetricConfig) -> float:
    if dim is Dimension.TAGS:
        return cosine_similarity(g1.signature, g2.signature)
    if metrics.for_dimension(dim) == "structural":
        return structural_pairwise(g1, g2, dim)
    # set distance: users are compared by the items they tagged and vice versa
    return jaccard_item_overlap(g1, g2) if dim is Dimension.USERS else jaccard_user_overlap(g1, g2)


def pairwise_score(g1: TaggingGroup, g2: TaggingGroup, measure: MiningMeasure, metrics: MetricConfig = MetricConfig()) -> float:
    s = _base_similarity(g1, g2, measure.dimension, metrics)
    return s if measure.similarity else 1.0 - s


def aggregate_score(groups: Sequence[TaggingGroup], measure: MiningMeasure, metrics: MetricConfig = MetricConfig()) -> float:
    """Mean pairwise score over all unordered pairs of distinct groups."""
    groups = list(groups)
    if len(groups) < 2:
        raise ValueError("pairwise aggregation needs at least two groups")
    scores = [pairwise_score(a, b, measure, metrics) for a, b in combinations(groups, 2)]
    return math.fsum(scores) / len(scores)


def set_score(groups: Sequence[TaggingGroup], measure: MiningMeasure, metrics: MetricConfig = MetricConfig()) -> float:
    """:func:`aggregate_score`, with the vacuous value for a single group."""
    if len(groups) == 1:
        return measure.vacuous()
    return aggregate_score(groups, measure, metrics)


# --- vectorized --------------------------------------------------------------

def signature_matrix(groups: Sequence[TaggingGroup], normalize: bool = True) -> np.ndarray:
    S = np.vstack([g.signature.weights for g in groups]).astype(np.float64)
    if normalize:
        norms = np.linalg.norm(S, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise InvalidSignatureError("undefined angle")
        S = S / norms
    return S


def cosine_matrix(groups: Sequence[TaggingGroup]) -> np.ndarray:
    S = signature_matrix(groups)
    return np.clip(S @ S.T, 0.0, 1.0)


def _structural_matrix(groups: Sequence[TaggingGroup], side: str) -> np.ndarray:
    descs = [g.descriptor.on(side) for g in groups]
    attrs = sorted({a for d in descs for a in d})
    n = len(groups)
    num = np.zeros((n, n))
    den = np.zeros((n, n))
    for a in attrs:
        values = {}
        codes = np.array([values.setdefault(d[a], len(values)) if a in d else -1 for d in descs])
        has = codes >= 0
        both = has[:, None] & has[None, :]
        num += both & (codes[:, None] == codes[None, :])
        den += has[:, None] | has[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1), np.nan)


def _jaccard_matrix(sets: Sequence[frozenset]) -> np.ndarray:
    universe = {x: i for i, x in enumerate(sorted(set().union(*sets)))}
    M = np.zeros((len(sets), len(universe)))
    for r, s in enumerate(sets):
        M[r, [universe[x] for x in s]] = 1.0
    inter = M @ M.T
    sizes = M.sum(axis=1)
    union = sizes[:, None] + sizes[None, :] - inter
    return inter / union


def similarity_matrix(groups: Sequence[TaggingGroup], dim, metrics: MetricConfig = MetricConfig()) -> np.ndarray:
    dim = Dimension(dim)
    if dim is Dimension.TAGS:
        return cosine_matrix(groups)
    if metrics.for_dimension(dim) == "structural":
        return _structural_matrix(groups, _DIM_SIDE[dim])
    if dim is Dimension.USERS:
        return _jaccard_matrix([g.items for g in groups])
    return _jaccard_matrix([g.users for g in groups])


def pairwise_matrix(groups: Sequence[TaggingGroup], measure: MiningMeasure, metrics: MetricConfig = MetricConfig()) -> np.ndarray:
    """``pairwise_score`` for every ordered pair; NaN where undefined."""
    s = similarity_matrix(groups, measure.dimension, metrics)
    return s if measure.similarity else 1.0 - s
