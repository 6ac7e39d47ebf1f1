"""Synthetic tagging data with planted structure.

Each tuple belongs to a hidden cluster.  A cluster prefers one value per
attribute and draws most of its tags from its own small vocabulary, the
rest from a shared background vocabulary, so groups dominated by one
cluster have similar signatures and groups from different clusters do not.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np

from .model import ITEM, USER, Schema, TaggingTuple, TupleStore, write_tuples

DEFAULT_SCHEMA: dict[str, dict[str, int]] = {
    USER: {"gender": 2, "age": 4, "occupation": 5},
    ITEM: {"genre": 6, "decade": 4},
}


def synthetic_store(n_tuples: int, n_clusters: int, seed: int,
                    schema_spec: Mapping[str, Mapping[str, int]] | None = None,
                    cluster_tags: int = 8, background_tags: int = 20,
                    affinity: float = 0.7, tag_focus: float = 0.75) -> TupleStore:
    """Generate ``n_tuples`` tuples in memory; deterministic for a given seed.

    ``affinity`` is the chance an attribute takes its cluster's preferred
    value and ``tag_focus`` the chance a tag comes from the cluster's own
    vocabulary.
    """
    if n_clusters < 1:
        raise ValueError("n_clusters must be >= 1")
    if n_tuples < 0:
        raise ValueError("n_tuples must be >= 0")
    spec = schema_spec or DEFAULT_SCHEMA
    rng = np.random.default_rng(seed)
    schemas = {}
    for dim in (USER, ITEM):
        attrs = spec.get(dim, {})
        schemas[dim] = Schema(dim, tuple(attrs), {a: tuple(f"{a}{v}" for v in range(n)) for a, n in attrs.items()})

    preferred = {
        dim: {a: rng.integers(len(dom), size=n_clusters) for a, dom in schemas[dim].domains.items()}
        for dim in (USER, ITEM)
    }
    # Zipf-like popularity inside every vocabulary
    cweights = 1.0 / np.arange(1, cluster_tags + 1)
    cweights /= cweights.sum()
    bweights = 1.0 / np.arange(1, background_tags + 1)
    bweights /= bweights.sum()

    tuples = []
    for tid in range(n_tuples):
        c = int(rng.integers(n_clusters))
        vals = {}
        for dim in (USER, ITEM):
            vals[dim] = {}
            for a, dom in schemas[dim].domains.items():
                if rng.random() < affinity:
                    v = int(preferred[dim][a][c])
                else:
                    v = int(rng.integers(len(dom)))
                vals[dim][a] = dom[v]
        tags = set()
        for _ in range(int(rng.integers(1, 5))):
            if rng.random() < tag_focus:
                tags.add(f"c{c}_t{int(rng.choice(cluster_tags, p=cweights))}")
            else:
                tags.add(f"bg{int(rng.choice(background_tags, p=bweights))}")
        tuples.append(TaggingTuple(tid, vals[USER], vals[ITEM], frozenset(tags)))
    return TupleStore(schemas[USER], schemas[ITEM], tuples)


def generate_synthetic(n_tuples: int, n_clusters: int, seed: int, path: str | Path,
                       schema_spec: Mapping[str, Mapping[str, int]] | None = None) -> TupleStore:
    """Write a synthetic tab-separated tagging file and return its contents."""
    store = synthetic_store(n_tuples, n_clusters, seed, schema_spec)
    write_tuples(store, path)
    return store
