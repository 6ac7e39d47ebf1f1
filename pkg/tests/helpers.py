"""Builders shared by the test modules."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from tagdm.model import GroupDescriptor, Schema, TaggingGroup, TaggingTuple, TupleStore
from tagdm.signature import TagSignature

DATA = Path(__file__).parent / "data"
FIXTURE = DATA / "fixture200.tsv"


def make_group(sig, preds=(("user", "a", "x"),), members=(0,), users=(), items=()) -> TaggingGroup:
    """Free-standing group for solver tests; one-hot blocks are left empty."""
    return TaggingGroup(
        descriptor=GroupDescriptor.of(*preds),
        members=tuple(members),
        one_hot_user=np.zeros(0, dtype=np.uint8),
        one_hot_item=np.zeros(0, dtype=np.uint8),
        users=frozenset(users),
        items=frozenset(items),
        signature=TagSignature(sig),
    )


def random_groups(rng: np.random.Generator, n: int, d: int = 6, n_tuples: int = 60,
                  user_attrs: int = 2, item_attrs: int = 2, values: int = 3) -> list[TaggingGroup]:
    """Groups with random signatures, descriptors and member sets."""
    out = []
    for _ in range(n):
        sig = rng.integers(0, 5, size=d).astype(float)
        if not sig.any():
            sig[rng.integers(d)] = 1.0
        preds = []
        for dim, count in (("user", user_attrs), ("item", item_attrs)):
            for a in range(count):
                if rng.random() < 0.6:
                    preds.append((dim, f"{dim[0]}{a}", f"v{rng.integers(values)}"))
        if not preds:
            preds.append(("user", "u0", f"v{rng.integers(values)}"))
        size = int(rng.integers(1, n_tuples // 3))
        members = sorted(rng.choice(n_tuples, size=size, replace=False).tolist())
        out.append(make_group(sig, preds, members,
                              users={f"u{m % 7}" for m in members}, items={f"i{m % 11}" for m in members}))
    return out


def random_store(rng: np.random.Generator, n: int, attrs: dict[str, dict[str, int]] | None = None) -> TupleStore:
    attrs = attrs or {"user": {"g": 2}, "item": {"k": 2}}
    schemas = {dim: Schema(dim, tuple(a), {name: tuple(f"{name}{v}" for v in range(size)) for name, size in a.items()})
               for dim, a in attrs.items()}
    tuples = []
    for tid in range(n):
        vals = {dim: {a: dom[int(rng.integers(len(dom)))] for a, dom in schemas[dim].domains.items()}
                for dim in ("user", "item")}
        tags = frozenset(f"t{int(x)}" for x in rng.integers(0, 6, size=int(rng.integers(1, 4))))
        tuples.append(TaggingTuple(tid, vals["user"], vals["item"], tags))
    return TupleStore(schemas["user"], schemas["item"], tuples)



# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LOG: list[str] = []


def record(criterion: int, name: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LOG.append(f"{'PASS' if passed else 'FAIL'}  criterion {criterion}: {name}: {detail}")
