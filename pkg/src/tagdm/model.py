"""Tagging data model: schemas, expanded tagging tuples, describable groups.

A tagging action is stored as one expanded tuple (user attribute values,
item attribute values, tag set).  Groups are conjunctions of
``attribute = value`` predicates over either dimension, and a group's
members are exactly the tuples satisfying every predicate.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

log = logging.getLogger(__name__)

USER = "user"
ITEM = "item"
DIMENSIONS = (USER, ITEM)

# Reserved value for a missing attribute cell; it is a regular domain member.
MISSING = "∅"

TAG_SEPARATOR = "|"
_PREFIX = {USER: "u:", ITEM: "i:"}


class DataError(ValueError):
    """Input tuples are malformed or empty."""


@dataclass(frozen=True)
class Schema:
    dimension: str
    attributes: tuple[str, ...]
    domains: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"unknown dimension {self.dimension!r}")
        if len(set(self.attributes)) != len(self.attributes):
            raise ValueError(f"duplicate attribute names in {self.dimension} schema")
        if set(self.domains) != set(self.attributes):
            raise ValueError("domains must cover exactly the schema attributes")

    @property
    def width(self) -> int:
        """Length of the one-hot encoding over all attribute values."""
        return sum(len(self.domains[a]) for a in self.attributes)

    def offsets(self) -> dict[tuple[str, str], int]:
        """Position of each (attribute, value) in the one-hot layout."""
        pos, out = 0, {}
        for a in self.attributes:
            for v in self.domains[a]:
                out[(a, v)] = pos
                pos += 1
        return out


@dataclass(frozen=True)
class TaggingTuple:
    id: int
    user_values: Mapping[str, str]
    item_values: Mapping[str, str]
    tags: frozenset[str]
    user_id: str | None = None
    item_id: str | None = None

    def values(self, dimension: str) -> Mapping[str, str]:
        return self.user_values if dimension == USER else self.item_values

    @property
    def user_key(self) -> str:
        if self.user_id is not None:
            return self.user_id
        return TAG_SEPARATOR.join(self.user_values.values())

    @property
    def item_key(self) -> str:
        if self.item_id is not None:
            return self.item_id
        return TAG_SEPARATOR.join(self.item_values.values())


class Predicate(NamedTuple):
    dimension: str
    attribute: str
    value: str

    def sort_key(self):
        return (DIMENSIONS.index(self.dimension), self.attribute, self.value)

    def __str__(self):
        return f"{_PREFIX[self.dimension]}{self.attribute}={self.value}"

    @classmethod
    def parse(cls, text: str) -> Predicate:
        """Parse ``dim:attr=value`` where dim is u/user or i/item."""
        try:
            dim, rest = text.split(":", 1)
            attr, value = rest.split("=", 1)
        except ValueError:
            raise ValueError(f"bad predicate {text!r}, expected dim:attr=value") from None
        dim = {"u": USER, "user": USER, "i": ITEM, "item": ITEM}.get(dim.strip().lower())
        if dim is None:
            raise ValueError(f"bad dimension in predicate {text!r}")
        return cls(dim, attr.strip(), value.strip())


@dataclass(frozen=True)
class GroupDescriptor:
    """Conjunctive predicate; predicates are kept in canonical order."""

    predicates: tuple[Predicate, ...]

    def __post_init__(self):
        if not self.predicates:
            raise ValueError("a group descriptor needs at least one predicate")
        slots = [(p.dimension, p.attribute) for p in self.predicates]
        if len(set(slots)) != len(slots):
            raise ValueError("at most one predicate per (dimension, attribute)")
        canon = tuple(sorted(self.predicates, key=Predicate.sort_key))
        object.__setattr__(self, "predicates", canon)

    @classmethod
    def of(cls, *predicates: Predicate | tuple[str, str, str]) -> GroupDescriptor:
        return cls(tuple(Predicate(*p) for p in predicates))

    def sort_key(self):
        return tuple(p.sort_key() for p in self.predicates)

    def on(self, dimension: str) -> dict[str, str]:
        """Attribute -> value restricted to one dimension."""
        return {p.attribute: p.value for p in self.predicates if p.dimension == dimension}

    def matches(self, t: TaggingTuple) -> bool:
        return all(t.values(p.dimension).get(p.attribute) == p.value for p in self.predicates)

    def __len__(self):
        return len(self.predicates)

    def __str__(self):
        return ", ".join(str(p) for p in self.predicates)


@dataclass(eq=False)
class TaggingGroup:
    descriptor: GroupDescriptor
    members: tuple[int, ...]
    one_hot_user: np.ndarray
    one_hot_item: np.ndarray
    users: frozenset[str] = frozenset()
    items: frozenset[str] = frozenset()
    signature: object = None  # TagSignature, attached by tagdm.signature

    @property
    def size(self) -> int:
        return len(self.members)

    def constrains(self, dimension: str) -> bool:
        return any(p.dimension == dimension for p in self.descriptor.predicates)

    def __repr__(self):
        return f"TaggingGroup({self.descriptor}, size={self.size})"


class TupleStore:
    """Immutable collection of tagging tuples with per-value member masks."""

    def __init__(self, user_schema: Schema, item_schema: Schema, tuples: Iterable[TaggingTuple]):
        self.user_schema = user_schema
        self.item_schema = item_schema
        self.tuples: tuple[TaggingTuple, ...] = tuple(sorted(tuples, key=lambda t: t.id))
        ids = [t.id for t in self.tuples]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate tuple ids")
        if ids and ids[0] < 0:
            raise DataError("tuple ids must be non-negative")
        for t in self.tuples:
            if not t.tags:
                raise DataError(f"tuple {t.id} has no tags")
            for schema in (user_schema, item_schema):
                vals = t.values(schema.dimension)
                for a in schema.attributes:
                    if a not in vals:
                        raise DataError(f"tuple {t.id} lacks {schema.dimension} attribute {a!r}")
                    if vals[a] not in schema.domains[a]:
                        raise DataError(f"tuple {t.id}: {vals[a]!r} not in domain of {a!r}")
        self.ids = np.array(ids, dtype=np.int64)
        self._codes: dict[tuple[str, str], np.ndarray] = {}

    def __len__(self):
        return len(self.tuples)

    def __iter__(self) -> Iterator[TaggingTuple]:
        return iter(self.tuples)

    def schema(self, dimension: str) -> Schema:
        return self.user_schema if dimension == USER else self.item_schema

    def slots(self) -> list[tuple[str, str]]:
        """All (dimension, attribute) pairs in canonical order."""
        return [(d, a) for d in DIMENSIONS for a in sorted(self.schema(d).attributes)]

    def codes(self, dimension: str, attribute: str) -> np.ndarray:
        """Per-tuple index of the attribute's value within its domain."""
        key = (dimension, attribute)
        if key not in self._codes:
            domain = self.schema(dimension).domains[attribute]
            lookup = {v: i for i, v in enumerate(domain)}
            self._codes[key] = np.array(
                [lookup[t.values(dimension)[attribute]] for t in self.tuples], dtype=np.int64
            )
        return self._codes[key]

    def by_id(self, tid: int) -> TaggingTuple:
        pos = int(np.searchsorted(self.ids, tid))
        if pos >= len(self.ids) or self.ids[pos] != tid:
            raise KeyError(tid)
        return self.tuples[pos]

    def filter(self, predicates: Sequence[Predicate]) -> TupleStore:
        """Tuples satisfying every predicate; ids and schemas are kept."""
        for p in predicates:
            if p.attribute not in self.schema(p.dimension).attributes:
                raise DataError(f"unknown attribute in scope: {p}")
        desc_ok = [t for t in self.tuples if all(t.values(p.dimension)[p.attribute] == p.value for p in predicates)]
        return TupleStore(self.user_schema, self.item_schema, desc_ok)

    def subset(self, ids: Iterable[int]) -> TupleStore:
        keep = set(ids)
        return TupleStore(self.user_schema, self.item_schema, [t for t in self.tuples if t.id in keep])


def _make_group(store: TupleStore, descriptor: GroupDescriptor, positions: np.ndarray) -> TaggingGroup:
    members = tuple(int(i) for i in store.ids[positions])
    hot = {}
    for dim in DIMENSIONS:
        schema = store.schema(dim)
        vec = np.zeros(schema.width, dtype=np.uint8)
        offsets = schema.offsets()
        for a, v in descriptor.on(dim).items():
            vec[offsets[(a, v)]] = 1
        hot[dim] = vec
    rows = [store.tuples[i] for i in positions]
    return TaggingGroup(
        descriptor=descriptor,
        members=members,
        one_hot_user=hot[USER],
        one_hot_item=hot[ITEM],
        users=frozenset(t.user_key for t in rows),
        items=frozenset(t.item_key for t in rows),
    )


def enumerate_groups(store: TupleStore, min_size: int = 1, max_predicates: int | None = None) -> list[TaggingGroup]:
    """Every describable group with at least ``min_size`` member tuples.

    Descriptors are grown level by level; a conjunction's members are a
    subset of each sub-conjunction's members, so anything below
    ``min_size`` is never extended.  Output is sorted by descriptor.
    """
    if len(store) == 0:
        raise DataError("no data")
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    slots = store.slots()
    if max_predicates is None:
        max_predicates = len(slots)
    if max_predicates < 1:
        raise ValueError("max_predicates must be >= 1")

    codes = [store.codes(d, a) for d, a in slots]
    domains = [store.schema(d).domains[a] for d, a in slots]
    everything = np.arange(len(store))

    found: list[tuple[tuple[Predicate, ...], np.ndarray]] = []
    # frontier entries: (last slot index, predicates, member positions)
    frontier = [(-1, (), everything)]
    for _level in range(max_predicates):
        nxt = []
        for last, preds, pos in frontier:
            for s in range(last + 1, len(slots)):
                vals = codes[s][pos]
                counts = np.bincount(vals, minlength=len(domains[s]))
                for v in np.flatnonzero(counts >= min_size):
                    sub = pos[vals == v]
                    p = Predicate(slots[s][0], slots[s][1], domains[s][v])
                    nxt.append((s, preds + (p,), sub))
        found.extend((preds, pos) for _, preds, pos in nxt)
        frontier = nxt
        if not frontier:
            break

    groups = [_make_group(store, GroupDescriptor(preds), pos) for preds, pos in found]
    groups.sort(key=lambda g: g.descriptor.sort_key())
    return groups


def group_support(groups: Iterable[TaggingGroup]) -> int:
    """Number of distinct tuples covered by at least one group."""
    covered: set[int] = set()
    for g in groups:
        covered.update(g.members)
    return len(covered)


def is_describable(group: TaggingGroup, describability: str) -> bool:
    if describability == "either":
        return True
    if describability in DIMENSIONS:
        return group.constrains(describability)
    raise ValueError(f"unknown describability {describability!r}")


# --- delimited file I/O ---------------------------------------------------

def _split_header(header: Sequence[str]):
    cols: dict[str, list[tuple[int, str]]] = {USER: [], ITEM: []}
    tags_col = user_col = item_col = None
    for i, name in enumerate(header):
        if name.startswith("u:"):
            cols[USER].append((i, name[2:]))
        elif name.startswith("i:"):
            cols[ITEM].append((i, name[2:]))
        elif name == "tags":
            tags_col = i
        elif name == "user":
            user_col = i
        elif name == "item":
            item_col = i
        else:
            raise DataError(f"unrecognised column {name!r}")
    if tags_col is None:
        raise DataError("missing 'tags' column")
    for dim in DIMENSIONS:
        names = [n for _, n in cols[dim]]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate {dim} attribute columns")
    return cols, tags_col, user_col, item_col


def read_tuples(path: str | Path) -> TupleStore:
    """Load a tab-separated tagging file.

    Columns prefixed ``u:``/``i:`` are user/item attributes, ``tags`` holds
    ``|``-joined tags, and optional ``user``/``item`` columns carry entity
    ids (otherwise an entity is identified by its attribute values).
    Empty attribute cells become :data:`MISSING`.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        cols, tags_col, user_col, item_col = _split_header(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append(row)

    tuples = []
    seen: dict[str, dict[str, set[str]]] = {USER: {}, ITEM: {}}
    for tid, row in enumerate(rows):
        vals = {}
        for dim in DIMENSIONS:
            vals[dim] = {name: (row[i].strip() or MISSING) for i, name in cols[dim]}
            for name, v in vals[dim].items():
                seen[dim].setdefault(name, set()).add(v)
        tags = frozenset(t.strip() for t in row[tags_col].split(TAG_SEPARATOR) if t.strip())
        tuples.append(TaggingTuple(
            id=tid,
            user_values=vals[USER],
            item_values=vals[ITEM],
            tags=tags,
            user_id=row[user_col] if user_col is not None else None,
            item_id=row[item_col] if item_col is not None else None,
        ))
    schemas = {}
    for dim in DIMENSIONS:
        names = tuple(n for _, n in cols[dim])
        schemas[dim] = Schema(dim, names, {n: tuple(sorted(seen[dim].get(n, ()))) for n in names})
    return TupleStore(schemas[USER], schemas[ITEM], tuples)


def write_tuples(store: TupleStore, path: str | Path) -> None:
    header = [f"u:{a}" for a in store.user_schema.attributes]
    header += [f"i:{a}" for a in store.item_schema.attributes]
    header.append("tags")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_NONE)
        w.writerow(header)
        for t in store:
            row = [t.user_values[a] for a in store.user_schema.attributes]
            row += [t.item_values[a] for a in store.item_schema.attributes]
            row.append(TAG_SEPARATOR.join(sorted(t.tags)))
            w.writerow(row)
