"""Versioned document world state with selector queries.

The world state is an in-process ordered map from string keys to structured
documents, each stamped with the (block, tx) version that last wrote it.
It has no persistence of its own: on startup it is reconstructed by
replaying the ledger. Visibility is atomic per write set: readers observe
the state before or after a commit, never a mixture.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Any, Iterator

from . import codec
from .errors import LedgerError


@dataclass(frozen=True, order=True, slots=True)
class Version:
    """Total order over commits: lexicographic (block_no, tx_index)."""

    block_no: int
    tx_index: int

    def to_doc(self) -> list[int]:
        return [self.block_no, self.tx_index]

    @classmethod
    def from_doc(cls, doc: Any) -> "Version":
        return cls(int(doc[0]), int(doc[1]))


@dataclass(frozen=True, slots=True)
class StateEntry:
    key: str
    doc: Any
    version: Version


@dataclass(frozen=True, slots=True)
class WriteOp:
    """One intended write: a document value for ``key``, or its deletion."""

    key: str
    doc: Any = None
    delete: bool = False

    def to_doc(self) -> dict[str, Any]:
        if self.delete:
            return {"key": self.key, "delete": True}
        return {"key": self.key, "doc": self.doc}

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "WriteOp":
        if doc.get("delete"):
            return cls(key=doc["key"], delete=True)
        return cls(key=doc["key"], doc=doc.get("doc"))


class StateDB:
    """Current key -> (doc, version) mapping for one peer and channel.

    Many readers, one committer: ``apply_write_set`` is the only mutator and
    is serialized; readers take the same lock briefly so they never see a
    half-applied write set.
    """

    def __init__(self) -> None:
        self._entries: dict[str, StateEntry] = {}
        self._lock = threading.Lock()

    def get(self, key: str) -> StateEntry | None:
        with self._lock:
            return self._entries.get(key)

    def apply_write_set(self, writes: list[WriteOp], version: Version) -> None:
        """Apply all writes atomically at ``version``.

        Every touched key must currently be below ``version``; otherwise
        VERSION_REGRESSION is raised and nothing is applied.
        """
        with self._lock:
            for w in writes:
                current = self._entries.get(w.key)
                if current is not None and current.version >= version:
                    raise LedgerError(
                        "VERSION_REGRESSION",
                        f"key {w.key!r} already at {current.version}, refusing {version}",
                    )
            for w in writes:
                if w.delete:
                    self._entries.pop(w.key, None)
                else:
                    self._entries[w.key] = StateEntry(w.key, w.doc, version)

    def query(self, selector: "Selector") -> list[StateEntry]:
        """All entries whose doc satisfies the selector, key-ascending.

        Full scan; there are no secondary indexes.
        """
        with self._lock:
            snapshot = list(self._entries.values())
        hits = [e for e in snapshot if selector.matches(e.doc)]
        hits.sort(key=lambda e: e.key)
        return hits

    def items(self) -> list[StateEntry]:
        """Snapshot of all entries, key-ascending."""
        with self._lock:
            snapshot = list(self._entries.values())
        snapshot.sort(key=lambda e: e.key)
        return snapshot

    def state_root(self) -> bytes:
        """Digest over all (key, version, doc) triples sorted by key."""
        triples = [[e.key, e.version.to_doc(), e.doc] for e in self.items()]
        return codec.hash_value(triples)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def __iter__(self) -> Iterator[str]:
        with self._lock:
            keys = sorted(self._entries)
        return iter(keys)


_COMPARISONS = {
    "eq": lambda a, b: a == b,
    "gt": lambda a, b: a > b,
    "lt": lambda a, b: a < b,
    "gte": lambda a, b: a >= b,
    "lte": lambda a, b: a <= b,
}

_SCALARS = (str, int, bool, type(None))


def _lookup(doc: Any, path: list[str]) -> tuple[bool, Any]:
    """Resolve a dot path against a document. Missing -> (False, None)."""
    node = doc
    for part in path:
        if not isinstance(node, dict) or part not in node:
            return False, None
        node = node[part]
    return True, node


def _same_kind(a: Any, b: Any) -> bool:
    # bool is an int subclass in Python; keep them distinct kinds here.
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool)
    if isinstance(a, int) and isinstance(b, int):
        return True
    return type(a) is type(b)


class Selector:
    """Expression tree over eq/gt/lt/gte/lte comparisons joined by and/or.

    Comparisons apply a scalar constant to a dot-separated field path; a
    missing path never matches.
    """

    def __init__(self, op: str, *, path: str | None = None, value: Any = None,
                 args: list["Selector"] | None = None):
        self.op = op
        self.path = path.split(".") if path is not None else None
        self.value = value
        self.args = args or []

    @classmethod
    def parse(cls, doc: Any) -> "Selector":
        """Build a selector from its document form; MALFORMED_SELECTOR on
        unknown operators, missing fields, or non-scalar comparands."""
        if not isinstance(doc, dict) or "op" not in doc:
            raise LedgerError("MALFORMED_SELECTOR", f"not a selector node: {doc!r}")
        op = doc["op"]
        if op in ("and", "or"):
            args = doc.get("args")
            if not isinstance(args, list) or not args:
                raise LedgerError("MALFORMED_SELECTOR", f"{op} needs a nonempty args list")
            return cls(op, args=[cls.parse(a) for a in args])
        if op in _COMPARISONS:
            path = doc.get("path")
            if not isinstance(path, str) or not path:
                raise LedgerError("MALFORMED_SELECTOR", f"{op} needs a field path")
            value = doc.get("value")
            if isinstance(value, float) or not isinstance(value, _SCALARS):
                raise LedgerError("MALFORMED_SELECTOR", f"comparand must be a scalar: {value!r}")
            return cls(op, path=path, value=value)
        raise LedgerError("MALFORMED_SELECTOR", f"unknown operator {op!r}")

    def matches(self, doc: Any) -> bool:
        if self.op == "and":
            return all(a.matches(doc) for a in self.args)
        if self.op == "or":
            return any(a.matches(doc) for a in self.args)
        found, actual = _lookup(doc, self.path)
        if not found:
            return False
        if not isinstance(actual, _SCALARS) or isinstance(actual, float):
            return False
        if self.op == "eq":
            return _same_kind(actual, self.value) and actual == self.value
        if not _same_kind(actual, self.value) or actual is None or self.value is None:
            return False
        return _COMPARISONS[self.op](actual, self.value)
