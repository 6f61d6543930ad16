"""Generic traversal and rewriting of expression trees."""

from __future__ import annotations

from collections.abc import Callable, Iterator
from dataclasses import fields, is_dataclass, replace
from typing import Any

from src.morphgen.frontend.ast import Name

_POSITION_FIELDS = ("line", "col", "text")


def children(node: Any) -> Iterator[Any]:
    """Yield the direct sub-nodes of a syntax node (tuple members included)."""
    for f in fields(node):
        if f.name in _POSITION_FIELDS:
            continue
        value = getattr(node, f.name)
        if is_dataclass(value):
            yield value
        elif isinstance(value, tuple):
            yield from (item for item in value if is_dataclass(item))


def walk(node: Any) -> Iterator[Any]:
    """Pre-order traversal of a node and all its descendants."""
    yield node
    for child in children(node):
        yield from walk(child)


def transform(node: Any, fn: Callable[[Any], Any]) -> Any:
    """Rebuild a tree bottom-up, replacing each node by ``fn(node)``."""
    changes = {}
    for f in fields(node):
        if f.name in _POSITION_FIELDS:
            continue
        value = getattr(node, f.name)
        if is_dataclass(value):
            new = transform(value, fn)
        elif isinstance(value, tuple) and any(is_dataclass(item) for item in value):
            new = tuple(transform(item, fn) if is_dataclass(item) else item for item in value)
        else:
            continue
        if new is not value:
            changes[f.name] = new
    rebuilt = replace(node, **changes) if changes else node
    return fn(rebuilt)


def names(node: Any) -> set[str]:
    """Identifiers referenced anywhere in a tree."""
    return {n.id for n in walk(node) if isinstance(n, Name)}
