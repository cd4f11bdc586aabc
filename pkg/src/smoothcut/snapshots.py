"""Versioned JSON snapshots of learner state.

A snapshot is a JSON object ``{"format_version": 1, "state": <node>}``.
Nodes encode Python values as follows:

* JSON scalars, lists and string-keyed dicts map to themselves.
* ``{"__ndarray__": [...], "dtype": "float64", "shape": [...]}`` for numpy arrays.
* ``{"__tuple__": [...]}`` for tuples.
* ``{"__dict__": [[key, value], ...]}`` for dicts with non-string keys.
* ``{"__float__": "nan" | "inf" | "-inf"}`` for non-finite floats.
* ``{"__object__": "module.Class", "attrs": {...}}`` for package objects
  (learners, polytopes, ellipsoids, feature maps), restored attribute by
  attribute without calling ``__init__``. Slotted attributes are included.
* ``{"__rng__": <bit generator state>}`` for ``numpy.random.Generator``.

Only classes defined inside this package can be restored. Arbitrary
callables (user feature maps, lambdas) cannot be snapshotted.
"""
from __future__ import annotations

import dataclasses
import importlib
import json
import math

import numpy as np

FORMAT_VERSION = 1
_PACKAGE = __name__.rsplit(".", 1)[0]


class SnapshotError(ValueError):
    """State that cannot be encoded, or a snapshot that cannot be decoded."""


def _encode(obj, path: str):
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else {"__float__": repr(v)}
    if isinstance(obj, np.ndarray):
        if obj.dtype == object:
            raise SnapshotError(f"{path}: object arrays are not supported")
        data = obj.tolist() if obj.dtype.kind != "f" else [_encode(v, path) for v in obj.ravel().tolist()]
        return {"__ndarray__": data, "dtype": str(obj.dtype), "shape": list(obj.shape),
                "writeable": bool(obj.flags.writeable)}
    if isinstance(obj, tuple):
        return {"__tuple__": [_encode(v, f"{path}[{i}]") for i, v in enumerate(obj)]}
    if isinstance(obj, list):
        return [_encode(v, f"{path}[{i}]") for i, v in enumerate(obj)]
    if isinstance(obj, dict):
        if all(isinstance(k, str) and not k.startswith("__") for k in obj):
            return {k: _encode(v, f"{path}.{k}") for k, v in obj.items()}
        return {"__dict__": [[_encode(k, path), _encode(v, f"{path}[{k!r}]")] for k, v in obj.items()]}
    if isinstance(obj, np.random.Generator):
        return {"__rng__": _encode(obj.bit_generator.state, path)}
    cls = type(obj)
    if cls.__module__.startswith(_PACKAGE):
        if dataclasses.is_dataclass(obj):
            attrs = {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
        else:
            attrs = dict(getattr(obj, "__dict__", {}))
            for klass in cls.__mro__:
                for name in getattr(klass, "__slots__", ()):
                    if hasattr(obj, name):
                        attrs[name] = getattr(obj, name)
        return {"__object__": f"{cls.__module__}.{cls.__qualname__}",
                "attrs": {k: _encode(v, f"{path}.{k}") for k, v in attrs.items()}}
    raise SnapshotError(f"{path}: cannot snapshot value of type {cls.__name__}")


def _resolve(name: str):
    module, _, qual = name.rpartition(".")
    if not module.startswith(_PACKAGE):
        raise SnapshotError(f"refusing to restore foreign class {name}")
    obj = importlib.import_module(module)
    for part in qual.split("."):
        obj = getattr(obj, part)
    return obj


def _decode(node):
    if isinstance(node, list):
        return [_decode(v) for v in node]
    if not isinstance(node, dict):
        return node
    if "__float__" in node:
        return float(node["__float__"])
    if "__ndarray__" in node:
        dtype = np.dtype(node["dtype"])
        flat = node["__ndarray__"]
        if dtype.kind == "f":
            flat = [_decode(v) for v in flat]
        arr = np.array(flat, dtype=dtype).reshape(node["shape"])
        if not node.get("writeable", True):
            arr.setflags(write=False)
        return arr
    if "__tuple__" in node:
        return tuple(_decode(v) for v in node["__tuple__"])
    if "__dict__" in node:
        return {_hashable(_decode(k)): _decode(v) for k, v in node["__dict__"]}
    if "__rng__" in node:
        state = _decode(node["__rng__"])
        bitgen = getattr(np.random, state["bit_generator"])()
        bitgen.state = state
        return np.random.Generator(bitgen)
    if "__object__" in node:
        cls = _resolve(node["__object__"])
        obj = cls.__new__(cls)
        attrs = {k: _decode(v) for k, v in node["attrs"].items()}
        for k, v in attrs.items():
            object.__setattr__(obj, k, v)
        return obj
    return {k: _decode(v) for k, v in node.items()}


def _hashable(v):
    return tuple(_hashable(x) for x in v) if isinstance(v, list) else v


def snapshot(learner) -> dict:
    """Encode a learner (fitted or not) as a JSON-compatible dict."""
    return {"format_version": FORMAT_VERSION, "state": _encode(learner, "learner")}


def restore(snap: dict):
    """Rebuild the learner from :func:`snapshot` output."""
    if not isinstance(snap, dict) or snap.get("format_version") != FORMAT_VERSION:
        raise SnapshotError(f"unsupported snapshot format {snap.get('format_version') if isinstance(snap, dict) else snap!r}")
    return _decode(snap["state"])


def dumps(learner) -> str:
    return json.dumps(snapshot(learner), sort_keys=True)


def loads(text: str):
    return restore(json.loads(text))


def save(learner, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(learner))


def load(path):
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())
