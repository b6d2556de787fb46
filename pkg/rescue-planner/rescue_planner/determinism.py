"""Canonical hashing and derived RNG streams.

All seeded operations draw from streams keyed by a root seed plus labels, so
results do not depend on thread count or evaluation order.
"""
from __future__ import annotations

import hashlib
import json
from typing import Any

import numpy as np

_SEED_MASK = (1 << 63) - 1


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def id_for(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def derive_seed(root: int, *labels: Any) -> int:
    return int(id_for([int(root), *labels])[:16], 16) & _SEED_MASK


def rng_for(root: int, *labels: Any) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, *labels))
