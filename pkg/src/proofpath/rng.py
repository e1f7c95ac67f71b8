"""Named, hierarchical random streams.

All randomness in a run flows from one root seed through named sub-streams
(worker i, replay sampler, backend, ...).  Streams are derived by hashing the
label path, so adding or reordering unrelated draws elsewhere in the code
never perturbs an existing stream.
"""
from __future__ import annotations

import hashlib

import numpy as np


def stream_seed(root_seed: int, *labels: object) -> int:
    """Derive a 128-bit integer seed for the sub-stream named by ``labels``."""
    material = ":".join([str(root_seed), *(str(x) for x in labels)])
    digest = hashlib.sha256(material.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def substream(root_seed: int, *labels: object) -> np.random.Generator:
    """A generator for the sub-stream named by ``labels``."""
    return np.random.default_rng(stream_seed(root_seed, *labels))
