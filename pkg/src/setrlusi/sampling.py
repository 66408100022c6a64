"""The three stochastic mechanisms, under a deterministic stream contract.

Every random decision flows through an RngStream keyed by (seed,
stream_id); the training loop assigns one stream per (round, source)
pair so execution order and parallelism cannot change results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_BOOTSTRAP_REDRAWS = 10
_STREAM_INDEX_BITS = 20


class DegenerateSampleError(RuntimeError):
    """Bootstrap kept drawing a single class after the allowed redraws."""


@dataclass(frozen=True)
class RngStream:
    """Deterministic, platform-independent random stream.

    Identical (seed, stream_id) pairs yield identical draw sequences.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be nonnegative")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of the stream."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


def stream_for(seed: int, *indices: int) -> RngStream:
    """Pack loop indices (each < 2^20) into a single stream id."""
    sid = 0
    for idx in indices:
        if not 0 <= idx < 2**_STREAM_INDEX_BITS:
            raise ValueError(f"stream index {idx} out of range")
        sid = (sid << _STREAM_INDEX_BITS) | idx
    return RngStream(seed=seed, stream_id=sid)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def bootstrap_target(target, rng):
    """Resample the labeled target set with replacement to its own size.

    Single-class draws are rejected and redrawn up to
    MAX_BOOTSTRAP_REDRAWS times; a target that cannot yield both classes
    raises DegenerateSampleError.
    """
    gen = _as_generator(rng)
    if target.labels is None:
        raise ValueError("bootstrap requires a labeled target set")
    q = target.n
    if q < 2:
        raise ValueError(f"bootstrap needs q >= 2, got {q}")
    for _ in range(1 + MAX_BOOTSTRAP_REDRAWS):
        idx = gen.integers(0, q, size=q)
        drawn = target.labels[idx]
        if np.unique(drawn).size == 2:
            return target.take(idx, name_suffix="#boot")
    raise DegenerateSampleError(
        f"bootstrap of {target.name!r} stayed single-class after "
        f"{MAX_BOOTSTRAP_REDRAWS} redraws"
    )


def proportional_sample_source(source, gamma: float, rng):
    """Class-stratified subsample without replacement at ratio gamma.

    Each class keeps ceil(gamma * class_count) samples, so both classes
    survive any gamma in (0, 1].
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if source.labels is None:
        raise ValueError("proportional sampling requires labels")
    classes = np.unique(source.labels)
    if classes.size < 2:
        raise ValueError(f"source {source.name!r} must contain both classes")
    gen = _as_generator(rng)
    keep = []
    for c in classes:
        members = np.flatnonzero(source.labels == c)
        k = int(np.ceil(gamma * members.size))
        keep.append(gen.choice(members, size=k, replace=False))
    return source.take(np.concatenate(keep), name_suffix="#sub")


def draw_predicate(pool: list, rng):
    """Uniform draw over the pool entries."""
    if not pool:
        raise ValueError("predicate pool is empty")
    gen = _as_generator(rng)
    return pool[int(gen.integers(0, len(pool)))]
