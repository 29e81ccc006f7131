"""Deterministic, splittable random streams.

Streams are counter-based (Philox keyed by (master_seed, stream_id)), so
creating the N-th stream is O(1) and replicas can be farmed out to workers
in any order without changing results.  Draw costs are fixed and documented
in raw 64-bit words so experiments can be replayed word-for-word:

* uniform  -- 1 word
* gaussian -- 2 words (Box-Muller pair, cosine branch only)
* sign bit -- 1 word

Lattice arrow fields use a separate keyed site hash (`site_signs`) rather
than a sequential stream: the sign at site (x, h) is a pure function of
(master_seed, stream_id, x, h), so arbitrarily large windows never need to
materialize or replay a sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_U64 = np.uint64
_MASK63 = _U64(0x7FFFFFFFFFFFFFFF)

# splitmix64 finalizer constants
_SM_GAMMA = _U64(0x9E3779B97F4A7C15)
_SM_M1 = _U64(0xBF58476D1CE4E5B9)
_SM_M2 = _U64(0x94D049BB133111EB)

# domain tags so the site hash and any future keyed hashes cannot collide
_TAG_SITE = _U64(0xA0761D6478BD642F)


@dataclass(frozen=True)
class StreamSpec:
    """Identity of one random stream: (master_seed, stream_id)."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) < 2**64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def child(self, stream_id: int) -> "StreamSpec":
        return StreamSpec(self.master_seed, stream_id)


class RandomStream:
    """A positioned view on the Philox sequence keyed by a StreamSpec.

    Re-creating the stream from its spec restarts it at the beginning;
    the number of consumed raw words is tracked in ``words_used``.
    """

    def __init__(self, spec: StreamSpec):
        self.spec = spec
        self._bg = np.random.Philox(key=[spec.master_seed, spec.stream_id])
        self.words_used = 0

    def _raw(self, n: int) -> np.ndarray:
        self.words_used += int(n)
        return self._bg.random_raw(n)

    # -- vectorized draws --------------------------------------------------

    def uniforms(self, n: int) -> np.ndarray:
        """n uniforms in [0, 1); one word each."""
        return (self._raw(n) >> _U64(11)) * (2.0**-53)

    def gaussians(self, n: int) -> np.ndarray:
        """n standard normals; two words each (Box-Muller, cosine branch)."""
        raw = self._raw(2 * n)
        # u1 in (0,1] so the log is finite
        u1 = ((raw[0::2] >> _U64(11)) + _U64(1)) * (2.0**-53)
        u2 = (raw[1::2] >> _U64(11)) * (2.0**-53)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def bits(self, n: int) -> np.ndarray:
        """n fair signs in {+1, -1}; one word each."""
        return np.where(self._raw(n) >> _U64(63), np.int64(1), np.int64(-1))

    # -- scalar conveniences -----------------------------------------------

    def next_uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def next_gaussian(self) -> float:
        return float(self.gaussians(1)[0])

    def next_bit(self) -> int:
        return int(self.bits(1)[0])


def make_stream(spec: StreamSpec) -> RandomStream:
    return RandomStream(spec)


def substream(spec: StreamSpec, index: int) -> RandomStream:
    """Stream for replica/worker `index` under a shared master seed."""
    return RandomStream(spec.child(index))


# -- keyed site hash -------------------------------------------------------


def _mix64(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic is modular by design; silence numpy's overflow chatter
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _SM_M1
        z = (z ^ (z >> _U64(27))) * _SM_M2
        return z ^ (z >> _U64(31))


def site_hash(spec: StreamSpec, x, h) -> np.ndarray:
    """64-bit hash of one lattice site under a stream key; vectorized."""
    ux = np.asarray(x, dtype=np.int64).astype(np.uint64)
    uh = np.asarray(h, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        z = _mix64(_U64(spec.master_seed) + _SM_GAMMA) ^ _TAG_SITE
        z = _mix64(z ^ _U64(spec.stream_id))
        z = _mix64(z ^ (ux * _SM_GAMMA))
        z = _mix64(z ^ (uh * _SM_M1))
    return _mix64(z)


def site_signs(spec: StreamSpec, x, h) -> np.ndarray:
    """iid fair signs in {+1, -1} attached to lattice sites; vectorized."""
    return np.where(site_hash(spec, x, h) >> _U64(63), np.int64(1), np.int64(-1))


def site_key(spec: StreamSpec) -> tuple[int, int]:
    """Precomputed (k1, k2) key material for jit-compiled site hashing.

    `tsrmlab.contour` re-implements the same hash inside numba kernels;
    both must agree bit-for-bit, which the test suite asserts.
    """
    k1 = int(_mix64(_U64(spec.master_seed) + _SM_GAMMA) ^ _TAG_SITE)
    k2 = int(_mix64(_U64(k1) ^ _U64(spec.stream_id)))
    return k1, k2
