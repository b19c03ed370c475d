"""Counter-based random streams and the three samplers the curve dynamics use.

Every stream is a Philox4x64 generator keyed by ``(seed, stream_id, tag path)``.
Deriving a child by tag never consumes draws from the parent, so adding new
consumers (validation draws, extra curves) leaves existing draws untouched.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

from .errors import InvalidParameterError

_BLOCK = 64
_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0 ** -53


def _tag_key(stream_id: int, path: tuple[str, ...]) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(int(stream_id & _MASK64).to_bytes(8, "little"))
    for tag in path:
        h.update(b"\x00")
        h.update(tag.encode())
    return int.from_bytes(h.digest(), "little")


class RngStream:
    """A reproducible stream of draws.

    Two streams built from the same ``(seed, stream_id, path)`` produce the
    same sequence. A stream carries mutable counter state, so one instance
    must not be shared between workers; hand each worker its own ``child``.
    """

    __slots__ = ("seed", "stream_id", "path", "_bitgen", "_gen", "_buf", "_pos")

    def __init__(self, seed: int, stream_id: int = 0, path: tuple[str, ...] = ()):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.path = tuple(path)
        key = np.array(
            [self.seed & _MASK64, _tag_key(self.stream_id, self.path)], dtype=np.uint64
        )
        self._bitgen = np.random.Philox(key=key)
        self._gen: np.random.Generator | None = None
        self._buf: list[float] = []
        self._pos = 0

    def child(self, *tags: str) -> "RngStream":
        """Independent stream for a named sub-task; the parent is not advanced."""
        return RngStream(self.seed, self.stream_id, self.path + tuple(tags))

    def fresh(self) -> "RngStream":
        """Same key, counter rewound to zero."""
        return RngStream(self.seed, self.stream_id, self.path)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, path={self.path!r})"

    def _refill(self) -> None:
        raw = self._bitgen.random_raw(_BLOCK)
        # 53 high bits, offset by half a unit: strictly inside (0, 1)
        self._buf = (((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53).tolist()
        self._pos = 0

    def uniform01(self) -> float:
        if self._pos >= len(self._buf):
            self._refill()
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def exponential1(self) -> float:
        return -math.log1p(-self.uniform01())

    def uniforms(self, n: int) -> np.ndarray:
        """Vector of ``n`` draws from (0, 1), consumed from the same counter."""
        head = self._buf[self._pos : self._pos + n]
        self._pos += len(head)
        rest = n - len(head)
        if rest <= 0:
            return np.array(head, dtype=np.float64)
        blocks = -(-rest // _BLOCK)
        raw = self._bitgen.random_raw(blocks * _BLOCK)
        vals = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53
        self._buf = vals[rest:].tolist()
        self._pos = 0
        return np.concatenate([np.array(head, dtype=np.float64), vals[:rest]])

    @property
    def numpy(self) -> np.random.Generator:
        """numpy Generator over this stream's bit generator, for bulk draws.

        Bulk draws and scalar draws interleave deterministically, but the
        scalar buffer is drawn ahead in blocks; do not mix the two on one
        stream if you need bit-compatibility with another code path.
        """
        if self._gen is None:
            self._gen = np.random.Generator(self._bitgen)
        return self._gen


def uniform01(stream) -> float:
    """Uniform draw strictly inside (0, 1)."""
    return stream.uniform01()


def exponential1(stream) -> float:
    """Standard exponential draw (rate 1), by inversion of a uniform."""
    return stream.exponential1()


def exponential_inverse_cdf(u: float) -> float:
    return -math.log1p(-u)


def rayleigh(stream, s: float) -> float:
    """Draw with survival function ``exp(-g**2 / (4 s))``, i.e. Rayleigh(sqrt(2 s)).

    Generated as ``2 sqrt(s E)`` with ``E`` standard exponential.
    """
    if not s > 0:
        raise InvalidParameterError(f"rayleigh scale parameter must be positive, got {s!r}")
    return 2.0 * math.sqrt(s * stream.exponential1())


def rayleigh_survival(gamma, s: float):
    """P(G > gamma) for the one-point law at abscissa ``s``."""
    g = np.asarray(gamma, dtype=float)
    return np.exp(-np.square(np.maximum(g, 0.0)) / (4.0 * s))


def rayleigh_cdf(gamma, s: float):
    return 1.0 - rayleigh_survival(gamma, s)


class ScriptedStream:
    """Stream stand-in that replays fixed uniforms and exponentials.

    Used to force hand-computable trajectories in tests and worked examples.
    Exhausting either queue raises ``IndexError``.
    """

    def __init__(self, uniforms=(), exponentials=()):
        self._u = list(uniforms)
        self._e = list(exponentials)

    def uniform01(self) -> float:
        return self._u.pop(0)

    def exponential1(self) -> float:
        return self._e.pop(0)

    def child(self, *tags: str) -> "ScriptedStream":
        return self


class SquaredUniformStream:
    """Wraps a stream and squares every uniform: a deliberately broken sampler.

    Negative control for the moment and martingale checks; exponentials are
    still derived from the (squared) uniforms.
    """

    def __init__(self, inner: RngStream):
        self._inner = inner

    def uniform01(self) -> float:
        u = self._inner.uniform01()
        return u * u

    def exponential1(self) -> float:
        return -math.log1p(-self.uniform01())

    def uniforms(self, n: int) -> np.ndarray:
        return np.array([self.uniform01() for _ in range(n)])

    def child(self, *tags: str) -> "SquaredUniformStream":
        return SquaredUniformStream(self._inner.child(*tags))

    def fresh(self) -> "SquaredUniformStream":
        return SquaredUniformStream(self._inner.fresh())

    @property
    def numpy(self) -> np.random.Generator:
        return self._inner.numpy

    @property
    def seed(self) -> int:
        return self._inner.seed
