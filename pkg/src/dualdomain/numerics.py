"""Dense float64 tensors, deterministic seeded randomness, and matmul.

Tensors are plain ``numpy.ndarray`` objects with ``dtype=float64`` and
row-major layout; this module adds the validation helpers and the seeded
random stream that the rest of the package builds on. The stream is a
counter-based SplitMix64 generator implemented here so that sequences are
bit-identical across platforms and library versions.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ShapeError",
    "RngStream",
    "derive_seed",
    "matmul",
    "as_tensor",
    "check_finite",
]

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 2.0 ** -53


class ShapeError(ValueError):
    """Raised when tensor shapes do not satisfy an operation's contract."""


def _mix64(z: int) -> int:
    """SplitMix64 output function on a 64-bit integer (Python ints, masked)."""
    z &= 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * _MIX1) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * _MIX2) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized SplitMix64 output function over a uint64 array."""
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *parts: int) -> int:
    """Mix extra integers into a seed to produce an independent child seed.

    Used wherever one logical seed must fan out into several streams
    (per-epoch shuffles, per-run substreams) without correlated draws.
    """
    h = seed & 0xFFFFFFFFFFFFFFFF
    for p in parts:
        h = _mix64((h ^ (p & 0xFFFFFFFFFFFFFFFF)) + _GOLDEN)
    return h


class RngStream:
    """Deterministic scalar/vector random stream seeded by a 64-bit integer.

    Identical seeds produce identical sequences on every platform. The
    generator is SplitMix64: state advances by a fixed odd constant and each
    output is a finalizer hash of the state, so n-th draws can also be
    produced in bulk with vectorized uint64 arithmetic.
    """

    def __init__(self, seed: int):
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        self._state = self.seed

    def _next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & 0xFFFFFFFFFFFFFFFF
        return _mix64(self._state)

    def _next_u64_array(self, n: int) -> np.ndarray:
        with np.errstate(over="ignore"):
            counters = np.uint64(self._state) + np.uint64(_GOLDEN) * np.arange(
                1, n + 1, dtype=np.uint64
            )
            out = _mix64_array(counters)
        self._state = (self._state + n * _GOLDEN) & 0xFFFFFFFFFFFFFFFF
        return out

    def uniform(self) -> float:
        """One draw uniform in [0, 1) with 53 random bits."""
        return (self._next_u64() >> 11) * _INV_2_53

    def uniforms(self, n: int) -> np.ndarray:
        """n uniform draws in [0, 1); identical to n calls of uniform()."""
        return (self._next_u64_array(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def normals(self, n: int) -> np.ndarray:
        """n standard-normal draws via Box-Muller over the uniform stream."""
        m = (n + 1) // 2
        u1 = 1.0 - self.uniforms(m)  # in (0, 1], keeps log() finite
        u2 = self.uniforms(m)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * m, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def normal(self) -> float:
        return float(self.normals(1)[0])

    def randint(self, lo: int, hi: int) -> int:
        """One integer draw uniform over [lo, hi)."""
        if hi <= lo:
            raise ValueError(f"empty integer range [{lo}, {hi})")
        return lo + int(self.uniform() * (hi - lo))

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.randint(0, i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def child(self, index: int) -> "RngStream":
        """Independent substream for parallel work, derived by seed mixing."""
        return RngStream(derive_seed(self.seed, index))


def as_tensor(x, shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Coerce to a float64 ndarray, optionally checking an exact shape."""
    t = np.asarray(x, dtype=np.float64)
    if shape is not None and t.shape != shape:
        raise ShapeError(f"expected shape {shape}, got {t.shape}")
    return t


def check_finite(x: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what} contains non-finite values")
    return x


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of a (M, K) and b (K, N) float64 matrices.

    Delegates to the BLAS-backed ``@`` operator; fixed within-process
    evaluation order keeps repeated runs bit-identical.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner extents disagree: {a.shape} x {b.shape}")
    return a @ b
