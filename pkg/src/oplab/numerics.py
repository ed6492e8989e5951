"""Deterministic randomness, orthogonal matrices, and rank statistics.

The random stream is counter-based: every draw is a pure function of
(seed, split path, word index), so streams can be split without advancing
the parent and snapshotted/restored exactly.  Those two properties are what
the invariance checks rely on when they replay identical draws against
transformed inputs.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

__all__ = [
    "RandomStream",
    "RankSumVerdict",
    "median",
    "random_orthogonal",
    "rank_sum_test",
]

# Philox-4x64 round constants (Salmon et al. counter-based generator).
_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = 0x9E3779B97F4A7C15
_W1 = 0xBB67AE8584CAA73B
_MASK64 = (1 << 64) - 1
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_ROUNDS = 10


def _mulhilo(a: np.uint64, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """128-bit product of a scalar and a uint64 vector, as (high, low) words."""
    lo = a * b
    a_lo = a & _LO32
    a_hi = a >> _S32
    b_lo = b & _LO32
    b_hi = b >> _S32
    t = a_lo * b_lo
    cross1 = a_hi * b_lo
    cross2 = a_lo * b_hi
    mid = (t >> _S32) + (cross1 & _LO32) + (cross2 & _LO32)
    hi = a_hi * b_hi + (cross1 >> _S32) + (cross2 >> _S32) + (mid >> _S32)
    return hi, lo


def _philox_blocks(c0: np.ndarray, salt: tuple[int, int, int], key: tuple[int, int]) -> np.ndarray:
    """Run 10 Philox-4x64 rounds on a vector of counter blocks.

    c0 carries the per-block counter word; salt fills the other three counter
    words.  Returns the four output lanes interleaved, shape (4 * len(c0),).
    """
    n = c0.shape[0]
    v0 = c0
    v1 = np.full(n, np.uint64(salt[0]), dtype=np.uint64)
    v2 = np.full(n, np.uint64(salt[1]), dtype=np.uint64)
    v3 = np.full(n, np.uint64(salt[2]), dtype=np.uint64)
    k0, k1 = key
    for r in range(_ROUNDS):
        rk0 = np.uint64((k0 + r * _W0) & _MASK64)
        rk1 = np.uint64((k1 + r * _W1) & _MASK64)
        hi0, lo0 = _mulhilo(_M0, v0)
        hi1, lo1 = _mulhilo(_M1, v2)
        v0, v1, v2, v3 = hi1 ^ v1 ^ rk0, lo1, hi0 ^ v3 ^ rk1, lo0
    out = np.empty(4 * n, dtype=np.uint64)
    out[0::4] = v0
    out[1::4] = v1
    out[2::4] = v2
    out[3::4] = v3
    return out


def _encode_label(label) -> bytes:
    if isinstance(label, bool):
        raise TypeError("stream labels must be int, str, or tuples of those")
    if isinstance(label, (int, np.integer)):
        return b"i" + int(label).to_bytes(8, "little", signed=True)
    if isinstance(label, str):
        raw = label.encode("utf-8")
        return b"s" + len(raw).to_bytes(4, "little") + raw
    if isinstance(label, tuple):
        parts = b"".join(_encode_label(item) for item in label)
        return b"t" + len(label).to_bytes(4, "little") + parts
    raise TypeError(f"stream labels must be int, str, or tuples of those, got {type(label)!r}")


class RandomStream:
    """Seedable, splittable source of uniform and Gaussian draws.

    Identical (seed, path) gives bit-identical sequences on any platform.
    ``split`` derives an independent child without touching the parent;
    ``snapshot``/``restore`` capture the stream position exactly.  Every
    draw consumes a fixed number of 64-bit words (one per uniform, one per
    Gaussian), which keeps draw accounting stable across code paths.
    """

    __slots__ = ("seed", "path", "_key", "_salt", "_pos")

    def __init__(self, seed: int, path: tuple = ()):
        self.seed = int(seed)
        self.path = tuple(path)
        digest = hashlib.sha512(
            b"oplab-stream-v1" + _encode_label(self.seed) + _encode_label(self.path)
        ).digest()
        words = [int.from_bytes(digest[8 * i : 8 * (i + 1)], "little") for i in range(5)]
        self._key = (words[0], words[1])
        self._salt = (words[2], words[3], words[4])
        self._pos = 0

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, path={self.path!r}, pos={self._pos})"

    def split(self, label) -> "RandomStream":
        """Child stream keyed by (seed, path + (label,)); parent is untouched."""
        return RandomStream(self.seed, self.path + (label,))

    def snapshot(self) -> int:
        return self._pos

    def restore(self, state: int) -> None:
        self._pos = int(state)

    @property
    def draws_taken(self) -> int:
        return self._pos

    def words(self, n: int) -> np.ndarray:
        """The next n raw 64-bit words."""
        if n < 0:
            raise ValueError("word count must be nonnegative")
        start = self._pos
        self._pos += n
        if n == 0:
            return np.empty(0, dtype=np.uint64)
        first_block = start // 4
        last_block = (start + n - 1) // 4
        c0 = np.arange(first_block, last_block + 1, dtype=np.uint64)
        lanes = _philox_blocks(c0, self._salt, self._key)
        offset = start - 4 * first_block
        return lanes[offset : offset + n]

    def uniform(self, shape=None):
        """Uniform draws on [0, 1); scalar when shape is None."""
        n, out_shape = _shape_info(shape)
        u = words_to_uniform(self.words(n))
        return float(u[0]) if out_shape is None else u.reshape(out_shape)

    def gaussian(self, shape=None):
        """Standard normal draws via the inverse CDF; one word per draw."""
        n, out_shape = _shape_info(shape)
        z = words_to_gaussian(self.words(n))
        return float(z[0]) if out_shape is None else z.reshape(out_shape)

    def integers(self, bound: int, shape=None):
        """Draws from {0, ..., bound-1}; one word each.

        Uses floor(uniform * bound); the bias is below 2**-40 for the bounds
        used here (population indices), and the fixed word cost is what the
        draw-accounting contract needs.
        """
        if bound < 1:
            raise ValueError("bound must be >= 1")
        n, out_shape = _shape_info(shape)
        u = words_to_uniform(self.words(n))
        idx = np.minimum((u * bound).astype(np.int64), bound - 1)
        return int(idx[0]) if out_shape is None else idx.reshape(out_shape)


def words_to_uniform(w: np.ndarray) -> np.ndarray:
    """Map raw 64-bit words to uniforms on [0, 1) exactly as uniform() does."""
    return (w >> np.uint64(11)).astype(np.float64) * 2.0**-53


def words_to_gaussian(w: np.ndarray) -> np.ndarray:
    """Map raw words to standard normals exactly as gaussian() does."""
    return ndtri(((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53)


def _shape_info(shape) -> tuple[int, tuple | None]:
    if shape is None:
        return 1, None
    if isinstance(shape, (int, np.integer)):
        return int(shape), (int(shape),)
    total = 1
    for s in shape:
        total *= int(s)
    return total, tuple(int(s) for s in shape)


def random_orthogonal(dimension: int, stream: RandomStream) -> np.ndarray:
    """Near-Haar random orthogonal matrix.

    Gaussian matrix, QR factorization, then each column is flipped by the
    sign of the matching diagonal entry of R to remove the sign ambiguity.
    """
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    a = stream.gaussian((dimension, dimension))
    q, r = np.linalg.qr(a)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def median(values) -> float:
    """Sample median; mean of the two middle order statistics for even counts."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("median of an empty sample")
    return float(np.median(arr))


@dataclass(frozen=True)
class RankSumVerdict:
    """Outcome of a two-sided rank-sum comparison between two samples.

    decision is "similar" exactly when p_value >= alpha; otherwise the sign
    of the median difference picks "better" (first sample smaller) or
    "worse".  Minimization convention: smaller is better.
    """

    statistic: float
    p_value: float
    decision: str


def rank_sum_test(a, b, alpha: float = 0.05) -> RankSumVerdict:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney) test with midrank ties.

    Exact null distribution (conditional on the observed rank multiset) when
    min(len(a), len(b)) <= 8, otherwise a normal approximation with tie
    correction.  The statistic is the rank sum of the first sample.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = a.size, b.size
    if min(n, m) < 3:
        raise ValueError("rank_sum_test needs at least 3 observations per sample")
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    w = float(ranks[:n].sum())

    if min(n, m) <= 8 and math.comb(n + m, n) < 2**53:
        p = _exact_rank_sum_p(ranks, n, w)
    else:
        p = _approx_rank_sum_p(ranks, n, m, w)

    if p >= alpha:
        decision = "similar"
    else:
        med_a, med_b = median(a), median(b)
        if med_a < med_b:
            decision = "better"
        elif med_a > med_b:
            decision = "worse"
        else:
            decision = "better" if w < n * (n + m + 1) / 2 else "worse"
    return RankSumVerdict(statistic=w, p_value=p, decision=decision)


def _exact_rank_sum_p(ranks: np.ndarray, n: int, w: float) -> float:
    """Exact two-sided p by counting all size-n rank assignments.

    Doubled midranks are integers, so a subset-sum table over them counts
    every assignment exactly; counts stay below 2**53 and are exact floats.
    """
    doubled = np.rint(2 * ranks).astype(np.int64)
    total_sum = int(doubled.sum())
    ways = np.zeros((n + 1, total_sum + 1))
    ways[0, 0] = 1.0
    for r in doubled:
        r = int(r)
        for k in range(n, 0, -1):
            ways[k, r:] += ways[k - 1, : total_sum + 1 - r]
    dist = ways[n]
    total = dist.sum()
    w2 = int(round(2 * w))
    p_low = dist[: w2 + 1].sum() / total
    p_high = dist[w2:].sum() / total
    return float(min(1.0, 2.0 * min(p_low, p_high)))


def _approx_rank_sum_p(ranks: np.ndarray, n: int, m: int, w: float) -> float:
    """Normal approximation with tie correction (no continuity correction)."""
    big_n = n + m
    mean = n * (big_n + 1) / 2.0
    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float(((counts**3 - counts)).sum())
    var = n * m / 12.0 * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
    if var <= 0:
        return 1.0
    z = (w - mean) / math.sqrt(var)
    return math.erfc(abs(z) / math.sqrt(2.0))
