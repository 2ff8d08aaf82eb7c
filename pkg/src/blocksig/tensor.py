"""Truncated tensor algebra T^(M)(R^d) with dense, level-blocked storage.

Coefficients live in one flat float64 vector. Level m occupies ``d**m``
consecutive slots starting at ``level_offset(d, m)``; inside a level a word
``(i_1, ..., i_m)`` (letters in 1..d) sits at the base-d number formed by the
digits ``i_1 - 1, ..., i_m - 1``. The empty word has index 0.

Batched helpers (``mul_arrays``, ``exp_arrays``...) work on arrays of shape
``(..., dim)`` so that many block signatures can be updated at once.
"""

from __future__ import annotations

import csv
import io
import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

Word = tuple[int, ...]


class ShapeError(ValueError):
    """Raised when two tensors disagree on alphabet size or truncation level."""


class TruncationError(ValueError):
    """Raised when an operation would need levels above the truncation."""


def tensor_dim(d: int, M: int) -> int:
    """Number of coefficients, sum_{m=0}^M d^m."""
    return sum(d**m for m in range(M + 1))


def level_offset(d: int, m: int) -> int:
    return sum(d**k for k in range(m))


def level_slice(d: int, m: int) -> slice:
    start = level_offset(d, m)
    return slice(start, start + d**m)


def enumerate_words(d: int, M: int) -> list[Word]:
    """All words of length 0..M over {1..d}, by length then lexicographic."""
    if d < 1 or M < 0:
        raise ValueError(f"need d >= 1 and M >= 0, got d={d}, M={M}")
    words: list[Word] = []
    for m in range(M + 1):
        words.extend(itertools.product(range(1, d + 1), repeat=m))
    return words


def word_index(word: Sequence[int], d: int) -> int:
    idx = 0
    for letter in word:
        if not 1 <= letter <= d:
            raise ValueError(f"letter {letter} outside 1..{d}")
        idx = idx * d + (letter - 1)
    return level_offset(d, len(word)) + idx


def word_label(word: Sequence[int]) -> str:
    """CSV header label: ``"e"`` for the empty word, else the letters joined."""
    if len(word) == 0:
        return "e"
    if any(letter > 9 for letter in word):
        return "-".join(str(letter) for letter in word)
    return "".join(str(letter) for letter in word)


def parse_word_label(label: str) -> Word:
    if label == "e":
        return ()
    if "-" in label:
        return tuple(int(s) for s in label.split("-"))
    return tuple(int(c) for c in label)


# ---------------------------------------------------------------------------
# array-level kernels
# ---------------------------------------------------------------------------

def _levels(x: np.ndarray, d: int, M: int) -> list[np.ndarray]:
    return [x[..., level_slice(d, m)] for m in range(M + 1)]


def mul_arrays(a: np.ndarray, b: np.ndarray, d: int, M: int) -> np.ndarray:
    """Truncated tensor product of coefficient arrays of shape (..., dim)."""
    la, lb = _levels(a, d, M), _levels(b, d, M)
    shape = np.broadcast_shapes(a.shape, b.shape)
    out = np.zeros(shape, dtype=np.result_type(a, b, np.float64))
    for m in range(M + 1):
        acc = out[..., level_slice(d, m)]
        for k in range(m + 1):
            u, v = la[k], lb[m - k]
            prod = u[..., :, None] * v[..., None, :]
            acc += prod.reshape(prod.shape[:-2] + (-1,))
    return out


def exp_arrays(increments: np.ndarray, M: int) -> np.ndarray:
    """Tensor exponential of vectors, shape (..., d) -> (..., dim)."""
    increments = np.asarray(increments, dtype=np.float64)
    d = increments.shape[-1]
    out = np.empty(increments.shape[:-1] + (tensor_dim(d, M),))
    out[..., 0] = 1.0
    term = np.ones(increments.shape[:-1] + (1,))
    for m in range(1, M + 1):
        term = term[..., :, None] * (increments[..., None, :] / m)
        term = term.reshape(term.shape[:-2] + (-1,))
        out[..., level_slice(d, m)] = term
    return out


def mul_exp_inplace(s: np.ndarray, increments: np.ndarray, d: int, M: int) -> None:
    """Replace ``s`` by ``s ⊗ exp(increment)`` in place (Horner form).

    Levels are rewritten from the top down, so each update only reads levels
    that have not been touched yet.
    """
    levels = _levels(s, d, M)
    a = increments
    for m in range(M, 0, -1):
        # (((s_0 a/m + s_1) a/(m-1) + s_2) a/(m-2) ...) a/1
        acc = levels[0]
        for k in range(1, m + 1):
            acc = acc[..., :, None] * (a[..., None, :] / (m - k + 1))
            acc = acc.reshape(acc.shape[:-2] + (-1,))
            if k < m:
                acc = acc + levels[k]
        levels[m] += acc


# ---------------------------------------------------------------------------
# value type
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TruncatedTensor:
    """Element of T^(M)(R^d); coefficients are read-only after construction."""

    d: int
    M: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64)
        if c.shape != (tensor_dim(self.d, self.M),):
            raise ShapeError(
                f"expected {tensor_dim(self.d, self.M)} coefficients for d={self.d}, "
                f"M={self.M}, got shape {c.shape}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, d: int, M: int) -> "TruncatedTensor":
        return cls(d, M, np.zeros(tensor_dim(d, M)))

    @classmethod
    def unit(cls, d: int, M: int) -> "TruncatedTensor":
        c = np.zeros(tensor_dim(d, M))
        c[0] = 1.0
        return cls(d, M, c)

    @classmethod
    def from_words(cls, d: int, M: int, terms: dict) -> "TruncatedTensor":
        c = np.zeros(tensor_dim(d, M))
        for w, val in terms.items():
            if len(w) > M:
                raise TruncationError(f"word {w} longer than M={M}")
            c[word_index(w, d)] += val
        return cls(d, M, c)

    def __getitem__(self, word: Sequence[int]) -> float:
        return float(self.coeffs[word_index(tuple(word), self.d)])

    def level(self, m: int) -> np.ndarray:
        return self.coeffs[level_slice(self.d, m)]

    def words(self) -> list[Word]:
        return enumerate_words(self.d, self.M)

    def _check(self, other: "TruncatedTensor") -> None:
        if (self.d, self.M) != (other.d, other.M):
            raise ShapeError(
                f"shape mismatch: (d={self.d}, M={self.M}) vs (d={other.d}, M={other.M})"
            )

    def __add__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        self._check(other)
        return TruncatedTensor(self.d, self.M, self.coeffs + other.coeffs)

    def __sub__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        self._check(other)
        return TruncatedTensor(self.d, self.M, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "TruncatedTensor":
        return TruncatedTensor(self.d, self.M, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        return tensor_mul(self, other)

    def allclose(self, other: "TruncatedTensor", rtol=1e-12, atol=1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol))

    def to_csv(self) -> str:
        return tensors_to_csv([self])


def tensor_mul(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    a._check(b)
    return TruncatedTensor(a.d, a.M, mul_arrays(a.coeffs, b.coeffs, a.d, a.M))


def hs_inner(a: TruncatedTensor, b: TruncatedTensor) -> float:
    a._check(b)
    return float(np.dot(a.coeffs, b.coeffs))


def hs_norm(a: TruncatedTensor) -> float:
    return float(np.sqrt(hs_inner(a, a)))


def level_sq_norms(a: TruncatedTensor) -> np.ndarray:
    """Squared HS norm of each level block; sums to ``hs_norm(a)**2``."""
    return np.array([np.dot(a.level(m), a.level(m)) for m in range(a.M + 1)])


def shuffle(u: Sequence[int], v: Sequence[int]) -> Counter:
    """Shuffle product of two words as a multiset ``{word: multiplicity}``."""
    u, v = tuple(u), tuple(v)
    n = len(u) + len(v)
    out: Counter = Counter()
    for positions in itertools.combinations(range(n), len(u)):
        w = [0] * n
        pos = set(positions)
        iu, iv = iter(u), iter(v)
        for k in range(n):
            w[k] = next(iu) if k in pos else next(iv)
        out[tuple(w)] += 1
    return out


def shuffle_tensor(u: Sequence[int], v: Sequence[int], d: int, M: int) -> TruncatedTensor:
    if len(u) + len(v) > M:
        raise TruncationError(f"|u|+|v| = {len(u) + len(v)} exceeds M={M}")
    return TruncatedTensor.from_words(d, M, dict(shuffle(u, v)))


def tensors_to_csv(tensors: Iterable[TruncatedTensor], extra: Sequence[dict] | None = None) -> str:
    """One CSV row per tensor, columns in canonical word order."""
    tensors = list(tensors)
    if not tensors:
        return ""
    d, M = tensors[0].d, tensors[0].M
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    extra_keys = list(extra[0].keys()) if extra else []
    writer.writerow(extra_keys + [word_label(w) for w in enumerate_words(d, M)])
    for k, t in enumerate(tensors):
        t._check(tensors[0])
        prefix = [extra[k][key] for key in extra_keys] if extra else []
        writer.writerow(prefix + [repr(float(x)) for x in t.coeffs])
    return buf.getvalue()


def tensors_from_csv(text: str) -> list[TruncatedTensor]:
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    start = header.index("e")
    words = [parse_word_label(h) for h in header[start:]]
    d = max((max(w) for w in words if w), default=1)
    M = max(len(w) for w in words)
    if words != enumerate_words(d, M):
        raise ShapeError("CSV header is not in canonical word order")
    return [TruncatedTensor(d, M, np.array([float(x) for x in row[start:]])) for row in rows[1:]]
