"""Driving systems: index-addressable two-sided symbol sequences.

Every variant answers ``symbol_at(k)`` for any integer ``k`` without hidden
stream state, so the shift is genuinely invertible and results can be
replayed from ``(spec, index)`` alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

_MASK64 = (1 << 64) - 1
_TO_UNIT = 2.0**-53


def _uniforms(seed: int, start: int, length: int) -> np.ndarray:
    """Counter-based uniforms ``u(start), ..., u(start+length-1)`` in [0, 1).

    ``u(k)`` is the first 64-bit Philox output for counter ``k`` (mod 2**64)
    and key ``seed``; blocks are drawn in bulk but split at ``k = 0`` so the
    carry into the high counter word matches single-index evaluation.
    """
    out = np.empty(length)
    pos = 0
    k = start
    while pos < length:
        stop = min(start + length, 0) if k < 0 else start + length
        m = stop - k
        bg = np.random.Philox(key=seed & ((1 << 128) - 1), counter=k & _MASK64)
        raw = bg.random_raw(4 * m)[::4]
        out[pos : pos + m] = (raw >> np.uint64(11)).astype(float) * _TO_UNIT
        pos += m
        k = stop
    return out


def _check_prob(p, name="probabilities"):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError(f"{name} must be nonnegative and sum to 1")
    return p


@dataclass(frozen=True)
class IIDDriver:
    probabilities: tuple
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "probabilities", tuple(map(float, self.probabilities)))
        _check_prob(self.probabilities)

    @property
    def n_symbols(self) -> int:
        return len(self.probabilities)

    @property
    def stationary(self) -> np.ndarray:
        return np.asarray(self.probabilities)

    def window(self, start: int, length: int) -> np.ndarray:
        cdf = np.cumsum(self.probabilities)
        cdf[-1] = np.inf
        u = _uniforms(self.seed, start, length)
        return np.searchsorted(cdf, u, side="right").astype(np.int64)


@dataclass(frozen=True)
class MarkovDriver:
    """Stationary Markov chain, generated forward from index 0 and backward by time reversal."""

    matrix: tuple
    stationary_vector: tuple
    seed: int = 0
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self):
        P = np.asarray(self.matrix, dtype=float)
        pi = _check_prob(self.stationary_vector, "stationary vector")
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] != pi.size:
            raise ValueError("transition matrix must be square and match the stationary vector")
        for row in P:
            _check_prob(row, "transition rows")
        if np.max(np.abs(pi @ P - pi)) > 1e-10:
            raise ValueError("stationary vector is not invariant for the transition matrix")
        object.__setattr__(self, "matrix", tuple(tuple(map(float, r)) for r in P))
        object.__setattr__(self, "stationary_vector", tuple(map(float, pi)))

    @property
    def n_symbols(self) -> int:
        return len(self.stationary_vector)

    @property
    def stationary(self) -> np.ndarray:
        return np.asarray(self.stationary_vector)

    def _cdfs(self):
        P = np.asarray(self.matrix)
        pi = self.stationary
        with np.errstate(divide="ignore", invalid="ignore"):
            R = np.where(pi[:, None] > 0, (P.T * pi[None, :]) / pi[:, None], 0.0)
        fwd = np.cumsum(P, axis=1)
        bwd = np.cumsum(R, axis=1)
        fwd[:, -1] = np.inf
        bwd[:, -1] = np.inf
        return fwd, bwd

    def _extend(self, lo: int, hi: int):
        c = self._cache
        if "fwd" not in c:
            cdf0 = np.cumsum(self.stationary)
            cdf0[-1] = np.inf
            c["fwd"] = [int(np.searchsorted(cdf0, _uniforms(self.seed, 0, 1)[0], side="right"))]
            c["bwd"] = [c["fwd"][0]]  # bwd[j] is the symbol at index -j
            c["cdfs"] = self._cdfs()
        fcdf, bcdf = c["cdfs"]
        fwd, bwd = c["fwd"], c["bwd"]
        if hi >= len(fwd):
            u = _uniforms(self.seed, len(fwd), hi + 1 - len(fwd))
            s = fwd[-1]
            for x in u:
                s = int(np.searchsorted(fcdf[s], x, side="right"))
                fwd.append(s)
        if lo < 0 and -lo >= len(bwd):
            need = -lo + 1 - len(bwd)
            u = _uniforms(self.seed, lo, need)[::-1]  # indices -len(bwd), -len(bwd)-1, ...
            s = bwd[-1]
            for x in u:
                s = int(np.searchsorted(bcdf[s], x, side="right"))
                bwd.append(s)

    def window(self, start: int, length: int) -> np.ndarray:
        stop = start + length - 1
        self._extend(start, stop)
        fwd, bwd = self._cache["fwd"], self._cache["bwd"]
        return np.array(
            [fwd[k] if k >= 0 else bwd[-k] for k in range(start, stop + 1)], dtype=np.int64
        )


@dataclass(frozen=True)
class RotationDriver:
    """Irrational rotation ``w -> w + alpha`` read through a labelled partition of [0, 1)."""

    alpha: float
    partition: tuple  # ((lo, hi, label), ...)
    omega0: float = 0.0

    def __post_init__(self):
        parts = tuple(sorted((float(a), float(b), int(s)) for a, b, s in self.partition))
        object.__setattr__(self, "partition", parts)
        edge = 0.0
        for a, b, _ in parts:
            if abs(a - edge) > 1e-12 or b <= a:
                raise ValueError("rotation partition must tile [0, 1) with disjoint intervals")
            edge = b
        if abs(edge - 1.0) > 1e-12:
            raise ValueError("rotation partition must cover [0, 1)")

    @property
    def n_symbols(self) -> int:
        return max(s for _, _, s in self.partition) + 1

    @property
    def stationary(self) -> np.ndarray:
        w = np.zeros(self.n_symbols)
        for a, b, s in self.partition:
            w[s] += b - a
        return w

    def window(self, start: int, length: int) -> np.ndarray:
        k = np.arange(start, start + length, dtype=float)
        pos = np.mod(self.omega0 + k * self.alpha, 1.0)
        edges = np.array([b for _, b, _ in self.partition])
        labels = np.array([s for _, _, s in self.partition])
        return labels[np.clip(np.searchsorted(edges, pos, side="right"), 0, labels.size - 1)]


Driver = IIDDriver | MarkovDriver | RotationDriver


def symbol_at(d: Driver, k: int) -> int:
    return int(d.window(int(k), 1)[0])


def fiber_word(d: Driver, start: int, length: int) -> tuple:
    if length < 1:
        raise ValueError("word length must be positive")
    return tuple(int(s) for s in d.window(int(start), int(length)))


def base_points(K: int, stride: int = 4096, offset: int = 0) -> list[int]:
    """Base indices for Monte-Carlo averages: ``offset + i*stride``.

    With an i.i.d. driver, words read from disjoint windows are independent.
    """
    return [offset + i * stride for i in range(K)]
