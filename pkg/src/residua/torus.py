"""Exact Fourier-model norms for two lattice cases.

For Z^r the reduced norm of a finitely supported element is the sup of the
absolute symbol over the r-torus; sampling on the q-division subgrid gives
a certified-from-below approximation, and doubling q refines it monotonely
(the coarse grid is a subset of the fine one).  Values on the grid are
computed with an FFT over the coefficient array folded mod q.

For the group with presentation t a t^-1 = a^-1 (generators a, t) every
element has a unique normal form a^p t^k.  The model sends, per torus point
(alpha, beta):

    a -> [[e^{i alpha}, 0], [0, e^{-i alpha}]]
    t -> [[0, e^{i beta}], [1, 0]]

so t^2 -> e^{i beta} I and the defining relation holds exactly; the norm is
the grid max of the 2x2 operator norm of the summed symbol, computed in
closed form from the Gram matrix.  The abelian subgroup generated by a and
t^2 has index two, which is why a 2x2 model over a 2-torus suffices.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from .errors import (DescriptorError, ParseError, SizeLimitError, UsageError)
from .words import Basis, Word, parse_word

GRID_CAP = 1 << 22
KLEIN_BASIS = Basis(("a", "t"))


@dataclass(frozen=True)
class ZrElement:
    rank: int
    coeffs: dict

    def __post_init__(self):
        if self.rank < 1:
            raise DescriptorError("rank must be at least 1")
        fixed = {}
        for v, c in self.coeffs.items():
            key = tuple(int(x) for x in v)
            if len(key) != self.rank:
                raise DescriptorError(f"key {key} has wrong length for rank {self.rank}")
            c = complex(c)
            if c != 0.0:
                fixed[key] = c
        object.__setattr__(self, "coeffs", fixed)

    @classmethod
    def from_terms(cls, rank: int, terms: Iterable[tuple]) -> "ZrElement":
        acc = {}
        for v, c in terms:
            key = tuple(int(x) for x in v)
            acc[key] = acc.get(key, 0.0) + complex(c)
        return cls(rank, acc)

    def l1(self) -> float:
        return math.fsum(abs(c) for c in self.coeffs.values())


def zr_norm(z: ZrElement, q: int, grid_cap: int = GRID_CAP) -> float:
    """max over the q-division grid of |sum_v c_v e^{2 pi i <v,x>}|."""
    if q < 1:
        raise DescriptorError("grid order must be positive")
    points = q ** z.rank
    if points > grid_cap:
        raise SizeLimitError(f"grid has {points} points (cap {grid_cap})",
                             predicted=points)
    # direct evaluation: supports are tiny, and exp(0) = 1 keeps the value at
    # the zero point an exact coefficient sum for every q (an FFT length that
    # falls back to Bluestein chirps would round even that bin)
    total = np.zeros((q,) * z.rank, dtype=complex)
    axis = 2j * np.pi * np.arange(q) / q
    for v, c in z.coeffs.items():
        term = np.complex128(c)
        for d, vd in enumerate(v):
            shape = (1,) * d + (q,) + (1,) * (z.rank - d - 1)
            term = term * np.exp(axis * vd).reshape(shape)
        total += term
    return float(np.abs(total).max())


def klein_normalize(w: Word) -> Tuple[int, int]:
    """Unique (p, k) with w = a^p t^k; first generator is a, second is t."""
    if w.basis.rank != 2:
        raise DescriptorError("normal form needs a two-generator context")
    p = 0
    k = 0
    for x in w.letters:
        if abs(x) == 1:
            p += (1 if x > 0 else -1) * (-1) ** (k & 1)
        else:
            k += 1 if x > 0 else -1
    return p, k


def klein_mul(x: Tuple[int, int], y: Tuple[int, int]) -> Tuple[int, int]:
    p, k = x
    p2, k2 = y
    return p + (-1) ** (k & 1) * p2, k + k2


def klein_matrices(alpha: float, beta: float) -> Tuple[np.ndarray, np.ndarray]:
    ma = np.array([[np.exp(1j * alpha), 0.0], [0.0, np.exp(-1j * alpha)]])
    mt = np.array([[0.0, np.exp(1j * beta)], [1.0, 0.0]])
    return ma, mt


@dataclass(frozen=True)
class KleinElement:
    coeffs: dict

    def __post_init__(self):
        fixed = {}
        for pk, c in self.coeffs.items():
            p, k = pk
            c = complex(c)
            if c != 0.0:
                fixed[(int(p), int(k))] = c
        object.__setattr__(self, "coeffs", fixed)

    @classmethod
    def from_terms(cls, terms: Iterable[tuple]) -> "KleinElement":
        acc = {}
        for pk, c in terms:
            key = (int(pk[0]), int(pk[1]))
            acc[key] = acc.get(key, 0.0) + complex(c)
        return cls(acc)

    @classmethod
    def from_words(cls, terms: Iterable[tuple]) -> "KleinElement":
        acc = []
        for w, c in terms:
            if isinstance(w, str):
                w = parse_word(KLEIN_BASIS, w)
            acc.append((klein_normalize(w), c))
        return cls.from_terms(acc)

    def l1(self) -> float:
        return math.fsum(abs(c) for c in self.coeffs.values())


def pushdown(z: KleinElement) -> ZrElement:
    """Restriction to powers of a as a rank-1 lattice element."""
    if any(k != 0 for _, k in z.coeffs):
        raise UsageError("element is not supported on powers of a")
    return ZrElement(1, {(p,): c for (p, _), c in z.coeffs.items()})


def klein_norm(z: KleinElement, q: int, grid_cap: int = GRID_CAP) -> float:
    """Grid max of the 2x2 operator norm of the symbol."""
    if q < 1:
        raise DescriptorError("grid order must be positive")
    if q * q > grid_cap:
        raise SizeLimitError(f"grid has {q * q} points (cap {grid_cap})",
                             predicted=q * q)
    alpha = 2.0 * np.pi * np.arange(q)[:, None] / q
    beta = 2.0 * np.pi * np.arange(q)[None, :] / q
    e = [[np.zeros((q, q), dtype=complex) for _ in range(2)] for _ in range(2)]
    for (p, k), c in z.coeffs.items():
        s, rho = divmod(k, 2)
        upper = c * np.exp(1j * (p * alpha + s * beta))
        lower = c * np.exp(1j * (-p * alpha + s * beta))
        if rho == 0:
            e[0][0] += upper
            e[1][1] += lower
        else:
            e[0][1] += upper * np.exp(1j * beta)
            e[1][0] += lower
    # largest eigenvalue of the Hermitian Gram matrix M*M; the discriminant is
    # a sum of nonnegative terms, so degenerate symbols keep full precision
    h11 = np.abs(e[0][0]) ** 2 + np.abs(e[1][0]) ** 2
    h22 = np.abs(e[0][1]) ** 2 + np.abs(e[1][1]) ** 2
    h12 = np.conj(e[0][0]) * e[0][1] + np.conj(e[1][0]) * e[1][1]
    disc = np.sqrt((0.5 * (h11 - h22)) ** 2 + np.abs(h12) ** 2)
    return float(np.sqrt(0.5 * (h11 + h22) + disc).max())


def format_zr(z: ZrElement) -> str:
    lines = [f"rank {z.rank}"]
    for v in sorted(z.coeffs):
        c = z.coeffs[v]
        lines.append(f"{c.real!r} {c.imag!r} " + " ".join(str(x) for x in v))
    return "\n".join(lines) + "\n"


def parse_zr(text: str) -> ZrElement:
    rank = None
    acc = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if rank is None:
            if parts[0] != "rank" or len(parts) != 2:
                raise ParseError(f"line {lineno}: expected 'rank r' header")
            try:
                rank = int(parts[1])
            except ValueError:
                raise ParseError(f"line {lineno}: bad rank {parts[1]!r}") from None
            continue
        if len(parts) != 2 + rank:
            raise ParseError(f"line {lineno}: expected RE IM and {rank} integers")
        try:
            c = complex(float(parts[0]), float(parts[1]))
            v = tuple(int(x) for x in parts[2:])
        except ValueError:
            raise ParseError(f"line {lineno}: bad number") from None
        acc.append((v, c))
    if rank is None:
        raise ParseError("missing 'rank r' header")
    return ZrElement.from_terms(rank, acc)


def format_klein(z: KleinElement) -> str:
    lines = []
    for (p, k) in sorted(z.coeffs):
        c = z.coeffs[(p, k)]
        lines.append(f"{c.real!r} {c.imag!r} {p} {k}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_klein(text: str) -> KleinElement:
    acc = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"line {lineno}: expected RE IM p k")
        try:
            acc.append(((int(parts[2]), int(parts[3])),
                        complex(float(parts[0]), float(parts[1]))))
        except ValueError:
            raise ParseError(f"line {lineno}: bad number") from None
    return KleinElement.from_terms(acc)
