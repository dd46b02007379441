"""Reduced words over a finite free basis.

A word is stored as a flat tuple of signed 1-based generator indices:
``+i`` is the i-th basis letter, ``-i`` its inverse.  All public operations
keep words freely reduced, so concatenation only ever cancels at the seam.

Text syntax: whitespace-separated tokens ``name`` or ``name^k`` with k a
nonzero integer; the empty string is the identity.

>>> B = Basis(("a", "b"))
>>> parse_word(B, "a a^-1")
Word(basis=Basis(names=('a', 'b')), letters=())
>>> format_word(parse_word(B, "b a a b^-1"))
'b a^2 b^-1'
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (ContextMismatchError, DescriptorError, ParseError,
                     SizeLimitError, ZeroElementError)

Letters = tuple[int, ...]

BALL_CAP = 10**7


@dataclass(frozen=True)
class Basis:
    """An ordered tuple of distinct ASCII identifier names."""

    names: tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise DescriptorError("basis needs at least one generator")
        for n in self.names:
            if not (n.isidentifier() and n.isascii()):
                raise DescriptorError(f"generator name {n!r} is not an ASCII identifier")
        if len(set(self.names)) != len(self.names):
            raise DescriptorError(f"duplicate generator names in {self.names}")

    @property
    def rank(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        """1-based index of a generator name."""
        try:
            return self.names.index(name) + 1
        except ValueError:
            raise ParseError(f"unknown generator {name!r}; basis is {self.names}") from None

    def letter_str(self, letter: int) -> str:
        name = self.names[abs(letter) - 1]
        return name if letter > 0 else name + "^-1"


@dataclass(frozen=True)
class Word:
    """A freely reduced word.  Compare and hash by (basis, letters)."""

    basis: Basis
    letters: Letters

    def __len__(self) -> int:
        return len(self.letters)

    def __bool__(self) -> bool:
        return bool(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        if self.basis != other.basis:
            raise ContextMismatchError(
                f"bases differ: {self.basis.names} vs {other.basis.names}")
        return Word(self.basis, mul_letters(self.letters, other.letters))

    def inverse(self) -> "Word":
        return Word(self.basis, inv_letters(self.letters))

    def __pow__(self, n: int) -> "Word":
        return Word(self.basis, pow_letters(self.letters, n))

    def __str__(self) -> str:
        return format_word(self)


def identity(basis: Basis) -> Word:
    return Word(basis, ())


def reduce_letters(seq) -> Letters:
    """Freely reduce an arbitrary signed-index sequence by a stack scan."""
    out: list[int] = []
    for x in seq:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def mul_letters(u: Letters, v: Letters) -> Letters:
    # both inputs reduced, so cancellation happens only at the seam
    i, j = len(u), 0
    nv = len(v)
    while i > 0 and j < nv and u[i - 1] == -v[j]:
        i -= 1
        j += 1
    return u[:i] + v[j:]


def inv_letters(u: Letters) -> Letters:
    return tuple(-x for x in reversed(u))


def pow_letters(u: Letters, n: int) -> Letters:
    """u**n for reduced u, built in O(output) via the cyclic decomposition."""
    if n == 0 or not u:
        return ()
    if n < 0:
        u, n = inv_letters(u), -n
    if n == 1:
        return u
    p, s, l = _decompose(u)
    return p + s * (l * n) + inv_letters(p)


def _decompose(u: Letters) -> tuple[Letters, Letters, int]:
    """(p, s, l) with u == p + s*l + p^-1, s cyclically reduced and primitive."""
    lo, hi = 0, len(u)
    while hi - lo >= 2 and u[lo] == -u[hi - 1]:
        lo += 1
        hi -= 1
    p, c = u[:lo], u[lo:hi]
    n = len(c)
    # smallest period of c via the KMP failure function; an exact power of the
    # prefix of that period iff the period divides n
    fail = [0] * n
    k = 0
    for i in range(1, n):
        while k and c[i] != c[k]:
            k = fail[k - 1]
        if c[i] == c[k]:
            k += 1
        fail[i] = k
    period = n - fail[n - 1]
    if n % period == 0 and period < n:
        return p, c[:period], n // period
    return p, c, 1


@dataclass(frozen=True)
class CyclicDecomposition:
    """w = conjugator * core**exponent * conjugator^-1, core primitive."""

    conjugator: Word
    core: Word
    exponent: int


def cyclic_decompose(w: Word) -> CyclicDecomposition:
    """Cyclic decomposition of a nonidentity word.

    >>> B = Basis(("a", "b"))
    >>> d = cyclic_decompose(parse_word(B, "b a a b^-1"))
    >>> format_word(d.conjugator), format_word(d.core), d.exponent
    ('b', 'a', 2)
    """
    if not w.letters:
        raise ZeroElementError("identity word has no cyclic decomposition")
    p, s, l = _decompose(w.letters)
    return CyclicDecomposition(Word(w.basis, p), Word(w.basis, s), l)


def primitive_root(w: Word) -> Word:
    """The unique (up to inversion) primitive z with w a power of z."""
    d = cyclic_decompose(w)
    return Word(w.basis, mul_letters(mul_letters(d.conjugator.letters, d.core.letters),
                                     inv_letters(d.conjugator.letters)))


def is_primitive(w: Word) -> bool:
    """True when w is not a proper power of a shorter word."""
    return bool(w.letters) and cyclic_decompose(w).exponent == 1


def is_cyclically_reduced(w: Word) -> bool:
    u = w.letters
    return len(u) < 2 or u[0] != -u[-1]


def commute(u: Word, v: Word) -> bool:
    """Whether uv == vu, via triviality of the reduced commutator."""
    if u.basis != v.basis:
        raise ContextMismatchError(
            f"bases differ: {u.basis.names} vs {v.basis.names}")
    a, b = u.letters, v.letters
    c = mul_letters(mul_letters(a, b), mul_letters(inv_letters(a), inv_letters(b)))
    return not c


def ball_size(rank: int, radius: int) -> int:
    """Number of reduced words of length at most radius."""
    k2 = 2 * rank
    total, sphere = 1, 1
    for i in range(1, radius + 1):
        sphere = k2 if i == 1 else sphere * (k2 - 1)
        total += sphere
    return total


def ball(basis: Basis, radius: int, cap: int = BALL_CAP) -> list[Word]:
    """All reduced words of length <= radius, BFS order, deterministic.

    Letters extend in the order +1, -1, +2, -2, ... and immediate
    backtracking is skipped, so every word is produced exactly once.
    """
    if radius < 0:
        raise DescriptorError("radius must be >= 0")
    predicted = ball_size(basis.rank, radius)
    if predicted > cap:
        raise SizeLimitError(
            f"ball of radius {radius} in rank {basis.rank} holds {predicted} words,"
            f" above the cap {cap}", predicted=predicted)
    order = [s * i for i in range(1, basis.rank + 1) for s in (1, -1)]
    out = [identity(basis)]
    frontier: list[Letters] = [()]
    for _ in range(radius):
        nxt: list[Letters] = []
        for u in frontier:
            last = u[-1] if u else 0
            for x in order:
                if x == -last:
                    continue
                nxt.append(u + (x,))
        out.extend(Word(basis, u) for u in nxt)
        frontier = nxt
    return out


def parse_word(basis: Basis, text: str) -> Word:
    """Parse the whitespace token syntax; the empty string is the identity."""
    letters: list[int] = []
    for tok in text.split():
        name, caret, exp = tok.partition("^")
        if not name or (caret and not exp):
            raise ParseError(f"malformed token {tok!r}")
        idx = basis.index(name)
        if exp:
            try:
                e = int(exp)
            except ValueError:
                raise ParseError(f"bad exponent in token {tok!r}") from None
            if e == 0:
                raise ParseError(f"zero exponent in token {tok!r}")
        else:
            e = 1
        letters.extend([idx if e > 0 else -idx] * abs(e))
    return Word(basis, reduce_letters(letters))


def format_word(w: Word) -> str:
    """Inverse of parse_word, collapsing runs into exponents."""
    parts: list[str] = []
    run_letter, run_len = 0, 0
    for x in list(w.letters) + [0]:
        if x == run_letter:
            run_len += 1
            continue
        if run_letter:
            name = w.basis.names[abs(run_letter) - 1]
            e = run_len if run_letter > 0 else -run_len
            parts.append(name if e == 1 else f"{name}^{e}")
        run_letter, run_len = x, 1
    return " ".join(parts)


def random_reduced(rng: np.random.Generator, basis: Basis, length: int) -> Word:
    """A uniformly random reduced word of exactly the given length."""
    if length == 0:
        return identity(basis)
    k2 = 2 * basis.rank
    signed = [s * i for i in range(1, basis.rank + 1) for s in (1, -1)]
    first = signed[rng.integers(k2)]
    letters = [first]
    for _ in range(length - 1):
        choices = [x for x in signed if x != -letters[-1]]
        letters.append(choices[rng.integers(k2 - 1)])
    return Word(basis, tuple(letters))
