"""Finitely supported elements of the group algebra of a free basis.

Coefficients are complex scalars, or dense r-by-r complex matrices when the
element was created in matrix mode (``matdim=r``).  Supports are dicts keyed
by reduced letter tuples; coefficients equal to exact 0.0 are never stored,
and nothing else is ever thresholded away.

All norms here are plain float arithmetic.  Nothing rounds outward, so a
reported bracket is honest only up to float rounding; see the README.

Text format, one term per line (``#`` comments and blank lines ignored):

    RE IM <word>            scalar mode
    matdim r                first payload line, matrix mode only
    RE IM ROW COL <word>    matrix mode, 0-based entry indices

Duplicate term lines accumulate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import (ContextMismatchError, ParseError, SizeLimitError,
                     ZeroElementError)
from .words import Basis, Letters, Word, format_word, inv_letters, mul_letters, parse_word

TERM_CAP = 5 * 10**7

Coef = complex | np.ndarray


def _iszero(c: Coef) -> bool:
    if isinstance(c, np.ndarray):
        return bool(np.all(c == 0))
    return c == 0


@dataclass(eq=False)
class AlgebraElement:
    basis: Basis
    coef: dict[Letters, Coef] = field(default_factory=dict)
    matdim: int | None = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        if (self.basis, self.matdim) != (other.basis, other.matdim):
            return False
        if self.coef.keys() != other.coef.keys():
            return False
        if self.matdim is None:
            return all(other.coef[k] == c for k, c in self.coef.items())
        return all(np.array_equal(other.coef[k], c) for k, c in self.coef.items())

    # -- construction -----------------------------------------------------

    @classmethod
    def from_terms(cls, basis: Basis, terms: Iterable[tuple[Word | str, Coef]],
                   matdim: int | None = None) -> "AlgebraElement":
        el = cls(basis, {}, matdim)
        for w, c in terms:
            if isinstance(w, str):
                w = parse_word(basis, w)
            el._add(w.letters, el._coerce(c))
        el._prune()
        return el

    @classmethod
    def delta(cls, basis: Basis, w: Word | str, c: Coef = 1.0) -> "AlgebraElement":
        return cls.from_terms(basis, [(w, c)])

    def _coerce(self, c: Coef) -> Coef:
        if self.matdim is None:
            if isinstance(c, np.ndarray):
                raise ContextMismatchError("matrix coefficient in scalar mode")
            return complex(c)
        m = np.asarray(c, dtype=np.complex128)
        if m.shape != (self.matdim, self.matdim):
            raise ContextMismatchError(
                f"coefficient shape {m.shape} does not match matdim {self.matdim}")
        return m

    def _add(self, k: Letters, c: Coef) -> None:
        cur = self.coef.get(k)
        self.coef[k] = c if cur is None else cur + c

    def _prune(self) -> None:
        dead = [k for k, c in self.coef.items() if _iszero(c)]
        for k in dead:
            del self.coef[k]

    # -- views -------------------------------------------------------------

    def terms(self) -> Iterator[tuple[Word, Coef]]:
        """Deterministic term iteration, shortest words first."""
        for k in sorted(self.coef, key=lambda k: (len(k), k)):
            yield Word(self.basis, k), self.coef[k]

    def __len__(self) -> int:
        return len(self.coef)

    def __bool__(self) -> bool:
        return bool(self.coef)

    def copy(self) -> "AlgebraElement":
        return AlgebraElement(self.basis, dict(self.coef), self.matdim)

    def _check_compatible(self, other: "AlgebraElement") -> None:
        if self.basis != other.basis:
            raise ContextMismatchError(
                f"bases differ: {self.basis.names} vs {other.basis.names}")
        if self.matdim != other.matdim:
            raise ContextMismatchError(
                f"matrix dimensions differ: {self.matdim} vs {other.matdim}")

    # -- linear structure ----------------------------------------------------

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check_compatible(other)
        out = self.copy()
        for k, c in other.coef.items():
            out._add(k, c)
        out._prune()
        return out

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        return self + (-1.0) * other

    def __rmul__(self, scalar: complex) -> "AlgebraElement":
        s = complex(scalar)
        return AlgebraElement(self.basis,
                              {k: s * c for k, c in self.coef.items() if s != 0},
                              self.matdim)

    def __mul__(self, other: "AlgebraElement") -> "AlgebraElement":
        return convolve(self, other)

    # -- involution and norms ------------------------------------------------

    def star(self) -> "AlgebraElement":
        """a*(g) = conj(a(g^-1)); conjugate transpose in matrix mode."""
        if self.matdim is None:
            out = {inv_letters(k): c.conjugate() for k, c in self.coef.items()}
        else:
            out = {inv_letters(k): c.conj().T.copy() for k, c in self.coef.items()}
        return AlgebraElement(self.basis, out, self.matdim)

    def l1(self) -> float:
        """Sum of coefficient magnitudes (operator norm per matrix entry)."""
        if self.matdim is None:
            return math.fsum(abs(c) for c in self.coef.values())
        return math.fsum(float(np.linalg.norm(c, 2)) for c in self.coef.values())

    def l2(self) -> float:
        """Square-summed coefficient norm (Frobenius per matrix entry)."""
        if self.matdim is None:
            sq = math.fsum((c * c.conjugate()).real for c in self.coef.values())
        else:
            sq = math.fsum(float(np.sum(np.abs(c) ** 2)) for c in self.coef.values())
        return math.sqrt(sq)

    def support_radius(self) -> int:
        if not self.coef:
            raise ZeroElementError("support radius undefined for the zero element")
        return max(len(k) for k in self.coef)

    def coefficient(self, w: Word | str) -> Coef:
        if isinstance(w, str):
            w = parse_word(self.basis, w)
        c = self.coef.get(w.letters)
        if c is not None:
            return c
        return 0j if self.matdim is None else np.zeros((self.matdim,) * 2, complex)


def convolve(a: AlgebraElement, b: AlgebraElement,
             term_cap: int = TERM_CAP) -> AlgebraElement:
    """(a.b)(g) = sum_h a(h) b(h^-1 g), with matrix products in matrix mode.

    Raises SizeLimitError before doing more than term_cap pairwise products,
    which also bounds the result support.
    """
    a._check_compatible(b)
    predicted = len(a.coef) * len(b.coef)
    if predicted > term_cap:
        raise SizeLimitError(
            f"convolution needs {predicted} products, above the term cap {term_cap}",
            predicted=predicted)
    matrix = a.matdim is not None
    out: dict[Letters, Coef] = {}
    for ka, ca in a.coef.items():
        for kb, cb in b.coef.items():
            k = mul_letters(ka, kb)
            c = ca @ cb if matrix else ca * cb
            cur = out.get(k)
            out[k] = c if cur is None else cur + c
    el = AlgebraElement(a.basis, out, a.matdim)
    el._prune()
    return el


def pushforward(hom, a: AlgebraElement) -> AlgebraElement:
    """Image under a homomorphism given letterwise; colliding images add."""
    if a.basis != hom.domain:
        raise ContextMismatchError(
            f"element over {a.basis.names} but homomorphism domain is {hom.domain.names}")
    out = AlgebraElement(hom.codomain, {}, a.matdim)
    for k, c in a.coef.items():
        out._add(hom.apply_letters(k), c)
    out._prune()
    return out


# -- text I/O ----------------------------------------------------------------


def parse_element(basis: Basis, text: str) -> AlgebraElement:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    matdim = None
    if lines and lines[0].split()[0] == "matdim":
        parts = lines[0].split()
        if len(parts) != 2 or not parts[1].isdigit() or int(parts[1]) < 1:
            raise ParseError(f"bad matdim line {lines[0]!r}")
        matdim = int(parts[1])
        lines = lines[1:]
    el = AlgebraElement(basis, {}, matdim)
    for ln in lines:
        parts = ln.split()
        fixed = 2 if matdim is None else 4
        if len(parts) < fixed:
            raise ParseError(f"term line too short: {ln!r}")
        try:
            re_, im = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"bad coefficient on line {ln!r}") from None
        w = parse_word(basis, " ".join(parts[fixed:]))
        if matdim is None:
            el._add(w.letters, complex(re_, im))
        else:
            try:
                row, col = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(f"bad entry index on line {ln!r}") from None
            if not (0 <= row < matdim and 0 <= col < matdim):
                raise ParseError(f"entry ({row},{col}) outside matdim {matdim}")
            m = np.zeros((matdim, matdim), complex)
            m[row, col] = complex(re_, im)
            el._add(w.letters, m)
    el._prune()
    return el


def format_element(a: AlgebraElement) -> str:
    out: list[str] = []
    if a.matdim is not None:
        out.append(f"matdim {a.matdim}")
    for w, c in a.terms():
        text = format_word(w)
        if a.matdim is None:
            out.append(f"{c.real!r} {c.imag!r} {text}".rstrip())
        else:
            rows, cols = np.nonzero(c)
            for r_, c_ in zip(rows.tolist(), cols.tolist()):
                v = complex(c[r_, c_])
                out.append(f"{v.real!r} {v.imag!r} {r_} {c_} {text}".rstrip())
    return "\n".join(out) + "\n"
