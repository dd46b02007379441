"""Two-sided brackets for the reduced operator norm of a free-algebra element.

For nonzero a we square c_1 = a* a repeatedly, c_{j+1} = c_j^2, so that
c_j = (a* a)^m with m = 2^(j-1).  Each stage gives

    lower_j = l2(c_j)^(1/2m)
    upper_j = [(R_j + 1)^(3/2) l2(c_j)]^(1/2m),  R_j = support radius of c_j

and the final bracket is [max_j lower_j, min(min_j upper_j, l1(a))].

Elements whose coefficients are constant on spheres get a dedicated engine
that squares the vector of sphere values through the tree structure counts,
so deep schedules stay cheap; everything else squares the term dicts and may
stop early at the term cap.

All arithmetic is double precision without directed rounding, so the bracket
is trustworthy only up to float error; see FLOAT_NOTE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import TERM_CAP, AlgebraElement, convolve
from .errors import InvariantViolationError, SizeLimitError, ZeroElementError

FLOAT_NOTE = ("bounds computed in double precision without directed rounding;"
              " certified only up to float roundoff")

# monotonicity and containment get this much relative slack before we call
# the run inconsistent
_REL_SLACK = 1e-9


@dataclass(frozen=True)
class BracketRow:
    j: int
    m: int
    l2: float
    radius: int
    lower: float
    upper: float


@dataclass
class NormBracket:
    lower: float
    upper: float
    l1_cap: float
    schedule: list[BracketRow] = field(default_factory=list)
    truncated: bool = False
    heuristic: bool = False
    float_note: str = FLOAT_NOTE


def bracket_report(bracket: NormBracket) -> str:
    """Schedule rows as CSV, one line per stage."""
    lines = ["j,m,l2,radius,lower,upper"]
    for r in bracket.schedule:
        lines.append(f"{r.j},{r.m},{r.l2!r},{r.radius},{r.lower!r},{r.upper!r}")
    return "\n".join(lines) + "\n"


# -- sphere-vector engine ------------------------------------------------------
#
# A radial element is stored as (phi, scale): the coefficient on every word of
# length d equals phi[d] * 2^scale.  Multiplication needs, for each reduced w
# with |w| = d, the number of factorizations w = u v with |u| = i, |v| = j.
# Writing x = (i + j - d)/2 for the cancelled length and a = i - x for the seam
# position inside w, the count is
#
#     1                     x = 0
#     2k (2k-1)^(x-1)       d = 0           (any reduced u, v = u^-1)
#     (2k-1)^x              x > 0, seam at either end of w
#     (2k-2) (2k-1)^(x-1)   x > 0, interior seam
#
# since the cancelled word is free except at letters pinned by reducedness.


class _Radial:
    __slots__ = ("phi", "scale", "rank")

    def __init__(self, phi: np.ndarray, scale: float, rank: int):
        self.phi = phi
        self.scale = scale
        self.rank = rank

    @classmethod
    def detect(cls, a: AlgebraElement) -> "_Radial | None":
        """The sphere vector of a, or None if a is not radial."""
        if a.matdim is not None or not a.coef:
            return None
        radius = a.support_radius()
        k = a.basis.rank
        seen: dict[int, tuple[complex, int]] = {}
        for w, c in a.coef.items():
            d = len(w)
            cur = seen.get(d)
            if cur is None:
                seen[d] = (c, 1)
            elif cur[0] != c:
                return None
            else:
                seen[d] = (c, cur[1] + 1)
        phi = np.zeros(radius + 1, complex)
        for d, (c, count) in seen.items():
            if count != _sphere_size(k, d):
                return None
            phi[d] = c
        return cls(phi, 0.0, k)

    def radius(self) -> int:
        nz = np.nonzero(self.phi)[0]
        return int(nz[-1])

    def mul(self, other: "_Radial") -> "_Radial":
        k, q = self.rank, 2 * self.rank - 1
        f, g = self.phi, other.phi
        r1, r2 = len(f) - 1, len(g) - 1
        if max(r1, r2, 1) * math.log2(max(q, 1)) > 1000:
            raise SizeLimitError("sphere weights exceed float range")
        out = np.zeros(r1 + r2 + 1, complex)
        qpow = np.concatenate(([1.0], np.cumprod(np.full(max(r1, r2), float(q)))))
        spheres = _sphere_sizes(k, min(r1, r2))
        out[0] = np.sum(f[:len(spheres)] * g[:len(spheres)] * spheres)
        for d in range(1, r1 + r2 + 1):
            lo, hi = max(0, d - r2), min(d, r1)
            acc = np.sum(f[lo:hi + 1] * g[d - hi:d - lo + 1][::-1]) if lo <= hi else 0j
            xm = min(r1, r2 - d)
            if xm >= 1:
                x = np.arange(1, xm + 1)
                acc += np.sum(qpow[x] * f[x] * g[d + x])
            xm = min(r2, r1 - d)
            if xm >= 1:
                x = np.arange(1, xm + 1)
                acc += np.sum(qpow[x] * f[d + x] * g[x])
            if d >= 2 and q >= 2:
                a = np.arange(1, d)
                xcap = np.minimum(r1 - a, r2 - (d - a))
                xm = int(xcap.max()) if len(xcap) else 0
                if xm >= 1:
                    x = np.arange(1, xm + 1)
                    ia = a[:, None] + x[None, :]
                    jb = (d - a)[:, None] + x[None, :]
                    mask = x[None, :] <= xcap[:, None]
                    vals = np.where(mask, f[np.minimum(ia, r1)] * g[np.minimum(jb, r2)], 0)
                    acc += (q - 1) * np.sum(vals * qpow[x - 1][None, :])
            out[d] = acc
        top = float(np.max(np.abs(out)))
        if top == 0.0:
            return _Radial(np.zeros(1, complex), 0.0, k)
        return _Radial(out / top, self.scale + other.scale + math.log2(top), k)

    def l2_log2(self) -> float:
        k = self.rank
        d = np.arange(len(self.phi))
        mag2 = np.abs(self.phi) ** 2
        # log2 of sum phi_d^2 |S_d| without forming huge sphere sizes
        logs = np.log2(mag2, where=mag2 > 0, out=np.full_like(mag2, -np.inf))
        logs = logs + _sphere_sizes_log2(k, len(self.phi) - 1)
        peak = float(np.max(logs))
        if peak == -np.inf:
            raise ZeroElementError("zero element has no l2")
        total = peak + math.log2(float(np.sum(np.exp2(logs - peak))))
        return 0.5 * total + self.scale


def _sphere_size(k: int, d: int) -> int:
    return 1 if d == 0 else 2 * k * (2 * k - 1) ** (d - 1)


def _sphere_sizes(k: int, radius: int) -> np.ndarray:
    out = np.ones(radius + 1)
    if radius >= 1:
        out[1:] = 2 * k * np.float_power(2 * k - 1, np.arange(radius))
    return out


def _sphere_sizes_log2(k: int, radius: int) -> np.ndarray:
    out = np.zeros(radius + 1)
    if radius >= 1:
        out[1:] = math.log2(2 * k) + np.arange(radius) * math.log2(max(2 * k - 1, 1))
    return out


# -- the bracket ---------------------------------------------------------------


def _row(j: int, log2_l2: float, radius: int) -> BracketRow:
    m = 2 ** (j - 1)
    lo = 2.0 ** (log2_l2 / (2 * m))
    up = 2.0 ** ((1.5 * math.log2(radius + 1) + log2_l2) / (2 * m))
    return BracketRow(j, m, 2.0 ** log2_l2, radius, lo, up)


def sandwich(a: AlgebraElement, max_doublings: int = 8, target_ratio: float = 1.0,
             term_cap: int = TERM_CAP, engine: str = "auto") -> NormBracket:
    """Bracket the operator norm of a by the repeated-squaring schedule.

    Stops once upper/lower <= target_ratio, after max_doublings stages, or
    when a squaring would exceed term_cap (the bracket so far is returned
    with truncated set).  Matrix-mode elements reuse the same radius factor,
    which is not backed by the scalar argument; those brackets are flagged
    heuristic.
    """
    if not a:
        raise ZeroElementError("cannot bracket the zero element")
    if max_doublings < 1:
        raise ValueError("max_doublings must be at least 1")
    if engine not in ("auto", "dict", "radial"):
        raise ValueError(f"unknown engine {engine!r}")

    l1 = a.l1()
    rows: list[BracketRow] = []
    truncated = False

    c = convolve(a.star(), a, term_cap)
    rad = _Radial.detect(c) if engine != "dict" else None
    if engine == "radial" and rad is None:
        raise ValueError("element is not radial")

    for j in range(1, max_doublings + 1):
        if rad is not None:
            rows.append(_row(j, rad.l2_log2(), rad.radius()))
        else:
            rows.append(_row(j, math.log2(c.l2()), c.support_radius()))
        if rows[-1].upper <= target_ratio * rows[-1].lower or j == max_doublings:
            break
        try:
            if rad is not None:
                rad = rad.mul(rad)
            else:
                c = convolve(c, c, term_cap)
        except SizeLimitError:
            truncated = True
            break

    lower = max(r.lower for r in rows)
    upper = min(min(r.upper for r in rows), l1)
    bracket = NormBracket(lower, upper, l1, rows, truncated,
                          heuristic=a.matdim is not None)
    if a.matdim is None:
        _check_run(a, bracket)
    return bracket


def _check_run(a: AlgebraElement, b: NormBracket) -> None:
    slack = _REL_SLACK * max(b.upper, 1.0)
    for prev, cur in zip(b.schedule, b.schedule[1:]):
        if cur.lower < prev.lower - slack:
            raise InvariantViolationError(
                f"lower bound fell from {prev.lower} to {cur.lower} at j={cur.j}")
        if cur.upper > prev.upper + slack:
            raise InvariantViolationError(
                f"upper bound rose from {prev.upper} to {cur.upper} at j={cur.j}")
    if not (a.l2() <= b.lower + slack and b.lower <= b.upper + slack
            and b.upper <= b.l1_cap + slack):
        raise InvariantViolationError(
            f"containment l2 <= lower <= upper <= l1 failed: "
            f"{a.l2()}, {b.lower}, {b.upper}, {b.l1_cap}")
