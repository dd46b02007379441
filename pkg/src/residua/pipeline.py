"""End-to-end norm certificates for tower subgroups.

Ties the other modules together: measured image stretch feeds the exponent
inequality [C(2mR)^D]^(3/(4m)) <= 1 + eps/3, a ball-injective map carries l2
data into the free base, and support-radius upper bounds close the loop
against an l2 convolution-power proxy.

The reduced norm on the tower side is never computed here; nothing can do
that.  Every recorded inequality is between quantities we actually evaluate:
the proxy max_k l2((b*b)^k)^(1/2k) is a certified lower bound for both norms
involved, the free-side upper bound min((supp+1)^(3/2) l2)^(1/2k) and the l1
cap are certified upper bounds, and `final_slack` compares upper against
proxy + eps.  The slack is therefore relative to the proxy chain, which the
serialized header states.  Two exponents appear: `m_theory`, the smallest one
passing the choice inequality with the measured constants (recorded with its
log-domain margins, usually far too large to evaluate), and the working
exponent `m` at which the rows are actually computed, with the map certified
injective on the matching ball of radius 2mR.
"""

from __future__ import annotations

import cmath
import decimal
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .algebra import TERM_CAP, AlgebraElement, convolve, pushforward
from .errors import (ContextMismatchError, InvariantViolationError,
                     NonConvergenceError, UsageError)
from .tower import (Homomorphism, SubgroupDescriptor, TowerDescriptor, degree,
                    discriminating_hom)
from .words import BALL_CAP, Basis, Word

CSV_VERSION = "# residua-csv v1"

# default working exponent; memory for the power supports scales roughly like
# (image stretch * 2m)^... so keep this small
M_WORK = 2

FIT_RADII = (1, 2, 3)

NET_SUPPORT_CAP = 3

_L1_TOL = 1e-9

# relative slack before the chain ordering counts as violated
_REL_SLACK = 1e-9

# doubling guard in choose_m; unreachable, the left side tends to 1
_M_SEARCH_CAP = 1 << 64


# -- exponent choice ----------------------------------------------------------


def _mchoice_margin(m: int, C, D, R, eps, prec: int = 60) -> decimal.Decimal:
    """ln(1 + eps/3) - (3/(4m)) (ln C + D ln(2mR)); >= 0 iff m satisfies the
    choice inequality."""
    if m < 1:
        raise UsageError("exponent must be a positive integer")
    with decimal.localcontext() as ctx:
        ctx.prec = prec
        lhs = (decimal.Decimal(C).ln()
               + decimal.Decimal(D) * (2 * decimal.Decimal(m) * decimal.Decimal(R)).ln())
        lhs = lhs * 3 / (4 * m)
        return (1 + decimal.Decimal(eps) / 3).ln() - lhs


def _mchoice_holds(m: int, C, D, R, eps) -> bool:
    margin = _mchoice_margin(m, C, D, R, eps)
    if margin != 0 and abs(margin) < decimal.Decimal("1e-40"):
        # near-tie: the interesting digits drowned; re-decide much higher up
        margin = _mchoice_margin(m, C, D, R, eps, prec=240)
    return margin >= 0


def choose_m(C: float, D: int, R: int, eps: float) -> int:
    """Smallest positive integer m with [C(2mR)^D]^(3/(4m)) <= 1 + eps/3.

    Evaluated in the log domain with 60-digit arithmetic (ties re-decided at
    240 digits).  For C, R >= 1 the left side is strictly decreasing from
    m = 2 on, since then ln C + D ln(2mR) > D, so after a short linear probe
    the search may double and bisect.
    """
    if not (C >= 1 and D >= 1 and R >= 1):
        raise UsageError("need C >= 1, D >= 1 and R >= 1")
    if not eps > 0:
        raise UsageError("tolerance must be positive")

    def holds(m: int) -> bool:
        return _mchoice_holds(m, C, D, R, eps)

    for m in range(1, 65):
        if holds(m):
            return m
    lo, hi = 64, 128
    while not holds(hi):
        lo, hi = hi, 2 * hi
        if hi > _M_SEARCH_CAP:
            raise NonConvergenceError(
                f"no exponent below {_M_SEARCH_CAP} satisfies the choice inequality")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if holds(mid):
            hi = mid
        else:
            lo = mid
    return hi


# -- certificates --------------------------------------------------------------


@dataclass(frozen=True)
class CertRow:
    """One evaluated link of the chain: element `element` at power `mhat`."""

    element: int
    mhat: int
    l2_of_power: float
    supp_radius: int
    haagerup_factor: float
    norm_upper_free: float
    proxy: float
    l1: float
    final_slack: float


@dataclass
class CsrfCertificate:
    """Everything `certify` measured, plus the map it measured through.

    stretch_samples holds the raw (radius, max image length) fit data behind
    C_meas.  mchoice_margin is the log-domain margin of the choice inequality
    at m_theory (>= 0 by construction); mchoice_margin_prev the margin at
    m_theory - 1 (negative), or None when m_theory == 1.  Rows come in
    element order, m_hat ascending within an element, and final_slack is
    shared by all rows of one element: it scores the element's best upper
    bound against proxy + eps.
    """

    R: int
    eps: float
    m: int
    m_theory: int
    C_meas: float
    D: int
    stretch_samples: tuple[tuple[int, int], ...]
    mchoice_margin: float
    mchoice_margin_prev: float | None
    phi: Homomorphism
    rows: tuple[CertRow, ...]


def _element_rows(idx: int, a: AlgebraElement, phi: Homomorphism, eps: float,
                  m_work: int, term_cap: int) -> list[CertRow]:
    b = pushforward(phi, a)
    step = convolve(b.star(), b, term_cap)
    l1 = b.l1()
    stats = []
    power = None
    for k in range(1, m_work + 1):
        power = step if power is None else convolve(power, step, term_cap)
        l2k = power.l2()
        rad = power.support_radius()
        haag = (rad + 1.0) ** 1.5
        upper = min((haag * l2k) ** (1.0 / (2 * k)), l1)
        stats.append((k, l2k, rad, haag, upper))

    proxy = max(l2k ** (1.0 / (2 * k)) for k, l2k, _, _, _ in stats)
    best = min(upper for *_, upper in stats)
    # l2(a) <= proxy <= every upper <= l1 are theorems; a breach is a bug here
    ordered = (a.l2() <= proxy * (1 + _REL_SLACK)
               and all(proxy <= upper * (1 + _REL_SLACK) for *_, upper in stats)
               and best <= l1 * (1 + _REL_SLACK))
    if not ordered:
        raise InvariantViolationError(
            f"certificate chain out of order for element {idx}")
    slack = proxy + eps - best
    return [CertRow(idx, k, l2k, rad, haag, upper, proxy, l1, slack)
            for k, l2k, rad, haag, upper in stats]


def certify(tower: TowerDescriptor, Y: SubgroupDescriptor, R: int, eps: float,
            elements: Iterable[AlgebraElement], m_work: int = M_WORK,
            fit_radii: Sequence[int] = FIT_RADII, term_cap: int = TERM_CAP,
            ball_cap: int = BALL_CAP) -> CsrfCertificate:
    """Measure the full inequality chain for unit-l1 elements on B_Y(R).

    Fits C_meas = max(1, stretch(r)/r^D) over fit_radii, picks m_theory via
    choose_m, then evaluates rows through a map certified injective on
    B_Y(2 m_work R).  Elements must be scalar-coefficient, with l1 norm 1 and
    support inside B_Y(R).  Rows are independent and kept in input order.

    Raises UsageError on normalization or support violations, and lets
    injectivity failures and size caps from the building blocks propagate.
    """
    if not isinstance(R, int) or R < 1:
        raise UsageError("support radius must be a positive integer")
    if not eps > 0:
        raise UsageError("tolerance must be positive")
    if m_work < 1:
        raise UsageError("working exponent must be a positive integer")
    if not fit_radii:
        raise UsageError("need at least one fit radius")
    elements = list(elements)
    if not elements:
        raise UsageError("nothing to certify")
    yb = Basis(Y.names)
    for i, a in enumerate(elements):
        if a.basis != yb:
            raise ContextMismatchError(
                f"element {i} is over {a.basis.names}, subgroup names are {yb.names}")
        if a.matdim is not None:
            raise UsageError("certificates cover scalar coefficients only")
        if abs(a.l1() - 1.0) > _L1_TOL:
            raise UsageError(f"element {i} has l1 norm {a.l1()!r}, need 1")
        if a.support_radius() > R:
            raise UsageError(f"element {i} reaches radius {a.support_radius()}, "
                             f"stated bound is {R}")

    D = degree(tower)
    samples = []
    C_meas = 1.0
    for r in fit_radii:
        h = discriminating_hom(tower, Y, r, ball_cap=ball_cap)
        samples.append((r, h.stretch))
        C_meas = max(C_meas, h.stretch / r ** D)

    m_theory = choose_m(C_meas, D, R, eps)
    margin = float(_mchoice_margin(m_theory, C_meas, D, R, eps))
    margin_prev = (float(_mchoice_margin(m_theory - 1, C_meas, D, R, eps))
                   if m_theory > 1 else None)

    phi = discriminating_hom(tower, Y, 2 * m_work * R, ball_cap=ball_cap)
    rows: list[CertRow] = []
    for i, a in enumerate(elements):
        rows.extend(_element_rows(i, a, phi, eps, m_work, term_cap))
    return CsrfCertificate(R, eps, m_work, m_theory, C_meas, D, tuple(samples),
                           margin, margin_prev, phi, tuple(rows))


# -- serialization -------------------------------------------------------------


def certificate_text(cert: CsrfCertificate) -> str:
    """Scalar summary in the tower-file dialect, fit and map data included."""
    prev = cert.mchoice_margin_prev
    lines = [
        "# norm certificate.  The domain-side reduced norm is never computed",
        "# directly: lower bounds are l2 norms of convolution powers moved",
        "# through the listed map (faithful on its certified ball), so every",
        "# final_slack is relative to that proxy chain, not to the true norm.",
        f"radius = {cert.R}",
        f"epsilon = {cert.eps!r}",
        f"m_work = {cert.m}",
        f"m_theory = {cert.m_theory}",
        f"C_meas = {cert.C_meas!r}",
        f"D = {cert.D}",
        f"mchoice_margin = {cert.mchoice_margin!r}",
        f"mchoice_margin_prev = {'none' if prev is None else repr(prev)}",
        f"certified_radius = {cert.phi.certified_radius}",
        f"m_per_level = [{', '.join(str(m) for m in cert.phi.m_per_level)}]",
        f"stretch = {cert.phi.stretch}",
    ]
    for r, s in cert.stretch_samples:
        lines += ["", "[[stretch]]", f"r = {r}", f"max_image_len = {s}"]
    for name in cert.phi.domain.names:
        lines += ["", "[[image]]", f"name = {name}",
                  f"len = {len(cert.phi.images[name])}"]
    return "\n".join(lines) + "\n"


def certificate_csv(cert: CsrfCertificate) -> str:
    """Row table as CSV; floats via repr so reruns compare byte for byte."""
    lines = [CSV_VERSION,
             "element,mhat,l2_of_power,supp_radius,haagerup_factor,"
             "norm_upper_free,proxy,l1,final_slack"]
    for r in cert.rows:
        lines.append(f"{r.element},{r.mhat},{r.l2_of_power!r},{r.supp_radius},"
                     f"{r.haagerup_factor!r},{r.norm_upper_free!r},{r.proxy!r},"
                     f"{r.l1!r},{r.final_slack!r}")
    return "\n".join(lines) + "\n"


def write_certificate(cert: CsrfCertificate, prefix) -> tuple[Path, Path]:
    """Write <prefix>.txt and <prefix>.csv; returns the two paths."""
    txt, csv = Path(f"{prefix}.txt"), Path(f"{prefix}.csv")
    txt.write_text(certificate_text(cert), encoding="utf-8")
    csv.write_text(certificate_csv(cert), encoding="utf-8")
    return txt, csv


# -- net construction ----------------------------------------------------------


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def net_mode(R: int, eps: float, support: Sequence[Word]) -> list[AlgebraElement]:
    """Finite list of unit-l1 elements on `support` that comes within eps/3
    of every such element, up to a global phase.

    Magnitudes run over the simplex grid {k/M : sum k = M} with
    M = ceil(6 max(1, s-1)/eps); every coordinate after the first carries a
    phase from the uniform P-point grid, P = ceil(12 pi/eps); the first stays
    real nonnegative, which loses nothing because a global phase moves any
    element onto that slice without changing norms.  The list has exactly
    comb(M+s-1, s-1) * P^(s-1) entries (magnitude zero makes some of them
    coincide), exponential in s = len(support), hence the hard size cap.
    """
    if not eps > 0:
        raise UsageError("tolerance must be positive")
    if R < 0:
        raise UsageError("radius must be nonnegative")
    words = list(support)
    if not words:
        raise UsageError("empty support")
    if len(words) > NET_SUPPORT_CAP:
        raise UsageError(f"support too large: {len(words)} words against the "
                         f"cap {NET_SUPPORT_CAP}; net size is exponential")
    if len(set(words)) != len(words):
        raise UsageError("support words must be distinct")
    basis = words[0].basis
    for w in words:
        if w.basis != basis:
            raise ContextMismatchError("support words over different bases")
        if len(w) > R:
            raise UsageError(f"support word {str(w)!r} is longer than R = {R}")

    s = len(words)
    M = math.ceil(6 * max(1, s - 1) / eps)
    P = math.ceil(12 * math.pi / eps)
    phase_grid = [cmath.exp(2j * math.pi * p / P) for p in range(P)]
    out = []
    for ks in _compositions(M, s):
        mags = [k / M for k in ks]
        for phases in itertools.product(range(P), repeat=s - 1):
            coeffs = [complex(mags[0])]
            coeffs += [mags[j + 1] * phase_grid[p] for j, p in enumerate(phases)]
            out.append(AlgebraElement.from_terms(basis, zip(words, coeffs)))
    return out
