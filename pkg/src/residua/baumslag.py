"""Power lemma checks: hypothesis predicates, instance evaluation, and
randomized / exhaustive counterexample search.

Two hypothesis variants are supported.  Variant A applies to a cyclically
reduced word u that is not a proper power and compares min over i > 0 of
|k_i| strictly against (8n+2) * max{1, |b_i|/|u|}.  Variant B applies to any
nontrivial u and compares min over all i of |k_i| non-strictly against
(8n+2) * max{|b_i| + |u|}.  Comparisons are exact: integers and Fractions,
never floats.

The statement being checked is a theorem, so a "counterexample" (hypothesis
holds, the product reduces to the identity, yet no b_i commutes with u) can
only mean an implementation bug.  It raises CounterexampleError instead of
being returned as data; fail loudly.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (ContextMismatchError, CounterexampleError,
                     DescriptorError, SizeLimitError, UsageError)
from .words import (Basis, Word, ball, commute, is_cyclically_reduced,
                    is_primitive)

LENGTH_CAP = 10 ** 7
VARIANTS = ("A", "B")


@dataclass(frozen=True)
class PowerInstance:
    """A product w = u^{k_0} b_0 u^{k_1} b_1 ... u^{k_n} b_n."""

    u: Word
    b: tuple
    k: tuple

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(self.b))
        object.__setattr__(self, "k", tuple(int(x) for x in self.k))
        if not self.u:
            raise DescriptorError("u must be nonidentity")
        if not self.b or len(self.b) != len(self.k):
            raise DescriptorError("b and k must be nonempty lists of equal length")
        for w in self.b:
            if w.basis != self.u.basis:
                raise ContextMismatchError("b words must share the basis of u")

    @property
    def n(self) -> int:
        return len(self.k) - 1


@dataclass(frozen=True)
class LemmaVerdict:
    hypothesis_holds: bool
    w_trivial: bool
    commuting_index: Optional[int]

    def __post_init__(self):
        if self.hypothesis_holds and self.w_trivial and self.commuting_index is None:
            raise CounterexampleError("verdict violates the power lemma")


def hypothesis_threshold(inst: PowerInstance, variant: str = "B") -> Union[int, Fraction]:
    """Right-hand side of the variant inequality, exact."""
    if variant == "A":
        if not is_cyclically_reduced(inst.u):
            raise DescriptorError("variant A needs a cyclically reduced u")
        if not is_primitive(inst.u):
            raise DescriptorError("variant A needs u that is not a proper power")
        ratio = max(Fraction(len(b), len(inst.u)) for b in inst.b)
        return (8 * inst.n + 2) * max(Fraction(1), ratio)
    if variant == "B":
        return (8 * inst.n + 2) * max(len(b) + len(inst.u) for b in inst.b)
    raise UsageError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def check_hypothesis(inst: PowerInstance, variant: str = "B") -> bool:
    bound = hypothesis_threshold(inst, variant)
    if variant == "A":
        # min over i > 0, strict; vacuously true for n = 0
        return all(abs(ki) > bound for ki in inst.k[1:])
    return all(abs(ki) >= bound for ki in inst.k)


def unreduced_length(inst: PowerInstance) -> int:
    return (sum(abs(ki) for ki in inst.k) * len(inst.u)
            + sum(len(b) for b in inst.b))


def evaluate_w(inst: PowerInstance, length_cap: int = LENGTH_CAP) -> Word:
    """Reduced value of the product, u-powers built by fast exponentiation."""
    predicted = unreduced_length(inst)
    if predicted > length_cap:
        raise SizeLimitError(
            f"product would write {predicted} letters (cap {length_cap})",
            predicted=predicted)
    w = Word(inst.u.basis, ())
    for ki, bi in zip(inst.k, inst.b):
        w = w * inst.u ** ki * bi
    return w


def verify_instance(inst: PowerInstance, variant: str = "B",
                    length_cap: int = LENGTH_CAP) -> LemmaVerdict:
    hyp = check_hypothesis(inst, variant)
    trivial = not evaluate_w(inst, length_cap)
    index = next((i for i, bi in enumerate(inst.b) if commute(inst.u, bi)), None)
    if hyp and trivial and index is None:
        raise CounterexampleError(
            f"power lemma violated: u={inst.u} "
            f"b={[str(bi) for bi in inst.b]} k={list(inst.k)}")
    return LemmaVerdict(hyp, trivial, index)


@dataclass(frozen=True)
class SearchBounds:
    n_max: int = 3
    u_len_max: int = 4
    b_len_max: int = 6
    k_max: int = 400


@dataclass(frozen=True)
class SearchRow:
    trial: int
    n: int
    u_len: int
    threshold: Union[int, Fraction]
    min_k: int
    w_trivial: bool
    commuting_index: Optional[int]


@dataclass(frozen=True)
class SearchReport:
    rows: tuple
    probe_rows: tuple
    bounds: SearchBounds
    seed: int
    variant: str


def _primitive_pool(basis: Basis, len_max: int) -> list:
    return [w for w in ball(basis, len_max)
            if w and is_cyclically_reduced(w) and is_primitive(w)]


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    key = np.array([seed, trial], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _row(trial: int, inst: PowerInstance, variant: str) -> SearchRow:
    verdict = verify_instance(inst, variant)
    return SearchRow(trial, inst.n, len(inst.u),
                     hypothesis_threshold(inst, variant),
                     min(abs(ki) for ki in inst.k),
                     verdict.w_trivial, verdict.commuting_index)


def _probe_rows(basis: Basis, variant: str) -> list:
    # w = u^k (u^-k): trivial with commuting b_0, hypothesis inactive since
    # |b_0| = k|u| pushes the threshold past k
    cores = [(1,)]
    if basis.rank >= 2:
        cores += [(1, 2), (2, -1)]
    rows = []
    trial = 0
    for letters in cores:
        u = Word(basis, letters)
        for kk in (5, 20):
            trial -= 1
            inst = PowerInstance(u, (u ** -kk,), (kk,))
            rows.append(_row(trial, inst, variant))
    return rows


def search_counterexamples(seed: int, bounds: SearchBounds = SearchBounds(),
                           trials: int = 10 ** 4, variant: str = "B",
                           basis: Optional[Basis] = None) -> SearchReport:
    """Seeded random instances conditioned to satisfy the hypothesis.

    Unconditioned sampling almost never lands inside the hypothesis, so
    each |k_i| is drawn from the band just above the instance's threshold.
    Per-trial generators are derived from (seed, trial); trials are
    independent and the report is reproducible.  A deterministic probe
    battery of trivial-product instances (trial indices -1, -2, ...) is
    appended whenever trials > 0.
    """
    if basis is None:
        basis = Basis(("a", "b"))
    pool_u = _primitive_pool(basis, bounds.u_len_max)
    pool_b = list(ball(basis, bounds.b_len_max))
    rows = []
    for trial in range(trials):
        rng = _trial_rng(seed, trial)
        n = int(rng.integers(0, bounds.n_max + 1))
        u = pool_u[int(rng.integers(len(pool_u)))]
        bs = tuple(pool_b[int(rng.integers(len(pool_b)))] for _ in range(n + 1))
        t = hypothesis_threshold(PowerInstance(u, bs, (0,) * (n + 1)), variant)
        lo = int(t) + 1
        hi = max(bounds.k_max, lo + 10)
        ks = tuple(int(rng.integers(lo, hi + 1)) * (1 if rng.integers(2) else -1)
                   for _ in range(n + 1))
        rows.append(_row(trial, PowerInstance(u, bs, ks), variant))
    probe = tuple(_probe_rows(basis, variant)) if trials > 0 else ()
    return SearchReport(tuple(rows), probe, bounds, seed, variant)


def search_report_csv(report: SearchReport) -> str:
    lines = ["trial,n,|u|,threshold,min_k,w_trivial,commuting_index"]
    for row in (*report.rows, *report.probe_rows):
        ci = -1 if row.commuting_index is None else row.commuting_index
        lines.append(f"{row.trial},{row.n},{row.u_len},{row.threshold},"
                     f"{row.min_k},{int(row.w_trivial)},{ci}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SweepReport:
    checked: int
    trivial: int


def exhaustive_sweep(u_len_max: int = 3, b_len_max: int = 4, k_max: int = 60,
                     variant: str = "A", basis: Optional[Basis] = None) -> SweepReport:
    """Every n = 0 instance within the bounds, k ranging over [-k_max, k_max].

    Variant A's hypothesis is vacuous at n = 0, so every trivial product
    must exhibit commutation; any gap raises CounterexampleError.
    """
    if basis is None:
        basis = Basis(("a", "b"))
    checked = 0
    trivial = 0
    for u in _primitive_pool(basis, u_len_max):
        for b in ball(basis, b_len_max):
            for k in range(-k_max, k_max + 1):
                verdict = verify_instance(PowerInstance(u, (b,), (k,)), variant)
                checked += 1
                trivial += verdict.w_trivial
    return SweepReport(checked, trivial)
