"""Permutation representations and sparse operator-norm estimation.

Action convention (the usual source of order bugs): a permutation is stored
as an array p with position y sent to p[y], i.e. the 0-1 matrix P with
P e_y = e_{p[y]}.  A word is evaluated left to right by the fold
cur = cur[p_letter], which makes word concatenation match matrix products:
perm(vw) = perm(v)[perm(w)] and P_{vw} = P_v P_w.  Worked example on three
points: p_g = [1,2,0], p_h = [0,2,1] give perm(gh) = p_g[p_h] = [1,0,2].

The operator for a finitely supported element a is B = sum_w a(w) P_w,
applied as gathers: (B v)[x] = sum_w a(w) v[pinv_w[x]], adjoint with
conjugated coefficients and forward permutations.  B and B* both fix the
all-ones direction, so the mean-zero subspace is invariant; the mean is
still projected out every step to stop drift.  In matrix mode a(w) is an
r x r block, vectors are (N, r) arrays, and B v = sum_w v[pinv_w] @ a(w).T.

Randomness is counter-based (Philox) and splittable: a representation draw
is keyed (seed,), the power-iteration start vector (seed, 1), so runs are
replayable from a single 64-bit seed.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .algebra import AlgebraElement, pushforward
from .errors import ContextMismatchError, DescriptorError, UsageError
from .normbracket import TERM_CAP, sandwich
from .words import Basis, Word


@dataclass(frozen=True, eq=False)
class PermRep:
    context: Basis
    N: int
    images: dict

    def __post_init__(self):
        if self.N < 1:
            raise DescriptorError("degree must be positive")
        if set(self.images) != set(self.context.names):
            raise DescriptorError("images must cover exactly the context names")
        fixed = {}
        inverse = {}
        ident = np.arange(self.N)
        for name, p in self.images.items():
            arr = np.asarray(p, dtype=np.intp)
            if arr.shape != (self.N,) or not np.array_equal(np.sort(arr), ident):
                raise DescriptorError(f"image of {name!r} is not a bijection of {self.N} points")
            inv = np.empty(self.N, dtype=np.intp)
            inv[arr] = ident
            fixed[name] = arr
            inverse[name] = inv
        object.__setattr__(self, "images", fixed)
        object.__setattr__(self, "_inv", inverse)


def perm_of_word(rep: PermRep, w: Word) -> np.ndarray:
    if w.basis != rep.context:
        raise ContextMismatchError("word is over a different context than the representation")
    cur = np.arange(rep.N)
    for x in w.letters:
        name = rep.context.names[abs(x) - 1]
        cur = cur[rep.images[name] if x > 0 else rep._inv[name]]
    return cur


def random_free_rep(basis: Basis, N: int, seed: int) -> PermRep:
    """Independent uniform permutations, one per generator, keyed (seed,)."""
    if N < 2:
        raise DescriptorError("need at least two points")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    return PermRep(basis, N, {name: rng.permutation(N) for name in basis.names})


def induce_rep(phi, free_rep: PermRep) -> PermRep:
    """Push a homomorphism into a free group through a free representation."""
    if phi.codomain != free_rep.context:
        raise ContextMismatchError("codomain does not match the free representation")
    images = {name: perm_of_word(free_rep, phi.images[name])
              for name in phi.domain.names}
    return PermRep(phi.domain, free_rep.N, images)


@dataclass(frozen=True, eq=False)
class StdOperator:
    """sum_w a(w) P_w restricted to mean-zero vectors (tensored with C^r
    when a is matrix valued)."""

    element: AlgebraElement
    rep: PermRep

    def __post_init__(self):
        if self.element.basis != self.rep.context:
            raise ContextMismatchError("element and representation contexts differ")
        perms = []
        pinvs = []
        coefs = []
        for w, c in self.element.coef.items():
            p = perm_of_word(self.rep, Word(self.rep.context, w))
            inv = np.empty(self.rep.N, dtype=np.intp)
            inv[p] = np.arange(self.rep.N)
            perms.append(p)
            pinvs.append(inv)
            coefs.append(c)
        object.__setattr__(self, "_perms", perms)
        object.__setattr__(self, "_pinvs", pinvs)
        object.__setattr__(self, "_coefs", coefs)

    @property
    def shape(self) -> tuple:
        r = self.element.matdim
        return (self.rep.N,) if r is None else (self.rep.N, r)

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v)
        if self.element.matdim is None:
            for c, inv in zip(self._coefs, self._pinvs):
                out += c * v[inv]
        else:
            for c, inv in zip(self._coefs, self._pinvs):
                out += v[inv] @ c.T
        return out

    def apply_adjoint(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v)
        if self.element.matdim is None:
            for c, p in zip(self._coefs, self._perms):
                out += np.conjugate(c) * v[p]
        else:
            for c, p in zip(self._coefs, self._perms):
                out += v[p] @ np.conjugate(c)
        return out


@dataclass(frozen=True)
class OpNormEstimate:
    value: float
    converged: bool
    iterations: int


def _project(v: np.ndarray) -> np.ndarray:
    return v - v.mean(axis=0)


def op_norm(op: StdOperator, tol: float = 1e-9, max_iters: int = 10000,
            seed: int = 0) -> OpNormEstimate:
    """Largest singular value of the restricted operator by power iteration
    on B*B, tracked through the Rayleigh quotient until it stagnates."""
    if op.rep.N < 2:
        raise DescriptorError("mean-zero subspace is empty below two points")
    if not op.element.coef:
        return OpNormEstimate(0.0, True, 0)
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 1], dtype=np.uint64)))
    v = rng.standard_normal(op.shape) + 1j * rng.standard_normal(op.shape)
    v = _project(v)
    v /= np.linalg.norm(v)
    prev = None
    ray = 0.0
    for it in range(1, max_iters + 1):
        w = _project(op.apply(v))
        ray = float(np.linalg.norm(w) ** 2)
        u = _project(op.apply_adjoint(w))
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return OpNormEstimate(math.sqrt(ray), True, it)
        v = u / nu
        if prev is not None and abs(ray - prev) <= tol * max(ray, 1e-300):
            return OpNormEstimate(math.sqrt(ray), True, it)
        prev = ray
    return OpNormEstimate(math.sqrt(ray), False, max_iters)


@dataclass(frozen=True)
class ExperimentRow:
    N: int
    seed: int
    op_norm: float
    converged: bool
    reference_upper: float
    l1_cap: float


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple
    reference_upper: float
    l1_cap: float
    r_for_phi: int
    m_per_level: tuple


def strong_convergence_experiment(tower, Y, z: AlgebraElement,
                                  N_schedule: Sequence[int] = (100, 400, 1600),
                                  seeds: Sequence[int] = (0, 1, 2, 3, 4),
                                  r_for_phi: int = 2,
                                  tol: float = 1e-9, max_iters: int = 10000,
                                  term_cap: int = TERM_CAP) -> ExperimentReport:
    """Norms of random finite quotient actions against a fixed upper bound.

    The reference is computed once: z is pushed through a homomorphism
    certified injective on the ball of radius r_for_phi, and its image is
    bracketed in the free group.  z must therefore be supported within
    radius r_for_phi / 2, so products from z* z stay inside the certified
    ball.  Rows are (N, seed) cells, pure and deterministic, merged in
    schedule order.
    """
    from .tower import discriminating_hom  # local import keeps module load light

    h = discriminating_hom(tower, Y, r_for_phi)
    yb = Basis(Y.names)
    if z.basis != yb:
        raise ContextMismatchError("element is not over the subgroup generators")
    if z.coef and 2 * z.support_radius() > r_for_phi:
        raise UsageError("element support exceeds half the certified radius")
    pushed = pushforward(h, z)
    bracket = sandwich(pushed, term_cap=term_cap)
    upper = bracket.upper
    cap = pushed.l1()
    rows = []
    for N in N_schedule:
        for seed in seeds:
            free = random_free_rep(tower.base, N, seed)
            rep = induce_rep(h, free)
            est = op_norm(StdOperator(z, rep), tol=tol, max_iters=max_iters, seed=seed)
            rows.append(ExperimentRow(N, seed, est.value, est.converged, upper, cap))
    return ExperimentReport(tuple(rows), upper, cap, r_for_phi, h.m_per_level)


def experiment_csv(report: ExperimentReport) -> str:
    lines = ["N,seed,op_norm,converged,reference_upper,l1_cap"]
    for row in report.rows:
        lines.append(f"{row.N},{row.seed},{row.op_norm!r},{int(row.converged)},"
                     f"{row.reference_upper!r},{row.l1_cap!r}")
    return "\n".join(lines) + "\n"
