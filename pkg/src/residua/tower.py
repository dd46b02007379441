"""Iterated centralizer extensions over a free group.

A tower starts from a free basis and adjoins, level by level, a fresh stable
letter t that commutes with a chosen nonidentity word u (and hence with the
cyclic group it generates).  Height-1 towers get exact normal forms and an
equality decision; every tower gets retraction and twist maps, distortion
bookkeeping, and ball-certified separating maps into the base.

Words at level i live over the base names extended by the first i stable
letters, so letter tuples embed across levels unchanged.

The separating map is h = pi o tau^m per level, composed top down.  Rather
than trusting the choice of m, `discriminating_hom` always enumerates the
requested ball and checks images pairwise; at height 1 colliding images are
adjudicated with the exact equality oracle, so formal duplicates in the ball
pass while genuine collisions raise InjectivityError.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass

from .errors import (ContextMismatchError, DescriptorError, InjectivityError,
                     InvariantViolationError, ParseError, UsageError)
from .words import (BALL_CAP, Basis, Letters, Word, ball, cyclic_decompose,
                    inv_letters, mul_letters, parse_word, pow_letters)


def member_exponent(u: Word, v: Word) -> int | None:
    """The integer e with v = u^e, or None when v is no power of u.

    Powers of u share u's maximal conjugating prefix, have the same primitive
    core up to inversion, and a core exponent divisible by u's.
    """
    if not v:
        return 0
    if not u:
        return None
    du, dv = cyclic_decompose(u), cyclic_decompose(v)
    if dv.conjugator != du.conjugator:
        return None
    q, rem = divmod(dv.exponent, du.exponent)
    if rem:
        return None
    if dv.core == du.core:
        return q
    if dv.core.letters == inv_letters(du.core.letters):
        return -q
    return None


# -- descriptors ---------------------------------------------------------------


@dataclass(frozen=True)
class Level:
    """One extension step: stable letter t commuting with u; a (a power of u,
    default u itself) is the element the twist map appends to t."""

    u: Word
    t: str
    a: Word | None = None

    def __post_init__(self):
        if self.a is None:
            object.__setattr__(self, "a", self.u)


@dataclass(frozen=True)
class TowerDescriptor:
    base: Basis
    levels: tuple[Level, ...] = ()

    def __post_init__(self):
        names = list(self.base.names)
        for i, lv in enumerate(self.levels, start=1):
            if lv.t in names:
                raise DescriptorError(f"stable letter {lv.t!r} is not fresh")
            ctx = Basis(tuple(names))
            for label, w in (("u", lv.u), ("a", lv.a)):
                if w.basis != ctx:
                    raise DescriptorError(
                        f"level {i}: {label} must be a word over {ctx.names}")
            if not lv.u:
                raise DescriptorError(f"level {i}: u must be nonidentity")
            if not lv.a or member_exponent(lv.u, lv.a) is None:
                raise DescriptorError(
                    f"level {i}: a must be a nonzero power of u")
            names.append(lv.t)

    @property
    def height(self) -> int:
        return len(self.levels)

    def context(self, level: int) -> Basis:
        """Generators available after `level` extension steps."""
        if not 0 <= level <= self.height:
            raise DescriptorError(f"no level {level} in a height-{self.height} tower")
        return Basis(self.base.names + tuple(lv.t for lv in self.levels[:level]))

    @property
    def full_context(self) -> Basis:
        return self.context(self.height)

    def embed(self, w: Word) -> Word:
        """Rewrap a lower-level word in the full context."""
        full = self.full_context
        if w.basis == full:
            return w
        if w.basis.names != full.names[:w.basis.rank]:
            raise ContextMismatchError(
                f"{w.basis.names} is not an initial segment of {full.names}")
        return Word(full, w.letters)


@dataclass(frozen=True)
class SubgroupDescriptor:
    """A named finite generating set of words in the tower's full context."""

    names: tuple[str, ...]
    gens: tuple[Word, ...]

    def __post_init__(self):
        if not self.gens:
            raise DescriptorError("subgroup needs at least one generator")
        if len(self.names) != len(self.gens):
            raise DescriptorError("one name per generator")
        Basis(self.names)  # validates the names


# -- homomorphisms -------------------------------------------------------------


@dataclass
class Homomorphism:
    """A map between word contexts, given on generators by name.

    certified_radius, stretch, and m_per_level are filled in by
    discriminating_hom; plain maps leave them None.
    """

    domain: Basis
    codomain: Basis
    images: dict[str, Word]
    certified_radius: int | None = None
    stretch: int | None = None
    m_per_level: tuple[int, ...] | None = None

    def __post_init__(self):
        if set(self.images) != set(self.domain.names):
            raise DescriptorError("images must cover exactly the domain generators")
        for name, w in self.images.items():
            if w.basis != self.codomain:
                raise ContextMismatchError(
                    f"image of {name!r} is over {w.basis.names}, "
                    f"not {self.codomain.names}")
        self._fwd = [self.images[n].letters for n in self.domain.names]
        self._bwd = [inv_letters(x) for x in self._fwd]

    def apply_letters(self, letters: Letters) -> Letters:
        out: Letters = ()
        for x in letters:
            out = mul_letters(out, self._fwd[x - 1] if x > 0 else self._bwd[-x - 1])
        return out

    def apply(self, w: Word) -> Word:
        if w.basis != self.domain:
            raise ContextMismatchError(
                f"word over {w.basis.names}, domain is {self.domain.names}")
        return Word(self.codomain, self.apply_letters(w.letters))


def compose(outer: Homomorphism, inner: Homomorphism) -> Homomorphism:
    if inner.codomain != outer.domain:
        raise ContextMismatchError("composition contexts do not line up")
    return Homomorphism(inner.domain, outer.codomain,
                        {n: outer.apply(w) for n, w in inner.images.items()})


def identity_hom(basis: Basis) -> Homomorphism:
    return Homomorphism(basis, basis,
                        {n: Word(basis, (i + 1,)) for i, n in enumerate(basis.names)})


def retraction_pi(tower: TowerDescriptor, level: int) -> Homomorphism:
    """Kill the stable letter of `level`, fix everything below."""
    if not 1 <= level <= tower.height:
        raise DescriptorError(f"no level {level} in a height-{tower.height} tower")
    dom, cod = tower.context(level), tower.context(level - 1)
    images = {n: Word(cod, (i + 1,)) for i, n in enumerate(cod.names)}
    images[dom.names[-1]] = Word(cod, ())
    return Homomorphism(dom, cod, images)


def twist_tau(tower: TowerDescriptor, level: int, m: int) -> Homomorphism:
    """t -> t a^m at `level`, identity elsewhere; computed directly, not by
    composing m copies."""
    if not 1 <= level <= tower.height:
        raise DescriptorError(f"no level {level} in a height-{tower.height} tower")
    if m < 1:
        raise DescriptorError("twist exponent must be a positive integer")
    ctx = tower.context(level)
    images = {n: Word(ctx, (i + 1,)) for i, n in enumerate(ctx.names)}
    t_idx = len(ctx.names)
    images[ctx.names[-1]] = Word(
        ctx, mul_letters((t_idx,), pow_letters(tower.levels[level - 1].a.letters, m)))
    return Homomorphism(ctx, ctx, images)


# -- height-1 normal forms -------------------------------------------------------


@dataclass(frozen=True)
class Axial:
    """t^n u^alpha: the elements commuting with u."""

    n: int
    alpha: int


@dataclass(frozen=True)
class Alternating:
    """Product of t^{n_i} v_i blocks; interior n_i nonzero, interior v_i
    outside <u>, so a nonempty sequence is a nonidentity element."""

    blocks: tuple[tuple[int, Word], ...]


NormalForm = Axial | Alternating


def _require_height1(tower: TowerDescriptor) -> None:
    if tower.height != 1:
        raise UsageError(
            f"normal forms and equality are implemented for height-1 towers "
            f"only; this tower has height {tower.height}")


def normal_form_h1(tower: TowerDescriptor, w: Word) -> NormalForm:
    """Exact normal form of w in the height-1 extension.

    Blocks with a t-free middle inside <u> are pinched (t commutes past
    powers of u), zero t-powers merge their neighbours, and what remains is
    either axial or a reduced alternating sequence.
    """
    _require_height1(tower)
    w = tower.embed(w)
    base = tower.base
    u = tower.levels[0].u
    t_idx = base.rank + 1

    blocks: list[list] = [[0, ()]]
    for x in w.letters:
        if abs(x) == t_idx:
            if blocks[-1][1]:
                blocks.append([0, ()])
            blocks[-1][0] += 1 if x > 0 else -1
        else:
            blocks[-1][1] = blocks[-1][1] + (x,)

    def exp_of(letters: Letters) -> int | None:
        return member_exponent(u, Word(base, letters))

    changed = True
    while changed:
        changed = False
        j = 1
        while j < len(blocks):  # interior zero t-power joins the previous block
            if blocks[j][0] == 0:
                blocks[j - 1][1] = mul_letters(blocks[j - 1][1], blocks[j][1])
                del blocks[j]
                changed = True
            else:
                j += 1
        i = 0
        while i < len(blocks) - 1:  # pinch interior middles lying in <u>
            if exp_of(blocks[i][1]) is not None:
                blocks[i] = [blocks[i][0] + blocks[i + 1][0],
                             mul_letters(blocks[i][1], blocks[i + 1][1])]
                del blocks[i + 1]
                changed = True
            else:
                i += 1

    if len(blocks) == 1:
        n, v = blocks[0]
        e = exp_of(v)
        if e is not None:
            return Axial(n, e)
    return Alternating(tuple((n, Word(base, v)) for n, v in blocks))


def recompose_h1(tower: TowerDescriptor, nf: NormalForm) -> Word:
    """The tower word a normal form stands for."""
    _require_height1(tower)
    ctx = tower.full_context
    t_idx = ctx.rank
    if isinstance(nf, Axial):
        out = mul_letters(pow_letters((t_idx,), nf.n),
                          pow_letters(tower.levels[0].u.letters, nf.alpha))
        return Word(ctx, out)
    out: Letters = ()
    for n, v in nf.blocks:
        out = mul_letters(out, pow_letters((t_idx,), n))
        out = mul_letters(out, v.letters)
    return Word(ctx, out)


def equal_h1(tower: TowerDescriptor, w1: Word, w2: Word) -> bool:
    """Exact equality in the height-1 extension."""
    _require_height1(tower)
    w1, w2 = tower.embed(w1), tower.embed(w2)
    nf = normal_form_h1(tower, w1 * w2.inverse())
    return nf == Axial(0, 0)


# -- distortion bookkeeping ------------------------------------------------------


def degree(tower: TowerDescriptor) -> int:
    """Degree of the polynomial distortion bound at this height."""
    n = tower.height
    return 2 ** (n + 2) - 2 ** n - 2


def distortion_bound(tower: TowerDescriptor, r: int) -> int:
    """Upper bound for the distortion of a ball of radius r, exact integer.

    Height 0 is r itself; each level multiplies by (8r^2+4r) and squares the
    bound below at the enlarged radius 2(r+|a|).  Python integers make the
    evaluation exact at any height.
    """
    if r < 1:
        raise DescriptorError("radius must be a positive integer")
    if not tower.levels:
        return r
    lower = TowerDescriptor(tower.base, tower.levels[:-1])
    arg = 2 * (r + len(tower.levels[-1].a))
    return (8 * r * r + 4 * r) * distortion_bound(lower, arg) ** 2


# -- the separating map ------------------------------------------------------------


def _formula_m(tower: TowerDescriptor, level: int, r: int) -> int:
    below = TowerDescriptor(tower.base, tower.levels[:level - 1])
    arg = 2 * (r + len(tower.levels[level - 1].a))
    return (4 * r + 2) * 2 * distortion_bound(below, arg)


def _tower_map(tower: TowerDescriptor, ms: list[int]) -> Homomorphism:
    """pi o tau^m composed from the top level down; ms is indexed by level."""
    cur: Homomorphism | None = None
    for level in range(tower.height, 0, -1):
        step = compose(retraction_pi(tower, level),
                       twist_tau(tower, level, ms[level - 1]))
        cur = step if cur is None else compose(step, cur)
    return cur if cur is not None else identity_hom(tower.base)


def _check_relators(tower: TowerDescriptor, psi: Homomorphism) -> None:
    for i, lv in enumerate(tower.levels, start=1):
        t = tower.base.rank + i
        rel = mul_letters(mul_letters((t,), lv.u.letters),
                          mul_letters((-t,), inv_letters(lv.u.letters)))
        if psi.apply_letters(rel):
            raise InvariantViolationError(
                f"map does not kill the level-{i} commutation relator")


def _verify_on_ball(tower: TowerDescriptor, h: Homomorphism,
                    sigma: Homomorphism, formal_ball: list[Word]) -> int:
    """Pairwise-distinct image check over the formal ball; returns stretch.

    Ball order is deterministic, so the first offending pair is stable.  At
    height 1 a collision is excused iff the equality oracle says the two
    formal words name the same element; at height 0 image equality is element
    equality and nothing needs excusing.
    """
    images: dict[Letters, Word] = {}
    stretch = 0
    for fw in formal_ball:
        img = h.apply_letters(fw.letters)
        prev = images.setdefault(img, fw)
        stretch = max(stretch, len(img))
        if prev is fw or tower.height == 0:
            continue
        if tower.height == 1 and equal_h1(tower, sigma.apply(prev), sigma.apply(fw)):
            continue
        raise InjectivityError(
            f"distinct ball elements {str(prev)!r} and {str(fw)!r} "
            f"share the image {str(Word(h.codomain, img))!r}")
    return stretch


def discriminating_hom(tower: TowerDescriptor, Y: SubgroupDescriptor, r: int,
                       tight: bool = False, ball_cap: int = BALL_CAP) -> Homomorphism:
    """A map Y-words -> base that is verified injective on the radius-r ball.

    Twist exponents come from the closed formula per level; with tight=True
    the top level instead gets the smallest exponent that passes the same
    exhaustive check.  The result records certified_radius, the measured
    stretch, and the exponent used at each level.

    Collisions between formal Y-words naming the same tower element are
    filtered out at height <= 1; at height >= 2 no equality oracle exists, so
    any collision raises InjectivityError.
    """
    if r < 1:
        raise DescriptorError("radius must be a positive integer")
    full = tower.full_context
    for g in Y.gens:
        if g.basis != full:
            raise ContextMismatchError(
                f"subgroup generator over {g.basis.names}, tower context is "
                f"{full.names}")
    yb = Basis(Y.names)
    sigma = Homomorphism(yb, full, dict(zip(Y.names, Y.gens)))
    formal_ball = ball(yb, r, ball_cap)

    ms = [_formula_m(tower, level, r) for level in range(1, tower.height + 1)]

    def build(ms_used: list[int]) -> tuple[Homomorphism, int]:
        psi = _tower_map(tower, ms_used)
        _check_relators(tower, psi)
        h = compose(psi, sigma) if tower.height else sigma
        stretch = _verify_on_ball(tower, h, sigma, formal_ball)
        return h, stretch

    if tight and tower.height:
        top = tower.height - 1
        for cand in range(1, ms[top] + 1):
            try:
                h, stretch = build(ms[:top] + [cand])
            except InjectivityError:
                if cand == ms[top]:
                    raise
                continue
            ms = ms[:top] + [cand]
            break
    else:
        h, stretch = build(ms)

    h.certified_radius = r
    h.stretch = stretch
    h.m_per_level = tuple(ms)
    return h


# -- presets and the tower file format ---------------------------------------------


def preset_genus2() -> tuple[TowerDescriptor, SubgroupDescriptor]:
    """Rank-2 base, t commuting with the commutator [a,b]; the four subgroup
    generators a, b, t a t^-1, t b t^-1 satisfy the genus-2 surface relation."""
    base = Basis(("a", "b"))
    u = Word(base, (1, 2, -1, -2))
    tower = TowerDescriptor(base, (Level(u, "t"),))
    full = tower.full_context
    Y = SubgroupDescriptor(
        ("a", "b", "c", "d"),
        (Word(full, (1,)), Word(full, (2,)),
         Word(full, (3, 1, -3)), Word(full, (3, 2, -3))))
    return tower, Y


def preset_z2() -> tuple[TowerDescriptor, SubgroupDescriptor]:
    """Rank-1 base with t commuting with the generator: the free abelian
    plane, whose subgroup words collide formally all the time."""
    base = Basis(("a",))
    tower = TowerDescriptor(base, (Level(Word(base, (1,)), "t"),))
    full = tower.full_context
    Y = SubgroupDescriptor(("a", "t"), (Word(full, (1,)), Word(full, (2,))))
    return tower, Y


_LEVEL_FIELDS = ("u", "t", "a")


def parse_tower(text: str) -> tuple[TowerDescriptor, SubgroupDescriptor | None]:
    """Parse the tower file format.

    Lines are either full-line comments starting with '#', blank, a section
    header '[[level]]' or '[subgroup]', or 'key = value' with a Python string
    or list-of-strings literal on the right.  The preamble takes base = [...];
    each [[level]] takes u, t, and optionally a; [subgroup] takes gens.
    Unknown fields and malformed values are rejected.
    """
    base_names: list[str] | None = None
    level_rows: list[dict[str, str]] = []
    subgroup_row: dict[str, list[str]] | None = None
    section = "preamble"

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[[level]]":
            section = "level"
            level_rows.append({})
            continue
        if line == "[subgroup]":
            if subgroup_row is not None:
                raise ParseError(f"line {lineno}: duplicate [subgroup] section")
            section = "subgroup"
            subgroup_row = {}
            continue
        if line.startswith("["):
            raise ParseError(f"line {lineno}: unknown section {line!r}")
        key, eq, value = line.partition("=")
        key = key.strip()
        if not eq:
            raise ParseError(f"line {lineno}: expected 'key = value'")
        try:
            parsed = ast.literal_eval(value.strip())
        except (ValueError, SyntaxError):
            raise ParseError(f"line {lineno}: bad value for {key!r}") from None
        if section == "preamble":
            if key != "base":
                raise ParseError(f"line {lineno}: unknown field {key!r} before "
                                 "the first section")
            if base_names is not None:
                raise ParseError(f"line {lineno}: base given twice")
            if (not isinstance(parsed, list)
                    or not all(isinstance(s, str) for s in parsed)):
                raise ParseError(f"line {lineno}: base must be a list of names")
            base_names = parsed
        elif section == "level":
            if key not in _LEVEL_FIELDS:
                raise ParseError(f"line {lineno}: unknown level field {key!r}")
            if not isinstance(parsed, str):
                raise ParseError(f"line {lineno}: {key} must be a string")
            if key in level_rows[-1]:
                raise ParseError(f"line {lineno}: duplicate field {key!r}")
            level_rows[-1][key] = parsed
        else:
            if key != "gens":
                raise ParseError(f"line {lineno}: unknown subgroup field {key!r}")
            if (not isinstance(parsed, list) or not parsed
                    or not all(isinstance(s, str) for s in parsed)):
                raise ParseError(f"line {lineno}: gens must be a nonempty list "
                                 "of words")
            if "gens" in subgroup_row:
                raise ParseError(f"line {lineno}: duplicate field 'gens'")
            subgroup_row["gens"] = parsed

    if base_names is None:
        raise ParseError("missing 'base = [...]' line")
    base = Basis(tuple(base_names))

    levels = []
    names = list(base.names)
    for i, row in enumerate(level_rows, start=1):
        for need in ("u", "t"):
            if need not in row:
                raise ParseError(f"level {i}: missing field {need!r}")
        ctx = Basis(tuple(names))
        u = parse_word(ctx, row["u"])
        a = parse_word(ctx, row["a"]) if "a" in row else None
        levels.append(Level(u, row["t"], a))
        names.append(row["t"])
    tower = TowerDescriptor(base, tuple(levels))

    subgroup = None
    if subgroup_row is not None:
        if "gens" not in subgroup_row:
            raise ParseError("[subgroup] section missing 'gens'")
        full = tower.full_context
        gens = tuple(parse_word(full, s) for s in subgroup_row["gens"])
        names_y = tuple(f"y{i}" for i in range(1, len(gens) + 1))
        subgroup = SubgroupDescriptor(names_y, gens)
    return tower, subgroup
