import math

import numpy as np
import pytest

from residua.algebra import AlgebraElement
from residua.errors import InvariantViolationError, ZeroElementError
from residua.normbracket import NormBracket, bracket_report, sandwich
from residua.words import Basis, Word, ball

F1 = Basis(("a",))
F2 = Basis(("a", "b"))


def closed_walk_counts(k: int, tmax: int) -> list[int]:
    """Exact closed-walk counts on the 2k-regular tree, by distance profile.

    Independent of the convolution engines: plain integer recursion on the
    distance from the root, t steps, no group algebra involved.
    """
    f = [0] * (tmax + 2)
    f[0] = 1
    out = [1]
    for _ in range(tmax):
        g = [0] * (tmax + 2)
        for d, cnt in enumerate(f):
            if not cnt:
                continue
            g[d + 1] += cnt * (2 * k if d == 0 else 2 * k - 1)
            if d:
                g[d - 1] += cnt
        f = g
        out.append(f[0])
    return out


def gen_sum(basis: Basis) -> AlgebraElement:
    terms = []
    for i in range(1, basis.rank + 1):
        terms.append((Word(basis, (i,)), 1.0))
        terms.append((Word(basis, (-i,)), 1.0))
    return AlgebraElement.from_terms(basis, terms)


class TestWalkOracle:
    def test_frozen_counts(self):
        r = closed_walk_counts(2, 32)
        assert r[2] == 4
        assert r[4] == 28
        assert r[8] == 2092
        assert r[16] == 20275660
        assert r[32] == 3727578443380492

    def test_schedule_l2_matches_walks(self):
        # row j carries l2(c_j)^2 = closed walks of length 4m
        r = closed_walk_counts(2, 512)
        b = sandwich(gen_sum(F2), max_doublings=8)
        assert len(b.schedule) == 8
        for row in b.schedule:
            want = math.log(r[4 * row.m])
            got = 2 * math.log(row.l2)
            assert got == pytest.approx(want, rel=1e-6)

    def test_small_powers_match_dict_engine(self):
        r = closed_walk_counts(2, 16)
        b = sandwich(gen_sum(F2), max_doublings=3, engine="dict")
        for row in b.schedule:
            assert row.l2 ** 2 == pytest.approx(r[4 * row.m], rel=1e-9)


class TestKesten:
    def test_eight_doubling_bracket(self):
        b = sandwich(gen_sum(F2), max_doublings=8)
        assert b.lower == pytest.approx(3.411641, abs=2e-5)
        assert b.upper == pytest.approx(3.524391, abs=2e-5)
        assert b.lower <= 2 * math.sqrt(3) <= b.upper
        assert b.lower >= 3.0 and b.upper <= 4.1
        lows = [r.lower for r in b.schedule]
        assert all(x < y for x, y in zip(lows, lows[1:]))
        ups = [r.upper for r in b.schedule]
        assert all(x >= y for x, y in zip(ups, ups[1:]))
        assert not b.truncated and not b.heuristic

    def test_radii_double(self):
        b = sandwich(gen_sum(F2), max_doublings=6)
        assert [r.radius for r in b.schedule] == [2, 4, 8, 16, 32, 64]


class TestExamples:
    def test_point_mass_is_unitary(self):
        for g in ("", "a", "b a^-1 b"):
            b = sandwich(AlgebraElement.delta(F2, g), max_doublings=4)
            assert b.lower == pytest.approx(1.0, abs=1e-12)
            assert b.upper == pytest.approx(1.0, abs=1e-12)
            assert len(b.schedule) == 1  # target ratio 1 reached immediately

    def test_rank_one_two_point(self):
        a = AlgebraElement.from_terms(F1, [("", 1.0), ("a", 1.0)])
        b = sandwich(a, max_doublings=8)
        assert b.lower <= 2.0 <= b.upper
        assert b.upper == pytest.approx(2.0, abs=1e-12)  # l1 cap is sharp here
        assert b.lower > 1.98

    def test_zero_rejected(self):
        z = AlgebraElement(F2, {})
        with pytest.raises(ZeroElementError):
            sandwich(z)


class TestEngines:
    def radial_element(self, rng):
        terms = [(Word(F2, ()), float(rng.integers(1, 4)))]
        c = float(rng.integers(1, 4))
        for w in ball(F2, 1):
            if len(w) == 1:
                terms.append((w, c))
        return AlgebraElement.from_terms(F2, terms)

    def test_radial_matches_dict(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            a = self.radial_element(rng)
            br = sandwich(a, max_doublings=3, engine="radial")
            bd = sandwich(a, max_doublings=3, engine="dict")
            for x, y in zip(br.schedule, bd.schedule):
                assert (x.j, x.m, x.radius) == (y.j, y.m, y.radius)
                assert x.l2 == pytest.approx(y.l2, rel=1e-12)
                assert x.lower == pytest.approx(y.lower, rel=1e-12)
                assert x.upper == pytest.approx(y.upper, rel=1e-12)

    def test_radial_rejects_lopsided(self):
        a = AlgebraElement.from_terms(F2, [("a", 1.0), ("b", 2.0)])
        with pytest.raises(ValueError):
            sandwich(a, engine="radial")

    def test_truncation_flag(self):
        a = AlgebraElement.from_terms(
            F2, [("a", 1.0), ("b", 2.0), ("a b", 1.0), ("", 1.0)])
        b = sandwich(a, max_doublings=8, term_cap=2000)
        assert b.truncated
        assert 1 <= len(b.schedule) < 8
        assert b.lower <= b.upper


class TestRunInvariants:
    def rand_element(self, rng):
        terms = []
        for _ in range(4):
            n = int(rng.integers(0, 3))
            w = []
            for _ in range(n):
                x = int(rng.integers(1, 3)) * (1 if rng.integers(2) else -1)
                if w and x == -w[-1]:
                    x = -x
                w.append(x)
            terms.append((Word(F2, tuple(w)), complex(rng.normal(), rng.normal())))
        el = AlgebraElement.from_terms(F2, terms)
        return el if el else AlgebraElement.delta(F2, "a")

    def test_containment_chain(self):
        rng = np.random.default_rng(12)
        for _ in range(15):
            a = self.rand_element(rng)
            b = sandwich(a, max_doublings=4, term_cap=10**6)
            assert a.l2() <= b.lower + 1e-9 * b.upper
            assert b.lower <= b.upper <= b.l1_cap + 1e-12

    def test_scalar_homogeneity(self):
        rng = np.random.default_rng(13)
        a = self.rand_element(rng)
        b1 = sandwich(a, max_doublings=4, term_cap=10**6)
        b2 = sandwich((-2.5 + 1j) * a, max_doublings=4, term_cap=10**6)
        t = abs(-2.5 + 1j)
        assert b2.lower == pytest.approx(t * b1.lower, rel=1e-9)
        assert b2.upper == pytest.approx(t * b1.upper, rel=1e-9)

    def test_violation_error_wired(self):
        # forged schedule with a falling lower bound trips the run check
        from residua.normbracket import BracketRow, _check_run
        a = AlgebraElement.delta(F2, "a")
        fake = NormBracket(0.5, 1.0, 1.0, [
            BracketRow(1, 1, 1.0, 0, 1.0, 1.0),
            BracketRow(2, 2, 1.0, 0, 0.5, 1.0),
        ])
        with pytest.raises(InvariantViolationError):
            _check_run(a, fake)


class TestMatrixMode:
    def test_flagged_heuristic(self):
        m = np.array([[0, 1], [1, 0]], complex)
        a = AlgebraElement.from_terms(F2, [("a", m), ("a^-1", m)], matdim=2)
        b = sandwich(a, max_doublings=3)
        assert b.heuristic
        assert b.lower <= b.upper <= b.l1_cap + 1e-12
        assert b.l1_cap == pytest.approx(2.0)

    def test_scalar_not_flagged(self):
        b = sandwich(AlgebraElement.delta(F2, "a"))
        assert not b.heuristic


class TestReport:
    def test_header_only_when_empty(self):
        b = NormBracket(0.0, 0.0, 0.0, [])
        assert bracket_report(b) == "j,m,l2,radius,lower,upper\n"

    def test_single_row(self):
        b = sandwich(AlgebraElement.delta(F2, "a"), max_doublings=1)
        lines = bracket_report(b).splitlines()
        assert lines[0] == "j,m,l2,radius,lower,upper"
        assert len(lines) == 2
        assert lines[1].startswith("1,1,")

    def test_many_rows_parse_back(self):
        b = sandwich(gen_sum(F2), max_doublings=5)
        lines = bracket_report(b).splitlines()
        assert len(lines) == 6
        for row, ln in zip(b.schedule, lines[1:]):
            j, m, l2, radius, lower, upper = ln.split(",")
            assert (int(j), int(m), int(radius)) == (row.j, row.m, row.radius)
            assert float(l2) == row.l2
            assert float(lower) == row.lower and float(upper) == row.upper
