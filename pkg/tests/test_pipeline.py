import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from residua.algebra import AlgebraElement
from residua.errors import (ContextMismatchError, InjectivityError,
                            SizeLimitError, UsageError)
from residua.pipeline import (CSV_VERSION, certificate_csv, certificate_text,
                              certify, choose_m, net_mode, write_certificate)
from residua.tower import (SubgroupDescriptor, TowerDescriptor, preset_genus2,
                           preset_z2)
from residua.words import Basis, identity, parse_word

F2 = Basis(("a", "b"))


def height0():
    wa, wb = parse_word(F2, "a"), parse_word(F2, "b")
    return TowerDescriptor(F2, ()), SubgroupDescriptor(("a", "b"), (wa, wb))


def unit(basis, pairs):
    return AlgebraElement.from_terms(basis, pairs)


# -- independent oracles -------------------------------------------------------


def stack_reduce(letters):
    out = []
    for x in letters:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def naive_star(d):
    return {stack_reduce([-x for x in reversed(k)]): c.conjugate()
            for k, c in d.items()}


def naive_conv(d1, d2):
    out = {}
    for k1, c1 in d1.items():
        for k2, c2 in d2.items():
            k = stack_reduce(list(k1) + list(k2))
            out[k] = out.get(k, 0j) + c1 * c2
    return {k: c for k, c in out.items() if c != 0}


def naive_l2(d):
    return math.sqrt(sum(abs(c) ** 2 for c in d.values()))


def float_margin(m, C, D, R, eps):
    """Plain double-precision version of the choice margin."""
    return math.log1p(eps / 3) - 3 / (4 * m) * (math.log(C) + D * math.log(2 * m * R))


def brute_m(C, D, R, eps, cap=10 ** 6):
    for m in range(1, cap):
        if float_margin(m, C, D, R, eps) >= 0:
            return m
    raise AssertionError("scan cap hit")


# -- exponent choice -----------------------------------------------------------


class TestChooseM:
    def test_unit_case(self):
        # 2^(3/4) = 1.68... <= 2
        assert choose_m(1, 1, 1, 3.0) == 1
        assert 2 ** 0.75 <= 2.0

    @pytest.mark.parametrize("C,D,R,eps", [
        (1.0, 1, 1, 0.5),
        (961.0, 4, 1, 0.5),
        (10.0, 2, 3, 1.0),
        (1.0, 8, 1, 0.25),
        (1e6, 8, 5, 0.01),
        (2.5, 1, 1, 2.0),
    ])
    def test_matches_float_scan(self, C, D, R, eps):
        m = choose_m(C, D, R, eps)
        assert m == brute_m(C, D, R, eps)
        # margins for these inputs are far from zero, so the double-precision
        # definition check is meaningful
        assert float_margin(m, C, D, R, eps) >= 0
        if m > 1:
            assert float_margin(m - 1, C, D, R, eps) < 0

    def test_genus2_constants(self):
        assert choose_m(961.0, 4, 1, 0.5) == 144

    def test_monotone_in_eps(self):
        ms = [choose_m(961.0, 4, 1, eps) for eps in np.linspace(0.05, 3.0, 40)]
        assert all(a >= b for a, b in zip(ms, ms[1:]))

    def test_monotone_in_c(self):
        ms = [choose_m(C, 4, 1, 0.5) for C in (1, 10, 100, 1000, 10000)]
        assert all(a <= b for a, b in zip(ms, ms[1:]))

    def test_preconditions(self):
        with pytest.raises(UsageError):
            choose_m(0.5, 1, 1, 1.0)
        with pytest.raises(UsageError):
            choose_m(1.0, 0, 1, 1.0)
        with pytest.raises(UsageError):
            choose_m(1.0, 1, 0, 1.0)
        with pytest.raises(UsageError):
            choose_m(1.0, 1, 1, 0.0)


# -- certificates ---------------------------------------------------------------


@pytest.fixture(scope="module")
def genus2_cert():
    tower, Y = preset_genus2()
    yb = Basis(Y.names)
    de = AlgebraElement.delta(yb, "")
    qs = unit(yb, [(n, 0.25) for n in Y.names])
    near = unit(yb, [("a", 0.33), ("b", 0.17), ("c", 0.25), ("d", 0.25)])
    return certify(tower, Y, 1, 0.5, [de, qs, near]), (de, qs, near)


class TestCertifyGenus2:
    def test_measured_constants(self, genus2_cert):
        cert, _ = genus2_cert
        # image lengths by hand: at fit radius r the level exponent is
        # (4r+2)*2*2(r+4), so a single c stretches to 8m+1 and the longest
        # radius-2 word c^2 to 8m+2; the radius-3 value is c a c
        assert cert.stretch_samples == ((1, 961), (2, 1922), (3, 6275))
        assert cert.C_meas == 961.0
        assert cert.D == 4
        assert cert.m_theory == 144
        assert cert.mchoice_margin >= 0 > cert.mchoice_margin_prev

    def test_working_map(self, genus2_cert):
        cert, _ = genus2_cert
        assert cert.m == 2
        assert cert.phi.certified_radius == 4
        assert cert.phi.m_per_level == (576,)
        assert cert.phi.stretch == 9220
        assert len(cert.phi.images["c"]) == 8 * 576 + 1

    def test_delta_e_rows_are_flat(self, genus2_cert):
        cert, _ = genus2_cert
        rows = [r for r in cert.rows if r.element == 0]
        assert [r.mhat for r in rows] == [1, 2]
        for r in rows:
            assert (r.l2_of_power, r.supp_radius, r.haagerup_factor) == (1.0, 0, 1.0)
            assert r.norm_upper_free == r.proxy == r.l1 == 1.0
            assert r.final_slack == pytest.approx(0.5, abs=1e-15)

    def test_quarter_sum_rows_against_naive_route(self, genus2_cert):
        cert, (_, qs, _) = genus2_cert
        rows = [r for r in cert.rows if r.element == 1]
        assert len(rows) == 2
        # recompute in the subgroup letters with a throwaway convolution,
        # push supports through the map afterwards; valid because all the
        # support words turn out to have pairwise distinct images
        z = dict(qs.coef)
        step = naive_conv(naive_star(z), z)
        power = dict(step)
        for row in rows:
            if row.mhat == 2:
                power = naive_conv(power, step)
            images = {cert.phi.apply_letters(k) for k in power}
            assert len(images) == len(power)
            assert row.l2_of_power == pytest.approx(naive_l2(power), rel=1e-12)
            assert row.supp_radius == max(len(i) for i in images)
            assert row.haagerup_factor == pytest.approx(
                (row.supp_radius + 1) ** 1.5, rel=1e-12)
            route = (row.haagerup_factor * row.l2_of_power) ** (1 / (2 * row.mhat))
            assert row.norm_upper_free == pytest.approx(min(route, row.l1), rel=1e-12)
        proxies = {r.proxy for r in rows}
        assert proxies == {max(r.l2_of_power ** (1 / (2 * r.mhat)) for r in rows)}

    def test_slacks_nonnegative(self, genus2_cert):
        cert, _ = genus2_cert
        assert all(r.final_slack >= 0 for r in cert.rows)
        qs_rows = [r for r in cert.rows if r.element == 1]
        # upper bound clips at l1 = 1 for the working exponents, so the slack
        # is proxy + eps - 1, strictly inside (0, eps)
        assert 0 < qs_rows[0].final_slack < 0.5
        assert qs_rows[0].final_slack == pytest.approx(
            qs_rows[0].proxy + 0.5 - qs_rows[0].norm_upper_free)

    def test_chain_ordering(self, genus2_cert):
        cert, elements = genus2_cert
        for i, a in enumerate(elements):
            rows = [r for r in cert.rows if r.element == i]
            for r in rows:
                assert a.l2() <= r.proxy * (1 + 1e-9)
                assert r.proxy <= r.norm_upper_free * (1 + 1e-9)
                assert r.norm_upper_free <= r.l1 * (1 + 1e-9)

    def test_lipschitz_pair(self, genus2_cert):
        cert, (_, qs, near) = genus2_cert
        diff = (qs - near).l1()
        assert diff <= 0.5 / 3 + 1e-12
        u1 = min(r.norm_upper_free for r in cert.rows if r.element == 1)
        u2 = min(r.norm_upper_free for r in cert.rows if r.element == 2)
        assert abs(u1 - u2) <= 0.5 / 3 + 1e-12


class TestCertifyValidation:
    def test_bad_l1(self):
        tower, Y = height0()
        z = unit(F2, [("a", 0.5)])
        with pytest.raises(UsageError, match="l1 norm"):
            certify(tower, Y, 1, 0.5, [z])

    def test_support_too_wide(self):
        tower, Y = height0()
        z = unit(F2, [("a b", 1.0)])
        with pytest.raises(UsageError, match="radius"):
            certify(tower, Y, 1, 0.5, [z])

    def test_wrong_basis(self):
        tower, Y = height0()
        other = Basis(("x", "y"))
        z = AlgebraElement.delta(other, "x")
        with pytest.raises(ContextMismatchError):
            certify(tower, Y, 1, 0.5, [z])

    def test_matrix_mode_rejected(self):
        tower, Y = height0()
        z = AlgebraElement.from_terms(F2, [("a", np.eye(2))], matdim=2)
        with pytest.raises(UsageError, match="scalar"):
            certify(tower, Y, 1, 0.5, [z])

    def test_empty_elements(self):
        tower, Y = height0()
        with pytest.raises(UsageError, match="nothing"):
            certify(tower, Y, 1, 0.5, [])

    def test_bad_knobs(self):
        tower, Y = height0()
        z = AlgebraElement.delta(F2, "a")
        with pytest.raises(UsageError):
            certify(tower, Y, 0, 0.5, [z])
        with pytest.raises(UsageError):
            certify(tower, Y, 1, 0.0, [z])
        with pytest.raises(UsageError):
            certify(tower, Y, 1, 0.5, [z], m_work=0)
        with pytest.raises(UsageError):
            certify(tower, Y, 1, 0.5, [z], fit_radii=())

    def test_term_cap_propagates(self):
        tower, Y = height0()
        z = unit(F2, [("a", 0.25), ("a^-1", 0.25), ("b", 0.25), ("b^-1", 0.25)])
        with pytest.raises(SizeLimitError):
            certify(tower, Y, 1, 0.5, [z], term_cap=10)

    def test_injectivity_failure_propagates(self):
        # t commutes with a^2 but the subgroup keeps a itself, so images of
        # "a t" and "t a" collide while the elements differ
        base = Basis(("a",))
        from residua.tower import Level

        tower = TowerDescriptor(base, (Level(parse_word(base, "a^2"), "t"),))
        full = tower.full_context
        Y = SubgroupDescriptor(("a", "t"),
                               (parse_word(full, "a"), parse_word(full, "t")))
        z = AlgebraElement.delta(Basis(("a", "t")), "a")
        with pytest.raises(InjectivityError):
            certify(tower, Y, 1, 0.5, [z])


class TestCertifyHeight0:
    def test_identity_map_constants(self):
        tower, Y = height0()
        z = AlgebraElement.delta(F2, "")
        cert = certify(tower, Y, 1, 0.5, [z])
        # the separating map is the identity embedding, stretch r at radius r
        assert cert.stretch_samples == ((1, 1), (2, 2), (3, 3))
        assert cert.C_meas == 1.0
        assert cert.D == 1
        assert cert.m_theory == 18
        assert cert.phi.certified_radius == 4

    def test_z2_preset_runs(self):
        tower, Y = preset_z2()
        yb = Basis(Y.names)
        z = unit(yb, [("a", 0.5), ("t", 0.5)])
        cert = certify(tower, Y, 1, 0.75, [z])
        assert all(r.final_slack >= 0 for r in cert.rows)
        assert cert.phi.certified_radius == 4

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False,
                                       allow_infinity=False),
                    min_size=5, max_size=5))
    def test_chain_order_is_a_theorem(self, coeffs):
        # the slack sign is input-dependent, the chain ordering is not
        total = sum(abs(c) for c in coeffs)
        if total < 1e-3:
            return
        tower, Y = height0()
        words = ["", "a", "a^-1", "b", "b^-1"]
        z = unit(F2, [(w, c / total) for w, c in zip(words, coeffs)])
        if abs(z.l1() - 1) > 1e-10:
            return
        cert = certify(tower, Y, 1, 0.5, [z])
        for r in cert.rows:
            assert z.l2() <= r.proxy * (1 + 1e-9)
            assert r.proxy <= r.norm_upper_free * (1 + 1e-9)
            assert r.norm_upper_free <= r.l1 * (1 + 1e-9)


# -- serialization ---------------------------------------------------------------


class TestSerialization:
    def test_text_shape(self, genus2_cert):
        cert, _ = genus2_cert
        text = certificate_text(cert)
        lines = text.splitlines()
        assert lines[0].startswith("#")
        assert "proxy chain" in text
        assert "radius = 1" in lines
        assert "m_theory = 144" in lines
        assert "C_meas = 961.0" in lines
        assert "m_per_level = [576]" in lines
        assert text.count("[[stretch]]") == 3
        assert text.count("[[image]]") == 4
        assert "len = 4609" in text

    def test_csv_shape(self, genus2_cert):
        cert, _ = genus2_cert
        csv = certificate_csv(cert)
        lines = csv.splitlines()
        assert lines[0] == CSV_VERSION
        assert lines[1].split(",") == [
            "element", "mhat", "l2_of_power", "supp_radius", "haagerup_factor",
            "norm_upper_free", "proxy", "l1", "final_slack"]
        assert len(lines) == 2 + len(cert.rows)
        for ln, row in zip(lines[2:], cert.rows):
            parts = ln.split(",")
            assert int(parts[0]) == row.element
            assert float(parts[2]) == row.l2_of_power
            assert float(parts[8]) == row.final_slack

    def test_rerun_is_byte_identical(self):
        tower, Y = preset_genus2()
        yb = Basis(Y.names)
        qs = unit(yb, [(n, 0.25) for n in Y.names])
        a = certify(tower, Y, 1, 0.5, [qs])
        b = certify(tower, Y, 1, 0.5, [qs])
        assert certificate_csv(a) == certificate_csv(b)
        assert certificate_text(a) == certificate_text(b)

    def test_write_certificate(self, genus2_cert, tmp_path):
        cert, _ = genus2_cert
        txt, csv = write_certificate(cert, tmp_path / "run1")
        assert txt.name == "run1.txt" and csv.name == "run1.csv"
        assert txt.read_text(encoding="utf-8") == certificate_text(cert)
        assert csv.read_text(encoding="utf-8") == certificate_csv(cert)


# -- nets -----------------------------------------------------------------------


class TestNetMode:
    def test_singleton_support(self):
        net = net_mode(0, 1.5, [identity(F2)])
        assert len(net) == 1
        assert net[0] == AlgebraElement.delta(F2, "")

    def test_size_matches_counting_bound(self):
        wa, wb = parse_word(F2, "a"), parse_word(F2, "b")
        net = net_mode(1, 1.5, [wa, wb])
        # M = ceil(6/1.5) = 4 magnitude cells, P = ceil(12pi/1.5) = 26 phases
        assert len(net) == math.comb(5, 1) * 26 == 130
        assert all(abs(z.l1() - 1) < 1e-12 for z in net)

    def test_three_word_count(self):
        ws = [identity(F2), parse_word(F2, "a"), parse_word(F2, "b")]
        net = net_mode(1, 3.0, ws)
        # M = ceil(12/3) = 4, P = ceil(4pi) = 13
        assert len(net) == math.comb(6, 2) * 13 ** 2

    def test_determinism(self):
        wa, wb = parse_word(F2, "a"), parse_word(F2, "b")
        assert net_mode(1, 1.5, [wa, wb]) == net_mode(1, 1.5, [wa, wb])

    def test_covers_random_probes(self):
        ws = [identity(F2), parse_word(F2, "a"), parse_word(F2, "b")]
        eps = 1.2
        net = net_mode(1, eps, ws)
        mat = np.array([[z.coefficient(w) for w in ws] for z in net])
        rng = np.random.default_rng(2024)
        for _ in range(200):
            v = rng.normal(size=3) + 1j * rng.normal(size=3)
            v /= np.abs(v).sum()
            if abs(v[0]) > 1e-12:
                v = v / (v[0] / abs(v[0]))  # move onto the first-coordinate slice
            dist = np.abs(mat - v).sum(axis=1).min()
            assert dist <= eps / 3 + 1e-12

    def test_net_points_certify_cleanly(self):
        tower, Y = height0()
        wa, wb = parse_word(F2, "a"), parse_word(F2, "b")
        net = net_mode(1, 3.0, [wa, wb])
        cert = certify(tower, Y, 1, 0.5, net)
        assert len(cert.rows) == 2 * len(net)
        assert all(r.final_slack >= 0 for r in cert.rows)

    def test_validation(self):
        wa, wb = parse_word(F2, "a"), parse_word(F2, "b")
        with pytest.raises(UsageError, match="support too large"):
            net_mode(2, 1.0, [wa, wb, parse_word(F2, "a b"), identity(F2)])
        with pytest.raises(UsageError, match="distinct"):
            net_mode(1, 1.0, [wa, wa])
        with pytest.raises(UsageError, match="longer than"):
            net_mode(1, 1.0, [parse_word(F2, "a b")])
        with pytest.raises(UsageError):
            net_mode(1, 0.0, [wa])
        with pytest.raises(UsageError, match="empty"):
            net_mode(1, 1.0, [])
        with pytest.raises(ContextMismatchError):
            net_mode(1, 1.0, [wa, parse_word(Basis(("x", "y")), "x")])
