import itertools
from fractions import Fraction

import numpy as np
import pytest

from plmirelax.errors import CapExceeded, ConfigError, WrongFold
from plmirelax.matexpr import (
    AffineSymMatrix,
    PlmiSpec,
    VarRegistry,
    expr_add,
    expr_scale,
    fmat,
    make_example_spec,
)
from plmirelax.relax import (
    METHODS,
    amgm3_gated_terms,
    amgm4_gated_terms,
    amgm_gated_terms,
    canonicalize,
    count_constraints,
    delta_bit_count,
    delta_layout,
    gen_amgm,
    gen_amgm3,
    gen_amgm4,
    gen_kimlee2,
    gen_polya,
    gen_tuan,
    gen_vertex,
    generate,
    lmi_sets_equal,
    permsum,
)


def random_spec(q: int, r: int, dim: int = 2, seed: int = 0) -> PlmiSpec:
    """Integer-entry spec whose vertices depend on index order, so
    permutation sums do not collapse by accident."""
    rng = np.random.default_rng(seed)
    reg = VarRegistry()
    reg.add_scalar("x")
    reg.freeze()
    table = {}
    for idx in itertools.product(range(1, r + 1), repeat=q):
        c = rng.integers(-5, 6, size=(dim, dim))
        t = rng.integers(-3, 4, size=(dim, dim))
        table[idx] = AffineSymMatrix.build(
            reg, dim, fmat((c + c.T).tolist()), {0: fmat((t + t.T).tolist())}
        )
    return PlmiSpec(q, r, dim, reg, table.__getitem__)


class TestPermsum:
    def test_distinct_reorderings(self):
        spec = random_spec(3, 3)
        want = spec.vertex((1, 2, 2))
        want = expr_add(want, spec.vertex((2, 1, 2)))
        want = expr_add(want, spec.vertex((2, 2, 1)))
        assert permsum(spec, (1, 2, 2)) == want
        assert permsum(spec, (2, 2, 1)) == want

    def test_constant_tuple(self):
        spec = random_spec(2, 2)
        assert permsum(spec, (2, 2)) == spec.vertex((2, 2))


class TestVertexAndPolya:
    def test_counts(self):
        assert len(gen_vertex(make_example_spec(1, 1, q=2))) == 6
        assert len(gen_vertex(make_example_spec(1, 1, q=3))) == 10
        assert len(gen_polya(make_example_spec(1, 1, q=3))) == 10
        assert len(gen_polya(make_example_spec(1, 1, q=4))) == 15

    def test_single_fold_is_plain_vertices(self):
        spec = random_spec(1, 3)
        out = gen_vertex(spec)
        assert list(out) == [spec.vertex((i,)) for i in (1, 2, 3)]

    def test_polya_pair_constraint(self):
        spec = random_spec(2, 3, seed=3)
        out = canonicalize(gen_polya(spec))
        want = expr_add(spec.vertex((1, 2)), spec.vertex((2, 1)))
        assert any(c == want for c in out)

    def test_polya_needs_two_folds(self):
        with pytest.raises(WrongFold):
            gen_polya(random_spec(1, 3))

    def test_position_relabeling_invariance(self):
        spec = random_spec(3, 3, seed=7)
        table = {idx: spec.vertex(idx) for idx in spec.all_tuples()}
        rotated = PlmiSpec(
            3, 3, 2, spec.registry,
            lambda idx: table[(idx[1], idx[2], idx[0])],
        )
        assert lmi_sets_equal(gen_polya(spec), gen_polya(rotated))
        assert lmi_sets_equal(gen_vertex(spec), gen_vertex(rotated))

    def test_multiplicity_factor_in_provenance(self):
        out = gen_vertex(make_example_spec(1, 1, q=3))
        factors = {p[1]: p[2] for p in out.provenance}
        assert factors[(1, 1, 1)] == 6
        assert factors[(1, 2, 2)] == 2
        assert factors[(1, 2, 3)] == 1


class TestTuan:
    def test_count_and_structure(self):
        spec = make_example_spec(2, 3, q=2)
        out = gen_tuan(spec)
        assert len(out) == 9
        by_prov = dict(zip([p[1] for p in out.provenance], out.constraints))
        want_12 = expr_add(
            expr_add(spec.vertex((1, 1)), spec.vertex((1, 2))), spec.vertex((2, 1))
        )
        assert by_prov[(1, 2)] == want_12
        # the mirrored pair scales the other diagonal block
        want_21 = expr_add(
            expr_add(spec.vertex((2, 2)), spec.vertex((2, 1))), spec.vertex((1, 2))
        )
        assert by_prov[(2, 1)] == want_21
        assert by_prov[(1, 2)] != by_prov[(2, 1)]

    def test_r2_coefficient_is_two(self):
        spec = random_spec(2, 2, seed=1)
        out = gen_tuan(spec)
        by_prov = dict(zip([p[1] for p in out.provenance], out.constraints))
        want = expr_scale(spec.vertex((1, 1)), 2)
        want = expr_add(expr_add(want, spec.vertex((1, 2))), spec.vertex((2, 1)))
        assert by_prov[(1, 2)] == want

    def test_wrong_fold(self):
        with pytest.raises(WrongFold):
            gen_tuan(make_example_spec(0, 0, q=3))
        with pytest.raises(ConfigError):
            gen_tuan(random_spec(2, 1))


class TestKimLee2:
    def test_count(self):
        assert len(gen_kimlee2(make_example_spec(1, 1, q=2))) == 12

    def test_all_zero_gate_is_diagonal(self):
        spec = make_example_spec(3, 4, q=2)
        out = gen_kimlee2(spec)
        for c, p in zip(out.constraints, out.provenance):
            _, i1, bits = p
            if not any(bits):
                assert c == spec.vertex((i1, i1))

    def test_all_ones_gate(self):
        spec = make_example_spec(3, 4, q=2)
        out = gen_kimlee2(spec)
        half = Fraction(1, 2)
        want = spec.vertex((1, 1))
        for i2 in (2, 3):
            cross = expr_add(spec.vertex((1, i2)), spec.vertex((i2, 1)))
            want = expr_add(want, expr_scale(cross, half))
        got = [
            c
            for c, p in zip(out.constraints, out.provenance)
            if p[1] == 1 and all(p[2])
        ]
        assert got == [want]

    def test_wrong_fold(self):
        with pytest.raises(WrongFold):
            gen_kimlee2(make_example_spec(0, 0, q=4))


class TestDeltaLayout:
    def test_bit_counts(self):
        assert delta_bit_count(2, 3) == 2
        assert delta_bit_count(3, 3) == 4
        assert delta_bit_count(4, 3) == 6
        assert delta_bit_count(4, 4) == 18
        assert delta_bit_count(4, 2) == 2
        for r in (2, 3, 4, 5):
            assert delta_bit_count(2, r) == r - 1

    def test_layout_matches_count_and_order(self):
        for q, r in [(2, 3), (3, 3), (4, 3), (3, 4), (4, 4)]:
            keys, lams = delta_layout(q, r)
            assert len(keys) == delta_bit_count(q, r)
            assert list(keys) == sorted(keys)
        keys, lams = delta_layout(4, 3)
        assert lams[(2, 1)] == (3, 1, 0, 0)
        assert lams[(2, 2)] == (2, 2, 0, 0)
        assert lams[(3, 1)] == (2, 1, 1, 0)
        # the k = 4 family has no distinct tails at r = 3
        assert all(k <= 3 for k, _, _ in keys)


class TestAmgm:
    def test_counts(self):
        assert len(gen_amgm(make_example_spec(1, 1, q=3))) == 48
        assert len(gen_amgm(make_example_spec(1, 1, q=4))) == 192

    def test_all_zero_gate_is_head_diagonal(self):
        spec = make_example_spec(2, 5, q=3)
        out = gen_amgm(spec)
        seen = 0
        for c, p in zip(out.constraints, out.provenance):
            _, i1, delta = p
            if not any(delta.bits):
                assert c == spec.vertex((i1,) * 3)
                seen += 1
        assert seen == 3

    def test_three_fold_all_ones_structure(self):
        # head 1, every gate on: base + (1/3)(2P(112)+P(221))
        # + (1/3)(2P(113)+P(331)) + two copies of (1/6)P(123)
        spec = make_example_spec(1, 2, q=3)
        third, sixth = Fraction(1, 3), Fraction(1, 6)
        want = spec.vertex((1, 1, 1))
        for i2 in (2, 3):
            t = expr_add(
                expr_scale(permsum(spec, (1, 1, i2)), 2), permsum(spec, (i2, i2, 1))
            )
            want = expr_add(want, expr_scale(t, third))
        want = expr_add(want, expr_scale(permsum(spec, (1, 2, 3)), third))
        out = gen_amgm3(spec)
        got = [
            c
            for c, p in zip(out.constraints, out.provenance)
            if p[1] == 1 and all(p[2].bits)
        ]
        assert got == [want]
        assert permsum(spec, (1, 2, 3)) == permsum(spec, (1, 3, 2))

    def test_cap_exceeded_reports_count(self):
        spec = make_example_spec(0, 0, q=4)
        with pytest.raises(CapExceeded, match="192"):
            gen_amgm(spec, cap=100)

    def test_wrong_folds(self):
        with pytest.raises(WrongFold):
            gen_amgm(random_spec(1, 3))
        with pytest.raises(WrongFold):
            gen_amgm3(make_example_spec(0, 0, q=2))
        with pytest.raises(WrongFold):
            gen_amgm4(make_example_spec(0, 0, q=3))

    def test_provenance_parallels_constraints(self):
        out = gen_amgm(make_example_spec(1, 1, q=3))
        assert len(out.provenance) == len(out) == len(list(out))
        keys, _ = delta_layout(3, 3)
        for p in out.provenance:
            assert p[0] == "amgm" and p[2].keys == keys
            assert len(str(p[2])) == 4


class TestSpecialization:
    @pytest.mark.parametrize("r", [2, 3, 4])
    def test_two_fold_matches_gated_family(self, r):
        spec = random_spec(2, r, seed=10 + r)
        assert lmi_sets_equal(gen_amgm(spec), gen_kimlee2(spec))

    @pytest.mark.parametrize("r", [2, 3, 4])
    def test_three_fold_matches_transcription(self, r):
        spec = random_spec(3, r, seed=20 + r)
        assert lmi_sets_equal(gen_amgm(spec), gen_amgm3(spec))

    @pytest.mark.parametrize("r", [2, 3])
    def test_four_fold_matches_transcription(self, r):
        spec = random_spec(4, r, seed=30 + r)
        assert lmi_sets_equal(gen_amgm(spec), gen_amgm4(spec))

    def test_four_fold_r4_term_level(self):
        # full enumeration is 4 * 2^18 constraints; equality of the per-head
        # base and every gated term implies set equality for all gates
        spec = random_spec(4, 4, seed=34)
        for i1 in (1, 2, 3, 4):
            base_a, terms_a = amgm_gated_terms(spec, i1)
            base_b, terms_b = amgm4_gated_terms(spec, i1)
            assert base_a == base_b
            assert dict(terms_a) == dict(terms_b)
        for i1 in (1, 2, 3):
            spec3 = random_spec(3, 3, seed=35)
            base_a, terms_a = amgm_gated_terms(spec3, i1)
            base_b, terms_b = amgm3_gated_terms(spec3, i1)
            assert base_a == base_b
            assert dict(terms_a) == dict(terms_b)


class TestCanonicalize:
    def test_dedup_keeps_first_provenance(self):
        spec = random_spec(2, 2, seed=5)
        e = spec.vertex((1, 1))
        s = canonicalize(
            type(gen_vertex(spec))(
                spec.registry, [e, e], [("a",), ("b",)], "manual"
            )
        )
        assert len(s) == 1 and s.provenance == [("a",)]

    def test_idempotent_and_sorted(self):
        out = canonicalize(gen_amgm(make_example_spec(1, 1, q=3)))
        again = canonicalize(out)
        assert [c.key() for c in out] == [c.key() for c in again]
        keys = [c.key() for c in out]
        assert keys == sorted(keys)

    def test_registry_preserved(self):
        spec = make_example_spec(1, 1, q=2)
        out = canonicalize(gen_tuan(spec))
        assert out.registry is spec.registry
        assert out.method == "tuan"


class TestCounts:
    def test_closed_forms(self):
        assert count_constraints("vertex", 2, 3) == 6
        assert count_constraints("polya", 4, 3) == 15
        assert count_constraints("tuan", 2, 3) == 9
        assert count_constraints("kimlee2", 2, 2) == 4
        assert count_constraints("kimlee2", 2, 3) == 12
        assert count_constraints("amgm", 3, 3) == 48
        assert count_constraints("amgm", 4, 3) == 192
        assert count_constraints("amgm", 4, 4) == 4 * 2**18

    def test_agrees_with_enumeration(self):
        for q in range(1, 5):
            for r in range(2, 5):
                methods = ["vertex"]
                if q >= 2:
                    methods += ["polya", "amgm"]
                if q == 2:
                    methods += ["tuan", "kimlee2"]
                if q == 3:
                    methods.append("amgm3")
                if q == 4:
                    methods.append("amgm4")
                spec = random_spec(q, r, seed=q * 10 + r)
                for method in methods:
                    n = count_constraints(method, q, r)
                    if n > 5000:
                        continue
                    assert len(generate(spec, method)) == n, (method, q, r)

    def test_error_paths(self):
        with pytest.raises(WrongFold):
            count_constraints("tuan", 3, 3)
        with pytest.raises(WrongFold):
            count_constraints("polya", 1, 3)
        with pytest.raises(WrongFold):
            count_constraints("amgm3", 4, 3)
        with pytest.raises(ConfigError):
            count_constraints("slack", 2, 3)
        with pytest.raises(ConfigError):
            generate(make_example_spec(0, 0, q=2), "slack")

    def test_generate_dispatch(self):
        spec = make_example_spec(1, 1, q=2)
        for method in ("vertex", "tuan", "kimlee2", "polya", "amgm"):
            out = generate(spec, method)
            assert out.method == method
            assert len(out) == count_constraints(method, 2, 3)
        assert generate(make_example_spec(1, 1, q=3), "amgm3").method == "amgm3"
        assert generate(make_example_spec(1, 1, q=4), "amgm4").method == "amgm4"
        assert set(("vertex", "tuan", "kimlee2", "polya", "amgm")) <= set(METHODS)


class TestSharedRegistry:
    def test_constraints_share_spec_registry(self):
        spec = make_example_spec(1, 1, q=2)
        for method in ("vertex", "tuan", "kimlee2", "polya", "amgm"):
            out = generate(spec, method)
            assert out.registry is spec.registry
            assert all(c.registry is spec.registry for c in out)
            assert all(c.dim == spec.dim for c in out)
