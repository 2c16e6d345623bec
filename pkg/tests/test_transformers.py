from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from atlas.domain import (
    CHAR_EQ,
    CHAR_NEQ,
    ConstantPool,
    LEN_EQ,
    LEN_NEQ,
    TOP,
    TemplateKind,
    char_eq,
    gamma_contains,
    len_eq,
    len_neq,
    template_to_text,
)
from atlas.transformers import (
    Construct,
    ExampleSet,
    InsufficientRank,
    LearnConfig,
    SamplingOracle,
    TransformerTable,
    as_matrix,
    check_valid,
    column_rank,
    concat_construct,
    const_construct,
    generate_examples,
    learn_transformers,
    solve_linear,
    transformer_from_obj,
    transformer_to_obj,
)

POOL = ConstantPool.default(["CAV2018", "510.220.5586"])
CFG = LearnConfig()


def oracle(tag="t"):
    return SamplingOracle(0, "CAV2018510.-").child(tag)


class TestSolveLinear:
    def test_worked_system(self):
        p = solve_linear(as_matrix([[3, 2, 1], [1, 4, 1], [6, 4, 1]]), as_matrix([[5], [5], [10]]))
        assert p == ((Fraction(1), Fraction(1), Fraction(0)),)

    def test_inconsistent_is_null(self):
        assert solve_linear(as_matrix([[1]]), as_matrix([[2]])) is not None
        assert solve_linear(as_matrix([[1], [1]]), as_matrix([[2], [3]])) is None

    def test_constant_function(self):
        p = solve_linear(as_matrix([[0, 1]]), as_matrix([[7]]))
        assert p == ((Fraction(0), Fraction(7)),)

    def test_exactness_no_rounding(self):
        a = as_matrix([[2, 1], [5, 1]])
        b = as_matrix([[1], [2]])
        p = solve_linear(a, b)
        for row_a, row_b in zip(a, b):
            assert sum(x * y for x, y in zip(row_a, p[0])) == row_b[0]

    @given(
        st.lists(st.tuples(st.integers(-9, 9), st.integers(-9, 9)), min_size=1, max_size=6),
        st.integers(-5, 5),
        st.integers(-5, 5),
    )
    def test_recovers_planted_affine_map(self, points, m, c):
        a = as_matrix([[x, 1] for x, _ in points])
        b = as_matrix([[m * x + c] for x, _ in points])
        p = solve_linear(a, b)
        assert p is not None
        for row_a, row_b in zip(a, b):
            assert sum(x * y for x, y in zip(row_a, p[0])) == row_b[0]

    def test_column_rank(self):
        assert column_rank(as_matrix([[3, 2, 1], [1, 4, 1], [6, 4, 1]])) == 3
        assert column_rank(as_matrix([[1, 1], [2, 2]])) == 1


class TestSamplingOracle:
    def test_deterministic_given_seed(self):
        a = SamplingOracle(7, "xy")
        b = SamplingOracle(7, "xy")
        assert [a.draw_string() for _ in range(20)] == [b.draw_string() for _ in range(20)]

    def test_child_oracles_differ(self):
        a = SamplingOracle(7, "xy")
        assert a.child("one").draw_string(8) != a.child("two").draw_string(8)

    def test_finite_support(self):
        a = SamplingOracle(3, "ab")
        for _ in range(200):
            s = a.draw_string()
            assert len(s) <= 12 and set(s) <= set(a.alphabet)

    def test_conditioned_draws(self):
        a = SamplingOracle(3, "ab")
        assert len(a.draw_satisfying(len_eq(5))) == 5
        assert len(a.draw_satisfying(len_neq(4))) != 4
        s = a.draw_satisfying(char_eq(3, ord("z")))
        assert s[3] == "z"


class TestGenerateExamples:
    def test_concat_length_rows(self):
        ex = generate_examples(concat_construct(), LEN_EQ, (LEN_EQ, LEN_EQ), oracle(), CFG, POOL)
        assert ex.full_rank()
        for (p1, p2), p0 in ex.rows:
            assert p0.args[0] == p1.args[0] + p2.args[0]

    def test_counterfactual_rows_reach_full_rank(self):
        ex = generate_examples(concat_construct(), LEN_NEQ, (LEN_EQ, LEN_NEQ), oracle(), CFG, POOL)
        assert ex.full_rank()
        for (p1, p2), p0 in ex.rows:
            assert p0.args[0] == p1.args[0] + p2.args[0]

    def test_no_affine_function_insufficient_rank(self):
        with pytest.raises(InsufficientRank):
            generate_examples(concat_construct(), LEN_EQ, (LEN_NEQ, LEN_NEQ), oracle(), CFG, POOL)

    def test_rows_are_sound_instances(self):
        # Every generated row is itself checked against conditioned samples.
        ex = generate_examples(concat_construct(), LEN_EQ, (LEN_EQ, LEN_EQ), oracle(), CFG, POOL)
        check = oracle("recheck")
        for (p1, p2), p0 in ex.rows[:10]:
            for _ in range(50):
                a, b = check.draw_satisfying(p1), check.draw_satisfying(p2)
                assert gamma_contains(p0, a + b)


class TestCheckValid:
    def test_sum_matrix_is_valid(self):
        p = as_matrix([[1, 1, 0]])
        assert check_valid(concat_construct(), (LEN_EQ, LEN_EQ), LEN_EQ, p, oracle("v"), CFG, POOL)

    def test_projection_matrix_is_refuted(self):
        p = as_matrix([[1, 0, 0]])
        assert not check_valid(concat_construct(), (LEN_EQ, LEN_EQ), LEN_EQ, p, oracle("v"), CFG, POOL)

    def test_top_output_always_valid(self):
        assert check_valid(concat_construct(), (TOP, TOP), TOP, (), oracle("v"), CFG, POOL)

    def test_unsound_neq_pair_refuted(self):
        # len(y) != c1+c2 is unsound when both inputs are inequalities.
        p = as_matrix([[1, 1, 0]])
        assert not check_valid(concat_construct(), (LEN_NEQ, LEN_NEQ), LEN_NEQ, p, oracle("v"), CFG, POOL)


class TestLearnTransformers:
    def test_length_domain_table_matches_known_rows(self, table_a1):
        def outputs(*kinds):
            t = table_a1.lookup("concat", kinds)
            return {(chi.kind, m) for chi, m in t.outputs}

        one_one_zero = as_matrix([[1, 1, 0]])
        assert outputs(TemplateKind.LEN_EQ, TemplateKind.LEN_EQ) == {(TemplateKind.LEN_EQ, one_one_zero)}
        assert outputs(TemplateKind.LEN_EQ, TemplateKind.LEN_NEQ) == {(TemplateKind.LEN_NEQ, one_one_zero)}
        assert outputs(TemplateKind.LEN_NEQ, TemplateKind.LEN_EQ) == {(TemplateKind.LEN_NEQ, one_one_zero)}
        for kinds in [
            (TemplateKind.TOP, TemplateKind.TOP),
            (TemplateKind.TOP, TemplateKind.LEN_EQ),
            (TemplateKind.TOP, TemplateKind.LEN_NEQ),
            (TemplateKind.LEN_EQ, TemplateKind.TOP),
            (TemplateKind.LEN_NEQ, TemplateKind.TOP),
            (TemplateKind.LEN_NEQ, TemplateKind.LEN_NEQ),
        ]:
            assert table_a1.lookup("concat", kinds).outputs == ()

    def test_const_constant_function(self, learn_env):
        constructs, oracle_, pool = learn_env
        table = learn_transformers([const_construct("2018")], [TOP, LEN_EQ], oracle_, CFG, pool)
        t = table.lookup("const:2018", ())
        assert {(chi.kind, m) for chi, m in t.outputs} == {(TemplateKind.LEN_EQ, as_matrix([[4]]))}

    def test_char_domain_has_shift_row(self, table_a2):
        t = table_a2.lookup("concat", (TemplateKind.LEN_EQ, TemplateKind.CHAR_EQ))
        assert (CHAR_EQ, as_matrix([[1, 1, 0, 0], [0, 0, 1, 0]])) in t.outputs

    def test_same_seed_same_table(self, learn_env):
        constructs, _, pool = learn_env
        templates = [TOP, LEN_EQ, LEN_NEQ]
        t1 = learn_transformers([concat_construct()], templates, SamplingOracle(5, "ab"), CFG, pool)
        t2 = learn_transformers([concat_construct()], templates, SamplingOracle(5, "ab"), CFG, pool)
        assert [transformer_to_obj(x) for x in t1.all()] == [transformer_to_obj(x) for x in t2.all()]

    def test_every_slot_emitted(self, table_a1):
        kinds = [TemplateKind.TOP, TemplateKind.LEN_EQ, TemplateKind.LEN_NEQ]
        for k1 in kinds:
            for k2 in kinds:
                assert table_a1.lookup("concat", (k1, k2)) is not None


class TestSerialization:
    def test_round_trip(self, table_a1):
        for t in table_a1.all():
            assert transformer_from_obj(transformer_to_obj(t)) == t

    def test_matrix_pairs(self, table_a1):
        t = table_a1.lookup("concat", (TemplateKind.LEN_EQ, TemplateKind.LEN_EQ))
        obj = transformer_to_obj(t)
        assert obj["outputs"][0]["matrix"] == [[[1, 1], [1, 1], [0, 1]]]


class TestExampleSetMatrices:
    def test_shapes(self):
        ex = ExampleSet((LEN_EQ, LEN_EQ), LEN_EQ)
        ex.rows.append(((len_eq(3), len_eq(2)), len_eq(5)))
        assert ex.matrix_a() == [[Fraction(3), Fraction(2), Fraction(1)]]
        assert ex.matrix_b() == [[Fraction(5)]]
        assert ex.n_constants == 2
