import pytest

from atlas.domain import (
    AbstractValue,
    BOTTOM,
    CHAR_EQ,
    CHAR_NEQ,
    ConstantPool,
    LEN_EQ,
    LEN_NEQ,
    TOP,
    char_eq,
    char_neq,
    gamma_contains,
    len_eq,
    len_neq,
)
from atlas.dsl import Program, concat, const, evaluate, input_, parse_program, print_program
from atlas.synthesizer import (
    SynthesisTask,
    Synthesizer,
    abstract_eval,
    apply_transformer,
    is_correct,
    state_embeds,
    synthesize,
)
from atlas.transformers import concat_construct, top_table

from conftest import E1, E2, E3


def val(*preds):
    return AbstractValue(frozenset(preds))


class TestApplyTransformer:
    def test_length_sum(self, table_a1):
        got = apply_transformer(table_a1, "concat", (val(len_eq(3)), val(len_eq(2))))
        assert len_eq(5) in got.conjuncts

    def test_top_argument_gives_top(self, table_a1):
        got = apply_transformer(table_a1, "concat", (AbstractValue.top(), val(len_eq(2))))
        assert got == AbstractValue.top()

    def test_neq_row(self, table_a1):
        got = apply_transformer(table_a1, "concat", (val(len_eq(3)), val(len_neq(2))))
        assert got.conjuncts == {len_neq(5)}

    def test_missing_entry_behaves_as_top(self, table_a1):
        got = apply_transformer(table_a1, "unknown-op", (val(len_eq(1)),))
        assert got == AbstractValue.top()

    def test_bottom_propagates(self, table_a1):
        assert apply_transformer(table_a1, "concat", (BOTTOM, val(len_eq(1)))) is BOTTOM

    def test_conjunctions_apply_per_conjunct(self, table_a2):
        left = val(len_eq(2), char_eq(0, ord("a")))
        right = val(len_eq(3), char_eq(1, ord("z")))
        got = apply_transformer(table_a2, "concat", (left, right))
        assert len_eq(5) in got.conjuncts
        assert char_eq(0, ord("a")) in got.conjuncts  # left projection
        assert char_eq(3, ord("z")) in got.conjuncts  # shifted by left length


class TestAbstractEval:
    def test_suffix_program_tracks_length(self, table_a1):
        p = parse_program('(concat (input) (const "2018"))')
        pool = ConstantPool.default(["CAV", "CAV2018"])
        state = abstract_eval(p.root, "CAV", [TOP, LEN_EQ, LEN_NEQ], table_a1, pool)
        assert len_eq(7) in state.conjuncts
        assert gamma_contains(state, "CAV2018")

    def test_closed_substr_is_exact(self, table_a2):
        p = parse_program("(substr (input) (abspos 0) (cpos 92 -1))")
        pool = ConstantPool.default(["\\a\\b.c"])
        state = abstract_eval(p.root, "\\a\\b.c", [TOP, LEN_EQ, CHAR_EQ], table_a2, pool)
        assert len_eq(3) in state.conjuncts  # the window is "\a\"
        assert char_eq(0, ord("\\")) in state.conjuncts


class TestStateEmbeds:
    def test_top_embeds_everywhere(self):
        assert state_embeds(AbstractValue.top(), "")

    def test_bottom_never_embeds(self):
        assert not state_embeds(BOTTOM, "anything")

    def test_length_too_long(self):
        assert not state_embeds(val(len_eq(9)), "short")

    def test_pinned_chars_must_occur(self):
        assert state_embeds(val(char_eq(0, ord("b"))), "abc")
        assert not state_embeds(val(char_eq(0, ord("z"))), "abc")

    def test_pinned_window(self):
        assert state_embeds(val(len_eq(2), char_eq(0, ord("b")), char_eq(1, ord("c"))), "abc")
        assert not state_embeds(val(len_eq(2), char_eq(0, ord("c")), char_eq(1, ord("b"))), "abc")

    def test_char_neq_blocks_full_pins(self):
        # Every substring of "aa" of length 1 is "a".
        assert not state_embeds(val(len_eq(1), char_neq(0, ord("a"))), "aa")
        assert state_embeds(val(len_eq(1), char_neq(0, ord("a"))), "ab")

    def test_embedding_is_sound_for_solution_parts(self):
        # Any fact set of a true substring embeds.
        out = "CAV2018"
        for i in range(len(out)):
            for j in range(i, len(out) + 1):
                sub = out[i:j]
                state = val(len_eq(len(sub)), *(char_eq(k, ord(c)) for k, c in enumerate(sub)))
                assert state_embeds(state, out)


class TestSynthesize:
    def test_e1_with_length_domain(self, table_a1):
        result = synthesize(E1, [TOP, LEN_EQ, LEN_NEQ], table_a1, require_correct=False)
        assert result.program is not None
        # Concretely equivalent to appending "2018" on every training input.
        for e_in, e_out in E1.examples:
            assert evaluate(result.program, e_in) == e_out
        state = abstract_eval(
            result.program.root, "CAV", [TOP, LEN_EQ, LEN_NEQ], table_a1,
            ConstantPool.default(["CAV", "CAV2018"]),
        )
        assert len_eq(7) in state.conjuncts

    def test_top_domain_returns_minimal_possibly_spurious(self):
        table = top_table([concat_construct()])
        result = synthesize(E1, [TOP], table, require_correct=False)
        assert print_program(result.program) == "(input)"
        assert not is_correct(result.program, E1)

    def test_unsatisfiable_task_returns_null(self, table_a1):
        # A 13-char output cannot be assembled from two pool constants of at
        # most 6 chars, and the input shares no substring with it, so the
        # bounded search must exhaust.
        task = SynthesisTask(examples=(("ab", "QRSTUVWXYZ123"),), max_ast_size=3, max_candidates=5000)
        result = synthesize(task, [TOP, LEN_EQ, LEN_NEQ], table_a1, require_correct=True)
        assert result.program is None
        assert result.reason in ("exhausted", "candidate-budget")

    def test_checked_mode_solves_e2(self, table_a2):
        result = synthesize(E2, [TOP, LEN_EQ, LEN_NEQ, CHAR_EQ, CHAR_NEQ], table_a2, require_correct=True)
        assert result.correct
        assert is_correct(result.program, E2)

    def test_e3_first_accepted_is_correct(self, table_a2):
        result = synthesize(E3, [TOP, LEN_EQ, LEN_NEQ, CHAR_EQ, CHAR_NEQ], table_a2, require_correct=False)
        assert is_correct(result.program, E3)
        assert print_program(result.program) == "(substr (input) (abspos 0) (cpos 92 -1))"


class TestIsCorrect:
    def test_correct_program(self):
        assert is_correct(Program(concat(input_(), const("2018"))), E1)

    def test_wrong_program(self):
        assert not is_correct(Program(concat(input_(), const("18"))), E1)

    def test_identity(self):
        task = SynthesisTask(examples=(("a", "a"),))
        assert is_correct(Program(input_()), task)

    def test_eval_error_counts_as_incorrect(self):
        p = parse_program("(substr (input) (abspos 5) (abspos 9))")
        assert not is_correct(p, SynthesisTask(examples=(("ab", "ab"),)))


class TestEnumeratorProperties:
    def test_abstract_soundness_during_enumeration(self, table_a2):
        task = SynthesisTask(examples=E2.examples, max_candidates=3000)
        synth = Synthesizer(task, [TOP, LEN_EQ, LEN_NEQ, CHAR_EQ, CHAR_NEQ], table_a2, check_soundness=True)
        result = synth.run(require_correct=True)
        assert result.correct

    def test_prune_safety_same_program_with_filter_off(self, table_a2):
        templates = [TOP, LEN_EQ, LEN_NEQ, CHAR_EQ, CHAR_NEQ]
        for task in (E1, E2):
            on = Synthesizer(task, templates, table_a2, use_embedding_filter=True).run(require_correct=True)
            off = Synthesizer(task, templates, table_a2, use_embedding_filter=False).run(require_correct=True)
            assert on.program == off.program
            assert on.correct and off.correct

    def test_monotone_pruning(self, table_a1, table_a2):
        # A richer domain never enumerates more candidates on a fixed task.
        task = SynthesisTask(examples=(("notes.txt", "txt!"), ("img.jpeg", "jpeg!")))
        rich = Synthesizer(task, [TOP, LEN_EQ, LEN_NEQ, CHAR_EQ, CHAR_NEQ], table_a2).run(require_correct=True)
        poor = Synthesizer(task, [TOP, LEN_EQ, LEN_NEQ], table_a1).run(require_correct=True)
        baseline = Synthesizer(task, [TOP], top_table([concat_construct()])).run(require_correct=True)
        assert rich.correct and poor.correct and baseline.correct
        assert rich.enumerated <= poor.enumerated <= baseline.enumerated

    def test_dedup_counts(self, table_a2):
        # The substring wave on E3 revisits many value-equal windows.
        result = synthesize(E3, [TOP, LEN_EQ, LEN_NEQ, CHAR_EQ, CHAR_NEQ], table_a2, require_correct=True)
        assert result.deduped > 0

    def test_minimal_rank_no_smaller_consistent_program(self, table_a1):
        # Deterministic ranking contract: nothing before the returned program
        # is abstractly consistent.
        templates = [TOP, LEN_EQ, LEN_NEQ]
        result = synthesize(E1, templates, table_a1, require_correct=False)
        synth = Synthesizer(E1, templates, table_a1)
        gen = synth._candidates()
        keep = None
        while True:
            cand = gen.send(keep)
            keep = True
            if cand.node == result.program.root:
                break
            assert not all(
                gamma_contains(st, out) for st, out in zip(cand.states, E1.outputs)
            )
