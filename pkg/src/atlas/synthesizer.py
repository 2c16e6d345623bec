"""Abstraction-guided bottom-up synthesizer.

Programs are enumerated in rank order with a per-example abstract state
attached to every subprogram.  Closed subterms (the input leaf, constant
strings, and substring extractions of the input) are described by the
strongest conjunction the current domain can express about their concrete
value; concatenations are described by applying the learned transformer
table to their children's states.  A subprogram is dropped when its state
cannot describe any substring of some expected output (no completion could
then be consistent), and a complete candidate is accepted when every
expected output lies in the concretization of its state.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Optional

from . import dsl
from .dsl import AstNode, EvalError, Op, Program
from .domain import (
    AbstractValue,
    BOTTOM,
    ConstantPool,
    PredicateTemplate,
    StateLike,
    TemplateKind,
    best_abstraction,
    gamma_contains,
)
from .transformers import TransformerTable, apply_affine


@dataclass(frozen=True)
class SynthesisTask:
    examples: tuple[tuple[str, str], ...]
    max_ast_size: int = 14
    max_candidates: int = 200_000
    literals: tuple[str, ...] = ()
    timeout_ms: Optional[int] = None

    def __post_init__(self):
        if not self.examples:
            raise ValueError("a task needs at least one example")

    @property
    def inputs(self) -> tuple[str, ...]:
        return tuple(e[0] for e in self.examples)

    @property
    def outputs(self) -> tuple[str, ...]:
        return tuple(e[1] for e in self.examples)


def is_correct(p: Program, task: SynthesisTask) -> bool:
    for e_in, e_out in task.examples:
        try:
            if dsl.evaluate(p, e_in) != e_out:
                return False
        except EvalError:
            return False
    return True


# ---------------------------------------------------------------------------
# Transformer application


def _instantiate(template: PredicateTemplate, args):
    ints = []
    for v in args:
        if isinstance(v, Fraction):
            if v.denominator != 1:
                return None
            v = int(v)
        ints.append(v)
    if template.kind in (TemplateKind.CHAR_EQ, TemplateKind.CHAR_NEQ) and ints[0] < 0:
        return None
    return template.instantiate(tuple(ints))


@lru_cache(maxsize=4096)
def _used_arguments(transformer) -> tuple[bool, ...]:
    """Which arguments' holes feed some output matrix with a nonzero column.

    Arguments whose constants never reach an output can be collapsed to one
    representative conjunct when instantiating, which keeps application cost
    proportional to the useful selections.
    """
    holes = [t.holes for t in transformer.inputs]
    used = [False] * len(holes)
    offset = 0
    spans = []
    for h in holes:
        spans.append((offset, offset + h))
        offset += h
    for _, matrix in transformer.outputs:
        for row in matrix:
            for i, (lo, hi) in enumerate(spans):
                if any(row[c] != 0 for c in range(lo, hi)):
                    used[i] = True
    return tuple(used)


def apply_transformer(table: TransformerTable, op: str, arg_states: tuple[StateLike, ...]) -> StateLike:
    """Best output state derivable from the table for one construct.

    Every selection of one conjunct (or top) per argument is looked up;
    the instantiated outputs of all matching entries are met together.
    Missing entries contribute nothing (top).
    """
    if any(s is BOTTOM for s in arg_states):
        return BOTTOM

    by_kind: list[dict[TemplateKind, list]] = []
    for s in arg_states:
        groups: dict[TemplateKind, list] = {TemplateKind.TOP: [()]}
        for p in s.sorted_conjuncts():
            groups.setdefault(p.kind, []).append(p.args)
        by_kind.append(groups)

    derived = set()
    for (entry_op, kinds), transformer in table.entries.items():
        if entry_op != op or len(kinds) != len(arg_states) or not transformer.outputs:
            continue
        pools = []
        ok = True
        for groups, kind, used in zip(by_kind, kinds, _used_arguments(transformer)):
            if kind not in groups:
                ok = False
                break
            pools.append(groups[kind] if used else groups[kind][:1])
        if not ok:
            continue
        selections = [()]
        for pool in pools:
            selections = [sel + (args,) for sel in selections for args in pool]
        for sel in selections:
            vec = [v for args in sel for v in args]
            vec.append(1)
            for chi, matrix in transformer.outputs:
                pred = _instantiate(chi, apply_affine(matrix, vec))
                if pred is not None:
                    derived.add(pred)

    return AbstractValue.of(derived)


def abstract_eval(
    node: AstNode,
    e_in: str,
    templates: list[PredicateTemplate],
    table: TransformerTable,
    pool: ConstantPool,
) -> StateLike:
    """Abstract state of a program on one example input.

    Closed subterms are abstracted from their concrete value; open
    constructs go through the transformer table.
    """
    if node.op in (Op.INPUT, Op.CONST, Op.SUBSTR):
        value = dsl.eval_node(node, e_in)
        return best_abstraction(value, templates, pool)
    if node.op is Op.CONCAT:
        left = abstract_eval(node.children[0], e_in, templates, table, pool)
        right = abstract_eval(node.children[1], e_in, templates, table, pool)
        return apply_transformer(table, "concat", (left, right))
    raise ValueError(f"not a string node: {node.op}")


# ---------------------------------------------------------------------------
# Embedding test: can this state describe some substring of the output?


def _state_shape(state: AbstractValue):
    length = None
    pinned: dict[int, int] = {}
    neq_lens: set[int] = set()
    char_neqs: list[tuple[int, int]] = []
    for p in state.conjuncts:
        k = p.kind
        if k is TemplateKind.LEN_EQ:
            length = p.args[0]
        elif k is TemplateKind.LEN_NEQ:
            neq_lens.add(p.args[0])
        elif k is TemplateKind.CHAR_EQ:
            pinned[p.args[0]] = p.args[1]
        elif k is TemplateKind.CHAR_NEQ:
            char_neqs.append(p.args)
    return length, pinned, neq_lens, char_neqs


def state_embeds(state: StateLike, out: str) -> bool:
    """True iff some contiguous substring of ``out`` satisfies the state."""
    if state is BOTTOM:
        return False
    if not state.conjuncts:
        return True
    length, pinned, neq_lens, char_neqs = _state_shape(state)
    min_len = max(pinned) + 1 if pinned else 0
    for o in range(len(out) + 1):
        limit = len(out) - o
        if length is not None:
            candidates = [length] if min_len <= length <= limit and length not in neq_lens else []
        else:
            candidates = [n for n in range(min_len, limit + 1) if n not in neq_lens]
        if not candidates:
            continue
        if any(out[o + i] != chr(c) for i, c in pinned.items() if o + i < len(out)) or any(
            o + i >= len(out) for i in pinned
        ):
            continue
        for n in candidates:
            if all(i >= n or ord(out[o + i]) != c for i, c in char_neqs):
                return True
    return False


# ---------------------------------------------------------------------------
# The enumerator


@dataclass
class Candidate:
    node: AstNode
    values: tuple[str, ...]
    states: tuple[StateLike, ...]
    size: int


@dataclass
class SynthResult:
    program: Optional[Program]
    correct: Optional[bool]
    enumerated: int = 0
    pruned_abstract: int = 0
    deduped: int = 0
    reason: str = "found"
    wall_ms: int = 0


class Synthesizer:
    """Rank-ordered bottom-up enumerator over the string DSL."""

    def __init__(
        self,
        task: SynthesisTask,
        templates: list[PredicateTemplate],
        table: TransformerTable,
        check_soundness: bool = False,
        use_embedding_filter: bool = True,
    ):
        self.task = task
        self.templates = sorted(set(templates))
        self.table = table
        self.check_soundness = check_soundness
        self.use_embedding_filter = use_embedding_filter
        strings = list(task.inputs) + list(task.outputs)
        self.pool = ConstantPool.default(strings)
        self.consts = self._const_pool()
        self.positions = self._position_pool()
        self._abstraction_cache: dict[str, StateLike] = {}

    def _const_pool(self) -> list[str]:
        subs: set[str] = set(self.task.literals)
        for out in self.task.outputs:
            for i in range(len(out)):
                for j in range(i + 1, min(i + 6, len(out)) + 1):
                    subs.add(out[i:j])
        return sorted(s for s in subs if s)

    def _position_pool(self) -> list[AstNode]:
        max_len = max((len(s) for s in self.task.inputs + self.task.outputs), default=0)
        ks = list(range(0, min(12, max_len) + 1)) + [-1]
        positions = [dsl.abspos(k) for k in sorted(set(ks))]
        chars = sorted({ord(c) for s in self.task.inputs for c in s})
        for c in chars:
            for j in (1, 2, 3, -1, -2, -3):
                positions.append(dsl.cpos(c, j))
        positions.sort(key=dsl.rank_key)
        return positions

    def _abstract_value(self, value: str) -> StateLike:
        cached = self._abstraction_cache.get(value)
        if cached is None:
            cached = best_abstraction(value, self.templates, self.pool)
            self._abstraction_cache[value] = cached
        return cached

    def _leaf_candidate(self, node: AstNode) -> Optional[Candidate]:
        values = []
        for e_in in self.task.inputs:
            try:
                values.append(dsl.eval_node(node, e_in))
            except EvalError:
                return None
        states = tuple(self._abstract_value(v) for v in values)
        return Candidate(node, tuple(values), states, node.size)

    def _candidates(self) -> Iterator[tuple[Candidate, bool]]:
        """Yield (candidate, pooled_flag_placeholder) in rank order."""
        pools: dict[int, list[Candidate]] = {}

        def emit_batch(size: int) -> Iterator[Candidate]:
            if size == 1:
                cand = self._leaf_candidate(dsl.input_())
                if cand:
                    yield cand
                for s in self.consts:
                    cand = self._leaf_candidate(dsl.const(s))
                    if cand:
                        yield cand
                return
            for sa in range(1, size - 1):
                sb = size - 1 - sa
                for a in pools.get(sa, ()):
                    for b in pools.get(sb, ()):
                        node = dsl.concat(a.node, b.node)
                        values = tuple(va + vb for va, vb in zip(a.values, b.values))
                        states = tuple(
                            apply_transformer(self.table, "concat", (sa_state, sb_state))
                            for sa_state, sb_state in zip(a.states, b.states)
                        )
                        yield Candidate(node, values, states, size)
            if size == 4:
                for i, p1 in enumerate(self.positions):
                    for p2 in self.positions:
                        node = dsl.substr(dsl.input_(), p1, p2)
                        cand = self._leaf_candidate(node)
                        if cand:
                            yield cand

        for size in range(1, self.task.max_ast_size + 1):
            pools[size] = []
            for cand in emit_batch(size):
                keep = yield cand
                if keep:
                    pools[size].append(cand)

    def run(self, require_correct: bool = False) -> SynthResult:
        start = time.monotonic()
        deadline = None
        if self.task.timeout_ms is not None:
            deadline = start + self.task.timeout_ms / 1000.0
        outputs = self.task.outputs
        seen: set[tuple[str, ...]] = set()
        result = SynthResult(program=None, correct=None)

        gen = self._candidates()
        keep = None
        while True:
            try:
                cand = gen.send(keep)
            except StopIteration:
                result.reason = "exhausted"
                break
            keep = False
            result.enumerated += 1
            if result.enumerated > self.task.max_candidates:
                result.reason = "candidate-budget"
                break
            if deadline is not None and result.enumerated % 256 == 0 and time.monotonic() > deadline:
                result.reason = "timeout"
                break

            if cand.values in seen:
                result.deduped += 1
                continue
            seen.add(cand.values)

            if self.check_soundness:
                for v, st in zip(cand.values, cand.states):
                    assert gamma_contains(st, v), f"unsound state for {cand.node}"

            accepted = all(gamma_contains(st, out) for st, out in zip(cand.states, outputs))
            if accepted:
                if not require_correct or cand.values == outputs:
                    result.program = Program(cand.node)
                    result.correct = cand.values == outputs
                    result.reason = "found"
                    break

            if self.use_embedding_filter and not all(
                state_embeds(st, out) for st, out in zip(cand.states, outputs)
            ):
                result.pruned_abstract += 1
                continue
            keep = True

        result.wall_ms = int((time.monotonic() - start) * 1000)
        return result


def synthesize(
    task: SynthesisTask,
    templates: list[PredicateTemplate],
    table: TransformerTable,
    require_correct: bool = False,
    **kwargs,
) -> SynthResult:
    """Minimal-rank program consistent with the task under the abstraction.

    With ``require_correct`` the search continues past abstractly consistent
    but concretely wrong candidates until one matches the examples exactly.
    """
    return Synthesizer(task, templates, table, **kwargs).run(require_correct=require_correct)
