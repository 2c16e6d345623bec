"""Top-level training loop.

Starting from the trivial domain, each training problem is attempted with
the current abstraction; a spurious result is interpolated into new
predicate templates, the transformer table is rebuilt, and the problem is
retried.  The loop per problem ends on a correct program (or a null result
from the synthesizer), with an iteration cap guarding against non-progress.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from .domain import ConstantPool, PredicateTemplate, TOP
from .dsl import Program, print_program
from .interpolation import learn_abstract_domain
from .synthesizer import SynthesisTask, Synthesizer, is_correct
from .transformers import (
    Construct,
    LearnConfig,
    SamplingOracle,
    TransformerTable,
    concat_construct,
    const_construct,
    learn_transformers,
    top_table,
)


@dataclass
class TrainConfig:
    seed: int = 0
    max_iterations_per_problem: int = 25
    max_ast_size: int = 14
    max_candidates: int = 200_000
    learn: LearnConfig = field(default_factory=LearnConfig)


class NonProgress(Exception):
    """Iteration cap hit: refinement stopped rejecting the returned programs."""


@dataclass
class IterationRecord:
    problem: str
    iteration: int
    program: Program
    correct: bool
    violated_example: Optional[tuple[str, str]]
    templates_added: list[PredicateTemplate]
    table_size: int
    enumerated: int
    # Abstraction state after this iteration's refinement (for the spurious
    # case this is the abstraction that must reject the program).
    templates_after: list[PredicateTemplate] = field(default_factory=list)
    table_after: Optional[TransformerTable] = None


@dataclass
class ProblemReport:
    problem: str
    iterations: int
    templates_added: list[str]
    table_size: int
    t_ags_ms: int = 0
    t_domain_ms: int = 0
    t_transformers_ms: int = 0
    diagnostic: Optional[str] = None


@dataclass
class TrainingRun:
    templates: list[PredicateTemplate]
    table: TransformerTable
    history: list[IterationRecord]
    reports: list[ProblemReport]
    diagnostics: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.diagnostics


def training_constructs(tasks: list[tuple[str, SynthesisTask]]) -> list[Construct]:
    """Concat plus one nullary construct per constant literal in scope."""
    literals: set[str] = set()
    for _, task in tasks:
        for out in task.outputs:
            for i in range(len(out)):
                for j in range(i + 1, min(i + 6, len(out)) + 1):
                    literals.add(out[i:j])
        literals.update(task.literals)
    constructs = [concat_construct()]
    constructs.extend(const_construct(s) for s in sorted(literals))
    return constructs


def corpus_alphabet(tasks: list[tuple[str, SynthesisTask]]) -> str:
    chars = set()
    for _, task in tasks:
        for s in list(task.inputs) + list(task.outputs):
            chars.update(s)
    return "".join(sorted(chars))


def learn_abstractions(
    problems: list[tuple[str, SynthesisTask]],
    cfg: TrainConfig,
) -> TrainingRun:
    """Run the full training loop over the given problems in order."""
    constructs = training_constructs(problems)
    alphabet = corpus_alphabet(problems)
    oracle = SamplingOracle(cfg.seed, alphabet)
    learn_pool = ConstantPool.default(
        [s for _, t in problems for s in list(t.inputs) + list(t.outputs)]
    )
    slot_cache: dict = {}

    templates: list[PredicateTemplate] = [TOP]
    table = top_table(constructs)
    history: list[IterationRecord] = []
    reports: list[ProblemReport] = []
    diagnostics: list[str] = []

    for name, task in problems:
        report = ProblemReport(problem=name, iterations=0, templates_added=[], table_size=len(table))
        iteration = 0
        while True:
            iteration += 1
            if iteration > cfg.max_iterations_per_problem:
                report.diagnostic = "NonProgress"
                diagnostics.append(f"NonProgress on {name}: iteration cap {cfg.max_iterations_per_problem} hit")
                break
            t0 = time.perf_counter()
            synth = Synthesizer(task, templates, table)
            result = synth.run(require_correct=False)
            report.t_ags_ms += int((time.perf_counter() - t0) * 1000)

            if result.program is None:
                report.diagnostic = "InfeasibleProblem"
                diagnostics.append(f"InfeasibleProblem on {name}: synthesizer returned null ({result.reason})")
                break

            correct = is_correct(result.program, task)
            violated = None
            if not correct:
                violated = next(
                    (ex for ex in task.examples if not _satisfies(result.program, ex)), None
                )
            added: list[PredicateTemplate] = []
            if correct:
                history.append(
                    IterationRecord(
                        name, iteration, result.program, True, None, [], len(table),
                        result.enumerated, list(templates), table,
                    )
                )
                break

            t0 = time.perf_counter()
            new_templates = learn_abstract_domain(result.program, list(task.examples))
            report.t_domain_ms += int((time.perf_counter() - t0) * 1000)
            added = sorted(t for t in new_templates if t not in templates)
            templates = sorted(set(templates) | new_templates)

            t0 = time.perf_counter()
            table = learn_transformers(constructs, templates, oracle, cfg.learn, learn_pool, slot_cache)
            report.t_transformers_ms += int((time.perf_counter() - t0) * 1000)

            history.append(
                IterationRecord(
                    name, iteration, result.program, False, violated, added, len(table),
                    result.enumerated, list(templates), table,
                )
            )
            report.templates_added.extend(str(t) for t in added)
        report.iterations = iteration
        report.table_size = len(table)
        reports.append(report)

    return TrainingRun(templates=templates, table=table, history=history, reports=reports, diagnostics=diagnostics)


def _satisfies(p: Program, example: tuple[str, str]) -> bool:
    from .dsl import EvalError, evaluate

    e_in, e_out = example
    try:
        return evaluate(p, e_in) == e_out
    except EvalError:
        return False
