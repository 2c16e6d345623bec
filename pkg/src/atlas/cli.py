"""Command-line entry points: train, synth, bench, dump-itp.

Exit codes: 0 success, 1 no program found, 2 training diagnostic,
3 usage error, 4 I/O or format error.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from pathlib import Path
from typing import Optional

from . import __version__
from .domain import PredicateTemplate, TOP, template_from_text, template_to_text
from .driver import TrainConfig, learn_abstractions
from .dsl import ParseError, parse_program, print_program
from .interpolation import NotSpurious, construct_tree, dump_tree, find_tree_itp
from .synthesizer import SynthesisTask, Synthesizer
from .transformers import (
    LearnConfig,
    TransformerTable,
    transformer_from_obj,
    transformer_to_obj,
)

USAGE_ERROR = 3
IO_ERROR = 4


class CliError(Exception):
    def __init__(self, message: str, code: int = IO_ERROR):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message, USAGE_ERROR)


# ---------------------------------------------------------------------------
# File formats


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj), encoding="utf-8", newline="\n")


def load_task(path: Path, max_ast_size: int, max_candidates: int, timeout_ms: Optional[int]) -> tuple[str, SynthesisTask]:
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"{path}: {exc}") from exc
    try:
        examples = tuple((e["input"], e["output"]) for e in obj["examples"])
        name = obj.get("name", path.stem)
        literals = tuple(obj.get("literals", []))
    except (KeyError, TypeError) as exc:
        raise CliError(f"{path}: malformed task file ({exc})") from exc
    if not examples:
        raise CliError(f"{path}: task has no examples")
    task = SynthesisTask(
        examples=examples,
        max_ast_size=max_ast_size,
        max_candidates=max_candidates,
        literals=literals,
        timeout_ms=timeout_ms,
    )
    return name, task


def bundle_obj(templates, table: TransformerTable, seed: int, task_names: list[str]) -> dict:
    return {
        "templates": [template_to_text(t) for t in sorted(set(templates))],
        "transformers": [transformer_to_obj(t) for t in table.all()],
        "provenance": {
            "seed": seed,
            "tool_version": __version__,
            "training_tasks": sorted(task_names),
        },
    }


def load_bundle(path: Path) -> tuple[list[PredicateTemplate], TransformerTable, dict]:
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"{path}: {exc}") from exc
    templates = [template_from_text(t) for t in obj["templates"]]
    table = TransformerTable(transformer_from_obj(t) for t in obj["transformers"])
    return templates, table, obj.get("provenance", {})


def run_log_entry(name: str, result, program_text: Optional[str]) -> dict:
    return {
        "task": name,
        "enumerated": result.enumerated,
        "pruned_abstract": result.pruned_abstract,
        "deduped": result.deduped,
        "result_program": program_text,
        "correct": bool(result.correct) if result.program is not None else False,
        "wall_ms": result.wall_ms,
    }


# ---------------------------------------------------------------------------
# Commands


def cmd_train(args) -> int:
    out_dir = Path(args.output)
    cfg = TrainConfig(
        seed=args.seed,
        max_ast_size=args.max_size,
        max_candidates=args.max_candidates,
        learn=LearnConfig(validity_samples=args.validity_samples),
    )
    problems = [
        load_task(Path(p), cfg.max_ast_size, cfg.max_candidates, args.timeout_ms) for p in args.tasks
    ]
    run = learn_abstractions(problems, cfg)

    write_json(out_dir / "bundle.json", bundle_obj(run.templates, run.table, args.seed, [n for n, _ in problems]))
    report = {
        "seed": args.seed,
        "templates": [template_to_text(t) for t in sorted(set(run.templates))],
        "problems": [
            {
                "problem": r.problem,
                "iterations": r.iterations,
                "templates_added": r.templates_added,
                "table_size": r.table_size,
                "diagnostic": r.diagnostic,
            }
            for r in run.reports
        ],
        "diagnostics": run.diagnostics,
    }
    write_json(out_dir / "report.json", report)
    timings = {
        "problems": [
            {
                "problem": r.problem,
                "T_AGS_ms": r.t_ags_ms,
                "T_A_ms": r.t_domain_ms,
                "T_T_ms": r.t_transformers_ms,
            }
            for r in run.reports
        ]
    }
    write_json(out_dir / "timings.json", timings)
    for line in run.diagnostics:
        print(f"warning: {line}", file=sys.stderr)
    print(f"trained {len(problems)} problem(s); {len(run.templates)} templates -> {out_dir}/bundle.json")
    return 0 if run.ok else 2


def _load_bundle_or_top(args) -> tuple[list[PredicateTemplate], TransformerTable]:
    if getattr(args, "baseline_top", False) or not args.bundle:
        from .transformers import top_table, concat_construct

        return [TOP], top_table([concat_construct()])
    return load_bundle(Path(args.bundle))[:2]


def cmd_synth(args) -> int:
    name, task = load_task(Path(args.task), args.max_size, args.max_candidates, args.timeout_ms)
    if not args.baseline_top and not args.bundle:
        raise CliError("synth requires --bundle (or --baseline-top)", USAGE_ERROR)
    templates, table = _load_bundle_or_top(args)
    result = Synthesizer(task, templates, table).run(require_correct=True)
    text = print_program(result.program) if result.program else None
    entry = run_log_entry(name, result, text)
    log_line = json.dumps(entry, sort_keys=True)
    if args.log:
        with open(args.log, "a", encoding="utf-8") as fh:
            fh.write(log_line + "\n")
    else:
        print(log_line, file=sys.stderr)
    if result.program is None or not result.correct:
        print(f"no program found ({result.reason})", file=sys.stderr)
        return 1
    print(text)
    return 0


def cmd_bench(args) -> int:
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise CliError(f"{corpus}: not a directory")
    task_files = sorted(corpus.glob("*.json"))
    templates, table = (load_bundle(Path(args.bundle))[:2]) if args.bundle else ([TOP], None)
    if table is None:
        raise CliError("bench requires --bundle", USAGE_ERROR)
    out_dir = Path(args.output)

    rows = []
    log_lines = []
    for path in task_files:
        try:
            name, task = load_task(path, args.max_size, args.max_candidates, args.timeout_ms)
        except CliError as exc:
            rows.append({"task": path.stem, "error": str(exc)})
            continue
        from .transformers import top_table, concat_construct

        per_mode = {}
        for mode, (tpl, tbl) in {
            "bundle": (templates, table),
            "baseline": ([TOP], top_table([concat_construct()])),
        }.items():
            result = Synthesizer(task, tpl, tbl).run(require_correct=True)
            text = print_program(result.program) if result.program else None
            entry = run_log_entry(name, result, text)
            entry["mode"] = mode
            log_lines.append(entry)
            per_mode[mode] = entry
        ratio = None
        if per_mode["bundle"]["correct"] and per_mode["baseline"]["correct"]:
            denom = max(1, per_mode["bundle"]["enumerated"])
            ratio = per_mode["baseline"]["enumerated"] / denom
        rows.append({"task": name, "bundle": per_mode["bundle"], "baseline": per_mode["baseline"], "ratio": ratio})

    solved_bundle = sum(1 for r in rows if r.get("bundle", {}).get("correct"))
    solved_baseline = sum(1 for r in rows if r.get("baseline", {}).get("correct"))
    ratios = sorted(r["ratio"] for r in rows if r.get("ratio") is not None)
    aggregate = {
        "tasks": len(rows),
        "solved_bundle": solved_bundle,
        "solved_baseline": solved_baseline,
        "commonly_solved": len(ratios),
        "median_enumeration_ratio": statistics.median(ratios) if ratios else None,
    }
    report = {"aggregate": aggregate, "tasks": rows}
    write_json(out_dir / "bench_report.json", report)
    with open(out_dir / "bench_log.jsonl", "w", encoding="utf-8") as fh:
        for entry in log_lines:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    header = f"{'task':24} {'bundle':>9} {'baseline':>9} {'ratio':>8}"
    print(header)
    print("-" * len(header))
    for r in rows:
        if "error" in r:
            print(f"{r['task']:24} error: {r['error']}")
            continue
        b = r["bundle"]["enumerated"] if r["bundle"]["correct"] else "-"
        t = r["baseline"]["enumerated"] if r["baseline"]["correct"] else "-"
        ratio = f"{r['ratio']:.1f}x" if r["ratio"] else "-"
        print(f"{r['task']:24} {b!s:>9} {t!s:>9} {ratio:>8}")
    med = aggregate["median_enumeration_ratio"]
    summary = f"solved: bundle {solved_bundle}/{len(rows)}, baseline {solved_baseline}/{len(rows)}"
    summary += f"; median ratio {med:.1f}x" if med is not None else "; no commonly solved tasks"
    print(summary)
    return 0


def cmd_dump_itp(args) -> int:
    name, task = load_task(Path(args.task), args.max_size, args.max_candidates, None)
    try:
        program = parse_program(args.program)
    except ParseError as exc:
        raise CliError(f"bad program: {exc}", USAGE_ERROR) from exc
    for e_in, e_out in task.examples:
        try:
            tree = construct_tree(program, e_in, e_out)
        except NotSpurious:
            continue
        itp = find_tree_itp(tree)
        print(dump_tree(tree, itp))
        return 0
    print("program satisfies every example; nothing to refute", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="atlas", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--max-size", type=int, default=14, help="maximum AST size")
        p.add_argument("--max-candidates", type=int, default=200_000)
        p.add_argument("--timeout-ms", type=int, default=60_000)

    p_train = sub.add_parser("train", help="learn an abstraction bundle from task files")
    p_train.add_argument("tasks", nargs="*")
    p_train.add_argument("-o", "--output", required=True)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--validity-samples", type=int, default=2000)
    common(p_train)
    p_train.set_defaults(fn=cmd_train)

    p_synth = sub.add_parser("synth", help="synthesize a program for one task")
    p_synth.add_argument("task")
    p_synth.add_argument("--bundle")
    p_synth.add_argument("--baseline-top", action="store_true")
    p_synth.add_argument("--log")
    common(p_synth)
    p_synth.set_defaults(fn=cmd_synth)

    p_bench = sub.add_parser("bench", help="compare bundle vs top baseline over a corpus")
    p_bench.add_argument("corpus")
    p_bench.add_argument("--bundle", required=True)
    p_bench.add_argument("-o", "--output", default="bench_out")
    common(p_bench)
    p_bench.set_defaults(fn=cmd_bench)

    p_dump = sub.add_parser("dump-itp", help="dump the interpolation tree for a spurious program")
    p_dump.add_argument("task")
    p_dump.add_argument("--program", required=True)
    common(p_dump)
    p_dump.set_defaults(fn=cmd_dump_itp)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
