"""String-transformation DSL: syntax, concrete semantics, exact facts, ranking, text format.

Programs are ASTs over six operators.  String-typed terms are built from
``input``, ``const`` literals, ``concat`` and ``substr``; position-typed
terms (``abspos``, ``cpos``) appear only as the second and third children
of ``substr``.  All values are immutable and evaluation is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union


class Op(Enum):
    INPUT = "input"
    CONST = "const"
    ABSPOS = "abspos"
    CPOS = "cpos"
    CONCAT = "concat"
    SUBSTR = "substr"


# Enumeration / ranking order of operators.  Leaves first, then composites.
_OP_ORDER = {Op.INPUT: 0, Op.CONST: 1, Op.ABSPOS: 2, Op.CPOS: 3, Op.CONCAT: 4, Op.SUBSTR: 5}

_ARITY = {Op.INPUT: 0, Op.CONST: 0, Op.ABSPOS: 0, Op.CPOS: 0, Op.CONCAT: 2, Op.SUBSTR: 3}

# Result types, used by the well-formedness check.
_STRING_OPS = {Op.INPUT, Op.CONST, Op.CONCAT, Op.SUBSTR}
_POS_OPS = {Op.ABSPOS, Op.CPOS}


class EvalError(Exception):
    """Raised when evaluation hits a defined failure (never undefined behavior)."""

    OUT_OF_BOUNDS = "out-of-bounds"
    MISSING_OCCURRENCE = "missing-occurrence"

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class ParseError(Exception):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at offset {pos})")
        self.pos = pos


@dataclass(frozen=True)
class AstNode:
    """One AST node.  ``literal`` carries const strings and position integers."""

    op: Op
    children: tuple["AstNode", ...] = ()
    literal: Union[None, str, int, tuple[int, int]] = None

    def __post_init__(self):
        if len(self.children) != _ARITY[self.op]:
            raise ValueError(f"{self.op.value} expects {_ARITY[self.op]} children")

    @property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children)


@dataclass(frozen=True)
class Program:
    root: AstNode

    @property
    def size(self) -> int:
        return self.root.size

    def __str__(self) -> str:
        return print_program(self)


# ---------------------------------------------------------------------------
# Constructors


def input_() -> AstNode:
    return AstNode(Op.INPUT)


def const(s: str) -> AstNode:
    return AstNode(Op.CONST, literal=s)


def abspos(k: int) -> AstNode:
    return AstNode(Op.ABSPOS, literal=k)


def cpos(char: int, j: int) -> AstNode:
    if j == 0:
        raise ValueError("cpos occurrence index must be nonzero")
    return AstNode(Op.CPOS, literal=(char, j))


def concat(a: AstNode, b: AstNode) -> AstNode:
    return AstNode(Op.CONCAT, children=(a, b))


def substr(x: AstNode, p1: AstNode, p2: AstNode) -> AstNode:
    return AstNode(Op.SUBSTR, children=(x, p1, p2))


def well_typed(node: AstNode) -> bool:
    """Operator children must match the signature; substr takes (string, pos, pos)."""
    if node.op is Op.CONCAT:
        return all(c.op in _STRING_OPS and well_typed(c) for c in node.children)
    if node.op is Op.SUBSTR:
        x, p1, p2 = node.children
        return x.op in _STRING_OPS and p1.op in _POS_OPS and p2.op in _POS_OPS and all(
            well_typed(c) for c in node.children
        )
    return True


# ---------------------------------------------------------------------------
# Concrete semantics


def resolve_position(node: AstNode, x: str) -> int:
    """Resolve a position term against the subject string ``x``.

    ``abspos k`` is the boundary ``k`` (negative counts from the end,
    ``abspos -1`` == ``len(x)``).  ``cpos c j`` is the boundary immediately
    after the j-th occurrence of the character ``c``, counting from the left
    for ``j > 0`` and from the right for ``j < 0``.
    """
    if node.op is Op.ABSPOS:
        k = node.literal
        idx = k if k >= 0 else len(x) + k + 1
        return idx
    if node.op is Op.CPOS:
        char, j = node.literal
        ch = chr(char)
        occ = [i for i, c in enumerate(x) if c == ch]
        if len(occ) < abs(j):
            raise EvalError(
                EvalError.MISSING_OCCURRENCE,
                f"fewer than {abs(j)} occurrences of {ch!r}",
            )
        return occ[j - 1] + 1 if j > 0 else occ[j] + 1
    raise ValueError(f"not a position node: {node.op}")


def eval_node(node: AstNode, x: str) -> str:
    if node.op is Op.INPUT:
        return x
    if node.op is Op.CONST:
        return node.literal
    if node.op is Op.CONCAT:
        return eval_node(node.children[0], x) + eval_node(node.children[1], x)
    if node.op is Op.SUBSTR:
        subject = eval_node(node.children[0], x)
        i1 = resolve_position(node.children[1], subject)
        i2 = resolve_position(node.children[2], subject)
        if not (0 <= i1 <= i2 <= len(subject)):
            raise EvalError(EvalError.OUT_OF_BOUNDS, f"bad window [{i1}, {i2}) for length {len(subject)}")
        return subject[i1:i2]
    raise ValueError(f"not a string-typed node: {node.op}")


def evaluate(p: Program, x: str) -> str:
    """Run ``p`` on the input string.  Raises EvalError on defined failures."""
    return eval_node(p.root, x)


# ---------------------------------------------------------------------------
# Exact fact-level semantics.  Facts are lengths and individual characters of
# a string value; partial fact sets are allowed and propagate as far as the
# operator semantics determine them.


@dataclass(frozen=True)
class FactSet:
    """Known facts about one string value: its length and chars (as code points)."""

    length: Optional[int] = None
    chars: tuple[tuple[int, int], ...] = ()  # sorted (index, codepoint) pairs

    @staticmethod
    def of(length: Optional[int] = None, chars: Optional[dict[int, int]] = None) -> "FactSet":
        items = tuple(sorted((chars or {}).items()))
        return FactSet(length=length, chars=items)

    @staticmethod
    def from_value(s: str) -> "FactSet":
        return FactSet.of(len(s), {i: ord(c) for i, c in enumerate(s)})

    def char_map(self) -> dict[int, int]:
        return dict(self.chars)

    def holds_of(self, s: str) -> bool:
        if self.length is not None and len(s) != self.length:
            return False
        return all(i < len(s) and ord(s[i]) == c for i, c in self.chars)


def exact_facts(op: Op, child_facts: list, literal=None) -> FactSet:
    """Derive the complete fact set of an operator's output from child facts.

    ``child_facts`` holds FactSets for string children and plain ints for
    resolved positions.  Missing child facts simply limit what is derivable.
    """
    if op is Op.CONST:
        return FactSet.from_value(literal)
    if op is Op.INPUT:
        # The input leaf's facts are those of the bound example input.
        (facts,) = child_facts
        return facts
    if op is Op.CONCAT:
        left, right = child_facts
        length = None
        # A char fact on the left child implies its index is inside the left
        # part, so it carries over unconditionally; right-side facts shift by
        # the left length when that is known.
        chars: dict[int, int] = dict(left.chars)
        if left.length is not None and right.length is not None:
            length = left.length + right.length
        if left.length is not None:
            chars.update({left.length + i: c for i, c in right.chars})
        return FactSet.of(length, chars)
    if op is Op.SUBSTR:
        subject, i1, i2 = child_facts
        length = i2 - i1
        cmap = subject.char_map()
        chars = {k: cmap[i1 + k] for k in range(length) if i1 + k in cmap}
        return FactSet.of(length, chars)
    raise ValueError(f"no string facts for operator {op}")


# ---------------------------------------------------------------------------
# Ranking.  Programs are totally ordered by AST size, ties broken by a
# deterministic lexicographic key on (operator, literal, children keys).
# The key order equals the enumerator's generation order.


def _literal_key(node: AstNode):
    if node.op is Op.CONST:
        return (node.literal,)
    if node.op is Op.ABSPOS:
        return (node.literal,)
    if node.op is Op.CPOS:
        return node.literal
    return ()


def _struct_key(node: AstNode):
    return (_OP_ORDER[node.op], _literal_key(node), tuple(_struct_key(c) for c in node.children))


def rank_key(p: Union[Program, AstNode]) -> tuple:
    node = p.root if isinstance(p, Program) else p
    return (node.size, _struct_key(node))


@dataclass(frozen=True, order=True)
class Rank:
    """Totally ordered rank of a program; injective on distinct ASTs."""

    key: tuple = field(compare=True)


def rank(p: Union[Program, AstNode]) -> Rank:
    return Rank(rank_key(p))


# ---------------------------------------------------------------------------
# Text format: s-expressions, lowercase operators, UTF-8.


def _print_node(node: AstNode) -> str:
    if node.op is Op.INPUT:
        return "(input)"
    if node.op is Op.CONST:
        escaped = node.literal.replace("\\", "\\\\").replace('"', '\\"')
        return f'(const "{escaped}")'
    if node.op is Op.ABSPOS:
        return f"(abspos {node.literal})"
    if node.op is Op.CPOS:
        char, j = node.literal
        return f"(cpos {char} {j})"
    if node.op is Op.CONCAT:
        return f"(concat {_print_node(node.children[0])} {_print_node(node.children[1])})"
    if node.op is Op.SUBSTR:
        x, p1, p2 = node.children
        return f"(substr {_print_node(x)} {_print_node(p1)} {_print_node(p2)})"
    raise ValueError(node.op)


def print_program(p: Program) -> str:
    return _print_node(p.root)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str) -> ParseError:
        return ParseError(msg, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, ch: str):
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            raise self.error(f"expected {ch!r}")
        self.pos += 1

    def atom(self) -> str:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in ' \t\n()"':
            self.pos += 1
        if self.pos == start:
            raise self.error("expected atom")
        return self.text[start:self.pos]

    def string(self) -> str:
        self.expect('"')
        out = []
        while True:
            if self.pos >= len(self.text):
                raise self.error("unterminated string")
            ch = self.text[self.pos]
            self.pos += 1
            if ch == '"':
                return "".join(out)
            if ch == "\\":
                if self.pos >= len(self.text):
                    raise self.error("dangling escape")
                out.append(self.text[self.pos])
                self.pos += 1
            else:
                out.append(ch)

    def int_atom(self) -> int:
        tok = self.atom()
        try:
            return int(tok)
        except ValueError:
            raise self.error(f"expected integer, got {tok!r}") from None

    def node(self) -> AstNode:
        self.skip_ws()
        self.expect("(")
        self.skip_ws()
        head = self.atom()
        self.skip_ws()
        if head == "input":
            result = input_()
        elif head == "const":
            result = const(self.string())
        elif head == "abspos":
            result = abspos(self.int_atom())
        elif head == "cpos":
            c = self.int_atom()
            self.skip_ws()
            result = cpos(c, self.int_atom())
        elif head == "concat":
            a = self.node()
            b = self.node()
            result = concat(a, b)
        elif head == "substr":
            x = self.node()
            p1 = self.node()
            p2 = self.node()
            result = substr(x, p1, p2)
        else:
            raise self.error(f"unknown operator {head!r}")
        self.skip_ws()
        self.expect(")")
        return result


def parse_program(text: str) -> Program:
    parser = _Parser(text)
    node = parser.node()
    parser.skip_ws()
    if parser.pos != len(text):
        raise parser.error("trailing input")
    if not well_typed(node) or node.op not in _STRING_OPS:
        raise parser.error("program is not a well-typed string expression")
    return Program(node)


def iter_nodes(node: AstNode) -> Iterator[AstNode]:
    yield node
    for c in node.children:
        yield from iter_nodes(c)
