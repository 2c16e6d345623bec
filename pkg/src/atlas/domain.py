"""Predicate templates, concrete predicates, abstract values, and the
best-abstraction operator.

A template is one of five kinds; a concrete predicate fills its integer
holes (characters are code points).  An abstract value is a finite
conjunction of concrete predicates over one string value, with a
distinguished bottom whose concretization is empty.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, Optional, Union


class TemplateKind(str, Enum):
    TOP = "top"
    LEN_EQ = "len-eq"
    LEN_NEQ = "len-neq"
    CHAR_EQ = "char-eq"
    CHAR_NEQ = "char-neq"


_HOLES = {
    TemplateKind.TOP: 0,
    TemplateKind.LEN_EQ: 1,
    TemplateKind.LEN_NEQ: 1,
    TemplateKind.CHAR_EQ: 2,
    TemplateKind.CHAR_NEQ: 2,
}

# Canonical template ordering, used wherever a deterministic sweep is needed.
TEMPLATE_ORDER = [
    TemplateKind.TOP,
    TemplateKind.LEN_EQ,
    TemplateKind.LEN_NEQ,
    TemplateKind.CHAR_EQ,
    TemplateKind.CHAR_NEQ,
]


@dataclass(frozen=True, order=True)
class PredicateTemplate:
    kind: TemplateKind

    @property
    def holes(self) -> int:
        return _HOLES[self.kind]

    def instantiate(self, args: tuple[int, ...]) -> "ConcretePredicate":
        return ConcretePredicate(self, args)

    def __str__(self) -> str:
        return template_to_text(self)


TOP = PredicateTemplate(TemplateKind.TOP)
LEN_EQ = PredicateTemplate(TemplateKind.LEN_EQ)
LEN_NEQ = PredicateTemplate(TemplateKind.LEN_NEQ)
CHAR_EQ = PredicateTemplate(TemplateKind.CHAR_EQ)
CHAR_NEQ = PredicateTemplate(TemplateKind.CHAR_NEQ)

ALL_TEMPLATES = {t.kind: t for t in (TOP, LEN_EQ, LEN_NEQ, CHAR_EQ, CHAR_NEQ)}


@dataclass(frozen=True, order=True)
class ConcretePredicate:
    template: PredicateTemplate
    args: tuple[int, ...]

    def __post_init__(self):
        if len(self.args) != self.template.holes:
            raise ValueError(f"{self.template.kind.value} takes {self.template.holes} args")
        if self.template.kind in (TemplateKind.CHAR_EQ, TemplateKind.CHAR_NEQ) and self.args[0] < 0:
            raise ValueError("character index must be nonnegative")

    @property
    def kind(self) -> TemplateKind:
        return self.template.kind

    def __str__(self) -> str:
        return predicate_to_text(self)


@lru_cache(maxsize=None)
def len_eq(k: int) -> ConcretePredicate:
    return ConcretePredicate(LEN_EQ, (k,))


@lru_cache(maxsize=None)
def len_neq(k: int) -> ConcretePredicate:
    return ConcretePredicate(LEN_NEQ, (k,))


@lru_cache(maxsize=None)
def char_eq(i: int, c: int) -> ConcretePredicate:
    return ConcretePredicate(CHAR_EQ, (i, c))


@lru_cache(maxsize=None)
def char_neq(i: int, c: int) -> ConcretePredicate:
    return ConcretePredicate(CHAR_NEQ, (i, c))


TOP_PRED = ConcretePredicate(TOP, ())


class _Bottom:
    """Distinguished empty-concretization value; a singleton."""

    def __repr__(self):
        return "Bottom"

    def __str__(self):
        return "bottom"


BOTTOM = _Bottom()


@dataclass(frozen=True)
class AbstractValue:
    """Conjunction of concrete predicates; the empty conjunction is top."""

    conjuncts: frozenset[ConcretePredicate] = frozenset()

    @staticmethod
    def top() -> "AbstractValue":
        return AbstractValue(frozenset())

    @staticmethod
    def of(preds: Iterable[ConcretePredicate]) -> Union["AbstractValue", _Bottom]:
        return meet(AbstractValue.top(), AbstractValue(frozenset(p for p in preds if p.kind is not TemplateKind.TOP)))

    def sorted_conjuncts(self) -> list[ConcretePredicate]:
        return sorted(self.conjuncts, key=lambda p: (p.template.kind.value, p.args))

    def __str__(self) -> str:
        if not self.conjuncts:
            return "top"
        return " & ".join(str(p) for p in self.sorted_conjuncts())


StateLike = Union[AbstractValue, _Bottom]


# ---------------------------------------------------------------------------
# Concretization membership


def _pred_holds(p: ConcretePredicate, s: str) -> bool:
    k = p.kind
    if k is TemplateKind.TOP:
        return True
    if k is TemplateKind.LEN_EQ:
        return len(s) == p.args[0]
    if k is TemplateKind.LEN_NEQ:
        return len(s) != p.args[0]
    if k is TemplateKind.CHAR_EQ:
        i, c = p.args
        return i < len(s) and ord(s[i]) == c
    if k is TemplateKind.CHAR_NEQ:
        i, c = p.args
        return i >= len(s) or ord(s[i]) != c
    raise ValueError(k)


def gamma_contains(p: Union[ConcretePredicate, StateLike], s: str) -> bool:
    """Membership of ``s`` in the concretization of a predicate or value."""
    if p is BOTTOM:
        return False
    if isinstance(p, ConcretePredicate):
        return _pred_holds(p, s)
    return all(_pred_holds(q, s) for q in p.conjuncts)


# ---------------------------------------------------------------------------
# Constant pool and best abstraction


@dataclass(frozen=True)
class ConstantPool:
    """Finite instantiation bounds for inequality templates and char indices."""

    lengths: tuple[int, ...]
    indices: tuple[int, ...]
    chars: tuple[int, ...]

    @staticmethod
    def default(strings: Iterable[str] = ()) -> "ConstantPool":
        strings = list(strings)
        lengths = set(range(17)) | {len(s) for s in strings}
        indices = set(range(16))
        chars = {ord(c) for s in strings for c in s}
        return ConstantPool(tuple(sorted(lengths)), tuple(sorted(indices)), tuple(sorted(chars)))


def abstract(s: str, t: PredicateTemplate, pool: ConstantPool) -> list[ConcretePredicate]:
    """All pool-bounded best instantiations of ``t`` satisfied by ``s``.

    Equality templates yield the exact facts of ``s``; inequality templates
    enumerate the pool.  Every returned predicate holds of ``s``.
    """
    k = t.kind
    if k is TemplateKind.TOP:
        return [TOP_PRED]
    if k is TemplateKind.LEN_EQ:
        return [len_eq(len(s))]
    if k is TemplateKind.LEN_NEQ:
        return [len_neq(m) for m in pool.lengths if m != len(s)]
    if k is TemplateKind.CHAR_EQ:
        return [char_eq(i, ord(s[i])) for i in pool.indices if i < len(s)]
    if k is TemplateKind.CHAR_NEQ:
        return [
            char_neq(i, c)
            for i in pool.indices
            if i < len(s)
            for c in pool.chars
            if c != ord(s[i])
        ]
    raise ValueError(k)


def best_abstraction(s: str, templates: Iterable[PredicateTemplate], pool: ConstantPool) -> AbstractValue:
    """Strongest conjunction expressible with the given templates that holds of ``s``."""
    preds = []
    for t in sorted(templates):
        if t.kind is TemplateKind.TOP:
            continue
        preds.extend(abstract(s, t, pool))
    return AbstractValue(frozenset(preds))


# ---------------------------------------------------------------------------
# Meet with syntactic contradiction detection


def _contradicts(preds: frozenset[ConcretePredicate]) -> bool:
    lens = {p.args[0] for p in preds if p.kind is TemplateKind.LEN_EQ}
    if len(lens) > 1:
        return True
    char_eqs: dict[int, int] = {}
    for p in preds:
        if p.kind is TemplateKind.CHAR_EQ:
            i, c = p.args
            if char_eqs.get(i, c) != c:
                return True
            char_eqs[i] = c
    for p in preds:
        if p.kind is TemplateKind.LEN_NEQ and p.args[0] in lens:
            return True
        if p.kind is TemplateKind.CHAR_NEQ:
            i, c = p.args
            if char_eqs.get(i) == c:
                return True
    if lens:
        (n,) = lens
        if any(i >= n for i in char_eqs):
            return True
    return False


def meet(a: StateLike, b: StateLike) -> StateLike:
    """Greatest lower bound; returns bottom on direct contradiction."""
    if a is BOTTOM or b is BOTTOM:
        return BOTTOM
    merged = a.conjuncts | b.conjuncts
    if _contradicts(merged):
        return BOTTOM
    return AbstractValue(merged)


def meet_all(values: Iterable[StateLike]) -> StateLike:
    out: StateLike = AbstractValue.top()
    for v in values:
        out = meet(out, v)
        if out is BOTTOM:
            return BOTTOM
    return out


# ---------------------------------------------------------------------------
# Template extraction


def make_symbolic(p: ConcretePredicate) -> PredicateTemplate:
    """Forget the integer arguments, keeping the template."""
    return p.template


# ---------------------------------------------------------------------------
# Text format: `top`, `(len = k)`, `(len != k)`, `(char i = c)`, `(char i != c)`
# with c printed as a quoted character.


def _quote_char(c: int) -> str:
    ch = chr(c)
    if ch == "'":
        return "'\\''"
    if ch == "\\":
        return "'\\\\'"
    if ch.isprintable():
        return f"'{ch}'"
    return f"'\\u{c:04x}'"


def _unquote_char(tok: str) -> int:
    if not (tok.startswith("'") and tok.endswith("'")):
        raise ValueError(f"bad character token {tok!r}")
    body = tok[1:-1]
    if body == "\\'":
        return ord("'")
    if body == "\\\\":
        return ord("\\")
    if body.startswith("\\u"):
        return int(body[2:], 16)
    if len(body) != 1:
        raise ValueError(f"bad character token {tok!r}")
    return ord(body)


def predicate_to_text(p: ConcretePredicate) -> str:
    k = p.kind
    if k is TemplateKind.TOP:
        return "top"
    if k is TemplateKind.LEN_EQ:
        return f"(len = {p.args[0]})"
    if k is TemplateKind.LEN_NEQ:
        return f"(len != {p.args[0]})"
    if k is TemplateKind.CHAR_EQ:
        return f"(char {p.args[0]} = {_quote_char(p.args[1])})"
    if k is TemplateKind.CHAR_NEQ:
        return f"(char {p.args[0]} != {_quote_char(p.args[1])})"
    raise ValueError(k)


def template_to_text(t: PredicateTemplate) -> str:
    k = t.kind
    if k is TemplateKind.TOP:
        return "top"
    if k is TemplateKind.LEN_EQ:
        return "(len = c)"
    if k is TemplateKind.LEN_NEQ:
        return "(len != c)"
    if k is TemplateKind.CHAR_EQ:
        return "(char i = c)"
    return "(char i != c)"


def template_from_text(text: str) -> PredicateTemplate:
    text = text.strip()
    for t in ALL_TEMPLATES.values():
        if template_to_text(t) == text:
            return t
    raise ValueError(f"unknown template {text!r}")


def predicate_from_text(text: str) -> ConcretePredicate:
    text = text.strip()
    if text == "top":
        return TOP_PRED
    if not (text.startswith("(") and text.endswith(")")):
        raise ValueError(f"bad predicate {text!r}")
    toks = text[1:-1].split()
    if toks[0] == "len" and len(toks) == 3:
        k = int(toks[2])
        return len_eq(k) if toks[1] == "=" else len_neq(k)
    if toks[0] == "char" and len(toks) == 4:
        i = int(toks[1])
        c = _unquote_char(toks[3])
        return char_eq(i, c) if toks[2] == "=" else char_neq(i, c)
    raise ValueError(f"bad predicate {text!r}")
