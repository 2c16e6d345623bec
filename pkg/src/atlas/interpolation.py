"""Tree interpolation over spurious programs.

Given a program that fails an input-output pair, we build a labeled tree
(the program AST plus a dummy root asserting the expected output), whose
label conjunction is unsatisfiable, then annotate it bottom-up with length
and character facts: the root gets false, the root's child gets a fact that
discriminates the actual output from the expected one, and every inner fact
is justified by exact equality facts on the children.  Forgetting the
integer constants of those facts yields new predicate templates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .dsl import (
    AstNode,
    EvalError,
    FactSet,
    Op,
    Program,
    eval_node,
    exact_facts,
    resolve_position,
)
from .domain import (
    ConcretePredicate,
    PredicateTemplate,
    TemplateKind,
    char_eq,
    char_neq,
    gamma_contains,
    len_eq,
    len_neq,
    make_symbolic,
)


class NotSpurious(Exception):
    """The program satisfies the example; there is nothing to refute."""


class ItpFailure(Exception):
    """No discriminating fact exists (impossible for distinct strings)."""


# Annotations: False at the root, True for uninformative nodes, otherwise a
# single predicate over the node's own value.
Annotation = Union[bool, ConcretePredicate]


@dataclass
class TreeNode:
    uid: int
    name: str
    ast: Optional[AstNode]  # None for the dummy root
    parent: Optional[int]
    children: list[int] = field(default_factory=list)
    value: Union[str, int, None] = None  # concrete value under the example input
    label: str = ""


@dataclass
class TreeItpProblem:
    nodes: list[TreeNode]
    root: int
    example_input: str
    expected_output: str

    def node(self, uid: int) -> TreeNode:
        return self.nodes[uid]

    def child_of_root(self) -> TreeNode:
        return self.nodes[self.nodes[self.root].children[0]]


@dataclass
class TreeInterpolant:
    annotations: dict[int, Annotation]

    def at(self, uid: int) -> Annotation:
        return self.annotations[uid]


def _label_for(node: TreeNode, tree_nodes: list[TreeNode]) -> str:
    ast = node.ast
    if ast is None:
        child = tree_nodes[node.children[0]]
        return f"{child.name} = {node.value!r}"
    if ast.op is Op.INPUT:
        return f"{node.name} = {node.value!r}"
    if ast.op is Op.CONST:
        return f"{node.name} = {ast.literal!r}"
    if ast.op in (Op.ABSPOS, Op.CPOS):
        return f"{node.name} = {node.value}"
    kids = ", ".join(tree_nodes[c].name for c in node.children)
    return f"{node.name} = {ast.op.value}({kids})"


def construct_tree(p: Program, e_in: str, e_out: str) -> TreeItpProblem:
    """Build the interpolation problem for ``p`` on a violated example.

    Every node carries its concrete value under ``e_in``; positions carry
    their resolved boundary index.  Raises NotSpurious if the program in
    fact satisfies the example, and propagates EvalError.
    """
    actual = eval_node(p.root, e_in)
    if actual == e_out:
        raise NotSpurious(f"program satisfies {e_in!r} -> {e_out!r}")

    nodes: list[TreeNode] = []
    root = TreeNode(uid=0, name="root", ast=None, parent=None, value=e_out)
    nodes.append(root)

    def add(ast: AstNode, parent: int, subject: str) -> int:
        uid = len(nodes)
        name = "x" if ast.op is Op.INPUT else f"v{uid}"
        node = TreeNode(uid=uid, name=name, ast=ast, parent=parent)
        nodes.append(node)
        nodes[parent].children.append(uid)
        if ast.op in (Op.ABSPOS, Op.CPOS):
            node.value = resolve_position(ast, subject)
        else:
            node.value = eval_node(ast, e_in)
        if ast.op is Op.SUBSTR:
            inner = eval_node(ast.children[0], e_in)
            for c in ast.children:
                add(c, uid, inner)
        else:
            for c in ast.children:
                add(c, uid, "")
        return uid

    add(p.root, 0, "")
    for node in nodes:
        node.label = _label_for(node, nodes)
    return TreeItpProblem(nodes=nodes, root=0, example_input=e_in, expected_output=e_out)


def _discriminator(actual: str, expected: str) -> ConcretePredicate:
    """A fact true of ``actual`` that refutes equality with ``expected``.

    Lengths are preferred; otherwise the smallest differing index.
    """
    if len(actual) != len(expected):
        return len_neq(len(expected))
    for i, (a, b) in enumerate(zip(actual, expected)):
        if a != b:
            return char_neq(i, ord(b))
    raise ItpFailure("strings are equal")


def find_tree_itp(t: TreeItpProblem) -> TreeInterpolant:
    """Compute a tree interpolant by goal-directed fact propagation."""
    ann: dict[int, Annotation] = {n.uid: True for n in t.nodes}
    ann[t.root] = False

    top = t.child_of_root()
    goal = _discriminator(top.value, t.expected_output)
    _justify(t, top, goal, ann)
    return TreeInterpolant(ann)


def _justify(t: TreeItpProblem, node: TreeNode, fact: ConcretePredicate, ann: dict[int, Annotation]):
    """Annotate ``node`` with ``fact`` and its descendants with the exact
    equality facts that make the local entailment hold."""
    ann[node.uid] = fact
    ast = node.ast
    if ast.op in (Op.INPUT, Op.CONST):
        return  # the leaf label is definitional; the fact holds of its value
    kids = [t.node(c) for c in node.children]
    kind = fact.kind

    if ast.op is Op.CONCAT:
        left, right = kids
        if kind in (TemplateKind.LEN_EQ, TemplateKind.LEN_NEQ):
            _justify(t, left, len_eq(len(left.value)), ann)
            _justify(t, right, len_eq(len(right.value)), ann)
            return
        i = fact.args[0]
        l1 = len(left.value)
        if i < l1:
            _justify(t, left, char_eq(i, ord(left.value[i])), ann)
        else:
            _justify(t, left, len_eq(l1), ann)
            _justify(t, right, char_eq(i - l1, ord(right.value[i - l1])), ann)
        return

    if ast.op is Op.SUBSTR:
        subject, p1, p2 = kids
        i1 = p1.value
        if kind in (TemplateKind.LEN_EQ, TemplateKind.LEN_NEQ):
            return  # the window length is fixed by the resolved positions
        i = fact.args[0]
        _justify(t, subject, char_eq(i1 + i, ord(subject.value[i1 + i])), ann)
        return

    raise ValueError(f"cannot justify through {ast.op}")


# ---------------------------------------------------------------------------
# Independent validity checker.  Entailment is decided by the exact fact
# calculus with concrete-value substitution for definitional leaves.


def _facts_from_annotation(a: Annotation) -> FactSet:
    if a is True or a is False or a.kind is TemplateKind.TOP:
        return FactSet.of()
    if a.kind is TemplateKind.LEN_EQ:
        return FactSet.of(length=a.args[0])
    if a.kind is TemplateKind.CHAR_EQ:
        return FactSet.of(chars={a.args[0]: a.args[1]})
    return FactSet.of()  # inequality facts do not feed the forward calculus


def _fact_entails(derived: FactSet, goal: ConcretePredicate) -> bool:
    k = goal.kind
    if k is TemplateKind.LEN_EQ:
        return derived.length == goal.args[0]
    if k is TemplateKind.LEN_NEQ:
        return derived.length is not None and derived.length != goal.args[0]
    if k is TemplateKind.CHAR_EQ:
        return dict(derived.chars).get(goal.args[0]) == goal.args[1]
    if k is TemplateKind.CHAR_NEQ:
        i, c = goal.args
        got = dict(derived.chars).get(i)
        if got is not None and got != c:
            return True
        return derived.length is not None and i >= derived.length
    return False


def check_interpolant(t: TreeItpProblem, itp: TreeInterpolant) -> bool:
    """Verify the two defining conditions of a tree interpolant.

    The root must be annotated false; at every other node the children's
    annotations plus the node's own (definitional) label must entail the
    node's annotation; and the root child's annotation must refute the
    expected output.  Each annotation only mentions its own node, so the
    shared-vocabulary condition holds structurally.
    """
    if itp.at(t.root) is not False:
        return False
    top = t.child_of_root()
    a = itp.at(top.uid)
    if a is True or (a is not False and gamma_contains(a, t.expected_output)):
        return False  # does not contradict the root label v' = e_out

    for node in t.nodes:
        if node.uid == t.root:
            continue
        a = itp.at(node.uid)
        if a is True:
            continue
        if a is False:
            return False
        ast = node.ast
        if ast.op in (Op.INPUT, Op.CONST):
            if not gamma_contains(a, node.value):
                return False
            continue
        if ast.op in (Op.ABSPOS, Op.CPOS):
            return False  # position leaves carry no string predicates
        if ast.op is Op.CONCAT:
            left, right = (t.node(c) for c in node.children)
            derived = exact_facts(
                Op.CONCAT,
                [_facts_from_annotation(itp.at(left.uid)), _facts_from_annotation(itp.at(right.uid))],
            )
        elif ast.op is Op.SUBSTR:
            subject, p1, p2 = (t.node(c) for c in node.children)
            derived = exact_facts(
                Op.SUBSTR,
                [_facts_from_annotation(itp.at(subject.uid)), p1.value, p2.value],
            )
        else:
            return False
        if not _fact_entails(derived, a):
            return False
    return True


# ---------------------------------------------------------------------------
# Template extraction


def learn_abstract_domain(p: Program, examples: list[tuple[str, str]]) -> set[PredicateTemplate]:
    """Templates extracted from the interpolants of every violated example."""
    out: set[PredicateTemplate] = set()
    for e_in, e_out in examples:
        try:
            actual = eval_node(p.root, e_in)
        except EvalError:
            continue  # no fact-level proof for a crashing run; other examples may teach
        if actual == e_out:
            continue
        tree = construct_tree(p, e_in, e_out)
        itp = find_tree_itp(tree)
        for node in tree.nodes:
            if node.uid == tree.root:
                continue
            a = itp.at(node.uid)
            if a is True or a is False:
                continue
            out.add(make_symbolic(a))
    return out


def dump_tree(t: TreeItpProblem, itp: Optional[TreeInterpolant] = None) -> str:
    """One line per node: ``node-id | label | concrete-value | interpolant``."""
    lines = []
    for node in t.nodes:
        if itp is None:
            a = ""
        else:
            ann = itp.at(node.uid)
            a = "false" if ann is False else "true" if ann is True else str(ann)
        lines.append(f"{node.name} | {node.label} | {node.value!r} | {a}")
    return "\n".join(lines)
