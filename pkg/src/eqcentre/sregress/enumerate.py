"""Exhaustive skeleton enumeration in non-decreasing node count.

Trees are built bottom-up from canonical subtrees; a candidate is kept only
when its root passes :func:`is_canonical_root`. The rules reject a tree
whenever an equivalent tree of no greater size exists in the same
vocabulary (double negation, signs and reciprocals absorbed by a constant,
constant-only subtrees, x - x, ...), so each equivalence class that the
rules recognise is emitted once.
"""

from __future__ import annotations

from typing import Iterator

from .config import SearchConfig
from .expr import COMMUTATIVE, Binary, Const, Expr, Unary, Var

_ODD = frozenset({"sin", "tan", "arctan"})
_EVEN = frozenset({"cos", "square"})


def _is(node: Expr, *ops: str) -> bool:
    return isinstance(node, (Unary, Binary)) and node.op in ops


def _const_child(node: Expr) -> bool:
    return isinstance(node, Binary) and (isinstance(node.left, Const) or isinstance(node.right, Const))


def _absorbs_const(node: Expr, *ops: str) -> bool:
    return _is(node, *ops) and _const_child(node)


def is_canonical_root(node: Expr, vocab, texts: tuple[str, str] | None = None) -> bool:
    """Root-level normal-form test, assuming the children are canonical.

    Rejects a root when an equivalent tree of no greater size exists, e.g.
    c1 * (c2 + x) in favour of c3 + c1 * x.

    ``texts`` carries the children's canonical text for binary nodes.
    """
    if isinstance(node, (Const, Var)):
        return True
    if isinstance(node, Unary):
        op, a = node.op, node.arg
        if isinstance(a, Const):
            return False
        if op == "neg":
            if _is(a, "neg", "sub") or _absorbs_const(a, "mul", "div"):
                return False
            if _absorbs_const(a, "add") and vocab.has("sub"):
                return False
        elif op == "inv":
            if _is(a, "inv", "neg", "div"):
                return False
            if _absorbs_const(a, "mul") and vocab.has("div"):
                return False
        elif op in _ODD or op in _EVEN:
            if _is(a, "neg"):
                return False
            if op == "square" and _is(a, "sqrt"):
                return False
            # a fitted phase turns cos(c +- x) and sin(c - x) into sin(c' + x)
            if op == "cos" and _absorbs_const(a, "add", "sub") and vocab.has("sin"):
                return False
            if op == "sin" and _is(a, "sub") and isinstance(a.left, Const) and vocab.has("add"):
                return False
        elif op == "log" and _is(a, "exp"):
            return False
        elif op == "exp" and _is(a, "log"):
            return False
        return True

    op, l, r = node.op, node.left, node.right
    if isinstance(l, Const) and isinstance(r, Const):
        return False
    if texts is not None:
        lt, rt = texts
        if op in COMMUTATIVE and lt > rt:
            return False
        if op in ("sub", "div") and lt == rt:
            return False
    l_const, r_const = isinstance(l, Const), isinstance(r, Const)
    if op == "add":
        if (_is(l, "neg") or _is(r, "neg")) and vocab.has("sub"):
            return False
        if (l_const and _absorbs_const(r, "add", "sub")) or (r_const and _absorbs_const(l, "add", "sub")):
            return False
    elif op == "sub":
        if r_const and vocab.has("add"):
            return False
        if _is(r, "neg") and vocab.has("add"):
            return False
        if _is(l, "neg") and vocab.has("add", "neg"):
            return False
        if l_const and _absorbs_const(r, "add", "sub"):
            return False
    elif op == "mul":
        # a sign on either factor is pulled out to the root (or into a constant)
        if _is(l, "neg") or _is(r, "neg"):
            return False
        other = r if l_const else l if r_const else None
        if other is not None and _absorbs_const(other, "mul", "div", "add", "sub"):
            return False
        if (_is(l, "inv") or _is(r, "inv")) and vocab.has("div"):
            return False
    elif op == "div":
        if (r_const or _is(r, "inv") or _is(l, "inv")) and vocab.has("mul"):
            return False
        if (_is(l, "neg") or _is(r, "neg")) and vocab.has("neg"):
            return False
        if l_const and _absorbs_const(r, "mul", "div"):
            return False
    return True


def enumerate_skeletons(cfg: SearchConfig) -> Iterator[Expr]:
    """Yield canonical skeletons with placeholder constants, smallest first."""
    for node, _text in enumerate_with_text(cfg):
        yield node


def enumerate_with_text(cfg: SearchConfig) -> Iterator[tuple[Expr, str]]:
    """As :func:`enumerate_skeletons`, paired with each skeleton's canonical text."""
    vocab = cfg.vocabulary
    unary = sorted(vocab.unary)
    binary = sorted(vocab.binary)
    max_c = cfg.max_constants if vocab.allows_constants else 0
    # levels[n] holds (node, text, constant count) for canonical trees of n nodes
    levels: list[list[tuple[Expr, str, int]]] = [[]]

    leaves: list[tuple[Expr, str, int]] = [(Var(name), f"(var {name})", 0) for name in sorted(cfg.inputs)]
    if max_c >= 1:
        leaves.insert(0, (Const(None), "(const ?)", 1))
    levels.append(leaves)
    for node, text, _ in leaves:
        yield node, text

    for n in range(2, cfg.max_nodes + 1):
        level: list[tuple[Expr, str, int]] = []
        for op in unary:
            for child, ctext, nc in levels[n - 1]:
                node = Unary(op, child)
                if is_canonical_root(node, vocab):
                    level.append((node, f"({op} {ctext})", nc))
        for op in binary:
            for i in range(1, n - 1):
                j = n - 1 - i
                for lnode, ltext, lc in levels[i]:
                    for rnode, rtext, rc in levels[j]:
                        if lc + rc > max_c:
                            continue
                        if op in COMMUTATIVE and ltext > rtext:
                            continue
                        node = Binary(op, lnode, rnode)
                        if is_canonical_root(node, vocab, (ltext, rtext)):
                            level.append((node, f"({op} {ltext} {rtext})", lc + rc))
        for node, text, _ in level:
            yield node, text
        if n < cfg.max_nodes:
            levels.append(level)
        else:
            levels.append([])


def count_by_size(cfg: SearchConfig) -> dict[int, int]:
    counts: dict[int, int] = {}
    for node in enumerate_skeletons(cfg):
        size = node.size()
        counts[size] = counts.get(size, 0) + 1
    return counts
