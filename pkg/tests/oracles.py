"""Shared fixtures and brute-force reference computations for the tests.

Everything here works on plain expanded trees or fully expanded pattern
trees, never on the compressed representations under test.
"""

import random

from sltindex.grammar import BinaryTree, SltGrammar, Symbols, expand, to_bcnf
from sltindex.xml_model import (
    ATTR_CONTAINER_LABEL,
    ATTR_VALUE_LABEL,
    TEXT_LABEL,
    StructureTree,
)

F, A, B, C = 0, 1, 2, 3


def sec2_symbols():
    return Symbols(["f", "a", "b", "c"], [2, 2, 0, 0])


def bt_of(pat):
    """BinaryTree from nested tuples (label, child...); leaves are bare ints."""
    label, left, right = [], [], []

    def walk(p):
        s, kids = (p[0], p[1:]) if isinstance(p, tuple) else (p, ())
        idx = len(label)
        label.append(s)
        left.append(-1)
        right.append(-1)
        for j, c in enumerate(kids):
            ci = walk(c)
            if j == 0:
                left[idx] = ci
            else:
                right[idx] = ci
        return idx

    walk(pat)
    return BinaryTree(label, left, right, 0)


def sec2_tree():
    return bt_of((F, (F, (A, B, C), (A, C, C)), (A, C, C)))


def g0_grammar():
    """S -> A(A(a(b,c))), A(y1) -> f(y1,a(c,c))."""
    sym = sec2_symbols()
    a0 = sym.fresh_nt(1)
    return SltGrammar(sym, [a0, a0, A, B, C], {a0: (F, -1, (A, C, C))})


def g1_grammar():
    """The normal form of g0: four productions, size 9."""
    return to_bcnf(g0_grammar())


def tree_key(st, v=0):
    return (st.label[v],) + tuple(tree_key(st, c) for c in st.children(v))


def rand_structure_tree(rng, max_nodes=30, n_labels=5):
    st = StructureTree()
    st.add_node(rng.randrange(n_labels), -1, -1)
    last = {}
    nodes = [0]
    for _ in range(rng.randint(0, max_nodes - 1)):
        p = rng.choice(nodes)
        nid = st.add_node(rng.randrange(n_labels), p, last.get(p, -1))
        last[p] = nid
        nodes.append(nid)
    return st


DOCISH_LABELS = [TEXT_LABEL, ATTR_CONTAINER_LABEL, ATTR_VALUE_LABEL,
                 "@id", "a", "b", "c"]


def is_element_name(name):
    return (name not in (TEXT_LABEL, ATTR_CONTAINER_LABEL, ATTR_VALUE_LABEL)
            and not name.startswith("@"))


def is_text_name(name):
    return name in (TEXT_LABEL, ATTR_VALUE_LABEL)


def count_labels(bt, names):
    """(element count, placeholder count) of a binary tree."""
    e = t = 0
    for s in bt.label:
        nm = names[s]
        if is_element_name(nm):
            e += 1
        elif is_text_name(nm):
            t += 1
    return e, t


def segments_of_pattern(pat, names, n_labels):
    """Per-chunk (element, text) counts of a fully expanded pattern tree."""
    pe = [0]
    pt = [0]

    def bump(s):
        if s >= n_labels:
            return
        nm = names[s]
        if is_element_name(nm):
            pe[-1] += 1
        elif is_text_name(nm):
            pt[-1] += 1

    stack = [pat]
    while stack:
        p = stack.pop()
        if isinstance(p, tuple):
            bump(p[0])
            stack.extend(reversed(p[1:]))
        elif p < 0:
            pe.append(0)
            pt.append(0)
        else:
            bump(p)
    return pe, pt


def labels_in_pattern(pat, n_labels):
    out = set()
    stack = [pat]
    while stack:
        p = stack.pop()
        if isinstance(p, tuple):
            out.add(p[0])
            stack.extend(p[1:])
        elif 0 <= p < n_labels:
            out.add(p)
    return out


def last_param_on_spine(pat, rank):
    """Whether the last parameter sits at the end of the all-right path."""
    if rank == 0:
        return 0
    node = pat
    while isinstance(node, tuple):
        if len(node) != 3:
            return 0
        node = node[2]
    return 1 if node == -rank else 0


def expanded_subtree_counts(g, ends, p):
    """Brute-force (elements, texts) of the expansion of start position p."""
    tag = g.start[p]
    if g.sym.is_null(tag):
        return 0, 0
    sub = SltGrammar(g.sym, g.start[p:ends[p]], g.rules)
    return count_labels(expand(sub), g.sym.names)


def naive_xpath_nodes(st, names, steps):
    """Evaluate parsed steps over the unranked tree; returns node id set."""

    def matches(test, v):
        nm = names[st.label[v]]
        if test == "*":
            return is_element_name(nm)
        if test == "text()":
            return nm == TEXT_LABEL
        return nm == test and is_element_name(nm)

    def kids(v):
        if v < 0:
            return [0] if st.label else []
        return list(st.children(v))

    def desc(v):
        out = []
        stack = list(reversed(kids(v)))
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(reversed(kids(u)))
        return out

    def foll(v):
        out = []
        u = st.next_sibling[v]
        while u >= 0:
            out.append(u)
            u = st.next_sibling[u]
        return out

    ctx = {-1}
    for axis, test in steps:
        pool = set()
        for v in ctx:
            if axis == "child":
                cand = kids(v)
            elif axis == "desc":
                cand = desc(v)
            else:
                cand = foll(v)
            pool.update(u for u in cand if matches(test, u))
        ctx = pool
    return ctx


def run_automaton(dfa, bt):
    """Run the compiled automaton over a plain binary tree."""
    out = set()
    if not bt.label:
        return out
    stack = [(bt.root, dfa.initial)]
    while stack:
        v, q = stack.pop()
        l, r, sel = dfa.row(q, bt.label[v])
        if sel:
            out.add(v)
        if bt.left[v] >= 0:
            stack.append((bt.left[v], l))
        if bt.right[v] >= 0:
            stack.append((bt.right[v], r))
    return out


def rand_query(rng, names):
    elems = [n for n in names if is_element_name(n)]
    tests = elems + ["*", "text()", "zzz"]
    parts = []
    for t in range(rng.randint(1, 4)):
        if t == 0:
            axis = rng.choice(["/", "//"])
        else:
            axis = rng.choice(["/", "//", "/following-sibling::"])
        parts.append(axis + rng.choice(tests))
    return "".join(parts)


def rand_document(rng, max_children=4, max_depth=4):
    """Random well-formed XML bytes with attributes and mixed content."""
    names = ["r", "a", "b", "c", "d"]
    words = ["x", "hi", "one two", "a &amp; b", "1 &lt; 2", "end."]
    parts = []

    def node(depth, name):
        parts.append("<" + name)
        if rng.random() < 0.25:
            parts.append(' id="%d"' % rng.randrange(9))
        if rng.random() < 0.1:
            parts.append(' k="v &amp; &quot;w"')
        parts.append(">")
        if depth < max_depth:
            for _ in range(rng.randrange(max_children + 1)):
                if rng.random() < 0.35:
                    parts.append(rng.choice(words))
                else:
                    node(depth + 1, rng.choice(names[1:]))
        parts.append("</" + name + ">")

    node(0, "r")
    return "".join(parts).encode()
