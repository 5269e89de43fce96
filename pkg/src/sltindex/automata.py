"""Query compilation: a path expression becomes a binary tree automaton.

Queries are absolute location paths restricted to the child, descendant and
following-sibling axes with name, `*` and `text()` tests.  Over the
first-child/next-sibling encoding every axis turns into plain edge
following, so a query compiles to a deterministic automaton whose
transition at a node inspects the label and yields the state sent to the
first-child slot, the state sent to the next-sibling slot, and whether the
node itself is selected.

The nondeterministic automaton has one state per matched query prefix.  A
state waiting on a child or following-sibling step rides only the
next-sibling edge; a state waiting on a descendant step rides both edges.
A matched step emits its successor on the first-child edge, except when the
next step uses following-sibling, which continues on the next-sibling edge.
Matching the last step selects the node.  The subset construction then
yields the deterministic transition rows, states from which nothing can
ever be selected are collapsed into a single universal sink, and per-state
label masks record which labels can change the state at all.  Evaluators
use those masks to skip over grammar rules whose expansion cannot touch
the query.
"""

from __future__ import annotations

import re
from collections import namedtuple
from dataclasses import dataclass

from .xml_model import ATTR_CONTAINER_LABEL, ATTR_VALUE_LABEL, TEXT_LABEL

Step = namedtuple("Step", ["axis", "test"])

CHILD = "child"
DESC = "desc"
FOLL = "foll"

_FOLL_PREFIX = "following-sibling::"
_NCNAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*")
_RESERVED = (TEXT_LABEL, ATTR_CONTAINER_LABEL, ATTR_VALUE_LABEL)


class XPathSyntaxError(ValueError):
    """The query does not parse; `pos` is the offending offset."""

    def __init__(self, pos, msg):
        super().__init__("position %d: %s" % (pos, msg))
        self.pos = pos


class UnsupportedFeature(XPathSyntaxError):
    """Recognized XPath syntax outside the supported fragment."""


def parse_xpath(query):
    """Parse into Step(axis, test) tuples; axis is child, desc or foll."""
    s = query
    n = len(s)
    if n == 0:
        raise XPathSyntaxError(0, "empty query")
    if s[0] != "/":
        raise XPathSyntaxError(0, "query must start with '/' or '//'")
    steps = []
    i = 0
    while i < n:
        if s[i] != "/":
            raise XPathSyntaxError(i, "unexpected character %r" % s[i])
        if s.startswith("//", i):
            axis = DESC
            i += 2
        else:
            axis = CHILD
            i += 1
        if s.startswith(_FOLL_PREFIX, i):
            if axis == DESC:
                raise UnsupportedFeature(
                    i, "following-sibling must follow a single '/'")
            if not steps:
                raise XPathSyntaxError(
                    i, "following-sibling requires a preceding step")
            axis = FOLL
            i += len(_FOLL_PREFIX)
        test, i = _read_test(s, i)
        if i < n and s[i] == "[":
            raise UnsupportedFeature(i, "predicates are not supported")
        steps.append(Step(axis, test))
    return steps


def _read_test(s, i):
    if i >= len(s):
        raise XPathSyntaxError(i, "expected a node test")
    c = s[i]
    if c == "*":
        return "*", i + 1
    if c == "@":
        raise UnsupportedFeature(i, "attribute axes are not supported")
    mo = _NCNAME.match(s, i)
    if not mo:
        raise XPathSyntaxError(i, "expected a node test")
    name = mo.group()
    j = mo.end()
    if s.startswith("::", j):
        raise UnsupportedFeature(i, "axis '%s' is not supported" % name)
    if s.startswith("()", j):
        if name != "text":
            raise UnsupportedFeature(i, "'%s()' tests are not supported" % name)
        return "text()", j + 2
    if s.startswith("(", j):
        raise UnsupportedFeature(i, "function calls are not supported")
    return name, j


def _is_element_name(name):
    return name not in _RESERVED and not name.startswith("@")


def _match_ids(test, names):
    if test == "*":
        return frozenset(a for a, nm in enumerate(names)
                         if _is_element_name(nm))
    if test == "text()":
        return frozenset(a for a, nm in enumerate(names) if nm == TEXT_LABEL)
    return frozenset(a for a, nm in enumerate(names)
                     if nm == test and _is_element_name(nm))


@dataclass
class QueryAutomaton:
    """Deterministic automaton over the binary encoding.

    `row(q, a)` gives (first-child state, next-sibling state, selected).
    Labels without an explicit row use the state's default row.  `universal`
    is the sink state that can never select, or None when unreachable.

    Per state q the masks summarize rows over all label ids:

    - relevant: labels whose row differs from staying in q on both edges;
    - f_relevant: like relevant, but rows that only leak into the universal
      sink still count as ignorable;
    - f_jump: the one (left, right) pair shared by every non-f_relevant
      label, or None when they disagree.
    """

    label_names: list
    steps: list
    n_states: int
    initial: int
    universal: object
    default_rows: list
    label_rows: list
    relevant: list
    f_relevant: list
    f_jump: list

    def row(self, q, a):
        return self.label_rows[q].get(a, self.default_rows[q])

    def dumps(self):
        parts = []
        for q in range(self.n_states):
            ex = sorted(self.label_rows[q])
            for a in ex:
                l, r, sel = self.label_rows[q][a]
                parts.append("q%d,%s%s(q%d,q%d)"
                             % (q, self.label_names[a],
                                "⇒" if sel else "→", l, r))
            l, r, sel = self.default_rows[q]
            left_out = "L" + "".join("-" + self.label_names[a] for a in ex)
            parts.append("q%d,%s%s(q%d,q%d)"
                         % (q, left_out, "⇒" if sel else "→", l, r))
        return "; ".join(parts)


def compile_query(query, label_names):
    """Compile a query string (or parsed steps) over the given label table."""
    steps = parse_xpath(query) if isinstance(query, str) else list(query)
    m = len(steps)
    names = list(label_names)
    match_sets = [_match_ids(st.test, names) for st in steps]
    kind_desc = [st.axis == DESC for st in steps]
    interesting = sorted(frozenset().union(*match_sets)) if m else []

    def nfa_step(S, a):
        ls = set()
        rs = set()
        sel = False
        for t in S:
            if kind_desc[t]:
                ls.add(t)
            rs.add(t)
            if a is not None and a in match_sets[t]:
                nt = t + 1
                if nt == m:
                    sel = True
                elif steps[nt].axis == FOLL:
                    rs.add(nt)
                else:
                    ls.add(nt)
        return frozenset(ls), frozenset(rs), sel

    init = frozenset({0})
    index = {init: 0}
    order = [init]
    raw = []
    k = 0
    while k < len(order):
        S = order[k]
        k += 1
        ex = {a: nfa_step(S, a) for a in interesting}
        dflt = nfa_step(S, None)
        raw.append((ex, dflt))
        for l, r, _ in list(ex.values()) + [dflt]:
            for T in (l, r):
                if T not in index:
                    index[T] = len(order)
                    order.append(T)

    n = len(order)
    num = []
    for ex, (dl, dr, ds) in raw:
        nex = {a: (index[l], index[r], sel) for a, (l, r, sel) in ex.items()}
        num.append((nex, (index[dl], index[dr], ds)))

    # a state is live when some selection is still reachable from it
    back = [set() for _ in range(n)]
    alive = set()
    work = []
    for q, (nex, dflt) in enumerate(num):
        for l, r, sel in list(nex.values()) + [dflt]:
            back[l].add(q)
            back[r].add(q)
            if sel and q not in alive:
                alive.add(q)
                work.append(q)
    while work:
        q = work.pop()
        for p in back[q]:
            if p not in alive:
                alive.add(p)
                work.append(p)

    keep = [q for q in range(n) if q in alive]
    new_of = {q: j for j, q in enumerate(keep)}
    universal = None
    if len(keep) < n:
        universal = len(keep)
        for q in range(n):
            if q not in alive:
                new_of[q] = universal
    n_states = len(keep) + (0 if universal is None else 1)

    default_rows = []
    label_rows = []
    for q in keep:
        nex, (dl, dr, ds) = num[q]
        dd = (new_of[dl], new_of[dr], ds)
        ee = {}
        for a, (l, r, sel) in nex.items():
            v = (new_of[l], new_of[r], sel)
            if v != dd:
                ee[a] = v
        default_rows.append(dd)
        label_rows.append(ee)
    if universal is not None:
        default_rows.append((universal, universal, False))
        label_rows.append({})

    n_labels = len(names)
    relevant = []
    f_relevant = []
    f_jump = []
    for q in range(n_states):
        allowed = {(q, q)}
        if universal is not None:
            allowed.add((universal, q))
            allowed.add((universal, universal))
        rel = 0
        frel = 0
        rest = set()
        for a in range(n_labels):
            l, r, sel = label_rows[q].get(a, default_rows[q])
            if sel or (l, r) != (q, q):
                rel |= 1 << a
            if sel or (l, r) not in allowed:
                frel |= 1 << a
            else:
                rest.add((l, r))
        relevant.append(rel)
        f_relevant.append(frel)
        f_jump.append(rest.pop() if len(rest) == 1 else None)

    return QueryAutomaton(label_names=names, steps=steps, n_states=n_states,
                          initial=new_of[0], universal=universal,
                          default_rows=default_rows, label_rows=label_rows,
                          relevant=relevant, f_relevant=f_relevant,
                          f_jump=f_jump)
