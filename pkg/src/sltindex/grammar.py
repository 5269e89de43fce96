"""Straight-line tree grammars over binary structure trees.

A structure tree is made binary by the first-child/next-sibling encoding
(`binarize`).  Grammars compress that binary tree: a start production plus
one production per nonterminal, where right-hand sides are pattern trees
over terminal labels, nonterminal references and parameters y1..yk.  Two
compressors are provided: `build_dag` shares repeated subtrees (rank 0) and
`compress_repair` repeatedly replaces the most frequent parent/child digram
by a fresh nonterminal of bounded rank.  `to_bcnf` rewrites productions so
every non-start right-hand side has exactly two non-parameter nodes, the
shape the downstream index encodes as fixed-width words.

Representation, used by all modules:

- symbol ids: terminal labels first (ids shared with the label table), then
  a reserved null leaf, then nonterminals;
- a pattern is a nested tuple ``(sym, child, ...)`` for symbols of arity
  >= 1, a bare non-negative int for arity-0 symbols (terminal, null or a
  rank-0 nonterminal reference), and a negative int ``-j`` for parameter yj;
- the start right-hand side is a flat list of symbol ids in depth-first
  left-to-right order with null leaves spelled out.  Keeping the top-level
  tree flat avoids materializing millions of tuples and makes positions
  addressable, which the index relies on.

Grammars are treated as immutable after construction; transformations
return new values.  All traversals here use explicit stacks since compressed
inputs routinely exceed the interpreter recursion limit.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .xml_model import StructureTree

NULL_NAME = "-"


class GrammarInvalid(ValueError):
    """The grammar violates a structural invariant."""


class CycleDetected(GrammarInvalid):
    """The nonterminal reference graph is cyclic; no tree is generated."""


class Symbols:
    """Symbol table: terminal labels, one null leaf, then nonterminals.

    `arity[s]` is the number of child slots of symbol s; for nonterminals
    this is the rank.  Terminal labels of a binarized document all have
    arity 2 (first-child and next-sibling slot); worked examples may use
    arity-0 terminals, in which case no null children exist under them.
    """

    __slots__ = ("names", "arity", "n_labels")

    def __init__(self, label_names, label_arities):
        if len(label_names) != len(label_arities):
            raise GrammarInvalid("label name/arity tables differ in length")
        self.n_labels = len(label_names)
        self.names = list(label_names) + [NULL_NAME]
        self.arity = list(label_arities) + [0]

    @classmethod
    def for_labels(cls, label_names):
        """Symbols for a binarized document: every label has arity 2."""
        return cls(list(label_names), [2] * len(label_names))

    @property
    def null(self):
        return self.n_labels

    def is_terminal(self, s):
        return 0 <= s < self.n_labels

    def is_null(self, s):
        return s == self.n_labels

    def is_nt(self, s):
        return s > self.n_labels

    def fresh_nt(self, rank, name=None):
        sid = len(self.names)
        self.names.append("N%d" % sid if name is None else name)
        self.arity.append(rank)
        return sid

    def copy(self):
        dup = Symbols.__new__(Symbols)
        dup.names = list(self.names)
        dup.arity = list(self.arity)
        dup.n_labels = self.n_labels
        return dup

    def __len__(self):
        return len(self.names)


@dataclass
class BinaryTree:
    """First-child/next-sibling encoding; -1 marks an absent child slot."""

    label: list
    left: list
    right: list
    root: int = 0

    def n_nodes(self):
        return len(self.label)


@dataclass
class SltGrammar:
    sym: Symbols
    start: list
    rules: dict


@dataclass
class GrammarStats:
    size: int
    num_rules: int
    rank: int
    depth: int
    start_rhs_size: int


def binarize(st: StructureTree) -> BinaryTree:
    """First-child becomes left, next-sibling becomes right; ids unchanged."""
    return BinaryTree(list(st.label), list(st.first_child), list(st.next_sibling), 0)


def unbinarize(bt: BinaryTree) -> StructureTree:
    st = StructureTree()
    if not bt.label:
        return st
    last = {}
    stack = [(bt.root, -1)]
    while stack:
        v, parent = stack.pop()
        nid = st.add_node(bt.label[v], parent, last.get(parent, -1))
        last[parent] = nid
        r = bt.right[v]
        if r >= 0:
            stack.append((r, parent))
        l = bt.left[v]
        if l >= 0:
            stack.append((l, nid))
    return st


def subtree_ends(rhs, sym):
    """ends[i] = one past the last position of the flat subtree rooted at i."""
    ar = sym.arity
    n = len(rhs)
    ends = [0] * n
    stack = []
    for i in range(n - 1, -1, -1):
        e = i + 1
        for _ in range(ar[rhs[i]]):
            e = stack.pop()
        ends[i] = e
        stack.append(e)
    return ends


def _flat_of_tree(bt, sym):
    ar = sym.arity
    null = sym.null
    out = []
    stack = [bt.root]
    while stack:
        v = stack.pop()
        if v < 0:
            out.append(null)
            continue
        s = bt.label[v]
        out.append(s)
        a = ar[s]
        if a == 2:
            stack.append(bt.right[v])
            stack.append(bt.left[v])
        elif a == 1:
            stack.append(bt.left[v])
    return out


def trivial_grammar(bt: BinaryTree, sym: Symbols) -> SltGrammar:
    """The one-rule grammar: the whole tree as the start right-hand side."""
    return SltGrammar(sym.copy(), _flat_of_tree(bt, sym), {})


def _rebuild(pat, leaf_fn, head_fn=None):
    """Rebuild a pattern bottom-up, mapping leaves (and tuple heads)."""
    if not isinstance(pat, tuple):
        return leaf_fn(pat)
    out = []
    ctrl = [("v", pat)]
    while ctrl:
        t = ctrl.pop()
        if t[0] == "v":
            p = t[1]
            if isinstance(p, tuple):
                ctrl.append(("m", p[0], len(p) - 1))
                for c in reversed(p[1:]):
                    ctrl.append(("v", c))
            else:
                out.append(leaf_fn(p))
        else:
            _, s, k = t
            args = out[len(out) - k:]
            del out[len(out) - k:]
            if head_fn is not None:
                s = head_fn(s)
            out.append((s,) + tuple(args))
    return out[0]


def _pat_iter(pat):
    """Iterate all pattern nodes (tuples and leaves), depth-first."""
    stack = [pat]
    while stack:
        p = stack.pop()
        yield p
        if isinstance(p, tuple):
            for c in reversed(p[1:]):
                stack.append(c)


def _pat_edges(pat):
    total = 0
    for p in _pat_iter(pat):
        if isinstance(p, tuple):
            total += len(p) - 1
    return total


def _n_nonparam(pat):
    n = 0
    for p in _pat_iter(pat):
        if isinstance(p, tuple) or p >= 0:
            n += 1
    return n


def _params_of(pat):
    """Parameter numbers in depth-first order of appearance."""
    out = []
    for p in _pat_iter(pat):
        if not isinstance(p, tuple) and p < 0:
            out.append(-p)
    return out


def _pat_nt_refs(pat, sym):
    refs = set()
    for p in _pat_iter(pat):
        if isinstance(p, tuple):
            if sym.is_nt(p[0]):
                refs.add(p[0])
        elif p >= 0 and sym.is_nt(p):
            refs.add(p)
    return refs


def toposort_rules(g: SltGrammar):
    """Nonterminals in dependency order (referenced rules first).

    Deterministic for a given grammar.  Raises CycleDetected when the
    reference graph is not acyclic and GrammarInvalid on undefined
    references.
    """
    refs = {}
    for x, rhs in g.rules.items():
        refs[x] = _pat_nt_refs(rhs, g.sym)
    for x, rs in refs.items():
        for y in rs:
            if y not in g.rules:
                raise GrammarInvalid("undefined nonterminal %d in rule %d" % (y, x))
    users = {x: [] for x in refs}
    pending = {}
    for x, rs in refs.items():
        pending[x] = len(rs)
        for y in rs:
            users[y].append(x)
    queue = sorted((x for x, k in pending.items() if k == 0), reverse=True)
    order = []
    while queue:
        y = queue.pop()
        order.append(y)
        for x in sorted(users[y], reverse=True):
            pending[x] -= 1
            if pending[x] == 0:
                queue.append(x)
        queue.sort(reverse=True)
    if len(order) != len(refs):
        raise CycleDetected("nonterminal reference graph is cyclic")
    return order


def validate_grammar(g: SltGrammar):
    """Check structural invariants; raises GrammarInvalid on violation."""
    sym = g.sym
    ar = sym.arity
    nsym = len(sym)
    if not g.start:
        raise GrammarInvalid("empty start right-hand side")
    need = 1
    for s in g.start:
        if not isinstance(s, int) or s < 0 or s >= nsym:
            raise GrammarInvalid("bad symbol in start rhs: %r" % (s,))
        if need <= 0:
            raise GrammarInvalid("start rhs continues past a complete tree")
        need += ar[s] - 1
    if need != 0:
        raise GrammarInvalid("start rhs is not a complete tree")
    if sym.is_null(g.start[0]):
        raise GrammarInvalid("start rhs generates the empty tree")
    for x, rhs in g.rules.items():
        if not sym.is_nt(x):
            raise GrammarInvalid("rule head %d is not a nonterminal" % x)
        if not isinstance(rhs, tuple):
            if not isinstance(rhs, int) or rhs < 0:
                raise GrammarInvalid("rule %d: bare rhs must be an arity-0 symbol" % x)
            if sym.is_null(rhs):
                raise GrammarInvalid("rule %d: rhs is the null leaf" % x)
            if ar[rhs] != 0:
                raise GrammarInvalid("rule %d: leaf rhs with arity > 0" % x)
        params = []
        for p in _pat_iter(rhs):
            if isinstance(p, tuple):
                s = p[0]
                if s < 0 or s >= nsym:
                    raise GrammarInvalid("rule %d: unknown symbol %r" % (x, s))
                if ar[s] != len(p) - 1:
                    raise GrammarInvalid("rule %d: symbol %d applied to %d children,"
                                         " arity is %d" % (x, s, len(p) - 1, ar[s]))
                if sym.is_terminal(s) and ar[s] > 2:
                    raise GrammarInvalid("terminal arity above 2 is unsupported")
            elif p < 0:
                params.append(-p)
            else:
                if p >= nsym:
                    raise GrammarInvalid("rule %d: unknown symbol %r" % (x, p))
                if ar[p] != 0:
                    raise GrammarInvalid("rule %d: leaf use of arity-%d symbol %d"
                                         % (x, ar[p], p))
        if params != list(range(1, ar[x] + 1)):
            raise GrammarInvalid("rule %d: parameters %r, expected y1..y%d in order"
                                 % (x, params, ar[x]))
        if isinstance(rhs, tuple) and not isinstance(rhs[0], int):
            raise GrammarInvalid("rule %d: malformed rhs head" % x)
    for s in g.start:
        if sym.is_nt(s) and s not in g.rules:
            raise GrammarInvalid("undefined nonterminal %d in start rhs" % s)
    toposort_rules(g)


def stats(g: SltGrammar) -> GrammarStats:
    start_edges = len(g.start) - 1
    size = start_edges
    rank = 0
    for x, rhs in g.rules.items():
        size += _pat_edges(rhs)
        if g.sym.arity[x] > rank:
            rank = g.sym.arity[x]
    order = toposort_rules(g)
    depth_of = {}
    for x in order:
        d = 0
        for y in _pat_nt_refs(g.rules[x], g.sym):
            if depth_of[y] > d:
                d = depth_of[y]
        depth_of[x] = d + 1
    top = 0
    sym = g.sym
    for s in g.start:
        if sym.is_nt(s) and depth_of[s] > top:
            top = depth_of[s]
    return GrammarStats(size=size, num_rules=len(g.rules), rank=rank,
                        depth=top + 1, start_rhs_size=start_edges)


def expand(g: SltGrammar) -> BinaryTree:
    """The unique tree generated by the grammar, nodes in dflr order."""
    toposort_rules(g)
    sym = g.sym
    ar = sym.arity
    null = sym.null
    rules = g.rules
    start = g.start
    ends = subtree_ends(start, sym)
    label = []
    left = []
    right = []

    def emit(s, parent, slot):
        idx = len(label)
        label.append(s)
        left.append(-1)
        right.append(-1)
        if parent >= 0:
            if slot == 0:
                left[parent] = idx
            else:
                right[parent] = idx
        return idx

    # Work items carry a node source: ("f", flat position, None) for start
    # rhs nodes, ("p", pattern, env) inside rule bodies.  env maps parameter
    # j to the source of its argument.
    stack = [("f", 0, None, -1, 0)]
    while stack:
        kind, a, env, parent, slot = stack.pop()
        if kind == "f":
            s = start[a]
            if s == null:
                continue
            k = ar[s]
            if sym.is_nt(s):
                cs = []
                p = a + 1
                for _ in range(k):
                    cs.append(("f", p, None))
                    p = ends[p]
                stack.append(("p", rules[s], tuple(cs), parent, slot))
            else:
                idx = emit(s, parent, slot)
                childs = []
                p = a + 1
                for j in range(k):
                    childs.append((p, j))
                    p = ends[p]
                for p0, j in reversed(childs):
                    stack.append(("f", p0, None, idx, j))
        else:
            pat = a
            if isinstance(pat, tuple):
                s = pat[0]
                if sym.is_nt(s):
                    cs = tuple(("p", c, env) for c in pat[1:])
                    stack.append(("p", rules[s], cs, parent, slot))
                else:
                    idx = emit(s, parent, slot)
                    for j in range(len(pat) - 1, 0, -1):
                        stack.append(("p", pat[j], env, idx, j - 1))
            elif pat < 0:
                src = env[-pat - 1]
                stack.append((src[0], src[1], src[2], parent, slot))
            elif pat == null:
                continue
            elif sym.is_nt(pat):
                stack.append(("p", rules[pat], (), parent, slot))
            else:
                emit(pat, parent, slot)
    return BinaryTree(label, left, right, 0)


def pattern_tree(g: SltGrammar, x):
    """Fully expanded right-hand side of nonterminal x, parameters kept.

    Materializes the pattern, so intended for rules whose expansion is
    small (tests, worked examples, debugging).
    """
    order = toposort_rules(g)
    sym = g.sym
    full = {}

    def expand_pat(pat, env):
        out = []
        ctrl = [("v", pat, env)]
        while ctrl:
            t = ctrl.pop()
            if t[0] == "v":
                _, p, e = t
                if isinstance(p, tuple):
                    ctrl.append(("m", p[0], len(p) - 1, e))
                    for c in reversed(p[1:]):
                        ctrl.append(("v", c, e))
                elif p < 0:
                    out.append(e[-p - 1])
                elif sym.is_nt(p):
                    out.append(full[p])
                else:
                    out.append(p)
            else:
                _, s, k, e = t
                args = out[len(out) - k:]
                del out[len(out) - k:]
                if sym.is_nt(s):
                    ctrl.append(("v", full[s], tuple(args)))
                else:
                    out.append((s,) + tuple(args))
        return out[0]

    for y in order:
        idmap = tuple(-(j + 1) for j in range(sym.arity[y]))
        full[y] = expand_pat(g.rules[y], idmap)
        if y == x:
            break
    if x not in full:
        raise GrammarInvalid("nonterminal %d has no rule" % x)
    return full[x]


def build_dag(bt: BinaryTree, sym: Symbols) -> SltGrammar:
    """Share every subtree occurring at least twice (null leaves aside).

    The result has rank 0; one nonterminal per distinct repeated subtree,
    numbered by first preorder occurrence.  Children of shared nodes are
    themselves shared or null, so right-hand sides have depth 1.
    """
    sym = sym.copy()
    ar = sym.arity
    lab, L, R = bt.label, bt.left, bt.right
    n = len(lab)
    key = [0] * n
    interned = {}
    count = []
    exemplar = []
    stack = [(bt.root, False)]
    while stack:
        v, done = stack.pop()
        if not done:
            stack.append((v, True))
            if ar[lab[v]] >= 1:
                if R[v] >= 0:
                    stack.append((R[v], False))
                if L[v] >= 0:
                    stack.append((L[v], False))
        else:
            if ar[lab[v]] >= 1:
                kl = key[L[v]] if L[v] >= 0 else -1
                kr = key[R[v]] if R[v] >= 0 else -1
                kk = (lab[v], kl, kr)
            else:
                kk = (lab[v],)
            kid = interned.get(kk)
            if kid is None:
                kid = len(count)
                interned[kk] = kid
                count.append(0)
                exemplar.append(v)
            key[v] = kid
            count[kid] += 1

    nt_of = {}
    stack = [bt.root]
    while stack:
        v = stack.pop()
        k = key[v]
        if count[k] >= 2 and k not in nt_of:
            nt_of[k] = sym.fresh_nt(0)
        if ar[lab[v]] >= 1:
            if R[v] >= 0:
                stack.append(R[v])
            if L[v] >= 0:
                stack.append(L[v])

    null = sym.null
    rules = {}
    for k, nt in nt_of.items():
        v = exemplar[k]
        if ar[lab[v]] == 0:
            rules[nt] = lab[v]
        else:
            kids = []
            for c in (L[v], R[v])[: ar[lab[v]]]:
                kids.append(null if c < 0 else nt_of[key[c]])
            rules[nt] = (lab[v],) + tuple(kids)

    start = []
    stack = [bt.root]
    while stack:
        v = stack.pop()
        if v < 0:
            start.append(null)
            continue
        k = key[v]
        if count[k] >= 2:
            start.append(nt_of[k])
            continue
        s = lab[v]
        start.append(s)
        a = ar[s]
        if a == 2:
            stack.append(R[v])
            stack.append(L[v])
        elif a == 1:
            stack.append(L[v])
    return SltGrammar(sym, start, rules)


def compress_repair(bt: BinaryTree, sym: Symbols, max_rank=2) -> SltGrammar:
    """Digram replacement over the binary tree, bounded nonterminal rank.

    A digram is (parent symbol, child slot, child symbol), null children
    included.  The most frequent digram is replaced by a fresh nonterminal
    whose rank is arity(parent) - 1 + arity(child); replacement happens only
    while some digram occurs at least twice, the fresh rank stays within
    max_rank, and replacing does not grow the grammar (occurrences must be
    at least arity(parent) + arity(child)).  Ties break toward the smallest
    (parent symbol, slot, child symbol).  max_rank 0 admits no digram on
    binary input, so it falls back to plain subtree sharing.
    """
    if max_rank <= 0:
        return build_dag(bt, sym)
    sym = sym.copy()
    ar = sym.arity
    null = sym.null
    n = len(bt.label)
    syms = list(bt.label)
    kids = []
    for i in range(n):
        a = ar[syms[i]]
        if a == 0:
            kids.append([])
        elif a == 1:
            kids.append([bt.left[i]])
        else:
            kids.append([bt.left[i], bt.right[i]])
    parent = [-1] * n
    pidx = [0] * n
    for i in range(n):
        for j, w in enumerate(kids[i]):
            if w >= 0:
                parent[w] = i
                pidx[w] = j
    alive = bytearray(b"\x01") * n

    occ = {}
    for i in range(n):
        si = syms[i]
        base = si << 36
        for j, w in enumerate(kids[i]):
            k = base | (j << 32) | (syms[w] if w >= 0 else null)
            s = occ.get(k)
            if s is None:
                occ[k] = {i}
            else:
                s.add(i)
    heap = [(-len(s), k) for k, s in occ.items() if len(s) >= 2]
    heapq.heapify(heap)

    def drop(k, m):
        s = occ.get(k)
        if s is not None:
            s.discard(m)

    def add(k, m):
        s = occ.get(k)
        if s is None:
            occ[k] = {m}
        else:
            s.add(m)
            if len(s) >= 2:
                heapq.heappush(heap, (-len(s), k))

    rules = {}
    while heap:
        negc, dig = heapq.heappop(heap)
        members = occ.get(dig)
        cur = 0 if members is None else len(members)
        if cur < 2:
            continue
        if cur != -negc:
            heapq.heappush(heap, (-cur, dig))
            continue
        psym = dig >> 36
        slot = (dig >> 32) & 0xF
        csym = dig & 0xFFFFFFFF
        p_ar = ar[psym]
        c_ar = ar[csym]
        if p_ar - 1 + c_ar > max_rank:
            continue
        occs = sorted(members)
        vdead = set()
        vmorph = set()
        todo = []
        for u in occs:
            if u in vdead or u in vmorph:
                continue
            v = kids[u][slot]
            if v >= 0 and (v in vdead or v in vmorph):
                continue
            todo.append(u)
            vmorph.add(u)
            if v in members:
                vdead.add(v)
        if len(todo) < 2 or len(todo) < p_ar + c_ar:
            continue

        nt = sym.fresh_nt(p_ar - 1 + c_ar)
        args = []
        for j in range(p_ar):
            if j == slot:
                if csym == null:
                    args.append(null)
                elif c_ar == 0:
                    args.append(csym)
                else:
                    args.append((csym,) + tuple(-(slot + k + 1) for k in range(c_ar)))
            elif j < slot:
                args.append(-(j + 1))
            else:
                args.append(-(j + c_ar))
        rules[nt] = (psym,) + tuple(args)

        for u in todo:
            v = kids[u][slot]
            gp = parent[u]
            if gp >= 0:
                drop((syms[gp] << 36) | (pidx[u] << 32) | psym, gp)
            base = psym << 36
            kl = kids[u]
            for j, w in enumerate(kl):
                drop(base | (j << 32) | (syms[w] if w >= 0 else null), u)
            if v >= 0:
                cbase = csym << 36
                for j, w in enumerate(kids[v]):
                    drop(cbase | (j << 32) | (syms[w] if w >= 0 else null), v)
                alive[v] = 0
                newkids = kl[:slot] + kids[v] + kl[slot + 1:]
            else:
                newkids = kl[:slot] + kl[slot + 1:]
            syms[u] = nt
            kids[u] = newkids
            nbase = nt << 36
            for j, w in enumerate(newkids):
                if w >= 0:
                    parent[w] = u
                    pidx[w] = j
                add(nbase | (j << 32) | (syms[w] if w >= 0 else null), u)
            if gp >= 0:
                add((syms[gp] << 36) | (pidx[u] << 32) | nt, gp)

    start = []
    stack = [bt.root]
    while stack:
        x = stack.pop()
        if x < 0:
            start.append(null)
            continue
        start.append(syms[x])
        for w in reversed(kids[x]):
            stack.append(w)
    return SltGrammar(sym, start, rules)


def to_bcnf(g: SltGrammar) -> SltGrammar:
    """Normalize so every non-start rule has exactly two non-parameter nodes.

    Rules with a single non-parameter node are inlined away; larger rules
    are split bottom-up, peeling either the lone non-parameter child subtree
    of the root into a fresh rule, or abstracting the first non-parameter
    child into a fresh parameter.  The start rule is left as is.
    """
    sym = g.sym.copy()
    rules = dict(g.rules)
    start = list(g.start)

    while True:
        subst = {}
        for x, rhs in rules.items():
            if _n_nonparam(rhs) == 1:
                subst[x] = rhs[0] if isinstance(rhs, tuple) else rhs
        if not subst:
            break
        for x in list(subst):
            seen = {x}
            r = subst[x]
            while r in subst:
                if r in seen:
                    raise CycleDetected("chain rules form a cycle")
                seen.add(r)
                r = subst[r]
            subst[x] = r
        start = [subst.get(s, s) for s in start]
        new_rules = {}
        for x, rhs in rules.items():
            if x in subst:
                continue
            new_rules[x] = _rebuild(
                rhs,
                lambda p: subst.get(p, p) if isinstance(p, int) and p >= 0 else p,
                lambda s: subst.get(s, s),
            )
        rules = new_rules

    work = [x for x in rules if _n_nonparam(rules[x]) >= 3]
    while work:
        x = work.pop()
        rhs = rules[x]
        children = list(rhs[1:])
        npc = [i for i, c in enumerate(children)
               if isinstance(c, tuple) or c >= 0]
        if len(npc) == 1:
            q = children[npc[0]]
            q_params = _params_of(q)
            renum = {old: k + 1 for k, old in enumerate(q_params)}
            d = sym.fresh_nt(len(q_params))
            rules[d] = _rebuild(
                q, lambda p: -renum[-p] if isinstance(p, int) and p < 0 else p)
            children[npc[0]] = d if not q_params else (d,) + tuple(-p for p in q_params)
            rules[x] = (rhs[0],) + tuple(children)
            if _n_nonparam(rules[d]) >= 3:
                work.append(d)
        else:
            j = npc[0]
            q = children[j]
            q_params = _params_of(q)
            if q_params:
                before = q_params[0] - 1
            else:
                prior = _params_of((rhs[0],) + tuple(children[:j]))
                before = prior[-1] if prior else 0
            marker = object()
            drop = len(q_params)
            c_rank = sym.arity[x] - drop + 1

            def renum_leaf(p):
                if p is marker:
                    return -(before + 1)
                if isinstance(p, int) and p < 0:
                    old = -p
                    return p if old <= before else -(old - drop + 1)
                return p

            c_children = children[:j] + [marker] + children[j + 1:]
            c = sym.fresh_nt(c_rank)
            rules[c] = _rebuild((rhs[0],) + tuple(c_children), renum_leaf)
            args = []
            for k in range(1, c_rank + 1):
                if k <= before:
                    args.append(-k)
                elif k == before + 1:
                    args.append(q)
                else:
                    args.append(-(k + drop - 1))
            rules[x] = (c,) + tuple(args)
            if _n_nonparam(rules[x]) >= 3:
                work.append(x)
            if _n_nonparam(rules[c]) >= 3:
                work.append(c)
    return SltGrammar(sym, start, rules)


def _pat_str(pat, sym):
    if not isinstance(pat, tuple):
        return "y%d" % -pat if pat < 0 else sym.names[pat]
    out = []
    ctrl = [("v", pat)]
    while ctrl:
        t = ctrl.pop()
        if t[0] == "v":
            p = t[1]
            if isinstance(p, tuple):
                ctrl.append(("m", p[0], len(p) - 1))
                for c in reversed(p[1:]):
                    ctrl.append(("v", c))
            elif p < 0:
                out.append("y%d" % -p)
            else:
                out.append(sym.names[p])
        else:
            _, s, k = t
            args = out[len(out) - k:]
            del out[len(out) - k:]
            out.append(sym.names[s] + "(" + ",".join(args) + ")")
    return out[0]


def _flat_to_pattern(rhs, sym):
    ar = sym.arity
    out = []
    for s in reversed(rhs):
        k = ar[s]
        if k == 0:
            out.append(s)
        else:
            args = out[len(out) - k:]
            del out[len(out) - k:]
            out.append((s,) + tuple(reversed(args)))
    return out[0]


def dumps(g: SltGrammar) -> str:
    """Grammar in one-production-per-line textual form, for goldens."""
    lines = ["S -> " + _pat_str(_flat_to_pattern(g.start, g.sym), g.sym)]
    for x in sorted(g.rules):
        rank = g.sym.arity[x]
        head = g.sym.names[x]
        if rank:
            head += "(" + ",".join("y%d" % j for j in range(1, rank + 1)) + ")"
        lines.append(head + " -> " + _pat_str(g.rules[x], g.sym))
    return "\n".join(lines)
