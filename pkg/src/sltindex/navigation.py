"""Node-wise navigation over the encoded grammar.

A tree node is addressed without expansion by the chain of productions that
produce it: a NodeId is a sequence of (rule, position) pairs, starting at
the start rule (rule -1) with a position in the flat start array, followed
by one pair per nested nonterminal, each position being a depth-first index
inside that rule's right-hand side.  Every inner pair sits on a nonterminal
occurrence and the last pair sits on a terminal, so a NodeId is at most one
longer than the grammar's nesting depth.

Moving around the tree reduces to three local moves.  Stepping to a child
either lands on a terminal in the same right-hand side, enters a
nonterminal (push pairs until a terminal root), or hits a parameter, in
which case the pair is popped and the move continues at the argument
position one level up.  Stepping to the parent runs the same walk in
reverse.  The label search operations additionally consult the index's
jump bitmasks: a nonterminal that provably never generates the wanted
label is not entered at all; the search drops straight to its argument
subtrees.

First-child/next-sibling/parent speak the unranked document language:
slot 1 is the first child, slot 2 the next sibling, a null child is
"absent", and parent climbs the binary encoding until it leaves a slot-1
edge.
"""

from __future__ import annotations

from .xml_model import IndexOutOfRange

START = -1


class InvalidNodeId(ValueError):
    """The pair sequence does not address a node of this index."""


class Navigator:
    """Read-only navigation over one TreeIndex."""

    def __init__(self, ix):
        self.ix = ix
        n = len(ix.start_tags)
        # parent position and child slot for every flat start position
        sparent = [-1] * n
        sslot = [0] * n
        stack = []
        for p in range(n):
            if stack:
                par, slot = stack[-1]
                sparent[p] = par
                sslot[p] = slot
                stack[-1] = (par, slot + 1)
                if slot + 1 > ix.ar[ix.start_tags[par]]:
                    stack.pop()
            a = ix.ar[ix.start_tags[p]]
            if a:
                stack.append((p, 1))
        self._sparent = sparent
        self._sslot = sslot

    # ------------------------------------------------------------- helpers

    def _tag_at(self, r, p):
        ix = self.ix
        if r == START:
            return ix.start_tags[p]
        k = ix.nt_index(r)
        return ix.rule_x[k] if p == 0 else ix.rule_y[k]

    def _check(self, nid):
        ix = self.ix
        if not nid or nid[0][0] != START:
            raise InvalidNodeId("node id must begin at the start rule")
        p0 = nid[0][1]
        if not 0 <= p0 < len(ix.start_tags):
            raise InvalidNodeId("start position %r out of range" % (p0,))
        tag = ix.start_tags[p0]
        for r, p in nid[1:]:
            if r != tag or not ix.is_nt(r):
                raise InvalidNodeId("pair (%r,%r) does not continue %r"
                                    % (r, p, tag))
            k = ix.nt_index(r)
            if p == 0:
                tag = ix.rule_x[k]
            elif p == ix.rule_i[k]:
                tag = ix.rule_y[k]
            else:
                raise InvalidNodeId("position %r not a node of rule %r"
                                    % (p, r))
        if not tag < ix.n_labels:
            raise InvalidNodeId("node id must end on a terminal")
        return tag

    def _descend(self, pairs):
        """Extend pairs until they end on a terminal position."""
        ix = self.ix
        r, p = pairs[-1]
        tag = self._tag_at(r, p)
        while ix.is_nt(tag):
            pairs.append((tag, 0))
            tag = ix.rule_x[ix.nt_index(tag)]
        return pairs

    def _child_raw(self, nid, slot):
        """Pairs addressing child `slot`, stopped on the occurrence itself.

        The result may end on a nonterminal occurrence; None for a null
        child.  Walks the three cases: same-rule terminal, nonterminal
        entry, and parameter exit (pop and continue one level up).
        """
        ix = self.ix
        pairs = list(nid)
        j = slot
        while True:
            r, p = pairs[-1]
            if r == START:
                q = p + 1
                for _ in range(j - 1):
                    q += ix.find_close[q]
                if ix.start_tags[q] == ix.null_id:
                    return None
                pairs[-1] = (START, q)
                return pairs
            k = ix.nt_index(r)
            i = ix.rule_i[k]
            if p == 0:
                if j == i:
                    y = ix.rule_y[k]
                    if y == ix.null_id:
                        return None
                    pairs[-1] = (r, i)
                    return pairs
                if j > i:
                    j += ix.ar[ix.rule_y[k]] - 1
                pairs.pop()
            else:
                j = i - 1 + j
                pairs.pop()

    def _append_param_parent(self, pairs, r, j):
        """Extend pairs to the node holding parameter yj of rule r.

        The last pair must address the occurrence of r.  Returns the
        child slot of the parameter under the reached node.
        """
        ix = self.ix
        while True:
            k = ix.nt_index(r)
            x, i, y = ix.rule_x[k], ix.rule_i[k], ix.rule_y[k]
            ry = ix.ar[y]
            if i <= j <= i + ry - 1:
                c = j - i + 1
                pairs.append((r, i))
                if y < ix.n_labels:
                    return c
                r, j = y, c
            else:
                s = j if j < i else j - ry + 1
                pairs.append((r, 0))
                if x < ix.n_labels:
                    return s
                r, j = x, s

    def _binary_parent(self, nid):
        """(pairs of the binary parent, child slot) or None at the root."""
        ix = self.ix
        pairs = list(nid)
        while True:
            r, p = pairs[-1]
            if r == START:
                pp = self._sparent[p]
                if pp < 0:
                    return None
                slot = self._sslot[p]
                tag = ix.start_tags[pp]
                pairs[-1] = (START, pp)
                if ix.is_nt(tag):
                    slot = self._append_param_parent(pairs, tag, slot)
                return pairs, slot
            k = ix.nt_index(r)
            if p == 0:
                pairs.pop()
                continue
            x, i = ix.rule_x[k], ix.rule_i[k]
            pairs[-1] = (r, 0)
            if x < ix.n_labels:
                return pairs, i
            slot = self._append_param_parent(pairs, x, i)
            return pairs, slot

    # ------------------------------------------------------------- queries

    def find_root(self):
        """NodeId of the document root, or None for an empty start rule."""
        ix = self.ix
        if not ix.start_tags:
            return None
        if ix.start_tags[0] == ix.null_id:
            return None
        return tuple(self._descend([(START, 0)]))

    def label(self, nid):
        return self._check(nid)

    def first_child(self, nid):
        lab = self._check(nid)
        if self.ix.ar[lab] < 1:
            return None
        got = self._child_raw(nid, 1)
        if got is None:
            return None
        return tuple(self._descend(got))

    def next_sibling(self, nid):
        lab = self._check(nid)
        if self.ix.ar[lab] < 2:
            return None
        got = self._child_raw(nid, 2)
        if got is None:
            return None
        return tuple(self._descend(got))

    def parent(self, nid):
        self._check(nid)
        cur = nid
        while True:
            got = self._binary_parent(cur)
            if got is None:
                return None
            pairs, slot = got
            if slot == 1:
                return tuple(pairs)
            cur = pairs

    def _search(self, stack, b):
        """First b-labeled node in dflr order over stacked subtree items."""
        ix = self.ix
        while stack:
            cur = stack.pop()
            r, p = cur[-1]
            tag = self._tag_at(r, p)
            if tag < ix.n_labels:
                if tag == b:
                    return tuple(cur)
                for c in range(ix.ar[tag], 0, -1):
                    ch = self._child_raw(cur, c)
                    if ch is not None:
                        stack.append(ch)
            elif ix.jump[ix.nt_index(tag)] >> b & 1:
                stack.append(cur + [(tag, 0)])
            else:
                for c in range(ix.ar[tag], 0, -1):
                    ch = self._child_raw(cur, c)
                    if ch is not None:
                        stack.append(ch)
        return None

    def tagged_desc(self, nid, b):
        """First strict descendant labeled b in document order, or None."""
        lab = self._check(nid)
        self._check_label(b)
        if self.ix.ar[lab] < 1:
            return None
        first = self._child_raw(nid, 1)
        if first is None:
            return None
        return self._search([first], b)

    def tagged_foll(self, nid, b):
        """First b-labeled node after nid's subtree in document order."""
        self._check(nid)
        self._check_label(b)
        cur = list(nid)
        item = None
        if self.ix.ar[self._tag_at(*cur[-1])] >= 2:
            item = self._child_raw(cur, 2)
        while True:
            if item is not None:
                got = self._search([item], b)
                if got is not None:
                    return got
                item = None
            up = self._binary_parent(cur)
            if up is None:
                return None
            cur, slot = up
            if slot == 1 and self.ix.ar[self._tag_at(*cur[-1])] >= 2:
                item = self._child_raw(cur, 2)

    def _check_label(self, b):
        if not 0 <= b < self.ix.n_labels:
            raise IndexOutOfRange("label id %r out of range" % (b,))


def format_node(nid):
    """Render a NodeId the way the examples write them: (S,0)(N7,2)."""
    parts = []
    for r, p in nid:
        parts.append("(%s,%d)" % ("S" if r == START else "N%d" % r, p))
    return "".join(parts)


class NodePool:
    """Prefix-sharing trie for pair sequences with reference counts.

    Handles are integers; handle 0 is the empty sequence and is never
    freed.  push/pop move one pair at a time; intern/pairs_of convert
    whole NodeIds.  Structural parent links hold their own references,
    so shared prefixes stay alive exactly as long as some handle needs
    them.
    """

    def __init__(self):
        self._parent = [0]
        self._pair = [None]
        self._rc = [1]
        self._kids = [{}]
        self._free = []

    def n_nodes(self):
        return len(self._parent) - len(self._free)

    def push(self, h, pair):
        child = self._kids[h].get(pair)
        if child is None:
            if self._free:
                child = self._free.pop()
                self._parent[child] = h
                self._pair[child] = pair
                self._rc[child] = 0
                self._kids[child] = {}
            else:
                child = len(self._parent)
                self._parent.append(h)
                self._pair.append(pair)
                self._rc.append(0)
                self._kids.append({})
            self._kids[h][pair] = child
            self._rc[h] += 1
        self._rc[child] += 1
        return child

    def pop(self, h):
        """Release h, returning (parent handle, last pair); bumps parent."""
        par = self._parent[h]
        pair = self._pair[h]
        self._rc[par] += 1
        self.release(h)
        return par, pair

    def release(self, h):
        while h != 0:
            self._rc[h] -= 1
            if self._rc[h] > 0 or self._kids[h]:
                return
            par = self._parent[h]
            del self._kids[par][self._pair[h]]
            self._free.append(h)
            h = par
        self._rc[0] -= 1

    def intern(self, pairs):
        h = 0
        self._rc[0] += 1
        for pair in pairs:
            nh = self.push(h, pair)
            self.release(h)
            h = nh
        return h

    def pairs_of(self, h):
        out = []
        while h != 0:
            out.append(self._pair[h])
            h = self._parent[h]
        out.reverse()
        return tuple(out)


class TreeCursor:
    """Mutable position over a Navigator, for iterative traversals.

    Keeps the current NodeId; when given a NodePool, the position is
    mirrored into the pool so long shared prefixes are stored once.
    """

    def __init__(self, nav: Navigator, nid=None, pool=None):
        self.nav = nav
        self._cur = tuple(nid if nid is not None else nav.find_root())
        self.pool = pool
        self._h = pool.intern(self._cur) if pool is not None else None

    def node(self):
        return self._cur

    def label(self):
        return self.nav.label(self._cur)

    def _move(self, nxt):
        if nxt is None:
            return False
        if self.pool is not None:
            old, new = self._cur, nxt
            shared = 0
            for a, b in zip(old, new):
                if a != b:
                    break
                shared += 1
            h = self._h
            for _ in range(len(old) - shared):
                h, _pair = self.pool.pop(h)
            for pair in new[shared:]:
                nh = self.pool.push(h, pair)
                self.pool.release(h)
                h = nh
            self._h = h
        self._cur = nxt
        return True

    def down(self):
        return self._move(self.nav.first_child(self._cur))

    def right(self):
        return self._move(self.nav.next_sibling(self._cur))

    def up(self):
        return self._move(self.nav.parent(self._cur))


def dflr_recursive(nav: Navigator):
    """Labels in dflr order by recursion on first-child/next-sibling.

    The order is depth-first over the binary encoding: node, slot-1
    subtree, slot-2 subtree.  For a document index this is exactly
    document order.
    """

    def go(nid):
        yield nav.label(nid)
        child = nav.first_child(nid)
        if child is not None:
            yield from go(child)
        sib = nav.next_sibling(nid)
        if sib is not None:
            yield from go(sib)

    root = nav.find_root()
    if root is not None:
        yield from go(root)


def dflr_iterative(nav: Navigator, pool=None):
    """Same sequence as dflr_recursive with an explicit stack.

    With a NodePool the pending positions are held as pooled handles,
    so the stack stores each shared ancestor chain once.
    """
    root = nav.find_root()
    if root is None:
        return
    if pool is None:
        stack = [root]
        while stack:
            nid = stack.pop()
            yield nav.label(nid)
            sib = nav.next_sibling(nid)
            if sib is not None:
                stack.append(sib)
            child = nav.first_child(nid)
            if child is not None:
                stack.append(child)
    else:
        stack = [pool.intern(root)]
        while stack:
            h = stack.pop()
            nid = pool.pairs_of(h)
            yield nav.label(nid)
            sib = nav.next_sibling(nid)
            child = nav.first_child(nid)
            if sib is not None:
                stack.append(pool.intern(sib))
            if child is not None:
                stack.append(pool.intern(child))
            pool.release(h)
