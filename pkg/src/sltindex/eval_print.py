"""Serialization and materialization of query results over the encoded grammar.

Where the counting evaluator only tallies matches, this one reconstructs
the selected subtrees.  The walk follows document order through the start
rule and descends into rule bodies chunk by chunk: chunk p of a rule is
the token stretch between parameters p and p+1, so a nonterminal's
expansion interleaves its chunks with the argument subtrees without ever
building the tree.

Output is staged.  The walk appends integer tokens (open tag, close tag,
text placeholder) to one growing sequence and records each selected node
as a (token position, texts before, elements before) triple.  Text
content is bound only in a final pass over those triples.  Keeping the
walk free of string work is what makes chunk reuse cheap: a chunk repeats
with the same entry state and in-result flag, so its finished token span
is memoized and replayed by copying, with the recorded marks shifted by
the counter values at the replay site.
"""

from __future__ import annotations

from dataclasses import dataclass

from .automata import compile_query
from .eval_count import CountEvaluator
from .index import TreeIndex
from .xml_model import IndexOutOfRange, XmlWriter

VALUE = -1

_FLAT, _CHUNK, _EMIT, _SAVE = 0, 1, 2, 3


class TextIndexOverflow(IndexOutOfRange):
    """The text collection does not line up with the index."""


@dataclass
class PrintStats:
    chunks: int = 0
    memo_hits: int = 0
    skips: int = 0


class PrintEvaluator:
    """One compiled query over one index; `run()` builds tokens and marks.

    Tokens are ints: label id shifted left once, low bit set on the close
    tag, VALUE for a text placeholder.  Positions are 1-based.  `results`
    holds one triple per selected node in document order.
    """

    def __init__(self, ix: TreeIndex, dfa, jump=True, memo=True):
        if list(dfa.label_names) != list(ix.labels):
            raise ValueError("automaton was compiled for a different label table")
        self.ix = ix
        self.dfa = dfa
        self.jump = jump
        self.stats = PrintStats()
        self.irt = []
        self.results = []
        self.num_texts = 0
        self.num_elements = 0
        self._memo = {} if memo else None
        self._fmemo = {}
        self._cnt = CountEvaluator(ix, dfa, jump="f" if jump else "off",
                                   skip=False)
        self._ran = False

    # ------------------------------------------------------------ flags

    def _flags_quick(self, q, s):
        ix = self.ix
        if s == ix.null_id:
            return ()
        if s < ix.n_labels:
            sel = self.dfa.row(q, s)[2]
            return (bool(sel), False)[:ix.ar[s]]
        uni = self.dfa.universal
        if uni is not None and q == uni:
            return (False,) * ix.ar[s]
        return self._fmemo.get((q << 32) | s)

    def _flags(self, q, s):
        """In-result flag reaching each parameter when s is entered clean.

        The flag at a parameter is the entry flag ORed with the selecting
        transitions taken along first-child edges above it, so computing
        it once for a clean entry is enough; callers OR their own flag in.
        """
        quick = self._flags_quick(q, s)
        if quick is not None:
            return quick
        ix = self.ix
        ret = None
        stack = [(q, s, 0, None)]
        while stack:
            fq, fs, phase, held = stack.pop()
            if phase == 0:
                quick = self._flags_quick(fq, fs)
                if quick is not None:
                    ret = quick
                    continue
                k = fs - ix.null_id - 1
                stack.append((fq, fs, 1, None))
                stack.append((fq, ix.rule_x[k], 0, None))
            elif phase == 1:
                k = fs - ix.null_id - 1
                i = ix.rule_i[k]
                sy = self._cnt.behaviour(fq, ix.rule_x[k])[1][i - 1]
                stack.append((fq, fs, 2, ret))
                stack.append((sy, ix.rule_y[k], 0, None))
            else:
                k = fs - ix.null_id - 1
                i = ix.rule_i[k]
                fx, fy = held, ret
                uy = fx[i - 1]
                val = fx[:i - 1] + tuple(uy or b for b in fy) + fx[i:]
                self._fmemo[(fq << 32) | fs] = val
                ret = val
        return ret

    # ------------------------------------------------------------ chunks

    def _tok(self, lab, s, u):
        """Open and close emit ops for one terminal occurrence."""
        ix = self.ix
        l, r, sel = self.dfa.row(s, lab)
        emit = u or sel
        if ix.text_of[lab]:
            opens = [(_EMIT, VALUE if emit else None, bool(sel), 1)]
            closes = []
        else:
            bump = 2 if ix.elem_of[lab] else 0
            if emit or bump:
                opens = [(_EMIT, lab << 1 if emit else None, bool(sel), bump)]
            else:
                opens = []
            closes = [(_EMIT, (lab << 1) | 1, False, 0)] if emit else []
        return opens, closes, l, r, sel

    def _pieces(self, sym, s, u):
        """Per-slot content of one pattern node, plus slot states and flags.

        pieces[m] is what the node itself contributes between its slots
        m and m+1; slot 1 is the first child, slot 2 the next sibling, so
        a terminal's close tag sits in pieces[1].
        """
        ix = self.ix
        if sym < ix.n_labels:
            opens, closes, l, r, sel = self._tok(sym, s, u)
            ar = ix.ar[sym]
            if ar == 0:
                return [opens + closes], (), ()
            pieces = [opens, closes] + [[] for _ in range(ar - 1)]
            return pieces, (l, r)[:ar], (u or sel, u)[:ar]
        k = sym - ix.null_id - 1
        pst = self._cnt.behaviour(s, sym)[1]
        pfl = self._flags(s, sym)
        pieces = [[(_CHUNK, k, s, m, u)] for m in range(ix.ar[sym] + 1)]
        return pieces, pst, tuple(u or b for b in pfl)

    def _chunk_items(self, k, q, p, u):
        """Work items for chunk p of rule k entered at state q, flag u."""
        ix = self.ix
        xp, xst, xfl = self._pieces(ix.rule_x[k], q, u)
        i = ix.rule_i[k]
        y = ix.rule_y[k]
        seq = [xp[0]]
        for m in range(1, len(xp)):
            if m == i:
                if y != ix.null_id:
                    yp, _, _ = self._pieces(y, xst[i - 1], xfl[i - 1])
                    seq.append(yp[0])
                    for c in range(1, len(yp)):
                        seq.append(None)
                        seq.append(yp[c])
            else:
                seq.append(None)
            seq.append(xp[m])
        items = []
        b = 0
        for el in seq:
            if el is None:
                b += 1
                if b > p:
                    break
            elif b == p:
                items.extend(el)
        return items

    # ------------------------------------------------------------ the walk

    def run(self):
        """Walk the whole start rule once; fills tokens and result marks."""
        if self._ran:
            return self
        self._ran = True
        ix = self.ix
        start = ix.start_tags
        if not start:
            return self
        uni = self.dfa.universal
        jump = self.jump
        irt = self.irt
        res = self.results
        memo = self._memo
        stack = [(_FLAT, 0, self.dfa.initial, False)]
        while stack:
            it = stack.pop()
            op = it[0]
            if op == _EMIT:
                _, tok, mark, bump = it
                if tok is not None:
                    irt.append(tok)
                    if mark:
                        res.append((len(irt), self.num_texts,
                                    self.num_elements))
                if bump == 1:
                    self.num_texts += 1
                elif bump == 2:
                    self.num_elements += 1
            elif op == _FLAT:
                _, p, q, u = it
                s = start[p]
                if s == ix.null_id:
                    continue
                if jump and uni is not None and q == uni and not u:
                    self.num_elements += ix.sskip[p]
                    self.num_texts += ix.textsskip[p]
                    self.stats.skips += 1
                    continue
                if s < ix.n_labels:
                    opens, closes, l, r, sel = self._tok(s, q, u)
                    items = list(opens)
                    if ix.ar[s] >= 1:
                        items.append((_FLAT, p + 1, l, u or sel))
                    items.extend(closes)
                    if ix.ar[s] >= 2:
                        c2 = p + 1 + ix.find_close[p + 1]
                        items.append((_FLAT, c2, r, u))
                else:
                    k = s - ix.null_id - 1
                    pst = self._cnt.behaviour(q, s)[1]
                    pfl = self._flags(q, s)
                    items = [(_CHUNK, k, q, 0, u)]
                    a = p + 1
                    for j in range(ix.ar[s]):
                        items.append((_FLAT, a, pst[j], u or pfl[j]))
                        a += ix.find_close[a]
                        items.append((_CHUNK, k, q, j + 1, u))
                stack.extend(reversed(items))
            elif op == _CHUNK:
                _, k, q, p, u = it
                if jump and uni is not None and q == uni and not u:
                    self.num_elements += ix.prmap[k][p]
                    self.num_texts += ix.textmap[k][p]
                    self.stats.skips += 1
                    continue
                if memo is not None:
                    key = (q, k, p, u)
                    hit = memo.get(key)
                    if hit is not None:
                        z, ln, marks = hit
                        base = len(irt)
                        irt.extend(irt[z:z + ln])
                        for rp, dt, de in marks:
                            res.append((base + rp, self.num_texts + dt,
                                        self.num_elements + de))
                        self.num_texts += ix.textmap[k][p]
                        self.num_elements += ix.prmap[k][p]
                        self.stats.memo_hits += 1
                        continue
                    stack.append((_SAVE, key, len(irt), self.num_texts,
                                  self.num_elements, len(res)))
                self.stats.chunks += 1
                stack.extend(reversed(self._chunk_items(k, q, p, u)))
            else:
                _, key, z0, t0, e0, f0 = it
                marks = tuple((pos - z0, t - t0, e - e0)
                              for pos, t, e in res[f0:])
                memo[key] = (z0, len(irt) - z0, marks)
        return self

    # ------------------------------------------------------------ output

    def result_count(self):
        self.run()
        return len(self.results)

    def serialize(self, texts, sink):
        """Write each selected subtree as XML text; returns the count."""
        self.run()
        if self.ix.n_texts != len(texts):
            raise TextIndexOverflow("index holds %d texts, collection has %d"
                                    % (self.ix.n_texts, len(texts)))
        labels = self.ix.labels
        irt = self.irt
        for pos, t, _ in self.results:
            w = XmlWriter(sink)
            j = pos - 1
            depth = 0
            while True:
                tok = irt[j]
                if tok == VALUE:
                    w.text(texts.get_text(t))
                    t += 1
                    if depth == 0:
                        break
                elif tok & 1:
                    w.close(labels[tok >> 1])
                    depth -= 1
                    if depth == 0:
                        break
                else:
                    w.open(labels[tok >> 1])
                    depth += 1
                j += 1
            w.finish()
        return len(self.results)

    def materialize(self, sink=None):
        """Pre-order numbers of the selected nodes, counted over elements.

        Numbers are 0-based; a selected text node reports how many
        elements precede it.  With a sink, one decimal per line.
        """
        self.run()
        out = [e for _, _, e in self.results]
        if sink is not None:
            for e in out:
                sink("%d\n" % e)
        return out


def serialize_query(ix: TreeIndex, texts, query, sink, jump=True, memo=True):
    """Serialize every subtree the query selects; returns how many."""
    dfa = compile_query(query, ix.labels) if isinstance(query, str) else query
    return PrintEvaluator(ix, dfa, jump=jump, memo=memo).serialize(texts, sink)


def materialize_query(ix: TreeIndex, query, sink=None, jump=True, memo=True):
    """Pre-order numbers of the query's matches; see PrintEvaluator."""
    dfa = compile_query(query, ix.labels) if isinstance(query, str) else query
    return PrintEvaluator(ix, dfa, jump=jump, memo=memo).materialize(sink)
