"""Counting query evaluation directly over the encoded grammar.

The evaluator never expands the grammar.  For a nonterminal X of rank k and
an automaton state q it computes a behaviour: how many nodes inside X's
pattern tree get selected when the automaton enters its root in q, and
which state reaches each of the k parameters.  Behaviours compose along the
rule words bottom-up and are memoized per (state, nonterminal), so each
pair costs one composition no matter how often the pair recurs.

Two shortcuts keep most of the start rule untouched:

- skip: a start position reached in the universal sink state contributes
  nothing; `find_close` hops over the whole subtree;
- jump: when no label generated below X (the `jump` bitmask row) can move
  state q, the behaviour is synthesized without touching X's rule.  In the
  stronger "f" variant labels that only leak into the universal sink are
  ignorable too; the parameter states follow the automaton's common row,
  and for the (sink, q) shape the entry state survives exactly on the
  right spine, which the index's spine bit answers for the last parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

from .automata import QueryAutomaton, compile_query
from .index import TreeIndex

JUMP_MODES = ("off", "relevant", "f")


@dataclass
class CountStats:
    transitions: int = 0
    behaviours: int = 0
    memo_hits: int = 0
    jumps: int = 0
    skips: int = 0


class CountEvaluator:
    """One compiled query over one index; `count()` walks the start rule."""

    def __init__(self, ix: TreeIndex, dfa: QueryAutomaton,
                 jump="f", skip=True):
        if jump not in JUMP_MODES:
            raise ValueError("jump mode %r" % (jump,))
        if list(dfa.label_names) != list(ix.labels):
            raise ValueError("automaton was compiled for a different label table")
        self.ix = ix
        self.dfa = dfa
        self.jump = jump
        self.skip = skip
        self.stats = CountStats()
        self._memo = {}

    # ------------------------------------------------------------ behaviours

    def _quick(self, q, s):
        """Behaviour without composition: terminals, sink entry, jumps."""
        ix = self.ix
        dfa = self.dfa
        if s == ix.null_id:
            return 0, ()
        if s < ix.n_labels:
            l, r, sel = dfa.row(q, s)
            self.stats.transitions += 1
            return (1 if sel else 0), (l, r)[:ix.ar[s]]
        rank = ix.ar[s]
        uni = dfa.universal
        if uni is not None and q == uni:
            return 0, (uni,) * rank
        hit = self._memo.get((q << 32) | s)
        if hit is not None:
            self.stats.memo_hits += 1
            return hit
        k = s - ix.null_id - 1
        row = ix.jump[k]
        if self.jump == "f" and row & dfa.f_relevant[q] == 0 \
                and dfa.f_jump[q] is not None:
            l, r = dfa.f_jump[q]
            if (l, r) == (q, q):
                self.stats.jumps += 1
                return 0, (q,) * rank
            if (l, r) == (uni, uni):
                self.stats.jumps += 1
                return 0, (uni,) * rank
            if (l, r) == (uni, q):
                self.stats.jumps += 1
                if rank == 0:
                    return 0, ()
                last = q if ix.spine[k] else uni
                return 0, (uni,) * (rank - 1) + (last,)
        if self.jump != "off" and row & dfa.relevant[q] == 0:
            self.stats.jumps += 1
            return 0, (q,) * rank
        return None

    def behaviour(self, q, s):
        """(selected count, state per parameter) for symbol s entered in q."""
        quick = self._quick(q, s)
        if quick is not None:
            return quick
        ix = self.ix
        ret = None
        stack = [(q, s, 0, None)]
        while stack:
            fq, fs, phase, bx = stack.pop()
            if phase == 0:
                quick = self._quick(fq, fs)
                if quick is not None:
                    ret = quick
                    continue
                k = fs - ix.null_id - 1
                stack.append((fq, fs, 1, None))
                stack.append((fq, ix.rule_x[k], 0, None))
            elif phase == 1:
                k = fs - ix.null_id - 1
                i = ix.rule_i[k]
                stack.append((fq, fs, 2, ret))
                stack.append((ret[1][i - 1], ix.rule_y[k], 0, None))
            else:
                k = fs - ix.null_id - 1
                i = ix.rule_i[k]
                cx, sx = bx
                cy, sy = ret
                val = (cx + cy, sx[:i - 1] + sy + sx[i:])
                self._memo[(fq << 32) | fs] = val
                self.stats.behaviours += 1
                ret = val
        return ret

    # ------------------------------------------------------------ start walk

    def count(self):
        ix = self.ix
        start = ix.start_tags
        n = len(start)
        if n == 0:
            return 0
        uni = self.dfa.universal
        total = 0
        cur = self.dfa.initial
        pend = []
        p = 0
        while p < n:
            if self.skip and uni is not None and cur == uni:
                self.stats.skips += 1
                p += ix.find_close[p]
            else:
                c, slots = self.behaviour(cur, start[p])
                total += c
                pend.extend(reversed(slots))
                p += 1
            if p < n:
                cur = pend.pop()
        return total


def count_query(ix: TreeIndex, query, jump="f", skip=True) -> int:
    """Number of nodes the query selects; query is a string or automaton."""
    dfa = compile_query(query, ix.labels) if isinstance(query, str) else query
    return CountEvaluator(ix, dfa, jump=jump, skip=skip).count()
