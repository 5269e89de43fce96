"""Fixed-width index over a normalized grammar, plus its query-time tables.

After `to_bcnf` every non-start production is one parent/child pair and
fits a single 64-bit word: Y in bits 0-27, the 1-based argument slot i in
bits 28-31, X in bits 32-59 and the defined nonterminal's rank in bits
60-63.  The start right-hand side stays flat: an array of symbol tags and,
per position, the node count of its subtree (`find_close`), so evaluators
can skip whole subtrees in O(1).

On top of the base encoding the index carries the tables evaluators need
to avoid expansion:

- jump: one bit per (nonterminal, label): does the pattern tree generate
  that label anywhere;
- prmap/textmap: per nonterminal of rank k, k+1 counts of element nodes
  (respectively text and attribute-value placeholders) on each segment of
  the pattern tree between consecutive parameters;
- sskip/textsskip: per start position, total element/placeholder counts of
  the expanded subtree;
- spine: one bit per nonterminal: whether its last parameter sits on the
  right spine of the pattern tree.

"Element" counts cover real document elements only; `_T`/`_AT` leaves feed
the text counters and `_A`/`@name` wrappers count as neither.  Null leaves
never count.  Nonterminals are renumbered so referenced rules always come
first, which makes every table computable in one bottom-up pass.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

from .grammar import GrammarInvalid, SltGrammar, toposort_rules, validate_grammar
from .xml_model import (
    ATTR_CONTAINER_LABEL,
    ATTR_VALUE_LABEL,
    TEXT_LABEL,
    TextCollection,
)

MAGIC = b"TTv1"
TEXTS_MAGIC = b"TTtx"
FORMAT_VERSION = 1

MAX_RANK = 15
MAX_SYMBOL = 1 << 28


class IndexFormatError(Exception):
    """The file is not a readable index of this format."""


class BadMagic(IndexFormatError):
    pass


class VersionMismatch(IndexFormatError):
    pass


class TruncatedFile(IndexFormatError):
    pass


class ChecksumMismatch(IndexFormatError):
    pass


class RankOverflow(ValueError):
    """A nonterminal rank does not fit the 4-bit rule word field."""


class IdOverflow(ValueError):
    """A symbol id does not fit the 28-bit rule word field."""


def _is_element_name(name):
    return (name not in (TEXT_LABEL, ATTR_CONTAINER_LABEL, ATTR_VALUE_LABEL)
            and not name.startswith("@"))


def _is_text_name(name):
    return name in (TEXT_LABEL, ATTR_VALUE_LABEL)


def pack_rule(x, i, y, rank):
    return y | (i << 28) | (x << 32) | (rank << 60)


def unpack_rule(w):
    return (w >> 32) & 0x0FFFFFFF, (w >> 28) & 0xF, w & 0x0FFFFFFF, w >> 60


@dataclass
class TreeIndex:
    """All persisted tables; derived fields are rebuilt, never compared."""

    labels: list
    label_arity: list
    start_tags: list
    find_close: list
    rules: list
    jump: list
    prmap: list
    textmap: list
    sskip: list
    textsskip: list
    spine: list

    n_labels: int = field(default=0, compare=False)
    null_id: int = field(default=0, compare=False)
    rule_x: list = field(default_factory=list, compare=False)
    rule_i: list = field(default_factory=list, compare=False)
    rule_y: list = field(default_factory=list, compare=False)
    rule_rank: list = field(default_factory=list, compare=False)
    ar: list = field(default_factory=list, compare=False)
    elem_of: list = field(default_factory=list, compare=False)
    text_of: list = field(default_factory=list, compare=False)
    n_elements: int = field(default=0, compare=False)
    n_texts: int = field(default=0, compare=False)

    def _finish(self):
        self.n_labels = len(self.labels)
        self.null_id = self.n_labels
        self.rule_x = []
        self.rule_i = []
        self.rule_y = []
        self.rule_rank = []
        for w in self.rules:
            x, i, y, rank = unpack_rule(w)
            self.rule_x.append(x)
            self.rule_i.append(i)
            self.rule_y.append(y)
            self.rule_rank.append(rank)
        self.ar = list(self.label_arity) + [0] + self.rule_rank
        self.elem_of = [1 if _is_element_name(n) else 0 for n in self.labels]
        self.text_of = [1 if _is_text_name(n) else 0 for n in self.labels]
        self.n_elements = self.sskip[0] if self.sskip else 0
        self.n_texts = self.textsskip[0] if self.textsskip else 0
        return self

    # symbol helpers -----------------------------------------------------

    def n_rules(self):
        return len(self.rules)

    def nt_index(self, s):
        return s - self.null_id - 1

    def is_nt(self, s):
        return s > self.null_id

    def arity(self, s):
        return self.ar[s]

    def row_of(self, s):
        """Bitmask of labels generated below symbol s (s itself included)."""
        if s < self.n_labels:
            return 1 << s
        if s == self.null_id:
            return 0
        return self.jump[s - self.null_id - 1]

    def label_id(self, name):
        try:
            return self.labels.index(name)
        except ValueError:
            return None


def _seg_pair(ix_elem, ix_text, ar, null_id, prmap, textmap, s):
    """(element segments, text segments) for one rhs symbol."""
    if s == null_id:
        return [0], [0]
    if s < null_id:
        a = ar[s]
        e = [ix_elem[s]] + [0] * a
        t = [ix_text[s]] + [0] * a
        return e, t
    k = s - null_id - 1
    return prmap[k], textmap[k]


def _compose(segp, segq, i):
    rq = len(segq) - 1
    if rq == 0:
        return segp[:i - 1] + [segp[i - 1] + segq[0] + segp[i]] + segp[i + 1:]
    return (segp[:i - 1] + [segp[i - 1] + segq[0]] + segq[1:rq]
            + [segq[rq] + segp[i]] + segp[i + 1:])


def build_index(g: SltGrammar) -> TreeIndex:
    """Encode a bCNF grammar; raises GrammarInvalid when a rule is not
    a single parent/child pair, RankOverflow/IdOverflow on field limits."""
    validate_grammar(g)
    sym = g.sym
    L = sym.n_labels
    if len(sym) >= MAX_SYMBOL:
        raise IdOverflow("%d symbols exceed the 28-bit id space" % len(sym))
    order = toposort_rules(g)
    remap = {x: L + 1 + k for k, x in enumerate(order)}

    def msym(s):
        return s if s <= L else remap[s]

    labels = list(sym.names[:L])
    label_arity = list(sym.arity[:L])

    rules = []
    triples = []
    for x in order:
        rank = sym.arity[x]
        if rank > MAX_RANK:
            raise RankOverflow("rank %d of rule %d" % (rank, x))
        rhs = g.rules[x]
        if not isinstance(rhs, tuple):
            raise GrammarInvalid("rule %d is not a parent/child pair" % x)
        slot = -1
        y = -1
        for j, c in enumerate(rhs[1:]):
            if isinstance(c, tuple):
                if slot >= 0:
                    raise GrammarInvalid("rule %d has extra inner nodes" % x)
                for cc in c[1:]:
                    if isinstance(cc, tuple) or cc >= 0:
                        raise GrammarInvalid("rule %d has extra inner nodes" % x)
                slot, y = j, c[0]
            elif c >= 0:
                if slot >= 0:
                    raise GrammarInvalid("rule %d has extra inner nodes" % x)
                slot, y = j, c
        if slot < 0:
            raise GrammarInvalid("rule %d has a single node" % x)
        if rank != sym.arity[rhs[0]] - 1 + sym.arity[y]:
            raise GrammarInvalid("rule %d rank mismatch" % x)
        xs, ys, i = msym(rhs[0]), msym(y), slot + 1
        rules.append(pack_rule(xs, i, ys, rank))
        triples.append((xs, i, ys, rank))

    start_tags = [msym(s) for s in g.start]
    ar = label_arity + [0] + [sym.arity[x] for x in order]
    null_id = L

    n = len(start_tags)
    find_close = [0] * n
    stack = []
    for p in range(n - 1, -1, -1):
        e = p + 1
        for _ in range(ar[start_tags[p]]):
            e = stack.pop()
        find_close[p] = e - p
        stack.append(e)

    elem_of = [1 if _is_element_name(nm) else 0 for nm in labels]
    text_of = [1 if _is_text_name(nm) else 0 for nm in labels]
    jump = []
    prmap = []
    textmap = []
    spine = []

    def row_of(s):
        if s < L:
            return 1 << s
        if s == null_id:
            return 0
        return jump[s - null_id - 1]

    def spine_of(s):
        if s < L:
            return 1 if ar[s] == 2 else 0
        if s == null_id:
            return 0
        return spine[s - null_id - 1]

    for xs, i, ys, rank in triples:
        jump.append(row_of(xs) | row_of(ys))
        pe, pt = _seg_pair(elem_of, text_of, ar, null_id, prmap, textmap, xs)
        qe, qt = _seg_pair(elem_of, text_of, ar, null_id, prmap, textmap, ys)
        ce = _compose(pe, qe, i)
        ct = _compose(pt, qt, i)
        if len(ce) != rank + 1:
            raise GrammarInvalid("segment arity mismatch in rule encoding")
        prmap.append(ce)
        textmap.append(ct)
        rx = ar[xs]
        ry = ar[ys]
        if rank == 0:
            spine.append(0)
        elif i < rx:
            spine.append(spine_of(xs))
        elif ry >= 1:
            spine.append(spine_of(xs) & spine_of(ys))
        else:
            spine.append(0)

    sskip = [0] * n
    textsskip = [0] * n
    stack = []
    for p in range(n - 1, -1, -1):
        t = start_tags[p]
        if t < L:
            se, te = elem_of[t], text_of[t]
        elif t == null_id:
            se, te = 0, 0
        else:
            k = t - null_id - 1
            se, te = sum(prmap[k]), sum(textmap[k])
        for _ in range(ar[t]):
            ce, cte = stack.pop()
            se += ce
            te += cte
        sskip[p] = se
        textsskip[p] = te
        stack.append((se, te))

    ix = TreeIndex(labels=labels, label_arity=label_arity,
                   start_tags=start_tags, find_close=find_close, rules=rules,
                   jump=jump, prmap=prmap, textmap=textmap,
                   sskip=sskip, textsskip=textsskip, spine=spine)
    return ix._finish()


# ------------------------------------------------------------------ sizes

def size_formulas(n_rules, n_labels, start_len, pretext_entries):
    """Accounted component sizes in bytes (fractional where bit-packed)."""
    sigma = n_rules + n_labels
    tag_bits = max(1, (sigma - 1).bit_length())
    fc_bits = max(1, (start_len - 1).bit_length()) if start_len else 1
    return [
        ("rules", n_rules * 8.0),
        ("start tags", start_len * tag_bits / 8.0),
        ("find close", start_len * fc_bits / 8.0),
        ("jump", n_rules * n_labels / 8.0),
        ("prMap", pretext_entries * 4.0),
        ("textMap", pretext_entries * 4.0),
        ("SSkip", start_len * 4.0),
        ("textSSkip", start_len * 4.0),
    ]


def index_size_report(ix: TreeIndex):
    """Per-component accounted sizes in bytes, plus a total row."""
    rows = size_formulas(len(ix.rules), len(ix.labels), len(ix.start_tags),
                         sum(len(m) for m in ix.prmap))
    rows.append(("total", sum(b for _, b in rows)))
    return rows


# ------------------------------------------------------------ persistence

_SEC_LABELS = 1
_SEC_START = 2
_SEC_FINDCLOSE = 3
_SEC_RULES = 4
_SEC_JUMP = 5
_SEC_PRMAP = 6
_SEC_TEXTMAP = 7
_SEC_SSKIP = 8
_SEC_TEXTSSKIP = 9
_SEC_SPINE = 10

_ALL_SECTIONS = tuple(range(1, 11))


def _u32s(vals):
    return struct.pack("<I%dI" % len(vals), len(vals), *vals)


def _read_u32s(buf):
    (n,) = struct.unpack_from("<I", buf, 0)
    return list(struct.unpack_from("<%dI" % n, buf, 4))


def _bits_bytes(bits):
    out = bytearray((len(bits) + 7) // 8)
    for i, b in enumerate(bits):
        if b:
            out[i >> 3] |= 1 << (i & 7)
    return bytes(out)


def _bytes_bits(buf, n):
    return [(buf[i >> 3] >> (i & 7)) & 1 for i in range(n)]


def _encode_sections(ix):
    lab = [struct.pack("<I", len(ix.labels))]
    for name, a in zip(ix.labels, ix.label_arity):
        nb = name.encode("utf-8")
        lab.append(struct.pack("<H", len(nb)) + nb + struct.pack("<B", a))
    rowbytes = (len(ix.labels) + 7) // 8
    jump = [struct.pack("<II", len(ix.jump), rowbytes)]
    for row in ix.jump:
        jump.append(row.to_bytes(rowbytes, "little"))
    flat_pr = [v for seg in ix.prmap for v in seg]
    flat_tx = [v for seg in ix.textmap for v in seg]
    return [
        (_SEC_LABELS, b"".join(lab)),
        (_SEC_START, _u32s(ix.start_tags)),
        (_SEC_FINDCLOSE, _u32s(ix.find_close)),
        (_SEC_RULES, struct.pack("<I%dQ" % len(ix.rules), len(ix.rules), *ix.rules)),
        (_SEC_JUMP, b"".join(jump)),
        (_SEC_PRMAP, _u32s(flat_pr)),
        (_SEC_TEXTMAP, _u32s(flat_tx)),
        (_SEC_SSKIP, _u32s(ix.sskip)),
        (_SEC_TEXTSSKIP, _u32s(ix.textsskip)),
        (_SEC_SPINE, struct.pack("<I", len(ix.spine)) + _bits_bytes(ix.spine)),
    ]


def save_index(ix: TreeIndex, path):
    sections = _encode_sections(ix)
    header_len = len(MAGIC) + 4 + 20 * len(sections)
    directory = []
    off = header_len
    for sid, payload in sections:
        directory.append(struct.pack("<IQQ", sid, off, len(payload)))
        off += len(payload) + 4
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HH", FORMAT_VERSION, len(sections)))
        f.write(b"".join(directory))
        for _, payload in sections:
            f.write(payload)
            f.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def _section_table(data):
    if len(data) < len(MAGIC) + 4:
        raise TruncatedFile("file shorter than the header")
    if data[:4] != MAGIC:
        raise BadMagic("not an index file")
    version, nsec = struct.unpack_from("<HH", data, 4)
    if version != FORMAT_VERSION:
        raise VersionMismatch("format version %d, expected %d"
                              % (version, FORMAT_VERSION))
    dir_end = 8 + 20 * nsec
    if len(data) < dir_end:
        raise TruncatedFile("truncated section directory")
    table = {}
    for k in range(nsec):
        sid, off, length = struct.unpack_from("<IQQ", data, 8 + 20 * k)
        if off + length + 4 > len(data):
            raise TruncatedFile("section %d runs past end of file" % sid)
        payload = data[off:off + length]
        (crc,) = struct.unpack_from("<I", data, off + length)
        if zlib.crc32(payload) & 0xFFFFFFFF != crc:
            raise ChecksumMismatch("section %d" % sid)
        table[sid] = payload
    return table


def load_index(path) -> TreeIndex:
    with open(path, "rb") as f:
        data = f.read()
    table = _section_table(data)
    for sid in _ALL_SECTIONS:
        if sid not in table:
            raise TruncatedFile("missing section %d" % sid)

    buf = table[_SEC_LABELS]
    (nlab,) = struct.unpack_from("<I", buf, 0)
    pos = 4
    labels = []
    label_arity = []
    for _ in range(nlab):
        (ln,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        labels.append(buf[pos:pos + ln].decode("utf-8"))
        pos += ln
        label_arity.append(buf[pos])
        pos += 1

    rbuf = table[_SEC_RULES]
    (nr,) = struct.unpack_from("<I", rbuf, 0)
    rules = list(struct.unpack_from("<%dQ" % nr, rbuf, 4))

    jbuf = table[_SEC_JUMP]
    nj, rowbytes = struct.unpack_from("<II", jbuf, 0)
    jump = []
    pos = 8
    for _ in range(nj):
        jump.append(int.from_bytes(jbuf[pos:pos + rowbytes], "little"))
        pos += rowbytes

    flat_pr = _read_u32s(table[_SEC_PRMAP])
    flat_tx = _read_u32s(table[_SEC_TEXTMAP])
    prmap = []
    textmap = []
    pos = 0
    for w in rules:
        k = (w >> 60) + 1
        prmap.append(flat_pr[pos:pos + k])
        textmap.append(flat_tx[pos:pos + k])
        pos += k
    if pos != len(flat_pr) or pos != len(flat_tx):
        raise IndexFormatError("segment tables disagree with rule ranks")

    sbuf = table[_SEC_SPINE]
    (nspine,) = struct.unpack_from("<I", sbuf, 0)
    spine = _bytes_bits(sbuf[4:], nspine)

    ix = TreeIndex(labels=labels, label_arity=label_arity,
                   start_tags=_read_u32s(table[_SEC_START]),
                   find_close=_read_u32s(table[_SEC_FINDCLOSE]),
                   rules=rules, jump=jump, prmap=prmap, textmap=textmap,
                   sskip=_read_u32s(table[_SEC_SSKIP]),
                   textsskip=_read_u32s(table[_SEC_TEXTSSKIP]),
                   spine=spine)
    return ix._finish()


def save_texts(tc: TextCollection, path):
    blobs = [t.encode("utf-8") for t in tc]
    offsets = [0]
    for b in blobs:
        offsets.append(offsets[-1] + len(b))
    payload = b"".join([struct.pack("<I", len(blobs)),
                        struct.pack("<%dQ" % len(offsets), *offsets)] + blobs)
    with open(path, "wb") as f:
        f.write(TEXTS_MAGIC)
        f.write(struct.pack("<H", FORMAT_VERSION))
        f.write(payload)
        f.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def load_texts(path) -> TextCollection:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 6:
        raise TruncatedFile("file shorter than the header")
    if data[:4] != TEXTS_MAGIC:
        raise BadMagic("not a text collection file")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != FORMAT_VERSION:
        raise VersionMismatch("format version %d, expected %d"
                              % (version, FORMAT_VERSION))
    payload = data[6:-4]
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise ChecksumMismatch("text collection payload")
    (count,) = struct.unpack_from("<I", payload, 0)
    need = 4 + 8 * (count + 1)
    if len(payload) < need:
        raise TruncatedFile("truncated text offsets")
    offsets = struct.unpack_from("<%dQ" % (count + 1), payload, 4)
    blob = payload[need:]
    if len(blob) < offsets[-1]:
        raise TruncatedFile("truncated text buffer")
    texts = [blob[offsets[i]:offsets[i + 1]].decode("utf-8")
             for i in range(count)]
    return TextCollection(texts)
