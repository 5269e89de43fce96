"""Deterministic test corpora.

Two generators: `gen_tree` grows random structure trees whose
repetitiveness is tunable (a bias parameter grafts copies of earlier
subtrees, which is what grammar compression feeds on), and
`gen_xmark_like` emits an auction-site document that exercises the whole
benchmark query vocabulary at a size chosen by a scale factor.

Both are pure functions of their arguments; the same seed always
reproduces the same bytes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .xml_model import _N_RESERVED, TEXT, LabelTable, StructureTree, TextCollection

_WORDS = ["aa", "bb", "cc", "dd ee", "ff"]


@dataclass
class TreeGenSpec:
    seed: int = 0
    node_budget: int = 100
    label_count: int = 4
    text_probability: float = 0.0
    repetition_bias: float = 0.0


def gen_label_table(label_count) -> LabelTable:
    """The table `gen_tree` labels refer to: n0, n1, ... after the reserved ids."""
    labels = LabelTable()
    for i in range(label_count):
        labels.intern("n%d" % i)
    return labels


def gen_tree(spec: TreeGenSpec):
    """Random (StructureTree, TextCollection), deterministic in the seed.

    Nodes are created in pre-order, so text placeholders meet the
    collection's rank convention by construction.  With a positive
    repetition bias, a new child is sometimes a copy of an earlier
    subtree instead of fresh growth.
    """
    if spec.node_budget < 1:
        raise ValueError("node_budget must be at least 1")
    for p in (spec.text_probability, spec.repetition_bias):
        if not 0.0 <= p <= 1.0:
            raise ValueError("probabilities must be in [0, 1]")
    rng = random.Random(spec.seed)
    st = StructureTree()
    tc = TextCollection()
    node_text = {}
    left = [spec.node_budget]
    donors = []  # (root, size) of finished fresh subtrees

    def copy(v, parent, prev):
        nid = st.add_node(st.label[v], parent, prev)
        if v in node_text:
            node_text[nid] = node_text[v]
            tc.append(node_text[v])
        last = -1
        for c in st.children(v):
            last = copy(c, nid, last)
        return nid

    def build(parent, prev, budget, depth):
        nid = st.add_node(_N_RESERVED + rng.randrange(spec.label_count),
                          parent, prev)
        b = budget - 1
        last = -1
        while b > 0:
            if rng.random() < spec.text_probability:
                b -= 1
                last = st.add_node(TEXT, nid, last)
                node_text[last] = rng.choice(_WORDS)
                tc.append(node_text[last])
                continue
            if donors and rng.random() < spec.repetition_bias:
                donor = rng.choice(donors)
                if donor[1] <= b:
                    last = copy(donor[0], nid, last)
                    b -= donor[1]
                    continue
            # a skewed split: mostly small children, occasionally a big one
            chunk = 1 + int(b * rng.random() * rng.random())
            if depth >= 40:
                chunk = 1
            last = build(nid, last, chunk, depth + 1)
            b -= chunk
            if 2 <= chunk <= 400:
                donors.append((last, chunk))
        return nid

    build(-1, -1, spec.node_budget, 0)
    return st, tc


_SENTENCES = [
    "the lot ships from a bonded warehouse within three working days",
    "collector grade condition verified by two independent appraisers",
    "payment is held in escrow until the buyer confirms the delivery",
    "includes the original fitted case and the numbered certificate",
    "minor storage wear consistent with age is visible on the lining",
    "reserve not met at the previous listing so bidding restarts low",
]
_KEYWORDS = ["gold", "silver", "vintage", "rare"]


def _run_lengths(rng, n, lengths, weights):
    """n per-record run lengths, held constant over power-of-two blocks.

    Always opens with two records at the longest length, so the longest
    run is present more than once at any corpus size.
    """
    out = [lengths[-1]] * 2
    while len(out) < n:
        k = rng.choices(lengths, weights)[0]
        out.extend([k] * rng.choice((1, 2, 4, 8, 16, 32)))
    del out[n:]
    return out


def gen_xmark_like(scale: float = 1.0, seed=0) -> bytes:
    """Auction-site XML bytes covering the benchmark query vocabulary.

    The site has exactly one `regions` child, items live under
    `regions/europe` with `mailbox/mail/text/keyword` content, and
    closed auction descriptions nest `parlist/listitem` chains, so every
    path the benchmark queries mention is populated.  Record shapes are
    fixed; what varies is run lengths (mails per mailbox, bidders per
    auction, nesting depth), drawn from powers of two and repeated over
    blocks of records, which keeps the document highly repetitive at
    every scale.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    rng = random.Random(seed)
    parts = []
    put = parts.append

    def text_block():
        put("<text>")
        put(rng.choice(_SENTENCES))
        put("<keyword>%s</keyword>" % rng.choice(_KEYWORDS))
        put(rng.choice(_SENTENCES))
        put("</text>")

    def item(i, k):
        put('<item id="i%d">' % i)
        put("<category>%s</category>" % rng.choice(_KEYWORDS))
        put("<mailbox>")
        for _ in range(k):
            put("<mail>")
            text_block()
            put("</mail>")
        put("</mailbox>")
        put("<price>%d.00</price>" % rng.randrange(10, 500))
        put("</item>")

    def open_auction(i, b):
        put('<open_auction id="o%d">' % i)
        put("<initial>%d.25</initial>" % rng.randrange(10, 200))
        for _ in range(b):
            put("<bidder><increase>%d.00</increase></bidder>"
                % rng.randrange(1, 40))
        put("<price>%d.25</price>" % rng.randrange(10, 500))
        put("<annotation><description>")
        put(rng.choice(_SENTENCES))
        put("</description></annotation>")
        put("</open_auction>")

    def closed_auction(i, d):
        put('<closed_auction id="c%d">' % i)
        put("<price>%d.50</price>" % rng.randrange(10, 500))
        put("<annotation><description>")
        text_block()
        for _ in range(d):
            put("<parlist><listitem>")
        text_block()
        for _ in range(d):
            put("</listitem></parlist>")
        put("</description></annotation>")
        put("</closed_auction>")

    n_items = max(1, round(300 * scale))
    n_open = max(1, round(240 * scale))
    n_closed = max(1, round(360 * scale))
    mails = _run_lengths(rng, n_items,
                         (1, 2, 4, 8, 16, 32, 64, 128, 256, 512),
                         (250, 200, 200, 150, 100, 60, 30, 8, 2, 1))
    bids = _run_lengths(rng, n_open, (1, 2, 4, 8, 16, 32, 64, 128),
                        (25, 22, 20, 15, 10, 6, 2, 1))
    nests = _run_lengths(rng, n_closed, (1, 2, 4, 8, 16, 32),
                         (30, 25, 20, 15, 7, 3))

    put("<site>")
    put("<regions><europe>")
    for i, k in enumerate(mails):
        item(i, k)
    put("</europe></regions>")
    put("<open_auctions>")
    for i, b in enumerate(bids):
        open_auction(i, b)
    put("</open_auctions>")
    put("<closed_auctions>")
    for i, d in enumerate(nests):
        closed_auction(i, d)
    put("</closed_auctions>")
    put("</site>")
    return "".join(parts).encode()


BENCHMARK_QUERIES = {
    "Q01": "/site/regions",
    "Q02": "/site/closed_auctions",
    "Q03": "/site/regions/europe/item/mailbox/mail/text/keyword",
    "Q04": "/site/closed_auctions/closed_auction/annotation/description"
           "/parlist/listitem",
    "Q05": "/site/closed_auctions/closed_auction/annotation/description"
           "/parlist/listitem/parlist/listitem/*//keyword",
    "Q06": "/site/regions/*/item",
    "Q07": "//listitem//keyword",
    "Q08": "/site/regions/*/item//keyword",
    "Q13": "//*",
    "Q14": "//*//*",
    "Q15": "//*//*//*//*",
    "Q16": "//*//*//*//*//*//*//*//*",
    "X1": "/site/closed_auctions/closed_auction/annotation/description"
          "/text/keyword",
    "X2": "//closed_auction//keyword",
    "X3": "/site/closed_auctions/closed_auction//keyword",
}
